#include "ediag/error.h"

namespace ediag {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDomainNotFound: return "DomainNotFound";
    case ErrorCode::kPermissionDenied: return "PermissionDenied";
    case ErrorCode::kBackendClosed: return "BackendClosed";
    case ErrorCode::kEndOfReplay: return "EndOfReplay";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kEmptyCurve: return "EmptyCurve";
    case ErrorCode::kSpawnFailure: return "SpawnFailure";
    case ErrorCode::kMalformedJson: return "MalformedJson";
    case ErrorCode::kNegativeDuration: return "NegativeDuration";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kNoCheckpointsFound: return "NoCheckpointsFound";
    case ErrorCode::kOutOfSpan: return "OutOfSpan";
    case ErrorCode::kNoRuns: return "NoRuns";
    case ErrorCode::kZeroBaseline: return "ZeroBaseline";
    case ErrorCode::kNoOverlap: return "NoOverlap";
    case ErrorCode::kGridMismatch: return "GridMismatch";
    case ErrorCode::kAllocationFailure: return "AllocationFailure";
    case ErrorCode::kSpecOverflow: return "SpecOverflow";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kMissingFixture: return "MissingFixture";
  }
  return "Unknown";
}

}  // namespace ediag
