#ifndef EDIAG_ERROR_H_
#define EDIAG_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace ediag {

enum class ErrorCode {
  kInvalidArgument,
  kDomainNotFound,
  kPermissionDenied,
  kBackendClosed,
  kEndOfReplay,
  kInsufficientSamples,
  kEmptyCurve,
  kSpawnFailure,
  kMalformedJson,
  kNegativeDuration,
  kParseError,
  kNoCheckpointsFound,
  kOutOfSpan,
  kNoRuns,
  kZeroBaseline,
  kNoOverlap,
  kGridMismatch,
  kAllocationFailure,
  kSpecOverflow,
  kIoError,
  kMissingFixture,
};

// Stable identifier used in machine-readable diagnostics ("DomainNotFound").
std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ediag

#endif  // EDIAG_ERROR_H_
