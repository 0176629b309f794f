#include "ediag/isolation_bench.h"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <memory>
#include <new>
#include <thread>

#include <json.hpp>

#include "copy_primitive.h"
#include "ediag/error.h"
#include "ediag/rng.h"

namespace ediag {

namespace {

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

// Zero-initialised on first touch by the kernel; avoids a memset pass.
struct Buffer {
  std::unique_ptr<uint8_t[]> data;
  size_t size = 0;

  std::span<uint8_t> span() { return {data.get(), size}; }
};

Buffer Allocate(size_t bytes) {
  Buffer b;
  b.size = bytes;
  b.data.reset(new (std::nothrow) uint8_t[bytes == 0 ? 1 : bytes]);
  if (!b.data) {
    throw Error(ErrorCode::kAllocationFailure,
                "cannot allocate " + std::to_string(bytes) + " bytes");
  }
  return b;
}

double SecondsSince(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void CheckBufferSpec(const BenchSpec& spec) {
  if (spec.buffer_bytes == 0)
    throw Error(ErrorCode::kInvalidArgument, "buffer_bytes must be > 0");
  if (spec.repetitions < 1)
    throw Error(ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  if (spec.workers < 1)
    throw Error(ErrorCode::kInvalidArgument, "workers must be >= 1");
}

void CheckElementSpec(const BenchSpec& spec) {
  if (spec.buffer_bytes == 0)
    throw Error(ErrorCode::kInvalidArgument, "buffer_bytes must be > 0");
  if (spec.element_literal.empty())
    throw Error(ErrorCode::kInvalidArgument, "element literal must be non-empty");
  for (size_t c : spec.element_counts) {
    if (c * spec.element_literal.size() > spec.buffer_bytes) {
      throw Error(ErrorCode::kSpecOverflow,
                  std::to_string(c) + " elements of " +
                      std::to_string(spec.element_literal.size()) +
                      " bytes exceed the " + std::to_string(spec.buffer_bytes) +
                      "-byte destination");
    }
  }
}

// Runs `body(worker_index)` on `workers` threads (inline when 1).
template <typename Fn>
void ForEachWorker(int workers, Fn body) {
  if (workers == 1) {
    body(0);
    return;
  }
  std::vector<std::jthread> threads;
  for (int w = 0; w < workers; ++w) threads.emplace_back([&body, w] { body(w); });
}

size_t MaxElementBytes(const BenchSpec& spec) {
  size_t max_count = 0;
  for (size_t c : spec.element_counts) max_count = std::max(max_count, c);
  return max_count * spec.element_literal.size();
}

uint64_t ElementBytesPerIteration(const BenchSpec& spec) {
  uint64_t sum = 0;
  for (size_t c : spec.element_counts) sum += c;
  return sum * spec.element_literal.size();
}

}  // namespace

std::string_view BenchPatternName(BenchPattern pattern) {
  switch (pattern) {
    case BenchPattern::kBulk: return "bulk";
    case BenchPattern::kChunked: return "chunked";
    case BenchPattern::kMem2MemElements: return "mem2mem_elements";
    case BenchPattern::kCachedElements: return "cached_elements";
  }
  return "bulk";
}

BenchPattern ParseBenchPattern(std::string_view name) {
  for (BenchPattern p : {BenchPattern::kBulk, BenchPattern::kChunked,
                         BenchPattern::kMem2MemElements,
                         BenchPattern::kCachedElements}) {
    if (BenchPatternName(p) == name) return p;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown pattern '" + std::string(name) +
                  "' (expected bulk|chunked|mem2mem_elements|cached_elements)");
}

BenchSpec DeskSpec(BenchPattern pattern) {
  BenchSpec spec;
  spec.pattern = pattern;
  if (pattern == BenchPattern::kMem2MemElements ||
      pattern == BenchPattern::kCachedElements) {
    spec.buffer_bytes = 3000;
  }
  return spec;
}

BenchSpec FullSpec(BenchPattern pattern) {
  BenchSpec spec = DeskSpec(pattern);
  if (pattern == BenchPattern::kBulk || pattern == BenchPattern::kChunked)
    spec.buffer_bytes = size_t{12} << 30;
  spec.iterations = 40'000'000;
  return spec;
}

uint64_t Checksum64(std::span<const uint8_t> bytes) {
  uint64_t h = kFnvOffset;
  size_t i = 0;
  for (; i + 8 <= bytes.size(); i += 8) {
    uint64_t word = 0;
    for (int b = 7; b >= 0; --b) word = (word << 8) | bytes[i + static_cast<size_t>(b)];
    h = (h ^ word) * kFnvPrime;
  }
  for (; i < bytes.size(); ++i) h = (h ^ bytes[i]) * kFnvPrime;
  return h;
}

void FillSeeded(std::span<uint8_t> bytes, uint64_t seed) {
  SeededRng rng(seed);
  size_t i = 0;
  while (i < bytes.size()) {
    uint64_t word = rng.Next();
    for (int b = 0; b < 8 && i < bytes.size(); ++b, ++i) {
      bytes[i] = static_cast<uint8_t>(word & 0xff);
      word >>= 8;
    }
  }
}

BenchResult RunBulk(const BenchSpec& spec) {
  CheckBufferSpec(spec);
  Buffer src = Allocate(spec.buffer_bytes);
  Buffer dst = Allocate(spec.buffer_bytes);
  FillSeeded(src.span(), spec.seed);

  const size_t slice =
      (spec.buffer_bytes + static_cast<size_t>(spec.workers) - 1) /
      static_cast<size_t>(spec.workers);
  const auto start = std::chrono::steady_clock::now();
  for (int rep = 0; rep < spec.repetitions; ++rep) {
    ForEachWorker(spec.workers, [&](int w) {
      const size_t lo = std::min(spec.buffer_bytes, slice * static_cast<size_t>(w));
      const size_t hi = std::min(spec.buffer_bytes, lo + slice);
      if (hi > lo) OpaqueCopy(dst.data.get() + lo, src.data.get() + lo, hi - lo);
    });
  }
  BenchResult r;
  r.pattern = BenchPattern::kBulk;
  r.wall_s = SecondsSince(start);
  r.bytes_copied = static_cast<uint64_t>(spec.buffer_bytes) *
                   static_cast<uint64_t>(spec.repetitions);
  r.copy_calls = static_cast<uint64_t>(spec.repetitions) *
                 static_cast<uint64_t>(std::min<size_t>(
                     static_cast<size_t>(spec.workers),
                     (spec.buffer_bytes + slice - 1) / slice));
  r.checksum = Checksum64(dst.span());
  r.source_checksum = Checksum64(src.span());
  r.effective_buffer_bytes = spec.buffer_bytes;
  return r;
}

BenchResult RunChunked(const BenchSpec& spec) {
  CheckBufferSpec(spec);
  if (spec.chunk_count < 1)
    throw Error(ErrorCode::kInvalidArgument, "chunk_count must be >= 1");
  const size_t chunk = (spec.buffer_bytes + spec.chunk_count - 1) / spec.chunk_count;
  const size_t total = chunk * spec.chunk_count;
  Buffer src = Allocate(total);
  Buffer dst = Allocate(total);
  FillSeeded(src.span(), spec.seed);

  const size_t workers = static_cast<size_t>(spec.workers);
  const size_t per_worker = (spec.chunk_count + workers - 1) / workers;
  const auto start = std::chrono::steady_clock::now();
  for (int rep = 0; rep < spec.repetitions; ++rep) {
    ForEachWorker(spec.workers, [&](int w) {
      const size_t first = std::min(spec.chunk_count, per_worker * static_cast<size_t>(w));
      const size_t last = std::min(spec.chunk_count, first + per_worker);
      uint8_t* d = dst.data.get() + first * chunk;
      const uint8_t* s = src.data.get() + first * chunk;
      for (size_t c = first; c < last; ++c, d += chunk, s += chunk)
        OpaqueCopy(d, s, chunk);
    });
  }
  BenchResult r;
  r.pattern = BenchPattern::kChunked;
  r.wall_s = SecondsSince(start);
  r.bytes_copied = static_cast<uint64_t>(total) * static_cast<uint64_t>(spec.repetitions);
  r.copy_calls = static_cast<uint64_t>(spec.chunk_count) *
                 static_cast<uint64_t>(spec.repetitions);
  r.checksum = Checksum64(dst.span());
  r.source_checksum = Checksum64(src.span());
  r.effective_buffer_bytes = total;
  return r;
}

BenchResult RunMem2MemElements(const BenchSpec& spec) {
  CheckElementSpec(spec);
  const size_t len = spec.element_literal.size();
  Buffer src = Allocate(spec.buffer_bytes);
  Buffer dst = Allocate(spec.buffer_bytes);
  for (size_t i = 0; i < spec.buffer_bytes; ++i)
    src.data[i] = static_cast<uint8_t>(spec.element_literal[i % len]);
  std::memset(dst.data.get(), 0, dst.size);

  const auto start = std::chrono::steady_clock::now();
  for (uint64_t it = 0; it < spec.iterations; ++it) {
    for (size_t count : spec.element_counts) {
      uint8_t* d = dst.data.get();
      const uint8_t* s = src.data.get();
      for (size_t e = 0; e < count; ++e, d += len, s += len) OpaqueCopy(d, s, len);
    }
  }
  BenchResult r;
  r.pattern = BenchPattern::kMem2MemElements;
  r.wall_s = SecondsSince(start);
  r.bytes_copied = ElementBytesPerIteration(spec) * spec.iterations;
  r.copy_calls = r.bytes_copied / len;
  const size_t prefix = spec.iterations > 0 ? MaxElementBytes(spec) : 0;
  r.checksum = Checksum64({dst.data.get(), prefix});
  r.source_checksum = Checksum64({src.data.get(), prefix});
  r.effective_buffer_bytes = spec.buffer_bytes;
  return r;
}

BenchResult RunCachedElements(const BenchSpec& spec) {
  CheckElementSpec(spec);
  const size_t len = spec.element_literal.size();
  const std::string literal = spec.element_literal;
  Buffer dst = Allocate(spec.buffer_bytes);
  std::memset(dst.data.get(), 0, dst.size);

  const auto start = std::chrono::steady_clock::now();
  for (uint64_t it = 0; it < spec.iterations; ++it) {
    for (size_t count : spec.element_counts) {
      uint8_t* d = dst.data.get();
      for (size_t e = 0; e < count; ++e, d += len) OpaqueCopy(d, literal.data(), len);
    }
  }
  BenchResult r;
  r.pattern = BenchPattern::kCachedElements;
  r.wall_s = SecondsSince(start);
  r.bytes_copied = ElementBytesPerIteration(spec) * spec.iterations;
  r.copy_calls = r.bytes_copied / len;
  const size_t prefix = spec.iterations > 0 ? MaxElementBytes(spec) : 0;
  r.checksum = Checksum64({dst.data.get(), prefix});
  std::vector<uint8_t> expected(prefix);
  for (size_t i = 0; i < prefix; ++i)
    expected[i] = static_cast<uint8_t>(literal[i % len]);
  r.source_checksum = Checksum64(expected);
  r.effective_buffer_bytes = spec.buffer_bytes;
  return r;
}

BenchResult RunPattern(const BenchSpec& spec) {
  switch (spec.pattern) {
    case BenchPattern::kBulk: return RunBulk(spec);
    case BenchPattern::kChunked: return RunChunked(spec);
    case BenchPattern::kMem2MemElements: return RunMem2MemElements(spec);
    case BenchPattern::kCachedElements: return RunCachedElements(spec);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown pattern");
}

BenchResult RunPatternMeasured(const BenchSpec& spec,
                               const BackendConfig& backend_config,
                               int64_t sample_interval_ms) {
  auto clock = std::make_shared<SteadyClock>();
  std::unique_ptr<EnergyBackend> backend = MakeBackend(backend_config, clock);
  const auto domains = backend->Domains();
  if (domains.empty())
    throw Error(ErrorCode::kDomainNotFound, "energy backend exposes no domains");
  const std::string domain = domains.front().id;

  SampleSeries series;
  std::exception_ptr sampler_error;
  std::jthread sampler([&](std::stop_token stop) {
    try {
      series = CollectSeries(*backend, domain, sample_interval_ms, stop);
    } catch (...) {
      sampler_error = std::current_exception();
    }
  });
  const double t0 = static_cast<double>(clock->NowMs());
  BenchResult result = RunPattern(spec);
  const double t1 = static_cast<double>(clock->NowMs());
  sampler.request_stop();
  sampler.join();
  if (sampler_error) std::rethrow_exception(sampler_error);
  if (series.readings.size() >= 2)
    result.energy_j = IntegrateEnergy(ToPower(series), t0, t1);
  return result;
}

std::string BenchResultToJson(const BenchResult& r, const BenchSpec& spec) {
  nlohmann::json doc = {
      {"pattern", BenchPatternName(r.pattern)},
      {"wall_s", r.wall_s},
      {"bytes_copied", r.bytes_copied},
      {"copy_calls", r.copy_calls},
      {"checksum", r.checksum},
      {"source_checksum", r.source_checksum},
      {"content_ok", r.content_ok()},
      {"effective_buffer_bytes", r.effective_buffer_bytes},
      {"energy_j", r.energy_j ? nlohmann::json(*r.energy_j) : nlohmann::json(nullptr)},
      {"spec",
       {{"buffer_bytes", spec.buffer_bytes},
        {"chunk_count", spec.chunk_count},
        {"element_literal", spec.element_literal},
        {"element_counts", spec.element_counts},
        {"iterations", spec.iterations},
        {"repetitions", spec.repetitions},
        {"workers", spec.workers},
        {"seed", spec.seed}}},
  };
  return doc.dump(2) + "\n";
}

}  // namespace ediag
