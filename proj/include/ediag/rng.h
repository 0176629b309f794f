#ifndef EDIAG_RNG_H_
#define EDIAG_RNG_H_

#include <cstdint>
#include <random>

namespace ediag {

// The one pseudo-random generator used across the toolkit: std::mt19937_64,
// whose output sequence is fixed by the C++ standard, plus bounded draws that
// do not depend on the library's distribution implementations. Golden files
// (schedules, benchmark checksums) depend on this staying unchanged.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : engine_(seed) {}

  uint64_t Next() { return engine_(); }

  // Uniform integer in [0, bound) by rejection sampling. bound must be > 0.
  uint64_t Below(uint64_t bound);

  // Uniform double in [0, 1) built from the top 53 bits.
  double Unit() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

inline uint64_t SeededRng::Below(uint64_t bound) {
  // Reject the final partial block so every residue is equally likely.
  const uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
  uint64_t x;
  do {
    x = Next();
  } while (x > limit);
  return x % bound;
}

}  // namespace ediag

#endif  // EDIAG_RNG_H_
