#pragma once

#include <cstdint>
#include <random>

namespace rankscl {

// Independent PRNG streams used by one run. Each consumer derives its own
// stream from the run seed so that, e.g., changing the augmentation count
// does not shift the shuffle order.
enum class Stream : std::uint64_t {
  init = 0x696e6974ULL,
  shuffle = 0x73687566ULL,
  augment = 0x61756720ULL,
};

// splitmix64(seed XOR index) mixed with the stream salt.
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index);

// mt19937_64 with platform-independent uniform and Gaussian draws
// (the std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Stream stream, std::uint64_t index)
      : engine_(derive_seed(seed, stream, index)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rankscl
