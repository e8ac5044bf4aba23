#ifndef KAGNN_RNG_HPP
#define KAGNN_RNG_HPP

#include <cstdint>

namespace kagnn {

// Deterministic generator used everywhere randomness is needed. No global
// state: every call site receives an Rng (or a seed) explicitly, and all
// derived streams come from Rng::stream so one top-level seed reproduces a
// whole run bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // SplitMix64 warm-up so nearby seeds decorrelate.
    next();
  }

  // xorshift-free SplitMix64 step: full 64-bit period, cheap, and identical
  // on every platform (unlike std distributions).
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range.
  int uniform_int(int lo, int hi) {
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Child stream derived from the current seed and a caller-chosen tag.
  // Tags are small constants (see rng_streams below); the same (seed, tag)
  // pair always yields the same stream.
  Rng stream(std::uint64_t tag) const {
    return Rng(state_ ^ (0x9e3779b97f4a7c15ULL * (tag + 1)));
  }

 private:
  std::uint64_t state_;
};

// Stream tags used by the toolkit. One CLI-level seed fans out through these.
namespace rng_streams {
inline constexpr std::uint64_t model_init = 1;
inline constexpr std::uint64_t epoch_shuffle = 2;
inline constexpr std::uint64_t dropout = 3;
inline constexpr std::uint64_t synth = 4;
inline constexpr std::uint64_t split = 5;
inline constexpr std::uint64_t subsample = 6;
inline constexpr std::uint64_t search = 7;
}  // namespace rng_streams

}  // namespace kagnn

#endif
