#ifndef CVSEP_RNG_HPP
#define CVSEP_RNG_HPP

#include <cstdint>
#include <limits>

namespace cvsep {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// SplitMix64 stream; satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64_mix(state_);
  }

 private:
  std::uint64_t state_;
};

/// Independent stream for one record, keyed by (seed, cell, index). The
/// output depends only on the key, never on evaluation order.
inline SplitMix64 record_stream(std::uint64_t seed, std::uint64_t cell, std::uint64_t index) {
  std::uint64_t key = splitmix64_mix(seed ^ 0x6a09e667f3bcc909ULL);
  key = splitmix64_mix(key ^ splitmix64_mix(cell + 0x3c6ef372fe94f82bULL));
  key = splitmix64_mix(key ^ splitmix64_mix(index + 0xa54ff53a5f1d36f1ULL));
  return SplitMix64(key);
}

}  // namespace cvsep

#endif  // CVSEP_RNG_HPP
