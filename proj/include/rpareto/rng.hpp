#ifndef RPARETO_RNG_HPP
#define RPARETO_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>

namespace rpareto {

inline std::uint64_t splitmix64_next(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic splittable RNG: xoshiro256++ seeded via splitmix64.
// fork(tag) derives an independent stream from the stream's key and the
// tag, regardless of how many draws were made, which is what makes the
// per-iteration / per-observation substream layout reproducible at any
// worker count.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64_next(s);
  }

  RngStream fork(std::uint64_t tag) const {
    std::uint64_t s = key_ ^ (0x9e3779b97f4a7c15ULL + tag * 0xd1342543de82ef95ULL);
    return RngStream(splitmix64_next(s));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0,1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1].
  double uniform_pos() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * M_PI * u2;
    cached_ = rad * std::sin(ang);
    have_cached_ = true;
    return rad * std::cos(ang);
  }

  std::uint64_t key() const { return key_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t key_;
  std::array<std::uint64_t, 4> state_{};
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace rpareto

#endif
