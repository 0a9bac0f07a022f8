#include "fbcontrol/rng.hpp"

#include <cmath>

namespace fbcontrol {

namespace {

// splitmix64: passes through the full 64-bit state space, no weak seeds.
std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t stream_id) {
  // Mix the stream id through one scramble round before combining so that
  // consecutive ids do not produce correlated openings.
  std::uint64_t s = stream_id;
  std::uint64_t mixed = splitmix64_next(s);
  state_ = seed ^ (mixed + 0x9e3779b97f4a7c15ULL);
  // Warm up once; a zero-ish combined state otherwise emits a small first word.
  (void)splitmix64_next(state_);
}

std::uint64_t NormalStream::next_u64() { return splitmix64_next(state_); }

double NormalStream::next_uniform() {
  // 53 high bits -> [0, 1) on the dyadic grid.
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double NormalStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 is shifted off zero so log stays finite.
  double u1 = 0.0;
  do {
    u1 = next_uniform();
  } while (u1 <= 0.0);
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  has_spare_ = true;
  return r * std::cos(kTwoPi * u2);
}

std::vector<double> gaussian_increments(std::uint64_t seed, std::uint64_t stream_id,
                                        std::size_t n, double scale) {
  NormalStream stream(seed, stream_id);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = scale * stream.next();
  return out;
}

}
