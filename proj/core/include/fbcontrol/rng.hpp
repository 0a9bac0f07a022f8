#pragma once

#include <cstdint>
#include <vector>

namespace fbcontrol {

/// Deterministic normal generator over a splitmix64 stream.  Each (seed,
/// stream_id) pair owns an independent stream, so per-path draws do not
/// depend on scheduling or worker count, and the output is identical across
/// standard-library implementations (no std::normal_distribution).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Standard normal variate via Box-Muller.
  double next();

  /// Uniform in [0, 1).
  double next_uniform();

 private:
  std::uint64_t next_u64();

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// n standard normal draws for one path, scaled by `scale`.
std::vector<double> gaussian_increments(std::uint64_t seed, std::uint64_t stream_id,
                                        std::size_t n, double scale = 1.0);

}
