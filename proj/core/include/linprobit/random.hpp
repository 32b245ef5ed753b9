#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace linprobit {

/// Seeded random stream with platform-independent draws.
///
/// std::normal_distribution is implementation-defined, so normal variates
/// are generated here by inversion from 53-bit uniforms. A stream is keyed by
/// a list of integers (for example seed, cell index, trial index) so parallel
/// work units get independent streams that do not depend on scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::initializer_list<std::uint64_t> key);

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Draw from N(mean, 1) truncated to (0, inf) when positive is true and to
  /// (-inf, 0) otherwise. Inversion, in log space for tail bounds; valid for
  /// any finite mean.
  double truncated_unit_normal(double mean, bool positive);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace linprobit
