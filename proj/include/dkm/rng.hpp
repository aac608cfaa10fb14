#pragma once

#include <cstdint>

#include "dkm/types.hpp"

namespace dkm {

// Deterministic random stream: xoshiro256++ seeded through splitmix64.
// The integer stream is identical across platforms for a given seed;
// Gaussian variates use the Box-Muller transform (not Ziggurat), so they
// are reproducible wherever libm gives the same log/cos/sqrt results.
// One stream must be owned by one thread at a time; use substream() to
// derive independent streams for parallel replicates.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  // Uniform on [0,1) with 53-bit resolution.
  double uniform01();

  // Uniform on (0,1]; used where log(u) must stay finite.
  double uniform01_open0();

  // Standard normal via Box-Muller (second variate cached).
  double normal();

  // Gamma(shape, rate) by Marsaglia-Tsang squeeze; shape<1 handled by the
  // usual boosting trick. Throws BadParam on non-positive parameters.
  double gamma(double shape, double rate);

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Independent stream derived from (seed, idx); deterministic.
  RngStream substream(std::uint64_t idx) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

// n x p matrix of iid standard normals, filled row by row.
Matrix sample_std_normal(RngStream& rng, Index n, Index p);

// n iid Gamma(shape, rate) draws.
Vector sample_gamma(RngStream& rng, double shape, double rate, Index n);

// Fisher-Yates shuffle of 0..n-1.
std::vector<int> shuffled_indices(RngStream& rng, int n);

}  // namespace dkm
