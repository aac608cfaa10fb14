#include "dkm/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace dkm {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (int i = 0; i < 4; ++i) state_[i] = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
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

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform01_open0() {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double RngStream::normal() {
  if (have_cached_normal_) {
    have_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = uniform01_open0();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(a);
  have_cached_normal_ = true;
  return r * std::cos(a);
}

double RngStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw BadParam("gamma: shape and rate must be positive");
  double boost = 1.0;
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a+1) * U^{1/a}
    boost = std::pow(uniform01_open0(), 1.0 / shape);
    shape += 1.0;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01_open0();
    if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return boost * d * v / rate;
  }
}

std::uint64_t RngStream::below(std::uint64_t n) {
  // rejection to avoid modulo bias
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

RngStream RngStream::substream(std::uint64_t idx) const {
  std::uint64_t sm = seed_ ^ (0xA0761D6478BD642FULL * (idx + 1));
  std::uint64_t child = splitmix64(sm);
  child = splitmix64(sm) ^ child;
  return RngStream(child);
}

Matrix sample_std_normal(RngStream& rng, Index n, Index p) {
  if (n < 1 || p < 1) throw BadParam("sample_std_normal: n, p must be >= 1");
  Matrix out(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) out(i, j) = rng.normal();
  return out;
}

Vector sample_gamma(RngStream& rng, double shape, double rate, Index n) {
  Vector out(n);
  for (Index i = 0; i < n; ++i) out[i] = rng.gamma(shape, rate);
  return out;
}

std::vector<int> shuffled_indices(RngStream& rng, int n) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

}  // namespace dkm
