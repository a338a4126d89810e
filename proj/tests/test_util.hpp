#pragma once

#include <cstdint>
#include <random>

#include "ofr/types.hpp"

namespace ofr::test {

inline Frame random_frame(int h, int w, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Frame f(h, w, c);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = u(rng);
  return f;
}

inline Conv random_conv(int k, int cin, int cout, int padding, int stride, std::uint64_t seed) {
  Conv spec = Conv::zeros(k, k, cin, cout, padding, stride);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Eigen::Index i = 0; i < spec.kernel.size(); ++i) spec.kernel.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < spec.bias.size(); ++i) spec.bias.data()[i] = u(rng);
  return spec;
}

inline double max_abs_diff(const Frame& a, const Frame& b) { return (a.array() - b.array()).abs().maxCoeff(); }

}  // namespace ofr::test
