#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>

#include "ofr/feature_refine.hpp"
#include "ofr/params.hpp"
#include "test_util.hpp"

using namespace ofr;
using ofr::test::max_abs_diff;
using ofr::test::random_frame;

namespace {

Frame brute_correlation(const Frame& a, const Frame& b, int k) {
  Frame out(a.height(), a.width(), a.channels());
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < a.channels(); ++c) {
        double acc = 0.0;
        for (int oy = -k; oy <= k; ++oy)
          for (int ox = -k; ox <= k; ++ox) {
            const int yy = y + oy, xx = x + ox;
            if (yy < 0 || xx < 0 || yy >= a.height() || xx >= a.width()) continue;
            acc += a(yy, xx, c) * b(yy, xx, c);
          }
        out(y, x, c) = acc;
      }
  return out;
}

struct Frm {
  ParamSet params;
  FrmWeights w;
};

Frm random_frm(int channels, std::uint64_t seed) {
  Frm f;
  f.w = add_frm_layers(f.params, "frm", channels, 0.1);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& a : f.params.arrays())
    for (Eigen::Index i = 0; i < a.values.size(); ++i) a.values[i] = n(rng);
  return f;
}

double seconds_for(int h, int w) {
  const Frame a = random_frame(h, w, 16, 1), b = random_frame(h, w, 16, 2);
  const auto t0 = std::chrono::steady_clock::now();
  double sink = 0.0;
  for (int r = 0; r < 5; ++r) sink += local_correlation(a, b, 1)(0, 0, 0);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sink > -1e300 ? dt : 0.0;
}

}  // namespace

TEST_CASE("local correlation matches the brute-force patch sum") {
  for (int seed = 0; seed < 20; ++seed) {
    const Frame a = random_frame(5, 5, 2, 100 + seed, -1, 1), b = random_frame(5, 5, 2, 200 + seed, -1, 1);
    for (int k : {0, 1, 2}) CHECK(max_abs_diff(local_correlation(a, b, k), brute_correlation(a, b, k)) < 1e-12);
  }
  const Frame a = random_frame(7, 9, 3, 3, -1, 1), b = random_frame(7, 9, 3, 4, -1, 1);
  CHECK(max_abs_diff(local_correlation(a, b, 0), hadamard(a, b)) == 0.0);
  CHECK((local_correlation(a, Frame(7, 9, 3), 1).array() == 0.0).all());
  CHECK(max_abs_diff(local_correlation(a, b, 1), local_correlation(b, a, 1)) == 0.0);
  CHECK(max_abs_diff(local_correlation(2.5 * a, b, 1), 2.5 * local_correlation(a, b, 1)) < 1e-12);

  CHECK_THROWS_AS(local_correlation(a, Frame(7, 8, 3), 1), ShapeError);
  CHECK_THROWS_AS(local_correlation(a, b, -1), ParameterError);
}

TEST_CASE("local correlation cost is linear in the pixel count") {
  seconds_for(64, 64);
  const double small = seconds_for(128, 128), large = seconds_for(256, 128);
  CHECK(large / small < 3.5);
}

TEST_CASE("refine with zero hidden state returns the blend bias") {
  Frm f = random_frm(4, 5);
  const Frame out = refine(Frame(6, 6, 4), random_frame(6, 6, 3, 6), f.params, f.w, 1);
  const Conv& blend = f.params.layer(f.w.blend);
  for (int c = 0; c < 4; ++c) CHECK((out.array().col(c) == blend.bias(c)).all());
}

TEST_CASE("saturated attention with identity blend returns the hidden state") {
  ParamSet params;
  const FrmWeights w = add_frm_layers(params, "frm", 3, 0.1);
  Conv& proj = params.layer(w.projection);
  for (int c = 0; c < 3; ++c) proj.weight(1, 1, c, c) = 200.0;  // f_lr = 200 lr
  Conv& blend = params.layer(w.blend);
  for (int c = 0; c < 3; ++c) blend.weight(0, 0, c, c) = 1.0;  // out = optimized
  const Frame lr = random_frame(5, 5, 3, 7, 0.5, 1.0), hs = random_frame(5, 5, 3, 8, 0.5, 1.0);
  Frame attention;
  const Frame out = refine(hs, lr, params, w, 1, [&](const Frame& a) { attention = a; });
  CHECK((attention.array() > 1.0 - 1e-12).all());
  CHECK(max_abs_diff(out, hs) < 1e-12);
}

TEST_CASE("attention lies strictly inside (0,1) and grows with the hidden state scale") {
  Frm f = random_frm(4, 9);
  const Frame lr = random_frame(6, 7, 3, 10), hs = random_frame(6, 7, 4, 11, 0, 1);
  Frame a1, a2;
  refine(hs, lr, f.params, f.w, 1, [&](const Frame& a) { a1 = a; });
  refine(3.0 * hs, lr, f.params, f.w, 1, [&](const Frame& a) { a2 = a; });
  CHECK((a1.array() > 0.0).all());
  CHECK((a1.array() < 1.0).all());
  // corr scales with lambda, so attention moves away from 1/2 in the direction of the correlation sign.
  const Frame corr = local_correlation(leaky_relu(conv2d(lr, f.params.layer(f.w.projection)), 0.1), hs, 1);
  for (Eigen::Index i = 0; i < corr.size(); ++i) {
    if (corr.data()[i] >= 0) CHECK(a2.data()[i] >= a1.data()[i]);
    else CHECK(a2.data()[i] <= a1.data()[i]);
  }
}

TEST_CASE("refine shapes and channel checks") {
  Frm f = random_frm(5, 12);
  CHECK(refine(random_frame(9, 4, 5, 13), random_frame(9, 4, 3, 14), f.params, f.w, 1).same_shape(Frame(9, 4, 5)));
  CHECK_THROWS_AS(refine(random_frame(9, 4, 4, 13), random_frame(9, 4, 3, 14), f.params, f.w, 1), ConfigError);
  CHECK_THROWS_AS(refine(random_frame(9, 4, 5, 13), random_frame(9, 4, 1, 14), f.params, f.w, 1), ConfigError);
}
