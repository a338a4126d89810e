#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ofr/flow.hpp"
#include "ofr/synth_bench.hpp"
#include "test_util.hpp"

using namespace ofr;
using ofr::test::max_abs_diff;
using ofr::test::random_frame;

namespace {

bool is_constant(const Flow& f, double u, double v, double tol = 0.0) {
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x)
      if (std::abs(f.u(y, x) - u) > tol || std::abs(f.v(y, x) - v) > tol) return false;
  return true;
}

Flow random_flow(int h, int w, std::uint64_t seed, double mag) {
  return Flow(random_frame(h, w, 2, seed, -mag, mag), 0.0, 1.0);
}

double mean_epe(const Flow& a, const Flow& b, int border) {
  double sum = 0.0;
  int n = 0;
  for (int y = border; y < a.height() - border; ++y)
    for (int x = border; x < a.width() - border; ++x) {
      sum += std::hypot(a.u(y, x) - b.u(y, x), a.v(y, x) - b.v(y, x));
      ++n;
    }
  return sum / n;
}

}  // namespace

TEST_CASE("naive intermediate scaling") {
  const auto [a0, a1] = naive_intermediate(Flow::constant(4, 4, 4, 0, 0, 1), Flow::constant(4, 4, -4, 0, 1, 0), 0.5);
  CHECK(is_constant(a0, -2, 0));
  CHECK(is_constant(a1, 2, 0));
  CHECK(a0.from() == 0.5);
  CHECK(a0.to() == 0.0);
  CHECK(a1.to() == 1.0);

  const auto [z0, z1] = naive_intermediate(Flow(4, 4, 0, 1), Flow(4, 4, 1, 0), 0.3);
  CHECK(is_constant(z0, 0, 0));
  CHECK(is_constant(z1, 0, 0));

  const auto [q0, q1] = naive_intermediate(Flow::constant(3, 3, 8, 4, 0, 1), Flow::constant(3, 3, -8, -4, 1, 0), 0.25);
  CHECK(is_constant(q1, 6, 3));
  CHECK(is_constant(q0, -2, -1));

  CHECK_THROWS_AS(naive_intermediate(Flow(2, 2, 0, 1), Flow(2, 2, 1, 0), 1.0), ParameterError);
  CHECK_THROWS_AS(naive_intermediate(Flow(2, 2, 0, 1), Flow(2, 2, 1, 0), 0.0), ParameterError);
}

TEST_CASE("parallelogram recombination") {
  CHECK(is_constant(parallelogram_recombine(Flow::constant(3, 3, -2, 0, 0.5, 0), Flow::constant(3, 3, 2, 0, 0.5, 1)), 4,
                    0));
  const Flow r = random_flow(5, 6, 1, 3.0);
  CHECK(is_constant(parallelogram_recombine(r.retagged(0.5, 0), r.retagged(0.5, 1)), 0, 0));

  const Flow a = random_flow(5, 6, 2, 3.0).retagged(0.5, 0), b = random_flow(5, 6, 3, 3.0).retagged(0.5, 1);
  const Flow s = parallelogram_recombine(a, b);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) {
      CHECK(s.u(y, x) == b.u(y, x) - a.u(y, x));
      CHECK(s.v(y, x) == b.v(y, x) - a.v(y, x));
    }
  CHECK_THROWS_AS(parallelogram_recombine(Flow(5, 6, 0.5, 0), Flow(5, 5, 0.5, 1)), ShapeError);
}

TEST_CASE("complementary flow") {
  const Flow f = random_flow(4, 5, 4, 2.0).retagged(0.5, 1);
  CHECK(max_abs_diff(complementary_flow(f, 0.5).uv(), f.uv()) == 0.0);
  CHECK(is_constant(complementary_flow(Flow::constant(2, 2, 6, 3, 0.25, 1), 0.25), 2, 1, 1e-15));
  CHECK_THROWS_AS(complementary_flow(f, 1.0), ParameterError);
  for (double t : {1e-3, 0.1, 0.3}) {
    const Flow c = complementary_flow(f, t);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 5; ++x) {
        CHECK(std::hypot(c.u(y, x), c.v(y, x)) <= t / (1 - t) * std::hypot(f.u(y, x), f.v(y, x)) * (1 + 1e-12));
      }
  }
}

TEST_CASE("warp") {
  const Frame x = random_frame(6, 7, 3, 5);
  CHECK(max_abs_diff(warp(x, Flow(6, 7, 0, 1)), x) == 0.0);

  // Content moved right by one pixel; flow (1, 0) from the original to the shifted frame recovers it.
  Frame shifted(6, 7, 3);
  for (int y = 0; y < 6; ++y)
    for (int xx = 1; xx < 7; ++xx)
      for (int c = 0; c < 3; ++c) shifted(y, xx, c) = x(y, xx - 1, c);
  const Frame back = warp(shifted, Flow::constant(6, 7, 1, 0, 0, 1));
  for (int y = 0; y < 6; ++y)
    for (int xx = 0; xx < 6; ++xx)
      for (int c = 0; c < 3; ++c) CHECK(back(y, xx, c) == x(y, xx, c));

  const Frame f = random_frame(6, 6, 4, 6, -1, 1);
  const double du = 0.37, dv = -0.81;
  const Frame w = warp(f, Flow::constant(6, 6, du, dv, 0, 1));
  for (int y = 0; y < 6; ++y)
    for (int xx = 0; xx < 6; ++xx) {
      const double px = std::clamp(xx + du, 0.0, 5.0), py = std::clamp(y + dv, 0.0, 5.0);
      const int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
      const int x1 = std::min(x0 + 1, 5), y1 = std::min(y0 + 1, 5);
      const double ax = px - x0, ay = py - y0;
      for (int c = 0; c < 4; ++c) {
        const double want = (1 - ax) * (1 - ay) * f(y0, x0, c) + ax * (1 - ay) * f(y0, x1, c) +
                            (1 - ax) * ay * f(y1, x0, c) + ax * ay * f(y1, x1, c);
        CHECK(std::abs(w(y, xx, c) - want) < 1e-14);
      }
    }
  CHECK_THROWS_AS(warp(f, Flow(6, 5, 0, 1)), ShapeError);

  const Flow field = random_flow(6, 6, 7, 2.0);
  const Flow warped = warp(field, Flow::constant(6, 6, du, dv, 0, 1));
  CHECK(max_abs_diff(warped.uv(), warp(field.uv(), Flow::constant(6, 6, du, dv, 0, 1))) == 0.0);
}

TEST_CASE("reuse flows on uniform translation are exact") {
  for (const auto& [vx, vy] : {std::pair{1.0, 0.0}, {-3.0, 2.0}, {0.5, -0.25}}) {
    for (double t : {0.25, 0.5, 0.75}) {
      const Flow f_t0 = Flow::constant(9, 11, -t * vx, -t * vy, t, 0);
      const Flow f_t1 = Flow::constant(9, 11, (1 - t) * vx, (1 - t) * vy, t, 1);
      const auto [f01, f10] = reuse_flows(f_t0, f_t1, t);
      CHECK(is_constant(f01, vx, vy));
      CHECK(is_constant(f10, -vx, -vy));
      CHECK(f01.from() == 0.0);
      CHECK(f01.to() == 1.0);
    }
  }
  const auto [z01, z10] = reuse_flows(Flow(4, 4, 0.5, 0), Flow(4, 4, 0.5, 1), 0.5);
  CHECK(is_constant(z01, 0, 0));
  CHECK(is_constant(z10, 0, 0));
}

TEST_CASE("reuse flows beat naive scaling on accelerated motion") {
  // Naive: pairwise flow scaled to t. Reuse: exact intermediate flows recombined.
  for (double a : {2.0, 4.0, 6.0}) {
    synth::MotionSpec m;
    m.kind = synth::MotionKind::Accelerate;
    m.acceleration = {a, 0.5 * a};
    m.frames = 4;
    const synth::Sequence seq(m, 48, 48);
    const double t0 = 1.0, t1 = 2.0, mid = 1.5;
    const Flow true01 = seq.true_flow(t0, t1);
    const auto [r01, r10] =
        reuse_flows(seq.true_flow(mid, t0).retagged(0.5, 0), seq.true_flow(mid, t1).retagged(0.5, 1), 0.5);
    const auto [n_t0, n_t1] = naive_intermediate(true01, seq.true_flow(t1, t0), 0.5);
    const Flow truth_t1 = seq.true_flow(mid, t1);
    CAPTURE(a);
    CHECK(mean_epe(r01, true01, 4) < 0.25);
    CHECK(mean_epe(r01, true01, 4) < mean_epe(n_t1, truth_t1, 4));
  }
}
