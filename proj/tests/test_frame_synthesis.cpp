#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ofr/frame_synthesis.hpp"
#include "ofr/quality.hpp"
#include "ofr/synth_bench.hpp"
#include "test_util.hpp"

using namespace ofr;
using ofr::test::max_abs_diff;
using ofr::test::random_frame;

namespace {

FlowBundle bundle_from(const Flow& f_t0, const Flow& f_t1) {
  const auto [f01, f10] = reuse_flows(f_t0, f_t1, 0.5);
  return FlowBundle{f_t0, f_t1, f01, f10, 0.5};
}

OcclusionMask mask_of(int h, int w, double v) { return OcclusionMask{Frame(h, w, 1, v)}; }

Frame interior(const Frame& f, int m) {
  Frame out(f.height() - 2 * m, f.width() - 2 * m, f.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < f.channels(); ++c) out(y, x, c) = f(y + m, x + m, c);
  return out;
}

}  // namespace

TEST_CASE("occlusion masks") {
  const auto [m0, m1] = occlusion_masks(Flow::constant(8, 8, 2, -1, 0, 1), Flow::constant(8, 8, -2, 1, 1, 0), 0.1);
  CHECK((m0.weight.array() == 1.0).all());
  CHECK((m1.weight.array() == 1.0).all());

  const auto [b0, b1] = occlusion_masks(Flow::constant(8, 8, 10, 0, 0, 1), Flow(8, 8, 1, 0), 0.1);
  CHECK(b0.weight(3, 3, 0) == doctest::Approx(std::exp(-10.0)).epsilon(1e-12));

  const Flow r01(random_frame(8, 8, 2, 1, -3, 3), 0, 1), r10(random_frame(8, 8, 2, 2, -3, 3), 1, 0);
  const auto [s0, s1] = occlusion_masks(r01, r10, 1e-12);
  CHECK((s0.weight.array() > 1.0 - 1e-9).all());
  const auto [q0, q1] = occlusion_masks(r01, r10, 0.5);
  CHECK((q0.weight.array() >= 0.0).all());
  CHECK((q0.weight.array() <= 1.0).all());
  CHECK((q1.weight.array() <= 1.0).all());

  // m0 from its definition: e0 = |f01 + warp(f10, f01)|^2.
  const Flow back = warp(r10, r01);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const double du = r01.u(y, x) + back.u(y, x), dv = r01.v(y, x) + back.v(y, x);
      CHECK(q0.weight(y, x, 0) == doctest::Approx(std::exp(-0.5 * (du * du + dv * dv))).epsilon(1e-12));
    }
}

TEST_CASE("silr weight algebra") {
  const Frame prev = random_frame(6, 7, 3, 3), next = random_frame(6, 7, 3, 4);
  const FlowBundle b = bundle_from(Flow(random_frame(6, 7, 2, 5, -1, 1), 0.5, 0),
                                   Flow(random_frame(6, 7, 2, 6, -1, 1), 0.5, 1));
  const Frame wp = warp(prev, b.f_t0), wn = warp(next, b.f_t1);

  const Frame only_prev = synthesize_silr(prev, next, b, {mask_of(6, 7, 1), mask_of(6, 7, 0)});
  CHECK(max_abs_diff(only_prev, wp) == 0.0);

  const auto masks = occlusion_masks(b.f01, b.f10, 0.3);
  const Frame out = synthesize_silr(prev, next, b, masks);
  const Frame mp = masks.first.weight, mn = masks.second.weight;
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 7; ++x)
      for (int c = 0; c < 3; ++c) {
        const double want = 0.5 * ((1 - mp(y, x, 0) + mn(y, x, 0)) * wn(y, x, c) +
                                   (1 - mn(y, x, 0) + mp(y, x, 0)) * wp(y, x, c));
        CHECK(out(y, x, c) == doctest::Approx(std::clamp(want, 0.0, 1.0)).epsilon(1e-14));
        CHECK(out(y, x, c) >= std::min(wp(y, x, c), wn(y, x, c)) - 1e-15);
        CHECK(out(y, x, c) <= std::max(wp(y, x, c), wn(y, x, c)) + 1e-15);
      }

  // Swapping the roles of the two neighbours leaves the result unchanged.
  FlowBundle swapped = b;
  std::swap(swapped.f_t0, swapped.f_t1);
  const Frame mirrored = synthesize_silr(next, prev, swapped, {masks.second, masks.first});
  CHECK(max_abs_diff(mirrored, out) < 1e-15);

  CHECK_THROWS_AS(synthesize_silr(prev, next, b, {mask_of(5, 7, 1), mask_of(6, 7, 1)}), ShapeError);
  CHECK_THROWS_AS(synthesize_silr(prev, Frame(6, 6, 3), b, masks), ShapeError);
}

TEST_CASE("silr on a static scene is the frame itself") {
  const Frame f = random_frame(8, 8, 3, 7);
  const FlowBundle b = bundle_from(Flow(8, 8, 0.5, 0), Flow(8, 8, 0.5, 1));
  const Frame out = synthesize_silr(f, f, b, occlusion_masks(b.f01, b.f10, 0.1));
  CHECK(max_abs_diff(out, f) == 0.0);
}

TEST_CASE("silr matches the true mid frame under uniform translation") {
  synth::MotionSpec m;
  m.kind = synth::MotionKind::Translate;
  m.velocity = {2.0, 1.0};
  m.frames = 3;
  m.pattern = synth::Pattern::SmoothGradient;
  const synth::Sequence s(m, 64, 64);
  const FlowBundle b = bundle_from(s.true_flow(0.5, 0.0).retagged(0.5, 0), s.true_flow(0.5, 1.0).retagged(0.5, 1));
  const Frame out = synthesize_silr(s.render(0), s.render(1), b, occlusion_masks(b.f01, b.f10, 0.1));
  CHECK(psnr(interior(out, 4), interior(s.render(0.5), 4)) > 40.0);
}
