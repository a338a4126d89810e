#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>
#include <vector>

#include "ofr/estimator.hpp"
#include "ofr/reconstruct.hpp"
#include "ofr/recurrence.hpp"
#include "ofr/synth_bench.hpp"
#include "test_util.hpp"

using namespace ofr;
using ofr::test::max_abs_diff;
using ofr::test::random_frame;

namespace {

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.channels = 4;
  cfg.r_fuse = 1;
  cfg.r_merge = 1;
  cfg.r_trunk = 1;
  return cfg;
}

PipelineWeights random_weights(const PipelineConfig& cfg, std::uint64_t seed) {
  PipelineWeights w = pipeline_layout(cfg);
  init_random(w, seed);
  return w;
}

PipelineWeights identity_weights(const PipelineConfig& cfg) {
  PipelineWeights w = pipeline_layout(cfg);
  init_identity(w, cfg);
  return w;
}

struct Inputs {
  std::vector<Var> frames, silrs;
  std::vector<FlowBundle> bundles;
};

Inputs as_vars(Graph& g, const PreparedSequence& s) {
  Inputs in;
  for (const Frame& f : s.frames) in.frames.push_back(g.constant(f));
  for (const Frame& f : s.silrs) in.silrs.push_back(g.constant(f));
  in.bundles = s.bundles;
  return in;
}

PreparedSequence random_sequence(int n, int h, int w, std::uint64_t seed) {
  std::vector<Frame> frames;
  std::vector<FlowBundle> bundles;
  for (int i = 0; i < n; ++i) frames.push_back(random_frame(h, w, 3, seed + static_cast<std::uint64_t>(i)));
  for (int i = 0; i + 1 < n; ++i) {
    const Flow f_t0(random_frame(h, w, 2, seed + 100 + i, -1.5, 1.5), i + 0.5, i);
    const Flow f_t1(random_frame(h, w, 2, seed + 200 + i, -1.5, 1.5), i + 0.5, i + 1);
    const auto [f01, f10] = reuse_flows(f_t0, f_t1, 0.5);
    bundles.push_back(FlowBundle{f_t0, f_t1, f01, f10, 0.5});
  }
  return prepare_sequence(frames, bundles, 0.1);
}

Frame interior(const Frame& f, int m, int channels) {
  Frame out(f.height() - 2 * m, f.width() - 2 * m, channels);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < channels; ++c) out(y, x, c) = f(y + m, x + m, c);
  return out;
}

}  // namespace

TEST_CASE("hidden state instances are counted") {
  ParamSet params;
  Graph g(params);
  const int base = HiddenState::live();
  HiddenState::reset_peak();
  {
    HiddenState a(g.constant(Frame(2, 2, 1)), Direction::Forward, 0);
    HiddenState b = a;
    CHECK(HiddenState::live() == base + 2);
    HiddenState c = std::move(b);
    CHECK(HiddenState::peak() == base + 3);
  }
  CHECK(HiddenState::live() == base);
  HiddenState::reset_peak();
  CHECK(HiddenState::peak() == base);
}

TEST_CASE("each branch emits 2n-1 outputs in time order") {
  const PipelineConfig cfg = small_config();
  const PipelineWeights w = random_weights(cfg, 1);
  for (int n : {1, 2, 3, 5}) {
    const PreparedSequence s = random_sequence(n, 6, 7, 10);
    Graph g(w.params);
    const Inputs in = as_vars(g, s);
    for (const auto& out : {backward_pass(g, in.frames, in.silrs, in.bundles, w.backward, cfg.branch_options()),
                            forward_pass(g, in.frames, in.silrs, in.bundles, w.forward, cfg.branch_options())}) {
      REQUIRE(out.size() == static_cast<std::size_t>(2 * n - 1));
      for (int k = 0; k < 2 * n - 1; ++k) {
        CHECK(out[k].index == k);
        CHECK(out[k].kind == (k % 2 == 0 ? OutputKind::PreExisting : OutputKind::Interpolated));
        CHECK(out[k].feature->value.same_shape(Frame(6, 7, cfg.channels)));
      }
    }
    const auto merged = merge_branches(g, forward_pass(g, in.frames, in.silrs, in.bundles, w.forward, cfg.branch_options()),
                                       backward_pass(g, in.frames, in.silrs, in.bundles, w.backward, cfg.branch_options()),
                                       w.merge, cfg.slope);
    CHECK(merged.size() == static_cast<std::size_t>(2 * n - 1));
  }
}

TEST_CASE("propagation keeps one hidden state per branch") {
  const PipelineConfig cfg = small_config();
  const PipelineWeights w = random_weights(cfg, 2);
  for (int n : {2, 9}) {
    const PreparedSequence s = random_sequence(n, 5, 5, 20);
    Graph g(w.params);
    const Inputs in = as_vars(g, s);
    const int base = HiddenState::live();
    HiddenState::reset_peak();
    int count = 0;
    propagate(g, Direction::Backward, in.frames, in.silrs, in.bundles, w.backward, cfg.branch_options(),
              [&](BranchOutput) { ++count; });
    CHECK(count == 2 * n - 1);
    CHECK(HiddenState::peak() - base == 2);  // the propagating state plus one transient intermediate
  }
}

TEST_CASE("length mismatches are sequence errors") {
  const PipelineConfig cfg = small_config();
  const PipelineWeights w = random_weights(cfg, 3);
  const PreparedSequence s = random_sequence(3, 5, 5, 30);
  Graph g(w.params);
  Inputs in = as_vars(g, s);
  in.silrs.pop_back();
  CHECK_THROWS_AS(backward_pass(g, in.frames, in.silrs, in.bundles, w.backward, cfg.branch_options()), SequenceError);
  CHECK_THROWS_AS(backward_pass(g, {}, {}, {}, w.backward, cfg.branch_options()), SequenceError);

  const Inputs ok = as_vars(g, s);
  auto fwd = forward_pass(g, ok.frames, ok.silrs, ok.bundles, w.forward, cfg.branch_options());
  auto bwd = backward_pass(g, ok.frames, ok.silrs, ok.bundles, w.backward, cfg.branch_options());
  bwd.pop_back();
  CHECK_THROWS_AS(merge_branches(g, fwd, bwd, w.merge, cfg.slope), SequenceError);
  bwd = fwd;
  bwd[1].index = 2;
  CHECK_THROWS_AS(merge_branches(g, fwd, bwd, w.merge, cfg.slope), SequenceError);
}

TEST_CASE("aligned states are shifted copies under uniform translation") {
  synth::MotionSpec m;
  m.kind = synth::MotionKind::Translate;
  m.velocity = {2.0, -1.0};
  m.frames = 3;
  m.pattern = synth::Pattern::GaussianBlobs;
  const synth::Sequence seq(m, 32, 32);
  std::vector<Frame> frames;
  std::vector<std::pair<double, Frame>> known;
  for (int k = 0; k < 3; ++k) {
    frames.push_back(seq.render(k));
    known.emplace_back(k, frames.back());
  }
  const PreparedSequence s = prepare_sequence(frames, OracleEstimator(seq, 1.0, known), 0.5, 0.1);
  const PipelineConfig cfg = small_config();
  const PipelineWeights w = identity_weights(cfg);
  Graph g(w.params);
  const Inputs in = as_vars(g, s);

  for (Direction d : {Direction::Backward, Direction::Forward}) {
    int seen = 0;
    BranchObserver obs;
    obs.aligned = [&](int i, const Frame& aligned) {
      ++seen;
      CAPTURE(i);
      CHECK(max_abs_diff(interior(aligned, 3, 3), interior(frames[i], 3, 3)) < 1e-6);
    };
    propagate(g, d, in.frames, in.silrs, in.bundles, d == Direction::Backward ? w.backward : w.forward,
              cfg.branch_options(), [](BranchOutput) {}, &obs);
    CHECK(seen == 2);
  }
}

TEST_CASE("static scene gives identical outputs with pass-through weights") {
  const PipelineConfig cfg = small_config();
  const PipelineWeights w = identity_weights(cfg);
  const Frame f = random_frame(6, 6, 3, 40);
  std::vector<FlowBundle> bundles;
  for (int i = 0; i < 3; ++i)
    bundles.push_back(FlowBundle{Flow(6, 6, i + 0.5, i), Flow(6, 6, i + 0.5, i + 1), Flow(6, 6, i, i + 1),
                                 Flow(6, 6, i + 1, i), 0.5});
  const PreparedSequence s = prepare_sequence({f, f, f, f}, bundles, 0.1);
  Graph g(w.params);
  const Inputs in = as_vars(g, s);
  const auto merged = merge_branches(g, forward_pass(g, in.frames, in.silrs, in.bundles, w.forward, cfg.branch_options()),
                                     backward_pass(g, in.frames, in.silrs, in.bundles, w.backward, cfg.branch_options()),
                                     w.merge, cfg.slope);
  REQUIRE(merged.size() == 7);
  for (const Var& m : merged) CHECK(max_abs_diff(m->value, merged[0]->value) == 0.0);
}

TEST_CASE("fusion and merge identity configurations") {
  const int c = 4;
  ParamSet params;
  const FusionWeights fw = add_fusion_layers(params, "f", c, 2);
  for (int i = 0; i < c; ++i) params.layer(fw.mix).weight(0, 0, i, i) = 1.0;
  const MergeWeights mw = add_merge_layers(params, "m", c, 2);
  for (int i = 0; i < c; ++i) {
    params.layer(mw.mix).weight(0, 0, i, i) = 0.5;
    params.layer(mw.mix).weight(0, 0, c + i, i) = 0.5;
  }
  Graph g(params);
  const Frame state = random_frame(5, 6, c, 50, -1, 1);
  const Var silr = g.constant(random_frame(5, 6, 3, 51));
  const HiddenState ihs(g.constant(state), Direction::Backward, 1);
  CHECK(max_abs_diff(fuse_intermediate(g, ihs, silr, fw, FusionMode::Hybrid, 0.1)->value, state) == 0.0);

  ParamSet zeros = params.zeros_like();
  Graph z(zeros);
  const HiddenState zero_ihs(z.constant(Frame(5, 6, c)), Direction::Forward, 1);
  const Var out = fuse_intermediate(z, zero_ihs, z.constant(Frame(5, 6, 3)), fw, FusionMode::Hybrid, 0.1);
  CHECK(out->value.same_shape(Frame(5, 6, c)));
  CHECK((out->value.array() == 0.0).all());

  const Var shared = g.constant(state);
  CHECK(max_abs_diff(merge_features(g, shared, shared, mw, 0.1)->value, state) < 1e-15);
  CHECK((merge_features(g, g.constant(Frame(5, 6, c)), g.constant(Frame(5, 6, c)), mw, 0.1)->value.array() == 0.0)
            .all());
}

TEST_CASE("time reversal with swapped branches reverses the outputs") {
  PipelineConfig cfg = small_config();
  const PipelineWeights w = random_weights(cfg, 5);
  const PreparedSequence s = random_sequence(4, 6, 5, 60);
  std::vector<Frame> reversed(s.frames.rbegin(), s.frames.rend());
  const PreparedSequence r = prepare_sequence(reversed, reverse_bundles(s.bundles), cfg.alpha);

  const std::vector<Frame> a = run_pipeline(s, cfg, w);
  const std::vector<Frame> b = run_pipeline(r, cfg, w.swapped_branches());
  REQUIRE(a.size() == 7);
  REQUIRE(b.size() == 7);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CAPTURE(k);
    CHECK(max_abs_diff(a[k], b[a.size() - 1 - k]) == 0.0);
  }
}
