#include "ofr/recurrence.hpp"

#include <algorithm>
#include <atomic>
#include <optional>

namespace ofr {

namespace {
std::atomic<int> g_live{0};
std::atomic<int> g_peak{0};
}  // namespace

void HiddenState::enter() {
  const int now = ++g_live;
  int peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}

HiddenState::HiddenState(Var feature, Direction direction, int index)
    : feature_(std::move(feature)), direction_(direction), index_(index) {
  enter();
}

HiddenState::HiddenState(const HiddenState& other)
    : feature_(other.feature_), direction_(other.direction_), index_(other.index_) {
  enter();
}

HiddenState::HiddenState(HiddenState&& other) noexcept
    : feature_(std::move(other.feature_)), direction_(other.direction_), index_(other.index_) {
  enter();
}

HiddenState::~HiddenState() { --g_live; }

int HiddenState::live() { return g_live.load(); }
int HiddenState::peak() { return g_peak.load(); }
void HiddenState::reset_peak() { g_peak.store(g_live.load()); }

// ---------------------------------------------------------------------------

FusionWeights add_fusion_layers(ParamSet& params, const std::string& prefix, int channels, int blocks) {
  FusionWeights w;
  w.projection = params.add(prefix + ".proj", Conv::same(3, 3, channels));
  w.mix = params.add(prefix + ".mix", Conv::same(1, 2 * channels, channels));
  w.blocks = add_residual_layers(params, prefix + ".res", channels, blocks);
  return w;
}

Var fuse(Graph& g, const Var& state, const Var& image, const FusionWeights& w, FusionMode mode, Real slope) {
  require_same_spatial(state->value, image->value, "fuse");
  const int c = g.params().layer(w.mix).out_channels;
  if (state->value.channels() != c) {
    throw ConfigError("fuse: state has " + std::to_string(state->value.channels()) + " channels, expected " +
                      std::to_string(c));
  }
  std::vector<Graph::Part> parts;
  if (mode != FusionMode::Image) parts.push_back({state, 0});
  if (mode != FusionMode::Feature) parts.push_back({g.conv(image, w.projection), c});
  return residual_stack(g, g.conv_concat(parts, w.mix), w.blocks, slope);
}

Var fuse_intermediate(Graph& g, const HiddenState& ihs, const Var& silr, const FusionWeights& w, FusionMode mode,
                      Real slope) {
  return fuse(g, ihs.feature(), silr, w, mode, slope);
}

BranchWeights add_branch_layers(ParamSet& params, const std::string& prefix, int channels, int fuse_blocks,
                                Real slope) {
  BranchWeights w;
  w.frm = add_frm_layers(params, prefix + ".frm", channels, slope);
  w.update = add_fusion_layers(params, prefix + ".update", channels, fuse_blocks);
  w.fuse = add_fusion_layers(params, prefix + ".fuse", channels, fuse_blocks);
  return w;
}

// ---------------------------------------------------------------------------

void propagate(Graph& g, Direction direction, const std::vector<Var>& frames, const std::vector<Var>& silrs,
               const std::vector<FlowBundle>& bundles, const BranchWeights& w, const BranchOptions& options,
               const BranchSink& sink, const BranchObserver* observer) {
  const int n = static_cast<int>(frames.size());
  if (n == 0) throw SequenceError("propagate: no input frames");
  if (silrs.size() + 1 != frames.size() || bundles.size() + 1 != frames.size()) {
    throw SequenceError("propagate: " + std::to_string(n) + " frames need " + std::to_string(n - 1) +
                        " synthesized frames and flow bundles, got " + std::to_string(silrs.size()) + " and " +
                        std::to_string(bundles.size()));
  }
  const int channels = g.params().layer(w.update.mix).out_channels;
  const bool backward = direction == Direction::Backward;
  const AttentionObserver no_attention;
  const AttentionObserver& attention = observer ? observer->attention : no_attention;

  std::optional<HiddenState> state;
  for (int step = 0; step < n; ++step) {
    const int i = backward ? n - 1 - step : step;
    const Frame& lr = frames[i]->value;
    Var aligned;
    if (!state) {
      aligned = g.constant(Frame(lr.height(), lr.width(), channels));
    } else {
      const int pair = backward ? i : i - 1;
      const FlowBundle& bundle = bundles[pair];
      {
        const HiddenState ihs(g.warp(state->feature(), backward ? bundle.f_t1 : bundle.f_t0), direction,
                              2 * pair + 1);
        sink({ihs.index(), OutputKind::Interpolated,
              fuse_intermediate(g, ihs, silrs[pair], w.fuse, options.fusion, options.slope)});
      }
      aligned = g.warp(state->feature(), backward ? bundle.f01 : bundle.f10);
      if (observer && observer->aligned) observer->aligned(i, aligned->value);
    }
    const Var refined = options.use_frm ? refine(g, aligned, frames[i], w.frm, options.k, attention) : aligned;
    Var next = fuse(g, refined, frames[i], w.update, FusionMode::Hybrid, options.slope);
    state.reset();
    state.emplace(std::move(next), direction, 2 * i);
    sink({state->index(), OutputKind::PreExisting, state->feature()});
  }
}

namespace {

std::vector<BranchOutput> collect(Graph& g, Direction direction, const std::vector<Var>& frames,
                                  const std::vector<Var>& silrs, const std::vector<FlowBundle>& bundles,
                                  const BranchWeights& w, const BranchOptions& options,
                                  const BranchObserver* observer) {
  std::vector<BranchOutput> out;
  propagate(g, direction, frames, silrs, bundles, w, options, [&](BranchOutput o) { out.push_back(std::move(o)); },
            observer);
  std::sort(out.begin(), out.end(), [](const BranchOutput& a, const BranchOutput& b) { return a.index < b.index; });
  return out;
}

}  // namespace

std::vector<BranchOutput> backward_pass(Graph& g, const std::vector<Var>& frames, const std::vector<Var>& silrs,
                                        const std::vector<FlowBundle>& bundles, const BranchWeights& w,
                                        const BranchOptions& options, const BranchObserver* observer) {
  return collect(g, Direction::Backward, frames, silrs, bundles, w, options, observer);
}

std::vector<BranchOutput> forward_pass(Graph& g, const std::vector<Var>& frames, const std::vector<Var>& silrs,
                                       const std::vector<FlowBundle>& bundles, const BranchWeights& w,
                                       const BranchOptions& options, const BranchObserver* observer) {
  return collect(g, Direction::Forward, frames, silrs, bundles, w, options, observer);
}

// ---------------------------------------------------------------------------

MergeWeights add_merge_layers(ParamSet& params, const std::string& prefix, int channels, int blocks) {
  MergeWeights w;
  w.mix = params.add(prefix + ".mix", Conv::same(1, 2 * channels, channels));
  w.blocks = add_residual_layers(params, prefix + ".res", channels, blocks);
  return w;
}

Var merge_features(Graph& g, const Var& fwd, const Var& bwd, const MergeWeights& w, Real slope) {
  const int c = g.params().layer(w.mix).out_channels;
  std::vector<Graph::Part> parts;
  if (fwd) parts.push_back({fwd, 0});
  if (bwd) parts.push_back({bwd, c});
  if (parts.empty()) throw SequenceError("merge: both branches missing");
  return residual_stack(g, g.conv_concat(parts, w.mix), w.blocks, slope);
}

std::vector<Var> merge_branches(Graph& g, const std::vector<BranchOutput>& fwd, const std::vector<BranchOutput>& bwd,
                                const MergeWeights& w, Real slope) {
  if (fwd.size() != bwd.size()) {
    throw SequenceError("merge_branches: " + std::to_string(fwd.size()) + " forward vs " +
                        std::to_string(bwd.size()) + " backward outputs");
  }
  std::vector<Var> merged;
  for (std::size_t k = 0; k < fwd.size(); ++k) {
    if (fwd[k].index != bwd[k].index) {
      throw SequenceError("merge_branches: index mismatch at position " + std::to_string(k));
    }
    merged.push_back(merge_features(g, fwd[k].feature, bwd[k].feature, w, slope));
  }
  return merged;
}

std::vector<FlowBundle> reverse_bundles(const std::vector<FlowBundle>& bundles) {
  std::vector<FlowBundle> out;
  for (auto it = bundles.rbegin(); it != bundles.rend(); ++it) {
    const double base = static_cast<double>(out.size());
    const double t = 1.0 - it->t;
    out.push_back(FlowBundle{it->f_t1.retagged(base + t, base), it->f_t0.retagged(base + t, base + 1.0),
                             it->f10.retagged(base, base + 1.0), it->f01.retagged(base + 1.0, base), t});
  }
  return out;
}

}  // namespace ofr
