#pragma once

// Bidirectional propagation of hidden states over the output time grid.
// Output index k stands for time k / 2: even k are the input frames, odd k
// the frames synthesized between inputs k / 2 and k / 2 + 1.

#include <functional>
#include <vector>

#include "ofr/blocks.hpp"
#include "ofr/feature_refine.hpp"
#include "ofr/flow.hpp"
#include "ofr/graph.hpp"

namespace ofr {

enum class Direction { Forward, Backward };

/// A branch's feature at one time index. Every live instance is counted so
/// that retained recurrent state can be asserted on.
class HiddenState {
 public:
  HiddenState(Var feature, Direction direction, int index);
  HiddenState(const HiddenState& other);
  HiddenState(HiddenState&& other) noexcept;
  HiddenState& operator=(const HiddenState& other) = default;
  HiddenState& operator=(HiddenState&& other) noexcept = default;
  ~HiddenState();

  const Var& feature() const { return feature_; }
  Direction direction() const { return direction_; }
  int index() const { return index_; }

  static int live();
  static int peak();
  /// Sets the peak to the current live count.
  static void reset_peak();

 private:
  static void enter();

  Var feature_;
  Direction direction_;
  int index_;
};

enum class OutputKind { PreExisting, Interpolated };

struct BranchOutput {
  int index = 0;
  OutputKind kind = OutputKind::PreExisting;
  Var feature;
};

enum class FusionMode { Hybrid, Image, Feature };

/// Fusion of a C-channel state with a 3-channel image: the image is projected
/// to C channels (3x3), concatenated after the state, mixed back to C (1x1)
/// and passed through residual blocks.
struct FusionWeights {
  ParamSet::LayerId projection = -1;
  ParamSet::LayerId mix = -1;
  std::vector<ResidualBlockWeights> blocks;
};

FusionWeights add_fusion_layers(ParamSet& params, const std::string& prefix, int channels, int blocks);

/// Image mode drops the state half of the mix, Feature mode the image half.
Var fuse(Graph& g, const Var& state, const Var& image, const FusionWeights& w, FusionMode mode, Real slope);

Var fuse_intermediate(Graph& g, const HiddenState& ihs, const Var& silr, const FusionWeights& w, FusionMode mode,
                      Real slope);

struct BranchWeights {
  FrmWeights frm;
  FusionWeights update;  // folds the current input frame into the refined state
  FusionWeights fuse;    // intermediate states with the synthesized frame
};

BranchWeights add_branch_layers(ParamSet& params, const std::string& prefix, int channels, int fuse_blocks,
                                Real slope);

struct BranchOptions {
  int k = 1;
  bool use_frm = true;
  FusionMode fusion = FusionMode::Hybrid;
  Real slope = 0.1;
};

/// Optional hooks into a pass. `aligned` receives (input index, warped state
/// before refinement) for every input after the first processed one.
struct BranchObserver {
  std::function<void(int, const Frame&)> aligned;
  AttentionObserver attention;
};

using BranchSink = std::function<void(BranchOutput)>;

/// Runs one branch, emitting outputs as soon as they are final. Backward runs
/// right to left (align with f01, intermediates from f_t1); forward runs left
/// to right (align with f10, intermediates from f_t0).
void propagate(Graph& g, Direction direction, const std::vector<Var>& frames, const std::vector<Var>& silrs,
               const std::vector<FlowBundle>& bundles, const BranchWeights& w, const BranchOptions& options,
               const BranchSink& sink, const BranchObserver* observer = nullptr);

/// Outputs sorted by index.
std::vector<BranchOutput> backward_pass(Graph& g, const std::vector<Var>& frames, const std::vector<Var>& silrs,
                                        const std::vector<FlowBundle>& bundles, const BranchWeights& w,
                                        const BranchOptions& options, const BranchObserver* observer = nullptr);
std::vector<BranchOutput> forward_pass(Graph& g, const std::vector<Var>& frames, const std::vector<Var>& silrs,
                                       const std::vector<FlowBundle>& bundles, const BranchWeights& w,
                                       const BranchOptions& options, const BranchObserver* observer = nullptr);

/// 1x1 mix over (forward, backward), then residual blocks.
struct MergeWeights {
  ParamSet::LayerId mix = -1;
  std::vector<ResidualBlockWeights> blocks;
};

MergeWeights add_merge_layers(ParamSet& params, const std::string& prefix, int channels, int blocks);

/// Either side may be null (one-way ablation); its half of the mix is dropped.
Var merge_features(Graph& g, const Var& fwd, const Var& bwd, const MergeWeights& w, Real slope);

std::vector<Var> merge_branches(Graph& g, const std::vector<BranchOutput>& fwd, const std::vector<BranchOutput>& bwd,
                                const MergeWeights& w, Real slope);

/// Bundles of the time-reversed sequence: pair order reversed, each pair's
/// flows exchanged (f_t0 <-> f_t1, f01 <-> f10).
std::vector<FlowBundle> reverse_bundles(const std::vector<FlowBundle>& bundles);

}  // namespace ofr
