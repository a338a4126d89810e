#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ofr/estimator.hpp"
#include "ofr/recurrence.hpp"

namespace ofr {

enum class EstimatorKind { Oracle, BlockMatch };
enum class WeightSource { Random, File, Identity };
enum class FlowMode { Intermediate, Naive };

struct PipelineConfig {
  int channels = 16;
  int r_fuse = 3;
  int r_merge = 3;
  int r_trunk = 3;
  int k = 1;
  Real alpha = 0.1;
  Real t = 0.5;
  int space_scale = 4;
  Real slope = 0.1;

  EstimatorKind estimator = EstimatorKind::BlockMatch;
  BlockMatchConfig block_match;
  std::string oracle_manifest;  // synth manifest describing the input frames

  WeightSource weights = WeightSource::Random;
  std::string weights_path;
  std::uint64_t seed = 0;

  FusionMode fusion = FusionMode::Hybrid;
  FlowMode flow = FlowMode::Intermediate;
  bool bidirectional = true;
  bool use_frm = true;

  void validate() const;

  BranchOptions branch_options() const { return {k, use_frm, fusion, slope}; }

  static const std::set<std::string>& keys();
  /// Reads the keys of `keys()`; other keys are rejected unless listed in `extra`.
  static PipelineConfig from_key_values(const std::map<std::string, std::string>& kv, const std::string& origin,
                                        const std::set<std::string>& extra = {});
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
};

struct UpsampleWeights {
  ParamSet::LayerId conv1 = -1;  // 3x3, C -> 4C, then shuffle x2
  ParamSet::LayerId conv2 = -1;  // 3x3, C -> 4C, then shuffle x2
  ParamSet::LayerId out = -1;    // 3x3, C -> 3
};

struct PipelineWeights {
  ParamSet params;
  BranchWeights forward;
  BranchWeights backward;
  MergeWeights merge;
  std::vector<ResidualBlockWeights> trunk;
  UpsampleWeights up;

  /// Exchanges the two branches' parameters and the two halves of the merge
  /// mix, so that a time-reversed run reproduces the original in reverse.
  PipelineWeights swapped_branches() const;
};

/// Zero-filled layout for `cfg`.
PipelineWeights pipeline_layout(const PipelineConfig& cfg);

/// Seeded random initialisation (fan-in scaled normals).
void init_random(PipelineWeights& w, std::uint64_t seed);

/// Pass-through weights: the state carries the current input frame in its
/// first three channels, intermediates carry the warped state, the
/// synthesized frame or (hybrid) their average, branches are averaged (or the
/// forward branch taken alone) and the upsampler replicates pixels.
void init_identity(PipelineWeights& w, const PipelineConfig& cfg);

/// Layout plus initialisation according to cfg.weights.
PipelineWeights make_weights(const PipelineConfig& cfg);

Var upsample(Graph& g, const Var& feature, const UpsampleWeights& w, Real slope);
Frame upsample(const Frame& feature, const ParamSet& params, const UpsampleWeights& w, Real slope);

/// Inputs with their flows and synthesized intermediate frames.
struct PreparedSequence {
  std::vector<Frame> frames;
  std::vector<FlowBundle> bundles;
  std::vector<Frame> silrs;
};

/// Flow bundles, occlusion masks and synthesized frames for every pair.
PreparedSequence prepare_sequence(const std::vector<Frame>& frames, const FlowEstimator& estimator, Real t, Real alpha);
/// Same, from given bundles.
PreparedSequence prepare_sequence(const std::vector<Frame>& frames, std::vector<FlowBundle> bundles, Real alpha);

/// Estimator selected by cfg (naive flow mode wraps its pairwise flows). The
/// oracle needs cfg.oracle_manifest, or `fallback_manifest` when that is empty.
std::shared_ptr<const FlowEstimator> make_estimator(const PipelineConfig& cfg,
                                                    const std::filesystem::path& fallback_manifest = {});

/// Receives HR outputs in time order as they are produced.
using OutputSink = std::function<void(int index, const Var& hr)>;

/// Backward branch first (its outputs are kept), then the forward branch,
/// merging and reconstructing each output as soon as the forward branch
/// emits it.
void run_graph(Graph& g, const PreparedSequence& seq, const PipelineWeights& w, const PipelineConfig& cfg,
               const OutputSink& sink, const BranchObserver* observer = nullptr);

std::vector<Frame> run_pipeline(const PreparedSequence& seq, const PipelineConfig& cfg, const PipelineWeights& w);
std::vector<Frame> run_pipeline(const std::vector<Frame>& lr_frames, const PipelineConfig& cfg,
                                const PipelineWeights& w, const FlowEstimator& estimator);

/// Half-step output name: index 2i -> "%06d", 2i + 1 -> "%06d_5".
std::string output_name(int index);

std::string to_string(FusionMode mode);
std::string to_string(FlowMode mode);

}  // namespace ofr
