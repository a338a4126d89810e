#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ofr/reconstruct.hpp"
#include "ofr/synth_bench.hpp"

namespace ofr {

/// lr0 at step 0, decaying along a half cosine to lr_min at step total - 1.
Real cosine_lr(int step, int total, Real lr0, Real lr_min);

struct AdamState {
  explicit AdamState(const ParamSet& params, Real beta1 = 0.9, Real beta2 = 0.999, Real eps = 1e-8);

  ParamSet m;
  ParamSet v;
  int step = 0;
  Real beta1;
  Real beta2;
  Real eps;
};

/// One bias-corrected Adam update at learning rate `lr`.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, Real lr);

/// One supervised sequence: prepared low-resolution inputs and the 2n - 1
/// high-resolution targets in time order.
struct TrainSample {
  PreparedSequence input;
  std::vector<Frame> targets;
};

/// The same sample played backwards.
TrainSample time_reversed(const TrainSample& sample, Real alpha);

enum class TrainInit { Identity, Random };

struct TrainConfig {
  int steps = 200;
  int sequences = 8;
  int size = 64;    // HR height and width
  int frames = 7;   // HR frames per sequence (inputs are every other one)
  Real lr0 = 1e-3;
  Real lr_min = 1e-7;
  Real eps = 1e-3;  // Charbonnier
  bool flip = true;
  TrainInit init = TrainInit::Identity;
  Real init_noise = 0.1;   // times the He standard deviation
  std::uint64_t seed = 0;

  void validate() const;

  static const std::set<std::string>& keys();
  /// Reads the training keys of `kv`, ignoring all others.
  static TrainConfig from_key_values(const std::map<std::string, std::string>& kv);
};

/// Motion specs of the toy training set: uniform translations with seeded
/// random velocities and patterns.
std::vector<synth::MotionSpec> toy_motions(const TrainConfig& tc);

/// Renders, degrades (x1/4) and prepares one sequence. Flows come from the
/// kinematic oracle, scaled linearly when cfg.flow is naive.
TrainSample make_sample(const synth::MotionSpec& motion, int size, const PipelineConfig& cfg);

std::vector<TrainSample> make_dataset(const std::vector<synth::MotionSpec>& motions, int size,
                                      const PipelineConfig& cfg);

/// Mean Charbonnier over all outputs, with gradients accumulated into `grads`.
Real sample_loss(const TrainSample& sample, const PipelineWeights& w, const PipelineConfig& cfg, Real eps,
                 ParamSet* grads);

struct TrainResult {
  PipelineWeights weights;
  std::vector<Real> losses;
  /// Exponential moving average (0.9) of the losses, then running minimum.
  std::vector<Real> smoothed;
};

using TrainProgress = std::function<void(int step, Real loss, Real lr)>;

/// Initial weights for training per tc.init (identity plus seeded noise, or random).
PipelineWeights initial_weights(const PipelineConfig& cfg, const TrainConfig& tc);

TrainResult toy_train(const PipelineConfig& cfg, const TrainConfig& tc, const std::vector<TrainSample>& dataset,
                      const TrainProgress& progress = {});
TrainResult toy_train(const PipelineConfig& cfg, const TrainConfig& tc, PipelineWeights initial,
                      const std::vector<TrainSample>& dataset, const TrainProgress& progress = {});

}  // namespace ofr
