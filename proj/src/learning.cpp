#include "ofr/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ofr/key_value.hpp"

namespace ofr {

Real cosine_lr(int step, int total, Real lr0, Real lr_min) {
  if (total <= 0) throw ParameterError("cosine_lr: total steps must be positive");
  if (step < 0 || step >= total) throw ParameterError("cosine_lr: step outside the schedule");
  if (total == 1) return lr_min;
  const Real progress = static_cast<Real>(step) / (total - 1);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamState::AdamState(const ParamSet& params, Real beta1_, Real beta2_, Real eps_)
    : m(params.zeros_like()), v(params.zeros_like()), beta1(beta1_), beta2(beta2_), eps(eps_) {}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, Real lr) {
  if (!params.same_layout(grads) || !params.same_layout(state.m)) {
    throw ConfigError("adam_step: parameter, gradient and moment layouts differ");
  }
  ++state.step;
  const Real c1 = 1.0 - std::pow(state.beta1, state.step);
  const Real c2 = 1.0 - std::pow(state.beta2, state.step);
  auto p = params.arrays();
  const auto g = grads.arrays();
  auto m = state.m.arrays();
  auto v = state.v.arrays();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i].values = state.beta1 * m[i].values + (1.0 - state.beta1) * g[i].values;
    v[i].values = state.beta2 * v[i].values + (1.0 - state.beta2) * g[i].values.cwiseAbs2();
    p[i].values.array() -=
        lr * (m[i].values.array() / c1) / ((v[i].values.array() / c2).sqrt() + state.eps);
  }
}

// ---------------------------------------------------------------------------

TrainSample time_reversed(const TrainSample& sample, Real alpha) {
  std::vector<Frame> frames(sample.input.frames.rbegin(), sample.input.frames.rend());
  TrainSample out;
  out.input = prepare_sequence(frames, reverse_bundles(sample.input.bundles), alpha);
  out.targets.assign(sample.targets.rbegin(), sample.targets.rend());
  return out;
}

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("train_steps must be >= 0");
  if (sequences < 1) throw ConfigError("train_sequences must be >= 1");
  if (size < 16 || size % 4 != 0) throw ConfigError("train_size must be a multiple of 4 and >= 16");
  if (frames < 1 || frames % 2 == 0) throw ConfigError("train_frames must be odd");
  if (!(lr0 > 0.0) || !(lr_min >= 0.0)) throw ConfigError("learning rates must be positive");
  if (!(eps > 0.0)) throw ConfigError("charbonnier eps must be positive");
  if (init_noise < 0.0) throw ConfigError("train_init_noise must be >= 0");
}

const std::set<std::string>& TrainConfig::keys() {
  static const std::set<std::string> all = {"train_steps", "train_sequences", "train_size",       "train_frames",
                                            "train_lr",    "train_lr_min",    "train_eps",        "train_flip",
                                            "train_init",  "train_init_noise", "train_seed"};
  return all;
}

TrainConfig TrainConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  TrainConfig tc;
  for (const auto& [key, value] : kv) {
    if (key == "train_steps") tc.steps = static_cast<int>(parse_int(value, key));
    else if (key == "train_sequences") tc.sequences = static_cast<int>(parse_int(value, key));
    else if (key == "train_size") tc.size = static_cast<int>(parse_int(value, key));
    else if (key == "train_frames") tc.frames = static_cast<int>(parse_int(value, key));
    else if (key == "train_lr") tc.lr0 = parse_double(value, key);
    else if (key == "train_lr_min") tc.lr_min = parse_double(value, key);
    else if (key == "train_eps") tc.eps = parse_double(value, key);
    else if (key == "train_flip") tc.flip = parse_bool(value, key);
    else if (key == "train_init_noise") tc.init_noise = parse_double(value, key);
    else if (key == "train_seed") tc.seed = static_cast<std::uint64_t>(parse_int(value, key));
    else if (key == "train_init") {
      if (value == "identity") tc.init = TrainInit::Identity;
      else if (value == "random") tc.init = TrainInit::Random;
      else throw ConfigError("train_init must be identity or random, got `" + value + "`");
    }
  }
  tc.validate();
  return tc;
}

std::vector<synth::MotionSpec> toy_motions(const TrainConfig& tc) {
  std::mt19937_64 rng(tc.seed ^ 0x5eed0f10ULL);
  std::uniform_real_distribution<double> velocity(-3.0, 3.0);
  std::vector<synth::MotionSpec> motions;
  for (int s = 0; s < tc.sequences; ++s) {
    synth::MotionSpec m;
    m.kind = synth::MotionKind::Translate;
    m.velocity = {velocity(rng), velocity(rng)};
    m.frames = tc.frames;
    m.pattern = s % 2 == 0 ? synth::Pattern::GaussianBlobs : synth::Pattern::SmoothGradient;
    m.seed = rng() % 1000000 + 1;
    motions.push_back(m);
  }
  return motions;
}

TrainSample make_sample(const synth::MotionSpec& motion, int size, const PipelineConfig& cfg) {
  const synth::Sequence sequence(motion, size, size);
  TrainSample sample;
  sample.targets = sequence.frames();
  const auto degraded = synth::degrade(sample.targets);
  auto oracle = std::make_shared<const OracleEstimator>(OracleEstimator::for_degraded(sequence, degraded.lr_all));
  std::shared_ptr<const FlowEstimator> estimator = oracle;
  if (cfg.flow == FlowMode::Naive) estimator = std::make_shared<NaiveEstimatorAdapter>(oracle);
  sample.input = prepare_sequence(degraded.lr_odd, *estimator, cfg.t, cfg.alpha);
  return sample;
}

std::vector<TrainSample> make_dataset(const std::vector<synth::MotionSpec>& motions, int size,
                                      const PipelineConfig& cfg) {
  std::vector<TrainSample> out;
  for (const auto& m : motions) out.push_back(make_sample(m, size, cfg));
  return out;
}

Real sample_loss(const TrainSample& sample, const PipelineWeights& w, const PipelineConfig& cfg, Real eps,
                 ParamSet* grads) {
  const std::size_t outputs = sample.input.frames.size() * 2 - 1;
  if (sample.targets.size() != outputs) {
    throw SequenceError("sample: " + std::to_string(sample.targets.size()) + " targets for " +
                        std::to_string(outputs) + " outputs");
  }
  std::unique_ptr<Graph> g = grads ? std::make_unique<Graph>(w.params, *grads) : std::make_unique<Graph>(w.params);
  std::vector<Var> terms;
  run_graph(*g, sample.input, w, cfg, [&](int index, const Var& hr) {
    terms.push_back(g->charbonnier(hr, sample.targets[static_cast<std::size_t>(index)], eps));
  });
  const Var loss = g->weighted_sum(terms, 1.0 / static_cast<Real>(terms.size()));
  if (grads) g->backward(loss);
  return loss->value(0, 0, 0);
}

PipelineWeights initial_weights(const PipelineConfig& cfg, const TrainConfig& tc) {
  PipelineWeights w = pipeline_layout(cfg);
  if (tc.init == TrainInit::Random) {
    init_random(w, tc.seed);
    return w;
  }
  init_identity(w, cfg);
  std::mt19937_64 rng(tc.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int id = 0; id < w.params.layer_count(); ++id) {
    Conv& layer = w.params.layer(id);
    const double fan_in = static_cast<double>(layer.kernel_h * layer.kernel_w * layer.in_channels);
    const double std = tc.init_noise * std::sqrt(2.0 / fan_in);
    for (Eigen::Index i = 0; i < layer.kernel.size(); ++i) layer.kernel.data()[i] += std * normal(rng);
  }
  return w;
}

TrainResult toy_train(const PipelineConfig& cfg, const TrainConfig& tc, const std::vector<TrainSample>& dataset,
                      const TrainProgress& progress) {
  return toy_train(cfg, tc, initial_weights(cfg, tc), dataset, progress);
}

TrainResult toy_train(const PipelineConfig& cfg, const TrainConfig& tc, PipelineWeights initial,
                      const std::vector<TrainSample>& dataset, const TrainProgress& progress) {
  tc.validate();
  if (dataset.empty()) throw ConfigError("toy_train: empty dataset");
  TrainResult result{std::move(initial), {}, {}};
  AdamState adam(result.weights.params);
  std::mt19937_64 rng(tc.seed + 0x9e3779b97f4a7c15ULL);
  std::vector<TrainSample> reversed;
  if (tc.flip) {
    for (const auto& s : dataset) reversed.push_back(time_reversed(s, cfg.alpha));
  }
  Real ema = 0.0;
  for (int step = 0; step < tc.steps; ++step) {
    const std::size_t pick = static_cast<std::size_t>(rng() % dataset.size());
    const bool flip = tc.flip && (rng() & 1U);
    const TrainSample& sample = flip ? reversed[pick] : dataset[pick];
    ParamSet grads = result.weights.params.zeros_like();
    const Real loss = sample_loss(sample, result.weights, cfg, tc.eps, &grads);
    const Real lr = cosine_lr(step, tc.steps, tc.lr0, tc.lr_min);
    adam_step(result.weights.params, grads, adam, lr);
    result.losses.push_back(loss);
    ema = step == 0 ? loss : 0.9 * ema + 0.1 * loss;
    result.smoothed.push_back(step == 0 ? ema : std::min(result.smoothed.back(), ema));
    if (progress) progress(step, loss, lr);
  }
  return result;
}

}  // namespace ofr
