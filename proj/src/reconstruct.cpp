#include "ofr/reconstruct.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "ofr/frame_synthesis.hpp"
#include "ofr/image_io.hpp"
#include "ofr/key_value.hpp"
#include "ofr/synth_bench.hpp"

namespace ofr {

// ---------------------------------------------------------------------------
// Configuration

void PipelineConfig::validate() const {
  if (channels < 3) throw ConfigError("channels must be >= 3");
  if (r_fuse < 0 || r_merge < 0 || r_trunk < 0) throw ConfigError("residual block counts must be >= 0");
  if (k < 0) throw ConfigError("k must be >= 0");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (t != 0.5) throw ConfigError("t must be 0.5 (the output grid is half-step)");
  if (space_scale != 4) throw ConfigError("space_scale must be 4 (two x2 sub-pixel stages)");
  if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("slope must lie in [0,1)");
  if (weights == WeightSource::File && weights_path.empty()) throw ConfigError("weights = file needs weights_path");
  BlockMatchEstimator{block_match};
}

const std::set<std::string>& PipelineConfig::keys() {
  static const std::set<std::string> all = {
      "channels", "r_fuse",  "r_merge", "r_trunk",  "k",         "alpha",        "t",
      "space_scale", "slope", "estimator", "block", "search",    "levels",       "refine",
      "oracle_manifest", "weights", "weights_path", "seed", "fusion", "flow",     "direction",
      "frm"};
  return all;
}

PipelineConfig PipelineConfig::from_key_values(const std::map<std::string, std::string>& kv,
                                               const std::string& origin, const std::set<std::string>& extra) {
  std::set<std::string> allowed = keys();
  allowed.insert(extra.begin(), extra.end());
  reject_unknown_keys(kv, allowed, origin);
  PipelineConfig cfg;
  const auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  const auto as_int = [&](const char* key, int& dst) {
    if (const auto* v = get(key)) dst = static_cast<int>(parse_int(*v, key));
  };
  const auto as_real = [&](const char* key, Real& dst) {
    if (const auto* v = get(key)) dst = parse_double(*v, key);
  };
  as_int("channels", cfg.channels);
  as_int("r_fuse", cfg.r_fuse);
  as_int("r_merge", cfg.r_merge);
  as_int("r_trunk", cfg.r_trunk);
  as_int("k", cfg.k);
  as_real("alpha", cfg.alpha);
  as_real("t", cfg.t);
  as_int("space_scale", cfg.space_scale);
  as_real("slope", cfg.slope);
  as_int("block", cfg.block_match.block);
  as_int("search", cfg.block_match.search);
  as_int("levels", cfg.block_match.levels);
  as_int("refine", cfg.block_match.refine);
  if (const auto* v = get("estimator")) {
    if (*v == "oracle") cfg.estimator = EstimatorKind::Oracle;
    else if (*v == "block_match") cfg.estimator = EstimatorKind::BlockMatch;
    else throw ConfigError(origin + ": estimator must be oracle or block_match, got `" + *v + "`");
  }
  if (const auto* v = get("oracle_manifest")) cfg.oracle_manifest = *v;
  if (const auto* v = get("weights")) {
    if (*v == "random") cfg.weights = WeightSource::Random;
    else if (*v == "file") cfg.weights = WeightSource::File;
    else if (*v == "identity") cfg.weights = WeightSource::Identity;
    else throw ConfigError(origin + ": weights must be random, file or identity, got `" + *v + "`");
  }
  if (const auto* v = get("weights_path")) cfg.weights_path = *v;
  if (const auto* v = get("seed")) cfg.seed = static_cast<std::uint64_t>(parse_int(*v, "seed"));
  if (const auto* v = get("fusion")) {
    if (*v == "hybrid") cfg.fusion = FusionMode::Hybrid;
    else if (*v == "image") cfg.fusion = FusionMode::Image;
    else if (*v == "feature") cfg.fusion = FusionMode::Feature;
    else throw ConfigError(origin + ": fusion must be hybrid, image or feature, got `" + *v + "`");
  }
  if (const auto* v = get("flow")) {
    if (*v == "intermediate") cfg.flow = FlowMode::Intermediate;
    else if (*v == "naive") cfg.flow = FlowMode::Naive;
    else throw ConfigError(origin + ": flow must be intermediate or naive, got `" + *v + "`");
  }
  if (const auto* v = get("direction")) {
    if (*v == "bidirectional") cfg.bidirectional = true;
    else if (*v == "one-way") cfg.bidirectional = false;
    else throw ConfigError(origin + ": direction must be bidirectional or one-way, got `" + *v + "`");
  }
  if (const auto* v = get("frm")) cfg.use_frm = parse_bool(*v, "frm");
  cfg.validate();
  return cfg;
}

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::Hybrid: return "hybrid";
    case FusionMode::Image: return "image";
    case FusionMode::Feature: return "feature";
  }
  return "hybrid";
}

std::string to_string(FlowMode mode) { return mode == FlowMode::Naive ? "naive" : "intermediate"; }

std::vector<std::pair<std::string, std::string>> PipelineConfig::to_key_values() const {
  const auto real = [](Real v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  return {{"channels", std::to_string(channels)},
          {"r_fuse", std::to_string(r_fuse)},
          {"r_merge", std::to_string(r_merge)},
          {"r_trunk", std::to_string(r_trunk)},
          {"k", std::to_string(k)},
          {"alpha", real(alpha)},
          {"t", real(t)},
          {"space_scale", std::to_string(space_scale)},
          {"slope", real(slope)},
          {"estimator", estimator == EstimatorKind::Oracle ? "oracle" : "block_match"},
          {"block", std::to_string(block_match.block)},
          {"search", std::to_string(block_match.search)},
          {"levels", std::to_string(block_match.levels)},
          {"refine", std::to_string(block_match.refine)},
          {"weights", weights == WeightSource::Random ? "random"
                      : weights == WeightSource::File ? "file"
                                                      : "identity"},
          {"seed", std::to_string(seed)},
          {"fusion", to_string(fusion)},
          {"flow", to_string(flow)},
          {"direction", bidirectional ? "bidirectional" : "one-way"},
          {"frm", use_frm ? "true" : "false"}};
}

// ---------------------------------------------------------------------------
// Weights

PipelineWeights pipeline_layout(const PipelineConfig& cfg) {
  cfg.validate();
  PipelineWeights w;
  const int c = cfg.channels;
  w.forward = add_branch_layers(w.params, "fwd", c, cfg.r_fuse, cfg.slope);
  w.backward = add_branch_layers(w.params, "bwd", c, cfg.r_fuse, cfg.slope);
  w.merge = add_merge_layers(w.params, "merge", c, cfg.r_merge);
  w.trunk = add_residual_layers(w.params, "trunk.res", c, cfg.r_trunk);
  w.up.conv1 = w.params.add("up.conv1", Conv::same(3, c, 4 * c));
  w.up.conv2 = w.params.add("up.conv2", Conv::same(3, c, 4 * c));
  w.up.out = w.params.add("up.out", Conv::same(3, c, 3));
  return w;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void init_random(PipelineWeights& w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int id = 0; id < w.params.layer_count(); ++id) {
    Conv& layer = w.params.layer(id);
    const std::string& name = w.params.name(id);
    const double fan_in = static_cast<double>(layer.kernel_h * layer.kernel_w * layer.in_channels);
    double std = std::sqrt(2.0 / fan_in);
    if (ends_with(name, ".conv2") && name.find(".res") != std::string::npos) std *= 0.1;
    if (ends_with(name, ".mix") || ends_with(name, ".blend")) std = std::sqrt(1.0 / fan_in);
    if (name == "up.out") std = 0.1 * std::sqrt(1.0 / fan_in);
    for (Eigen::Index i = 0; i < layer.kernel.size(); ++i) layer.kernel.data()[i] = std * normal(rng);
    layer.bias.setZero();
    if (name == "up.out") layer.bias.setConstant(0.5);
  }
}

namespace {

void center_identity(Conv& layer, int in_first, int out_first, int count, Real value = 1.0) {
  const int cy = layer.kernel_h / 2;
  const int cx = layer.kernel_w / 2;
  for (int c = 0; c < count; ++c) layer.weight(cy, cx, in_first + c, out_first + c) = value;
}

void zero(ParamSet& params) {
  for (int id = 0; id < params.layer_count(); ++id) {
    params.layer(id).kernel.setZero();
    params.layer(id).bias.setZero();
  }
}

void identity_branch(ParamSet& p, const BranchWeights& b, int c, FusionMode fusion) {
  center_identity(p.layer(b.frm.blend), c, 0, c);       // refine(hs) = hs
  center_identity(p.layer(b.update.projection), 0, 0, 3);  // RGB -> channels 0..2
  center_identity(p.layer(b.update.mix), c, 0, c);      // state = projected frame
  center_identity(p.layer(b.fuse.projection), 0, 0, 3);
  Conv& mix = p.layer(b.fuse.mix);
  switch (fusion) {
    case FusionMode::Feature: center_identity(mix, 0, 0, c); break;  // warped state
    case FusionMode::Image: center_identity(mix, c, 0, 3); break;    // synthesized frame
    case FusionMode::Hybrid:                                         // their average
      center_identity(mix, 0, 0, c, 0.5);
      center_identity(mix, c, 0, 3, 0.5);
      break;
  }
}

}  // namespace

void init_identity(PipelineWeights& w, const PipelineConfig& cfg) {
  ParamSet& p = w.params;
  zero(p);
  const int c = p.layer(w.merge.mix).out_channels;
  identity_branch(p, w.forward, c, cfg.fusion);
  identity_branch(p, w.backward, c, cfg.fusion);
  if (cfg.bidirectional) {
    center_identity(p.layer(w.merge.mix), 0, 0, c, 0.5);
    center_identity(p.layer(w.merge.mix), c, 0, c, 0.5);
  } else {
    center_identity(p.layer(w.merge.mix), 0, 0, c);
  }
  for (ParamSet::LayerId id : {w.up.conv1, w.up.conv2}) {
    Conv& layer = p.layer(id);
    for (int ch = 0; ch < c; ++ch)
      for (int sub = 0; sub < 4; ++sub) layer.weight(1, 1, ch, 4 * ch + sub) = 1.0;
  }
  center_identity(p.layer(w.up.out), 0, 0, 3);
}

PipelineWeights make_weights(const PipelineConfig& cfg) {
  PipelineWeights w = pipeline_layout(cfg);
  switch (cfg.weights) {
    case WeightSource::Random: init_random(w, cfg.seed); break;
    case WeightSource::Identity: init_identity(w, cfg); break;
    case WeightSource::File: read_weights(cfg.weights_path, w.params); break;
  }
  return w;
}

PipelineWeights PipelineWeights::swapped_branches() const {
  PipelineWeights out = *this;
  for (int id = 0; id < params.layer_count(); ++id) {
    const std::string& name = params.name(id);
    if (name.rfind("fwd.", 0) == 0) {
      const ParamSet::LayerId mirror = params.id("bwd." + name.substr(4));
      out.params.layer(id) = params.layer(mirror);
      out.params.layer(mirror) = params.layer(id);
    }
  }
  Conv& mix = out.params.layer(merge.mix);
  const int c = mix.out_channels;
  const RowMatrix<Real> first = mix.kernel.topRows(c);
  mix.kernel.topRows(c) = mix.kernel.bottomRows(c);
  mix.kernel.bottomRows(c) = first;
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction

Var upsample(Graph& g, const Var& feature, const UpsampleWeights& w, Real slope) {
  Var x = g.leaky_relu(g.pixel_shuffle(g.conv(feature, w.conv1), 2), slope);
  x = g.leaky_relu(g.pixel_shuffle(g.conv(x, w.conv2), 2), slope);
  return g.clamp01(g.conv(x, w.out));
}

Frame upsample(const Frame& feature, const ParamSet& params, const UpsampleWeights& w, Real slope) {
  Graph g(params);
  return upsample(g, g.constant(feature), w, slope)->value;
}

PreparedSequence prepare_sequence(const std::vector<Frame>& frames, std::vector<FlowBundle> bundles, Real alpha) {
  if (frames.empty()) throw SequenceError("pipeline: no input frames");
  for (const Frame& f : frames) {
    require_same_shape(frames.front(), f, "pipeline input frames");
  }
  if (bundles.size() + 1 != frames.size()) {
    throw SequenceError("pipeline: " + std::to_string(frames.size()) + " frames need " +
                        std::to_string(frames.size() - 1) + " flow bundles");
  }
  PreparedSequence seq;
  seq.frames = frames;
  for (std::size_t l = 0; l < bundles.size(); ++l) {
    const auto masks = occlusion_masks(bundles[l].f01, bundles[l].f10, alpha);
    seq.silrs.push_back(synthesize_silr(frames[l], frames[l + 1], bundles[l], masks));
  }
  seq.bundles = std::move(bundles);
  return seq;
}

PreparedSequence prepare_sequence(const std::vector<Frame>& frames, const FlowEstimator& estimator, Real t,
                                  Real alpha) {
  if (frames.empty()) throw SequenceError("pipeline: no input frames");
  for (const Frame& f : frames) require_same_shape(frames.front(), f, "pipeline input frames");
  std::vector<FlowBundle> bundles;
  if (frames.size() > 1) bundles = sequence_flows(frames, estimator, t);
  return prepare_sequence(frames, std::move(bundles), alpha);
}

namespace {

/// Oracle over the quantized degraded frames described by a manifest, so that
/// frames read back from 8-bit files match exactly.
class ManifestOracle final : public FlowEstimator, public PairwiseEstimator {
 public:
  explicit ManifestOracle(const std::filesystem::path& manifest) : oracle_(build(manifest)) {}
  std::pair<Flow, Flow> estimate(const Frame& i0, const Frame& i1, double t) const override {
    return oracle_.estimate(i0, i1, t);
  }
  Flow estimate_pair(const Frame& from, const Frame& to) const override { return oracle_.estimate_pair(from, to); }

 private:
  static OracleEstimator build(const std::filesystem::path& manifest) {
    if (!std::filesystem::exists(manifest)) {
      throw OracleUnavailable("oracle estimator: no motion manifest at " + manifest.string());
    }
    const auto spec = synth::sequence_spec_from_key_values(read_key_values(manifest));
    const synth::Sequence sequence(spec.motion, spec.height, spec.width);
    const auto degraded = synth::degrade(sequence.frames());
    std::vector<std::pair<double, Frame>> known;
    for (std::size_t k = 0; k < degraded.lr_all.size(); ++k) {
      known.emplace_back(static_cast<double>(k), io::quantized(degraded.lr_all[k]));
    }
    const double scale = static_cast<double>(degraded.lr_all.front().width()) / spec.width;
    return OracleEstimator(sequence, scale, std::move(known), 1e-9);
  }

  OracleEstimator oracle_;
};

template <typename Inner>
std::shared_ptr<const FlowEstimator> with_flow_mode(std::shared_ptr<const Inner> inner, FlowMode mode) {
  if (mode == FlowMode::Naive) return std::make_shared<NaiveEstimatorAdapter>(inner);
  return inner;
}

}  // namespace

std::shared_ptr<const FlowEstimator> make_estimator(const PipelineConfig& cfg,
                                                    const std::filesystem::path& fallback_manifest) {
  if (cfg.estimator == EstimatorKind::BlockMatch) {
    return with_flow_mode(std::make_shared<const BlockMatchEstimator>(cfg.block_match), cfg.flow);
  }
  const std::filesystem::path manifest =
      cfg.oracle_manifest.empty() ? fallback_manifest : std::filesystem::path(cfg.oracle_manifest);
  if (manifest.empty()) throw OracleUnavailable("oracle estimator: no motion manifest configured");
  return with_flow_mode(std::make_shared<const ManifestOracle>(manifest), cfg.flow);
}

void run_graph(Graph& g, const PreparedSequence& seq, const PipelineWeights& w, const PipelineConfig& cfg,
               const OutputSink& sink, const BranchObserver* observer) {
  std::vector<Var> frames;
  std::vector<Var> silrs;
  for (const Frame& f : seq.frames) frames.push_back(g.constant(f));
  for (const Frame& s : seq.silrs) silrs.push_back(g.constant(s));
  const BranchOptions options = cfg.branch_options();

  std::vector<Var> backward(frames.empty() ? 0 : 2 * frames.size() - 1);
  if (cfg.bidirectional) {
    propagate(g, Direction::Backward, frames, silrs, seq.bundles, w.backward, options,
              [&](BranchOutput o) { backward[static_cast<std::size_t>(o.index)] = std::move(o.feature); },
              observer);
  }
  propagate(
      g, Direction::Forward, frames, silrs, seq.bundles, w.forward, options,
      [&](BranchOutput o) {
        Var& bwd = backward[static_cast<std::size_t>(o.index)];
        Var merged = merge_features(g, o.feature, bwd, w.merge, cfg.slope);
        bwd.reset();
        merged = residual_stack(g, merged, w.trunk, cfg.slope);
        sink(o.index, upsample(g, merged, w.up, cfg.slope));
      },
      observer);
}

std::vector<Frame> run_pipeline(const PreparedSequence& seq, const PipelineConfig& cfg, const PipelineWeights& w) {
  Graph g(w.params);
  std::vector<Frame> out(seq.frames.empty() ? 0 : 2 * seq.frames.size() - 1);
  run_graph(g, seq, w, cfg, [&](int index, const Var& hr) { out[static_cast<std::size_t>(index)] = hr->value; });
  return out;
}

std::vector<Frame> run_pipeline(const std::vector<Frame>& lr_frames, const PipelineConfig& cfg,
                                const PipelineWeights& w, const FlowEstimator& estimator) {
  return run_pipeline(prepare_sequence(lr_frames, estimator, cfg.t, cfg.alpha), cfg, w);
}

std::string output_name(int index) {
  char buf[32];
  if (index % 2 == 0) {
    std::snprintf(buf, sizeof buf, "%06d", index / 2);
  } else {
    std::snprintf(buf, sizeof buf, "%06d_5", index / 2);
  }
  return buf;
}

}  // namespace ofr
