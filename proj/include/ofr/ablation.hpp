#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ofr/learning.hpp"
#include "ofr/quality.hpp"

namespace ofr {

enum class AblationAxis { Flow, Direction, Frm, Fusion };

/// Throws UsageError for names other than flow, direction, frm and fusion.
AblationAxis parse_axis(const std::string& name);

struct Variant {
  std::string label;
  PipelineConfig cfg;
};

/// Variants of one axis, baseline last: flow (naive, intermediate),
/// direction (one-way, bidirectional), frm (pass-through, frm),
/// fusion (image, feature, hybrid).
std::vector<Variant> ablation_variants(AblationAxis axis, const PipelineConfig& base);

/// An evaluation sequence: low-resolution inputs, 2n - 1 high-resolution
/// targets, and the flow estimator to use for a given variant config.
struct EvalCase {
  std::string name;
  std::vector<Frame> inputs;
  std::vector<Frame> targets;
  std::function<std::shared_ptr<const FlowEstimator>(const PipelineConfig&)> estimator;
};

/// A synthetic case with the kinematic oracle (linearly scaled for naive flow).
EvalCase synthetic_case(const std::string& name, const synth::MotionSpec& motion, int size);

struct AblationResult {
  std::vector<QualityReport> reports;  // one per variant, same order
  /// Flow axis only: synthesized low-resolution intermediates against the
  /// x1/4 bicubic targets, one per variant.
  std::vector<QualityReport> silr_reports;
  std::vector<TrainResult> training;
};

using AblationProgress = std::function<void(const std::string& variant, int step, Real loss)>;

/// Toy-trains every variant with the same data and seed, then evaluates it.
AblationResult run_ablation(AblationAxis axis, const PipelineConfig& base, const TrainConfig& tc,
                            const std::vector<EvalCase>& cases, const AblationProgress& progress = {});

}  // namespace ofr
