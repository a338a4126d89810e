#include "ofr/ablation.hpp"

#include "ofr/image_io.hpp"

namespace ofr {

AblationAxis parse_axis(const std::string& name) {
  if (name == "flow") return AblationAxis::Flow;
  if (name == "direction") return AblationAxis::Direction;
  if (name == "frm") return AblationAxis::Frm;
  if (name == "fusion") return AblationAxis::Fusion;
  throw UsageError("unknown ablation axis `" + name + "` (expected flow, direction, frm or fusion)");
}

std::vector<Variant> ablation_variants(AblationAxis axis, const PipelineConfig& base) {
  const auto with = [&](const std::string& label, auto&& edit) {
    PipelineConfig cfg = base;
    edit(cfg);
    return Variant{label, cfg};
  };
  switch (axis) {
    case AblationAxis::Flow:
      return {with("naive", [](PipelineConfig& c) { c.flow = FlowMode::Naive; }),
              with("intermediate", [](PipelineConfig& c) { c.flow = FlowMode::Intermediate; })};
    case AblationAxis::Direction:
      return {with("one-way", [](PipelineConfig& c) { c.bidirectional = false; }),
              with("bidirectional", [](PipelineConfig& c) { c.bidirectional = true; })};
    case AblationAxis::Frm:
      return {with("without-frm", [](PipelineConfig& c) { c.use_frm = false; }),
              with("with-frm", [](PipelineConfig& c) { c.use_frm = true; })};
    case AblationAxis::Fusion:
      return {with("image", [](PipelineConfig& c) { c.fusion = FusionMode::Image; }),
              with("feature", [](PipelineConfig& c) { c.fusion = FusionMode::Feature; }),
              with("hybrid", [](PipelineConfig& c) { c.fusion = FusionMode::Hybrid; })};
  }
  return {};
}

EvalCase synthetic_case(const std::string& name, const synth::MotionSpec& motion, int size) {
  const synth::Sequence sequence(motion, size, size);
  EvalCase c;
  c.name = name;
  c.targets = sequence.frames();
  const auto degraded = synth::degrade(c.targets);
  c.inputs = degraded.lr_odd;
  auto oracle = std::make_shared<const OracleEstimator>(OracleEstimator::for_degraded(sequence, degraded.lr_all));
  c.estimator = [oracle](const PipelineConfig& cfg) -> std::shared_ptr<const FlowEstimator> {
    if (cfg.flow == FlowMode::Naive) return std::make_shared<NaiveEstimatorAdapter>(oracle);
    return oracle;
  };
  return c;
}

AblationResult run_ablation(AblationAxis axis, const PipelineConfig& base, const TrainConfig& tc,
                            const std::vector<EvalCase>& cases, const AblationProgress& progress) {
  if (cases.empty()) throw ConfigError("ablation: no evaluation sequences");
  AblationResult result;
  const auto motions = toy_motions(tc);
  for (const Variant& variant : ablation_variants(axis, base)) {
    const auto dataset = make_dataset(motions, tc.size, variant.cfg);
    TrainProgress on_step;
    if (progress) on_step = [&](int step, Real loss, Real) { progress(variant.label, step, loss); };
    TrainResult trained = toy_train(variant.cfg, tc, dataset, on_step);

    QualityReport report;
    report.label = variant.label;
    QualityReport silr_report;
    silr_report.label = variant.label + " (synthesized LR)";
    for (const EvalCase& c : cases) {
      const auto estimator = c.estimator(variant.cfg);
      const PreparedSequence seq = prepare_sequence(c.inputs, *estimator, variant.cfg.t, variant.cfg.alpha);
      const std::vector<Frame> out = run_pipeline(seq, variant.cfg, trained.weights);
      std::vector<std::string> names;
      for (std::size_t k = 0; k < out.size(); ++k) {
        names.push_back(c.name + "/" + output_name(static_cast<int>(k)));
      }
      const QualityReport r = evaluate(out, c.targets, variant.label, names);
      report.frames.insert(report.frames.end(), r.frames.begin(), r.frames.end());
      if (axis == AblationAxis::Flow) {
        for (std::size_t l = 0; l < seq.silrs.size(); ++l) {
          const Frame gt = bicubic_resize(c.targets[2 * l + 1], Rational{1, 4});
          const Frame pred = io::quantized(seq.silrs[l]);
          const Frame target = io::quantized(gt);
          FrameQuality q;
          q.name = c.name + "/" + output_name(static_cast<int>(2 * l + 1));
          q.kind = FrameKind::Interpolated;
          q.psnr = psnr(pred, target);
          q.ssim = ssim(pred, target);
          silr_report.frames.push_back(q);
        }
      }
    }
    result.reports.push_back(std::move(report));
    if (axis == AblationAxis::Flow) result.silr_reports.push_back(std::move(silr_report));
    result.training.push_back(std::move(trained));
  }
  return result;
}

}  // namespace ofr
