// Command-line front end: ofr <subcommand> [flags]. Exit codes: 0 success,
// 1 failed check, 2 I/O error, 3 input-shape error, 4 configuration or usage error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ofr/ablation.hpp"
#include "ofr/flow_io.hpp"
#include "ofr/gradcheck.hpp"
#include "ofr/image_io.hpp"
#include "ofr/key_value.hpp"

namespace fs = std::filesystem;
using namespace ofr;

namespace {

constexpr int kCheckFailed = 1;

std::map<std::string, std::string> config_values(const std::string& path) {
  if (path.empty()) return {};
  return read_key_values(path);
}

PipelineConfig load_config(const std::map<std::string, std::string>& kv, const std::string& origin) {
  PipelineConfig cfg = PipelineConfig::from_key_values(kv, origin.empty() ? "defaults" : origin, TrainConfig::keys());
  cfg.validate();
  return cfg;
}

std::vector<Frame> read_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  const auto paths = io::list_frames(dir);
  if (paths.empty()) throw IoError("no .png or .ppm frames in " + dir.string());
  std::vector<Frame> frames;
  for (const auto& p : paths) frames.push_back(io::read_image(p));
  return frames;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

fs::path fallback_manifest(const fs::path& in) { return fs::absolute(in).parent_path() / "manifest.txt"; }

PipelineWeights load_weights(PipelineConfig& cfg, const std::string& weights_path) {
  if (!weights_path.empty()) {
    cfg.weights = WeightSource::File;
    cfg.weights_path = weights_path;
  }
  return make_weights(cfg);
}

std::string format_psnr(Real v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

struct UpscaleArgs {
  std::string in, out, config, weights;
  std::optional<std::uint64_t> seed;
};

int upscale(const UpscaleArgs& a) {
  PipelineConfig cfg = load_config(config_values(a.config), a.config);
  if (a.seed) cfg.seed = *a.seed;
  const std::vector<Frame> frames = read_frames(a.in);
  const PipelineWeights w = load_weights(cfg, a.weights);
  const auto estimator = make_estimator(cfg, fallback_manifest(a.in));
  const PreparedSequence seq = prepare_sequence(frames, *estimator, cfg.t, cfg.alpha);
  make_dir(a.out);
  int written = 0;
  Graph g(w.params);
  run_graph(g, seq, w, cfg, [&](int index, const Var& hr) {
    io::write_image(fs::path(a.out) / (output_name(index) + ".png"), hr->value);
    ++written;
  });
  std::cout << "frames_in=" << frames.size() << " frames_out=" << written << " size=" << 4 * frames[0].width() << "x"
            << 4 * frames[0].height() << "\n";
  return 0;
}

struct InterpArgs {
  std::string in, out, config;
};

int interp(const InterpArgs& a) {
  const PipelineConfig cfg = load_config(config_values(a.config), a.config);
  const std::vector<Frame> frames = read_frames(a.in);
  const auto estimator = make_estimator(cfg, fallback_manifest(a.in));
  const PreparedSequence seq = prepare_sequence(frames, *estimator, cfg.t, cfg.alpha);
  make_dir(a.out);
  for (std::size_t l = 0; l < seq.silrs.size(); ++l) {
    io::write_image(fs::path(a.out) / (output_name(static_cast<int>(2 * l + 1)) + ".png"), seq.silrs[l]);
  }
  std::cout << "frames_in=" << frames.size() << " synthesized=" << seq.silrs.size() << "\n";
  return 0;
}

struct EvalArgs {
  std::string pred, gt, out;
};

int eval(const EvalArgs& a) {
  const std::vector<Frame> pred = read_frames(a.pred);
  const std::vector<Frame> gt = read_frames(a.gt);
  std::vector<std::string> names;
  for (const auto& p : io::list_frames(a.pred)) names.push_back(p.filename().string());
  const QualityReport report = evaluate(pred, gt, fs::path(a.pred).filename().string(), names);
  if (!a.out.empty()) write_reports(a.out, {report});
  std::cout << report.to_text();
  const auto m = report.mean();
  std::cout << "mean psnr=" << format_psnr(m.psnr) << " ssim=" << std::setprecision(6) << m.ssim
            << " inf=" << (std::isinf(m.psnr) ? 1 : 0) << "\n";
  return 0;
}

struct SynthArgs {
  std::string spec, out;
};

int synth_cmd(const SynthArgs& a) {
  const synth::SequenceSpec spec = synth::sequence_spec_from_key_values(read_key_values(a.spec));
  const synth::Sequence sequence(spec.motion, spec.height, spec.width);
  const std::vector<Frame> hr = sequence.frames();
  const synth::Degraded degraded = synth::degrade(hr);
  const fs::path out(a.out);
  for (const char* sub : {"hr", "lr", "lr_odd", "gt", "flows"}) make_dir(out / sub);
  const auto kv = synth::to_key_values(spec);
  write_key_values(out / "manifest.txt", {kv.begin(), kv.end()});
  for (std::size_t k = 0; k < hr.size(); ++k) {
    char name[16];
    std::snprintf(name, sizeof name, "%06zu.png", k);
    io::write_image(out / "hr" / name, hr[k]);
    io::write_image(out / "lr" / name, degraded.lr_all[k]);
    io::write_image(out / "gt" / (output_name(static_cast<int>(k)) + ".png"), hr[k]);
  }
  for (std::size_t i = 0; i < degraded.lr_odd.size(); ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "%06zu.png", i);
    io::write_image(out / "lr_odd" / name, degraded.lr_odd[i]);
  }
  for (std::size_t l = 0; l + 1 < degraded.lr_odd.size(); ++l) {
    const double t0 = 2.0 * l, mid = t0 + 1.0, t1 = t0 + 2.0;
    const std::string stem = output_name(static_cast<int>(2 * l + 1));
    io::write_flow(out / "flows" / (stem + "_t0.flo"), sequence.true_flow(mid, t0, 0.25));
    io::write_flow(out / "flows" / (stem + "_t1.flo"), sequence.true_flow(mid, t1, 0.25));
  }
  std::cout << "hr_frames=" << hr.size() << " inputs=" << degraded.lr_odd.size() << " size=" << spec.width << "x"
            << spec.height << "\n";
  return 0;
}

struct AblateArgs {
  std::string axis, in, gt, out, config;
  std::optional<int> steps;
  bool quiet = false;
};

int ablate(const AblateArgs& a) {
  const AblationAxis axis = parse_axis(a.axis);
  const auto kv = config_values(a.config);
  const PipelineConfig base = load_config(kv, a.config);
  TrainConfig tc = TrainConfig::from_key_values(kv);
  if (a.steps) tc.steps = *a.steps;
  tc.validate();

  EvalCase c;
  c.name = fs::path(a.in).filename().string();
  c.inputs = read_frames(a.in);
  c.targets = read_frames(a.gt);
  const fs::path manifest = fallback_manifest(a.in);
  c.estimator = [manifest](const PipelineConfig& cfg) { return make_estimator(cfg, manifest); };

  AblationProgress progress;
  if (!a.quiet) {
    progress = [](const std::string& variant, int step, Real loss) {
      if (step % 50 == 0) std::cerr << variant << " step " << step << " loss " << loss << "\n";
    };
  }
  const AblationResult result = run_ablation(axis, base, tc, {c}, progress);
  std::vector<QualityReport> all = result.reports;
  all.insert(all.end(), result.silr_reports.begin(), result.silr_reports.end());
  if (!a.out.empty()) write_reports(a.out, all);
  std::cout << "axis=" << a.axis << " steps=" << tc.steps << "\n";
  for (const QualityReport& r : all) {
    const auto m = r.mean();
    const auto mi = r.mean(FrameKind::Interpolated);
    std::cout << std::left << std::setw(28) << r.label << " psnr=" << format_psnr(m.psnr)
              << " ssim=" << std::fixed << std::setprecision(4) << m.ssim
              << " interp_psnr=" << format_psnr(mi.psnr) << "\n";
  }
  return 0;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  int seeds = 50;
};

int gradcheck(const GradcheckArgs& a) {
  GradCheckOptions options;
  options.base_seed = a.seed;
  options.seeds = a.seeds;
  if (options.seeds < 1) throw UsageError("--seeds must be positive");
  bool ok = true;
  Real worst = 0.0;
  int failed = 0;
  const auto results = gradcheck_suite(options);
  for (const GradCheckResult& r : results) {
    std::cout << std::left << std::setw(20) << r.op << (r.passed ? " ok  " : " FAIL") << " max rel err = "
              << std::scientific << std::setprecision(3) << r.max_error << " coords=" << r.coordinates
              << " kinks=" << r.kinks << "\n";
    ok = ok && r.passed;
    failed += r.passed ? 0 : 1;
    worst = std::max(worst, r.max_error);
  }
  if (ok) {
    std::cout << "all " << results.size() << " ops passed, max rel err = " << std::scientific << std::setprecision(3)
              << worst << "\n";
    return 0;
  }
  std::cout << failed << " of " << results.size() << " ops failed, max rel err = " << std::scientific
            << std::setprecision(3) << worst << "\n";
  return kCheckFailed;
}

struct TrainArgs {
  std::string config, out, curve;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
};

int train_toy(const TrainArgs& a) {
  const auto kv = config_values(a.config);
  const PipelineConfig cfg = load_config(kv, a.config);
  TrainConfig tc = TrainConfig::from_key_values(kv);
  if (a.steps) tc.steps = *a.steps;
  if (a.seed) tc.seed = *a.seed;
  tc.validate();
  const auto dataset = make_dataset(toy_motions(tc), tc.size, cfg);
  const TrainResult result = toy_train(cfg, tc, dataset, [&](int step, Real loss, Real lr) {
    if (step % 25 == 0 || step + 1 == tc.steps) {
      std::cerr << "step " << step << " loss " << loss << " lr " << lr << "\n";
    }
  });
  if (!a.out.empty()) write_weights(a.out, result.weights.params);
  if (!a.curve.empty()) {
    std::ofstream f(a.curve);
    if (!f) throw IoError("cannot write " + a.curve);
    f << "step,loss,smoothed\n" << std::setprecision(10);
    for (std::size_t s = 0; s < result.losses.size(); ++s) {
      f << s << "," << result.losses[s] << "," << result.smoothed[s] << "\n";
    }
  }
  std::cout << "steps=" << tc.steps;
  if (!result.smoothed.empty()) {
    const Real first = result.smoothed.front(), last = result.smoothed.back();
    std::cout << std::setprecision(6) << " initial_loss=" << first << " final_smoothed_loss=" << last
              << " ratio=" << last / first;
  }
  std::cout << "\n";
  return 0;
}

struct FlowArgs {
  std::string in, out, config;
};

int flow_cmd(const FlowArgs& a) {
  const PipelineConfig cfg = load_config(config_values(a.config), a.config);
  const std::vector<Frame> frames = read_frames(a.in);
  if (frames.size() < 2) throw SequenceError("flow: need at least 2 frames, got " + std::to_string(frames.size()));
  const auto estimator = make_estimator(cfg, fallback_manifest(a.in));
  const std::vector<FlowBundle> bundles = sequence_flows(frames, *estimator, cfg.t);
  make_dir(a.out);
  for (std::size_t l = 0; l < bundles.size(); ++l) {
    const FlowBundle& b = bundles[l];
    const std::string stem = output_name(static_cast<int>(2 * l + 1));
    const fs::path out(a.out);
    io::write_flow(out / (stem + "_t0.flo"), b.f_t0);
    io::write_flow(out / (stem + "_t1.flo"), b.f_t1);
    io::write_flow(out / (stem + "_01.flo"), b.f01);
    io::write_flow(out / (stem + "_10.flo"), b.f10);
    const auto mean_norm = [](const Flow& f) { return f.uv().matrix().rowwise().norm().mean(); };
    std::cout << "pair " << l << " mean|f_t0|=" << std::fixed << std::setprecision(4) << mean_norm(b.f_t0)
              << " mean|f_t1|=" << mean_norm(b.f_t1) << " mean|f01|=" << mean_norm(b.f01)
              << " mean|f10|=" << mean_norm(b.f10) << "\n";
  }
  return 0;
}

struct InspectArgs {
  std::string in, out, config, weights;
  std::optional<std::uint64_t> seed;
};

int inspect_frm(const InspectArgs& a) {
  PipelineConfig cfg = load_config(config_values(a.config), a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (!cfg.use_frm) throw ConfigError("inspect-frm: frm is disabled in the config");
  const std::vector<Frame> frames = read_frames(a.in);
  const PipelineWeights w = load_weights(cfg, a.weights);
  const auto estimator = make_estimator(cfg, fallback_manifest(a.in));
  const PreparedSequence seq = prepare_sequence(frames, *estimator, cfg.t, cfg.alpha);
  make_dir(a.out);
  // Backward branch visits frames n-1 .. 0, the forward branch 0 .. n-1.
  const int n = static_cast<int>(frames.size());
  int calls = 0;
  BranchObserver observer;
  observer.attention = [&](const Frame& attention) {
    const bool backward = cfg.bidirectional && calls < n;
    const int step = cfg.bidirectional ? calls % n : calls;
    const int index = backward ? n - 1 - step : step;
    Frame gray(attention.height(), attention.width(), 1);
    gray.array() = attention.array().rowwise().mean();
    char name[32];
    std::snprintf(name, sizeof name, "%s_%06d.png", backward ? "bwd" : "fwd", index);
    io::write_image(fs::path(a.out) / name, gray);
    std::cout << name << " mean=" << std::fixed << std::setprecision(4) << gray.array().mean() << "\n";
    ++calls;
  };
  Graph g(w.params);
  run_graph(g, seq, w, cfg, [](int, const Var&) {}, &observer);
  return 0;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e) ||
      dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const OracleUnavailable*>(&e)) {
    return 4;
  }
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return 2;
  if (dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const SizeError*>(&e) ||
      dynamic_cast<const SequenceError*>(&e)) {
    return 3;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time video super-resolution with reused intermediate flows"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  UpscaleArgs up;
  auto* c_up = app.add_subcommand("upscale", "x4 space, x2 time: n frames in, 2n-1 frames out");
  c_up->add_option("--in", up.in, "input frame directory")->required();
  c_up->add_option("--out", up.out, "output directory")->required();
  c_up->add_option("--config", up.config, "key = value config file")->required();
  c_up->add_option("--weights", up.weights, "weight file (overrides weights = ...)");
  c_up->add_option("--seed", up.seed, "seed for random weights");

  InterpArgs ip;
  auto* c_ip = app.add_subcommand("interp", "synthesized low-resolution intermediate frames");
  c_ip->add_option("--in", ip.in, "input frame directory")->required();
  c_ip->add_option("--out", ip.out, "output directory")->required();
  c_ip->add_option("--config", ip.config, "key = value config file");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "PSNR / SSIM of a prediction directory");
  c_ev->add_option("--pred", ev.pred, "predicted frame directory")->required();
  c_ev->add_option("--gt", ev.gt, "ground-truth frame directory")->required();
  c_ev->add_option("--out", ev.out, "report stem; writes <stem>.txt and <stem>.json");

  SynthArgs sy;
  auto* c_sy = app.add_subcommand("synth", "render a synthetic sequence with exact flows");
  c_sy->add_option("--spec", sy.spec, "motion spec (key = value)")->required();
  c_sy->add_option("--out", sy.out, "output directory")->required();

  AblateArgs ab;
  auto* c_ab = app.add_subcommand("ablate", "toy-train and compare the variants of one module");
  c_ab->add_option("--axis", ab.axis, "flow, direction, frm or fusion")->required();
  c_ab->add_option("--in", ab.in, "input frame directory (synth lr_odd)")->required();
  c_ab->add_option("--gt", ab.gt, "ground-truth directory (synth gt)")->required();
  c_ab->add_option("--out", ab.out, "report stem");
  c_ab->add_option("--config", ab.config, "base pipeline and training config");
  c_ab->add_option("--steps", ab.steps, "training steps per variant");
  c_ab->add_flag("--quiet", ab.quiet, "no per-step progress");

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  c_gc->add_option("--seed", gc.seed, "base seed");
  c_gc->add_option("--seeds", gc.seeds, "random instances per op");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train-toy", "train on synthetic translations");
  c_tr->add_option("--config", tr.config, "pipeline and training config");
  c_tr->add_option("--out", tr.out, "weight file to write");
  c_tr->add_option("--curve", tr.curve, "loss curve CSV");
  c_tr->add_option("--steps", tr.steps, "overrides train_steps");
  c_tr->add_option("--seed", tr.seed, "overrides train_seed");

  FlowArgs fl;
  auto* c_fl = app.add_subcommand("flow", "intermediate and reused flows for every input pair");
  c_fl->add_option("--in", fl.in, "input frame directory")->required();
  c_fl->add_option("--out", fl.out, "output directory for .flo files")->required();
  c_fl->add_option("--config", fl.config, "key = value config file");

  InspectArgs in;
  auto* c_in = app.add_subcommand("inspect-frm", "write the feature-refinement attention maps");
  c_in->add_option("--in", in.in, "input frame directory")->required();
  c_in->add_option("--out", in.out, "output directory")->required();
  c_in->add_option("--config", in.config, "key = value config file");
  c_in->add_option("--weights", in.weights, "weight file");
  c_in->add_option("--seed", in.seed, "seed for random weights");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 4;
  }

  try {
    if (*c_up) return upscale(up);
    if (*c_ip) return interp(ip);
    if (*c_ev) return eval(ev);
    if (*c_sy) return synth_cmd(sy);
    if (*c_ab) return ablate(ab);
    if (*c_gc) return gradcheck(gc);
    if (*c_tr) return train_toy(tr);
    if (*c_fl) return flow_cmd(fl);
    if (*c_in) return inspect_frm(in);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 4;
}
