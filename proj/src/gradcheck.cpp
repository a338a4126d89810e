#include "ofr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <random>

#include "ofr/blocks.hpp"
#include "ofr/feature_refine.hpp"
#include "ofr/frame_synthesis.hpp"
#include "ofr/graph.hpp"
#include "ofr/reconstruct.hpp"

namespace ofr {

Real gradient_error(Real analytic, Real numeric, Real rel_tol, Real abs_floor) {
  const Real scale = std::max({std::abs(analytic), std::abs(numeric), abs_floor / rel_tol});
  return std::abs(analytic - numeric) / scale;
}

namespace {

using Rng = std::mt19937_64;

struct Slot {
  Real* data;
  Eigen::Index size;
};

using Trace = std::vector<std::uint8_t>;

/// Slots are the differentiable arrays, `forward` reads them (and fills the
/// branch trace when given one), `analytic` returns d<dy, forward>/d(slot).
struct Problem {
  std::vector<Slot> slots;
  std::function<Frame(Trace*)> forward;
  std::function<std::vector<Eigen::VectorXd>(const Frame& dy)> analytic;
  std::shared_ptr<void> owner;
};

Frame random_frame(int h, int w, int c, Rng& rng, Real lo = -1.0, Real hi = 1.0) {
  std::uniform_real_distribution<Real> u(lo, hi);
  Frame f(h, w, c);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = u(rng);
  return f;
}

/// Uniform magnitudes in [gap, 1], random signs: keeps inputs off a kink at 0.
Frame off_zero_frame(int h, int w, int c, Rng& rng, Real gap = 0.05) {
  std::uniform_real_distribution<Real> u(gap, 1.0);
  Frame f(h, w, c);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = (rng() & 1U ? 1.0 : -1.0) * u(rng);
  return f;
}

Conv random_conv(Conv spec, Rng& rng) {
  std::uniform_real_distribution<Real> u(-0.5, 0.5);
  for (Eigen::Index i = 0; i < spec.kernel.size(); ++i) spec.kernel.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < spec.bias.size(); ++i) spec.bias.data()[i] = u(rng);
  return spec;
}

Flow random_flow(int h, int w, Rng& rng, Real magnitude) {
  return Flow(random_frame(h, w, 2, rng, -magnitude, magnitude), 0.0, 1.0);
}

struct GraphData {
  ParamSet params;
  std::vector<Frame> inputs;
  std::vector<bool> input_grad;
  std::function<Var(Graph&, const std::vector<Var>&)> build;
};

Problem graph_problem(std::shared_ptr<GraphData> d) {
  Problem p;
  for (std::size_t i = 0; i < d->inputs.size(); ++i) {
    if (d->input_grad[i]) p.slots.push_back({d->inputs[i].data(), d->inputs[i].size()});
  }
  for (auto& array : d->params.arrays()) p.slots.push_back({array.values.data(), array.values.size()});
  p.forward = [d](Trace* trace) {
    Graph g(d->params);
    g.trace_branches(trace);
    std::vector<Var> vars;
    for (const Frame& f : d->inputs) vars.push_back(g.constant(f));
    return d->build(g, vars)->value;
  };
  p.analytic = [d](const Frame& dy) {
    ParamSet grads = d->params.zeros_like();
    Graph g(d->params, grads);
    std::vector<Var> vars;
    for (std::size_t i = 0; i < d->inputs.size(); ++i) {
      vars.push_back(d->input_grad[i] ? g.variable(d->inputs[i]) : g.constant(d->inputs[i]));
    }
    const Var y = d->build(g, vars);
    g.backward(g.inner(y, dy));
    std::vector<Eigen::VectorXd> out;
    for (std::size_t i = 0; i < d->inputs.size(); ++i) {
      if (!d->input_grad[i]) continue;
      const Frame& gi = vars[i]->grad;
      out.push_back(gi.empty() ? Eigen::VectorXd::Zero(d->inputs[i].size())
                               : Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(gi.data(), gi.size())));
    }
    for (const auto& array : std::as_const(grads).arrays()) out.push_back(array.values);
    return out;
  };
  p.owner = d;
  return p;
}

std::shared_ptr<GraphData> graph_data(std::vector<Frame> inputs, std::vector<bool> input_grad,
                                      std::function<Var(Graph&, const std::vector<Var>&)> build) {
  auto d = std::make_shared<GraphData>();
  d->inputs = std::move(inputs);
  d->input_grad = std::move(input_grad);
  d->build = std::move(build);
  return d;
}

Eigen::VectorXd flat(const Frame& f) { return Eigen::Map<const Eigen::VectorXd>(f.data(), f.size()); }

Problem make_problem(const std::string& op, Rng& rng) {
  if (op == "conv2d" || op == "conv2d_strided" || op == "conv2d_pointwise") {
    Conv spec = op == "conv2d"           ? Conv::same(3, 2, 3)
                : op == "conv2d_strided" ? Conv::zeros(3, 3, 2, 3, 1, 2)
                                         : Conv::same(1, 3, 4);
    const int cin = spec.in_channels;
    auto d = graph_data({random_frame(op == "conv2d_strided" ? 7 : 6, 5, cin, rng)}, {true},
                        [](Graph& g, const std::vector<Var>& v) { return g.conv(v[0], 0); });
    d->params.add("layer", random_conv(spec, rng));
    return graph_problem(d);
  }
  if (op == "conv_concat" || op == "conv_concat_partial") {
    const bool partial = op == "conv_concat_partial";
    auto d = graph_data({random_frame(4, 5, 2, rng), random_frame(4, 5, 3, rng)}, {true, true},
                        [partial](Graph& g, const std::vector<Var>& v) {
                          if (partial) return g.conv_concat({{v[1], 2}}, 0);
                          return g.conv_concat({{v[0], 0}, {v[1], 2}}, 0);
                        });
    d->params.add("layer", random_conv(Conv::same(1, 5, 4), rng));
    return graph_problem(d);
  }
  if (op == "leaky_relu") {
    return graph_problem(graph_data({off_zero_frame(4, 5, 3, rng)}, {true}, [](Graph& g, const std::vector<Var>& v) {
      return g.leaky_relu(v[0], 0.1);
    }));
  }
  if (op == "sigmoid") {
    return graph_problem(graph_data({random_frame(4, 5, 3, rng, -3.0, 3.0)}, {true},
                                    [](Graph& g, const std::vector<Var>& v) { return g.sigmoid(v[0]); }));
  }
  if (op == "mul" || op == "add") {
    const bool is_mul = op == "mul";
    return graph_problem(graph_data({random_frame(4, 5, 3, rng), random_frame(4, 5, 3, rng)}, {true, true},
                                    [is_mul](Graph& g, const std::vector<Var>& v) {
                                      return is_mul ? g.mul(v[0], v[1]) : g.add(v[0], v[1]);
                                    }));
  }
  if (op == "scale") {
    return graph_problem(graph_data({random_frame(4, 5, 3, rng)}, {true},
                                    [](Graph& g, const std::vector<Var>& v) { return g.scale(v[0], -1.75); }));
  }
  if (op == "pixel_shuffle") {
    return graph_problem(graph_data({random_frame(3, 4, 8, rng)}, {true}, [](Graph& g, const std::vector<Var>& v) {
      return g.pixel_shuffle(v[0], 2);
    }));
  }
  if (op == "warp") {
    const Flow flow = random_flow(6, 7, rng, 2.5);
    return graph_problem(graph_data({random_frame(6, 7, 3, rng)}, {true},
                                    [flow](Graph& g, const std::vector<Var>& v) { return g.warp(v[0], flow); }));
  }
  if (op == "local_correlation") {
    const int k = static_cast<int>(rng() % 3);
    return graph_problem(graph_data({random_frame(5, 5, 3, rng), random_frame(5, 5, 3, rng)}, {true, true},
                                    [k](Graph& g, const std::vector<Var>& v) {
                                      return g.local_correlation(v[0], v[1], k);
                                    }));
  }
  if (op == "clamp01") {
    Frame x = off_zero_frame(4, 5, 3, rng);
    // Map magnitudes onto [-0.5, 1.5] away from 0 and 1.
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const Real m = std::abs(x.data()[i]);
      x.data()[i] = x.data()[i] > 0 ? (m < 0.5 ? m : 0.5 + m) : -0.5 * m;
    }
    return graph_problem(graph_data({x}, {true}, [](Graph& g, const std::vector<Var>& v) { return g.clamp01(v[0]); }));
  }
  if (op == "charbonnier") {
    const Frame gt = random_frame(4, 5, 3, rng, 0.0, 1.0);
    Frame pred = gt;
    pred.array() += off_zero_frame(4, 5, 3, rng).array() * 0.2;
    return graph_problem(graph_data({pred}, {true}, [gt](Graph& g, const std::vector<Var>& v) {
      return g.charbonnier(v[0], gt, 1e-3);
    }));
  }
  if (op == "silr_blend") {
    struct Data {
      Frame prev, next, mp, mn;
    };
    auto d = std::make_shared<Data>(Data{random_frame(4, 5, 3, rng, 0.0, 1.0), random_frame(4, 5, 3, rng, 0.0, 1.0),
                                         random_frame(4, 5, 1, rng, 0.0, 1.0), random_frame(4, 5, 1, rng, 0.0, 1.0)});
    Problem p;
    p.slots = {{d->prev.data(), d->prev.size()},
               {d->next.data(), d->next.size()},
               {d->mp.data(), d->mp.size()},
               {d->mn.data(), d->mn.size()}};
    p.forward = [d](Trace*) { return blend_warped(d->prev, d->next, d->mp, d->mn); };
    p.analytic = [d](const Frame& dy) {
      const auto g = grad::blend_warped(d->prev, d->next, d->mp, d->mn, dy);
      return std::vector<Eigen::VectorXd>{flat(g.d_prev), flat(g.d_next), flat(g.dm_prev), flat(g.dm_next)};
    };
    p.owner = d;
    return p;
  }
  if (op == "occlusion_mask") {
    struct Data {
      Flow f01, f10;
    };
    auto d = std::make_shared<Data>(Data{random_flow(6, 6, rng, 2.0), random_flow(6, 6, rng, 2.0).retagged(1.0, 0.0)});
    Problem p;
    p.slots = {{d->f10.uv().data(), d->f10.uv().size()}};
    p.forward = [d](Trace*) { return occlusion_masks(d->f01, d->f10, 0.1).first.weight; };
    p.analytic = [d](const Frame& dy) {
      return std::vector<Eigen::VectorXd>{flat(grad::occlusion_mask_wrt_backward_flow(d->f01, d->f10, 0.1, dy))};
    };
    p.owner = d;
    return p;
  }
  if (op == "residual_block") {
    auto d = graph_data({random_frame(5, 5, 4, rng)}, {true}, {});
    const auto blocks = add_residual_layers(d->params, "res", 4, 1);
    for (int id = 0; id < d->params.layer_count(); ++id) d->params.layer(id) = random_conv(d->params.layer(id), rng);
    d->build = [blocks](Graph& g, const std::vector<Var>& v) { return residual_block(g, v[0], blocks[0], 0.1); };
    return graph_problem(d);
  }
  if (op == "refine") {
    auto d = graph_data({random_frame(5, 5, 4, rng), random_frame(5, 5, 3, rng, 0.0, 1.0)}, {true, true}, {});
    const FrmWeights w = add_frm_layers(d->params, "frm", 4, 0.1);
    for (int id = 0; id < d->params.layer_count(); ++id) d->params.layer(id) = random_conv(d->params.layer(id), rng);
    d->build = [w](Graph& g, const std::vector<Var>& v) { return refine(g, v[0], v[1], w, 1); };
    return graph_problem(d);
  }
  if (op == "fuse") {
    const auto mode = static_cast<FusionMode>(rng() % 3);
    auto d = graph_data({random_frame(5, 5, 4, rng), random_frame(5, 5, 3, rng, 0.0, 1.0)}, {true, true}, {});
    const FusionWeights w = add_fusion_layers(d->params, "fuse", 4, 1);
    for (int id = 0; id < d->params.layer_count(); ++id) d->params.layer(id) = random_conv(d->params.layer(id), rng);
    d->build = [w, mode](Graph& g, const std::vector<Var>& v) { return fuse(g, v[0], v[1], w, mode, 0.1); };
    return graph_problem(d);
  }
  if (op == "upsample") {
    auto d = graph_data({random_frame(3, 3, 4, rng)}, {true}, {});
    UpsampleWeights w;
    w.conv1 = d->params.add("up.conv1", Conv::same(3, 4, 16));
    w.conv2 = d->params.add("up.conv2", Conv::same(3, 4, 16));
    w.out = d->params.add("up.out", Conv::same(3, 4, 3));
    for (int id = 0; id < d->params.layer_count(); ++id) d->params.layer(id) = random_conv(d->params.layer(id), rng);
    d->params.layer(w.out).bias.setConstant(0.5);
    d->build = [w](Graph& g, const std::vector<Var>& v) { return upsample(g, v[0], w, 0.1); };
    return graph_problem(d);
  }
  if (op == "pipeline") {
    PipelineConfig cfg;
    cfg.channels = 4;
    cfg.r_fuse = cfg.r_merge = cfg.r_trunk = 1;
    cfg.fusion = static_cast<FusionMode>(rng() % 3);
    cfg.bidirectional = (rng() % 4) != 0;
    cfg.use_frm = (rng() % 4) != 0;
    PipelineWeights w = pipeline_layout(cfg);
    init_random(w, rng());
    std::vector<Frame> frames = {random_frame(5, 6, 3, rng, 0.0, 1.0), random_frame(5, 6, 3, rng, 0.0, 1.0)};
    const Flow f_t0 = random_flow(5, 6, rng, 1.5).retagged(0.5, 0.0);
    const Flow f_t1 = random_flow(5, 6, rng, 1.5).retagged(0.5, 1.0);
    auto [f01, f10] = reuse_flows(f_t0, f_t1, 0.5);
    auto seq = std::make_shared<PreparedSequence>(
        prepare_sequence(frames, std::vector<FlowBundle>{FlowBundle{f_t0, f_t1, f01, f10, 0.5}}, cfg.alpha));
    std::vector<Frame> targets;
    for (int k = 0; k < 3; ++k) targets.push_back(random_frame(20, 24, 3, rng, 0.0, 1.0));
    auto d = graph_data({}, {}, {});
    d->params = w.params;
    d->build = [seq, w, cfg, targets](Graph& g, const std::vector<Var>&) {
      std::vector<Var> terms;
      run_graph(g, *seq, w, cfg, [&](int index, const Var& hr) {
        terms.push_back(g.charbonnier(hr, targets[static_cast<std::size_t>(index)], 1e-2));
      });
      return g.weighted_sum(terms, 1.0 / 3.0);
    };
    return graph_problem(d);
  }
  throw UsageError("gradcheck: unknown op `" + op + "`");
}

Real objective(const Problem& p, const Frame& dy, Trace* trace = nullptr) {
  return (p.forward(trace).array() * dy.array()).sum();
}

}  // namespace

const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> ops = {
      "conv2d",     "conv2d_strided", "conv2d_pointwise", "conv_concat",       "conv_concat_partial",
      "leaky_relu", "sigmoid",        "mul",              "add",               "scale",
      "pixel_shuffle", "warp",        "local_correlation", "clamp01",          "charbonnier",
      "silr_blend", "occlusion_mask", "residual_block",   "refine",            "fuse",
      "upsample",   "pipeline"};
  return ops;
}

GradCheckResult check_op(const std::string& op, const GradCheckOptions& options) {
  GradCheckResult result;
  result.op = op;
  const std::size_t op_index = static_cast<std::size_t>(
      std::find(gradcheck_ops().begin(), gradcheck_ops().end(), op) - gradcheck_ops().begin());
  for (int s = 0; s < options.seeds; ++s) {
    Rng rng(options.base_seed * 1000003ULL + static_cast<std::uint64_t>(s) * 7919ULL + op_index * 104729ULL);
    Problem p = make_problem(op, rng);
    Trace base_trace;
    const Frame out = p.forward(&base_trace);
    const Frame dy = random_frame(out.height(), out.width(), out.channels(), rng);
    const std::vector<Eigen::VectorXd> analytic = p.analytic(dy);
    const Real h = options.h;
    for (std::size_t slot = 0; slot < p.slots.size(); ++slot) {
      const Slot& sl = p.slots[slot];
      std::vector<Eigen::Index> coords(static_cast<std::size_t>(sl.size));
      std::iota(coords.begin(), coords.end(), 0);
      if (static_cast<int>(coords.size()) > options.coords_per_slot) {
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(static_cast<std::size_t>(options.coords_per_slot));
      }
      for (Eigen::Index i : coords) {
        const Real orig = sl.data[i];
        Trace trace_plus, trace_minus;
        sl.data[i] = orig + h;
        const Real plus = objective(p, dy, &trace_plus);
        sl.data[i] = orig - h;
        const Real minus = objective(p, dy, &trace_minus);
        sl.data[i] = orig;
        if (trace_plus != base_trace || trace_minus != base_trace) {
          ++result.kinks;
          continue;
        }
        const Real numeric = (plus - minus) / (2.0 * h);
        const Real err = gradient_error(analytic[slot][i], numeric, options.rel_tol, options.abs_floor);
        ++result.coordinates;
        result.max_error = std::max(result.max_error, err);
        if (err >= options.rel_tol) result.passed = false;
      }
    }
    ++result.seeds;
  }
  return result;
}

std::vector<GradCheckResult> gradcheck_suite(const GradCheckOptions& options) {
  std::vector<GradCheckResult> out;
  for (const auto& op : gradcheck_ops()) out.push_back(check_op(op, options));
  return out;
}

}  // namespace ofr
