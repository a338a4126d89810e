#include "ofr/graph.hpp"

#include <cmath>

#include "ofr/feature_refine.hpp"
#include "ofr/frame_synthesis.hpp"
#include "ofr/quality.hpp"

namespace ofr {

namespace grad {

ConvGrads conv2d(const Frame& x, const Conv& spec, const Frame& dy, bool need_dx) {
  const int out_h = spec.output_height(x.height());
  const int out_w = spec.output_width(x.width());
  if (dy.height() != out_h || dy.width() != out_w || dy.channels() != spec.out_channels) {
    throw ShapeError("conv2d backward: output gradient has the wrong shape");
  }
  ConvGrads g;
  const auto dym = dy.matrix();
  g.dbias = dym.colwise().sum();
  if (is_pointwise(spec)) {
    g.dkernel = x.matrix().transpose() * dym;
    if (need_dx) g.dx = Frame(x.height(), x.width(), (dym * spec.kernel.transpose()).array());
  } else {
    const RowMatrix<Real> cols = im2col(x, spec);
    g.dkernel = cols.transpose() * dym;
    if (need_dx) {
      const RowMatrix<Real> dcols = dym * spec.kernel.transpose();
      g.dx = col2im(dcols, x.height(), x.width(), x.channels(), spec);
    }
  }
  return g;
}

Frame conv2d_partial(const Frame& dy, const Conv& spec, int channel_offset, int channels) {
  return Frame(dy.height(), dy.width(),
               (dy.matrix() * spec.kernel.middleRows(channel_offset, channels).transpose()).array());
}

Frame leaky_relu(const Frame& x, Real slope, const Frame& dy) {
  require_same_shape(x, dy, "leaky_relu backward");
  return Frame(x.height(), x.width(), (x.array() >= 0.0).select(dy.array(), slope * dy.array()));
}

Frame sigmoid(const Frame& y, const Frame& dy) {
  require_same_shape(y, dy, "sigmoid backward");
  return Frame(y.height(), y.width(), dy.array() * y.array() * (1.0 - y.array()));
}

Frame pixel_shuffle(const Frame& dy, int r) { return pixel_unshuffle(dy, r); }

Frame clamp01(const Frame& x, const Frame& dy) {
  require_same_shape(x, dy, "clamp01 backward");
  return Frame(x.height(), x.width(), (x.array() >= 0.0 && x.array() <= 1.0).select(dy.array(), 0.0));
}

Frame warp(const Frame& dy, const Flow& flow, int field_height, int field_width, int channels) {
  if (dy.height() != flow.height() || dy.width() != flow.width() || dy.channels() != channels) {
    throw ShapeError("warp backward: output gradient has the wrong shape");
  }
  Frame dfield(field_height, field_width, channels);
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      const BilinearTap tap = bilinear_tap(x + flow.u(y, x), y + flow.v(y, x), field_width, field_height);
      const Real w00 = (1.0 - tap.fx) * (1.0 - tap.fy);
      const Real w01 = tap.fx * (1.0 - tap.fy);
      const Real w10 = (1.0 - tap.fx) * tap.fy;
      const Real w11 = tap.fx * tap.fy;
      for (int c = 0; c < channels; ++c) {
        const Real g = dy(y, x, c);
        dfield(tap.y0, tap.x0, c) += w00 * g;
        dfield(tap.y0, tap.x1, c) += w01 * g;
        dfield(tap.y1, tap.x0, c) += w10 * g;
        dfield(tap.y1, tap.x1, c) += w11 * g;
      }
    }
  }
  return dfield;
}

std::pair<Frame, Frame> local_correlation(const Frame& a, const Frame& b, int k, const Frame& dcorr) {
  require_same_shape(a, b, "local_correlation backward");
  require_same_shape(a, dcorr, "local_correlation backward");
  // The zero-padded box filter is self-adjoint.
  const Frame spread = box_sum(dcorr, k);
  return {hadamard(b, spread), hadamard(a, spread)};
}

Frame charbonnier(const Frame& pred, const Frame& gt, Real eps, Real dloss) {
  require_same_shape(pred, gt, "charbonnier backward");
  const auto d = (pred.array() - gt.array()).eval();
  const Real n = static_cast<Real>(pred.size());
  return Frame(pred.height(), pred.width(), dloss * d / ((d.square() + eps * eps).sqrt() * n));
}

BlendGrads blend_warped(const Frame& warped_prev, const Frame& warped_next, const Frame& m_prev,
                        const Frame& m_next, const Frame& dy) {
  require_same_shape(warped_prev, dy, "blend backward");
  const auto mp = m_prev.array().col(0);
  const auto mn = m_next.array().col(0);
  BlendGrads g;
  g.d_next = Frame(dy.height(), dy.width(), 0.5 * (dy.array().colwise() * (1.0 - mp + mn)));
  g.d_prev = Frame(dy.height(), dy.width(), 0.5 * (dy.array().colwise() * (1.0 - mn + mp)));
  // d/d m_prev: 1/2 (-next + prev); d/d m_next: 1/2 (next - prev).
  const auto diff = (dy.array() * (warped_next.array() - warped_prev.array())).rowwise().sum().eval();
  g.dm_prev = Frame(dy.height(), dy.width(), 1);
  g.dm_next = Frame(dy.height(), dy.width(), 1);
  g.dm_prev.array().col(0) = -0.5 * diff;
  g.dm_next.array().col(0) = 0.5 * diff;
  return g;
}

Frame occlusion_mask_wrt_backward_flow(const Flow& f01, const Flow& f10, Real alpha, const Frame& dmask) {
  const Frame round_trip = f01.uv() + warp(f10.uv(), f01);
  const Frame mask = occlusion_masks(f01, f10, alpha).first.weight;
  // d mask / d round_trip = -2 alpha mask round_trip.
  Frame d_round = round_trip;
  d_round.array().colwise() *= -2.0 * alpha * mask.array().col(0) * dmask.array().col(0);
  return warp(d_round, f01, f10.height(), f10.width(), 2);
}

}  // namespace grad

void Node::accumulate(const Frame& g) {
  if (grad.empty()) {
    grad = g;
  } else {
    require_same_shape(grad, g, "gradient accumulation");
    grad.array() += g.array();
  }
}

Graph::Graph(const ParamSet& params) : params_(&params) {}

Graph::Graph(const ParamSet& params, ParamSet& grads) : params_(&params), grads_(&grads) {
  if (!params.same_layout(grads)) throw ConfigError("gradient store does not match the parameter layout");
}

Var Graph::make(Frame value, bool requires_grad, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (recording()) {
    node->requires_grad = requires_grad;
    if (requires_grad) node->backward = std::move(backward);
    tape_.push_back(node);
  }
  return node;
}

Var Graph::constant(Frame value) { return make(std::move(value), false, {}); }

Var Graph::variable(Frame value) { return make(std::move(value), true, {}); }

Var Graph::conv(const Var& x, LayerId layer) {
  const Conv& spec = params_->layer(layer);
  Frame y = conv2d(x->value, spec);
  return make(std::move(y), true, [this, x, layer](Node& self) {
    const Conv& spec = params_->layer(layer);
    grad::ConvGrads g = grad::conv2d(x->value, spec, self.grad, x->requires_grad);
    Conv& dst = grads_->layer(layer);
    dst.kernel += g.dkernel;
    dst.bias += g.dbias;
    if (x->requires_grad) x->accumulate(g.dx);
  });
}

Var Graph::conv_concat(const std::vector<Part>& parts, LayerId layer) {
  const Conv& spec = params_->layer(layer);
  spec.validate();
  if (parts.empty()) throw ConfigError("conv_concat: no inputs");
  RowMatrix<Real> acc;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    require_same_spatial(parts.front().x->value, parts[i].x->value, "conv_concat");
    RowMatrix<Real> partial = conv2d_partial(parts[i].x->value, spec, parts[i].channel_offset);
    if (i == 0) {
      acc = std::move(partial);
    } else {
      acc += partial;
    }
  }
  acc.rowwise() += spec.bias;
  const Frame& first = parts.front().x->value;
  Frame y(first.height(), first.width(), std::move(acc).array());
  return make(std::move(y), true, [this, parts, layer](Node& self) {
    const Conv& spec = params_->layer(layer);
    Conv& dst = grads_->layer(layer);
    dst.bias += self.grad.matrix().colwise().sum();
    for (const Part& part : parts) {
      const int c = part.x->value.channels();
      dst.kernel.middleRows(part.channel_offset, c) += part.x->value.matrix().transpose() * self.grad.matrix();
      if (part.x->requires_grad) part.x->accumulate(grad::conv2d_partial(self.grad, spec, part.channel_offset, c));
    }
  });
}

Var Graph::leaky_relu(const Var& x, Real slope) {
  if (branches_) {
    for (Eigen::Index i = 0; i < x->value.size(); ++i) branches_->push_back(x->value.data()[i] > 0.0);
  }
  return make(ofr::leaky_relu(x->value, slope), x->requires_grad, [x, slope](Node& self) {
    x->accumulate(grad::leaky_relu(x->value, slope, self.grad));
  });
}

Var Graph::sigmoid(const Var& x) {
  return make(ofr::sigmoid(x->value), x->requires_grad, [x](Node& self) {
    x->accumulate(grad::sigmoid(self.value, self.grad));
  });
}

Var Graph::mul(const Var& a, const Var& b) {
  return make(hadamard(a->value, b->value), a->requires_grad || b->requires_grad, [a, b](Node& self) {
    if (a->requires_grad) a->accumulate(hadamard(self.grad, b->value));
    if (b->requires_grad) b->accumulate(hadamard(self.grad, a->value));
  });
}

Var Graph::add(const Var& a, const Var& b) {
  return make(a->value + b->value, a->requires_grad || b->requires_grad, [a, b](Node& self) {
    if (a->requires_grad) a->accumulate(self.grad);
    if (b->requires_grad) b->accumulate(self.grad);
  });
}

Var Graph::scale(const Var& x, Real s) {
  return make(s * x->value, x->requires_grad, [x, s](Node& self) { x->accumulate(s * self.grad); });
}

Var Graph::pixel_shuffle(const Var& x, int r) {
  return make(ofr::pixel_shuffle(x->value, r), x->requires_grad, [x, r](Node& self) {
    x->accumulate(grad::pixel_shuffle(self.grad, r));
  });
}

Var Graph::warp(const Var& x, const Flow& flow) {
  return make(ofr::warp(x->value, flow), x->requires_grad, [x, flow](Node& self) {
    x->accumulate(grad::warp(self.grad, flow, x->value.height(), x->value.width(), x->value.channels()));
  });
}

Var Graph::local_correlation(const Var& a, const Var& b, int k) {
  return make(ofr::local_correlation(a->value, b->value, k), a->requires_grad || b->requires_grad,
              [a, b, k](Node& self) {
                auto [da, db] = grad::local_correlation(a->value, b->value, k, self.grad);
                if (a->requires_grad) a->accumulate(da);
                if (b->requires_grad) b->accumulate(db);
              });
}

Var Graph::clamp01(const Var& x) {
  if (branches_) {
    for (Eigen::Index i = 0; i < x->value.size(); ++i) {
      const Real v = x->value.data()[i];
      branches_->push_back(v < 0.0 ? 0 : (v > 1.0 ? 2 : 1));
    }
  }
  return make(ofr::clamp01(x->value), x->requires_grad, [x](Node& self) {
    x->accumulate(grad::clamp01(x->value, self.grad));
  });
}

Var Graph::charbonnier(const Var& pred, const Frame& gt, Real eps) {
  require_same_shape(pred->value, gt, "charbonnier");
  if (!(eps > 0.0)) throw ParameterError("charbonnier: eps must be positive");
  const Real loss = ofr::charbonnier(pred->value, gt, eps);
  return make(Frame(1, 1, 1, loss), pred->requires_grad, [pred, gt, eps](Node& self) {
    pred->accumulate(grad::charbonnier(pred->value, gt, eps, self.grad(0, 0, 0)));
  });
}

Var Graph::inner(const Var& x, const Frame& weights) {
  require_same_shape(x->value, weights, "inner");
  const Real total = (x->value.array() * weights.array()).sum();
  return make(Frame(1, 1, 1, total), x->requires_grad, [x, weights](Node& self) {
    x->accumulate(self.grad(0, 0, 0) * weights);
  });
}

Var Graph::weighted_sum(const std::vector<Var>& scalars, Real weight) {
  Real total = 0.0;
  bool any = false;
  for (const Var& s : scalars) {
    if (s->value.size() != 1) throw ShapeError("weighted_sum: inputs must be scalars");
    total += s->value(0, 0, 0);
    any = any || s->requires_grad;
  }
  return make(Frame(1, 1, 1, weight * total), any, [scalars, weight](Node& self) {
    for (const Var& s : scalars) {
      if (s->requires_grad) s->accumulate(Frame(1, 1, 1, weight * self.grad(0, 0, 0)));
    }
  });
}

void Graph::backward(const Var& root) {
  if (!recording()) throw UsageError("backward: graph was not recorded");
  if (tape_.empty() || !root) throw UsageError("backward: empty tape");
  for (const Var& node : tape_) node->grad = Frame();
  root->grad = Frame(root->value.height(), root->value.width(), root->value.channels(), 1.0);
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    Node& node = **it;
    if (node.backward && !node.grad.empty()) node.backward(node);
  }
}

}  // namespace ofr
