#pragma once

// Reverse-mode differentiation over the handful of operators the pipeline
// uses. Model code is written once against Graph; an inference graph keeps
// no history (intermediate values are released as soon as they go out of
// scope), a recording graph keeps a tape and accumulates parameter gradients.

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "ofr/flow.hpp"
#include "ofr/params.hpp"
#include "ofr/types.hpp"

namespace ofr {

namespace grad {

/// Vector-Jacobian products. `dy` is the gradient of the output.
struct ConvGrads {
  Frame dx;
  RowMatrix<Real> dkernel;
  RowVector<Real> dbias;
};
ConvGrads conv2d(const Frame& x, const Conv& spec, const Frame& dy, bool need_dx = true);

/// Input gradient of one part of a 1x1 convolution over a concatenation.
Frame conv2d_partial(const Frame& dy, const Conv& spec, int channel_offset, int channels);

Frame leaky_relu(const Frame& x, Real slope, const Frame& dy);
Frame sigmoid(const Frame& y, const Frame& dy);  // y = sigmoid(x)
Frame pixel_shuffle(const Frame& dy, int r);
Frame clamp01(const Frame& x, const Frame& dy);

/// Adjoint of warp(field, flow) with respect to the field.
Frame warp(const Frame& dy, const Flow& flow, int field_height, int field_width, int channels);

/// Gradients of local_correlation(a, b, k) with respect to a and b.
std::pair<Frame, Frame> local_correlation(const Frame& a, const Frame& b, int k, const Frame& dcorr);

/// Gradient of charbonnier(pred, gt, eps) with respect to pred, scaled by dloss.
Frame charbonnier(const Frame& pred, const Frame& gt, Real eps, Real dloss);

struct BlendGrads {
  Frame d_prev, d_next, dm_prev, dm_next;
};
/// Gradients of blend_warped (before clamping).
BlendGrads blend_warped(const Frame& warped_prev, const Frame& warped_next, const Frame& m_prev,
                        const Frame& m_next, const Frame& dy);

/// Gradient of the first occlusion mask exp(-alpha |f01 + warp(f10, f01)|^2)
/// with respect to the f10 values (f01 is held fixed, as all flows are in the
/// learned pipeline).
Frame occlusion_mask_wrt_backward_flow(const Flow& f01, const Flow& f10, Real alpha, const Frame& dmask);

}  // namespace grad

struct Node {
  Frame value;
  Frame grad;
  bool requires_grad = false;
  std::function<void(Node&)> backward;

  void accumulate(const Frame& g);
};
using Var = std::shared_ptr<Node>;

class Graph {
 public:
  using LayerId = ParamSet::LayerId;

  /// Inference graph: nothing is recorded.
  explicit Graph(const ParamSet& params);
  /// Recording graph: `grads` must share the layout of `params`.
  Graph(const ParamSet& params, ParamSet& grads);

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return grads_ != nullptr; }
  const ParamSet& params() const { return *params_; }

  Var constant(Frame value);
  /// Input whose gradient is wanted (gradient checks).
  Var variable(Frame value);

  Var conv(const Var& x, LayerId layer);

  struct Part {
    Var x;
    int channel_offset;
  };
  /// 1x1 layer over a channel concatenation. Parts may cover only some of the
  /// kernel's input rows; missing rows act on zeros.
  Var conv_concat(const std::vector<Part>& parts, LayerId layer);

  Var leaky_relu(const Var& x, Real slope);
  Var sigmoid(const Var& x);
  Var mul(const Var& a, const Var& b);
  Var add(const Var& a, const Var& b);
  Var scale(const Var& x, Real s);
  Var pixel_shuffle(const Var& x, int r);
  Var warp(const Var& x, const Flow& flow);
  Var local_correlation(const Var& a, const Var& b, int k);
  Var clamp01(const Var& x);
  /// Scalar (1 x 1 x 1) Charbonnier loss against a constant target.
  Var charbonnier(const Var& pred, const Frame& gt, Real eps);
  /// Scalar sum of weights * x over all elements.
  Var inner(const Var& x, const Frame& weights);
  /// Scalar weighted sum of scalar nodes.
  Var weighted_sum(const std::vector<Var>& scalars, Real weight);

  /// Seeds d(root)/d(root) = 1 and runs the tape backwards, accumulating
  /// into the parameter gradients and any variables.
  void backward(const Var& root);

  std::size_t tape_size() const { return tape_.size(); }

  /// Appends the piece taken by every leaky ReLU and clamp element evaluated
  /// from now on; two evaluations with equal traces lie on the same smooth piece.
  void trace_branches(std::vector<std::uint8_t>* out) { branches_ = out; }

 private:
  Var make(Frame value, bool requires_grad, std::function<void(Node&)> backward);

  const ParamSet* params_;
  ParamSet* grads_ = nullptr;
  std::vector<Var> tape_;
  std::vector<std::uint8_t>* branches_ = nullptr;
};

}  // namespace ofr
