#pragma once

// Optical-flow fields and the algebra that turns intermediate flows (based at
// the unseen frame t) into the pairwise flows between the two input frames.
//
// Convention: a flow from time a to time b stores, for every pixel p of frame
// a, the offset at which that content is found in frame b. Backward warping
// frame b with it therefore reconstructs frame a:
//     warp(I_b, F_{a->b})(p) = I_b(p + F_{a->b}(p)) ~ I_a(p).

#include <string>
#include <utility>

#include "ofr/tensor.hpp"
#include "ofr/types.hpp"

namespace ofr {

template <typename Scalar>
class FlowField {
 public:
  FlowField() = default;

  FlowField(int height, int width, double from, double to) : uv_(height, width, 2), from_(from), to_(to) {
    check_tag();
  }

  FlowField(Tensor<Scalar> uv, double from, double to) : uv_(std::move(uv)), from_(from), to_(to) {
    if (uv_.channels() != 2) throw ShapeError("flow fields need exactly 2 channels");
    check_tag();
  }

  static FlowField constant(int height, int width, Scalar u, Scalar v, double from, double to) {
    FlowField f(height, width, from, to);
    f.uv_.array().col(0).setConstant(u);
    f.uv_.array().col(1).setConstant(v);
    return f;
  }

  int height() const { return uv_.height(); }
  int width() const { return uv_.width(); }
  double from() const { return from_; }
  double to() const { return to_; }

  Scalar& u(int y, int x) { return uv_(y, x, 0); }
  Scalar& v(int y, int x) { return uv_(y, x, 1); }
  Scalar u(int y, int x) const { return uv_(y, x, 0); }
  Scalar v(int y, int x) const { return uv_(y, x, 1); }

  Tensor<Scalar>& uv() { return uv_; }
  const Tensor<Scalar>& uv() const { return uv_; }

  /// Same displacements under a new (from, to) tag.
  FlowField retagged(double from, double to) const { return FlowField(uv_, from, to); }

  FlowField scaled(Scalar s) const { return FlowField(s * uv_, from_, to_); }

 private:
  void check_tag() const {
    if (from_ == to_) throw ParameterError("flow tag times must differ");
  }

  Tensor<Scalar> uv_;
  double from_ = 0.0;
  double to_ = 1.0;
};

using Flow = FlowField<Real>;

/// The four flows of one adjacent input pair. f_t0/f_t1 are based at the
/// intermediate time t; f01/f10 at the pre-existing frames.
template <typename Scalar>
struct FlowBundleT {
  FlowField<Scalar> f_t0;
  FlowField<Scalar> f_t1;
  FlowField<Scalar> f01;
  FlowField<Scalar> f10;
  double t = 0.5;
};

using FlowBundle = FlowBundleT<Real>;

inline void require_open_unit(double t, const char* what) {
  if (!(t > 0.0 && t < 1.0)) {
    throw ParameterError(std::string(what) + ": t must lie in (0,1), got " + std::to_string(t));
  }
}

template <typename Scalar>
void require_same_dims(const FlowField<Scalar>& a, const FlowField<Scalar>& b, const char* what) {
  require_same_spatial(a.uv(), b.uv(), what);
}

/// Backward warp: out(p) = field(p + flow(p)), bilinear, border-clamped.
template <typename Scalar>
Tensor<Scalar> warp(const Tensor<Scalar>& field, const FlowField<Scalar>& flow) {
  require_same_spatial(field, flow.uv(), "warp");
  Tensor<Scalar> coords = identity_coords<Scalar>(flow.height(), flow.width());
  coords.array() += flow.uv().array();
  return bilinear_sample(field, coords);
}

/// Warps a flow field as two scalar planes. Only the base positions move;
/// the stored vectors are not re-based, and the tag is kept.
template <typename Scalar>
FlowField<Scalar> warp(const FlowField<Scalar>& field, const FlowField<Scalar>& flow) {
  return FlowField<Scalar>(warp(field.uv(), flow), field.from(), field.to());
}

/// Linear scaling of pairwise flows to the intermediate time:
/// f_t0 = t * f10, f_t1 = (1 - t) * f01.
template <typename Scalar>
std::pair<FlowField<Scalar>, FlowField<Scalar>> naive_intermediate(const FlowField<Scalar>& f01,
                                                                    const FlowField<Scalar>& f10, double t) {
  require_open_unit(t, "naive_intermediate");
  require_same_dims(f01, f10, "naive_intermediate");
  const auto ts = static_cast<Scalar>(t);
  return {FlowField<Scalar>(ts * f10.uv(), t, 0.0), FlowField<Scalar>((Scalar(1) - ts) * f01.uv(), t, 1.0)};
}

/// Parallelogram rule: -f_t0 + f_t1. The result points 0 -> 1 but is still
/// based at time t.
template <typename Scalar>
FlowField<Scalar> parallelogram_recombine(const FlowField<Scalar>& f_t0, const FlowField<Scalar>& f_t1) {
  require_same_dims(f_t0, f_t1, "parallelogram_recombine");
  return FlowField<Scalar>(Tensor<Scalar>(f_t0.height(), f_t0.width(), -f_t0.uv().array() + f_t1.uv().array()),
                           f_t0.to(), f_t1.to());
}

/// Locally-smooth estimate of the flow from frame 0 to time t:
/// t / (1 - t) * f_t1. Tags are pair-local times, so a (t -> 1) input
/// yields a (0 -> t) flow.
template <typename Scalar>
FlowField<Scalar> complementary_flow(const FlowField<Scalar>& f_t1, double t) {
  require_open_unit(t, "complementary_flow");
  const auto factor = static_cast<Scalar>(t / (1.0 - t));
  return FlowField<Scalar>(factor * f_t1.uv(), 1.0 - f_t1.to(), f_t1.from());
}

/// Pairwise flows recovered from the intermediate ones. The 1 -> 0 direction
/// mirrors the 0 -> 1 construction with the roles of the two frames (and of t
/// and 1 - t) exchanged.
template <typename Scalar>
std::pair<FlowField<Scalar>, FlowField<Scalar>> reuse_flows(const FlowField<Scalar>& f_t0,
                                                             const FlowField<Scalar>& f_t1, double t) {
  require_open_unit(t, "reuse_flows");
  require_same_dims(f_t0, f_t1, "reuse_flows");
  const FlowField<Scalar> f01_hat = parallelogram_recombine(f_t0, f_t1);
  const FlowField<Scalar> f10_hat = parallelogram_recombine(f_t1, f_t0);
  const FlowField<Scalar> f0t_com = complementary_flow(f_t1, t);
  const FlowField<Scalar> f1t_com = complementary_flow(f_t0, 1.0 - t);
  return {warp(f01_hat, f0t_com).retagged(0.0, 1.0), warp(f10_hat, f1t_com).retagged(1.0, 0.0)};
}

}  // namespace ofr
