#include "ofr/frame_synthesis.hpp"

namespace ofr {

namespace {

Frame consistency_mask(const Flow& forward, const Flow& backward, double alpha) {
  const Frame round_trip = forward.uv() + warp(backward.uv(), forward);
  Frame mask(forward.height(), forward.width(), 1);
  mask.array().col(0) = (-alpha * round_trip.array().square().rowwise().sum()).exp();
  return mask;
}

}  // namespace

std::pair<OcclusionMask, OcclusionMask> occlusion_masks(const Flow& f01, const Flow& f10, double alpha) {
  require_same_dims(f01, f10, "occlusion_masks");
  if (!(alpha > 0.0)) throw ParameterError("occlusion_masks: alpha must be positive");
  return {OcclusionMask{consistency_mask(f01, f10, alpha)}, OcclusionMask{consistency_mask(f10, f01, alpha)}};
}

Frame blend_warped(const Frame& warped_prev, const Frame& warped_next, const Frame& m_prev, const Frame& m_next) {
  require_same_shape(warped_prev, warped_next, "blend_warped");
  require_same_shape(m_prev, m_next, "blend_warped masks");
  require_same_spatial(warped_prev, m_prev, "blend_warped masks");
  if (m_prev.channels() != 1) throw ShapeError("blend_warped: masks must have one channel");
  const auto w_next = (1.0 - m_prev.array().col(0) + m_next.array().col(0)).eval();
  const auto w_prev = (1.0 - m_next.array().col(0) + m_prev.array().col(0)).eval();
  Frame out = Frame::zeros_like(warped_prev);
  out.array() = 0.5 * (warped_next.array().colwise() * w_next + warped_prev.array().colwise() * w_prev);
  return out;
}

Frame synthesize_silr(const Frame& lr_prev, const Frame& lr_next, const FlowBundle& bundle,
                      const std::pair<OcclusionMask, OcclusionMask>& masks) {
  require_same_shape(lr_prev, lr_next, "synthesize_silr");
  require_same_spatial(lr_prev, masks.first.weight, "synthesize_silr masks");
  require_same_spatial(lr_prev, masks.second.weight, "synthesize_silr masks");
  const Frame warped_next = warp(lr_next, bundle.f_t1);
  const Frame warped_prev = warp(lr_prev, bundle.f_t0);
  return clamp01(blend_warped(warped_prev, warped_next, masks.first.weight, masks.second.weight));
}

}  // namespace ofr
