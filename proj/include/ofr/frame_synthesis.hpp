#pragma once

#include <utility>

#include "ofr/flow.hpp"
#include "ofr/types.hpp"

namespace ofr {

/// Per-pixel visibility weight in [0,1] (H x W x 1). Zero marks content of
/// the intermediate frame that is missing from the frame the mask belongs to.
struct OcclusionMask {
  Frame weight;
};

/// Soft forward-backward consistency masks:
///   e0(p) = |f01(p) + warp(f10, f01)(p)|^2,  m0 = exp(-alpha * e0)
/// and symmetrically for m1. Returns (m0, m1).
std::pair<OcclusionMask, OcclusionMask> occlusion_masks(const Flow& f01, const Flow& f10, double alpha);

/// Occlusion-aware blend of the two neighbours warped to time t:
///   1/2 [(1 - m_prev + m_next) * warp(next, f_t1) + (1 - m_next + m_prev) * warp(prev, f_t0)]
/// clamped to [0,1]. The two weights always sum to 2.
Frame synthesize_silr(const Frame& lr_prev, const Frame& lr_next, const FlowBundle& bundle,
                      const std::pair<OcclusionMask, OcclusionMask>& masks);

/// The blend alone, before clamping, on already-warped frames.
Frame blend_warped(const Frame& warped_prev, const Frame& warped_next, const Frame& m_prev, const Frame& m_next);

}  // namespace ofr
