#pragma once

#include <functional>

#include "ofr/graph.hpp"
#include "ofr/types.hpp"

namespace ofr {

/// Patch-local correlation, per channel:
///   corr(p, c) = sum over o in [-k, k]^2 of a(p + o, c) * b(p + o, c)
/// with out-of-frame terms dropped (zero padding).
Frame local_correlation(const Frame& a, const Frame& b, int k);

/// Zero-padded (2k + 1)^2 box sum per channel.
Frame box_sum(const Frame& x, int k);

struct FrmWeights {
  ParamSet::LayerId projection = -1;  // 3x3, 3 -> C, followed by leaky ReLU
  ParamSet::LayerId blend = -1;       // 1x1, 2C -> C over (optimized, hs)
  Real slope = 0.1;
};

/// Registers FRM layers `<prefix>.proj` and `<prefix>.blend` (zero-filled).
FrmWeights add_frm_layers(ParamSet& params, const std::string& prefix, int channels, Real slope);

/// Receives the attention map of every refine call.
using AttentionObserver = std::function<void(const Frame& attention)>;

/// f = leaky(conv(lr, proj)); a = sigmoid(corr(f, hs)); out = blend(a * hs, hs).
Var refine(Graph& g, const Var& hs, const Var& lr, const FrmWeights& w, int k,
           const AttentionObserver& observer = {});

Frame refine(const Frame& hs, const Frame& lr, const ParamSet& params, const FrmWeights& w, int k,
             const AttentionObserver& observer = {});

}  // namespace ofr
