#pragma once

#include <string>
#include <vector>

#include "ofr/graph.hpp"

namespace ofr {

/// y = x + conv2(leaky(conv1(x))), both 3x3 C -> C.
struct ResidualBlockWeights {
  ParamSet::LayerId conv1 = -1;
  ParamSet::LayerId conv2 = -1;
};

/// Registers `<prefix>{0..count-1}.conv{1,2}`.
std::vector<ResidualBlockWeights> add_residual_layers(ParamSet& params, const std::string& prefix, int channels,
                                                      int count);

Var residual_block(Graph& g, const Var& x, const ResidualBlockWeights& w, Real slope);
Var residual_stack(Graph& g, Var x, const std::vector<ResidualBlockWeights>& blocks, Real slope);

}  // namespace ofr
