#include "ofr/blocks.hpp"

namespace ofr {

std::vector<ResidualBlockWeights> add_residual_layers(ParamSet& params, const std::string& prefix, int channels,
                                                      int count) {
  if (count < 0) throw ConfigError("residual block count must be non-negative");
  std::vector<ResidualBlockWeights> blocks;
  for (int j = 0; j < count; ++j) {
    const std::string name = prefix + std::to_string(j);
    blocks.push_back({params.add(name + ".conv1", Conv::same(3, channels, channels)),
                      params.add(name + ".conv2", Conv::same(3, channels, channels))});
  }
  return blocks;
}

Var residual_block(Graph& g, const Var& x, const ResidualBlockWeights& w, Real slope) {
  return g.add(x, g.conv(g.leaky_relu(g.conv(x, w.conv1), slope), w.conv2));
}

Var residual_stack(Graph& g, Var x, const std::vector<ResidualBlockWeights>& blocks, Real slope) {
  for (const auto& block : blocks) x = residual_block(g, x, block, slope);
  return x;
}

}  // namespace ofr
