#include "ofr/feature_refine.hpp"

namespace ofr {

Frame box_sum(const Frame& x, int k) {
  if (k < 0) throw ParameterError("box_sum: k must be non-negative");
  const int h = x.height();
  const int w = x.width();
  Frame horizontal = Frame::zeros_like(x);
  for (int y = 0; y < h; ++y) {
    for (int c0 = 0; c0 < w; ++c0) {
      const Eigen::Index dst = static_cast<Eigen::Index>(y) * w + c0;
      for (int xx = std::max(0, c0 - k); xx <= std::min(w - 1, c0 + k); ++xx) {
        horizontal.array().row(dst) += x.array().row(static_cast<Eigen::Index>(y) * w + xx);
      }
    }
  }
  Frame out = Frame::zeros_like(x);
  for (int y0 = 0; y0 < h; ++y0) {
    for (int yy = std::max(0, y0 - k); yy <= std::min(h - 1, y0 + k); ++yy) {
      out.array().middleRows(static_cast<Eigen::Index>(y0) * w, w) +=
          horizontal.array().middleRows(static_cast<Eigen::Index>(yy) * w, w);
    }
  }
  return out;
}

Frame local_correlation(const Frame& a, const Frame& b, int k) {
  require_same_shape(a, b, "local_correlation");
  if (k < 0) throw ParameterError("local_correlation: k must be non-negative");
  return box_sum(hadamard(a, b), k);
}

FrmWeights add_frm_layers(ParamSet& params, const std::string& prefix, int channels, Real slope) {
  FrmWeights w;
  w.projection = params.add(prefix + ".proj", Conv::same(3, 3, channels));
  w.blend = params.add(prefix + ".blend", Conv::same(1, 2 * channels, channels));
  w.slope = slope;
  return w;
}

Var refine(Graph& g, const Var& hs, const Var& lr, const FrmWeights& w, int k, const AttentionObserver& observer) {
  const Conv& proj = g.params().layer(w.projection);
  if (lr->value.channels() != proj.in_channels) {
    throw ConfigError("refine: LR frame has " + std::to_string(lr->value.channels()) + " channels, projection expects " +
                      std::to_string(proj.in_channels));
  }
  if (hs->value.channels() != proj.out_channels) {
    throw ConfigError("refine: hidden state has " + std::to_string(hs->value.channels()) +
                      " channels, projection yields " + std::to_string(proj.out_channels));
  }
  require_same_spatial(hs->value, lr->value, "refine");
  const Var features = g.leaky_relu(g.conv(lr, w.projection), w.slope);
  const Var attention = g.sigmoid(g.local_correlation(features, hs, k));
  if (observer) observer(attention->value);
  const Var optimized = g.mul(attention, hs);
  const int c = hs->value.channels();
  return g.conv_concat({{optimized, 0}, {hs, c}}, w.blend);
}

Frame refine(const Frame& hs, const Frame& lr, const ParamSet& params, const FrmWeights& w, int k,
             const AttentionObserver& observer) {
  Graph g(params);
  return refine(g, g.constant(hs), g.constant(lr), w, k, observer)->value;
}

}  // namespace ofr
