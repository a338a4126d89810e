#include "ofr/estimator.hpp"

#include <cmath>
#include <limits>

namespace ofr {

// ---------------------------------------------------------------------------
// Naive adapter

NaiveEstimatorAdapter::NaiveEstimatorAdapter(std::shared_ptr<const PairwiseEstimator> inner)
    : inner_(std::move(inner)) {
  if (!inner_) throw ConfigError("naive adapter needs a pairwise estimator");
}

std::pair<Flow, Flow> NaiveEstimatorAdapter::estimate(const Frame& i0, const Frame& i1, double t) const {
  require_open_unit(t, "naive estimate");
  const Flow f01 = inner_->estimate_pair(i0, i1).retagged(0.0, 1.0);
  const Flow f10 = inner_->estimate_pair(i1, i0).retagged(1.0, 0.0);
  return naive_intermediate(f01, f10, t);
}

// ---------------------------------------------------------------------------
// Oracle

OracleEstimator::OracleEstimator(synth::Sequence sequence, double scale,
                                 std::vector<std::pair<double, Frame>> known_frames, double match_tolerance)
    : sequence_(std::move(sequence)), scale_(scale), known_(std::move(known_frames)), tolerance_(match_tolerance) {
  if (!(scale_ > 0.0)) throw ConfigError("oracle: scale must be positive");
}

OracleEstimator OracleEstimator::for_degraded(const synth::Sequence& sequence, const std::vector<Frame>& lr_all,
                                              double match_tolerance) {
  std::vector<std::pair<double, Frame>> known;
  for (std::size_t k = 0; k < lr_all.size(); ++k) known.emplace_back(static_cast<double>(k), lr_all[k]);
  const double scale = lr_all.empty() ? 1.0 : static_cast<double>(lr_all.front().width()) / sequence.width();
  return OracleEstimator(sequence, scale, std::move(known), match_tolerance);
}

namespace {

bool frames_match(const Frame& a, const Frame& b, double tolerance) {
  if (!a.same_shape(b)) return false;
  return ((a.array() - b.array()).abs() <= tolerance).all();
}

}  // namespace

double OracleEstimator::time_of(const Frame& frame, const double* after) const {
  std::vector<double> matches;
  for (const auto& [time, known] : known_) {
    if (frames_match(frame, known, tolerance_)) matches.push_back(time);
  }
  if (after) {
    std::erase(matches, *after);
    for (double time : matches) {
      if (time > *after) return time;
    }
    if (!matches.empty()) return matches.back();
  } else if (!matches.empty()) {
    return matches.front();
  }
  throw OracleUnavailable("oracle estimator: frame carries no known motion metadata");
}

std::pair<Flow, Flow> OracleEstimator::estimate(const Frame& i0, const Frame& i1, double t) const {
  require_open_unit(t, "oracle estimate");
  const double a = time_of(i0);
  const double b = time_of(i1, &a);
  const double mid = a + t * (b - a);
  return {sequence_.true_flow(mid, a, scale_).retagged(t, 0.0), sequence_.true_flow(mid, b, scale_).retagged(t, 1.0)};
}

Flow OracleEstimator::estimate_pair(const Frame& from, const Frame& to) const {
  const double a = time_of(from);
  const double b = time_of(to, &a);
  return sequence_.true_flow(a, b, scale_).retagged(0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Block matching

namespace {

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Plane gray_plane(const Frame& frame) {
  const Frame y = luma(frame);
  Plane plane(y.height(), y.width());
  for (int r = 0; r < y.height(); ++r)
    for (int c = 0; c < y.width(); ++c) plane(r, c) = y(r, c, 0);
  return plane;
}

Plane half(const Plane& p) {
  Plane out(p.rows() / 2, p.cols() / 2);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      out(r, c) = 0.25 * (p(2 * r, 2 * c) + p(2 * r + 1, 2 * c) + p(2 * r, 2 * c + 1) + p(2 * r + 1, 2 * c + 1));
  return out;
}

double at_clamped(const Plane& p, Eigen::Index r, Eigen::Index c) {
  return p(std::clamp<Eigen::Index>(r, 0, p.rows() - 1), std::clamp<Eigen::Index>(c, 0, p.cols() - 1));
}

double bilinear(const Plane& p, double x, double y) {
  const BilinearTap tap = bilinear_tap(x, y, static_cast<int>(p.cols()), static_cast<int>(p.rows()));
  const double top = (1.0 - tap.fx) * p(tap.y0, tap.x0) + tap.fx * p(tap.y0, tap.x1);
  const double bottom = (1.0 - tap.fx) * p(tap.y1, tap.x0) + tap.fx * p(tap.y1, tap.x1);
  return (1.0 - tap.fy) * top + tap.fy * bottom;
}

double block_sad(const Plane& a, const Plane& b, int r, int c, int dy, int dx, int radius) {
  double sad = 0.0;
  for (int oy = -radius; oy <= radius; ++oy)
    for (int ox = -radius; ox <= radius; ++ox)
      sad += std::abs(at_clamped(a, r + oy, c + ox) - at_clamped(b, r + oy + dy, c + ox + dx));
  return sad;
}

struct Candidate {
  double cost = std::numeric_limits<double>::infinity();
  double norm = std::numeric_limits<double>::infinity();
  bool better_than(const Candidate& other) const {
    return cost < other.cost || (cost == other.cost && norm < other.norm);
  }
};

// Integer displacement fields (dx, dy) per pixel.
struct IntField {
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dx, dy;
};

IntField match_level(const Plane& from, const Plane& to, const IntField* init, int radius, int block_radius) {
  IntField out;
  out.dx.setZero(from.rows(), from.cols());
  out.dy.setZero(from.rows(), from.cols());
  for (int r = 0; r < from.rows(); ++r) {
    for (int c = 0; c < from.cols(); ++c) {
      int cx = 0;
      int cy = 0;
      if (init) {
        const int pr = std::min<int>(r / 2, static_cast<int>(init->dx.rows()) - 1);
        const int pc = std::min<int>(c / 2, static_cast<int>(init->dx.cols()) - 1);
        cx = 2 * init->dx(pr, pc);
        cy = 2 * init->dy(pr, pc);
      }
      Candidate best;
      for (int dy = cy - radius; dy <= cy + radius; ++dy) {
        for (int dx = cx - radius; dx <= cx + radius; ++dx) {
          const Candidate cand{block_sad(from, to, r, c, dy, dx, block_radius),
                               static_cast<double>(dx * dx + dy * dy)};
          if (cand.better_than(best)) {
            best = cand;
            out.dx(r, c) = dx;
            out.dy(r, c) = dy;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

BlockMatchEstimator::BlockMatchEstimator(BlockMatchConfig config) : config_(config) {
  if (config_.block < 1 || config_.block % 2 == 0) throw ConfigError("block matching: block must be odd and >= 1");
  if (config_.search < 0 || config_.levels < 1 || config_.refine < 0) {
    throw ConfigError("block matching: search, levels and refine must be non-negative (levels >= 1)");
  }
}

Flow BlockMatchEstimator::estimate_pair(const Frame& from, const Frame& to) const {
  require_same_shape(from, to, "block matching");
  if (from.height() < config_.block || from.width() < config_.block) {
    throw ConfigError("block matching: frame " + std::to_string(from.height()) + "x" + std::to_string(from.width()) +
                      " is smaller than the " + std::to_string(config_.block) + "px block");
  }
  std::vector<Plane> pyr_from{gray_plane(from)};
  std::vector<Plane> pyr_to{gray_plane(to)};
  for (int l = 1; l < config_.levels; ++l) {
    if (pyr_from.back().rows() / 2 < config_.block || pyr_from.back().cols() / 2 < config_.block) break;
    pyr_from.push_back(half(pyr_from.back()));
    pyr_to.push_back(half(pyr_to.back()));
  }
  const int block_radius = config_.block / 2;
  IntField field;
  for (int l = static_cast<int>(pyr_from.size()) - 1; l >= 0; --l) {
    const bool coarsest = l == static_cast<int>(pyr_from.size()) - 1;
    field = match_level(pyr_from[l], pyr_to[l], coarsest ? nullptr : &field, coarsest ? config_.search : 1,
                        block_radius);
  }
  Flow flow(from.height(), from.width(), 0.0, 1.0);
  for (int r = 0; r < from.height(); ++r) {
    for (int c = 0; c < from.width(); ++c) {
      flow.u(r, c) = field.dx(r, c);
      flow.v(r, c) = field.dy(r, c);
    }
  }
  return flow;
}

std::pair<Flow, Flow> BlockMatchEstimator::estimate(const Frame& i0, const Frame& i1, double t) const {
  require_open_unit(t, "block matching estimate");
  const Flow f01 = estimate_pair(i0, i1);
  const Flow f10 = estimate_pair(i1, i0);
  const Plane p0 = gray_plane(i0);
  const Plane p1 = gray_plane(i1);
  const int block_radius = config_.block / 2;

  // Symmetric rematch based at time t: motion m over the pair puts pixel p of
  // the intermediate frame at p - t m in frame 0 and p + (1 - t) m in frame 1.
  Flow f_t0(i0.height(), i0.width(), t, 0.0);
  Flow f_t1(i0.height(), i0.width(), t, 1.0);
  for (int r = 0; r < i0.height(); ++r) {
    for (int c = 0; c < i0.width(); ++c) {
      const Eigen::Vector2d seeds[2] = {{f01.u(r, c), f01.v(r, c)}, {-f10.u(r, c), -f10.v(r, c)}};
      Candidate best;
      Eigen::Vector2d best_m = seeds[0];
      for (const auto& seed : seeds) {
        for (int dy = -config_.refine; dy <= config_.refine; ++dy) {
          for (int dx = -config_.refine; dx <= config_.refine; ++dx) {
            const Eigen::Vector2d m = seed + Eigen::Vector2d(dx, dy);
            double sad = 0.0;
            for (int oy = -block_radius; oy <= block_radius; ++oy) {
              for (int ox = -block_radius; ox <= block_radius; ++ox) {
                const double a = bilinear(p0, c + ox - t * m.x(), r + oy - t * m.y());
                const double b = bilinear(p1, c + ox + (1.0 - t) * m.x(), r + oy + (1.0 - t) * m.y());
                sad += std::abs(a - b);
              }
            }
            const Candidate cand{sad, static_cast<double>(dx * dx + dy * dy)};
            if (cand.better_than(best)) {
              best = cand;
              best_m = m;
            }
          }
        }
      }
      f_t0.u(r, c) = -t * best_m.x();
      f_t0.v(r, c) = -t * best_m.y();
      f_t1.u(r, c) = (1.0 - t) * best_m.x();
      f_t1.v(r, c) = (1.0 - t) * best_m.y();
    }
  }
  return {std::move(f_t0), std::move(f_t1)};
}

// ---------------------------------------------------------------------------

std::vector<FlowBundle> sequence_flows(const std::vector<Frame>& frames, const FlowEstimator& estimator, double t) {
  if (frames.size() < 2) throw SequenceError("sequence_flows: need at least 2 frames");
  for (const Frame& f : frames) require_same_shape(frames.front(), f, "sequence_flows");
  std::vector<FlowBundle> bundles;
  bundles.reserve(frames.size() - 1);
  for (std::size_t l = 0; l + 1 < frames.size(); ++l) {
    auto [f_t0, f_t1] = estimator.estimate(frames[l], frames[l + 1], t);
    auto [f01, f10] = reuse_flows(f_t0, f_t1, t);
    const double base = static_cast<double>(l);
    bundles.push_back(FlowBundle{f_t0.retagged(base + t, base), f_t1.retagged(base + t, base + 1.0),
                                 f01.retagged(base, base + 1.0), f10.retagged(base + 1.0, base), t});
  }
  return bundles;
}

}  // namespace ofr
