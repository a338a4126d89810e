#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "ofr/flow.hpp"
#include "ofr/synth_bench.hpp"
#include "ofr/types.hpp"

namespace ofr {

/// Produces the intermediate flows (f_t0, f_t1), based at time t, for two
/// frames. Outputs are tagged with pair-local times (t -> 0, t -> 1).
class FlowEstimator {
 public:
  virtual ~FlowEstimator() = default;
  virtual std::pair<Flow, Flow> estimate(const Frame& i0, const Frame& i1, double t) const = 0;
};

/// Produces the flow from one frame to another (tagged 0 -> 1).
class PairwiseEstimator {
 public:
  virtual ~PairwiseEstimator() = default;
  virtual Flow estimate_pair(const Frame& from, const Frame& to) const = 0;
};

/// Linear scaling of pairwise flows to the intermediate time.
class NaiveEstimatorAdapter final : public FlowEstimator {
 public:
  explicit NaiveEstimatorAdapter(std::shared_ptr<const PairwiseEstimator> inner);
  std::pair<Flow, Flow> estimate(const Frame& i0, const Frame& i1, double t) const override;

 private:
  std::shared_ptr<const PairwiseEstimator> inner_;
};

/// Exact flows of a synthetic sequence. Frames are identified by content
/// against the registered (time, frame) list; unknown frames raise
/// OracleUnavailable. `scale` maps the sequence's resolution to the frames'
/// (0.25 for bicubic x1/4 degraded frames, 1 for frames rendered directly).
class OracleEstimator final : public FlowEstimator, public PairwiseEstimator {
 public:
  OracleEstimator(synth::Sequence sequence, double scale, std::vector<std::pair<double, Frame>> known_frames,
                  double match_tolerance = 1e-9);

  /// Registers the degraded frames lr_all at integer times 0 .. frames-1.
  static OracleEstimator for_degraded(const synth::Sequence& sequence, const std::vector<Frame>& lr_all,
                                      double match_tolerance = 1e-9);

  std::pair<Flow, Flow> estimate(const Frame& i0, const Frame& i1, double t) const override;
  Flow estimate_pair(const Frame& from, const Frame& to) const override;

  /// Time of a registered frame; the earliest match wins, except that
  /// `after` (when given) skips matches at or before that time.
  double time_of(const Frame& frame, const double* after = nullptr) const;

 private:
  synth::Sequence sequence_;
  double scale_;
  std::vector<std::pair<double, Frame>> known_;
  double tolerance_;
};

struct BlockMatchConfig {
  int block = 7;   // odd SAD window side
  int search = 4;  // +/- integer search radius at the coarsest level
  int levels = 2;  // pyramid levels (1 = no pyramid)
  int refine = 1;  // +/- radius of the bilateral rematch at time t
};

/// Coarse-to-fine SAD block matching on luma. Pairwise flows are integer; the
/// intermediate flows come from the linearly scaled pairwise flows, refined by
/// one symmetric rematch centred at the intermediate position.
class BlockMatchEstimator final : public FlowEstimator, public PairwiseEstimator {
 public:
  explicit BlockMatchEstimator(BlockMatchConfig config = {});

  std::pair<Flow, Flow> estimate(const Frame& i0, const Frame& i1, double t) const override;
  Flow estimate_pair(const Frame& from, const Frame& to) const override;

  const BlockMatchConfig& config() const { return config_; }

 private:
  BlockMatchConfig config_;
};

/// One bundle per adjacent input pair. Flows are computed pair-locally, then
/// re-tagged with global times l + t, l, l + 1 for pair (l, l + 1).
std::vector<FlowBundle> sequence_flows(const std::vector<Frame>& frames, const FlowEstimator& estimator,
                                       double t);

}  // namespace ofr
