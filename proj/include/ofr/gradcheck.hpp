#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ofr/types.hpp"

namespace ofr {

struct GradCheckOptions {
  int seeds = 50;
  std::uint64_t base_seed = 0;
  Real h = 1e-4;          // central difference step
  Real rel_tol = 1e-4;
  Real abs_floor = 1e-6;
  int coords_per_slot = 12;  // sampled coordinates per differentiable array
};

/// |a - n| / max(|a|, |n|, abs_floor / rel_tol): below rel_tol exactly when
/// the relative error is within rel_tol or the absolute error within abs_floor.
Real gradient_error(Real analytic, Real numeric, Real rel_tol, Real abs_floor);

struct GradCheckResult {
  std::string op;
  int seeds = 0;
  int coordinates = 0;
  /// Coordinates whose +-h probes switch a leaky ReLU or clamp element to
  /// another piece, so the step straddles a kink; not scored.
  int kinks = 0;
  Real max_error = 0.0;
  bool passed = true;
};

/// Every differentiable operator and composite the pipeline backpropagates through.
const std::vector<std::string>& gradcheck_ops();

GradCheckResult check_op(const std::string& op, const GradCheckOptions& options);

std::vector<GradCheckResult> gradcheck_suite(const GradCheckOptions& options);

}  // namespace ofr
