#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ofr/types.hpp"

namespace ofr {

/// Mean of sqrt((pred - gt)^2 + eps^2) over all elements.
Real charbonnier(const Frame& pred, const Frame& gt, Real eps = 1e-3);

Real mse(const Frame& pred, const Frame& gt);

/// 10 log10(peak^2 / MSE); +infinity when the frames are identical.
Real psnr(const Frame& pred, const Frame& gt, Real peak = 1.0);

struct SsimOptions {
  int window = 11;
  Real sigma = 1.5;
  Real k1 = 0.01;
  Real k2 = 0.03;
  Real peak = 1.0;
};

/// Mean local SSIM on BT.601 luma over all fully contained Gaussian windows.
Real ssim(const Frame& pred, const Frame& gt, const SsimOptions& options = {});

enum class FrameKind { PreExisting, Interpolated };

struct FrameQuality {
  std::string name;
  FrameKind kind = FrameKind::PreExisting;
  Real psnr = 0.0;
  Real ssim = 0.0;
};

struct QualityReport {
  std::string label;
  std::vector<FrameQuality> frames;

  struct Means {
    Real psnr = 0.0;
    Real ssim = 0.0;
    int count = 0;
  };
  /// Infinite PSNRs propagate to the mean.
  Means mean() const;
  Means mean(FrameKind kind) const;

  std::string to_text() const;
  std::string to_json() const;
};

/// Scores 8-bit round-tripped predictions against 8-bit round-tripped targets.
/// Output index k is pre-existing when even, interpolated when odd.
QualityReport evaluate(const std::vector<Frame>& pred, const std::vector<Frame>& gt, const std::string& label = {},
                       const std::vector<std::string>& names = {});

/// Writes `<stem>.txt` and `<stem>.json` for one or more reports.
void write_reports(const std::filesystem::path& stem, const std::vector<QualityReport>& reports);

}  // namespace ofr
