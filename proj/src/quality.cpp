#include "ofr/quality.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "ofr/image_io.hpp"

namespace ofr {

Real charbonnier(const Frame& pred, const Frame& gt, Real eps) {
  require_same_shape(pred, gt, "charbonnier");
  if (!(eps > 0.0)) throw ParameterError("charbonnier: eps must be positive");
  // eps plus the mean excess over eps.
  const auto d2 = (pred.array() - gt.array()).square();
  return eps + (d2 / ((d2 + eps * eps).sqrt() + eps)).mean();
}

Real mse(const Frame& pred, const Frame& gt) {
  require_same_shape(pred, gt, "mse");
  if (pred.empty()) throw SizeError("mse: empty frames");
  return (pred.array() - gt.array()).square().mean();
}

Real psnr(const Frame& pred, const Frame& gt, Real peak) {
  const Real e = mse(pred, gt);
  if (e == 0.0) return std::numeric_limits<Real>::infinity();
  return 10.0 * std::log10(peak * peak / e);
}

namespace {

using Plane = Eigen::Array<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Plane to_plane(const Frame& f) {
  Plane p(f.height(), f.width());
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) p(y, x) = f(y, x, 0);
  return p;
}

// Valid-mode separable filtering.
Plane filter_valid(const Plane& p, const std::vector<Real>& taps) {
  const int n = static_cast<int>(taps.size());
  const Eigen::Index out_h = p.rows() - n + 1;
  const Eigen::Index out_w = p.cols() - n + 1;
  Plane horizontal = Plane::Zero(p.rows(), out_w);
  for (int i = 0; i < n; ++i) horizontal += taps[i] * p.middleCols(i, out_w);
  Plane out = Plane::Zero(out_h, out_w);
  for (int i = 0; i < n; ++i) out += taps[i] * horizontal.middleRows(i, out_h);
  return out;
}

}  // namespace

Real ssim(const Frame& pred, const Frame& gt, const SsimOptions& options) {
  require_same_shape(pred, gt, "ssim");
  if (options.window < 1 || options.window % 2 == 0) throw ParameterError("ssim: window must be odd");
  if (pred.height() < options.window || pred.width() < options.window) {
    throw SizeError("ssim: frame " + std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
                    " is smaller than the " + std::to_string(options.window) + "px window");
  }
  std::vector<Real> taps(options.window);
  Real total = 0.0;
  const int half = options.window / 2;
  for (int i = 0; i < options.window; ++i) {
    const Real d = i - half;
    taps[i] = std::exp(-d * d / (2.0 * options.sigma * options.sigma));
    total += taps[i];
  }
  for (Real& t : taps) t /= total;

  const Plane x = to_plane(luma(pred));
  const Plane y = to_plane(luma(gt));
  const Plane mu_x = filter_valid(x, taps);
  const Plane mu_y = filter_valid(y, taps);
  const Plane sigma_xx = filter_valid(x * x, taps) - mu_x * mu_x;
  const Plane sigma_yy = filter_valid(y * y, taps) - mu_y * mu_y;
  const Plane sigma_xy = filter_valid(x * y, taps) - mu_x * mu_y;
  const Real c1 = (options.k1 * options.peak) * (options.k1 * options.peak);
  const Real c2 = (options.k2 * options.peak) * (options.k2 * options.peak);
  const Plane num = (2.0 * mu_x * mu_y + c1) * (2.0 * sigma_xy + c2);
  const Plane den = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_xx + sigma_yy + c2);
  return (num / den).mean();
}

QualityReport::Means QualityReport::mean() const {
  Means m;
  for (const auto& f : frames) {
    m.psnr += f.psnr;
    m.ssim += f.ssim;
    ++m.count;
  }
  if (m.count) {
    m.psnr /= m.count;
    m.ssim /= m.count;
  }
  return m;
}

QualityReport::Means QualityReport::mean(FrameKind kind) const {
  Means m;
  for (const auto& f : frames) {
    if (f.kind != kind) continue;
    m.psnr += f.psnr;
    m.ssim += f.ssim;
    ++m.count;
  }
  if (m.count) {
    m.psnr /= m.count;
    m.ssim /= m.count;
  }
  return m;
}

namespace {

std::string fmt(Real v, int precision) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

nlohmann::json json_number(Real v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

nlohmann::json json_means(const QualityReport::Means& m) {
  return {{"psnr", json_number(m.psnr)}, {"ssim", json_number(m.ssim)}, {"count", m.count}};
}

const char* kind_name(FrameKind kind) { return kind == FrameKind::PreExisting ? "pre-existing" : "interpolated"; }

}  // namespace

std::string QualityReport::to_text() const {
  std::ostringstream os;
  if (!label.empty()) os << "# " << label << "\n";
  for (const auto& f : frames) {
    os << f.name << " " << kind_name(f.kind) << " psnr=" << fmt(f.psnr, 4) << " ssim=" << fmt(f.ssim, 6) << "\n";
  }
  const auto line = [&](const char* what, const Means& m) {
    os << what << " psnr=" << fmt(m.psnr, 4) << " ssim=" << fmt(m.ssim, 6) << " frames=" << m.count << "\n";
  };
  line("mean", mean());
  line("mean-pre-existing", mean(FrameKind::PreExisting));
  line("mean-interpolated", mean(FrameKind::Interpolated));
  return os.str();
}

std::string QualityReport::to_json() const {
  nlohmann::json frames_json = nlohmann::json::array();
  for (const auto& f : frames) {
    frames_json.push_back(
        {{"name", f.name}, {"kind", kind_name(f.kind)}, {"psnr", json_number(f.psnr)}, {"ssim", json_number(f.ssim)}});
  }
  const nlohmann::json j = {{"label", label},
                            {"frames", frames_json},
                            {"mean", json_means(mean())},
                            {"mean_pre_existing", json_means(mean(FrameKind::PreExisting))},
                            {"mean_interpolated", json_means(mean(FrameKind::Interpolated))}};
  return j.dump(2);
}

QualityReport evaluate(const std::vector<Frame>& pred, const std::vector<Frame>& gt, const std::string& label,
                       const std::vector<std::string>& names) {
  if (pred.size() != gt.size()) {
    throw SequenceError("evaluate: " + std::to_string(pred.size()) + " predictions vs " + std::to_string(gt.size()) +
                        " targets");
  }
  QualityReport report;
  report.label = label;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const Frame p = io::quantized(pred[k]);
    const Frame g = io::quantized(gt[k]);
    FrameQuality q;
    q.name = k < names.size() ? names[k] : std::to_string(k);
    q.kind = k % 2 == 0 ? FrameKind::PreExisting : FrameKind::Interpolated;
    q.psnr = psnr(p, g);
    q.ssim = ssim(p, g);
    report.frames.push_back(q);
  }
  return report;
}

void write_reports(const std::filesystem::path& stem, const std::vector<QualityReport>& reports) {
  std::ofstream text(stem.string() + ".txt");
  std::ofstream json(stem.string() + ".json");
  if (!text || !json) throw IoError("cannot write report " + stem.string());
  nlohmann::json all = nlohmann::json::array();
  for (const auto& r : reports) {
    text << r.to_text() << "\n";
    all.push_back(nlohmann::json::parse(r.to_json()));
  }
  json << (reports.size() == 1 ? all.front() : all).dump(2) << "\n";
}

}  // namespace ofr
