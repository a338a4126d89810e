#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "ofr/quality.hpp"
#include "test_util.hpp"

using namespace ofr;
using ofr::test::random_frame;

namespace {

// Direct windowed SSIM on BT.601 luma with a 2-D Gaussian window.
double direct_ssim(const Frame& a, const Frame& b) {
  const int n = 11, half = 5;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::vector<double> w(n * n);
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) total += w[i * n + j] = std::exp(-((i - half) * (i - half) + (j - half) * (j - half)) / (2 * sigma * sigma));
  const auto lum = [](const Frame& f, int y, int x) { return 0.299 * f(y, x, 0) + 0.587 * f(y, x, 1) + 0.114 * f(y, x, 2); };
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y + n <= a.height(); ++y)
    for (int x = 0; x + n <= a.width(); ++x) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double g = w[i * n + j] / total, p = lum(a, y + i, x + j), q = lum(b, y + i, x + j);
          mx += g * p;
          my += g * q;
          sxx += g * p * p;
          syy += g * q * q;
          sxy += g * p * q;
        }
      sxx -= mx * mx;
      syy -= my * my;
      sxy -= mx * my;
      sum += (2 * mx * my + c1) * (2 * sxy + c2) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
      ++count;
    }
  return sum / count;
}

}  // namespace

TEST_CASE("charbonnier closed forms") {
  const Frame x = random_frame(5, 6, 3, 1);
  CHECK(charbonnier(x, x, 1e-3) == 1e-3);
  const Frame shifted = Frame(4, 4, 3, 0.2 + 3e-3);
  CHECK(charbonnier(shifted, Frame(4, 4, 3, 0.2), 1e-3) == doctest::Approx(std::sqrt(10.0) * 1e-3).epsilon(1e-9));
  const Frame y = random_frame(5, 6, 3, 2);
  CHECK(charbonnier(x, y, 1e-3) >= 1e-3);
  CHECK(charbonnier(x, x + 0.5 * (y - x), 1e-3) < charbonnier(x, y, 1e-3));
  CHECK_THROWS_AS(charbonnier(x, Frame(5, 5, 3), 1e-3), ShapeError);
  CHECK_THROWS_AS(charbonnier(x, y, 0.0), ParameterError);
}

TEST_CASE("psnr closed forms") {
  const Frame gt = random_frame(8, 8, 3, 3, 0.2, 0.8);
  CHECK(std::isinf(psnr(gt, gt)));
  CHECK(psnr(gt, gt + Frame(8, 8, 3, 0.1)) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(std::abs(psnr(Frame(8, 8, 3, 0.6), Frame(8, 8, 3, 0.5)) - 20.0) < 1e-6);
  CHECK(std::abs(psnr(Frame(8, 8, 3, 0.51), Frame(8, 8, 3, 0.5)) - 40.0) < 1e-6);
  CHECK(psnr(Frame(8, 8, 3, 0.7), gt) < psnr(Frame(8, 8, 3, 0.55), Frame(8, 8, 3, 0.5)));
  CHECK_THROWS_AS(psnr(gt, Frame(8, 7, 3)), ShapeError);
}

TEST_CASE("ssim") {
  const Frame a = random_frame(20, 17, 3, 4), b = random_frame(20, 17, 3, 5);
  CHECK(ssim(a, a) == 1.0);
  CHECK(ssim(a, b) == doctest::Approx(direct_ssim(a, b)).epsilon(1e-10));
  const Frame c = a + 0.3 * (b - a);
  CHECK(ssim(a, c) == doctest::Approx(direct_ssim(a, c)).epsilon(1e-10));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
  CHECK(ssim(a, b) <= 1.0);
  CHECK(ssim(a, b) >= -1.0);

  Frame checker(16, 16, 3);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int ch = 0; ch < 3; ++ch) checker(y, x, ch) = (x + y) % 2;
  const Frame inverted = Frame(16, 16, 3, 1.0) - checker;
  CHECK(ssim(checker, inverted) < -0.99);

  CHECK_THROWS_AS(ssim(Frame(10, 20, 3), Frame(10, 20, 3)), SizeError);
  CHECK_THROWS_AS(ssim(a, Frame(20, 16, 3)), ShapeError);
}

TEST_CASE("evaluation report partitions and serializes") {
  const Frame g0 = random_frame(12, 12, 3, 6), g1 = random_frame(12, 12, 3, 7), g2 = random_frame(12, 12, 3, 8);
  const Frame p1 = 0.5 * g1;
  const QualityReport r = evaluate({g0, p1, g2}, {g0, g1, g2}, "demo", {"a", "b", "c"});
  REQUIRE(r.frames.size() == 3);
  CHECK(r.frames[1].kind == FrameKind::Interpolated);
  CHECK(r.frames[1].name == "b");
  CHECK(std::isinf(r.mean(FrameKind::PreExisting).psnr));
  CHECK(r.mean(FrameKind::PreExisting).count == 2);
  CHECK(std::isfinite(r.mean(FrameKind::Interpolated).psnr));
  CHECK(std::isinf(r.mean().psnr));
  CHECK(r.mean(FrameKind::PreExisting).ssim == 1.0);

  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["label"] == "demo");
  CHECK(j["frames"].size() == 3);
  CHECK(j["mean_pre_existing"]["psnr"] == "inf");
  CHECK(j["mean_interpolated"]["psnr"].get<double>() == doctest::Approx(r.mean(FrameKind::Interpolated).psnr));
  CHECK(r.to_text().find("demo") != std::string::npos);

  const auto stem = std::filesystem::temp_directory_path() / "ofr_quality_report";
  write_reports(stem, {r, r});
  std::ifstream in(stem.string() + ".json");
  CHECK(nlohmann::json::parse(in).size() == 2);

  CHECK_THROWS_AS(evaluate({g0}, {g0, g1}), SequenceError);
}

TEST_CASE("evaluation scores 8-bit round-tripped frames") {
  const Frame g(12, 12, 3, 0.5);
  const Frame near(12, 12, 3, 0.5 + 0.4 / 255.0);
  CHECK(std::isinf(evaluate({near}, {g}).frames[0].psnr));
}
