#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "monofill/image.hpp"

namespace monofill {

/// Returned by psnr for identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) over RGB jointly, values in [0,1].
double psnr(const RgbImage& a, const RgbImage& b);
/// Restricted to pixels where region == 1; an empty region is an error.
double psnr(const RgbImage& a, const RgbImage& b, const Mask& region);
double psnr(const GrayImage& a, const GrayImage& b);

enum class SsimWindow { Gaussian11, Uniform8 };

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean local SSIM over all fully contained windows (no padding).
double ssim(const GrayImage& a, const GrayImage& b, SsimWindow window = SsimWindow::Gaussian11);
/// On the monochrome conversion of both images.
double ssim(const RgbImage& a, const RgbImage& b, SsimWindow window = SsimWindow::Gaussian11);

// ---------------------------------------------------------------------------
// De-colorization benchmark

enum class MaskType { Rect, FreeForm };
std::string to_string(MaskType type);
MaskType parse_mask_type(const std::string& name);

struct MaskSpec {
  MaskType type = MaskType::Rect;
  double ratio = 0.25;
  double tolerance = 0.01;  // free-form masks only
};

/// Mask for one (image size, seed): a rectangle of sqrt(ratio) times each side
/// at a random position, or free-form strokes rescaled to `ratio`.
Mask benchmark_mask(Index height, Index width, const MaskSpec& spec, std::uint64_t seed);

struct NamedImage {
  std::string name;
  RgbImage image;
};

/// A colorization method under test. `known_color` is zero inside the mask.
using ColorizeFn =
    std::function<RgbImage(const GrayImage& gray, const RgbImage& known_color, const Mask& mask, std::uint64_t seed)>;

struct BenchmarkMethod {
  std::string name;
  ColorizeFn run;
};

struct MetricRow {
  std::string image;
  std::string method;
  MaskType mask_type = MaskType::Rect;
  int realization = 0;
  double mask_ratio = 0.0;
  double psnr_masked = 0.0;
  double psnr_full = 0.0;
  double ssim = 0.0;
  std::string status = "ok";  // "ok", "invalid: ...", "failed: ..."

  bool ok() const { return status == "ok"; }
};

struct MethodSummary {
  std::string method;
  MaskType mask_type = MaskType::Rect;
  int rows = 0;  // valid rows averaged
  int failed = 0;
  double psnr_masked = 0.0;
  double psnr_full = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;  // image-major, then realization, then method

  /// Means over valid rows, one entry per method in first-seen order.
  std::vector<MethodSummary> summary() const;
  /// Columns: image,method,mask_type,mask_ratio,psnr_masked,psnr_full,ssim,status.
  void write_csv(const std::string& path) const;
  std::string csv() const;
  std::string table() const;
};

struct BenchmarkOptions {
  MaskSpec mask;
  int realizations = 1;  // masks per image
  std::uint64_t seed = 0;
  int jobs = 1;  // images processed concurrently
};

/// Builds masks, hides colour inside them, runs every method and scores the
/// result against the intact image. A throwing method marks its row failed.
MetricReport benchmark_decolorize(const std::vector<NamedImage>& images, const std::vector<BenchmarkMethod>& methods,
                                  const BenchmarkOptions& opts);

/// `image` with every masked pixel set to black.
RgbImage hide_masked_color(const RgbImage& image, const Mask& mask);

}  // namespace monofill
