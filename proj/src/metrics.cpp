#include "monofill/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "monofill/errors.hpp"
#include "monofill/maskgen.hpp"
#include "monofill/rng.hpp"

namespace monofill {

namespace {

double psnr_from_mse(double mse) { return mse == 0.0 ? kPsnrIdentical : 10.0 * std::log10(1.0 / mse); }

Plane ssim_window(SsimWindow window) {
  if (window == SsimWindow::Uniform8) return Plane::Constant(8, 8, 1.0 / 64.0);
  constexpr double sigma = 1.5;
  Plane w(11, 11);
  for (Index y = 0; y < 11; ++y)
    for (Index x = 0; x < 11; ++x) {
      const double dy = static_cast<double>(y - 5), dx = static_cast<double>(x - 5);
      w(y, x) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  return w / w.sum();
}

}  // namespace

double psnr(const RgbImage& a, const RgbImage& b) {
  validate(a);
  validate(b);
  require_same_size(a, b, "psnr");
  double sum = 0.0;
  for (std::size_t c = 0; c < 3; ++c) sum += (a.channels[c] - b.channels[c]).square().sum();
  return psnr_from_mse(sum / (3.0 * static_cast<double>(a.channels[0].size())));
}

double psnr(const RgbImage& a, const RgbImage& b, const Mask& region) {
  validate(a);
  validate(b);
  validate(region);
  require_same_size(a, b, "psnr");
  require_same_size(a, region, "psnr region");
  const Index count = region.missing_count();
  if (count == 0) throw InvalidArgument("psnr over an empty region");
  double sum = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    sum += ((a.channels[c] - b.channels[c]).square() * region.values.cast<double>()).sum();
  return psnr_from_mse(sum / (3.0 * static_cast<double>(count)));
}

double psnr(const GrayImage& a, const GrayImage& b) {
  validate(a);
  validate(b);
  require_same_size(a, b, "psnr");
  return psnr_from_mse((a.values - b.values).square().mean());
}

double ssim(const GrayImage& a, const GrayImage& b, SsimWindow window) {
  validate(a);
  validate(b);
  require_same_size(a, b, "ssim");
  const Plane w = ssim_window(window);
  const Index k = w.rows();
  if (a.height() < k || a.width() < k)
    throw InvalidArgument("ssim: image " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                          " is smaller than the " + std::to_string(k) + "x" + std::to_string(k) + " window");
  const Plane aa = a.values * a.values, bb = b.values * b.values, ab = a.values * b.values;
  const Index rows = a.height() - k + 1, cols = a.width() - k + 1;
  double total = 0.0;
  for (Index y = 0; y < rows; ++y)
    for (Index x = 0; x < cols; ++x) {
      const double mu_a = (a.values.block(y, x, k, k) * w).sum();
      const double mu_b = (b.values.block(y, x, k, k) * w).sum();
      const double var_a = (aa.block(y, x, k, k) * w).sum() - mu_a * mu_a;
      const double var_b = (bb.block(y, x, k, k) * w).sum() - mu_b * mu_b;
      const double cov = (ab.block(y, x, k, k) * w).sum() - mu_a * mu_b;
      total += ((2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2)) /
               ((mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2));
    }
  return total / static_cast<double>(rows * cols);
}

double ssim(const RgbImage& a, const RgbImage& b, SsimWindow window) {
  return ssim(to_monochrome(a), to_monochrome(b), window);
}

std::string to_string(MaskType type) { return type == MaskType::Rect ? "rect" : "freeform"; }

MaskType parse_mask_type(const std::string& name) {
  if (name == "rect") return MaskType::Rect;
  if (name == "freeform") return MaskType::FreeForm;
  throw InvalidArgument("unknown mask type '" + name + "' (valid: rect, freeform)");
}

Mask benchmark_mask(Index height, Index width, const MaskSpec& spec, std::uint64_t seed) {
  if (!(spec.ratio > 0.0 && spec.ratio < 1.0)) throw InvalidArgument("mask ratio must lie in (0,1)");
  if (spec.type == MaskType::Rect) {
    const double side = std::sqrt(spec.ratio);
    const Index rh = std::clamp<Index>(std::lround(side * static_cast<double>(height)), 1, height);
    const Index rw = std::clamp<Index>(std::lround(side * static_cast<double>(width)), 1, width);
    SplitMix64 rng(derive_seed(seed, "rect-mask"));
    const Index top = rng.uniform_int(0, height - rh);
    const Index left = rng.uniform_int(0, width - rw);
    return rectangle_mask(height, width, top, left, rh, rw);
  }
  MaskGenConfig cfg;
  cfg.seed = derive_seed(seed, "freeform-mask");
  const Mask strokes = free_form_mask(height, width, cfg.scaled_to(height, width));
  return scale_mask_to_ratio(strokes, spec.ratio, spec.tolerance);
}

RgbImage hide_masked_color(const RgbImage& image, const Mask& mask) {
  require_same_size(image, mask, "hide_masked_color");
  RgbImage out = image;
  const Plane keep = (mask.values == 0).cast<double>();
  for (Plane& c : out.channels) c *= keep;
  return out;
}

namespace {

std::vector<MetricRow> run_image(const NamedImage& item, std::size_t image_index,
                                 const std::vector<BenchmarkMethod>& methods, const BenchmarkOptions& opts) {
  std::vector<MetricRow> rows;
  const RgbImage& truth = item.image;
  const GrayImage gray = to_monochrome(truth);
  for (int rz = 0; rz < opts.realizations; ++rz) {
    const std::uint64_t run_seed =
        derive_seed(derive_seed(opts.seed, "bench-image", image_index), "realization", static_cast<std::uint64_t>(rz));
    Mask mask;
    std::string mask_error;
    try {
      mask = benchmark_mask(truth.height(), truth.width(), opts.mask, run_seed);
    } catch (const std::exception& e) {
      mask_error = e.what();
    }
    const RgbImage known = mask_error.empty() ? hide_masked_color(truth, mask) : RgbImage{};
    for (const BenchmarkMethod& m : methods) {
      MetricRow row;
      row.image = item.name;
      row.method = m.name;
      row.mask_type = opts.mask.type;
      row.realization = rz;
      if (!mask_error.empty()) {
        row.status = "invalid: " + mask_error;
        rows.push_back(row);
        continue;
      }
      row.mask_ratio = mask_ratio(mask);
      if (mask.missing_count() == 0) {
        row.status = "invalid: zero-area mask";
        rows.push_back(row);
        continue;
      }
      try {
        const RgbImage out = m.run(gray, known, mask, run_seed);
        require_same_size(out, truth, "method output");
        row.psnr_masked = psnr(out, truth, mask);
        row.psnr_full = psnr(out, truth);
        row.ssim = ssim(out, truth);
      } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

MetricReport benchmark_decolorize(const std::vector<NamedImage>& images, const std::vector<BenchmarkMethod>& methods,
                                  const BenchmarkOptions& opts) {
  if (images.empty()) throw InvalidArgument("benchmark needs at least one image");
  if (methods.empty()) throw InvalidArgument("benchmark needs at least one method");
  if (opts.realizations < 1) throw InvalidArgument("benchmark needs at least one mask per image");
  if (opts.jobs < 1) throw InvalidArgument("job count must be >= 1");

  std::vector<std::vector<MetricRow>> per_image(images.size());
  std::size_t next = 0;
  std::mutex lock;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> g(lock);
        if (next == images.size()) return;
        i = next++;
      }
      per_image[i] = run_image(images[i], i, methods, opts);
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(opts.jobs), images.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MetricReport report;
  for (auto& rows : per_image)
    for (auto& r : rows) report.rows.push_back(std::move(r));
  return report;
}

std::vector<MethodSummary> MetricReport::summary() const {
  std::vector<MethodSummary> out;
  for (const MetricRow& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const MethodSummary& s) { return s.method == r.method; });
    if (it == out.end()) {
      out.push_back({r.method, r.mask_type, 0, 0, 0.0, 0.0, 0.0});
      it = out.end() - 1;
    }
    if (!r.ok()) {
      ++it->failed;
      continue;
    }
    ++it->rows;
    it->psnr_masked += r.psnr_masked;
    it->psnr_full += r.psnr_full;
    it->ssim += r.ssim;
  }
  for (MethodSummary& s : out)
    if (s.rows > 0) {
      s.psnr_masked /= s.rows;
      s.psnr_full /= s.rows;
      s.ssim /= s.rows;
    }
  return out;
}

std::string MetricReport::csv() const {
  std::ostringstream out;
  out << "image,method,mask_type,mask_ratio,psnr_masked,psnr_full,ssim,status\n";
  for (const MetricRow& r : rows)
    out << csv_field(r.image) << ',' << csv_field(r.method) << ',' << to_string(r.mask_type) << ','
        << format_double(r.mask_ratio) << ',' << format_double(r.psnr_masked) << ',' << format_double(r.psnr_full)
        << ',' << format_double(r.ssim) << ',' << csv_field(r.status) << '\n';
  for (const MethodSummary& s : summary())
    out << "mean," << csv_field(s.method) << ',' << to_string(s.mask_type) << ",," << format_double(s.psnr_masked)
        << ',' << format_double(s.psnr_full) << ',' << format_double(s.ssim) << ','
        << (s.failed ? std::to_string(s.failed) + " invalid or failed rows" : "ok") << '\n';
  return out.str();
}

void MetricReport::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << csv();
  if (!out) throw IoError(path, "write failed");
}

std::string MetricReport::table() const {
  std::ostringstream out;
  out << std::left << std::setw(20) << "image" << std::setw(14) << "method" << std::setw(10) << "mask"
      << std::right << std::setw(8) << "ratio" << std::setw(12) << "psnr_mask" << std::setw(12) << "psnr_full"
      << std::setw(9) << "ssim" << "  status\n";
  auto num = [&](double v, int width, int prec) {
    out << std::setw(width) << std::fixed << std::setprecision(prec) << v;
  };
  for (const MetricRow& r : rows) {
    out << std::left << std::setw(20) << r.image << std::setw(14) << r.method << std::setw(10)
        << to_string(r.mask_type) << std::right;
    num(r.mask_ratio, 8, 3);
    num(r.psnr_masked, 12, 2);
    num(r.psnr_full, 12, 2);
    num(r.ssim, 9, 4);
    out << "  " << r.status << '\n';
  }
  out << '\n';
  for (const MethodSummary& s : summary()) {
    out << std::left << std::setw(20) << "mean" << std::setw(14) << s.method << std::setw(10)
        << to_string(s.mask_type) << std::right << std::setw(8) << s.rows;
    num(s.psnr_masked, 12, 2);
    num(s.psnr_full, 12, 2);
    num(s.ssim, 9, 4);
    out << "  " << (s.failed ? std::to_string(s.failed) + " invalid or failed" : "ok") << '\n';
  }
  return out.str();
}

}  // namespace monofill
