#include "monofill/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "monofill/rng.hpp"

namespace monofill {

MaskGenConfig MaskGenConfig::scaled_to(Index height, Index width) const {
  const double s = static_cast<double>(std::min(height, width)) / 256.0;
  MaskGenConfig out = *this;
  out.min_width = std::max(1, static_cast<int>(std::lround(min_width * s)));
  out.max_width = std::max(out.min_width, static_cast<int>(std::lround(max_width * s)));
  out.max_segment_length = std::max(1.0, max_segment_length * s);
  return out;
}

void validate(const MaskGenConfig& cfg) {
  if (cfg.min_strokes < 0 || cfg.max_strokes < 0) throw InvalidArgument("stroke counts must be non-negative");
  if (cfg.max_strokes > 0 && cfg.min_strokes > cfg.max_strokes)
    throw InvalidArgument("min_strokes exceeds max_strokes");
  if (cfg.min_width < 1 || cfg.min_width > cfg.max_width) throw InvalidArgument("need 1 <= min_width <= max_width");
  if (cfg.max_vertices_per_stroke < 2) throw InvalidArgument("max_vertices_per_stroke must be >= 2");
  if (!(cfg.max_turn_angle >= 0.0)) throw InvalidArgument("max_turn_angle must be non-negative");
  if (!(cfg.max_segment_length >= 1.0)) throw InvalidArgument("max_segment_length must be >= 1");
}

std::vector<BrushStroke> sample_strokes(Index height, Index width, const MaskGenConfig& cfg) {
  if (height < 16 || width < 16)
    throw InvalidArgument("free-form masks need at least 16x16 pixels, got " + std::to_string(height) + "x" +
                          std::to_string(width));
  validate(cfg);
  SplitMix64 rng(derive_seed(cfg.seed, "free-form-mask"));
  const int strokes = cfg.max_strokes == 0 ? 0 : static_cast<int>(rng.uniform_int(cfg.min_strokes, cfg.max_strokes));
  const double max_row = static_cast<double>(height - 1);
  const double max_col = static_cast<double>(width - 1);

  std::vector<BrushStroke> out;
  out.reserve(static_cast<std::size_t>(strokes));
  for (int s = 0; s < strokes; ++s) {
    BrushStroke stroke;
    stroke.width = static_cast<double>(rng.uniform_int(cfg.min_width, cfg.max_width));
    const auto vertices = rng.uniform_int(2, cfg.max_vertices_per_stroke);
    Eigen::Vector2d p(rng.uniform(0.0, max_row), rng.uniform(0.0, max_col));
    double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    stroke.vertices.push_back(p);
    for (std::int64_t v = 1; v < vertices; ++v) {
      angle += rng.uniform(-cfg.max_turn_angle, cfg.max_turn_angle);
      const double length = rng.uniform(1.0, cfg.max_segment_length);
      p += length * Eigen::Vector2d(std::sin(angle), std::cos(angle));
      p = p.cwiseMax(Eigen::Vector2d::Zero()).cwiseMin(Eigen::Vector2d(max_row, max_col));
      stroke.vertices.push_back(p);
    }
    out.push_back(std::move(stroke));
  }
  return out;
}

void rasterize_stroke(const BrushStroke& stroke, Mask& mask) {
  const double radius = stroke.width / 2.0;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i + 1 < stroke.vertices.size(); ++i) {
    const Eigen::Vector2d a = stroke.vertices[i];
    const Eigen::Vector2d b = stroke.vertices[i + 1];
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const Index r0 = std::max<Index>(0, static_cast<Index>(std::floor(std::min(a.x(), b.x()) - radius)));
    const Index r1 = std::min<Index>(mask.height() - 1, static_cast<Index>(std::ceil(std::max(a.x(), b.x()) + radius)));
    const Index c0 = std::max<Index>(0, static_cast<Index>(std::floor(std::min(a.y(), b.y()) - radius)));
    const Index c1 = std::min<Index>(mask.width() - 1, static_cast<Index>(std::ceil(std::max(a.y(), b.y()) + radius)));
    for (Index r = r0; r <= r1; ++r) {
      for (Index c = c0; c <= c1; ++c) {
        const Eigen::Vector2d p(static_cast<double>(r), static_cast<double>(c));
        const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        if ((p - (a + t * ab)).squaredNorm() <= r2) mask(r, c) = 1;
      }
    }
  }
}

Mask free_form_mask(Index height, Index width, const MaskGenConfig& cfg) {
  Mask mask = make_mask(height, width);
  for (const BrushStroke& stroke : sample_strokes(height, width, cfg)) rasterize_stroke(stroke, mask);
  return mask;
}

Mask rectangle_mask(Index height, Index width, Index top, Index left, Index rect_h, Index rect_w) {
  if (top < 0 || left < 0 || rect_h < 0 || rect_w < 0 || top + rect_h > height || left + rect_w > width) {
    std::ostringstream msg;
    msg << "rectangle (" << top << ", " << left << ", " << rect_h << "x" << rect_w << ") does not fit a " << height
        << "x" << width << " image";
    throw InvalidArgument(msg.str());
  }
  Mask mask = make_mask(height, width);
  mask.values.block(top, left, rect_h, rect_w).setOnes();
  return mask;
}

double mask_ratio(const Mask& mask) {
  return static_cast<double>(mask.missing_count()) / static_cast<double>(mask.values.size());
}

namespace {

template <typename Pred>
std::vector<Index> collect(const Mask& mask, Pred pred) {
  std::vector<Index> out;
  for (Index r = 0; r < mask.height(); ++r)
    for (Index c = 0; c < mask.width(); ++c)
      if (pred(r, c)) out.push_back(r * mask.width() + c);
  return out;
}

bool has_neighbor_with(const Mask& mask, Index r, Index c, std::uint8_t value) {
  static constexpr int dr[4] = {-1, 1, 0, 0};
  static constexpr int dc[4] = {0, 0, -1, 1};
  for (int k = 0; k < 4; ++k) {
    const Index rr = r + dr[k], cc = c + dc[k];
    if (rr < 0 || cc < 0 || rr >= mask.height() || cc >= mask.width()) continue;
    if (mask(rr, cc) == value) return true;
  }
  return false;
}

// Known pixels touching the hole.
std::vector<Index> outer_ring(const Mask& mask) {
  return collect(mask, [&](Index r, Index c) { return mask(r, c) == 0 && has_neighbor_with(mask, r, c, 1); });
}

// Missing pixels touching known ones.
std::vector<Index> inner_ring(const Mask& mask) {
  return collect(mask, [&](Index r, Index c) { return mask(r, c) == 1 && has_neighbor_with(mask, r, c, 0); });
}

void assign(Mask& mask, const std::vector<Index>& pixels, std::size_t count, std::uint8_t value) {
  for (std::size_t i = 0; i < count && i < pixels.size(); ++i)
    mask.values(pixels[i] / mask.width(), pixels[i] % mask.width()) = value;
}

}  // namespace

Mask dilate_mask(const Mask& mask) {
  Mask out = mask;
  const auto ring = outer_ring(mask);
  assign(out, ring, ring.size(), 1);
  return out;
}

Mask erode_mask(const Mask& mask) {
  Mask out = mask;
  const auto ring = inner_ring(mask);
  assign(out, ring, ring.size(), 0);
  return out;
}

UnreachableRatio::UnreachableRatio(double target, double achieved)
    : NumericError("mask ratio " + std::to_string(target) + " unreachable; achieved " + std::to_string(achieved)),
      target_(target),
      achieved_(achieved) {}

Mask scale_mask_to_ratio(const Mask& mask, double target, double tol, int max_steps) {
  if (!(target > 0.0 && target < 1.0)) throw InvalidArgument("target ratio must lie in (0,1)");
  if (!(tol >= 0.0)) throw InvalidArgument("ratio tolerance must be non-negative");
  validate(mask);
  if (max_steps < 0) max_steps = static_cast<int>(2 * (mask.height() + mask.width()));

  const double total = static_cast<double>(mask.values.size());
  Mask out = mask;
  for (int step = 0; step <= max_steps; ++step) {
    const double ratio = mask_ratio(out);
    if (std::abs(ratio - target) <= tol) return out;
    if (step == max_steps) break;
    const bool grow = ratio < target;
    const auto ring = grow ? outer_ring(out) : inner_ring(out);
    if (ring.empty()) throw UnreachableRatio(target, ratio);
    const auto needed = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::abs(target - ratio) * total)));
    const auto slack = static_cast<std::size_t>(std::floor(tol * total));
    const std::size_t take = ring.size() <= needed + slack ? ring.size() : needed;
    assign(out, ring, take, grow ? 1 : 0);
  }
  throw UnreachableRatio(target, mask_ratio(out));
}

}  // namespace monofill
