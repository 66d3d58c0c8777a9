#pragma once

#include <cstdint>
#include <numbers>
#include <vector>

#include "monofill/errors.hpp"
#include "monofill/image.hpp"

namespace monofill {

/// Free-form brush-stroke parameters. Defaults are tuned for 256x256 images;
/// use scaled_to() for other sizes.
struct MaskGenConfig {
  int min_strokes = 1;
  int max_strokes = 8;
  int min_width = 8;
  int max_width = 40;
  int max_vertices_per_stroke = 12;
  double max_turn_angle = std::numbers::pi / 2.0;
  double max_segment_length = 60.0;
  std::uint64_t seed = 0;

  /// Widths and segment lengths rescaled by min(height, width) / 256.
  MaskGenConfig scaled_to(Index height, Index width) const;
};

void validate(const MaskGenConfig& cfg);

struct BrushStroke {
  std::vector<Eigen::Vector2d> vertices;  // (row, col)
  double width = 1.0;
};

/// The strokes free_form_mask would rasterise for (height, width, cfg).
std::vector<BrushStroke> sample_strokes(Index height, Index width, const MaskGenConfig& cfg);

/// Marks every pixel whose centre lies within width/2 of a stroke segment
/// (thick polyline with disc caps).
void rasterize_stroke(const BrushStroke& stroke, Mask& mask);

/// Random-walk brush strokes; fully determined by (height, width, cfg).
Mask free_form_mask(Index height, Index width, const MaskGenConfig& cfg);

Mask rectangle_mask(Index height, Index width, Index top, Index left, Index rect_h, Index rect_w);

double mask_ratio(const Mask& mask);

/// One 4-neighbourhood dilation / erosion step. Image borders count as known.
Mask dilate_mask(const Mask& mask);
Mask erode_mask(const Mask& mask);

class UnreachableRatio : public NumericError {
 public:
  UnreachableRatio(double target, double achieved);
  double target() const noexcept { return target_; }
  double achieved() const noexcept { return achieved_; }

 private:
  double target_;
  double achieved_;
};

/// Grows or shrinks the missing region one boundary ring at a time until
/// |ratio - target| <= tol. The last ring is applied partially (raster
/// order) when a full ring would overshoot.
Mask scale_mask_to_ratio(const Mask& mask, double target, double tol, int max_steps = -1);

}  // namespace monofill
