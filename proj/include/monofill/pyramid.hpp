#pragma once

#include <vector>

#include "monofill/image.hpp"

namespace monofill {

/// Smallest side length allowed at the coarsest pyramid level.
inline constexpr Index kMinPyramidSide = 8;

struct PyramidLevel {
  GrayImage gray;
  RgbImage color;
  Mask mask;
};

/// Aligned gray/color/mask pyramids, coarsest level first.
struct PyramidSet {
  std::vector<PyramidLevel> levels;
  Index factor = 2;

  int height() const { return static_cast<int>(levels.size()); }
  const PyramidLevel& finest() const { return levels.back(); }
  const PyramidLevel& coarsest() const { return levels.front(); }
};

/// Largest pyramid height whose coarsest level keeps >= kMinPyramidSide pixels per side.
int max_pyramid_height(Index rows, Index cols, Index factor);

/// Finest level is the inputs themselves; coarser levels box-downsample the
/// images and max-pool the mask.
PyramidSet build_pyramids(const GrayImage& gray, const RgbImage& color, const Mask& mask, int height,
                          Index factor = 2);

/// Same, with the gray pyramid derived from `img` by to_monochrome.
PyramidSet build_pyramids(const RgbImage& img, const Mask& mask, int height, Index factor = 2);

}  // namespace monofill
