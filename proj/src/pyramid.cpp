#include "monofill/pyramid.hpp"

#include <algorithm>
#include <string>

#include "monofill/errors.hpp"

namespace monofill {

int max_pyramid_height(Index rows, Index cols, Index factor) {
  if (std::min(rows, cols) < kMinPyramidSide) return 0;
  int height = 1;
  Index r = rows, c = cols;
  while (factor > 1) {
    r = ceil_div(r, factor);
    c = ceil_div(c, factor);
    if (std::min(r, c) < kMinPyramidSide) break;
    ++height;
  }
  return factor > 1 ? height : 1 << 20;
}

PyramidSet build_pyramids(const GrayImage& gray, const RgbImage& color, const Mask& mask, int height,
                          Index factor) {
  require_same_size(gray, color, "build_pyramids gray/color");
  require_same_size(gray, mask, "build_pyramids gray/mask");
  if (height < 1) throw InvalidArgument("pyramid height must be >= 1, got " + std::to_string(height));
  if (factor < 1) throw InvalidArgument("pyramid factor must be >= 1, got " + std::to_string(factor));

  const int usable = max_pyramid_height(gray.height(), gray.width(), factor);
  if (height > usable) {
    Index r = gray.height(), c = gray.width();
    for (int i = 1; i < height; ++i) {
      r = ceil_div(r, factor);
      c = ceil_div(c, factor);
    }
    throw InvalidArgument("pyramid height " + std::to_string(height) + " on a " + std::to_string(gray.height()) +
                          "x" + std::to_string(gray.width()) + " image gives a " + std::to_string(r) + "x" +
                          std::to_string(c) + " coarsest level (minimum side " + std::to_string(kMinPyramidSide) +
                          "); largest usable height is " + std::to_string(usable));
  }

  PyramidSet set;
  set.factor = factor;
  set.levels.resize(static_cast<std::size_t>(height));
  set.levels.back() = {gray, color, mask};
  for (int n = height - 2; n >= 0; --n) {
    const PyramidLevel& finer = set.levels[static_cast<std::size_t>(n + 1)];
    set.levels[static_cast<std::size_t>(n)] = {box_downsample(finer.gray, factor),
                                               box_downsample(finer.color, factor),
                                               maxpool_mask_downsample(finer.mask, factor)};
  }
  return set;
}

PyramidSet build_pyramids(const RgbImage& img, const Mask& mask, int height, Index factor) {
  return build_pyramids(to_monochrome(img), img, mask, height, factor);
}

}  // namespace monofill
