#pragma once

#include <string>

#include "monofill/image.hpp"

namespace monofill {

// 8-bit PNG round trips. A stored byte v maps to v/255; writing rounds to
// the nearest byte. Gray files load as replicated RGB, color files load as
// RGB; alpha is dropped. All failures throw IoError naming the path.

RgbImage load_image(const std::string& path);
/// Loads any PNG and returns its luminance (gray files verbatim, color files via to_monochrome).
GrayImage load_gray(const std::string& path);
/// Loads a mask file; luminance byte >= 128 marks a missing pixel.
Mask load_mask(const std::string& path);

void save_image(const RgbImage& img, const std::string& path);
void save_gray(const GrayImage& img, const std::string& path);
/// Writes 255 for missing pixels, 0 for known.
void save_mask(const Mask& mask, const std::string& path);

inline std::uint8_t to_byte(double v) {
  const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<std::uint8_t>(clamped * 255.0 + 0.5);
}

}  // namespace monofill
