#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>

#include "monofill/resample.hpp"

namespace monofill {

using Plane = BasicPlane<double>;
using MaskPlane = BasicPlane<std::uint8_t>;

/// Single-channel luminance raster, values in [0,1].
struct GrayImage {
  Plane values;

  Index height() const { return values.rows(); }
  Index width() const { return values.cols(); }
  double operator()(Index r, Index c) const { return values(r, c); }
  double& operator()(Index r, Index c) { return values(r, c); }
};

/// RGB raster stored planar (one plane per channel), values in [0,1].
struct RgbImage {
  std::array<Plane, 3> channels;

  Index height() const { return channels[0].rows(); }
  Index width() const { return channels[0].cols(); }
  Eigen::Vector3d pixel(Index r, Index c) const {
    return {channels[0](r, c), channels[1](r, c), channels[2](r, c)};
  }
  void set_pixel(Index r, Index c, const Eigen::Vector3d& rgb) {
    for (int k = 0; k < 3; ++k) channels[k](r, c) = rgb[k];
  }
};

/// Binary raster, 1 = missing (hole), 0 = known.
struct Mask {
  MaskPlane values;

  Index height() const { return values.rows(); }
  Index width() const { return values.cols(); }
  std::uint8_t operator()(Index r, Index c) const { return values(r, c); }
  std::uint8_t& operator()(Index r, Index c) { return values(r, c); }
  Index missing_count() const { return values.cast<Index>().sum(); }
};

GrayImage make_gray(Index height, Index width, double fill = 0.0);
RgbImage make_rgb(Index height, Index width, const Eigen::Vector3d& fill = Eigen::Vector3d::Zero());
Mask make_mask(Index height, Index width, std::uint8_t fill = 0);

// Invariant checks; throw InvalidArgument describing the first violation.
void validate(const GrayImage& img);
void validate(const RgbImage& img);
void validate(const Mask& mask);
void require_same_size(Index h0, Index w0, Index h1, Index w1, const char* what);

template <typename A, typename B>
void require_same_size(const A& a, const B& b, const char* what) {
  require_same_size(a.height(), a.width(), b.height(), b.width(), what);
}

/// Luminance 0.30 R + 0.59 G + 0.11 B, clamped to [0,1].
inline constexpr double kLumaR = 0.30;
inline constexpr double kLumaG = 0.59;
inline constexpr double kLumaB = 0.11;

GrayImage to_monochrome(const RgbImage& img);
RgbImage gray_to_rgb(const GrayImage& img);

GrayImage box_downsample(const GrayImage& img, Index factor);
RgbImage box_downsample(const RgbImage& img, Index factor);

GrayImage bilinear_upsample(const GrayImage& img, Index out_h, Index out_w);
RgbImage bilinear_upsample(const RgbImage& img, Index out_h, Index out_w);

/// Block max: a block with any missing pixel is missing.
Mask maxpool_mask_downsample(const Mask& mask, Index factor);

/// Shifts each pixel's RGB so that its luminance matches `gray`, then clamps.
/// When a clamp engages, the residual shift is redistributed over the
/// channels that still have headroom, so the target is met whenever it is
/// reachable inside the unit cube.
RgbImage reattach_luminance(const RgbImage& colorized, const GrayImage& gray);

void clamp01(RgbImage& img);

}  // namespace monofill
