#include "monofill/image.hpp"

#include <cmath>
#include <string>

#include "monofill/errors.hpp"

namespace monofill {

namespace {

void require_positive_dims(Index h, Index w, const char* what) {
  if (h < 1 || w < 1)
    throw InvalidArgument(std::string(what) + ": dimensions must be positive, got " + std::to_string(h) + "x" +
                          std::to_string(w));
}

void require_unit_range(const Plane& p, const char* what) {
  if (!p.allFinite() || (p < 0.0).any() || (p > 1.0).any())
    throw InvalidArgument(std::string(what) + ": values must lie in [0,1]");
}

void require_factor(Index factor, Index h, Index w) {
  if (factor < 1) throw InvalidArgument("downsample factor must be >= 1, got " + std::to_string(factor));
  if (h < factor || w < factor)
    throw InvalidArgument("image " + std::to_string(h) + "x" + std::to_string(w) + " smaller than factor " +
                          std::to_string(factor));
}

Plane downsample_plane(const Plane& src, Index factor) {
  Plane dst(ceil_div(src.rows(), factor), ceil_div(src.cols(), factor));
  box_downsample_into(src, factor, dst);
  return dst;
}

Plane upsample_plane(const Plane& src, Index out_h, Index out_w) {
  if (out_h < src.rows() || out_w < src.cols())
    throw InvalidArgument("bilinear_upsample target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                          " is smaller than source " + std::to_string(src.rows()) + "x" +
                          std::to_string(src.cols()));
  Plane dst(out_h, out_w);
  bilinear_resize_into(src, dst);
  return dst;
}

}  // namespace

GrayImage make_gray(Index height, Index width, double fill) {
  require_positive_dims(height, width, "make_gray");
  return {Plane::Constant(height, width, fill)};
}

RgbImage make_rgb(Index height, Index width, const Eigen::Vector3d& fill) {
  require_positive_dims(height, width, "make_rgb");
  RgbImage img;
  for (int k = 0; k < 3; ++k) img.channels[k] = Plane::Constant(height, width, fill[k]);
  return img;
}

Mask make_mask(Index height, Index width, std::uint8_t fill) {
  require_positive_dims(height, width, "make_mask");
  return {MaskPlane::Constant(height, width, fill ? 1 : 0)};
}

void validate(const GrayImage& img) {
  require_positive_dims(img.height(), img.width(), "gray image");
  require_unit_range(img.values, "gray image");
}

void validate(const RgbImage& img) {
  require_positive_dims(img.height(), img.width(), "rgb image");
  for (const Plane& p : img.channels) {
    if (p.rows() != img.height() || p.cols() != img.width())
      throw InvalidArgument("rgb image: channel planes differ in size");
    require_unit_range(p, "rgb image");
  }
}

void validate(const Mask& mask) {
  require_positive_dims(mask.height(), mask.width(), "mask");
  if ((mask.values > 1).any()) throw InvalidArgument("mask: values must be 0 or 1");
}

void require_same_size(Index h0, Index w0, Index h1, Index w1, const char* what) {
  if (h0 != h1 || w0 != w1)
    throw InvalidArgument(std::string(what) + ": dimension mismatch " + std::to_string(h0) + "x" +
                          std::to_string(w0) + " vs " + std::to_string(h1) + "x" + std::to_string(w1));
}

GrayImage to_monochrome(const RgbImage& img) {
  const auto& c = img.channels;
  return {(kLumaR * c[0] + kLumaG * c[1] + kLumaB * c[2]).cwiseMax(0.0).cwiseMin(1.0)};
}

RgbImage gray_to_rgb(const GrayImage& img) { return {{img.values, img.values, img.values}}; }

GrayImage box_downsample(const GrayImage& img, Index factor) {
  require_factor(factor, img.height(), img.width());
  return {downsample_plane(img.values, factor)};
}

RgbImage box_downsample(const RgbImage& img, Index factor) {
  require_factor(factor, img.height(), img.width());
  RgbImage out;
  for (int k = 0; k < 3; ++k) out.channels[k] = downsample_plane(img.channels[k], factor);
  return out;
}

GrayImage bilinear_upsample(const GrayImage& img, Index out_h, Index out_w) {
  return {upsample_plane(img.values, out_h, out_w)};
}

RgbImage bilinear_upsample(const RgbImage& img, Index out_h, Index out_w) {
  RgbImage out;
  for (int k = 0; k < 3; ++k) out.channels[k] = upsample_plane(img.channels[k], out_h, out_w);
  return out;
}

Mask maxpool_mask_downsample(const Mask& mask, Index factor) {
  if (factor < 1) throw InvalidArgument("downsample factor must be >= 1, got " + std::to_string(factor));
  Mask out{MaskPlane::Zero(ceil_div(mask.height(), factor), ceil_div(mask.width(), factor))};
  for (Index r = 0; r < mask.height(); ++r)
    for (Index c = 0; c < mask.width(); ++c)
      if (mask(r, c)) out(r / factor, c / factor) = 1;
  return out;
}

RgbImage reattach_luminance(const RgbImage& colorized, const GrayImage& gray) {
  require_same_size(colorized, gray, "reattach_luminance");
  const Eigen::Vector3d weights(kLumaR, kLumaG, kLumaB);
  RgbImage out = colorized;
  for (Index r = 0; r < out.height(); ++r) {
    for (Index c = 0; c < out.width(); ++c) {
      Eigen::Vector3d px = colorized.pixel(r, c);
      const double target = gray(r, c);
      // Each pass either meets the target or pins at least one more channel.
      for (int pass = 0; pass < 3; ++pass) {
        const double residual = target - weights.dot(px);
        if (std::abs(residual) <= 1e-12) break;
        double free_weight = 0.0;
        for (int k = 0; k < 3; ++k)
          if ((residual > 0 && px[k] < 1.0) || (residual < 0 && px[k] > 0.0)) free_weight += weights[k];
        if (free_weight <= 0.0) break;
        // An equal shift on every free channel moves luminance by shift * free_weight.
        const double shift = residual / free_weight;
        for (int k = 0; k < 3; ++k)
          if ((residual > 0 && px[k] < 1.0) || (residual < 0 && px[k] > 0.0))
            px[k] = std::clamp(px[k] + shift, 0.0, 1.0);
      }
      out.set_pixel(r, c, px);
    }
  }
  return out;
}

void clamp01(RgbImage& img) {
  for (Plane& p : img.channels) p = p.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace monofill
