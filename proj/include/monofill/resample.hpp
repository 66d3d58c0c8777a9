#pragma once

// Resampling kernels shared by raster images (double planes) and network
// tensors (float/double channel planes). Everything operates on row-major
// Eigen expressions so callers can pass owning arrays or Maps.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

namespace monofill {

using Eigen::Index;

template <typename Scalar>
using BasicPlane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

/// One output sample of corner-aligned linear interpolation.
struct LinearTap {
  Index lo = 0;
  Index hi = 0;
  double frac = 0.0;  // weight of `hi`
};

/// Corner-aligned taps: output 0 samples input 0, output out-1 samples input in-1.
inline std::vector<LinearTap> corner_aligned_taps(Index in, Index out) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(out));
  for (Index i = 0; i < out; ++i) {
    const double pos =
        (out > 1 && in > 1) ? static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1)
                            : 0.0;
    Index lo = static_cast<Index>(std::floor(pos));
    lo = std::clamp<Index>(lo, 0, in - 1);
    const Index hi = std::min<Index>(lo + 1, in - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, hi == lo ? 0.0 : pos - static_cast<double>(lo)};
  }
  return taps;
}

template <typename In, typename Out>
void bilinear_resize_into(const Eigen::DenseBase<In>& src, Eigen::DenseBase<Out>& dst) {
  using Scalar = typename Out::Scalar;
  const auto ty = corner_aligned_taps(src.rows(), dst.rows());
  const auto tx = corner_aligned_taps(src.cols(), dst.cols());
  for (Index y = 0; y < dst.rows(); ++y) {
    const LinearTap& a = ty[static_cast<std::size_t>(y)];
    const Scalar fy = static_cast<Scalar>(a.frac);
    for (Index x = 0; x < dst.cols(); ++x) {
      const LinearTap& b = tx[static_cast<std::size_t>(x)];
      const Scalar fx = static_cast<Scalar>(b.frac);
      const Scalar top = (Scalar(1) - fx) * src(a.lo, b.lo) + fx * src(a.lo, b.hi);
      const Scalar bottom = (Scalar(1) - fx) * src(a.hi, b.lo) + fx * src(a.hi, b.hi);
      dst(y, x) = (Scalar(1) - fy) * top + fy * bottom;
    }
  }
}

/// Adjoint of bilinear_resize_into: scatters `grad_out` back onto `grad_in` (accumulating).
template <typename In, typename Out>
void bilinear_resize_adjoint(const Eigen::DenseBase<In>& grad_out, Eigen::DenseBase<Out>& grad_in) {
  using Scalar = typename Out::Scalar;
  const auto ty = corner_aligned_taps(grad_in.rows(), grad_out.rows());
  const auto tx = corner_aligned_taps(grad_in.cols(), grad_out.cols());
  for (Index y = 0; y < grad_out.rows(); ++y) {
    const LinearTap& a = ty[static_cast<std::size_t>(y)];
    const Scalar fy = static_cast<Scalar>(a.frac);
    for (Index x = 0; x < grad_out.cols(); ++x) {
      const LinearTap& b = tx[static_cast<std::size_t>(x)];
      const Scalar fx = static_cast<Scalar>(b.frac);
      const Scalar g = grad_out(y, x);
      grad_in(a.lo, b.lo) += (Scalar(1) - fy) * (Scalar(1) - fx) * g;
      grad_in(a.lo, b.hi) += (Scalar(1) - fy) * fx * g;
      grad_in(a.hi, b.lo) += fy * (Scalar(1) - fx) * g;
      grad_in(a.hi, b.hi) += fy * fx * g;
    }
  }
}

/// Block mean; `dst` must be ceil(rows/factor) x ceil(cols/factor). Ragged edge
/// blocks average only their in-bounds pixels.
template <typename In, typename Out>
void box_downsample_into(const Eigen::DenseBase<In>& src, Index factor, Eigen::DenseBase<Out>& dst) {
  using Scalar = typename Out::Scalar;
  for (Index y = 0; y < dst.rows(); ++y) {
    const Index y0 = y * factor;
    const Index bh = std::min(factor, src.rows() - y0);
    for (Index x = 0; x < dst.cols(); ++x) {
      const Index x0 = x * factor;
      const Index bw = std::min(factor, src.cols() - x0);
      Scalar sum(0);
      for (Index i = 0; i < bh; ++i)
        for (Index j = 0; j < bw; ++j) sum += src(y0 + i, x0 + j);
      dst(y, x) = sum / static_cast<Scalar>(bh * bw);
    }
  }
}

/// Adjoint of box_downsample_into (accumulating).
template <typename In, typename Out>
void box_downsample_adjoint(const Eigen::DenseBase<In>& grad_out, Index factor, Eigen::DenseBase<Out>& grad_in) {
  using Scalar = typename Out::Scalar;
  for (Index y = 0; y < grad_out.rows(); ++y) {
    const Index y0 = y * factor;
    const Index bh = std::min(factor, grad_in.rows() - y0);
    for (Index x = 0; x < grad_out.cols(); ++x) {
      const Index x0 = x * factor;
      const Index bw = std::min(factor, grad_in.cols() - x0);
      const Scalar share = grad_out(y, x) / static_cast<Scalar>(bh * bw);
      for (Index i = 0; i < bh; ++i)
        for (Index j = 0; j < bw; ++j) grad_in(y0 + i, x0 + j) += share;
    }
  }
}

}  // namespace monofill
