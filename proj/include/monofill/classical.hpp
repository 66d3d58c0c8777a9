#pragma once

// Optimisation-based guided colorization: each channel U minimises
//   sum_r (U(r) - sum_s w_rs U(s))^2
// with U pinned at known pixels, where w_rs are intensity affinities over a
// small window. The reduced normal equations are solved by conjugate gradient.

#include <array>
#include <cstdint>
#include <functional>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "monofill/errors.hpp"
#include "monofill/image.hpp"

namespace monofill {

struct AffinitySystem {
  Index height = 0;
  Index width = 0;
  Index window_radius = 1;
  double sigma_floor = 0.01;
  /// Row r holds w_rs over the window around r (centre excluded); rows sum to 1.
  Eigen::SparseMatrix<double, Eigen::RowMajor> weights;
};

/// w_rs ~ exp(-(Y(r) - Y(s))^2 / (2 sigma_r^2)), sigma_r = max(local std of Y, sigma_floor),
/// with the local std taken over the (clipped) window including r.
AffinitySystem build_affinity(const GrayImage& gray, Index window_radius = 1, double sigma_floor = 0.01);

using LinearOperator = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& out)>;

struct CgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual_norm = 0.0;  // ||b - A x|| from the recurrence
  bool converged = false;
};

class CgBreakdown : public NumericError {
 public:
  explicit CgBreakdown(int iteration);
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

/// Conjugate gradient for a symmetric positive (semi-)definite operator.
/// Stops when ||r|| <= tol * ||b|| or after max_iters; `x0` seeds the iterate.
CgResult cg_solve(const LinearOperator& apply_a, const Eigen::VectorXd& b, double tol, int max_iters,
                  const Eigen::VectorXd* x0 = nullptr);

struct LevinOptions {
  Index window_radius = 1;
  double sigma_floor = 0.01;
  double tol = 1e-10;
  int max_iters = -1;  // -1: max(1000, 4 * unknowns)
};

struct LevinReport {
  RgbImage output;
  std::array<CgResult, 3> channels;  // x holds the unknowns in raster order
};

/// Solves each RGB channel independently; output clamped to [0,1] and equal to
/// known_color at known pixels. Throws NumericError naming the channel on
/// breakdown or non-convergence.
LevinReport levin_colorize_report(const GrayImage& gray, const RgbImage& known_color, const Mask& mask,
                                  const LevinOptions& opts = {});
RgbImage levin_colorize(const GrayImage& gray, const RgbImage& known_color, const Mask& mask,
                        const LevinOptions& opts = {});

/// Learning-free reference: every RGB channel harmonically filled on the hole.
RgbImage diffusion_colorize(const RgbImage& known_color, const Mask& mask);

}  // namespace monofill
