#include "monofill/classical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "monofill/mono_completer.hpp"

namespace monofill {

AffinitySystem build_affinity(const GrayImage& gray, Index window_radius, double sigma_floor) {
  validate(gray);
  if (window_radius < 1) throw InvalidArgument("affinity window radius must be >= 1");
  if (!(sigma_floor > 0.0)) throw InvalidArgument("affinity sigma floor must be positive");
  const Index h = gray.height(), w = gray.width(), n = h * w;
  const Index side = 2 * window_radius + 1;

  AffinitySystem sys{h, w, window_radius, sigma_floor, {}};
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n * (side * side - 1)));
  std::vector<std::pair<Index, double>> row;
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      const Index r0 = std::max<Index>(0, r - window_radius), r1 = std::min(h - 1, r + window_radius);
      const Index c0 = std::max<Index>(0, c - window_radius), c1 = std::min(w - 1, c + window_radius);
      double sum = 0.0, sq = 0.0;
      for (Index y = r0; y <= r1; ++y)
        for (Index x = c0; x <= c1; ++x) {
          sum += gray(y, x);
          sq += gray(y, x) * gray(y, x);
        }
      const double count = static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
      const double mean = sum / count;
      const double sigma = std::max(std::sqrt(std::max(0.0, sq / count - mean * mean)), sigma_floor);
      const double centre = gray(r, c);

      row.clear();
      double total = 0.0;
      for (Index y = r0; y <= r1; ++y)
        for (Index x = c0; x <= c1; ++x) {
          if (y == r && x == c) continue;
          const double d = gray(y, x) - centre;
          const double wt = std::exp(-d * d / (2.0 * sigma * sigma));
          row.emplace_back(y * w + x, wt);
          total += wt;
        }
      // total > 0 unless every neighbour underflows; fall back to uniform then.
      for (auto& [col, wt] : row)
        triplets.emplace_back(r * w + c, col, total > 0.0 ? wt / total : 1.0 / static_cast<double>(row.size()));
    }
  sys.weights.resize(n, n);
  sys.weights.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

CgBreakdown::CgBreakdown(int iteration)
    : NumericError("conjugate gradient broke down at iteration " + std::to_string(iteration) +
                   " (non-positive curvature)"),
      iteration_(iteration) {}

CgResult cg_solve(const LinearOperator& apply_a, const Eigen::VectorXd& b, double tol, int max_iters,
                  const Eigen::VectorXd* x0) {
  if (!(tol > 0.0)) throw InvalidArgument("cg tolerance must be positive");
  if (max_iters < 0) throw InvalidArgument("cg iteration limit must be non-negative");
  CgResult res;
  res.x = x0 ? *x0 : Eigen::VectorXd::Zero(b.size());
  if (res.x.size() != b.size()) throw InvalidArgument("cg initial guess has the wrong length");
  if (b.squaredNorm() == 0.0) {
    res.x.setZero();
    res.converged = true;
    return res;
  }

  Eigen::VectorXd r = b, ap(b.size());
  if (x0) {
    apply_a(res.x, ap);
    r -= ap;
  }
  const double target = tol * b.norm();
  double rr = r.squaredNorm();
  res.residual_norm = std::sqrt(rr);
  if (res.residual_norm <= target) {
    res.converged = true;
    return res;
  }
  Eigen::VectorXd p = r;
  for (int it = 1; it <= max_iters; ++it) {
    apply_a(p, ap);
    const double curvature = p.dot(ap);
    if (!(curvature > std::numeric_limits<double>::min() * p.squaredNorm())) throw CgBreakdown(it);
    const double alpha = rr / curvature;
    res.x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    res.iterations = it;
    res.residual_norm = std::sqrt(rr_next);
    if (res.residual_norm <= target) {
      res.converged = true;
      return res;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return res;
}

LevinReport levin_colorize_report(const GrayImage& gray, const RgbImage& known_color, const Mask& mask,
                                  const LevinOptions& opts) {
  validate(gray);
  validate(known_color);
  validate(mask);
  require_same_size(gray, known_color, "levin gray/color");
  require_same_size(gray, mask, "levin gray/mask");
  const Index n = mask.values.size();
  const Index unknown = mask.missing_count();
  if (unknown == n) throw InvalidArgument("levin colorization needs at least one known pixel");

  LevinReport report{known_color, {}};
  if (unknown == 0) return report;

  const AffinitySystem sys = build_affinity(gray, opts.window_radius, opts.sigma_floor);
  Eigen::SparseMatrix<double> a(n, n);
  a.setIdentity();
  a -= Eigen::SparseMatrix<double>(sys.weights);
  a.makeCompressed();
  const Eigen::SparseMatrix<double> at = a.transpose();

  std::vector<Index> index;  // unknown slot -> raster index
  index.reserve(static_cast<std::size_t>(unknown));
  const Index w = mask.width();
  for (Index p = 0; p < n; ++p)
    if (mask(p / w, p % w)) index.push_back(p);

  // Normal equations of min ||A U||^2 over the unknowns:
  //   A_u^T A_u x = -A_u^T A_k u_k
  Eigen::VectorXd full(n), tmp(n), back(n);
  const LinearOperator normal = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    full.setZero();
    for (Index i = 0; i < unknown; ++i) full[index[static_cast<std::size_t>(i)]] = x[i];
    tmp.noalias() = a * full;
    back.noalias() = at * tmp;
    out.resize(unknown);
    for (Index i = 0; i < unknown; ++i) out[i] = back[index[static_cast<std::size_t>(i)]];
  };
  const int max_iters =
      opts.max_iters >= 0 ? opts.max_iters : static_cast<int>(std::max<Index>(1000, 4 * unknown));

  static constexpr const char* kNames[3] = {"R", "G", "B"};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const Plane& plane = known_color.channels[ch];
    Eigen::VectorXd known_full(n);
    double known_sum = 0.0;
    for (Index p = 0; p < n; ++p) {
      const bool missing = mask(p / w, p % w) != 0;
      known_full[p] = missing ? 0.0 : plane(p / w, p % w);
      if (!missing) known_sum += known_full[p];
    }
    const Eigen::VectorXd ak = a * known_full;
    const Eigen::VectorXd rhs_full = at * ak;
    Eigen::VectorXd rhs(unknown);
    for (Index i = 0; i < unknown; ++i) rhs[i] = -rhs_full[index[static_cast<std::size_t>(i)]];
    const Eigen::VectorXd start = Eigen::VectorXd::Constant(unknown, known_sum / static_cast<double>(n - unknown));

    CgResult cg;
    try {
      cg = cg_solve(normal, rhs, opts.tol, max_iters, &start);
    } catch (const CgBreakdown& e) {
      throw NumericError(std::string("levin channel ") + kNames[ch] + ": " + e.what());
    }
    if (!cg.converged)
      throw NumericError(std::string("levin channel ") + kNames[ch] + ": conjugate gradient stopped after " +
                         std::to_string(cg.iterations) + " iterations with residual " +
                         std::to_string(cg.residual_norm));
    Plane& out = report.output.channels[ch];
    for (Index i = 0; i < unknown; ++i) {
      const Index p = index[static_cast<std::size_t>(i)];
      out(p / w, p % w) = std::clamp(cg.x[i], 0.0, 1.0);
    }
    report.channels[ch] = std::move(cg);
  }
  return report;
}

RgbImage levin_colorize(const GrayImage& gray, const RgbImage& known_color, const Mask& mask,
                        const LevinOptions& opts) {
  return levin_colorize_report(gray, known_color, mask, opts).output;
}

RgbImage diffusion_colorize(const RgbImage& known_color, const Mask& mask) {
  validate(known_color);
  RgbImage out = known_color;
  for (std::size_t ch = 0; ch < 3; ++ch)
    out.channels[ch] = diffusion_fill(GrayImage{known_color.channels[ch]}, mask).gray.values;
  return out;
}

}  // namespace monofill
