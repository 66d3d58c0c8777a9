#include "monofill/mono_completer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "monofill/image_io.hpp"

namespace monofill {

DiffusionNotConverged::DiffusionNotConverged(long iterations, double residual)
    : NumericError("diffusion fill did not converge after " + std::to_string(iterations) +
                   " sweeps (last max update " + std::to_string(residual) + ")"),
      iterations_(iterations),
      residual_(residual) {}

long default_diffusion_iterations(Index height, Index width) {
  const double span = static_cast<double>(height + width);
  return static_cast<long>(std::min(10.0 * span * span, 1.0e6));
}

MonoCompletion diffusion_fill(const GrayImage& gray, const Mask& mask, double tol, long max_iters) {
  validate(gray);
  validate(mask);
  require_same_size(gray, mask, "diffusion_fill");
  const Index known = mask.values.size() - mask.missing_count();
  if (known == 0) throw InvalidArgument("diffusion_fill needs at least one known pixel");
  if (!(tol > 0.0)) throw InvalidArgument("diffusion_fill tolerance must be positive");
  if (max_iters < 0) max_iters = default_diffusion_iterations(gray.height(), gray.width());

  MonoCompletion out{gray, MonoProvenance::DiffusionFill, std::nullopt, 0};
  Plane& u = out.gray.values;
  const Index h = u.rows(), w = u.cols();
  if (known == u.size()) return out;

  static constexpr int dr[4] = {-1, 1, 0, 0};
  static constexpr int dc[4] = {0, 0, -1, 1};
  std::vector<Index> colour[2];  // red/black hole pixels as r * w + c
  double boundary_sum = 0.0;
  Index boundary_count = 0;
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      if (mask(r, c)) {
        colour[(r + c) % 2].push_back(r * w + c);
        continue;
      }
      for (int k = 0; k < 4; ++k) {
        const Index rr = r + dr[k], cc = c + dc[k];
        if (rr >= 0 && cc >= 0 && rr < h && cc < w && mask(rr, cc)) {
          boundary_sum += u(r, c);
          ++boundary_count;
          break;
        }
      }
    }
  const double start = boundary_sum / static_cast<double>(boundary_count);
  for (const auto& list : colour)
    for (Index p : list) u(p / w, p % w) = start;

  double update = 0.0;
  for (long it = 1; it <= max_iters; ++it) {
    update = 0.0;
    for (const auto& list : colour) {
      for (Index p : list) {
        const Index r = p / w, c = p % w;
        double sum = 0.0;
        int count = 0;
        for (int k = 0; k < 4; ++k) {
          const Index rr = r + dr[k], cc = c + dc[k];
          if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
          sum += u(rr, cc);
          ++count;
        }
        const double next = sum / count;
        update = std::max(update, std::abs(next - u(r, c)));
        u(r, c) = next;
      }
    }
    if (update < tol) {
      out.iterations = it;
      return out;
    }
  }
  throw DiffusionNotConverged(max_iters, update);
}

MonoCompletion adopt_external_mono(GrayImage completed, const GrayImage& original, const Mask& mask, bool strict,
                                   const std::string& label) {
  validate(completed);
  if (completed.height() != original.height() || completed.width() != original.width()) {
    std::ostringstream msg;
    msg << label << ": monochrome is " << completed.height() << "x" << completed.width() << ", expected "
        << original.height() << "x" << original.width();
    throw InvalidArgument(msg.str());
  }
  require_same_size(original, mask, "external monochrome mask");

  double worst = 0.0;
  Index worst_r = -1, worst_c = -1;
  for (Index r = 0; r < original.height(); ++r)
    for (Index c = 0; c < original.width(); ++c) {
      if (mask(r, c)) continue;
      const double diff = std::abs(completed(r, c) - original(r, c));
      if (diff > worst) {
        worst = diff;
        worst_r = r;
        worst_c = c;
      }
      if (!strict) completed(r, c) = original(r, c);
    }
  if (strict && worst > kExternalMonoTolerance) {
    std::ostringstream msg;
    msg << label << ": known pixel (" << worst_r << ", " << worst_c << ") differs from the input monochrome by "
        << worst << " (limit " << kExternalMonoTolerance << ")";
    throw InvalidArgument(msg.str());
  }
  return {std::move(completed), MonoProvenance::ExternalFile, label, 0};
}

MonoCompletion load_external_mono(const std::string& path, const GrayImage& original, const Mask& mask,
                                  bool strict) {
  MonoCompletion out = adopt_external_mono(load_gray(path), original, mask, strict, path);
  out.source_path = path;
  return out;
}

}  // namespace monofill
