#pragma once

// Sources of the completed monochrome that the colorizer consumes: either a
// file produced by an external inpainting model, or a learning-free harmonic
// fill of the hole.

#include <optional>
#include <string>

#include "monofill/errors.hpp"
#include "monofill/image.hpp"

namespace monofill {

enum class MonoProvenance { ExternalFile, DiffusionFill };

struct MonoCompletion {
  GrayImage gray;
  MonoProvenance provenance = MonoProvenance::DiffusionFill;
  std::optional<std::string> source_path;
  long iterations = 0;  // sweeps used by the diffusion fill
};

class DiffusionNotConverged : public NumericError {
 public:
  DiffusionNotConverged(long iterations, double residual);
  long iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  long iterations_;
  double residual_;
};

/// 10 (h + w)^2 sweeps, capped at one million.
long default_diffusion_iterations(Index height, Index width);

/// Harmonic fill: solves the 4-neighbour discrete Laplace equation on the
/// hole with known pixels as Dirichlet data, by red-black Gauss-Seidel
/// sweeps until the largest per-sweep update drops below `tol`. Neighbours
/// outside the image are skipped. Hole pixels start at the mean of the
/// known pixels bordering the hole, so every iterate stays within the
/// boundary's [min, max].
MonoCompletion diffusion_fill(const GrayImage& gray, const Mask& mask, double tol = 1e-5, long max_iters = -1);

inline constexpr double kExternalMonoTolerance = 2.0 / 255.0;

/// Loads an externally completed monochrome. Known pixels must agree with
/// `original` within 2/255: strict mode rejects a violation (naming the worst
/// pixel), non-strict mode overwrites known pixels with the original.
MonoCompletion load_external_mono(const std::string& path, const GrayImage& original, const Mask& mask,
                                  bool strict = true);

/// Same check applied to an in-memory image.
MonoCompletion adopt_external_mono(GrayImage completed, const GrayImage& original, const Mask& mask, bool strict,
                                   const std::string& label);

}  // namespace monofill
