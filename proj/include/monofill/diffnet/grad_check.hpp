#pragma once

#include <span>
#include <string>
#include <vector>

#include "monofill/diffnet/network.hpp"

namespace monofill::diffnet {

struct GradCheckOptions {
  std::uint64_t seed = 1;
  /// Central-difference step; shrunk per coordinate when a probe crosses a
  /// leaky-ReLU kink.
  double step = 1e-4;
  /// Relative error is |a - n| / max(|a|, |n|, abs_floor); the floor keeps
  /// roundoff on near-zero gradients from reading as relative error.
  double abs_floor = 1e-4;
  /// 0 checks every coordinate; otherwise a seeded sample of this many per tensor.
  Index max_coords_per_tensor = 0;
  BackwardHooks hooks;
};

struct GradCheckEntry {
  std::string name;  // parameter name, or "input"
  Index coords_checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tol = 0.0;
  bool passed = false;
};

/// Compares analytic gradients against central differences for the scalar
/// loss sum(output * R), R a fixed random tensor. Parameters are seeded
/// randomly (including non-trivial batch-norm scales/shifts and conv biases).
/// Runs in double precision and train mode.
GradCheckReport grad_check(std::span<const LayerSpec> specs, const Tensor<double>& input, double tol,
                           const GradCheckOptions& options = {});

struct GradCheckCase {
  std::string name;
  std::vector<LayerSpec> specs;
  Shape input;
  Index max_coords_per_tensor = 0;
};

/// One case per layer kind plus the default 9-block generator, all on
/// 1x4x8x8 inputs. The generator samples 48 coordinates per tensor.
std::vector<GradCheckCase> standard_grad_check_cases();

struct GradCheckOutcome {
  std::string name;
  GradCheckReport report;
  double seconds = 0.0;
};

std::vector<GradCheckOutcome> run_grad_check_suite(double tol, std::uint64_t seed, const BackwardHooks& hooks = {});

}  // namespace monofill::diffnet
