#include "monofill/diffnet/grad_check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "monofill/rng.hpp"

namespace monofill::diffnet {

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<Index> pick_coords(Index size, Index limit, SplitMix64& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(size));
  std::iota(idx.begin(), idx.end(), Index{0});
  if (limit <= 0 || limit >= size) return idx;
  for (Index i = 0; i < limit; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(i, size - 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(limit));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(std::span<const LayerSpec> specs, const Tensor<double>& input, double tol,
                           const GradCheckOptions& options) {
  SplitMix64 rng(derive_seed(options.seed, "grad-check"));
  NetworkParams<double> params = init_params<double>(specs, options.seed);
  for (auto& e : params.entries) {
    auto& v = e.value.data();
    if (ends_with(e.name, ".bias"))
      for (Index j = 0; j < v.size(); ++j) v[j] = rng.uniform(-0.1, 0.1);
    else if (ends_with(e.name, ".scale"))
      for (Index j = 0; j < v.size(); ++j) v[j] = rng.uniform(0.5, 1.5);
    else if (ends_with(e.name, ".shift"))
      for (Index j = 0; j < v.size(); ++j) v[j] = rng.uniform(-0.5, 0.5);
  }
  params.mark_modified();

  Tensor<double> projection(output_shape(specs, input.shape()));
  for (Index j = 0; j < projection.size(); ++j) projection.data()[j] = rng.uniform(-1.0, 1.0);

  auto loss = [&](NetworkParams<double>& p, const Tensor<double>& x, std::vector<bool>& kinks) {
    auto r = forward(p, specs, x, Mode::Train);
    kinks = kink_pattern(r.tape);
    return r.output.data().dot(projection.data());
  };
  // Central difference of loss along one coordinate. If a leaky-ReLU input
  // changes sign between the two probes the loss is not smooth over the
  // stencil, so the step shrinks (up to three times).
  std::vector<bool> kinks_up, kinks_down;
  auto central = [&](NetworkParams<double>& p, Tensor<double>& x, double& coord) {
    const double saved = coord;
    double h = options.step, estimate = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt, h /= 10.0) {
      coord = saved + h;
      const double up = loss(p, x, kinks_up);
      coord = saved - h;
      const double down = loss(p, x, kinks_down);
      coord = saved;
      estimate = (up - down) / (2 * h);
      if (kinks_up == kinks_down) break;
    }
    return estimate;
  };

  auto fwd = forward(params, specs, input, Mode::Train);
  const Gradients<double> analytic = backward(params, fwd.tape, projection, options.hooks);

  GradCheckReport report;
  report.tol = tol;
  auto rel_error = [&](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), options.abs_floor});
  };

  NetworkParams<double> work = params;
  Tensor<double> x = input;
  for (std::size_t i = 0; i < work.entries.size(); ++i) {
    if (!work.entries[i].trainable) continue;
    auto& v = work.entries[i].value.data();
    GradCheckEntry entry{work.entries[i].name, 0, 0.0};
    for (Index j : pick_coords(v.size(), options.max_coords_per_tensor, rng)) {
      const double numeric = central(work, x, v[j]);
      entry.max_rel_error = std::max(entry.max_rel_error, rel_error(analytic.params[i].data()[j], numeric));
      ++entry.coords_checked;
    }
    report.entries.push_back(entry);
  }

  GradCheckEntry in_entry{"input", 0, 0.0};
  for (Index j : pick_coords(x.size(), options.max_coords_per_tensor, rng)) {
    const double numeric = central(work, x, x.data()[j]);
    in_entry.max_rel_error = std::max(in_entry.max_rel_error, rel_error(analytic.input.data()[j], numeric));
    ++in_entry.coords_checked;
  }
  report.entries.push_back(in_entry);

  for (const auto& e : report.entries) report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
  report.passed = report.max_rel_error <= tol;
  return report;
}

std::vector<GradCheckCase> standard_grad_check_cases() {
  const Shape in{1, 4, 8, 8};
  return {
      {"conv3x3", {LayerSpec::conv3x3(4, 3)}, in, 0},
      {"conv1x1", {LayerSpec::conv1x1(4, 3)}, in, 0},
      {"batch-norm", {LayerSpec::batch_norm(4)}, in, 0},
      {"leaky-relu", {LayerSpec::leaky_relu(4)}, in, 0},
      {"residual-block", {LayerSpec::residual_block(4)}, in, 0},
      {"bilinear-up", {LayerSpec::bilinear_up(4)}, in, 0},
      {"box-down", {LayerSpec::box_down(4)}, in, 0},
      {"generator", generator_layers(4, 32, 9, 3), in, 48},
  };
}

std::vector<GradCheckOutcome> run_grad_check_suite(double tol, std::uint64_t seed, const BackwardHooks& hooks) {
  std::vector<GradCheckOutcome> out;
  std::uint64_t index = 0;
  for (const GradCheckCase& c : standard_grad_check_cases()) {
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(derive_seed(seed, "gradcheck-input", index));
    Tensor<double> x(c.input);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
    GradCheckOptions opts;
    opts.seed = derive_seed(seed, "gradcheck-params", index);
    opts.max_coords_per_tensor = c.max_coords_per_tensor;
    opts.hooks = hooks;
    GradCheckReport report = grad_check(c.specs, x, tol, opts);
    out.push_back({c.name, std::move(report),
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    ++index;
  }
  return out;
}

}  // namespace monofill::diffnet
