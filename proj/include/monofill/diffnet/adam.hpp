#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "monofill/diffnet/network.hpp"
#include "monofill/errors.hpp"

namespace monofill::diffnet {

struct TrainHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t iterations = 1;
  std::uint64_t seed = 0;
};

inline void validate(const TrainHyper& h) {
  if (!(h.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(h.beta1 > 0.0 && h.beta1 < 1.0) || !(h.beta2 > 0.0 && h.beta2 < 1.0))
    throw InvalidArgument("Adam betas must lie in (0,1)");
  if (!(h.epsilon > 0.0)) throw InvalidArgument("Adam epsilon must be positive");
  if (h.iterations < 1) throw InvalidArgument("iterations must be >= 1");
}

/// First/second moment accumulators, lazily shaped on the first step.
template <typename Scalar>
struct AdamState {
  std::vector<typename Tensor<Scalar>::Vector> first;
  std::vector<typename Tensor<Scalar>::Vector> second;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update of every trainable entry. Gradients are
/// checked for finiteness before anything is modified.
template <typename Scalar>
void adam_step(NetworkParams<Scalar>& params, const Gradients<Scalar>& grads, AdamState<Scalar>& state,
               const TrainHyper& hyper) {
  validate(hyper);
  if (grads.params.size() != params.entries.size())
    throw InvalidArgument("gradient list does not match parameter list");
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    if (grads.params[i].shape() != params.entries[i].value.shape())
      throw InvalidArgument("gradient shape mismatch for " + params.entries[i].name);
    if (params.entries[i].trainable && !grads.params[i].all_finite())
      throw NumericError("non-finite gradient for parameter " + params.entries[i].name);
  }
  if (state.first.empty()) {
    for (const auto& e : params.entries) {
      state.first.push_back(Tensor<Scalar>::Vector::Zero(e.value.size()));
      state.second.push_back(Tensor<Scalar>::Vector::Zero(e.value.size()));
    }
  } else if (state.first.size() != params.entries.size()) {
    throw InvalidArgument("Adam state belongs to a different network");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const Scalar b1 = static_cast<Scalar>(hyper.beta1), b2 = static_cast<Scalar>(hyper.beta2);
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(hyper.beta1, t));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(hyper.beta2, t));
  const Scalar lr = static_cast<Scalar>(hyper.learning_rate), eps = static_cast<Scalar>(hyper.epsilon);
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    if (!params.entries[i].trainable) continue;
    const auto& g = grads.params[i].data();
    auto& m = state.first[i];
    auto& v = state.second[i];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    params.entries[i].value.data().array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
  params.mark_modified();
}

}  // namespace monofill::diffnet
