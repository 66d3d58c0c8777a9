#pragma once

// Sequential convolutional networks with exact reverse-mode gradients.
//
// A network is a list of LayerSpec plus a NetworkParams holding its tensors
// in a fixed order (see init_params). forward() records a Tape of the
// primitive ops it executed; backward() replays it in reverse. Residual
// blocks are lowered to primitive ops with an explicit skip stack.

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "monofill/diffnet/tensor.hpp"

namespace monofill::diffnet {

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

enum class LayerKind { Conv3x3, Conv1x1, BatchNorm, LeakyRelu, ResidualBlock, BilinearUp, BoxDown };

std::string_view to_string(LayerKind kind);

/// One layer. A residual block is conv3x3-bn-lrelu-conv3x3-bn, added to its
/// input and passed through a final leaky ReLU; it keeps the channel count.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv3x3;
  Index in_channels = 0;
  Index out_channels = 0;
  Index factor = 2;  // resampling layers only

  static LayerSpec conv3x3(Index in, Index out) { return {LayerKind::Conv3x3, in, out}; }
  static LayerSpec conv1x1(Index in, Index out) { return {LayerKind::Conv1x1, in, out}; }
  static LayerSpec batch_norm(Index c) { return {LayerKind::BatchNorm, c, c}; }
  static LayerSpec leaky_relu(Index c) { return {LayerKind::LeakyRelu, c, c}; }
  static LayerSpec residual_block(Index c) { return {LayerKind::ResidualBlock, c, c}; }
  static LayerSpec bilinear_up(Index c, Index factor = 2) { return {LayerKind::BilinearUp, c, c, factor}; }
  static LayerSpec box_down(Index c, Index factor = 2) { return {LayerKind::BoxDown, c, c, factor}; }
};

template <typename Scalar>
struct ParamTensor {
  std::string name;
  Tensor<Scalar> value;
  bool trainable = true;  // batch-norm running statistics are not
};

/// Parameter tensors of a network, in init_params order. Every object gets a
/// fresh identity on construction and a version that advances whenever the
/// trainable values change through the optimizer (or mark_modified()), so
/// tapes recorded against older values are detected as stale.
template <typename Scalar>
class NetworkParams {
 public:
  std::vector<ParamTensor<Scalar>> entries;

  NetworkParams() : id_(next_id()) {}
  NetworkParams(const NetworkParams& other) : entries(other.entries), id_(next_id()) {}
  NetworkParams(NetworkParams&& other) noexcept : entries(std::move(other.entries)), id_(next_id()) {}
  NetworkParams& operator=(const NetworkParams& other) {
    entries = other.entries;
    ++version_;
    return *this;
  }
  NetworkParams& operator=(NetworkParams&& other) noexcept {
    entries = std::move(other.entries);
    ++version_;
    return *this;
  }

  std::uint64_t id() const { return id_; }
  std::uint64_t version() const { return version_; }
  void mark_modified() { ++version_; }

  Index trainable_count() const {
    Index total = 0;
    for (const auto& e : entries)
      if (e.trainable) total += e.value.size();
    return total;
  }
  Index total_count() const {
    Index total = 0;
    for (const auto& e : entries) total += e.value.size();
    return total;
  }

 private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
  }

  std::uint64_t id_;
  std::uint64_t version_ = 0;
};

/// Spatial output shape of the network for a given input shape. Throws
/// InvalidArgument naming the first layer whose channel count disagrees.
/// conv3x3(in -> features) + batch-norm + leaky-relu, `blocks` residual
/// blocks, then conv1x1(features -> out).
std::vector<LayerSpec> generator_layers(Index in, Index features, int blocks, Index out);

Shape output_shape(std::span<const LayerSpec> specs, const Shape& input);

/// Allocates parameters in layer order. Conv kernels (shape out x in x k x k)
/// are fan-in scaled uniform with bound sqrt(6 / ((1 + slope^2) fan_in));
/// conv biases and batch-norm shifts start at 0, scales and running
/// variances at 1, running means at 0.
template <typename Scalar>
NetworkParams<Scalar> init_params(std::span<const LayerSpec> specs, std::uint64_t seed);

enum class Mode { Train, Eval };

namespace detail {
template <typename Scalar>
struct OpCache;
}

/// Activation record of one forward pass.
template <typename Scalar>
struct Tape {
  std::vector<detail::OpCache<Scalar>> caches;
  std::vector<LayerSpec> specs;
  Shape input_shape;
  Shape output_shape;
  Mode mode = Mode::Eval;
  std::uint64_t params_id = 0;
  std::uint64_t params_version = 0;

  Tape();
  ~Tape();
  Tape(Tape&&) noexcept;
  Tape& operator=(Tape&&) noexcept;
  bool empty() const;
};

template <typename Scalar>
struct ForwardResult {
  Tensor<Scalar> output;
  Tape<Scalar> tape;
};

/// Runs the network. Train mode normalises with batch statistics and updates
/// the running statistics stored in `params`; eval mode uses the running
/// statistics and records no activations.
template <typename Scalar>
ForwardResult<Scalar> forward(NetworkParams<Scalar>& params, std::span<const LayerSpec> specs,
                              const Tensor<Scalar>& input, Mode mode);

template <typename Scalar>
struct Gradients {
  std::vector<Tensor<Scalar>> params;  // aligned with NetworkParams::entries; zeros for non-trainable
  Tensor<Scalar> input;
};

/// Test-only fault injection for negative controls.
struct BackwardHooks {
  bool corrupt_leaky_relu = false;  // use a wrong negative slope in the leaky-ReLU adjoint
};

/// Whether each leaky-ReLU input on a train-mode tape was positive, in tape
/// order. Finite-difference checks compare these to detect kink crossings.
template <typename Scalar>
std::vector<bool> kink_pattern(const Tape<Scalar>& tape);

/// Exact gradients of <grad_out, output> with respect to every parameter and
/// the input. Throws InvalidState for an empty tape, an eval-mode tape, or a
/// tape recorded against different or since-modified parameters.
template <typename Scalar>
Gradients<Scalar> backward(const NetworkParams<Scalar>& params, const Tape<Scalar>& tape,
                           const Tensor<Scalar>& grad_out, const BackwardHooks& hooks = {});

#define MONOFILL_DIFFNET_EXTERN(S)                                                                               \
  extern template NetworkParams<S> init_params<S>(std::span<const LayerSpec>, std::uint64_t);                   \
  extern template struct Tape<S>;                                                                                \
  extern template ForwardResult<S> forward<S>(NetworkParams<S>&, std::span<const LayerSpec>, const Tensor<S>&, \
                                              Mode);                                                             \
  extern template Gradients<S> backward<S>(const NetworkParams<S>&, const Tape<S>&, const Tensor<S>&,           \
                                           const BackwardHooks&);                                          \
  extern template std::vector<bool> kink_pattern<S>(const Tape<S>&);
MONOFILL_DIFFNET_EXTERN(float)
MONOFILL_DIFFNET_EXTERN(double)
#undef MONOFILL_DIFFNET_EXTERN

}  // namespace monofill::diffnet
