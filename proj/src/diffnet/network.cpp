#include "monofill/diffnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

#include "monofill/errors.hpp"
#include "monofill/resample.hpp"
#include "monofill/rng.hpp"

namespace monofill::diffnet {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv3x3: return "conv3x3";
    case LayerKind::Conv1x1: return "conv1x1";
    case LayerKind::BatchNorm: return "batch-norm";
    case LayerKind::LeakyRelu: return "leaky-relu";
    case LayerKind::ResidualBlock: return "residual-block";
    case LayerKind::BilinearUp: return "bilinear-up";
    case LayerKind::BoxDown: return "box-down";
  }
  return "unknown";
}

namespace detail {

enum class OpKind { Conv, BatchNorm, LeakyRelu, PushSkip, AddSkip, BilinearUp, BoxDown };

struct Op {
  OpKind kind = OpKind::Conv;
  std::size_t layer = 0;
  Index in_c = 0;
  Index out_c = 0;
  Index ksize = 0;
  Index factor = 1;
  std::size_t param = 0;  // first parameter entry owned by the op
};

enum class ParamRole { Weight, Bias, Scale, Shift, RunningMean, RunningVar };

struct ParamInfo {
  std::string name;
  Shape shape;
  ParamRole role;
  Index fan_in = 0;
};

struct Lowered {
  std::vector<Op> ops;
  std::vector<ParamInfo> params;
};

Lowered lower(std::span<const LayerSpec> specs) {
  Lowered out;
  auto conv = [&](std::size_t layer, const std::string& prefix, Index in, Index o, Index k) {
    out.ops.push_back({OpKind::Conv, layer, in, o, k, 1, out.params.size()});
    out.params.push_back({prefix + ".weight", {o, in, k, k}, ParamRole::Weight, in * k * k});
    out.params.push_back({prefix + ".bias", {o, 1, 1, 1}, ParamRole::Bias, in * k * k});
  };
  auto norm = [&](std::size_t layer, const std::string& prefix, Index c) {
    out.ops.push_back({OpKind::BatchNorm, layer, c, c, 0, 1, out.params.size()});
    out.params.push_back({prefix + ".scale", {c, 1, 1, 1}, ParamRole::Scale});
    out.params.push_back({prefix + ".shift", {c, 1, 1, 1}, ParamRole::Shift});
    out.params.push_back({prefix + ".running_mean", {c, 1, 1, 1}, ParamRole::RunningMean});
    out.params.push_back({prefix + ".running_var", {c, 1, 1, 1}, ParamRole::RunningVar});
  };
  auto simple = [&](OpKind kind, std::size_t layer, Index c, Index factor = 1) {
    out.ops.push_back({kind, layer, c, c, 0, factor, out.params.size()});
  };

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    const std::string prefix = "layer" + std::to_string(i) + "." + std::string(to_string(s.kind));
    switch (s.kind) {
      case LayerKind::Conv3x3: conv(i, prefix, s.in_channels, s.out_channels, 3); break;
      case LayerKind::Conv1x1: conv(i, prefix, s.in_channels, s.out_channels, 1); break;
      case LayerKind::BatchNorm: norm(i, prefix, s.in_channels); break;
      case LayerKind::LeakyRelu: simple(OpKind::LeakyRelu, i, s.in_channels); break;
      case LayerKind::ResidualBlock:
        simple(OpKind::PushSkip, i, s.in_channels);
        conv(i, prefix + ".conv1", s.in_channels, s.in_channels, 3);
        norm(i, prefix + ".bn1", s.in_channels);
        simple(OpKind::LeakyRelu, i, s.in_channels);
        conv(i, prefix + ".conv2", s.in_channels, s.in_channels, 3);
        norm(i, prefix + ".bn2", s.in_channels);
        simple(OpKind::AddSkip, i, s.in_channels);
        simple(OpKind::LeakyRelu, i, s.in_channels);
        break;
      case LayerKind::BilinearUp: simple(OpKind::BilinearUp, i, s.in_channels, s.factor); break;
      case LayerKind::BoxDown: simple(OpKind::BoxDown, i, s.in_channels, s.factor); break;
    }
  }
  return out;
}

template <typename Scalar>
using Matrix = typename Tensor<Scalar>::Matrix;
template <typename Scalar>
using Vector = typename Tensor<Scalar>::Vector;

template <typename Scalar>
struct ConvCache {
  Tensor<Scalar> input;  // columns are rebuilt in the backward pass
};

// Scratch matrices reused across calls; im2col buffers are large enough that
// fresh allocations cost more in page faults than the copies themselves.
template <typename Scalar>
Eigen::Map<Matrix<Scalar>> scratch(int slot, Index rows, Index cols) {
  thread_local std::vector<Scalar> buffers[2];
  auto& buf = buffers[slot];
  if (buf.size() < static_cast<std::size_t>(rows * cols)) buf.resize(static_cast<std::size_t>(rows * cols));
  return Eigen::Map<Matrix<Scalar>>(buf.data(), rows, cols);
}

// Reductions accumulate in double over 8 lanes so they vectorise without
// -ffast-math; a plain double loop over float data is several times slower.
template <typename Scalar>
double channel_sum(const Scalar* p, Index len) {
  double acc[8] = {};
  Index i = 0;
  for (; i + 8 <= len; i += 8)
    for (int j = 0; j < 8; ++j) acc[j] += static_cast<double>(p[i + j]);
  double total = 0.0;
  for (; i < len; ++i) total += static_cast<double>(p[i]);
  for (double a : acc) total += a;
  return total;
}

template <typename Scalar>
double centred_square_sum(const Scalar* p, Index len, double mean) {
  double acc[8] = {};
  Index i = 0;
  for (; i + 8 <= len; i += 8)
    for (int j = 0; j < 8; ++j) {
      const double d = static_cast<double>(p[i + j]) - mean;
      acc[j] += d * d;
    }
  double total = 0.0;
  for (; i < len; ++i) {
    const double d = static_cast<double>(p[i]) - mean;
    total += d * d;
  }
  for (double a : acc) total += a;
  return total;
}

template <typename Scalar>
double dot(const Scalar* a, const Scalar* b, Index len) {
  double acc[8] = {};
  Index i = 0;
  for (; i + 8 <= len; i += 8)
    for (int j = 0; j < 8; ++j) acc[j] += static_cast<double>(a[i + j]) * static_cast<double>(b[i + j]);
  double total = 0.0;
  for (; i < len; ++i) total += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  for (double v : acc) total += v;
  return total;
}

template <typename Scalar>
struct NormCache {
  Tensor<Scalar> xhat;
  Eigen::VectorXd inv_std;
};

template <typename Scalar>
struct ActCache {
  Tensor<Scalar> input;
};

struct ShapeCache {
  Shape in_shape;
};

template <typename Scalar>
struct OpCache {
  Op op;
  std::variant<std::monostate, ConvCache<Scalar>, NormCache<Scalar>, ActCache<Scalar>, ShapeCache> data;
};

inline Index reflect(Index i, Index len) {
  if (len == 1) return 0;
  if (i < 0) i = -i;
  if (i >= len) i = 2 * len - 2 - i;
  return i;
}

// Image rows [y0, y1) of sample n as columns:
// cols((ci*k + ky)*k + kx, (y-y0)*W + x) = x(ci, reflect(y+ky-pad), reflect(x+kx-pad))
template <typename Scalar>
void im2col(const Tensor<Scalar>& x, Index n, Index k, Index y0, Index y1, Eigen::Map<Matrix<Scalar>>& cols) {
  const Index h = x.shape().h, w = x.shape().w, pad = k / 2;
  for (Index ci = 0; ci < x.shape().c; ++ci) {
    const Scalar* plane = x.plane(n, ci).data();
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        Scalar* dst = cols.row((ci * k + ky) * k + kx).data();
        const Index off = kx - pad;
        const Index x0 = std::max<Index>(0, -off), x1 = std::min<Index>(w, w - off);
        for (Index y = y0; y < y1; ++y) {
          const Scalar* src = plane + reflect(y + ky - pad, h) * w;
          Scalar* row = dst + (y - y0) * w;
          for (Index xx = 0; xx < x0; ++xx) row[xx] = src[reflect(xx + off, w)];
          if (x1 > x0) std::copy(src + x0 + off, src + x1 + off, row + x0);
          for (Index xx = std::max(x0, x1); xx < w; ++xx) row[xx] = src[reflect(xx + off, w)];
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates into dx.
template <typename Scalar>
void col2im(const Eigen::Map<Matrix<Scalar>>& dcols, Index n, Index k, Index y0, Index y1, Tensor<Scalar>& dx) {
  const Index h = dx.shape().h, w = dx.shape().w, pad = k / 2;
  for (Index ci = 0; ci < dx.shape().c; ++ci) {
    Scalar* plane = dx.plane(n, ci).data();
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Scalar* src = dcols.row((ci * k + ky) * k + kx).data();
        const Index off = kx - pad;
        const Index x0 = std::max<Index>(0, -off), x1 = std::min<Index>(w, w - off);
        for (Index y = y0; y < y1; ++y) {
          Scalar* dst = plane + reflect(y + ky - pad, h) * w;
          const Scalar* row = src + (y - y0) * w;
          for (Index xx = 0; xx < x0; ++xx) dst[reflect(xx + off, w)] += row[xx];
          for (Index xx = x0; xx < x1; ++xx) dst[xx + off] += row[xx];
          for (Index xx = std::max(x0, x1); xx < w; ++xx) dst[reflect(xx + off, w)] += row[xx];
        }
      }
    }
  }
}

// Image rows per conv tile, sized so a tile's columns stay cache-resident.
inline Index tile_rows(Index w) { return std::max<Index>(1, 4096 / std::max<Index>(w, 1)); }

template <typename Scalar>
Eigen::Map<const Matrix<Scalar>> weight_matrix(const Tensor<Scalar>& weight) {
  const Shape& s = weight.shape();
  return Eigen::Map<const Matrix<Scalar>>(weight.data().data(), s.n, s.c * s.h * s.w);
}

template <typename Scalar>
Tensor<Scalar> conv_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                            Index k, ConvCache<Scalar>* cache) {
  const Shape& in = x.shape();
  const Index out_c = weight.shape().n;
  Tensor<Scalar> out(Shape{in.n, out_c, in.h, in.w});
  const auto wm = weight_matrix(weight);
  for (Index n = 0; n < in.n; ++n) {
    auto y = out.sample(n);
    if (k == 1) {
      y.noalias() = wm * x.sample(n);
    } else {
      const Index step = tile_rows(in.w);
      for (Index y0 = 0; y0 < in.h; y0 += step) {
        const Index y1 = std::min(in.h, y0 + step);
        auto cols = scratch<Scalar>(0, in.c * k * k, (y1 - y0) * in.w);
        im2col(x, n, k, y0, y1, cols);
        y.middleCols(y0 * in.w, (y1 - y0) * in.w).noalias() = wm * cols;
      }
    }
    y.colwise() += bias.data();
  }
  if (cache) cache->input = x;
  return out;
}

template <typename Scalar>
Tensor<Scalar> norm_forward(const Tensor<Scalar>& x, ParamTensor<Scalar>* p, Mode mode, NormCache<Scalar>* cache) {
  const Shape& s = x.shape();
  Tensor<Scalar> out(s);
  auto& scale = p[0].value.data();
  auto& shift = p[1].value.data();
  auto& running_mean = p[2].value.data();
  auto& running_var = p[3].value.data();
  const double count = static_cast<double>(s.n * s.pixels());
  Tensor<Scalar> xhat(s);
  Eigen::VectorXd inv_std(s.c);
  for (Index c = 0; c < s.c; ++c) {
    double mean, var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (Index n = 0; n < s.n; ++n) sum += channel_sum(x.plane(n, c).data(), s.pixels());
      mean = sum / count;
      double sq = 0.0;
      for (Index n = 0; n < s.n; ++n) sq += centred_square_sum(x.plane(n, c).data(), s.pixels(), mean);
      var = sq / count;
      const double m = kBatchNormMomentum;
      const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
      running_mean[c] = static_cast<Scalar>((1.0 - m) * static_cast<double>(running_mean[c]) + m * mean);
      running_var[c] = static_cast<Scalar>((1.0 - m) * static_cast<double>(running_var[c]) + m * unbiased);
    } else {
      mean = static_cast<double>(running_mean[c]);
      var = static_cast<double>(running_var[c]);
    }
    inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEps);
    const Scalar mu = static_cast<Scalar>(mean), is = static_cast<Scalar>(inv_std[c]);
    for (Index n = 0; n < s.n; ++n) {
      auto xh = xhat.sample(n).row(c);
      xh = (x.sample(n).row(c).array() - mu) * is;
      out.sample(n).row(c) = (xh.array() * scale[c] + shift[c]).matrix();
    }
  }
  if (cache) *cache = {std::move(xhat), std::move(inv_std)};
  return out;
}

template <typename Scalar>
Tensor<Scalar> leaky_forward(const Tensor<Scalar>& x) {
  const Scalar slope = static_cast<Scalar>(kLeakySlope);
  return Tensor<Scalar>(x.shape(), x.data().cwiseMax(Scalar(0)) + slope * x.data().cwiseMin(Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> resample_forward(const Tensor<Scalar>& x, OpKind kind, Index factor) {
  const Shape& s = x.shape();
  const Shape os = kind == OpKind::BilinearUp ? Shape{s.n, s.c, s.h * factor, s.w * factor}
                                              : Shape{s.n, s.c, ceil_div(s.h, factor), ceil_div(s.w, factor)};
  Tensor<Scalar> out(os);
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) {
      auto dst = out.plane(n, c);
      if (kind == OpKind::BilinearUp)
        bilinear_resize_into(x.plane(n, c), dst);
      else
        box_downsample_into(x.plane(n, c), factor, dst);
    }
  return out;
}

}  // namespace detail

using namespace detail;

std::vector<LayerSpec> generator_layers(Index in, Index features, int blocks, Index out) {
  std::vector<LayerSpec> layers;
  layers.push_back(LayerSpec::conv3x3(in, features));
  layers.push_back(LayerSpec::batch_norm(features));
  layers.push_back(LayerSpec::leaky_relu(features));
  for (int i = 0; i < blocks; ++i) layers.push_back(LayerSpec::residual_block(features));
  layers.push_back(LayerSpec::conv1x1(features, out));
  return layers;
}

Shape output_shape(std::span<const LayerSpec> specs, const Shape& input) {
  if (specs.empty()) throw InvalidArgument("network has no layers");
  Shape s = input;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& l = specs[i];
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ")";
    if (l.in_channels < 1 || l.out_channels < 1) throw InvalidArgument(where + ": channel counts must be positive");
    if (s.c != l.in_channels)
      throw InvalidArgument(where + ": expects " + std::to_string(l.in_channels) + " input channels, got " +
                            std::to_string(s.c));
    switch (l.kind) {
      case LayerKind::Conv3x3:
      case LayerKind::Conv1x1: s.c = l.out_channels; break;
      case LayerKind::BatchNorm:
      case LayerKind::LeakyRelu:
      case LayerKind::ResidualBlock:
        if (l.out_channels != l.in_channels) throw InvalidArgument(where + ": must preserve channel count");
        break;
      case LayerKind::BilinearUp:
        if (l.factor < 1) throw InvalidArgument(where + ": factor must be >= 1");
        s.h *= l.factor;
        s.w *= l.factor;
        break;
      case LayerKind::BoxDown:
        if (l.factor < 1) throw InvalidArgument(where + ": factor must be >= 1");
        s.h = ceil_div(s.h, l.factor);
        s.w = ceil_div(s.w, l.factor);
        break;
    }
  }
  return s;
}

template <typename Scalar>
NetworkParams<Scalar> init_params(std::span<const LayerSpec> specs, std::uint64_t seed) {
  const Lowered lowered = lower(specs);
  NetworkParams<Scalar> params;
  params.entries.reserve(lowered.params.size());
  for (std::size_t i = 0; i < lowered.params.size(); ++i) {
    const ParamInfo& info = lowered.params[i];
    Tensor<Scalar> t(info.shape);
    switch (info.role) {
      case ParamRole::Weight: {
        SplitMix64 rng(derive_seed(seed, "init", i));
        const double bound = std::sqrt(6.0 / ((1.0 + kLeakySlope * kLeakySlope) * static_cast<double>(info.fan_in)));
        for (Index j = 0; j < t.size(); ++j) t.data()[j] = static_cast<Scalar>(rng.uniform(-bound, bound));
        break;
      }
      case ParamRole::Scale:
      case ParamRole::RunningVar: t.data().setOnes(); break;
      default: break;
    }
    const bool trainable = info.role != ParamRole::RunningMean && info.role != ParamRole::RunningVar;
    params.entries.push_back({info.name, std::move(t), trainable});
  }
  return params;
}

template <typename Scalar>
Tape<Scalar>::Tape() = default;
template <typename Scalar>
Tape<Scalar>::~Tape() = default;
template <typename Scalar>
Tape<Scalar>::Tape(Tape&&) noexcept = default;
template <typename Scalar>
Tape<Scalar>& Tape<Scalar>::operator=(Tape&&) noexcept = default;
template <typename Scalar>
bool Tape<Scalar>::empty() const {
  return caches.empty();
}

template <typename Scalar>
ForwardResult<Scalar> forward(NetworkParams<Scalar>& params, std::span<const LayerSpec> specs,
                              const Tensor<Scalar>& input, Mode mode) {
  const Shape out_shape = output_shape(specs, input.shape());
  const Lowered lowered = lower(specs);
  if (lowered.params.size() != params.entries.size())
    throw InvalidArgument("parameter list has " + std::to_string(params.entries.size()) + " entries, network needs " +
                          std::to_string(lowered.params.size()));
  for (std::size_t i = 0; i < lowered.params.size(); ++i)
    if (params.entries[i].value.shape() != lowered.params[i].shape)
      throw InvalidArgument("parameter " + lowered.params[i].name + " has shape " +
                            params.entries[i].value.shape().str() + ", expected " + lowered.params[i].shape.str());
  if (!input.all_finite()) throw NumericError("network input contains non-finite values");

  ForwardResult<Scalar> result;
  Tape<Scalar>& tape = result.tape;
  tape.specs.assign(specs.begin(), specs.end());
  tape.input_shape = input.shape();
  tape.output_shape = out_shape;
  tape.mode = mode;
  tape.params_id = params.id();
  tape.params_version = params.version();
  const bool record = mode == Mode::Train;
  if (record) tape.caches.reserve(lowered.ops.size());

  Tensor<Scalar> cur = input;
  std::vector<Tensor<Scalar>> skips;
  for (const Op& op : lowered.ops) {
    OpCache<Scalar> entry{op, std::monostate{}};
    switch (op.kind) {
      case OpKind::Conv: {
        ConvCache<Scalar>* cache = record ? &entry.data.template emplace<ConvCache<Scalar>>() : nullptr;
        cur = conv_forward(cur, params.entries[op.param].value, params.entries[op.param + 1].value, op.ksize, cache);
        break;
      }
      case OpKind::BatchNorm: {
        NormCache<Scalar>* cache = record ? &entry.data.template emplace<NormCache<Scalar>>() : nullptr;
        cur = norm_forward(cur, &params.entries[op.param], mode, cache);
        break;
      }
      case OpKind::LeakyRelu: {
        Tensor<Scalar> out = leaky_forward(cur);
        if (record) entry.data = ActCache<Scalar>{std::move(cur)};
        cur = std::move(out);
        break;
      }
      case OpKind::PushSkip: skips.push_back(cur); break;
      case OpKind::AddSkip:
        cur.data() += skips.back().data();
        skips.pop_back();
        break;
      case OpKind::BilinearUp:
      case OpKind::BoxDown:
        if (record) entry.data = ShapeCache{cur.shape()};
        cur = resample_forward(cur, op.kind, op.factor);
        break;
    }
    if (!cur.all_finite())
      throw NumericError("non-finite activation after layer " + std::to_string(op.layer) + " (" +
                         std::string(to_string(specs[op.layer].kind)) + ")");
    if (record) tape.caches.push_back(std::move(entry));
  }
  result.output = std::move(cur);
  return result;
}

template <typename Scalar>
std::vector<bool> kink_pattern(const Tape<Scalar>& tape) {
  std::vector<bool> out;
  for (const auto& c : tape.caches)
    if (const auto* act = std::get_if<ActCache<Scalar>>(&c.data))
      for (Index j = 0; j < act->input.size(); ++j) out.push_back(act->input.data()[j] > Scalar(0));
  return out;
}

template <typename Scalar>
Gradients<Scalar> backward(const NetworkParams<Scalar>& params, const Tape<Scalar>& tape,
                           const Tensor<Scalar>& grad_out, const BackwardHooks& hooks) {
  if (tape.mode != Mode::Train) throw InvalidState("backward needs a tape recorded in train mode");
  if (tape.empty()) throw InvalidState("backward called with an empty tape");
  if (tape.params_id != params.id() || tape.params_version != params.version())
    throw InvalidState("stale tape: parameters changed since the forward pass");
  if (grad_out.shape() != tape.output_shape)
    throw InvalidArgument("output gradient has shape " + grad_out.shape().str() + ", expected " +
                          tape.output_shape.str());

  Gradients<Scalar> grads;
  grads.params.reserve(params.entries.size());
  for (const auto& e : params.entries) grads.params.emplace_back(e.value.shape());

  const Scalar slope = static_cast<Scalar>(hooks.corrupt_leaky_relu ? 0.25 : kLeakySlope);
  Tensor<Scalar> g = grad_out;
  std::vector<Tensor<Scalar>> skip_grads;
  for (auto it = tape.caches.rbegin(); it != tape.caches.rend(); ++it) {
    const Op& op = it->op;
    switch (op.kind) {
      case OpKind::Conv: {
        const auto& cache = std::get<ConvCache<Scalar>>(it->data);
        const auto wm = weight_matrix(params.entries[op.param].value);
        auto& gw = grads.params[op.param].data();
        Eigen::Map<Matrix<Scalar>> dw(gw.data(), wm.rows(), wm.cols());
        auto& db = grads.params[op.param + 1].data();
        const Tensor<Scalar>& x = cache.input;
        const Shape& in = x.shape();
        const Index rows = in.c * op.ksize * op.ksize;
        Tensor<Scalar> dx(in);
        for (Index n = 0; n < in.n; ++n) {
          const auto dy = g.sample(n);
          db += dy.rowwise().sum();
          if (op.ksize == 1) {
            dw.noalias() += dy * x.sample(n).transpose();
            dx.sample(n).noalias() = wm.transpose() * dy;
            continue;
          }
          const Index step = tile_rows(in.w);
          for (Index y0 = 0; y0 < in.h; y0 += step) {
            const Index y1 = std::min(in.h, y0 + step);
            const auto dyt = dy.middleCols(y0 * in.w, (y1 - y0) * in.w);
            auto cols = scratch<Scalar>(0, rows, (y1 - y0) * in.w);
            im2col(x, n, op.ksize, y0, y1, cols);
            dw.noalias() += dyt * cols.transpose();
            auto dcols = scratch<Scalar>(1, rows, (y1 - y0) * in.w);
            dcols.noalias() = wm.transpose() * dyt;
            col2im(dcols, n, op.ksize, y0, y1, dx);
          }
        }
        g = std::move(dx);
        break;
      }
      case OpKind::BatchNorm: {
        const auto& cache = std::get<NormCache<Scalar>>(it->data);
        const auto& scale = params.entries[op.param].value.data();
        auto& dscale = grads.params[op.param].data();
        auto& dshift = grads.params[op.param + 1].data();
        const Shape& s = g.shape();
        const double count = static_cast<double>(s.n * s.pixels());
        Tensor<Scalar> dx(s);
        for (Index c = 0; c < s.c; ++c) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (Index n = 0; n < s.n; ++n) {
            const Scalar* dy = g.plane(n, c).data();
            sum_dy += channel_sum(dy, s.pixels());
            sum_dy_xhat += dot(dy, cache.xhat.plane(n, c).data(), s.pixels());
          }
          dscale[c] += static_cast<Scalar>(sum_dy_xhat);
          dshift[c] += static_cast<Scalar>(sum_dy);
          // dx = gamma * inv_std / M * (M dy - sum(dy) - xhat * sum(dy xhat))
          const double k = static_cast<double>(scale[c]) * cache.inv_std[c] / count;
          const Scalar a = static_cast<Scalar>(k * count), b = static_cast<Scalar>(k * sum_dy),
                       d = static_cast<Scalar>(k * sum_dy_xhat);
          for (Index n = 0; n < s.n; ++n)
            dx.sample(n).row(c) =
                (a * g.sample(n).row(c).array() - b - d * cache.xhat.sample(n).row(c).array()).matrix();
        }
        g = std::move(dx);
        break;
      }
      case OpKind::LeakyRelu: {
        const auto& x = std::get<ActCache<Scalar>>(it->data).input.data();
        g.data() = (x.array() > Scalar(0)).select(g.data(), slope * g.data());
        break;
      }
      case OpKind::AddSkip: skip_grads.push_back(g); break;
      case OpKind::PushSkip:
        g.data() += skip_grads.back().data();
        skip_grads.pop_back();
        break;
      case OpKind::BilinearUp:
      case OpKind::BoxDown: {
        const Shape& in = std::get<ShapeCache>(it->data).in_shape;
        Tensor<Scalar> dx(in);
        for (Index n = 0; n < in.n; ++n)
          for (Index c = 0; c < in.c; ++c) {
            auto dst = dx.plane(n, c);
            if (op.kind == OpKind::BilinearUp)
              bilinear_resize_adjoint(g.plane(n, c), dst);
            else
              box_downsample_adjoint(g.plane(n, c), op.factor, dst);
          }
        g = std::move(dx);
        break;
      }
    }
  }
  grads.input = std::move(g);
  return grads;
}

#define MONOFILL_DIFFNET_INSTANTIATE(S)                                                                          \
  template NetworkParams<S> init_params<S>(std::span<const LayerSpec>, std::uint64_t);                          \
  template struct Tape<S>;                                                                                       \
  template ForwardResult<S> forward<S>(NetworkParams<S>&, std::span<const LayerSpec>, const Tensor<S>&, Mode); \
  template Gradients<S> backward<S>(const NetworkParams<S>&, const Tape<S>&, const Tensor<S>&, const BackwardHooks&); \
  template std::vector<bool> kink_pattern<S>(const Tape<S>&);
MONOFILL_DIFFNET_INSTANTIATE(float)
MONOFILL_DIFFNET_INSTANTIATE(double)

}  // namespace monofill::diffnet
