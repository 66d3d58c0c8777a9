#pragma once

// Per-image progressive colorization.
//
// A pyramid of conditional generators G_0..G_N is trained coarse to fine on
// the known (unmasked) pixels of a single image. G_0 sees only the coarsest
// gray level; every finer G_n sees its gray level concatenated with the
// bilinearly upsampled output of the level below. Each level minimises the
// L1 error on known pixels only and is frozen before the next one starts.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "monofill/diffnet/network.hpp"
#include "monofill/image.hpp"
#include "monofill/pyramid.hpp"

namespace monofill {

/// Input conv + `residual_blocks` two-conv residual blocks + 1x1 output conv.
struct GeneratorSpec {
  Index feature_channels = 32;
  int residual_blocks = 9;
  Index input_channels = 1;  // 1 (gray) at the coarsest level, 4 (gray + RGB) above
  Index output_channels = 3;

  std::vector<diffnet::LayerSpec> layers() const;
};

struct LevelSchedule {
  std::size_t iterations = 1000;
  double learning_rate = 0.003;
};

struct HintPoint {
  Index row = 0;
  Index col = 0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

/// Schedule for a pyramid of `height` levels: {500, 0.01} at the coarsest,
/// {1000, 0.005} in between and {1000, 0.003} at the finest. A single level
/// gets the finest entry.
std::vector<LevelSchedule> default_schedule(int height);

/// Called after every optimizer step with (level, iteration, loss).
using ProgressFn = std::function<void(int, std::size_t, double)>;

struct ColorizeConfig {
  int pyramid_height = 3;
  std::vector<LevelSchedule> schedules = {{500, 0.01}, {1000, 0.005}, {1000, 0.003}};
  std::uint64_t seed = 0;
  bool reattach_luminance = false;
  std::vector<HintPoint> hints;
  Index feature_channels = 32;
  int residual_blocks = 9;
  ProgressFn progress;
};

void validate(const ColorizeConfig& cfg);

struct ColorizeResult {
  RgbImage output;
  std::vector<RgbImage> per_level_outputs;      // coarsest first
  std::vector<std::vector<double>> loss_traces;  // one per level, one value per optimizer step
};

struct MaskedLoss {
  double value = 0.0;
  bool no_known_pixels = false;
};

/// Mean absolute error over known (mask == 0) pixel-channels. When `grad` is
/// given it receives d(loss)/d(pred). Returns 0 with no_known_pixels set when
/// the mask covers everything.
template <typename Scalar>
MaskedLoss masked_l1_loss(const diffnet::Tensor<Scalar>& pred, const diffnet::Tensor<Scalar>& target,
                          const Mask& mask, diffnet::Tensor<Scalar>* grad = nullptr);

struct Generator {
  GeneratorSpec spec;
  std::vector<diffnet::LayerSpec> layers;
  diffnet::NetworkParams<float> params;
};

Generator make_generator(const GeneratorSpec& spec, std::uint64_t seed);

/// 1 x C x H x W network input: gray alone, or gray followed by prev's RGB.
diffnet::Tensor<float> level_input(const GrayImage& gray, const RgbImage* prev);

diffnet::Tensor<float> to_tensor(const RgbImage& img);
/// Clamps to [0,1].
RgbImage to_image(const diffnet::Tensor<float>& t);

/// Evaluates a generator on one level. `prev` must be absent exactly when the
/// generator takes one input channel, and already resized to `gray`.
RgbImage level_forward(Generator& generator, const GrayImage& gray, const RgbImage* prev);

struct LevelResult {
  Generator generator;
  RgbImage output;
  std::vector<double> loss_trace;
};

/// Trains a fresh generator for pyramid level n. `prev_output` is the frozen
/// output of level n-1 upsampled to level n (absent for n = 0).
LevelResult train_level(int n, const PyramidSet& pyramids, const RgbImage* prev_output,
                        const LevelSchedule& schedule, std::uint64_t seed, const GeneratorSpec& spec,
                        const ProgressFn& progress = {});

/// Applies hints to a copy of (color, mask): hint pixels become known with the hint colour.
void apply_hints(const std::vector<HintPoint>& hints, RgbImage& color, Mask& mask);

/// Full progressive pipeline. `gray` is the completed monochrome; `known_color`
/// is trusted only where mask == 0.
ColorizeResult colorize(const GrayImage& gray, const RgbImage& known_color, const Mask& mask,
                        const ColorizeConfig& cfg);

/// Non-progressive ablation: one gray-only generator at full resolution,
/// trained with the finest-level schedule.
ColorizeResult colorize_base(const GrayImage& gray, const RgbImage& known_color, const Mask& mask,
                             const ColorizeConfig& cfg);

/// Hints file: one "row col R G B" line per hint; blank lines and '#' comments ignored.
std::vector<HintPoint> load_hints(const std::string& path);

/// CSV with header "level,iteration,loss".
void write_loss_trace_csv(const ColorizeResult& result, const std::string& path);

extern template MaskedLoss masked_l1_loss<float>(const diffnet::Tensor<float>&, const diffnet::Tensor<float>&,
                                                 const Mask&, diffnet::Tensor<float>*);
extern template MaskedLoss masked_l1_loss<double>(const diffnet::Tensor<double>&, const diffnet::Tensor<double>&,
                                                  const Mask&, diffnet::Tensor<double>*);

}  // namespace monofill
