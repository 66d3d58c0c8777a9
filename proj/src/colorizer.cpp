#include "monofill/colorizer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "monofill/diffnet/adam.hpp"
#include "monofill/errors.hpp"
#include "monofill/rng.hpp"

namespace monofill {

using diffnet::LayerSpec;
using diffnet::Mode;
using diffnet::Shape;
using diffnet::Tensor;

std::vector<LayerSpec> GeneratorSpec::layers() const {
  return diffnet::generator_layers(input_channels, feature_channels, residual_blocks, output_channels);
}

std::vector<LevelSchedule> default_schedule(int height) {
  if (height < 1) throw InvalidArgument("pyramid height must be >= 1");
  std::vector<LevelSchedule> out(static_cast<std::size_t>(height), LevelSchedule{1000, 0.005});
  if (height > 1) out.front() = {500, 0.01};
  out.back() = {1000, 0.003};
  return out;
}

void validate(const ColorizeConfig& cfg) {
  if (cfg.pyramid_height < 1) throw InvalidArgument("pyramid height must be >= 1");
  if (cfg.schedules.size() != static_cast<std::size_t>(cfg.pyramid_height))
    throw InvalidArgument("schedule has " + std::to_string(cfg.schedules.size()) + " levels but pyramid height is " +
                          std::to_string(cfg.pyramid_height));
  for (const LevelSchedule& s : cfg.schedules) {
    if (s.iterations < 1) throw InvalidArgument("every level needs at least one iteration");
    if (!(s.learning_rate > 0.0)) throw InvalidArgument("learning rates must be positive");
  }
  if (cfg.feature_channels < 1 || cfg.residual_blocks < 0) throw InvalidArgument("invalid generator size");
}

template <typename Scalar>
MaskedLoss masked_l1_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, const Mask& mask,
                          Tensor<Scalar>* grad) {
  const Shape& s = pred.shape();
  if (!(s == target.shape())) throw InvalidArgument("masked_l1_loss: prediction/target shape mismatch");
  if (s.n != 1 || s.c != 3) throw InvalidArgument("masked_l1_loss: expects 1x3xHxW tensors, got " + s.str());
  if (s.h != mask.height() || s.w != mask.width())
    throw InvalidArgument("masked_l1_loss: mask is " + std::to_string(mask.height()) + "x" +
                          std::to_string(mask.width()) + ", images are " + std::to_string(s.h) + "x" +
                          std::to_string(s.w));
  const Index known = mask.values.size() - mask.missing_count();
  if (grad) *grad = Tensor<Scalar>(s);
  if (known == 0) return {0.0, true};

  const double count = 3.0 * static_cast<double>(known);
  const Scalar step = static_cast<Scalar>(1.0 / count);
  double total = 0.0;
  for (Index c = 0; c < 3; ++c) {
    const auto p = pred.plane(0, c);
    const auto t = target.plane(0, c);
    for (Index y = 0; y < s.h; ++y)
      for (Index x = 0; x < s.w; ++x) {
        if (mask(y, x)) continue;
        const Scalar d = p(y, x) - t(y, x);
        total += std::abs(static_cast<double>(d));
        if (grad) grad->plane(0, c)(y, x) = d > 0 ? step : (d < 0 ? -step : Scalar(0));
      }
  }
  return {total / count, false};
}

template MaskedLoss masked_l1_loss<float>(const Tensor<float>&, const Tensor<float>&, const Mask&, Tensor<float>*);
template MaskedLoss masked_l1_loss<double>(const Tensor<double>&, const Tensor<double>&, const Mask&,
                                           Tensor<double>*);

Generator make_generator(const GeneratorSpec& spec, std::uint64_t seed) {
  Generator g{spec, spec.layers(), {}};
  g.params = diffnet::init_params<float>(g.layers, seed);
  return g;
}

Tensor<float> to_tensor(const RgbImage& img) {
  Tensor<float> t(Shape{1, 3, img.height(), img.width()});
  for (Index c = 0; c < 3; ++c) t.plane(0, c) = img.channels[static_cast<std::size_t>(c)].cast<float>().matrix();
  return t;
}

RgbImage to_image(const Tensor<float>& t) {
  if (t.shape().n != 1 || t.shape().c != 3) throw InvalidArgument("to_image expects a 1x3xHxW tensor");
  RgbImage img = make_rgb(t.shape().h, t.shape().w);
  for (Index c = 0; c < 3; ++c)
    img.channels[static_cast<std::size_t>(c)] = t.plane(0, c).array().cast<double>().cwiseMax(0.0).cwiseMin(1.0);
  return img;
}

Tensor<float> level_input(const GrayImage& gray, const RgbImage* prev) {
  const Index channels = prev ? 4 : 1;
  Tensor<float> t(Shape{1, channels, gray.height(), gray.width()});
  t.plane(0, 0) = gray.values.cast<float>().matrix();
  if (prev) {
    require_same_size(gray, *prev, "level input gray/previous output");
    for (Index c = 0; c < 3; ++c)
      t.plane(0, c + 1) = prev->channels[static_cast<std::size_t>(c)].cast<float>().matrix();
  }
  return t;
}

namespace {

void require_channel_contract(const Generator& g, const RgbImage* prev) {
  const Index given = prev ? 4 : 1;
  if (g.spec.input_channels != given)
    throw InvalidArgument("generator expects " + std::to_string(g.spec.input_channels) + " input channels, got " +
                          std::to_string(given) + (prev ? " (gray + previous output)" : " (gray only)"));
}

}  // namespace

RgbImage level_forward(Generator& generator, const GrayImage& gray, const RgbImage* prev) {
  require_channel_contract(generator, prev);
  auto result = diffnet::forward(generator.params, generator.layers, level_input(gray, prev), Mode::Eval);
  return to_image(result.output);
}

LevelResult train_level(int n, const PyramidSet& pyramids, const RgbImage* prev_output,
                        const LevelSchedule& schedule, std::uint64_t seed, const GeneratorSpec& spec,
                        const ProgressFn& progress) {
  if (n < 0 || n >= pyramids.height())
    throw InvalidArgument("level " + std::to_string(n) + " outside pyramid of height " +
                          std::to_string(pyramids.height()));
  const PyramidLevel& level = pyramids.levels[static_cast<std::size_t>(n)];
  LevelResult result{make_generator(spec, seed), {}, {}};
  Generator& g = result.generator;
  require_channel_contract(g, prev_output);

  const Tensor<float> input = level_input(level.gray, prev_output);
  const Tensor<float> target = to_tensor(level.color);
  diffnet::TrainHyper hyper;
  hyper.learning_rate = schedule.learning_rate;
  hyper.iterations = schedule.iterations;
  hyper.seed = seed;
  diffnet::validate(hyper);
  diffnet::AdamState<float> adam;
  Tensor<float> grad;
  result.loss_trace.reserve(schedule.iterations);

  for (std::size_t it = 0; it < schedule.iterations; ++it) {
    try {
      auto fwd = diffnet::forward(g.params, g.layers, input, Mode::Train);
      const MaskedLoss loss = masked_l1_loss(fwd.output, target, level.mask, &grad);
      if (!std::isfinite(loss.value)) throw TrainingError(n, it, "non-finite loss");
      result.loss_trace.push_back(loss.value);
      const auto grads = diffnet::backward(g.params, fwd.tape, grad);
      diffnet::adam_step(g.params, grads, adam, hyper);
      if (progress) progress(n, it, loss.value);
    } catch (const TrainingError&) {
      throw;
    } catch (const NumericError& e) {
      throw TrainingError(n, it, e.what());
    }
  }
  result.output = level_forward(g, level.gray, prev_output);
  return result;
}

void apply_hints(const std::vector<HintPoint>& hints, RgbImage& color, Mask& mask) {
  for (const HintPoint& h : hints) {
    if (h.row < 0 || h.col < 0 || h.row >= mask.height() || h.col >= mask.width())
      throw InvalidArgument("hint at (" + std::to_string(h.row) + ", " + std::to_string(h.col) +
                            ") lies outside the image");
    if ((h.color.array() < 0.0).any() || (h.color.array() > 1.0).any())
      throw InvalidArgument("hint colours must lie in [0,1]");
    color.set_pixel(h.row, h.col, h.color);
    mask(h.row, h.col) = 0;
  }
}

namespace {

void validate_inputs(const GrayImage& gray, const RgbImage& known_color, const Mask& mask) {
  validate(gray);
  validate(known_color);
  validate(mask);
  require_same_size(gray, known_color, "colorize gray/color");
  require_same_size(gray, mask, "colorize gray/mask");
}

GeneratorSpec spec_for(const ColorizeConfig& cfg, Index input_channels) {
  GeneratorSpec spec;
  spec.feature_channels = cfg.feature_channels;
  spec.residual_blocks = cfg.residual_blocks;
  spec.input_channels = input_channels;
  return spec;
}

}  // namespace

ColorizeResult colorize(const GrayImage& gray, const RgbImage& known_color, const Mask& mask,
                        const ColorizeConfig& cfg) {
  validate(cfg);
  validate_inputs(gray, known_color, mask);
  RgbImage color = known_color;
  Mask known_mask = mask;
  apply_hints(cfg.hints, color, known_mask);
  const PyramidSet pyramids = build_pyramids(gray, color, known_mask, cfg.pyramid_height);

  ColorizeResult result;
  std::optional<RgbImage> prev;
  for (int n = 0; n < pyramids.height(); ++n) {
    const PyramidLevel& level = pyramids.levels[static_cast<std::size_t>(n)];
    if (prev) prev = bilinear_upsample(*prev, level.gray.height(), level.gray.width());
    LevelResult lr = train_level(n, pyramids, prev ? &*prev : nullptr, cfg.schedules[static_cast<std::size_t>(n)],
                                 derive_seed(cfg.seed, "level", static_cast<std::uint64_t>(n)),
                                 spec_for(cfg, n == 0 ? 1 : 4), cfg.progress);
    prev = lr.output;
    result.per_level_outputs.push_back(std::move(lr.output));
    result.loss_traces.push_back(std::move(lr.loss_trace));
  }
  result.output = result.per_level_outputs.back();
  if (cfg.reattach_luminance) result.output = reattach_luminance(result.output, gray);
  return result;
}

ColorizeResult colorize_base(const GrayImage& gray, const RgbImage& known_color, const Mask& mask,
                             const ColorizeConfig& cfg) {
  validate(cfg);
  validate_inputs(gray, known_color, mask);
  RgbImage color = known_color;
  Mask known_mask = mask;
  apply_hints(cfg.hints, color, known_mask);
  const PyramidSet pyramids = build_pyramids(gray, color, known_mask, 1);

  LevelResult lr = train_level(0, pyramids, nullptr, cfg.schedules.back(), derive_seed(cfg.seed, "base-level", 0),
                               spec_for(cfg, 1), cfg.progress);
  ColorizeResult result;
  result.output = cfg.reattach_luminance ? reattach_luminance(lr.output, gray) : lr.output;
  result.per_level_outputs.push_back(std::move(lr.output));
  result.loss_traces.push_back(std::move(lr.loss_trace));
  return result;
}

std::vector<HintPoint> load_hints(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open hints file");
  std::vector<HintPoint> hints;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    HintPoint h;
    if (!(ss >> h.row)) continue;  // blank line
    if (!(ss >> h.col >> h.color[0] >> h.color[1] >> h.color[2]))
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected 'row col R G B'");
    std::string extra;
    if (ss >> extra) throw InvalidArgument(path + ":" + std::to_string(lineno) + ": trailing text '" + extra + "'");
    hints.push_back(h);
  }
  return hints;
}

void write_loss_trace_csv(const ColorizeResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "level,iteration,loss\n" << std::setprecision(9);
  for (std::size_t level = 0; level < result.loss_traces.size(); ++level)
    for (std::size_t it = 0; it < result.loss_traces[level].size(); ++it)
      out << level << ',' << it << ',' << result.loss_traces[level][it] << '\n';
  if (!out) throw IoError(path, "write failed");
}

}  // namespace monofill
