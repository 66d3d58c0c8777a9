#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "monofill/colorizer.hpp"
#include "monofill/errors.hpp"
#include "test_util.hpp"

using namespace monofill;
using diffnet::Shape;
using diffnet::Tensor;

namespace {

ColorizeConfig tiny_config(int height, std::size_t iterations) {
  ColorizeConfig cfg;
  cfg.pyramid_height = height;
  cfg.schedules.assign(static_cast<std::size_t>(height), LevelSchedule{iterations, 0.01});
  cfg.feature_channels = 8;
  cfg.residual_blocks = 1;
  cfg.seed = 42;
  return cfg;
}

bool bitwise_equal(const RgbImage& a, const RgbImage& b) {
  for (int c = 0; c < 3; ++c) {
    if (a.channels[c].size() != b.channels[c].size()) return false;
    if (std::memcmp(a.channels[c].data(), b.channels[c].data(), sizeof(double) * a.channels[c].size()) != 0)
      return false;
  }
  return true;
}

struct Scene {
  RgbImage color;
  GrayImage gray;
  Mask mask;
};

// Smooth two-tone scene with a square hole.
Scene scene(Index size) {
  Scene s;
  s.color = make_rgb(size, size);
  for (Index r = 0; r < size; ++r)
    for (Index c = 0; c < size; ++c) {
      const double t = static_cast<double>(c) / static_cast<double>(size - 1);
      s.color.set_pixel(r, c, {0.2 + 0.6 * t, 0.5, 0.8 - 0.6 * t});
    }
  s.gray = to_monochrome(s.color);
  s.mask = make_mask(size, size);
  s.mask.values.block(size / 4, size / 4, size / 4, size / 4).setConstant(1);
  return s;
}

}  // namespace

TEST_CASE("masked L1 loss") {
  Tensor<double> pred(Shape{1, 3, 1, 2}), target(Shape{1, 3, 1, 2});
  pred.data() << 0.5, 0.1, 0.2, 0.9, 0.3, 0.3;  // planes: R = (0.5, 0.1), G = (0.2, 0.9), B = (0.3, 0.3)
  target.data() << 0.1, 0.7, 0.4, 0.0, 0.3, 1.0;
  Mask mask = make_mask(1, 2);

  SUBCASE("all pixels known") {
    Tensor<double> grad;
    const auto loss = masked_l1_loss(pred, target, mask, &grad);
    CHECK(loss.value == doctest::Approx((0.4 + 0.6 + 0.2 + 0.9 + 0.0 + 0.7) / 6.0));
    Tensor<double>::Vector expected(6);
    expected << 1, -1, -1, 1, 0, -1;
    CHECK((grad.data() - expected / 6.0).norm() < 1e-15);
  }
  SUBCASE("masked pixel is ignored") {
    mask(0, 1) = 1;
    Tensor<double> grad;
    const auto loss = masked_l1_loss(pred, target, mask, &grad);
    CHECK(loss.value == doctest::Approx((0.4 + 0.2 + 0.0) / 3.0));
    CHECK(grad(0, 0, 0, 1) == 0.0);
    CHECK(grad(0, 1, 0, 1) == 0.0);
    CHECK(grad(0, 0, 0, 0) == doctest::Approx(1.0 / 3.0));
    target(0, 2, 0, 1) = 0.0;  // changing hidden target changes nothing
    CHECK(masked_l1_loss(pred, target, mask).value == loss.value);
  }
  SUBCASE("everything masked") {
    mask.values.setConstant(1);
    const auto loss = masked_l1_loss(pred, target, mask);
    CHECK(loss.no_known_pixels);
    CHECK(loss.value == 0.0);
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(masked_l1_loss(pred, Tensor<double>(Shape{1, 3, 2, 1}), mask), InvalidArgument);
    CHECK_THROWS_AS(masked_l1_loss(pred, target, make_mask(2, 2)), InvalidArgument);
  }
}

TEST_CASE("masked L1 loss matches a finite-difference gradient away from ties") {
  const RgbImage a = testutil::random_rgb(5, 4, 1), b = testutil::random_rgb(5, 4, 2);
  const Mask mask = testutil::random_mask(5, 4, 0.4, 3);
  Tensor<double> pred = to_tensor(a).cast<double>(), target = to_tensor(b).cast<double>(), grad;
  masked_l1_loss(pred, target, mask, &grad);
  for (Index i = 0; i < pred.size(); ++i) {
    const double h = 1e-7;
    Tensor<double> p = pred, m = pred;
    p.data()[i] += h;
    m.data()[i] -= h;
    const double fd = (masked_l1_loss(p, target, mask).value - masked_l1_loss(m, target, mask).value) / (2 * h);
    CHECK(fd == doctest::Approx(grad.data()[i]).epsilon(1e-6));
  }
}

TEST_CASE("default schedule") {
  const auto one = default_schedule(1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].iterations == 1000);
  CHECK(one[0].learning_rate == 0.003);

  const auto three = default_schedule(3);
  REQUIRE(three.size() == 3);
  CHECK(three[0].iterations == 500);
  CHECK(three[0].learning_rate == 0.01);
  CHECK(three[1].iterations == 1000);
  CHECK(three[1].learning_rate == 0.005);
  CHECK(three[2].iterations == 1000);
  CHECK(three[2].learning_rate == 0.003);

  const auto five = default_schedule(5);
  CHECK(five[3].learning_rate == 0.005);
  CHECK(five[4].learning_rate == 0.003);
  CHECK_THROWS_AS(default_schedule(0), InvalidArgument);

  const ColorizeConfig cfg;
  REQUIRE(cfg.schedules.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(cfg.schedules[i].iterations == three[i].iterations);
    CHECK(cfg.schedules[i].learning_rate == three[i].learning_rate);
  }
}

TEST_CASE("config validation") {
  ColorizeConfig cfg = tiny_config(2, 3);
  cfg.schedules.pop_back();
  try {
    validate(cfg);
    FAIL("expected InvalidArgument");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("1 levels but pyramid height is 2") != std::string::npos);
  }
  cfg = tiny_config(1, 0);
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);
  cfg = tiny_config(1, 1);
  cfg.schedules[0].learning_rate = 0.0;
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);
}

TEST_CASE("generator input channel contract") {
  const Scene s = scene(16);
  const PyramidSet pyr = build_pyramids(s.gray, s.color, s.mask, 2);
  GeneratorSpec gray_only;
  gray_only.feature_channels = 4;
  gray_only.residual_blocks = 0;
  GeneratorSpec conditional = gray_only;
  conditional.input_channels = 4;
  const RgbImage prev = make_rgb(16, 16);

  CHECK(train_level(0, pyr, nullptr, {2, 0.01}, 1, gray_only).output.height() == 8);
  CHECK_THROWS_AS(train_level(1, pyr, nullptr, {2, 0.01}, 1, conditional), InvalidArgument);
  CHECK_THROWS_AS(train_level(1, pyr, &prev, {2, 0.01}, 1, gray_only), InvalidArgument);
  CHECK_THROWS_AS(train_level(2, pyr, &prev, {2, 0.01}, 1, conditional), InvalidArgument);

  Generator g = make_generator(conditional, 1);
  try {
    level_forward(g, s.gray, nullptr);
    FAIL("expected InvalidArgument");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("expects 4 input channels, got 1") != std::string::npos);
  }
  CHECK(level_forward(g, s.gray, &prev).width() == 16);

  const auto input = level_input(s.gray, &prev);
  CHECK(input.shape() == Shape{1, 4, 16, 16});
  CHECK(input(0, 0, 3, 5) == static_cast<float>(s.gray(3, 5)));
}

TEST_CASE("tensor conversion clamps") {
  Tensor<float> t(Shape{1, 3, 1, 1});
  t.data() << -0.5f, 0.25f, 1.5f;
  const RgbImage img = to_image(t);
  CHECK(img.pixel(0, 0) == Eigen::Vector3d(0.0, 0.25, 1.0));
  CHECK_THROWS_AS(to_image(Tensor<float>(Shape{1, 4, 1, 1})), InvalidArgument);
}

TEST_CASE("hints") {
  RgbImage color = make_rgb(4, 4);
  Mask mask = make_mask(4, 4, 1);
  apply_hints({{1, 2, {0.1, 0.2, 0.3}}}, color, mask);
  CHECK(mask(1, 2) == 0);
  CHECK(mask.missing_count() == 15);
  CHECK(color.pixel(1, 2) == Eigen::Vector3d(0.1, 0.2, 0.3));
  CHECK_THROWS_AS(apply_hints({{4, 0, {0, 0, 0}}}, color, mask), InvalidArgument);
  CHECK_THROWS_AS(apply_hints({{0, 0, {0, 1.5, 0}}}, color, mask), InvalidArgument);

  const auto dir = testutil::scratch_dir("hints");
  const std::string good = (dir / "good.txt").string();
  std::ofstream(good) << "# row col r g b\n\n3 4 0.5 0.25 1  # trailing comment\n0 0 0 0 0\n";
  const auto hints = load_hints(good);
  REQUIRE(hints.size() == 2);
  CHECK(hints[0].row == 3);
  CHECK(hints[0].col == 4);
  CHECK(hints[0].color == Eigen::Vector3d(0.5, 0.25, 1.0));

  const std::string bad = (dir / "bad.txt").string();
  std::ofstream(bad) << "1 1 0 0 0\n2 2 0.5\n";
  try {
    load_hints(bad);
    FAIL("expected InvalidArgument");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK_THROWS_AS(load_hints((dir / "missing.txt").string()), IoError);
}

TEST_CASE("short training lowers the loss at every level") {
  const Scene s = scene(32);
  ColorizeConfig cfg = tiny_config(2, 60);
  std::size_t calls = 0;
  cfg.progress = [&](int, std::size_t, double) { ++calls; };
  const ColorizeResult r = colorize(s.gray, s.color, s.mask, cfg);
  CHECK(calls == 120);
  REQUIRE(r.loss_traces.size() == 2);
  for (const auto& trace : r.loss_traces) {
    REQUIRE(trace.size() == 60);
    CHECK(trace.back() < 0.5 * trace.front());
  }
  REQUIRE(r.per_level_outputs.size() == 2);
  CHECK(r.per_level_outputs[0].height() == 16);
  CHECK(r.per_level_outputs[1].height() == 32);
  CHECK(bitwise_equal(r.output, r.per_level_outputs[1]));
}

TEST_CASE("colorization is deterministic and ignores hidden colour") {
  const Scene s = scene(16);
  const ColorizeConfig cfg = tiny_config(2, 10);
  const auto a = colorize(s.gray, s.color, s.mask, cfg);
  const auto b = colorize(s.gray, s.color, s.mask, cfg);
  CHECK(bitwise_equal(a.output, b.output));
  CHECK(a.loss_traces == b.loss_traces);

  RgbImage tainted = s.color;
  for (auto& ch : tainted.channels)
    ch = (s.mask.values == std::uint8_t{1}).select(1.0 - ch, ch);
  CHECK(bitwise_equal(colorize(s.gray, tainted, s.mask, cfg).output, a.output));

  ColorizeConfig other = cfg;
  other.seed = 43;
  CHECK_FALSE(bitwise_equal(colorize(s.gray, s.color, s.mask, other).output, a.output));

  const auto base_a = colorize_base(s.gray, s.color, s.mask, cfg);
  CHECK(bitwise_equal(base_a.output, colorize_base(s.gray, tainted, s.mask, cfg).output));
  CHECK(base_a.loss_traces.size() == 1);
  CHECK(base_a.per_level_outputs[0].height() == 16);
}

TEST_CASE("luminance reattachment") {
  const Scene s = scene(16);
  ColorizeConfig cfg = tiny_config(1, 5);
  cfg.reattach_luminance = true;
  const auto r = colorize(s.gray, s.color, s.mask, cfg);
  const GrayImage lum = to_monochrome(r.output);
  CHECK((lum.values - s.gray.values).abs().maxCoeff() < 1e-9);
}

TEST_CASE("loss trace csv") {
  ColorizeResult r;
  r.loss_traces = {{0.5, 0.25}, {0.125}};
  const auto dir = testutil::scratch_dir("trace");
  const std::string path = (dir / "t.csv").string();
  write_loss_trace_csv(r, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "level,iteration,loss\n0,0,0.5\n0,1,0.25\n1,0,0.125\n");
}
