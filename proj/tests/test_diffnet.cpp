#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "monofill/diffnet/adam.hpp"
#include "monofill/diffnet/checkpoint.hpp"
#include "monofill/diffnet/grad_check.hpp"
#include "monofill/diffnet/network.hpp"
#include "monofill/errors.hpp"
#include "monofill/rng.hpp"
#include "test_util.hpp"

using namespace monofill;
using namespace monofill::diffnet;

namespace {

Tensor<double> random_tensor(const Shape& s, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor<double> t(s);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
  return t;
}

Index reflect_index(Index i, Index n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

std::size_t find_param(const NetworkParams<double>& p, const std::string& suffix) {
  for (std::size_t i = 0; i < p.entries.size(); ++i) {
    const auto& name = p.entries[i].name;
    if (name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) return i;
  }
  FAIL("no parameter ending in " << suffix);
  return 0;
}

// Trainable parameters of a generator, summed from layer shapes.
Index generator_param_oracle(Index in, Index f, int blocks, Index out) {
  const Index conv3 = f * in * 9 + f;
  const Index bn = 2 * f;
  const Index block = 2 * (f * f * 9 + f) + 2 * bn;
  const Index head = out * f + out;
  return conv3 + bn + blocks * block + head;
}

}  // namespace

TEST_CASE("identity 1x1 conv passes the input through") {
  const std::vector<LayerSpec> specs{LayerSpec::conv1x1(3, 3)};
  auto params = init_params<double>(specs, 1);
  params.entries[0].value.data().setZero();
  for (Index c = 0; c < 3; ++c) params.entries[0].value(c, c, 0, 0) = 1.0;
  params.entries[1].value.data().setZero();
  params.mark_modified();
  const Tensor<double> x = random_tensor({1, 3, 5, 6}, 3);
  for (Mode m : {Mode::Train, Mode::Eval}) CHECK((forward(params, specs, x, m).output.data() - x.data()).norm() == 0.0);
}

TEST_CASE("zero kernels give zero output") {
  const std::vector<LayerSpec> specs{LayerSpec::conv3x3(2, 4), LayerSpec::leaky_relu(4), LayerSpec::conv3x3(4, 2)};
  auto params = init_params<double>(specs, 2);
  for (auto& e : params.entries) e.value.data().setZero();
  params.mark_modified();
  CHECK(forward(params, specs, random_tensor({1, 2, 6, 6}, 4), Mode::Train).output.data().norm() == 0.0);
}

TEST_CASE("3x3 conv matches a brute-force reflection-padded convolution") {
  const std::vector<LayerSpec> specs{LayerSpec::conv3x3(1, 2)};
  auto params = init_params<double>(specs, 5);
  const Tensor<double> x = random_tensor({1, 1, 4, 4}, 6);
  const auto& w = params.entries[0].value;
  const auto& b = params.entries[1].value;
  const Tensor<double> y = forward(params, specs, x, Mode::Eval).output;
  REQUIRE(y.shape() == Shape{1, 2, 4, 4});
  for (Index o = 0; o < 2; ++o)
    for (Index r = 0; r < 4; ++r)
      for (Index c = 0; c < 4; ++c) {
        double acc = b.data()[o];
        for (Index ky = 0; ky < 3; ++ky)
          for (Index kx = 0; kx < 3; ++kx)
            acc += w(o, 0, ky, kx) * x(0, 0, reflect_index(r + ky - 1, 4), reflect_index(c + kx - 1, 4));
        CHECK(y(0, o, r, c) == doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("reflection padding preserves spatial size") {
  const std::vector<LayerSpec> specs{LayerSpec::conv3x3(1, 3), LayerSpec::residual_block(3)};
  auto params = init_params<double>(specs, 7);
  for (Index h : {1, 2, 3, 7})
    CHECK(forward(params, specs, random_tensor({1, 1, h, 5}, 8), Mode::Train).output.shape() == Shape{1, 3, h, 5});
}

TEST_CASE("output_shape names the offending layer") {
  const std::vector<LayerSpec> specs{LayerSpec::conv3x3(1, 4), LayerSpec::batch_norm(3)};
  try {
    output_shape(specs, {1, 1, 8, 8});
    FAIL("expected InvalidArgument");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("layer 1 (batch-norm)") != std::string::npos);
  }
  auto params = init_params<double>(std::vector<LayerSpec>{LayerSpec::conv3x3(2, 4)}, 1);
  const std::vector<LayerSpec> net{LayerSpec::conv3x3(2, 4)};
  CHECK_THROWS_AS(forward(params, net, random_tensor({1, 3, 4, 4}, 1), Mode::Eval), InvalidArgument);
  CHECK(output_shape(std::vector<LayerSpec>{LayerSpec::box_down(2, 2)}, {1, 2, 7, 5}) == Shape{1, 2, 4, 3});
  CHECK(output_shape(std::vector<LayerSpec>{LayerSpec::bilinear_up(2, 2)}, {1, 2, 7, 5}) == Shape{1, 2, 14, 10});
}

TEST_CASE("non-finite input is rejected") {
  const std::vector<LayerSpec> specs{LayerSpec::conv1x1(1, 1)};
  auto params = init_params<double>(specs, 1);
  Tensor<double> x({1, 1, 2, 2});
  x.data()[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forward(params, specs, x, Mode::Eval), NumericError);
}

TEST_CASE("batch-norm train output has mean shift and variance scale^2") {
  const std::vector<LayerSpec> specs{LayerSpec::batch_norm(3)};
  auto params = init_params<double>(specs, 1);
  params.entries[0].value.data() << 0.5, 1.0, 2.0;
  params.entries[1].value.data() << -0.3, 0.0, 0.7;
  params.mark_modified();
  const Tensor<double> x = random_tensor({1, 3, 9, 11}, 2);
  const Tensor<double> y = forward(params, specs, x, Mode::Train).output;
  for (Index c = 0; c < 3; ++c) {
    const auto row = y.sample(0).row(c).array();
    const double mean = row.mean();
    const double var = (row - mean).square().mean();
    CHECK(std::abs(mean - params.entries[1].value.data()[c]) < 1e-5);
    const auto xin = x.sample(0).row(c).array();
    const double vin = (xin - xin.mean()).square().mean();
    const double s = params.entries[0].value.data()[c];
    CHECK(std::abs(var - s * s * vin / (vin + kBatchNormEps)) < 1e-10);
    CHECK(std::abs(var - s * s) < 2e-4 * s * s);
  }
}

TEST_CASE("train mode updates running statistics and eval mode uses them") {
  const std::vector<LayerSpec> specs{LayerSpec::batch_norm(1)};
  auto params = init_params<double>(specs, 1);
  Tensor<double> x({1, 1, 1, 4});
  x.data() << 1, 2, 3, 4;  // mean 2.5, biased var 1.25, unbiased 5/3
  forward(params, specs, x, Mode::Train);
  CHECK(params.entries[2].value.data()[0] == doctest::Approx(0.25));
  CHECK(params.entries[3].value.data()[0] == doctest::Approx(0.9 + 0.1 * 5.0 / 3.0));
  const Tensor<double> y = forward(params, specs, x, Mode::Eval).output;
  const double inv = 1.0 / std::sqrt(params.entries[3].value.data()[0] + 1e-5);
  CHECK(y(0, 0, 0, 0) == doctest::Approx((1.0 - 0.25) * inv));
}

TEST_CASE("forward is deterministic") {
  const auto specs = generator_layers(4, 8, 2, 3);
  auto a = init_params<float>(specs, 11);
  auto b = init_params<float>(specs, 11);
  const Tensor<float> x = random_tensor({1, 4, 12, 10}, 3).cast<float>();
  const auto ya = forward(a, specs, x, Mode::Train).output;
  const auto yb = forward(b, specs, x, Mode::Train).output;
  CHECK(std::memcmp(ya.data().data(), yb.data().data(), sizeof(float) * static_cast<std::size_t>(ya.size())) == 0);
}

TEST_CASE("float and double forward agree") {
  const auto specs = generator_layers(1, 8, 2, 3);
  auto pd = init_params<double>(specs, 3);
  auto pf = init_params<float>(specs, 3);
  const Tensor<double> x = random_tensor({1, 1, 9, 9}, 4);
  const auto yd = forward(pd, specs, x, Mode::Train).output;
  const auto yf = forward(pf, specs, x.cast<float>(), Mode::Train).output;
  CHECK((yd.data() - yf.data().cast<double>()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("backward basics") {
  const std::vector<LayerSpec> specs{LayerSpec::conv3x3(2, 3)};
  auto params = init_params<double>(specs, 1);
  const Tensor<double> x = random_tensor({1, 2, 5, 4}, 2);
  auto fwd = forward(params, specs, x, Mode::Train);

  SUBCASE("zero output gradient gives zero gradients") {
    const auto g = backward(params, fwd.tape, Tensor<double>(fwd.output.shape()));
    for (const auto& t : g.params) CHECK(t.data().norm() == 0.0);
    CHECK(g.input.data().norm() == 0.0);
  }
  SUBCASE("bias gradient of sum(output) counts output pixels") {
    Tensor<double> ones(fwd.output.shape());
    ones.data().setOnes();
    const auto g = backward(params, fwd.tape, ones);
    for (Index c = 0; c < 3; ++c) CHECK(g.params[1].data()[c] == doctest::Approx(20.0));
  }
  SUBCASE("stale tape") {
    params.entries[0].value.data()[0] += 1.0;
    params.mark_modified();
    CHECK_THROWS_AS(backward(params, fwd.tape, fwd.output), InvalidState);
  }
  SUBCASE("tape from other parameters") {
    auto other = init_params<double>(specs, 1);
    CHECK_THROWS_AS(backward(other, fwd.tape, fwd.output), InvalidState);
  }
  SUBCASE("eval tape and empty tape") {
    auto eval = forward(params, specs, x, Mode::Eval);
    CHECK_THROWS_AS(backward(params, eval.tape, eval.output), InvalidState);
    CHECK_THROWS_AS(backward(params, Tape<double>{}, eval.output), InvalidState);
  }
  SUBCASE("wrong gradient shape") {
    CHECK_THROWS_AS(backward(params, fwd.tape, Tensor<double>({1, 3, 5, 5})), InvalidArgument);
  }
}

TEST_CASE("grad_check") {
  const Tensor<double> x = random_tensor({1, 4, 8, 8}, 9);
  SUBCASE("conv-only net at 1e-6") {
    const std::vector<LayerSpec> specs{LayerSpec::conv3x3(4, 3), LayerSpec::conv1x1(3, 2)};
    const auto r = grad_check(specs, x, 1e-6);
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-6);
  }
  SUBCASE("residual block at 1e-4") {
    const std::vector<LayerSpec> specs{LayerSpec::residual_block(4)};
    CHECK(grad_check(specs, x, 1e-4).passed);
  }
  SUBCASE("every standard case passes") {
    for (const auto& o : run_grad_check_suite(1e-4, 1)) {
      INFO(o.name << " max rel error " << o.report.max_rel_error);
      CHECK(o.report.passed);
    }
  }
  SUBCASE("corrupted leaky-relu adjoint fails") {
    GradCheckOptions opts;
    opts.hooks.corrupt_leaky_relu = true;
    const std::vector<LayerSpec> specs{LayerSpec::conv3x3(4, 4), LayerSpec::leaky_relu(4)};
    CHECK_FALSE(grad_check(specs, x, 1e-4, opts).passed);
  }
}

TEST_CASE("kink pattern lists leaky-relu input signs") {
  const std::vector<LayerSpec> specs{LayerSpec::leaky_relu(1)};
  auto params = init_params<double>(specs, 1);
  Tensor<double> x({1, 1, 1, 3});
  x.data() << -1, 2, 0;
  const auto f = forward(params, specs, x, Mode::Train);
  CHECK(kink_pattern(f.tape) == std::vector<bool>{false, true, false});
}

TEST_CASE("adam") {
  const std::vector<LayerSpec> specs{LayerSpec::conv1x1(1, 1)};
  TrainHyper hyper;
  hyper.learning_rate = 0.01;

  SUBCASE("zero gradient leaves parameters and counts the step") {
    auto params = init_params<double>(specs, 1);
    const auto before = params.entries[0].value.data();
    Gradients<double> g;
    for (const auto& e : params.entries) g.params.emplace_back(e.value.shape());
    AdamState<double> state;
    adam_step(params, g, state, hyper);
    CHECK(state.step == 1);
    CHECK(params.entries[0].value.data() == before);
  }
  SUBCASE("first step moves by lr * g / (|g| + eps)") {
    auto params = init_params<double>(specs, 1);
    const double w0 = params.entries[0].value.data()[0];
    Gradients<double> g;
    for (const auto& e : params.entries) g.params.emplace_back(e.value.shape());
    const double grad = -0.37;
    g.params[0].data()[0] = grad;
    AdamState<double> state;
    adam_step(params, g, state, hyper);
    const double expected = 0.01 * grad / (std::abs(grad) + 1e-8);
    CHECK(params.entries[0].value.data()[0] == doctest::Approx(w0 - expected).epsilon(1e-12));
  }
  SUBCASE("non-finite gradient names the parameter") {
    auto params = init_params<double>(specs, 1);
    Gradients<double> g;
    for (const auto& e : params.entries) g.params.emplace_back(e.value.shape());
    g.params[1].data()[0] = std::numeric_limits<double>::infinity();
    AdamState<double> state;
    try {
      adam_step(params, g, state, hyper);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find(params.entries[1].name) != std::string::npos);
    }
    CHECK(state.step == 0);
  }
  SUBCASE("identical runs follow identical trajectories") {
    auto run = [&] {
      const auto net = generator_layers(1, 4, 1, 3);
      auto params = init_params<double>(net, 5);
      const Tensor<double> x = random_tensor({1, 1, 6, 6}, 6);
      AdamState<double> state;
      for (int i = 0; i < 5; ++i) {
        auto f = forward(params, net, x, Mode::Train);
        adam_step(params, backward(params, f.tape, f.output), state, hyper);
      }
      return params;
    };
    const auto a = run(), b = run();
    for (std::size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i].value.data() == b.entries[i].value.data());
  }
}

TEST_CASE("generator parameter count matches the layer-shape oracle") {
  for (Index in : {1, 4}) {
    const auto p = init_params<float>(generator_layers(in, 32, 9, 3), 0);
    CHECK(p.trainable_count() == generator_param_oracle(in, 32, 9, 3));
  }
  CHECK(generator_param_oracle(1, 32, 9, 3) == 168099);
  CHECK(generator_param_oracle(4, 32, 9, 3) == 168963);
}

TEST_CASE("initialisation") {
  const auto specs = generator_layers(4, 32, 1, 3);
  const auto a = init_params<double>(specs, 3);
  const auto b = init_params<double>(specs, 3);
  const auto c = init_params<double>(specs, 4);
  CHECK(a.entries[0].value.data() == b.entries[0].value.data());
  CHECK(a.entries[0].value.data() != c.entries[0].value.data());
  const double bound = std::sqrt(6.0 / (1.04 * 36.0));
  CHECK(a.entries[0].value.data().cwiseAbs().maxCoeff() <= bound);
  CHECK(a.entries[0].value.data().cwiseAbs().maxCoeff() > 0.9 * bound);
  const std::size_t scale = find_param(a, "layer1.batch-norm.scale");
  CHECK((a.entries[scale].value.data().array() == 1.0).all());
  CHECK_FALSE(a.entries[find_param(a, "layer1.batch-norm.running_var")].trainable);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = testutil::scratch_dir("checkpoint");
  const auto specs = generator_layers(4, 8, 1, 3);
  const auto p = init_params<float>(specs, 2);
  const std::string path = (dir / "p.ckpt").string();
  save_checkpoint(p, path);

  SUBCASE("same width is exact") {
    const auto q = load_checkpoint<float>(path);
    REQUIRE(q.entries.size() == p.entries.size());
    for (std::size_t i = 0; i < p.entries.size(); ++i) {
      CHECK(q.entries[i].name == p.entries[i].name);
      CHECK(q.entries[i].trainable == p.entries[i].trainable);
      CHECK(q.entries[i].value.shape() == p.entries[i].value.shape());
      CHECK(q.entries[i].value.data() == p.entries[i].value.data());
    }
  }
  SUBCASE("float to double widening is exact") {
    const auto q = load_checkpoint<double>(path);
    CHECK(q.entries[0].value.data() == p.entries[0].value.data().cast<double>());
  }
  SUBCASE("header layout") {
    std::ifstream in(path, std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
    REQUIRE(bytes.size() > 20);
    CHECK(std::memcmp(bytes.data(), "MFCKPT\0\0", 8) == 0);
    CHECK(bytes[8] == 1);   // version, little-endian u32
    CHECK(bytes[12] == 4);  // scalar width
    CHECK(bytes[16] == p.entries.size());
  }
  SUBCASE("truncated file") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes.substr(0, bytes.size() - 3);
    CHECK_THROWS_AS(load_checkpoint<float>(path), IoError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint<float>((dir / "none").string()), IoError); }
}
