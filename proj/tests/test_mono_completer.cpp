#include <doctest.h>

#include "monofill/image_io.hpp"
#include "monofill/maskgen.hpp"
#include "monofill/mono_completer.hpp"
#include "test_util.hpp"

using namespace monofill;

TEST_CASE("diffusion fill keeps known pixels and obeys the maximum principle") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const GrayImage g = testutil::random_gray(12, 15, seed);
    const Mask m = testutil::random_mask(12, 15, 0.5, 1000 + seed);
    if (m.missing_count() == m.values.size()) continue;
    const MonoCompletion out = diffusion_fill(g, m, 1e-9);
    CAPTURE(seed);
    CHECK(out.provenance == MonoProvenance::DiffusionFill);
    CHECK_FALSE(out.source_path.has_value());
    const auto known = (m.values == std::uint8_t{0});
    CHECK((known.select(out.gray.values - g.values, 0.0) == 0.0).all());
    const double lo = known.select(g.values, 2.0).minCoeff();
    const double hi = known.select(g.values, -1.0).maxCoeff();
    CHECK(out.gray.values.minCoeff() >= lo - 1e-6);
    CHECK(out.gray.values.maxCoeff() <= hi + 1e-6);
  }
}

TEST_CASE("diffusion fill solves the discrete Laplace equation") {
  const GrayImage g = testutil::random_gray(10, 10, 3);
  const Mask m = rectangle_mask(10, 10, 2, 3, 6, 5);
  const GrayImage u = diffusion_fill(g, m, 1e-12).gray;
  for (Index r = 0; r < 10; ++r)
    for (Index c = 0; c < 10; ++c) {
      if (!m(r, c)) continue;
      double sum = 0.0;
      int n = 0;
      for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
        const Index rr = r + dr, cc = c + dc;
        if (rr < 0 || cc < 0 || rr >= 10 || cc >= 10) continue;
        sum += u(rr, cc);
        ++n;
      }
      CHECK(u(r, c) == doctest::Approx(sum / n).epsilon(1e-9));
    }
}

TEST_CASE("a one-row hole between two known ends is filled linearly") {
  GrayImage g = make_gray(1, 9);
  g(0, 0) = 0.1;
  g(0, 8) = 0.9;
  Mask m = make_mask(1, 9, 1);
  m(0, 0) = 0;
  m(0, 8) = 0;
  const GrayImage u = diffusion_fill(g, m, 1e-13).gray;
  for (Index c = 0; c < 9; ++c) CHECK(u(0, c) == doctest::Approx(0.1 + 0.1 * static_cast<double>(c)).epsilon(1e-9));
}

TEST_CASE("diffusion fill edge cases") {
  const GrayImage g = testutil::random_gray(6, 6, 1);
  SUBCASE("empty mask is the identity") {
    const auto out = diffusion_fill(g, make_mask(6, 6));
    CHECK((out.gray.values == g.values).all());
    CHECK(out.iterations == 0);
  }
  SUBCASE("no known pixel") { CHECK_THROWS_AS(diffusion_fill(g, make_mask(6, 6, 1)), InvalidArgument); }
  SUBCASE("size mismatch") { CHECK_THROWS_AS(diffusion_fill(g, make_mask(6, 5)), InvalidArgument); }
  SUBCASE("non-convergence reports the sweep count") {
    const Mask m = rectangle_mask(6, 6, 1, 1, 4, 4);
    try {
      diffusion_fill(g, m, 1e-14, 2);
      FAIL("expected DiffusionNotConverged");
    } catch (const DiffusionNotConverged& e) {
      CHECK(e.iterations() == 2);
      CHECK(e.residual() > 1e-14);
    }
  }
  SUBCASE("single known pixel spreads everywhere") {
    Mask m = make_mask(6, 6, 1);
    m(2, 3) = 0;
    const auto out = diffusion_fill(g, m, 1e-12);
    CHECK((out.gray.values - g(2, 3)).abs().maxCoeff() < 1e-12);
  }
  CHECK(default_diffusion_iterations(10, 20) == 9000);
  CHECK(default_diffusion_iterations(1000, 1000) == 1000000);
}

TEST_CASE("external monochrome") {
  const GrayImage original = testutil::random_gray(8, 8, 5);
  const Mask mask = rectangle_mask(8, 8, 2, 2, 4, 4);
  GrayImage completed = original;
  completed.values.block(2, 2, 4, 4).setConstant(0.5);

  SUBCASE("consistent file is adopted as is") {
    const auto out = adopt_external_mono(completed, original, mask, true, "mem");
    CHECK(out.provenance == MonoProvenance::ExternalFile);
    CHECK((out.gray.values == completed.values).all());
  }
  SUBCASE("small disagreement within 2/255 is tolerated") {
    completed(0, 0) = std::min(1.0, original(0, 0) + 1.9 / 255.0);
    CHECK_NOTHROW(adopt_external_mono(completed, original, mask, true, "mem"));
  }
  SUBCASE("strict mode names the worst pixel") {
    completed(7, 6) = original(7, 6) > 0.5 ? 0.0 : 1.0;
    completed(0, 1) = std::clamp(original(0, 1) + 0.05, 0.0, 1.0);
    try {
      adopt_external_mono(completed, original, mask, true, "mono.png");
      FAIL("expected InvalidArgument");
    } catch (const InvalidArgument& e) {
      const std::string msg = e.what();
      CHECK(msg.find("mono.png") != std::string::npos);
      CHECK(msg.find("(7, 6)") != std::string::npos);
    }
  }
  SUBCASE("force mode restores known pixels") {
    completed(7, 6) = original(7, 6) > 0.5 ? 0.0 : 1.0;
    const auto out = adopt_external_mono(completed, original, mask, false, "mem");
    CHECK(out.gray(7, 6) == original(7, 6));
    CHECK(out.gray(3, 3) == 0.5);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_WITH_AS(adopt_external_mono(make_gray(8, 9), original, mask, true, "m.png"),
                         doctest::Contains("8x9"), InvalidArgument);
  }
  SUBCASE("file round trip") {
    const auto dir = testutil::scratch_dir("mono");
    const std::string path = (dir / "mono.png").string();
    save_gray(completed, path);
    const auto out = load_external_mono(path, original, mask);
    CHECK(out.source_path == path);
    CHECK((out.gray.values - completed.values).abs().maxCoeff() <= 0.5 / 255.0 + 1e-12);
    CHECK_THROWS_AS(load_external_mono((dir / "none.png").string(), original, mask), IoError);
  }
}
