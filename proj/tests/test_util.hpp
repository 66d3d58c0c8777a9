#pragma once

#include <filesystem>
#include <string>

#include "monofill/image.hpp"
#include "monofill/rng.hpp"

namespace testutil {

inline std::string data(const std::string& name) { return std::string(MONOFILL_TEST_DATA) + "/" + name; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("monofill_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline monofill::RgbImage random_rgb(monofill::Index h, monofill::Index w, std::uint64_t seed) {
  monofill::SplitMix64 rng(seed);
  monofill::RgbImage img = monofill::make_rgb(h, w);
  for (auto& c : img.channels)
    for (monofill::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform();
  return img;
}

inline monofill::GrayImage random_gray(monofill::Index h, monofill::Index w, std::uint64_t seed) {
  monofill::SplitMix64 rng(seed);
  monofill::GrayImage img = monofill::make_gray(h, w);
  for (monofill::Index i = 0; i < img.values.size(); ++i) img.values.data()[i] = rng.uniform();
  return img;
}

inline monofill::Mask random_mask(monofill::Index h, monofill::Index w, double p, std::uint64_t seed) {
  monofill::SplitMix64 rng(seed);
  monofill::Mask m = monofill::make_mask(h, w);
  for (monofill::Index i = 0; i < m.values.size(); ++i) m.values.data()[i] = rng.uniform() < p ? 1 : 0;
  return m;
}

}  // namespace testutil
