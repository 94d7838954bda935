#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "focuslab/image.hpp"
#include "focuslab/rng.hpp"

namespace focuslab::testing {

inline Image random_image(int w, int h, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Image img(w, h);
  for (auto& v : img.pixels()) v = rng.uniform(lo, hi);
  return img;
}

/// Checkerboard-and-bars chart with edges at several scales.
inline Image test_chart(int size) {
  Image img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const bool checker = ((x / 4) + (y / 4)) % 2 == 0;
      const bool bar = (x / 2) % 2 == 0 && y > size / 2;
      img.at(x, y) = 0.2 + 0.5 * checker + 0.2 * bar;
    }
  return img;
}

/// Random unimodal sequence of length n with its strict maximum at `peak`.
inline std::vector<double> unimodal_curve(std::size_t n, std::size_t peak, Rng& rng) {
  std::vector<double> v(n);
  v[peak] = 10.0 + rng.uniform();
  for (std::size_t i = peak; i-- > 0;) v[i] = v[i + 1] - rng.uniform(0.01, 1.0);
  for (std::size_t i = peak + 1; i < n; ++i) v[i] = v[i - 1] - rng.uniform(0.01, 1.0);
  return v;
}

/// Fresh, empty scratch directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("focuslab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

} // namespace focuslab::testing
