#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace focuslab {

/// Row-major single-channel image with real intensities (nominally [0, 1]).
class Image {
public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);
  Image(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  /// Edge-replicated read: coordinates are clamped into the image.
  double clamped(int x, int y) const noexcept;

  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

/// Whole-pixel translation by (dx, dy) with edge replication; output(x, y) = input(x - dx, y - dy).
Image translate(const Image& image, int dx, int dy);

/// Rounds every pixel to the nearest of the 256 levels k/255 after clamping to [0, 1].
Image quantize8(const Image& image);

/// Binary 8-bit PGM (P5). Intensities are scaled by 1/255 on read and by 255 on write.
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& image);

} // namespace focuslab
