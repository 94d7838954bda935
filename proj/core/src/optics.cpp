#include "focuslab/optics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "focuslab/error.hpp"

namespace focuslab::optics {

void LensConfig::validate() const {
  if (!(aperture_radius_m > 0.0)) throw InvalidArgument("lens: aperture radius must be positive");
  if (!(image_plane_m > 0.0)) throw InvalidArgument("lens: image plane distance must be positive");
  if (!(pixel_pitch_m > 0.0)) throw InvalidArgument("lens: pixel pitch must be positive");
  if (!(focus_min_dpt < focus_max_dpt)) throw InvalidArgument("lens: focus_min_dpt must be below focus_max_dpt");
  if (!(base_power_dpt + focus_min_dpt > 0.0))
    throw InvalidArgument("lens: total optical power must stay positive over the focus range");
}

double LensConfig::clamp_focus(double focus_dpt) const noexcept {
  return std::clamp(focus_dpt, focus_min_dpt, focus_max_dpt);
}

double image_distance(double focal_length_m, double object_distance_m) {
  if (!(focal_length_m > 0.0) || !(object_distance_m > 0.0))
    throw InvalidArgument("image_distance: focal length and object distance must be positive");
  const double gap = object_distance_m - focal_length_m;
  if (std::abs(gap) < kDegenerateEpsilon)
    throw DegenerateGeometry("image_distance: object at the focal point, image at infinity");
  return focal_length_m * object_distance_m / gap;
}

double coc_radius(const LensConfig& lens, double focal_length_m, double object_distance_m) {
  if (!(focal_length_m > 0.0) || !(object_distance_m > 0.0))
    throw InvalidArgument("coc_radius: focal length and object distance must be positive");
  const double L = lens.image_plane_m;
  const double f = focal_length_m;
  const double p = object_distance_m;
  return lens.aperture_radius_m * std::abs(L * p - f * (L + p)) / (f * p);
}

double focal_length_m(const LensConfig& lens, double focus_dpt) {
  const double power = lens.base_power_dpt + focus_dpt;
  if (!(power > 0.0)) throw InvalidArgument("focal_length_m: non-positive total optical power");
  return 1.0 / power;
}

double in_focus_dpt(const LensConfig& lens, double object_distance_m) {
  if (!(object_distance_m > 0.0)) throw InvalidArgument("in_focus_dpt: object distance must be positive");
  return 1.0 / lens.image_plane_m + 1.0 / object_distance_m - lens.base_power_dpt;
}

double object_distance_for_focus(const LensConfig& lens, double focus_dpt) {
  const double vergence = lens.base_power_dpt + focus_dpt - 1.0 / lens.image_plane_m;
  if (!(vergence > 0.0))
    throw RangeError("object_distance_for_focus: focus position " + std::to_string(focus_dpt) +
                     " dpt has no real object in focus");
  return 1.0 / vergence;
}

double blur_radius_px(const LensConfig& lens, double focus_dpt, double object_distance_m) {
  return coc_radius(lens, focal_length_m(lens, focus_dpt), object_distance_m) / lens.pixel_pitch_m;
}

int auto_kernel_size(double radius_px) {
  if (!(radius_px >= 0.0)) throw InvalidArgument("auto_kernel_size: radius must be non-negative");
  return 2 * static_cast<int>(std::ceil(3.0 * radius_px)) + 1;
}

PsfKernel psf_kernel(double radius_px, int size) {
  if (!(radius_px >= 0.0) || !std::isfinite(radius_px))
    throw InvalidArgument("psf_kernel: radius must be finite and non-negative");
  if (size < 1 || size % 2 == 0)
    throw InvalidArgument("psf_kernel: size must be odd and positive, got " + std::to_string(size));

  PsfKernel k;
  k.radius_px_ = radius_px;
  k.size_ = size;
  const int h = size / 2;
  k.profile_.assign(size, 0.0);
  if (radius_px == 0.0) {
    k.profile_[h] = 1.0;
  } else {
    const double inv_r2 = 1.0 / (radius_px * radius_px);
    double sum = 0.0;
    for (int i = -h; i <= h; ++i) sum += k.profile_[i + h] = std::exp(-i * i * inv_r2);
    for (double& v : k.profile_) v /= sum;
  }
  k.taps_.resize(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) k.taps_[y * size + x] = k.profile_[y] * k.profile_[x];
  return k;
}

PsfKernel psf_kernel(double radius_px) { return psf_kernel(radius_px, auto_kernel_size(radius_px)); }

Image apply_defocus(const Image& image, const PsfKernel& kernel) {
  if (image.empty()) throw InvalidArgument("apply_defocus: empty image");
  const int w = image.width();
  const int h = image.height();
  const int r = kernel.half();
  const auto& g = kernel.profile();
  if (r == 0) return image;

  // The Gaussian factorizes, and per-axis clamping makes two 1-D passes equal to the
  // 2-D edge-replicated convolution. Each line is copied into a padded buffer first.
  std::vector<double> line(static_cast<std::size_t>(std::max(w, h) + 2 * r));
  auto convolve_line = [&](int n, auto&& read, auto&& write) {
    for (int k = -r; k < n + r; ++k) line[static_cast<std::size_t>(k + r)] = read(std::clamp(k, 0, n - 1));
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += g[i + r] * line[static_cast<std::size_t>(x - i + r)];
      write(x, acc);
    }
  };
  Image rows(w, h);
  for (int y = 0; y < h; ++y)
    convolve_line(w, [&](int x) { return image.at(x, y); }, [&](int x, double v) { rows.at(x, y) = v; });
  Image out(w, h);
  for (int x = 0; x < w; ++x)
    convolve_line(h, [&](int y) { return rows.at(x, y); }, [&](int y, double v) { out.at(x, y) = v; });

  const auto [lo, hi] = std::minmax_element(image.pixels().begin(), image.pixels().end());
  for (double& v : out.pixels()) v = std::clamp(v, *lo, *hi);
  return out;
}

} // namespace focuslab::optics
