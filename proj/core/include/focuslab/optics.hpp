#pragma once

#include <vector>

#include "focuslab/image.hpp"

/// Thin-lens defocus model: image distance, circle-of-confusion radius, Gaussian PSF and
/// blur rendering.
///
/// Focus positions are expressed in diopters of the *tunable* element. The tunable lens sits
/// in contact with a fixed lens of power `base_power_dpt`, so the total optical power is
/// `base_power_dpt + focus_dpt` and the focal length is its reciprocal. With
/// `base_power_dpt == 0` focus positions are plain reciprocal focal lengths.
namespace focuslab::optics {

/// Physical camera description.
///
/// The defaults are simulation values, not measurements of any real camera: a 4 mm aperture
/// radius, a sensor 20 mm behind the lens, a 52 dpt fixed lens and a 50 um effective pixel
/// pitch (the pitch of a 64x64 downsampled frame). With these, the -2..+3 dpt tunable range
/// focuses from infinity down to 0.2 m and the CoC grows by 1.6 px per diopter of defocus.
struct LensConfig {
  double aperture_radius_m = 0.004;
  double image_plane_m = 0.02;
  double focus_min_dpt = -2.0;
  double focus_max_dpt = 3.0;
  double pixel_pitch_m = 50e-6;
  double base_power_dpt = 52.0;

  /// Throws InvalidArgument when an invariant is violated.
  void validate() const;

  double clamp_focus(double focus_dpt) const noexcept;
  bool in_range(double focus_dpt) const noexcept {
    return focus_dpt >= focus_min_dpt && focus_dpt <= focus_max_dpt;
  }
};

struct ObjectPose {
  double distance_m = 0.5;
  double lateral_x_px = 0.0;
  double lateral_y_px = 0.0;
};

/// |p - f| below this is treated as the object sitting at the focal point.
inline constexpr double kDegenerateEpsilon = 1e-9;

/// Thin-lens conjugate q = f p / (p - f). Throws DegenerateGeometry when p ~= f.
double image_distance(double focal_length_m, double object_distance_m);

/// CoC radius R = D |L p - f (L + p)| / (f p), in meters.
double coc_radius(const LensConfig& lens, double focal_length_m, double object_distance_m);

/// Focal length in meters of the lens stack at a tunable focus position.
double focal_length_m(const LensConfig& lens, double focus_dpt);

/// Tunable focus position that images an object at `object_distance_m` sharply.
double in_focus_dpt(const LensConfig& lens, double object_distance_m);

/// Object distance that is in focus at `focus_dpt`; inverse of in_focus_dpt.
double object_distance_for_focus(const LensConfig& lens, double focus_dpt);

/// CoC radius in pixels at a tunable focus position.
double blur_radius_px(const LensConfig& lens, double focus_dpt, double object_distance_m);

/// Normalized, radially symmetric Gaussian PSF on an odd square grid.
class PsfKernel {
public:
  double radius_px() const noexcept { return radius_px_; }
  int size() const noexcept { return size_; }
  int half() const noexcept { return size_ / 2; }

  /// Row-major size x size taps.
  const std::vector<double>& taps() const noexcept { return taps_; }
  double tap(int dx, int dy) const { return taps_[(dy + half()) * size_ + dx + half()]; }

  /// 1-D factor; taps() is its outer product with itself.
  const std::vector<double>& profile() const noexcept { return profile_; }

private:
  friend PsfKernel psf_kernel(double radius_px, int size);
  double radius_px_ = 0.0;
  int size_ = 1;
  std::vector<double> profile_{1.0};
  std::vector<double> taps_{1.0};
};

/// Odd support that covers at least 3R on each side (6R + 1 overall).
int auto_kernel_size(double radius_px);

/// Samples exp(-(x^2 + y^2) / R^2) on the integer grid and renormalizes the taps to sum 1.
/// R = 0 gives the delta kernel. Throws InvalidArgument for an even or non-positive size
/// or a negative radius.
PsfKernel psf_kernel(double radius_px, int size);
PsfKernel psf_kernel(double radius_px);

/// Convolution with edge replication; same dimensions as the input and intensities within
/// the input's [min, max]. Throws InvalidArgument for an empty image.
Image apply_defocus(const Image& image, const PsfKernel& kernel);

} // namespace focuslab::optics
