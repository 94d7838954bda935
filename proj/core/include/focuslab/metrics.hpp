#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "focuslab/image.hpp"

namespace focuslab::metrics {

using Stencil3 = std::array<std::array<int, 3>, 3>;

/// Horizontal and vertical gradient stencils of the Tenengrad measure. The vertical stencil
/// is the transpose of the horizontal one, so every row and column sums to zero and a
/// constant image scores exactly 0.
struct GradientKernels {
  Stencil3 gx{{{+2, 0, -2}, {+4, 0, -4}, {+2, 0, -2}}};
  Stencil3 gy{{{+2, +4, +2}, {0, 0, 0}, {-2, -4, -2}}};
};

inline constexpr GradientKernels kTenengradKernels{};

/// sqrt((Gx * I)^2 + (Gy * I)^2) per pixel, edge-replicated borders.
Image gradient_magnitude(const Image& image, const GradientKernels& kernels = kTenengradKernels);

/// Weighted Tenengrad T = sum(Y * |grad I|) / sum(Y).
/// Throws InvalidArgument on a shape mismatch or when sum(Y) <= 0.
double tenengrad(const Image& image, const Image& weight);

/// Same as tenengrad() for a precomputed gradient magnitude map.
double weighted_mean(const Image& values, const Image& weight);

/// Affine map onto [0, 1]; an all-equal input maps to all zeros.
std::vector<double> normalize_curve(std::span<const double> values);

/// Maps one value into [0, 1] given the reference range; clamps outside it, and a degenerate
/// range maps to 0 as in normalize_curve.
double normalize_value(double value, double lo, double hi);

/// Mask-weighted Tenengrad of every frame.
std::vector<double> sharpness_curve(std::span<const Image> frames, const Image& weight);

/// argmax of the sharpness curve, ties to the lower index.
std::size_t best_focus_index(std::span<const Image> frames, const Image& weight);
std::size_t argmax_lowest(std::span<const double> values);

struct SharpnessRecord {
  int step = 0;
  double focus_dpt = 0.0;
  double tenengrad = 0.0;
  double normalized = 0.0;
};

/// One autofocus episode: one record per captured frame.
struct SharpnessTrace {
  std::string episode;
  std::string controller;
  std::vector<SharpnessRecord> records;
  /// Set when the episode aborted; records then hold the steps completed before the error.
  std::string error;
};

/// Column header of the trace CSV format.
inline constexpr const char* kTraceCsvHeader = "episode,controller,step,focus_dpt,tenengrad,normalized";

void write_trace_csv_header(std::ostream& out);
void write_trace_csv_rows(std::ostream& out, const SharpnessTrace& trace);

} // namespace focuslab::metrics
