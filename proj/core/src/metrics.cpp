#include "focuslab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "focuslab/error.hpp"

namespace focuslab::metrics {

Image gradient_magnitude(const Image& image, const GradientKernels& k) {
  if (image.empty()) throw InvalidArgument("gradient_magnitude: empty image");
  bool zero_sum = true;
  for (const auto* st : {&k.gx, &k.gy}) {
    double total = 0.0;
    for (const auto& row : *st)
      for (double t : row) total += t;
    zero_sum = zero_sum && total == 0.0;
  }
  Image out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      // Zero-sum stencils: differences to the centre change nothing mathematically and
      // make flat neighbourhoods score exactly 0.
      const double centre = zero_sum ? image.at(x, y) : 0.0;
      double gx = 0.0, gy = 0.0;
      for (int b = -1; b <= 1; ++b)
        for (int a = -1; a <= 1; ++a) {
          const double v = image.clamped(x - a, y - b) - centre;
          gx += k.gx[b + 1][a + 1] * v;
          gy += k.gy[b + 1][a + 1] * v;
        }
      out.at(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  return out;
}

double weighted_mean(const Image& values, const Image& weight) {
  if (!values.same_shape(weight)) throw InvalidArgument("tenengrad: image and weight map differ in shape");
  double num = 0.0, den = 0.0;
  const auto v = values.pixels();
  const auto w = weight.pixels();
  for (std::size_t i = 0; i < v.size(); ++i) {
    num += w[i] * v[i];
    den += w[i];
  }
  if (!(den > 0.0)) throw InvalidArgument("tenengrad: weight map sums to zero");
  return num / den;
}

double tenengrad(const Image& image, const Image& weight) {
  if (!image.same_shape(weight)) throw InvalidArgument("tenengrad: image and weight map differ in shape");
  return weighted_mean(gradient_magnitude(image), weight);
}

std::vector<double> normalize_curve(std::span<const double> values) {
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = normalize_value(values[i], *lo, *hi);
  return out;
}

double normalize_value(double value, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
}

std::vector<double> sharpness_curve(std::span<const Image> frames, const Image& weight) {
  std::vector<double> curve;
  curve.reserve(frames.size());
  for (const Image& f : frames) curve.push_back(tenengrad(f, weight));
  return curve;
}

std::size_t argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("argmax of an empty sequence");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::size_t best_focus_index(std::span<const Image> frames, const Image& weight) {
  const auto curve = sharpness_curve(frames, weight);
  return argmax_lowest(curve);
}

void write_trace_csv_header(std::ostream& out) { out << kTraceCsvHeader << '\n'; }

void write_trace_csv_rows(std::ostream& out, const SharpnessTrace& trace) {
  char buf[160];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof buf, ",%d,%.6f,%.9g,%.6f\n", r.step, r.focus_dpt, r.tenengrad, r.normalized);
    out << trace.episode << ',' << trace.controller << buf;
  }
}

} // namespace focuslab::metrics
