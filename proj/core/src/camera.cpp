#include "focuslab/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "focuslab/error.hpp"
#include "focuslab/metrics.hpp"
#include "focuslab/rng.hpp"

namespace focuslab::camera {

double FocusRange::clamp(double focus_dpt) const noexcept { return std::clamp(focus_dpt, min_dpt, max_dpt); }

FocalStack::FocalStack(std::vector<Image> frames, std::vector<double> positions, Image mask)
    : frames_(std::move(frames)), positions_(std::move(positions)), mask_(std::move(mask)) {
  if (frames_.size() < 2) throw InvalidArgument("focal stack needs at least two frames");
  if (frames_.size() != positions_.size())
    throw InvalidArgument("focal stack: frame count and focus position count differ");
  for (const Image& f : frames_)
    if (f.empty() || !f.same_shape(frames_.front())) throw InvalidArgument("focal stack: frames differ in size");
  if (!mask_.same_shape(frames_.front())) throw InvalidArgument("focal stack: mask differs in size from frames");
  for (std::size_t i = 1; i < positions_.size(); ++i)
    if (!(positions_[i] > positions_[i - 1]))
      throw InvalidArgument("focal stack: focus positions must be strictly increasing");
  sharpness_ = metrics::sharpness_curve(frames_, mask_);
  best_index_ = metrics::argmax_lowest(sharpness_);
}

std::size_t FocalStack::nearest_index(double focus_dpt) const noexcept {
  const auto it = std::lower_bound(positions_.begin(), positions_.end(), focus_dpt);
  if (it == positions_.begin()) return 0;
  if (it == positions_.end()) return positions_.size() - 1;
  const auto hi = static_cast<std::size_t>(it - positions_.begin());
  const double d_lo = focus_dpt - positions_[hi - 1];
  const double d_hi = positions_[hi] - focus_dpt;
  return d_hi < d_lo ? hi : hi - 1;
}

namespace {

void check_positions(const optics::LensConfig& lens, const std::vector<double>& positions) {
  for (double p : positions)
    if (!lens.in_range(p))
      throw RangeError("focus position " + std::to_string(p) + " dpt outside lens range [" +
                       std::to_string(lens.focus_min_dpt) + ", " + std::to_string(lens.focus_max_dpt) + "]");
}

} // namespace

FocalStack synthesize_stack(const Image& sharp, const Image& mask, const optics::LensConfig& lens,
                            const optics::ObjectPose& object, const std::vector<double>& positions) {
  return synthesize_layered_stack(sharp, mask, lens, object, 0.0, positions);
}

FocalStack synthesize_layered_stack(const Image& sharp, const Image& mask, const optics::LensConfig& lens,
                                    const optics::ObjectPose& object, double context_offset_dpt,
                                    const std::vector<double>& positions) {
  lens.validate();
  if (sharp.empty()) throw InvalidArgument("synthesize_stack: empty sharp image");
  if (!mask.same_shape(sharp)) throw InvalidArgument("synthesize_stack: mask differs in size from image");
  if (!(object.distance_m > 0.0)) throw InvalidArgument("synthesize_stack: object distance must be positive");
  check_positions(lens, positions);

  const bool layered = context_offset_dpt != 0.0;
  const double context_distance =
      layered ? optics::object_distance_for_focus(lens, optics::in_focus_dpt(lens, object.distance_m) + context_offset_dpt)
              : object.distance_m;

  std::vector<Image> frames;
  frames.reserve(positions.size());
  for (double pos : positions) {
    const double f = optics::focal_length_m(lens, pos);
    const double r_obj = optics::coc_radius(lens, f, object.distance_m) / lens.pixel_pitch_m;
    Image frame = optics::apply_defocus(sharp, optics::psf_kernel(r_obj));
    if (layered) {
      const double r_ctx = optics::coc_radius(lens, f, context_distance) / lens.pixel_pitch_m;
      const Image context = optics::apply_defocus(sharp, optics::psf_kernel(r_ctx));
      auto out = frame.pixels();
      const auto ctx = context.pixels();
      const auto m = mask.pixels();
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[i] * out[i] + (1.0 - m[i]) * ctx[i];
    }
    frames.push_back(std::move(frame));
  }
  return FocalStack(std::move(frames), positions, mask);
}

std::vector<double> uniform_positions(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw InvalidArgument("uniform_positions: need n >= 2 and hi > lo");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = hi;
  return out;
}

SyntheticScene make_synthetic_scene(int size, std::uint64_t seed) {
  if (size < 8) throw InvalidArgument("make_synthetic_scene: size must be at least 8");
  Rng rng(seed);
  const double s = size;
  Image surround(size, size, 0.6);

  // Surround: overlapping rectangles and disks give edges at every scale, plus a grating
  // and pixel noise for the finest detail.
  const int shapes = std::max(12, size / 2);
  for (int k = 0; k < shapes; ++k) {
    const double cx = rng.uniform(0, s), cy = rng.uniform(0, s);
    const double rx = rng.uniform(1.5, s / 5), ry = rng.uniform(1.5, s / 5);
    const double delta = rng.uniform(-0.22, 0.22);
    const bool disk = rng.uniform() < 0.5;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double u = (x - cx) / rx, v = (y - cy) / ry;
        if (disk ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0) surround.at(x, y) += delta;
      }
  }
  const double gf = rng.uniform(0.15, 0.45), ga = rng.uniform(0, std::numbers::pi);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      surround.at(x, y) += 0.06 * std::sin(gf * (x * std::cos(ga) + y * std::sin(ga))) + rng.uniform(-0.05, 0.05);

  // Object: dark iris-like ellipse with radial streaks, a pupil and a specular highlight.
  const double cx = s / 2 + rng.uniform(-0.1, 0.1) * s;
  const double cy = s / 2 + rng.uniform(-0.1, 0.1) * s;
  const double a = rng.uniform(0.18, 0.26) * s;
  const double b = rng.uniform(0.11, 0.16) * s;
  const double tilt = rng.uniform(-0.3, 0.3);
  const double streaks = std::round(rng.uniform(10, 22));
  const double streak_phase = rng.uniform(0, 2 * std::numbers::pi);
  const double ring_freq = rng.uniform(0.6, 1.2);
  const double hx = cx + rng.uniform(-0.3, 0.3) * a, hy = cy + rng.uniform(-0.3, 0.3) * b;

  Image sharp(size, size), mask(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = (dx * std::cos(tilt) + dy * std::sin(tilt)) / a;
      const double v = (-dx * std::sin(tilt) + dy * std::cos(tilt)) / b;
      const double rho = std::sqrt(u * u + v * v);
      double value;
      if (rho <= 1.0) {
        mask.at(x, y) = 1.0;
        const double theta = std::atan2(v, u);
        value = 0.3 + 0.1 * std::sin(streaks * theta + streak_phase) + 0.06 * std::sin(ring_freq * rho * b * 2.0) +
                rng.uniform(-0.07, 0.07);
        if (rho < 0.35) value = 0.06 + rng.uniform(0.0, 0.03);
        const double hr = std::hypot(x - hx, y - hy);
        if (hr < std::max(1.0, 0.12 * b)) value = 0.95;
      } else {
        value = surround.at(x, y);
      }
      sharp.at(x, y) = std::clamp(value, 0.0, 1.0);
    }
  return {std::move(sharp), std::move(mask)};
}

FocalStack make_synthetic_stack(const SyntheticStackSpec& spec, const optics::LensConfig& lens, std::size_t index) {
  const std::uint64_t scene_seed = mix_seed(spec.seed, index);
  const SyntheticScene scene = make_synthetic_scene(spec.image_size, scene_seed);
  Rng rng(mix_seed(scene_seed, 1));
  const double best = rng.uniform(spec.best_focus_min_dpt, spec.best_focus_max_dpt);
  const optics::ObjectPose pose{optics::object_distance_for_focus(lens, best), 0.0, 0.0};
  const auto positions = uniform_positions(lens.focus_min_dpt, lens.focus_max_dpt, spec.positions);
  return synthesize_layered_stack(scene.sharp, scene.mask, lens, pose, spec.context_offset_dpt, positions);
}

std::string to_string(MotionKind kind) {
  switch (kind) {
  case MotionKind::Static: return "static";
  case MotionKind::Linear: return "linear";
  case MotionKind::Swing: return "swing";
  case MotionKind::Random: return "random";
  }
  return "unknown";
}

MotionKind parse_motion_kind(const std::string& name) {
  if (name == "static") return MotionKind::Static;
  if (name == "linear") return MotionKind::Linear;
  if (name == "swing") return MotionKind::Swing;
  if (name == "random") return MotionKind::Random;
  throw InvalidArgument("unknown motion kind '" + name + "' (expected static, linear, swing or random)");
}

void MotionModel::validate() const {
  if (kind == MotionKind::Swing && !(period > 0.0)) throw InvalidArgument("swing motion: period must be positive");
  if (max_step_x_px < 0 || max_step_y_px < 0 || max_step_z_dpt < 0)
    throw InvalidArgument("random motion: step bounds must be non-negative");
}

MotionStep step_motion(const MotionModel& m, int t) {
  if (t < 0) throw InvalidArgument("step_motion: negative time step");
  switch (m.kind) {
  case MotionKind::Static: return {};
  case MotionKind::Linear: return {m.vx_px, m.vy_px, m.vz_dpt};
  case MotionKind::Swing: {
    const double w = 2.0 * std::numbers::pi / m.period;
    const double d = std::sin(w * (t + 1) + m.phase) - std::sin(w * t + m.phase);
    return {m.amp_x_px * d, m.amp_y_px * d, m.amp_z_dpt * d};
  }
  case MotionKind::Random: {
    Rng rng(mix_seed(m.rng_seed, static_cast<std::uint64_t>(t)));
    const double dx = rng.uniform(-m.max_step_x_px, m.max_step_x_px);
    const double dy = rng.uniform(-m.max_step_y_px, m.max_step_y_px);
    const double dz = rng.uniform(-m.max_step_z_dpt, m.max_step_z_dpt);
    return {dx, dy, dz};
  }
  }
  return {};
}

int EpisodeState::shift_x() const noexcept { return static_cast<int>(std::lround(accumulated_shift_x)); }
int EpisodeState::shift_y() const noexcept { return static_cast<int>(std::lround(accumulated_shift_y)); }

EpisodeState start_episode(std::shared_ptr<const FocalStack> stack, MotionModel motion, FocusRange range,
                           double initial_focus_dpt) {
  if (!stack) throw InvalidArgument("start_episode: null stack");
  if (!(range.max_dpt > range.min_dpt)) throw InvalidArgument("start_episode: empty focus range");
  motion.validate();
  EpisodeState s;
  s.stack = std::move(stack);
  s.motion = motion;
  s.range = range;
  s.current_focus_dpt = range.clamp(initial_focus_dpt);
  return s;
}

Capture capture(const EpisodeState& state, double command_dpt) {
  Capture c;
  const double command = state.range.clamp(command_dpt);
  c.effective_focus_dpt = command + state.accumulated_offset_dpt;
  c.frame_index = state.stack->nearest_index(c.effective_focus_dpt);
  c.shift_x = state.shift_x();
  c.shift_y = state.shift_y();
  c.image = translate(state.stack->frame(c.frame_index), c.shift_x, c.shift_y);

  c.next = state;
  const MotionStep step = step_motion(state.motion, state.t);
  c.next.t = state.t + 1;
  c.next.current_focus_dpt = command;
  c.next.accumulated_offset_dpt += step.dz_dpt;
  c.next.accumulated_shift_x += step.dx_px;
  c.next.accumulated_shift_y += step.dy_px;
  return c;
}

Image shifted_mask(const FocalStack& stack, int shift_x, int shift_y) {
  return translate(stack.object_mask(), shift_x, shift_y);
}

double best_command_dpt(const EpisodeState& state) {
  return state.range.clamp(state.stack->best_focus_dpt() - state.accumulated_offset_dpt);
}

} // namespace focuslab::camera
