#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "focuslab/image.hpp"
#include "focuslab/optics.hpp"

namespace focuslab::camera {

/// Closed interval of commandable focus positions, diopters.
struct FocusRange {
  double min_dpt = -2.0;
  double max_dpt = 3.0;

  double clamp(double focus_dpt) const noexcept;
  double span() const noexcept { return max_dpt - min_dpt; }
  static FocusRange of(const optics::LensConfig& lens) { return {lens.focus_min_dpt, lens.focus_max_dpt}; }
};

/// Co-registered frames indexed by strictly increasing focus position. Immutable; the
/// ground-truth best index is always recomputed from the frames and the mask.
class FocalStack {
public:
  /// Throws InvalidArgument when fewer than two frames, sizes disagree, positions are not
  /// strictly increasing, or the mask is empty / all zero.
  FocalStack(std::vector<Image> frames, std::vector<double> focus_positions_dpt, Image object_mask);

  std::size_t size() const noexcept { return frames_.size(); }
  int width() const noexcept { return frames_.front().width(); }
  int height() const noexcept { return frames_.front().height(); }

  const std::vector<Image>& frames() const noexcept { return frames_; }
  const Image& frame(std::size_t i) const { return frames_.at(i); }
  const std::vector<double>& focus_positions_dpt() const noexcept { return positions_; }
  double position(std::size_t i) const { return positions_.at(i); }
  const Image& object_mask() const noexcept { return mask_; }

  /// Mask-weighted Tenengrad of each frame.
  const std::vector<double>& sharpness() const noexcept { return sharpness_; }
  std::size_t best_index() const noexcept { return best_index_; }
  double best_focus_dpt() const { return positions_[best_index_]; }

  /// Index of the position closest to `focus_dpt`; exact ties go to the lower index.
  std::size_t nearest_index(double focus_dpt) const noexcept;
  FocusRange span() const noexcept { return {positions_.front(), positions_.back()}; }

  friend bool operator==(const FocalStack&, const FocalStack&) = default;

private:
  std::vector<Image> frames_;
  std::vector<double> positions_;
  Image mask_;
  std::vector<double> sharpness_;
  std::size_t best_index_ = 0;
};

/// Frame i is the sharp image blurred with the PSF of the CoC at positions_dpt[i].
/// Throws RangeError for positions outside the lens range.
FocalStack synthesize_stack(const Image& sharp_image, const Image& mask, const optics::LensConfig& lens,
                            const optics::ObjectPose& object, const std::vector<double>& positions_dpt);

/// Two-depth variant: pixels under the mask are blurred for the object distance, the rest
/// for a surround layer whose in-focus position is `context_offset_dpt` above the object's
/// (a positive offset puts the surround nearer the camera). The relative blur of the two
/// layers carries the sign of the defocus, which a single-depth scene cannot.
/// With a zero offset this equals synthesize_stack.
FocalStack synthesize_layered_stack(const Image& sharp_image, const Image& mask, const optics::LensConfig& lens,
                                    const optics::ObjectPose& object, double context_offset_dpt,
                                    const std::vector<double>& positions_dpt);

/// n positions uniformly spanning [lo, hi], both ends included.
std::vector<double> uniform_positions(double lo_dpt, double hi_dpt, std::size_t n);

/// Procedural eye-like scene: a dark textured elliptical object (mask = 1) on a lighter
/// textured surround. Deterministic in (size, seed).
struct SyntheticScene {
  Image sharp;
  Image mask;
};
SyntheticScene make_synthetic_scene(int size, std::uint64_t seed);

/// Parameters of a family of synthetic focal stacks.
struct SyntheticStackSpec {
  int image_size = 64;
  std::size_t positions = 80;
  /// In-focus position of the object is drawn uniformly from this band (diopters).
  double best_focus_min_dpt = -1.2;
  double best_focus_max_dpt = 2.2;
  /// 0 gives single-depth stacks (synthesize_stack).
  double context_offset_dpt = 0.8;
  std::uint64_t seed = 1;
};

/// Stack number `index` of the family: scene seed and object distance are derived from
/// (spec.seed, index), so stacks can be generated independently and in any order.
FocalStack make_synthetic_stack(const SyntheticStackSpec& spec, const optics::LensConfig& lens, std::size_t index);

/// Focal-stack directory: `manifest.tsv` (index, focus_dpt, filename), 8-bit PGM frames and
/// an optional `mask.pgm` (255 = object).
inline constexpr const char* kManifestName = "manifest.tsv";
inline constexpr const char* kManifestHeader = "index\tfocus_dpt\tfilename";
inline constexpr const char* kMaskName = "mask.pgm";

void save_stack(const FocalStack& stack, const std::filesystem::path& dir);
/// Throws FormatError for a missing manifest or frame (naming the file), a malformed row,
/// frames of different sizes, or focus positions that are not strictly increasing.
FocalStack load_stack(const std::filesystem::path& dir);

enum class MotionKind { Static, Linear, Swing, Random };

std::string to_string(MotionKind kind);
/// Accepts "static", "linear", "swing", "random"; throws InvalidArgument otherwise.
MotionKind parse_motion_kind(const std::string& name);

/// Object motion: x/y in pixels, z as a focus offset in diopters.
struct MotionModel {
  MotionKind kind = MotionKind::Static;
  /// Linear: per-step velocity.
  double vx_px = 0.0, vy_px = 0.0, vz_dpt = 0.0;
  /// Swing: position(t) = amplitude * sin(2 pi t / period + phase) per axis.
  double amp_x_px = 0.0, amp_y_px = 0.0, amp_z_dpt = 0.0;
  double period = 20.0;
  double phase = 0.0;
  /// Random: per-step deltas uniform in [-max, max] per axis.
  double max_step_x_px = 0.0, max_step_y_px = 0.0, max_step_z_dpt = 0.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct MotionStep {
  double dx_px = 0.0;
  double dy_px = 0.0;
  double dz_dpt = 0.0;
};

/// Displacement between time steps t and t + 1. Pure in (motion, t).
MotionStep step_motion(const MotionModel& motion, int t);

/// One autofocus run on the virtual camera.
struct EpisodeState {
  std::shared_ptr<const FocalStack> stack;
  MotionModel motion;
  FocusRange range;
  int t = 0;
  double current_focus_dpt = 0.0;
  double accumulated_offset_dpt = 0.0;
  double accumulated_shift_x = 0.0;
  double accumulated_shift_y = 0.0;

  /// Whole-pixel shift applied to the next capture.
  int shift_x() const noexcept;
  int shift_y() const noexcept;
};

EpisodeState start_episode(std::shared_ptr<const FocalStack> stack, MotionModel motion, FocusRange range,
                           double initial_focus_dpt);

struct Capture {
  Image image;
  EpisodeState next;
  std::size_t frame_index = 0;
  double effective_focus_dpt = 0.0;
  int shift_x = 0;
  int shift_y = 0;
};

/// Captures at clamp(command) + accumulated z offset: the nearest stack frame, translated by
/// the accumulated xy shift with edge replication. The returned state has advanced one step.
Capture capture(const EpisodeState& state, double command_dpt);

/// Ground-truth mask translated along with the object.
Image shifted_mask(const FocalStack& stack, int shift_x, int shift_y);

/// Command that makes the next capture land on the sharpest frame, clamped to the range.
double best_command_dpt(const EpisodeState& state);

} // namespace focuslab::camera
