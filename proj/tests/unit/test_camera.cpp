#include <gtest/gtest.h>

#include <memory>

#include "focuslab/camera.hpp"
#include "focuslab/error.hpp"
#include "test_support.hpp"

namespace focuslab {
namespace {

using namespace camera;

std::shared_ptr<const FocalStack> small_stack(std::uint64_t seed = 3) {
  SyntheticStackSpec spec;
  spec.image_size = 32;
  spec.positions = 40;
  spec.seed = seed;
  return std::make_shared<const FocalStack>(make_synthetic_stack(spec, optics::LensConfig{}, 0));
}

int local_maxima(const std::vector<double>& v) {
  int n = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if ((i == 0 || v[i] > v[i - 1]) && (i + 1 == v.size() || v[i] >= v[i + 1])) ++n;
  return n;
}

TEST(FocalStack, RejectsInvalidConstruction) {
  const Image a(4, 4, 0.5), b(5, 4, 0.5), m(4, 4, 1.0);
  EXPECT_THROW(FocalStack({a}, {0.0}, m), InvalidArgument);
  EXPECT_THROW(FocalStack({a, b}, {0.0, 1.0}, m), InvalidArgument);
  EXPECT_THROW(FocalStack({a, a}, {1.0, 1.0}, m), InvalidArgument);
  EXPECT_THROW(FocalStack({a, a}, {0.0, 1.0}, Image(3, 3, 1.0)), InvalidArgument);
  EXPECT_THROW(FocalStack({a, a}, {0.0, 1.0}, Image(4, 4, 0.0)), InvalidArgument);
}

TEST(FocalStack, NearestIndexTiesGoLow) {
  const Image a(4, 4, 0.5);
  const FocalStack s({a, a, a}, {0.0, 1.0, 2.0}, Image(4, 4, 1.0));
  EXPECT_EQ(s.nearest_index(-5.0), 0u);
  EXPECT_EQ(s.nearest_index(0.5), 0u);
  EXPECT_EQ(s.nearest_index(0.50001), 1u);
  EXPECT_EQ(s.nearest_index(1.5), 1u);
  EXPECT_EQ(s.nearest_index(9.0), 2u);
}

TEST(SynthesizeStack, InFocusFrameIsTheSharpImage) {
  const optics::LensConfig lens;
  const auto scene = make_synthetic_scene(32, 9);
  const double p = 0.6;
  const double in_focus = optics::in_focus_dpt(lens, p);
  const std::vector<double> positions{-1.5, -0.5, in_focus, 2.0, 2.9};
  const auto stack = synthesize_stack(scene.sharp, scene.mask, lens, {p, 0, 0}, positions);
  EXPECT_EQ(stack.frame(2), scene.sharp);
  EXPECT_EQ(stack.best_index(), 2u);
}

TEST(SynthesizeStack, UnimodalOverEightyPositions) {
  const optics::LensConfig lens;
  const auto positions = uniform_positions(lens.focus_min_dpt, lens.focus_max_dpt, 80);
  Rng rng(30);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto scene = make_synthetic_scene(48, seed);
    const double best = rng.uniform(-1.5, 2.5);
    const optics::ObjectPose pose{optics::object_distance_for_focus(lens, best), 0, 0};
    const auto stack = synthesize_stack(scene.sharp, scene.mask, lens, pose, positions);
    EXPECT_EQ(local_maxima(stack.sharpness()), 1) << "seed " << seed;
    // Below ~0.3 px the sampled PSF is numerically a delta, so neighbours of the true
    // focus tie up to rounding and the argmax can land one frame further out.
    EXPECT_NEAR(stack.best_focus_dpt(), best, 2 * 5.0 / 79.0);
  }
}

TEST(SynthesizeStack, LayeredStacksAreUnimodalToo) {
  SyntheticStackSpec spec;
  for (std::size_t i = 0; i < 8; ++i) {
    const auto stack = make_synthetic_stack(spec, optics::LensConfig{}, i);
    EXPECT_EQ(local_maxima(stack.sharpness()), 1) << "stack " << i;
  }
}

TEST(SynthesizeStack, Deterministic) {
  SyntheticStackSpec spec;
  spec.image_size = 32;
  EXPECT_EQ(make_synthetic_stack(spec, optics::LensConfig{}, 4), make_synthetic_stack(spec, optics::LensConfig{}, 4));
}

TEST(SynthesizeStack, ZeroOffsetLayeredEqualsSingleDepth) {
  const optics::LensConfig lens;
  const auto scene = make_synthetic_scene(24, 2);
  const auto positions = uniform_positions(-2, 3, 6);
  EXPECT_EQ(synthesize_stack(scene.sharp, scene.mask, lens, {0.5, 0, 0}, positions),
            synthesize_layered_stack(scene.sharp, scene.mask, lens, {0.5, 0, 0}, 0.0, positions));
}

TEST(SynthesizeStack, PositionsOutsideLensRangeRejected) {
  const auto scene = make_synthetic_scene(16, 1);
  EXPECT_THROW(synthesize_stack(scene.sharp, scene.mask, optics::LensConfig{}, {0.5, 0, 0}, {-2.5, 0.0}), RangeError);
  EXPECT_THROW(synthesize_stack(scene.sharp, scene.mask, optics::LensConfig{}, {0.5, 0, 0}, {0.0, 3.01}), RangeError);
}

TEST(StepMotion, Kinds) {
  MotionModel m;
  for (int t = 0; t < 30; ++t) {
    const auto s = step_motion(m, t);
    EXPECT_EQ(s.dx_px, 0.0);
    EXPECT_EQ(s.dy_px, 0.0);
    EXPECT_EQ(s.dz_dpt, 0.0);
  }
  m.kind = MotionKind::Linear;
  m.vx_px = 1.5;
  m.vz_dpt = -0.05;
  EXPECT_EQ(step_motion(m, 7).dx_px, 1.5);
  EXPECT_EQ(step_motion(m, 7).dz_dpt, -0.05);

  MotionModel swing;
  swing.kind = MotionKind::Swing;
  swing.amp_z_dpt = 0.5;
  swing.period = 12;
  swing.phase = 0.3;
  EXPECT_NEAR(step_motion(swing, 12).dz_dpt, step_motion(swing, 0).dz_dpt, 1e-12);
  double z = 0.0;
  for (int t = 0; t < 12; ++t) z += step_motion(swing, t).dz_dpt;
  EXPECT_NEAR(z, 0.0, 1e-12);

  MotionModel rnd;
  rnd.kind = MotionKind::Random;
  rnd.max_step_z_dpt = 0.1;
  rnd.max_step_x_px = 2.0;
  rnd.rng_seed = 99;
  for (int t = 0; t < 30; ++t) {
    const auto a = step_motion(rnd, t), b = step_motion(rnd, t);
    EXPECT_EQ(a.dz_dpt, b.dz_dpt);
    EXPECT_EQ(a.dx_px, b.dx_px);
    EXPECT_LE(std::abs(a.dz_dpt), 0.1);
    EXPECT_LE(std::abs(a.dx_px), 2.0);
  }
  EXPECT_THROW(step_motion(rnd, -1), InvalidArgument);
}

TEST(StepMotion, ParseAndValidate) {
  EXPECT_EQ(parse_motion_kind("swing"), MotionKind::Swing);
  EXPECT_EQ(to_string(MotionKind::Random), "random");
  EXPECT_THROW(parse_motion_kind("orbit"), InvalidArgument);
  MotionModel m;
  m.kind = MotionKind::Swing;
  m.period = 0.0;
  EXPECT_THROW(m.validate(), InvalidArgument);
}

TEST(Capture, ExactPositionReturnsThatFrame) {
  const auto stack = small_stack();
  const auto state = start_episode(stack, {}, FocusRange{}, 0.0);
  for (std::size_t k : {0u, 7u, 39u}) {
    const auto c = capture(state, stack->position(k));
    EXPECT_EQ(c.frame_index, k);
    EXPECT_EQ(c.image, stack->frame(k));
  }
}

TEST(Capture, CommandsClamp) {
  const auto stack = small_stack();
  const auto state = start_episode(stack, {}, FocusRange{}, 0.0);
  EXPECT_EQ(capture(state, 7.0).image, capture(state, 3.0).image);
  EXPECT_EQ(capture(state, 7.0).next.current_focus_dpt, 3.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-10, 10);
    const auto a = capture(state, x), b = capture(state, FocusRange{}.clamp(x));
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.next.current_focus_dpt, b.next.current_focus_dpt);
  }
}

TEST(Capture, AdvancesTimeAndIsDeterministic) {
  const auto stack = small_stack();
  MotionModel m;
  m.kind = MotionKind::Random;
  m.max_step_z_dpt = 0.2;
  m.max_step_x_px = 3;
  m.rng_seed = 5;
  auto s1 = start_episode(stack, m, FocusRange{}, 0.5);
  auto s2 = s1;
  for (int t = 0; t < 10; ++t) {
    const auto a = capture(s1, 0.5), b = capture(s2, 0.5);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.next.t, t + 1);
    s1 = a.next;
    s2 = b.next;
  }
}

TEST(Capture, StaticSceneIgnoresTime) {
  const auto stack = small_stack();
  auto state = start_episode(stack, {}, FocusRange{}, 0.0);
  const Image first = capture(state, 1.1).image;
  for (int t = 0; t < 10; ++t) state = capture(state, -1.0).next;
  EXPECT_EQ(capture(state, 1.1).image, first);
}

TEST(Capture, LinearZDriftMovesFrameMonotonically) {
  const auto stack = small_stack();
  MotionModel m;
  m.kind = MotionKind::Linear;
  m.vz_dpt = 0.05;
  auto state = start_episode(stack, m, FocusRange{}, 0.0);
  std::size_t prev = 0;
  for (int t = 0; t < 20; ++t) {
    const auto c = capture(state, 0.0);
    EXPECT_NEAR(c.effective_focus_dpt, 0.05 * t, 1e-12);
    EXPECT_EQ(c.frame_index, stack->nearest_index(0.05 * t));
    if (t > 0) {
      EXPECT_GE(c.frame_index, prev);
    }
    prev = c.frame_index;
    state = c.next;
  }
  EXPECT_GT(prev, stack->nearest_index(0.0));
}

TEST(Capture, XyShiftTranslatesFrameAndMask) {
  const auto stack = small_stack();
  MotionModel m;
  m.kind = MotionKind::Linear;
  m.vx_px = 2.0;
  m.vy_px = -1.0;
  auto state = start_episode(stack, m, FocusRange{}, 0.0);
  state = capture(state, 0.0).next;
  const auto c = capture(state, 0.0);
  EXPECT_EQ(c.shift_x, 2);
  EXPECT_EQ(c.shift_y, -1);
  EXPECT_EQ(c.image, translate(stack->frame(c.frame_index), 2, -1));
  EXPECT_EQ(shifted_mask(*stack, 2, -1), translate(stack->object_mask(), 2, -1));
}

TEST(Capture, BestCommandCompensatesOffset) {
  const auto stack = small_stack();
  MotionModel m;
  m.kind = MotionKind::Linear;
  m.vz_dpt = 0.1;
  auto state = start_episode(stack, m, FocusRange{}, 0.0);
  for (int t = 0; t < 5; ++t) state = capture(state, 0.0).next;
  const double cmd = best_command_dpt(state);
  EXPECT_EQ(capture(state, cmd).frame_index, stack->best_index());
}

TEST(Translate, ReplicatesEdges) {
  Image img(3, 1, std::vector<double>{1, 2, 3});
  EXPECT_EQ(translate(img, 1, 0), Image(3, 1, std::vector<double>{1, 1, 2}));
  EXPECT_EQ(translate(img, -2, 0), Image(3, 1, std::vector<double>{3, 3, 3}));
}

} // namespace
} // namespace focuslab
