#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "focuslab/camera.hpp"
#include "focuslab/error.hpp"
#include "focuslab/training.hpp"

namespace focuslab {
namespace {

using namespace training;

std::shared_ptr<const camera::FocalStack> small_stack(int size, std::size_t index) {
  camera::SyntheticStackSpec spec;
  spec.image_size = size;
  spec.positions = 40;
  return std::make_shared<const camera::FocalStack>(camera::make_synthetic_stack(spec, optics::LensConfig{}, index));
}

EpisodeSpec static_episode(int size, double initial) {
  EpisodeSpec e;
  e.stack = small_stack(size, 0);
  e.initial_focus_dpt = initial;
  return e;
}

TEST(Rollout, TargetsPointAtBestFocus) {
  const auto p = model::ModelParams::zeros(model::ModelConfig::reduced());
  const auto e = static_episode(16, 0.5);
  const auto records = rollout(p, e, 4);
  ASSERT_EQ(records.size(), 4u);
  // A zero network never moves, so every target is the same offset.
  for (const auto& r : records) EXPECT_DOUBLE_EQ(r.target_step, e.stack->best_focus_dpt() - 0.5);
  EXPECT_EQ(records[0].labels, model::mask_labels(e.stack->object_mask()));
  EXPECT_THROW(rollout(p, e, 0), InvalidArgument);
}

TEST(Rollout, IsDeterministic) {
  const auto p = model::ModelParams::random(model::ModelConfig::reduced(), 3);
  auto e = static_episode(16, -1.0);
  e.motion.kind = camera::MotionKind::Swing;
  e.motion.amp_z_dpt = 0.4;
  const auto a = rollout(p, e, 6), b = rollout(p, e, 6);
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a[t].cache.out.focus_step, b[t].cache.out.focus_step);
    EXPECT_EQ(a[t].target_step, b[t].target_step);
  }
}

TEST(Generator, Validation) {
  EXPECT_THROW(EpisodeGenerator({}, camera::FocusRange{}, MotionMix{}, 1), InvalidArgument);
  MotionMix none;
  none.static_weight = none.swing_weight = 0.0;
  EXPECT_THROW(EpisodeGenerator({small_stack(16, 0)}, camera::FocusRange{}, none, 1), InvalidArgument);
  MotionMix negative;
  negative.linear_weight = -1.0;
  EXPECT_THROW(EpisodeGenerator({small_stack(16, 0)}, camera::FocusRange{}, negative, 1), InvalidArgument);
  EXPECT_THROW(EpisodeGenerator::replay({}), InvalidArgument);
}

TEST(Generator, DeterministicAndVaried) {
  MotionMix mix;
  mix.linear_weight = mix.random_weight = 1.0;
  const EpisodeGenerator g({small_stack(16, 0), small_stack(16, 1)}, camera::FocusRange{}, mix, 7);
  int kinds[4] = {};
  for (std::size_t i = 0; i < 200; ++i) {
    const auto a = g(3, i), b = g(3, i);
    EXPECT_EQ(a.initial_focus_dpt, b.initial_focus_dpt);
    EXPECT_EQ(a.stack, b.stack);
    EXPECT_EQ(a.motion.kind, b.motion.kind);
    EXPECT_GE(a.initial_focus_dpt, -2.0);
    EXPECT_LE(a.initial_focus_dpt, 3.0);
    EXPECT_LE(a.motion.amp_z_dpt, mix.swing_amp_z_max_dpt);
    EXPECT_NO_THROW(a.motion.validate());
    ++kinds[static_cast<int>(a.motion.kind)];
  }
  for (int k : kinds) EXPECT_GT(k, 20);
  EXPECT_NE(g(0, 0).initial_focus_dpt, g(1, 0).initial_focus_dpt);
}

TEST(Generator, ReplayCycles) {
  const auto g = EpisodeGenerator::replay({static_episode(16, 0.1), static_episode(16, 0.2)});
  EXPECT_EQ(g(0, 0).initial_focus_dpt, 0.1);
  EXPECT_EQ(g(5, 3).initial_focus_dpt, 0.2);
}

TEST(Train, OverfitsOneStaticEpisodeAtDeskScale) {
  const auto g = EpisodeGenerator::replay({static_episode(64, -1.5)});
  TrainingSettings s;
  s.epochs = 500;
  s.episodes_per_epoch = 1;
  s.batch_size = 1;
  s.steps_per_episode = 3;
  s.optimizer.kind = OptimizerSettings::Kind::Adam;
  s.optimizer.learning_rate = 1e-3;
  s.optimizer.clip_norm = 1.0;
  const auto r = train(model::ModelParams::random(model::ModelConfig::desk(), 1), g, s,
                       [](const EpochLog& log, const model::ModelParams&) { return log.mean_loss_focus >= 1e-3; });
  ASSERT_FALSE(r.diverged) << r.divergence_reason;
  EXPECT_LE(r.updates, 500u);
  EXPECT_LT(r.log.back().mean_loss_focus, 1e-3);
}

TEST(Train, FixedSeedGivesIdenticalLogs) {
  std::vector<std::shared_ptr<const camera::FocalStack>> stacks{small_stack(16, 0), small_stack(16, 1)};
  const EpisodeGenerator g(stacks, camera::FocusRange{}, MotionMix{}, 5);
  TrainingSettings s;
  s.epochs = 3;
  s.episodes_per_epoch = 6;
  s.batch_size = 2;
  s.steps_per_episode = 3;
  const auto init = model::ModelParams::random(model::ModelConfig::reduced(), 2);
  const auto a = train(init, g, s), b = train(init, g, s);
  std::ostringstream la, lb;
  write_training_log(la, a.log);
  write_training_log(lb, b.log);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(a.updates, 9u);
  for (std::size_t k = 0; k < a.params.tensors.size(); ++k) EXPECT_EQ(a.params.tensors[k], b.params.tensors[k]);
}

TEST(Train, HeatmapUntrainedWithoutItsLoss) {
  std::vector<std::shared_ptr<const camera::FocalStack>> stacks{small_stack(16, 0), small_stack(16, 1)};
  MotionMix mix;
  mix.swing_weight = 0.0;
  const EpisodeGenerator g(stacks, camera::FocusRange{}, mix, 5);
  TrainingSettings s;
  s.epochs = 15;
  s.episodes_per_epoch = 8;
  s.batch_size = 2;
  s.steps_per_episode = 2;
  s.optimizer.learning_rate = 0.05;
  for (double lambda : {0.0, 1.0}) {
    auto cfg = model::ModelConfig::reduced();
    cfg.lambda_heatmap = lambda;
    const auto r = train(model::ModelParams::random(cfg, 4), g, s);
    ASSERT_FALSE(r.diverged);
    const double first = r.log.front().mean_loss_heatmap, last = r.log.back().mean_loss_heatmap;
    if (lambda == 0.0)
      EXPECT_GT(last, 0.95 * first) << "heatmap loss fell without supervision";
    else
      EXPECT_LT(last, 0.8 * first) << "heatmap loss did not fall with supervision";
  }
}

TEST(Train, DivergenceRevertsToLastGoodParameters) {
  const auto g = EpisodeGenerator::replay({static_episode(16, -1.5)});
  TrainingSettings s;
  s.epochs = 5;
  s.episodes_per_epoch = 1;
  s.batch_size = 1;
  s.steps_per_episode = 2;
  s.optimizer.learning_rate = 1e38;
  s.optimizer.clip_norm = 0.0;
  const auto init = model::ModelParams::random(model::ModelConfig::reduced(), 6);
  const auto r = train(init, g, s);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.divergence_reason.empty());
  EXPECT_NO_THROW(r.params.check_finite());
}

TEST(Train, EarlyStopFromCallback) {
  const auto g = EpisodeGenerator::replay({static_episode(16, 0.0)});
  TrainingSettings s;
  s.epochs = 10;
  s.episodes_per_epoch = 1;
  s.batch_size = 1;
  s.steps_per_episode = 1;
  const auto r = train(model::ModelParams::random(model::ModelConfig::reduced(), 6), g, s,
                       [](const EpochLog& log, const model::ModelParams&) { return log.epoch < 2; });
  EXPECT_EQ(r.log.size(), 3u);
}

TEST(Train, SettingsValidated) {
  const auto g = EpisodeGenerator::replay({static_episode(16, 0.0)});
  const auto p = model::ModelParams::random(model::ModelConfig::reduced(), 6);
  TrainingSettings s;
  s.batch_size = 0;
  EXPECT_THROW(train(p, g, s), InvalidArgument);
  s = {};
  s.optimizer.learning_rate = 0.0;
  EXPECT_THROW(train(p, g, s), InvalidArgument);
  s = {};
  s.optimizer.momentum = 1.0;
  EXPECT_THROW(train(p, g, s), InvalidArgument);
}

TEST(TrainingLog, CsvFormat) {
  std::ostringstream out;
  write_training_log(out, {{0, 1.5, 1.0, 0.5}, {1, 0.25, 0.125, 0.125}});
  EXPECT_EQ(out.str(),
            "epoch,mean_loss_total,mean_loss_f,mean_loss_heatmap\n"
            "0,1.5,1,0.5\n"
            "1,0.25,0.125,0.125\n");
}

} // namespace
} // namespace focuslab
