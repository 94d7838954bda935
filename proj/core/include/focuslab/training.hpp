#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "focuslab/camera.hpp"
#include "focuslab/model.hpp"

namespace focuslab::training {

/// One closed-loop training episode on the virtual camera.
struct EpisodeSpec {
  std::shared_ptr<const camera::FocalStack> stack;
  camera::MotionModel motion;
  camera::FocusRange range;
  double initial_focus_dpt = 0.0;
};

/// Relative frequency and strength of the motions drawn for training episodes.
struct MotionMix {
  double static_weight = 1.0;
  double swing_weight = 1.0;
  double linear_weight = 0.0;
  double random_weight = 0.0;
  double swing_amp_z_max_dpt = 0.6;
  double swing_period_min = 12.0;
  double swing_period_max = 30.0;
  double linear_vz_max_dpt = 0.03;
  double random_step_z_max_dpt = 0.05;
  /// Applies to every moving episode, per axis.
  double xy_amp_max_px = 0.0;
};

/// Deterministic episode source: episode (epoch, index) picks a stack, a motion and an
/// initial focus from a stream keyed by (seed, epoch, index).
class EpisodeGenerator {
public:
  /// Throws InvalidArgument for an empty stack list or a mix with no positive weight.
  EpisodeGenerator(std::vector<std::shared_ptr<const camera::FocalStack>> stacks, camera::FocusRange range,
                   MotionMix mix, std::uint64_t seed);
  /// Generator that cycles through a fixed episode list (index modulo size) every epoch.
  /// Throws InvalidArgument for an empty list or an episode without a stack.
  static EpisodeGenerator replay(std::vector<EpisodeSpec> episodes);

  EpisodeSpec operator()(std::size_t epoch, std::size_t index) const;
  const camera::FocusRange& range() const noexcept { return range_; }

private:
  std::vector<std::shared_ptr<const camera::FocalStack>> stacks_;
  camera::FocusRange range_;
  MotionMix mix_;
  std::uint64_t seed_;
  std::vector<EpisodeSpec> replay_;
};

struct OptimizerSettings {
  enum class Kind { Sgd, Adam };
  Kind kind = Kind::Sgd;
  double learning_rate = 0.01;
  /// SGD heavy-ball momentum; 0 is plain SGD.
  double momentum = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 1.0;
};

struct TrainingSettings {
  std::size_t epochs = 10;
  std::size_t episodes_per_epoch = 64;
  /// Episodes whose gradients are summed into one update.
  std::size_t batch_size = 4;
  int steps_per_episode = 10;
  std::uint64_t seed = 1;
  OptimizerSettings optimizer;
  /// Learning rate multiplier applied after each epoch.
  double lr_decay = 1.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss_total = 0.0;
  double mean_loss_focus = 0.0;
  double mean_loss_heatmap = 0.0;
};

struct TrainingResult {
  model::ModelParams params;
  std::vector<EpochLog> log;
  std::size_t updates = 0;
  /// Training stopped on a non-finite loss or gradient; `params` are the last good values.
  bool diverged = false;
  std::string divergence_reason;
};

/// Called after every epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochLog&, const model::ModelParams&)>;

/// Closed-loop rollout of `params` on one episode: each captured frame is fed to the
/// network, its step moves the lens, and every step is recorded with its teacher target
/// (the best command at the motion offset of the next capture minus the previous command).
std::vector<model::StepRecord<float>> rollout(const model::ModelParams& params, const EpisodeSpec& episode, int steps);

/// SGD over batches of closed-loop episodes with the combined focus / heatmap loss.
/// Deterministic for fixed inputs.
TrainingResult train(model::ModelParams initial, const EpisodeGenerator& episodes, const TrainingSettings& settings,
                     const EpochCallback& on_epoch = {});

inline constexpr const char* kTrainingLogHeader = "epoch,mean_loss_total,mean_loss_f,mean_loss_heatmap";
void write_training_log(std::ostream& out, const std::vector<EpochLog>& log);

} // namespace focuslab::training
