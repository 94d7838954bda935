#include "focuslab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

#include "focuslab/error.hpp"
#include "focuslab/rng.hpp"

namespace focuslab::training {

EpisodeGenerator::EpisodeGenerator(std::vector<std::shared_ptr<const camera::FocalStack>> stacks,
                                   camera::FocusRange range, MotionMix mix, std::uint64_t seed)
    : stacks_(std::move(stacks)), range_(range), mix_(mix), seed_(seed) {
  if (stacks_.empty()) throw InvalidArgument("episode generator: no training stacks");
  for (const auto& s : stacks_)
    if (!s) throw InvalidArgument("episode generator: null stack");
  const double weights[] = {mix.static_weight, mix.swing_weight, mix.linear_weight, mix.random_weight};
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw InvalidArgument("episode generator: negative motion weight");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument("episode generator: all motion weights are zero");
}

EpisodeGenerator EpisodeGenerator::replay(std::vector<EpisodeSpec> episodes) {
  if (episodes.empty()) throw InvalidArgument("episode generator: empty replay list");
  std::vector<std::shared_ptr<const camera::FocalStack>> stacks;
  for (const auto& e : episodes) {
    if (!e.stack) throw InvalidArgument("episode generator: replay episode without a stack");
    stacks.push_back(e.stack);
  }
  EpisodeGenerator g(std::move(stacks), episodes.front().range, MotionMix{}, 0);
  g.replay_ = std::move(episodes);
  return g;
}

EpisodeSpec EpisodeGenerator::operator()(std::size_t epoch, std::size_t index) const {
  if (!replay_.empty()) return replay_[index % replay_.size()];
  Rng rng(mix_seed(mix_seed(seed_, epoch), index));
  EpisodeSpec e;
  e.stack = stacks_[rng.below(stacks_.size())];
  e.range = range_;
  e.initial_focus_dpt = rng.uniform(range_.min_dpt, range_.max_dpt);

  const double weights[] = {mix_.static_weight, mix_.swing_weight, mix_.linear_weight, mix_.random_weight};
  double pick = rng.uniform() * (weights[0] + weights[1] + weights[2] + weights[3]);
  int kind = 0;
  while (kind < 3 && (weights[kind] <= 0.0 || pick >= weights[kind])) {
    pick -= weights[kind];
    ++kind;
  }
  auto& m = e.motion;
  const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  switch (kind) {
    case 0:
      m.kind = camera::MotionKind::Static;
      break;
    case 1:
      m.kind = camera::MotionKind::Swing;
      m.amp_z_dpt = rng.uniform(0.0, mix_.swing_amp_z_max_dpt);
      m.period = rng.uniform(mix_.swing_period_min, mix_.swing_period_max);
      m.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      m.amp_x_px = rng.uniform(0.0, mix_.xy_amp_max_px);
      m.amp_y_px = rng.uniform(0.0, mix_.xy_amp_max_px);
      break;
    case 2:
      m.kind = camera::MotionKind::Linear;
      m.vz_dpt = sign * rng.uniform(0.0, mix_.linear_vz_max_dpt);
      break;
    default:
      m.kind = camera::MotionKind::Random;
      m.max_step_z_dpt = rng.uniform(0.0, mix_.random_step_z_max_dpt);
      m.max_step_x_px = mix_.xy_amp_max_px / 4.0;
      m.max_step_y_px = mix_.xy_amp_max_px / 4.0;
      m.rng_seed = rng.next_u64();
      break;
  }
  return e;
}

std::vector<model::StepRecord<float>> rollout(const model::ModelParams& params, const EpisodeSpec& episode,
                                              int steps) {
  if (steps < 1) throw InvalidArgument("rollout: steps must be >= 1");
  if (!episode.stack) throw InvalidArgument("rollout: episode without a stack");
  const camera::FocusRange& range = episode.range;
  camera::EpisodeState state = camera::start_episode(episode.stack, episode.motion, range, episode.initial_focus_dpt);
  double command = range.clamp(episode.initial_focus_dpt);
  auto hidden = model::RecurrentState<float>::zeros(params.config);

  std::vector<model::StepRecord<float>> records;
  records.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    camera::Capture cap = camera::capture(state, command);
    model::StepRecord<float> rec;
    rec.cache = model::forward_step_cached(params, cap.image, hidden);
    rec.target_step = camera::best_command_dpt(cap.next) - command;
    rec.labels = model::mask_labels(camera::shifted_mask(*episode.stack, cap.shift_x, cap.shift_y));
    hidden = rec.cache.out.state;
    command = range.clamp(command + static_cast<double>(rec.cache.out.focus_step));
    state = std::move(cap.next);
    records.push_back(std::move(rec));
  }
  return records;
}

TrainingResult train(model::ModelParams initial, const EpisodeGenerator& episodes, const TrainingSettings& settings,
                     const EpochCallback& on_epoch) {
  if (settings.episodes_per_epoch < 1 || settings.batch_size < 1 || settings.steps_per_episode < 1)
    throw InvalidArgument("train: episodes per epoch, batch size and steps must be >= 1");
  if (!(settings.optimizer.learning_rate > 0.0)) throw InvalidArgument("train: learning rate must be positive");
  if (settings.optimizer.momentum < 0.0 || settings.optimizer.momentum >= 1.0)
    throw InvalidArgument("train: momentum must lie in [0, 1)");
  initial.config.validate();
  initial.check_finite("initial parameter");

  TrainingResult result;
  result.params = std::move(initial);
  model::ModelParams& params = result.params;
  const double lambda = params.config.lambda_heatmap;
  auto grads = model::Gradients::zeros(params.config);
  auto velocity = model::Gradients::zeros(params.config);
  auto second = model::Gradients::zeros(params.config);
  double lr = settings.optimizer.learning_rate;

  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    double sum_focus = 0.0, sum_heatmap = 0.0;
    std::size_t sum_steps = 0;
    for (std::size_t first = 0; first < settings.episodes_per_epoch; first += settings.batch_size) {
      const std::size_t last = std::min(settings.episodes_per_epoch, first + settings.batch_size);
      const double normalizer = static_cast<double>((last - first) * static_cast<std::size_t>(settings.steps_per_episode));
      model::ModelParams before = params;
      try {
        grads.set_zero();
        for (std::size_t i = first; i < last; ++i) {
          const auto records = rollout(params, episodes(epoch, i), settings.steps_per_episode);
          const auto losses = model::episode_losses(std::span<const model::StepRecord<float>>(records));
          if (!std::isfinite(losses.focus) || !std::isfinite(losses.heatmap))
            throw NumericError(fmt::format("non-finite loss in epoch {} episode {}", epoch, i));
          sum_focus += losses.focus;
          sum_heatmap += losses.heatmap;
          sum_steps += losses.steps;
          model::backward(params, std::span<const model::StepRecord<float>>(records), normalizer, grads);
        }
        const double norm = std::sqrt(grads.squared_norm());
        if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
        const double clip = settings.optimizer.clip_norm;
        const float scale = static_cast<float>(clip > 0.0 && norm > clip ? clip / norm : 1.0);
        if (settings.optimizer.kind == OptimizerSettings::Kind::Adam) {
          const auto& o = settings.optimizer;
          const double step = static_cast<double>(result.updates + 1);
          const double c1 = 1.0 - std::pow(o.adam_beta1, step);
          const double c2 = 1.0 - std::pow(o.adam_beta2, step);
          const float b1 = static_cast<float>(o.adam_beta1), b2 = static_cast<float>(o.adam_beta2);
          const float rate = static_cast<float>(lr * std::sqrt(c2) / c1);
          const float eps = static_cast<float>(o.adam_epsilon * std::sqrt(c2));
          for (std::size_t k = 0; k < velocity.tensors.size(); ++k) {
            const auto g = (scale * grads.tensors[k].array()).eval();
            velocity.tensors[k].array() = b1 * velocity.tensors[k].array() + (1.0f - b1) * g;
            second.tensors[k].array() = b2 * second.tensors[k].array() + (1.0f - b2) * g.square();
            params.tensors[k].array() -= rate * velocity.tensors[k].array() / (second.tensors[k].array().sqrt() + eps);
          }
        } else if (settings.optimizer.momentum > 0.0) {
          for (std::size_t k = 0; k < velocity.tensors.size(); ++k)
            velocity.tensors[k] = static_cast<float>(settings.optimizer.momentum) * velocity.tensors[k] +
                                  scale * grads.tensors[k];
          params.add_scaled(velocity, static_cast<float>(-lr));
        } else {
          params.add_scaled(grads, static_cast<float>(-lr) * scale);
        }
        params.check_finite("updated parameter");
        ++result.updates;
      } catch (const NumericError& e) {
        params = std::move(before);
        result.diverged = true;
        result.divergence_reason = e.what();
        return result;
      }
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss_focus = sum_steps ? sum_focus / static_cast<double>(sum_steps) : 0.0;
    entry.mean_loss_heatmap = sum_steps ? sum_heatmap / static_cast<double>(sum_steps) : 0.0;
    entry.mean_loss_total = model::loss_total(entry.mean_loss_focus, entry.mean_loss_heatmap, lambda);
    result.log.push_back(entry);
    lr *= settings.lr_decay;
    if (on_epoch && !on_epoch(entry, params)) break;
  }
  return result;
}

void write_training_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << kTrainingLogHeader << '\n';
  for (const auto& e : log)
    out << fmt::format("{},{:.9g},{:.9g},{:.9g}\n", e.epoch, e.mean_loss_total, e.mean_loss_focus, e.mean_loss_heatmap);
}

} // namespace focuslab::training
