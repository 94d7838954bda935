#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "focuslab/camera.hpp"
#include "focuslab/config.hpp"
#include "focuslab/controllers.hpp"
#include "focuslab/metrics.hpp"
#include "focuslab/model.hpp"
#include "focuslab/optics.hpp"
#include "focuslab/training.hpp"

namespace focuslab::bench {

struct StackSource {
  enum class Kind { Synthetic, Directory };
  Kind kind = Kind::Synthetic;
  /// Directory source: a stack directory, or a directory of stack directories (sorted by name).
  std::filesystem::path path;
  camera::SyntheticStackSpec synthetic;
  /// Number of synthetic stacks.
  std::size_t count = 20;
};

struct ControllerSpec {
  /// Label used in traces and summaries.
  std::string name;
  /// fibonacci | hillclimb | learned | oracle
  std::string type;
  double step_dpt = 0.5;
  std::size_t budget = 64;
  /// Learned controller weights; empty means <output>/models/<name>.ckpt.
  std::filesystem::path checkpoint;
};

struct SceneSpec {
  std::string name;
  camera::MotionModel motion;
};

struct TrainingConfig {
  model::ModelConfig model = model::ModelConfig::desk();
  training::TrainingSettings settings;
  training::MotionMix mix;
  StackSource stacks;
  std::uint64_t init_seed = 1;
  /// Wall-clock budget checked after each epoch; 0 means unlimited.
  double max_minutes = 0.0;
};

struct ExperimentConfig {
  int n_steps = 30;
  std::size_t n_episodes = 20;
  /// Keys the per-episode initial focus and motion streams.
  std::uint64_t seed = 1;
  std::filesystem::path output = "results";
  optics::LensConfig lens;
  StackSource stacks;
  std::vector<ControllerSpec> controllers;
  std::vector<SceneSpec> scenes;
  std::optional<TrainingConfig> training;

  /// Throws InvalidArgument unless n_steps >= 1, n_episodes >= 1, names are unique and
  /// every controller type is known.
  void validate() const;
  std::filesystem::path checkpoint_path(const ControllerSpec& controller) const;
};

/// Relative paths resolve against `base_dir`. Errors name the source and line.
ExperimentConfig parse_experiment(const config::Document& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment(const std::filesystem::path& path);

std::vector<std::shared_ptr<const camera::FocalStack>> load_stacks(const StackSource& source,
                                                                   const optics::LensConfig& lens);

/// Everything that makes an episode reproducible; shared by all controllers of a suite.
struct EpisodeSetup {
  std::string id;
  std::size_t index = 0;
  std::shared_ptr<const camera::FocalStack> stack;
  camera::MotionModel motion;
  camera::FocusRange range;
  double initial_focus_dpt = 0.0;
};

/// Episode `index` of `scene`: stack index mod count, initial focus from (seed, index), and
/// for random motion a motion seed from (scene seed, index). Independent of the controller.
EpisodeSetup make_episode(const ExperimentConfig& config, const SceneSpec& scene,
                          const std::vector<std::shared_ptr<const camera::FocalStack>>& stacks, std::size_t index);

/// Lets a controller peek at the simulator (oracle only).
struct EpisodeProbe {
  const camera::EpisodeState* state = nullptr;
};

/// Builds controllers by type; learned weights are loaded once per controller name.
class ControllerFactory {
public:
  explicit ControllerFactory(const ExperimentConfig& config);
  /// Use in-memory weights for the named learned controller instead of its checkpoint.
  void set_model(const std::string& name, std::shared_ptr<const model::ModelParams> params);
  std::unique_ptr<controllers::Controller> make(const ControllerSpec& spec, const camera::FocalStack& stack,
                                                std::shared_ptr<EpisodeProbe> probe);

private:
  const ExperimentConfig* config_;
  std::map<std::string, std::shared_ptr<const model::ModelParams>> models_;
};

/// Masked Tenengrad range over all frames with frame and mask shifted by (shift_x, shift_y).
std::pair<double, double> stack_sharpness_range(const camera::FocalStack& stack, int shift_x, int shift_y);

/// Closed loop: capture, record masked Tenengrad (normalized against the stack range at the
/// current shift), observe, command. Step 0 is the capture at the initial focus. Errors are
/// recorded in the trace, which keeps the steps completed before the failure.
metrics::SharpnessTrace run_episode(const EpisodeSetup& episode, controllers::Controller& controller,
                                    const std::string& controller_label, int n_steps,
                                    EpisodeProbe* probe = nullptr);

struct StepStats {
  std::string scene;
  std::string controller;
  int step = 0;
  double mean = 0.0;
  /// Population standard deviation across episodes.
  double stddev = 0.0;
  std::size_t episodes = 0;
};

struct SuiteResult {
  /// Ordered by scene, controller (config order), then episode index.
  std::vector<metrics::SharpnessTrace> traces;
  std::vector<StepStats> stats;
  std::vector<std::string> scene_order;
  std::vector<std::string> controller_order;
};

/// Every (controller, scene) pair over n_episodes paired episodes. Failed episodes are
/// excluded from the statistics and listed in the summary.
SuiteResult run_suite(const ExperimentConfig& config,
                      const std::vector<std::shared_ptr<const camera::FocalStack>>& stacks,
                      ControllerFactory& factory);

/// Mean over steps [from, to] of the per-step means of one (scene, controller) pair.
double mean_over_steps(const SuiteResult& result, const std::string& scene, const std::string& controller,
                       int from_step, int to_step);
/// Mean over steps [from, to] of the per-step standard deviations.
double stddev_over_steps(const SuiteResult& result, const std::string& scene, const std::string& controller,
                         int from_step, int to_step);

void write_traces_csv(std::ostream& out, const SuiteResult& result);
/// scene,controller,step,mean,std,episodes
void write_summary_csv(std::ostream& out, const SuiteResult& result);
void write_summary_text(std::ostream& out, const SuiteResult& result, int n_steps);
/// traces.csv, summary.csv and summary.txt under `dir` (created if needed).
void write_suite_outputs(const std::filesystem::path& dir, const SuiteResult& result, int n_steps);

/// Trains a model per `config.training`, reporting progress to `log` (may be null).
training::TrainingResult train_from_config(const ExperimentConfig& config, std::ostream* log);

} // namespace focuslab::bench
