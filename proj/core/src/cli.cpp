#include "focuslab/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "focuslab/bench.hpp"
#include "focuslab/camera.hpp"
#include "focuslab/error.hpp"
#include "focuslab/metrics.hpp"
#include "focuslab/model.hpp"
#include "focuslab/training.hpp"

namespace focuslab {

namespace fs = std::filesystem;

namespace {

int count_local_maxima(const std::vector<double>& v) {
  int peaks = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool left = i == 0 || v[i] > v[i - 1];
    const bool right = i + 1 == v.size() || v[i] >= v[i + 1];
    if (left && right) ++peaks;
  }
  return peaks;
}

int cmd_synth(const fs::path& out_dir, std::size_t positions, int size, std::size_t count, std::uint64_t seed,
              double context_offset, std::ostream& out) {
  camera::SyntheticStackSpec spec;
  spec.positions = positions;
  spec.image_size = size;
  spec.seed = seed;
  spec.context_offset_dpt = context_offset;
  const optics::LensConfig lens;
  for (std::size_t i = 0; i < count; ++i) {
    const auto stack = camera::make_synthetic_stack(spec, lens, i);
    const fs::path dir = count == 1 ? out_dir : out_dir / fmt::format("stack_{:03}", i);
    camera::save_stack(stack, dir);
    out << fmt::format("{}: {} frames, {}x{}, best index {} ({:.4f} dpt)\n", dir.string(), stack.size(),
                       stack.width(), stack.height(), stack.best_index(), stack.best_focus_dpt());
  }
  return 0;
}

int cmd_eval_stack(const fs::path& dir, std::ostream& out) {
  const auto stack = camera::load_stack(dir);
  const auto& curve = stack.sharpness();
  const auto normalized = metrics::normalize_curve(curve);
  out << fmt::format("{:>5} {:>10} {:>14} {:>10}\n", "index", "focus_dpt", "tenengrad", "normalized");
  for (std::size_t i = 0; i < stack.size(); ++i)
    out << fmt::format("{:>5} {:>10.4f} {:>14.6g} {:>10.4f}{}\n", i, stack.position(i), curve[i], normalized[i],
                       i == stack.best_index() ? "  <- peak" : "");
  const int peaks = count_local_maxima(curve);
  out << fmt::format("best index {} at {:.4f} dpt; {} ({} local maxim{})\n", stack.best_index(),
                     stack.best_focus_dpt(), peaks == 1 ? "unimodal" : "not unimodal", peaks, peaks == 1 ? "um" : "a");
  return 0;
}

template <class T>
std::vector<T> select_named(const std::vector<T>& items, const std::string& name, const char* what) {
  if (items.empty()) throw InvalidArgument(fmt::format("config defines no {} sections", what));
  if (name.empty()) return {items.front()};
  for (const auto& item : items)
    if (item.name == name) return {item};
  throw InvalidArgument(fmt::format("no {} named '{}' in the config", what, name));
}

int cmd_suite(const fs::path& config_path, const std::string& controller, const std::string& scene,
              const std::string& out_override, bool single, std::ostream& out) {
  auto config = bench::load_experiment(config_path);
  if (!out_override.empty()) config.output = out_override;
  if (single) {
    config.controllers = select_named(config.controllers, controller, "controller");
    config.scenes = select_named(config.scenes, scene, "scene");
  }
  const auto stacks = bench::load_stacks(config.stacks, config.lens);
  bench::ControllerFactory factory(config);
  const auto result = bench::run_suite(config, stacks, factory);
  bench::write_suite_outputs(config.output, result, config.n_steps);
  bench::write_summary_text(out, result, config.n_steps);
  out << "\noutputs written to " << config.output.string() << '\n';
  for (const auto& t : result.traces)
    if (!t.error.empty()) return 1;
  return 0;
}

int cmd_train(const fs::path& config_path, const std::string& controller, const std::string& out_override,
              const std::string& checkpoint_override, std::ostream& out) {
  auto config = bench::load_experiment(config_path);
  if (!out_override.empty()) config.output = out_override;
  bench::ControllerSpec target{"learned", "learned", 0.5, 64, {}};
  bool found = false;
  for (const auto& c : config.controllers)
    if (c.type == "learned" && (controller.empty() || c.name == controller)) {
      target = c;
      found = true;
      break;
    }
  if (!controller.empty() && !found) throw InvalidArgument("no learned controller named '" + controller + "'");
  const fs::path ckpt = checkpoint_override.empty() ? config.checkpoint_path(target) : fs::path(checkpoint_override);

  const auto result = bench::train_from_config(config, &out);
  if (!ckpt.parent_path().empty()) fs::create_directories(ckpt.parent_path());
  model::save_checkpoint(result.params, ckpt);
  fs::path log_path = ckpt;
  log_path.replace_extension(".log.csv");
  {
    std::ofstream log(log_path);
    if (!log) throw FormatError(log_path.string() + ": cannot open for writing");
    training::write_training_log(log, result.log);
  }
  out << fmt::format("{} updates; checkpoint {}; log {}\n", result.updates, ckpt.string(), log_path.string());
  if (result.diverged) {
    out << "training diverged: " << result.divergence_reason << " (saved the last finite parameters)\n";
    return 1;
  }
  return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"focuslab: simulated contrast and learned autofocus on focal stacks"};
  app.name("focuslab");
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate synthetic focal stacks");
  fs::path synth_out;
  std::size_t positions = 80, count = 1;
  int size = 64;
  std::uint64_t seed = 1;
  double context_offset = camera::SyntheticStackSpec{}.context_offset_dpt;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--positions", positions, "focus positions per stack")->check(CLI::Range(2, 100000));
  synth->add_option("--size", size, "image side in pixels")->check(CLI::Range(8, 4096));
  synth->add_option("--count", count, "number of stacks (more than one writes stack_NNN subdirectories)")
      ->check(CLI::Range(1, 100000));
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--context-offset", context_offset,
                    "in-focus offset of the surround relative to the object, dpt (0 = single depth)");

  auto* eval = app.add_subcommand("eval-stack", "print the masked sharpness curve of a stack directory");
  fs::path eval_dir;
  eval->add_option("dir", eval_dir, "stack directory")->required();

  std::string config_path, controller, scene, out_dir, checkpoint;
  auto* run = app.add_subcommand("run", "run one controller on one scene from a config file");
  run->add_option("config", config_path, "experiment config")->required();
  run->add_option("--controller", controller, "controller section name (default: first)");
  run->add_option("--scene", scene, "scene section name (default: first)");
  run->add_option("--out", out_dir, "output directory (overrides the config)");

  auto* suite = app.add_subcommand("bench", "run every controller on every scene from a config file");
  suite->add_option("config", config_path, "experiment config")->required();
  suite->add_option("--out", out_dir, "output directory (overrides the config)");

  auto* train = app.add_subcommand("train", "train the learned controller described by a config file");
  train->add_option("config", config_path, "experiment config with a [training] section")->required();
  train->add_option("--controller", controller, "learned controller section name (default: first)");
  train->add_option("--out", out_dir, "output directory (overrides the config)");
  train->add_option("--checkpoint", checkpoint, "checkpoint path (default: <output>/models/<name>.ckpt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*synth) return cmd_synth(synth_out, positions, size, count, seed, context_offset, out);
    if (*eval) return cmd_eval_stack(eval_dir, out);
    if (*run) return cmd_suite(config_path, controller, scene, out_dir, true, out);
    if (*suite) return cmd_suite(config_path, {}, {}, out_dir, false, out);
    if (*train) return cmd_train(config_path, controller, out_dir, checkpoint, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

} // namespace focuslab
