#include "focuslab/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "focuslab/error.hpp"
#include "focuslab/rng.hpp"

namespace focuslab::bench {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kControllerTypes{"fibonacci", "hillclimb", "learned", "oracle"};

fs::path resolve(const fs::path& base, const std::string& value) {
  const fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

StackSource parse_stacks(const config::Section* s, const fs::path& base) {
  StackSource src;
  if (!s) return src;
  s->reject_unknown({"source", "path", "count", "positions", "size", "seed", "best_focus_min_dpt",
                     "best_focus_max_dpt", "context_offset_dpt"});
  const std::string kind = s->get_string("source", "synthetic");
  if (kind == "synthetic") {
    src.kind = StackSource::Kind::Synthetic;
  } else if (kind == "directory") {
    src.kind = StackSource::Kind::Directory;
    src.path = resolve(base, s->require_string("path"));
  } else {
    s->fail("source", "'source' must be 'synthetic' or 'directory', got '" + kind + "'");
  }
  const long long count = s->get_int("count", static_cast<long long>(src.count));
  if (count < 1) s->fail("count", "'count' must be >= 1");
  src.count = static_cast<std::size_t>(count);
  auto& syn = src.synthetic;
  const long long positions = s->get_int("positions", static_cast<long long>(syn.positions));
  if (positions < 2) s->fail("positions", "'positions' must be >= 2");
  syn.positions = static_cast<std::size_t>(positions);
  const long long size = s->get_int("size", syn.image_size);
  if (size < 8 || size > 4096) s->fail("size", "'size' must lie in [8, 4096]");
  syn.image_size = static_cast<int>(size);
  syn.seed = s->get_u64("seed", syn.seed);
  syn.best_focus_min_dpt = s->get_double("best_focus_min_dpt", syn.best_focus_min_dpt);
  syn.best_focus_max_dpt = s->get_double("best_focus_max_dpt", syn.best_focus_max_dpt);
  if (!(syn.best_focus_max_dpt >= syn.best_focus_min_dpt))
    s->fail("best_focus_max_dpt", "best-focus band is empty");
  syn.context_offset_dpt = s->get_double("context_offset_dpt", syn.context_offset_dpt);
  return src;
}

camera::MotionModel parse_motion(const config::Section& s) {
  s.reject_unknown({"motion", "vx_px", "vy_px", "vz_dpt", "amp_x_px", "amp_y_px", "amp_z_dpt", "period", "phase",
                    "max_step_x_px", "max_step_y_px", "max_step_z_dpt", "seed"});
  camera::MotionModel m;
  try {
    m.kind = camera::parse_motion_kind(s.get_string("motion", "static"));
  } catch (const InvalidArgument& e) {
    s.fail("motion", e.what());
  }
  m.vx_px = s.get_double("vx_px", 0.0);
  m.vy_px = s.get_double("vy_px", 0.0);
  m.vz_dpt = s.get_double("vz_dpt", 0.0);
  m.amp_x_px = s.get_double("amp_x_px", 0.0);
  m.amp_y_px = s.get_double("amp_y_px", 0.0);
  m.amp_z_dpt = s.get_double("amp_z_dpt", 0.0);
  m.period = s.get_double("period", m.period);
  m.phase = s.get_double("phase", 0.0);
  m.max_step_x_px = s.get_double("max_step_x_px", 0.0);
  m.max_step_y_px = s.get_double("max_step_y_px", 0.0);
  m.max_step_z_dpt = s.get_double("max_step_z_dpt", 0.0);
  m.rng_seed = s.get_u64("seed", 0);
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    s.fail("motion", std::string("invalid motion: ") + e.what());
  }
  return m;
}

TrainingConfig parse_training(const config::Section& t, const config::Section* model_section,
                              const StackSource& experiment_stacks, const fs::path& base) {
  TrainingConfig tc;
  tc.stacks = experiment_stacks;
  tc.stacks.synthetic.seed = t.get_u64("stack_seed", experiment_stacks.synthetic.seed + 1000);
  const long long stack_count = t.get_int("stack_count", static_cast<long long>(experiment_stacks.count));
  if (stack_count < 1) t.fail("stack_count", "'stack_count' must be >= 1");
  tc.stacks.count = static_cast<std::size_t>(stack_count);
  if (t.has("stack_path")) {
    tc.stacks.kind = StackSource::Kind::Directory;
    tc.stacks.path = resolve(base, t.get_string("stack_path", ""));
  }

  t.reject_unknown({"epochs", "episodes_per_epoch", "batch_size", "steps_per_episode", "learning_rate", "optimizer",
                    "momentum", "clip_norm", "lr_decay", "seed", "init_seed", "max_minutes", "stack_count", "stack_seed",
                    "stack_path", "static_weight", "swing_weight", "linear_weight", "random_weight",
                    "swing_amp_z_max_dpt", "swing_period_min", "swing_period_max", "linear_vz_max_dpt",
                    "random_step_z_max_dpt", "xy_amp_max_px"});
  auto& st = tc.settings;
  auto positive = [&t](const char* key, long long fallback) {
    const long long v = t.get_int(key, fallback);
    if (v < 1) t.fail(key, std::string("'") + key + "' must be >= 1");
    return v;
  };
  st.epochs = static_cast<std::size_t>(t.get_int("epochs", static_cast<long long>(st.epochs)));
  st.episodes_per_epoch = static_cast<std::size_t>(positive("episodes_per_epoch", static_cast<long long>(st.episodes_per_epoch)));
  st.batch_size = static_cast<std::size_t>(positive("batch_size", static_cast<long long>(st.batch_size)));
  st.steps_per_episode = static_cast<int>(positive("steps_per_episode", st.steps_per_episode));
  const std::string optimizer = t.get_string("optimizer", "sgd");
  if (optimizer == "sgd")
    st.optimizer.kind = training::OptimizerSettings::Kind::Sgd;
  else if (optimizer == "adam")
    st.optimizer.kind = training::OptimizerSettings::Kind::Adam;
  else
    t.fail("optimizer", "'optimizer' must be sgd or adam, got '" + optimizer + "'");
  st.optimizer.learning_rate = t.get_double("learning_rate", st.optimizer.learning_rate);
  if (!(st.optimizer.learning_rate > 0.0)) t.fail("learning_rate", "'learning_rate' must be positive");
  st.optimizer.momentum = t.get_double("momentum", st.optimizer.momentum);
  if (st.optimizer.momentum < 0.0 || st.optimizer.momentum >= 1.0) t.fail("momentum", "'momentum' must lie in [0, 1)");
  st.optimizer.clip_norm = t.get_double("clip_norm", st.optimizer.clip_norm);
  st.lr_decay = t.get_double("lr_decay", st.lr_decay);
  if (!(st.lr_decay > 0.0)) t.fail("lr_decay", "'lr_decay' must be positive");
  st.seed = t.get_u64("seed", st.seed);
  tc.init_seed = t.get_u64("init_seed", tc.init_seed);
  tc.max_minutes = t.get_double("max_minutes", 0.0);
  if (tc.max_minutes < 0.0) t.fail("max_minutes", "'max_minutes' must be >= 0");

  auto& mix = tc.mix;
  mix.static_weight = t.get_double("static_weight", mix.static_weight);
  mix.swing_weight = t.get_double("swing_weight", mix.swing_weight);
  mix.linear_weight = t.get_double("linear_weight", mix.linear_weight);
  mix.random_weight = t.get_double("random_weight", mix.random_weight);
  mix.swing_amp_z_max_dpt = t.get_double("swing_amp_z_max_dpt", mix.swing_amp_z_max_dpt);
  mix.swing_period_min = t.get_double("swing_period_min", mix.swing_period_min);
  mix.swing_period_max = t.get_double("swing_period_max", mix.swing_period_max);
  mix.linear_vz_max_dpt = t.get_double("linear_vz_max_dpt", mix.linear_vz_max_dpt);
  mix.random_step_z_max_dpt = t.get_double("random_step_z_max_dpt", mix.random_step_z_max_dpt);
  mix.xy_amp_max_px = t.get_double("xy_amp_max_px", mix.xy_amp_max_px);

  auto& mc = tc.model;
  mc.width = mc.height = experiment_stacks.synthetic.image_size;
  if (model_section) {
    const auto& m = *model_section;
    m.reject_unknown({"width", "height", "encoder_channels", "recurrent_width", "categories", "lambda_heatmap"});
    mc.width = static_cast<int>(m.get_int("width", mc.width));
    mc.height = static_cast<int>(m.get_int("height", mc.height));
    mc.encoder_channels = m.get_int_list("encoder_channels", mc.encoder_channels);
    mc.recurrent_width = static_cast<int>(m.get_int("recurrent_width", mc.recurrent_width));
    mc.categories = static_cast<int>(m.get_int("categories", mc.categories));
    mc.lambda_heatmap = m.get_double("lambda_heatmap", mc.lambda_heatmap);
    try {
      mc.validate();
    } catch (const InvalidArgument& e) {
      m.fail("", std::string("invalid model: ") + e.what());
    }
  }
  return tc;
}

} // namespace

void ExperimentConfig::validate() const {
  if (n_steps < 1) throw InvalidArgument("experiment: n_steps must be >= 1");
  if (n_episodes < 1) throw InvalidArgument("experiment: n_episodes must be >= 1");
  lens.validate();
  std::set<std::string> names;
  for (const auto& c : controllers) {
    if (!kControllerTypes.count(c.type)) throw InvalidArgument("controller '" + c.name + "': unknown type '" + c.type + "'");
    if (!names.insert(c.name).second) throw InvalidArgument("controller '" + c.name + "' defined twice");
    if (c.type == "hillclimb" && !(c.step_dpt > 0.0))
      throw InvalidArgument("controller '" + c.name + "': step_dpt must be positive");
  }
  names.clear();
  for (const auto& s : scenes) {
    if (!names.insert(s.name).second) throw InvalidArgument("scene '" + s.name + "' defined twice");
    s.motion.validate();
  }
}

fs::path ExperimentConfig::checkpoint_path(const ControllerSpec& controller) const {
  if (!controller.checkpoint.empty()) return controller.checkpoint;
  return output / "models" / (controller.name + ".ckpt");
}

ExperimentConfig parse_experiment(const config::Document& doc, const fs::path& base_dir) {
  doc.reject_unknown({"experiment", "lens", "stacks", "controller", "scene", "model", "training"});
  ExperimentConfig cfg;
  if (const auto* e = doc.find("experiment")) {
    e->reject_unknown({"n_steps", "n_episodes", "seed", "output"});
    const long long steps = e->get_int("n_steps", cfg.n_steps);
    if (steps < 1) e->fail("n_steps", "'n_steps' must be >= 1");
    cfg.n_steps = static_cast<int>(steps);
    const long long episodes = e->get_int("n_episodes", static_cast<long long>(cfg.n_episodes));
    if (episodes < 1) e->fail("n_episodes", "'n_episodes' must be >= 1");
    cfg.n_episodes = static_cast<std::size_t>(episodes);
    cfg.seed = e->get_u64("seed", cfg.seed);
    cfg.output = resolve(base_dir, e->get_string("output", cfg.output.string()));
  } else {
    cfg.output = resolve(base_dir, cfg.output.string());
  }
  if (const auto* l = doc.find("lens")) {
    l->reject_unknown({"aperture_radius_m", "image_plane_m", "focus_min_dpt", "focus_max_dpt", "pixel_pitch_m",
                       "base_power_dpt"});
    auto& lens = cfg.lens;
    lens.aperture_radius_m = l->get_double("aperture_radius_m", lens.aperture_radius_m);
    lens.image_plane_m = l->get_double("image_plane_m", lens.image_plane_m);
    lens.focus_min_dpt = l->get_double("focus_min_dpt", lens.focus_min_dpt);
    lens.focus_max_dpt = l->get_double("focus_max_dpt", lens.focus_max_dpt);
    lens.pixel_pitch_m = l->get_double("pixel_pitch_m", lens.pixel_pitch_m);
    lens.base_power_dpt = l->get_double("base_power_dpt", lens.base_power_dpt);
    try {
      lens.validate();
    } catch (const std::exception& ex) {
      l->fail("", std::string("invalid lens: ") + ex.what());
    }
  }
  cfg.stacks = parse_stacks(doc.find("stacks"), base_dir);

  for (const auto* c : doc.all("controller")) {
    if (c->label().empty()) c->fail("", "controller sections need a name: [controller NAME]");
    c->reject_unknown({"type", "step_dpt", "budget", "checkpoint"});
    ControllerSpec spec;
    spec.name = c->label();
    spec.type = c->get_string("type", spec.name);
    if (!kControllerTypes.count(spec.type))
      c->fail("type", "unknown controller type '" + spec.type + "' (fibonacci, hillclimb, learned, oracle)");
    spec.step_dpt = c->get_double("step_dpt", spec.step_dpt);
    if (!(spec.step_dpt > 0.0)) c->fail("step_dpt", "'step_dpt' must be positive");
    const long long budget = c->get_int("budget", static_cast<long long>(spec.budget));
    if (budget < 1) c->fail("budget", "'budget' must be >= 1");
    spec.budget = static_cast<std::size_t>(budget);
    if (c->has("checkpoint")) spec.checkpoint = resolve(base_dir, c->get_string("checkpoint", ""));
    cfg.controllers.push_back(std::move(spec));
  }
  for (const auto* s : doc.all("scene")) {
    if (s->label().empty()) s->fail("", "scene sections need a name: [scene NAME]");
    cfg.scenes.push_back({s->label(), parse_motion(*s)});
  }
  if (const auto* t = doc.find("training")) {
    cfg.training = parse_training(*t, doc.find("model"), cfg.stacks, base_dir);
    if (cfg.training->stacks.kind == StackSource::Kind::Directory && t->has("stack_path"))
      cfg.training->stacks.path = resolve(base_dir, t->get_string("stack_path", ""));
  } else if (const auto* m = doc.find("model")) {
    m->fail("", "[model] is only used together with [training]");
  }
  try {
    cfg.validate();
  } catch (const std::exception& ex) {
    throw FormatError(doc.source + ": " + ex.what());
  }
  return cfg;
}

ExperimentConfig load_experiment(const fs::path& path) {
  if (!fs::exists(path)) throw FormatError(path.string() + ": config file not found");
  return parse_experiment(config::load(path), path.parent_path());
}

std::vector<std::shared_ptr<const camera::FocalStack>> load_stacks(const StackSource& source,
                                                                   const optics::LensConfig& lens) {
  std::vector<std::shared_ptr<const camera::FocalStack>> stacks;
  if (source.kind == StackSource::Kind::Synthetic) {
    for (std::size_t i = 0; i < source.count; ++i)
      stacks.push_back(std::make_shared<const camera::FocalStack>(camera::make_synthetic_stack(source.synthetic, lens, i)));
    return stacks;
  }
  if (!fs::is_directory(source.path)) throw FormatError(source.path.string() + ": stack directory not found");
  if (fs::exists(source.path / camera::kManifestName)) {
    stacks.push_back(std::make_shared<const camera::FocalStack>(camera::load_stack(source.path)));
    return stacks;
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(source.path))
    if (entry.is_directory() && fs::exists(entry.path() / camera::kManifestName)) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw FormatError(source.path.string() + ": no focal stacks (no " + camera::kManifestName + ")");
  for (const auto& d : dirs) stacks.push_back(std::make_shared<const camera::FocalStack>(camera::load_stack(d)));
  return stacks;
}

EpisodeSetup make_episode(const ExperimentConfig& config, const SceneSpec& scene,
                          const std::vector<std::shared_ptr<const camera::FocalStack>>& stacks, std::size_t index) {
  if (stacks.empty()) throw InvalidArgument("make_episode: no stacks");
  EpisodeSetup e;
  e.id = scene.name + "-" + std::to_string(index);
  e.index = index;
  e.stack = stacks[index % stacks.size()];
  e.range = camera::FocusRange::of(config.lens);
  Rng rng(mix_seed(config.seed, index));
  e.initial_focus_dpt = rng.uniform(e.range.min_dpt, e.range.max_dpt);
  e.motion = scene.motion;
  e.motion.rng_seed = mix_seed(scene.motion.rng_seed, index);
  return e;
}

ControllerFactory::ControllerFactory(const ExperimentConfig& config) : config_(&config) {}

void ControllerFactory::set_model(const std::string& name, std::shared_ptr<const model::ModelParams> params) {
  models_[name] = std::move(params);
}

std::unique_ptr<controllers::Controller> ControllerFactory::make(const ControllerSpec& spec,
                                                                 const camera::FocalStack& stack,
                                                                 std::shared_ptr<EpisodeProbe> probe) {
  const camera::FocusRange range = camera::FocusRange::of(config_->lens);
  const int w = stack.width(), h = stack.height();
  if (spec.type == "fibonacci")
    return std::make_unique<controllers::FibonacciController>(stack.focus_positions_dpt(), w, h, range, spec.budget);
  if (spec.type == "hillclimb") {
    const double spacing = stack.span().span() / static_cast<double>(stack.size() - 1);
    return std::make_unique<controllers::HillClimbController>(spec.step_dpt, spacing, w, h, range);
  }
  if (spec.type == "oracle") {
    if (!probe) throw InvalidArgument("oracle controller needs an episode probe");
    return std::make_unique<controllers::OracleController>(
        [probe] {
          if (!probe->state) throw InvalidArgument("oracle controller: no simulator state");
          return camera::best_command_dpt(*probe->state);
        },
        w, h, range);
  }
  if (spec.type == "learned") {
    auto& params = models_[spec.name];
    if (!params) {
      const fs::path path = config_->checkpoint_path(spec);
      if (!fs::exists(path))
        throw FormatError(path.string() + ": checkpoint for controller '" + spec.name + "' not found (run `train` first)");
      params = std::make_shared<const model::ModelParams>(model::load_checkpoint(path));
    }
    return std::make_unique<controllers::LearnedController>(params, range);
  }
  throw InvalidArgument("unknown controller type '" + spec.type + "'");
}

std::pair<double, double> stack_sharpness_range(const camera::FocalStack& stack, int shift_x, int shift_y) {
  if (shift_x == 0 && shift_y == 0) {
    const auto& s = stack.sharpness();
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    return {*lo, *hi};
  }
  const Image mask = camera::shifted_mask(stack, shift_x, shift_y);
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const double v = metrics::tenengrad(translate(stack.frame(i), shift_x, shift_y), mask);
    if (i == 0 || v < lo) lo = v;
    if (i == 0 || v > hi) hi = v;
  }
  return {lo, hi};
}

metrics::SharpnessTrace run_episode(const EpisodeSetup& episode, controllers::Controller& controller,
                                    const std::string& controller_label, int n_steps, EpisodeProbe* probe) {
  metrics::SharpnessTrace trace;
  trace.episode = episode.id;
  trace.controller = controller_label;
  try {
    if (n_steps < 1) throw InvalidArgument("run_episode: n_steps must be >= 1");
    if (!episode.stack) throw InvalidArgument("run_episode: episode without a stack");
    controller.reset();
    camera::EpisodeState state =
        camera::start_episode(episode.stack, episode.motion, episode.range, episode.initial_focus_dpt);
    double command = episode.range.clamp(episode.initial_focus_dpt);
    std::map<std::pair<int, int>, std::pair<double, double>> ranges;
    for (int t = 0; t < n_steps; ++t) {
      camera::Capture cap = camera::capture(state, command);
      const Image mask = camera::shifted_mask(*episode.stack, cap.shift_x, cap.shift_y);
      const auto key = std::make_pair(cap.shift_x, cap.shift_y);
      auto it = ranges.find(key);
      if (it == ranges.end())
        it = ranges.emplace(key, stack_sharpness_range(*episode.stack, cap.shift_x, cap.shift_y)).first;
      const double v = metrics::tenengrad(cap.image, mask);
      trace.records.push_back({t, command, v, metrics::normalize_value(v, it->second.first, it->second.second)});
      if (t + 1 == n_steps) break;
      if (probe) probe->state = &cap.next;
      const auto decision = controller.observe({cap.image, command, &mask});
      if (probe) probe->state = nullptr;
      command = episode.range.clamp(decision.next_focus_dpt);
      state = std::move(cap.next);
    }
  } catch (const std::exception& e) {
    if (probe) probe->state = nullptr;
    trace.error = e.what();
  }
  return trace;
}

SuiteResult run_suite(const ExperimentConfig& config,
                      const std::vector<std::shared_ptr<const camera::FocalStack>>& stacks,
                      ControllerFactory& factory) {
  config.validate();
  if (config.controllers.empty()) throw InvalidArgument("suite: no controllers configured");
  if (config.scenes.empty()) throw InvalidArgument("suite: no scenes configured");
  SuiteResult result;
  for (const auto& s : config.scenes) result.scene_order.push_back(s.name);
  for (const auto& c : config.controllers) result.controller_order.push_back(c.name);

  for (const auto& scene : config.scenes) {
    std::vector<EpisodeSetup> episodes;
    for (std::size_t i = 0; i < config.n_episodes; ++i) episodes.push_back(make_episode(config, scene, stacks, i));
    for (const auto& spec : config.controllers) {
      std::vector<const metrics::SharpnessTrace*> ok;
      const std::size_t first = result.traces.size();
      for (const auto& ep : episodes) {
        auto probe = std::make_shared<EpisodeProbe>();
        // Construction failures (missing checkpoint, bad geometry) are config errors, not episode aborts.
        const auto controller = factory.make(spec, *ep.stack, probe);
        result.traces.push_back(run_episode(ep, *controller, spec.name, config.n_steps, probe.get()));
      }
      for (std::size_t k = first; k < result.traces.size(); ++k)
        if (result.traces[k].error.empty()) ok.push_back(&result.traces[k]);
      for (int step = 0; step < config.n_steps; ++step) {
        StepStats st;
        st.scene = scene.name;
        st.controller = spec.name;
        st.step = step;
        st.episodes = ok.size();
        if (!ok.empty()) {
          double sum = 0.0;
          for (const auto* tr : ok) sum += tr->records[static_cast<std::size_t>(step)].normalized;
          st.mean = sum / static_cast<double>(ok.size());
          double sq = 0.0;
          for (const auto* tr : ok) {
            const double d = tr->records[static_cast<std::size_t>(step)].normalized - st.mean;
            sq += d * d;
          }
          st.stddev = std::sqrt(sq / static_cast<double>(ok.size()));
        }
        result.stats.push_back(st);
      }
    }
  }
  return result;
}

namespace {

template <class F>
double average_steps(const SuiteResult& r, const std::string& scene, const std::string& controller, int from, int to,
                     F field) {
  double sum = 0.0;
  int n = 0;
  for (const auto& s : r.stats)
    if (s.scene == scene && s.controller == controller && s.step >= from && s.step <= to && s.episodes > 0) {
      sum += field(s);
      ++n;
    }
  if (n == 0) throw InvalidArgument("no statistics for " + scene + "/" + controller + " in the requested steps");
  return sum / n;
}

} // namespace

double mean_over_steps(const SuiteResult& r, const std::string& scene, const std::string& controller, int from,
                       int to) {
  return average_steps(r, scene, controller, from, to, [](const StepStats& s) { return s.mean; });
}

double stddev_over_steps(const SuiteResult& r, const std::string& scene, const std::string& controller, int from,
                         int to) {
  return average_steps(r, scene, controller, from, to, [](const StepStats& s) { return s.stddev; });
}

void write_traces_csv(std::ostream& out, const SuiteResult& result) {
  metrics::write_trace_csv_header(out);
  for (const auto& t : result.traces) metrics::write_trace_csv_rows(out, t);
}

void write_summary_csv(std::ostream& out, const SuiteResult& result) {
  out << "scene,controller,step,mean,std,episodes\n";
  for (const auto& s : result.stats)
    out << fmt::format("{},{},{},{:.6f},{:.6f},{}\n", s.scene, s.controller, s.step, s.mean, s.stddev, s.episodes);
}

void write_summary_text(std::ostream& out, const SuiteResult& result, int n_steps) {
  const int late_from = std::min(5, n_steps - 1);
  const int last = n_steps - 1;
  out << "Normalized masked Tenengrad (1 = sharpest frame of the stack at the current object offset)\n\n";
  out << fmt::format("{:<14} {:<14} {:>8} {:>7} {:>10} {:>11} {:>10}\n", "scene", "controller", "episodes", "failed",
                     "mean[all]", fmt::format("mean[{}+]", late_from), fmt::format("std[{}+]", late_from));
  for (const auto& scene : result.scene_order)
    for (const auto& controller : result.controller_order) {
      std::size_t total = 0, failed = 0;
      for (const auto& t : result.traces)
        if (t.controller == controller && t.episode.rfind(scene + "-", 0) == 0) {
          ++total;
          if (!t.error.empty()) ++failed;
        }
      if (failed == total) {
        out << fmt::format("{:<14} {:<14} {:>8} {:>7} {:>10} {:>11} {:>10}\n", scene, controller, total, failed, "-",
                           "-", "-");
        continue;
      }
      out << fmt::format("{:<14} {:<14} {:>8} {:>7} {:>10.4f} {:>11.4f} {:>10.4f}\n", scene, controller, total,
                         failed, mean_over_steps(result, scene, controller, 0, last),
                         mean_over_steps(result, scene, controller, late_from, last),
                         stddev_over_steps(result, scene, controller, late_from, last));
    }

  out << "\nPer-step mean (std)\n";
  for (const auto& scene : result.scene_order) {
    out << fmt::format("\n[{}]\n{:>5}", scene, "step");
    for (const auto& c : result.controller_order) out << fmt::format(" {:>20}", c);
    out << '\n';
    for (int step = 0; step < n_steps; ++step) {
      out << fmt::format("{:>5}", step);
      for (const auto& c : result.controller_order) {
        const auto it = std::find_if(result.stats.begin(), result.stats.end(), [&](const StepStats& s) {
          return s.scene == scene && s.controller == c && s.step == step;
        });
        if (it == result.stats.end() || it->episodes == 0)
          out << fmt::format(" {:>20}", "-");
        else
          out << fmt::format(" {:>20}", fmt::format("{:.4f} ({:.4f})", it->mean, it->stddev));
      }
      out << '\n';
    }
  }

  bool header = false;
  for (const auto& t : result.traces)
    if (!t.error.empty()) {
      if (!header) out << "\nFailed episodes\n";
      header = true;
      out << fmt::format("  {} {}: {}\n", t.controller, t.episode, t.error);
    }
}

void write_suite_outputs(const fs::path& dir, const SuiteResult& result, int n_steps) {
  fs::create_directories(dir);
  auto open = [&dir](const char* name) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError((dir / name).string() + ": cannot open for writing");
    return f;
  };
  {
    auto f = open("traces.csv");
    write_traces_csv(f, result);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, result);
  }
  {
    auto f = open("summary.txt");
    write_summary_text(f, result, n_steps);
  }
}

training::TrainingResult train_from_config(const ExperimentConfig& config, std::ostream* log) {
  if (!config.training) throw InvalidArgument("config has no [training] section");
  const TrainingConfig& tc = *config.training;
  const auto stacks = load_stacks(tc.stacks, config.lens);
  for (const auto& s : stacks)
    if (s->width() != tc.model.width || s->height() != tc.model.height)
      throw InvalidArgument(fmt::format("training stack is {}x{} but the model expects {}x{}", s->width(), s->height(),
                                        tc.model.width, tc.model.height));
  const training::EpisodeGenerator generator(stacks, camera::FocusRange::of(config.lens), tc.mix, tc.settings.seed);
  const auto start = std::chrono::steady_clock::now();
  auto on_epoch = [&](const training::EpochLog& e, const model::ModelParams&) {
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
    if (log)
      *log << fmt::format("epoch {:>4}  loss {:.5f}  focus {:.5f}  heatmap {:.5f}  ({:.1f} min)\n", e.epoch,
                          e.mean_loss_total, e.mean_loss_focus, e.mean_loss_heatmap, minutes)
           << std::flush;
    return tc.max_minutes <= 0.0 || minutes < tc.max_minutes;
  };
  return training::train(model::ModelParams::random(tc.model, tc.init_seed), generator, tc.settings, on_epoch);
}

} // namespace focuslab::bench
