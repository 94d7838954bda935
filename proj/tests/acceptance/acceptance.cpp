// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "focuslab/bench.hpp"
#include "focuslab/camera.hpp"
#include "focuslab/controllers.hpp"
#include "focuslab/error.hpp"
#include "focuslab/metrics.hpp"
#include "focuslab/model.hpp"
#include "focuslab/optics.hpp"
#include "focuslab/rng.hpp"
#include "focuslab/training.hpp"

namespace fs = std::filesystem;
using namespace focuslab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

Image random_image(int w, int h, Rng& rng) {
  Image img(w, h);
  for (auto& v : img.pixels()) v = rng.uniform();
  return img;
}

// 1. CoC via the conjugate distance versus the closed form.
Outcome optics_equivalence() {
  const auto start = Clock::now();
  Rng rng(2024);
  double worst = 0.0, worst_conjugate = 0.0;
  for (int i = 0; i < 1000; ++i) {
    optics::LensConfig lens;
    lens.aperture_radius_m = rng.uniform(1e-3, 2e-2);
    lens.image_plane_m = rng.uniform(0.01, 0.2);
    const double f = rng.uniform(0.005, 0.2);
    // Real images only (p > f); for p < f the conjugate is virtual and the route differs in sign.
    const double p = f + rng.uniform(1e-3, 10.0);
    const double q = optics::image_distance(f, p);
    const double via_conjugate = lens.aperture_radius_m * std::abs(lens.image_plane_m - q) / q;
    worst = std::max(worst, relative_error(optics::coc_radius(lens, f, p), via_conjugate));
    // At the conjugate focal length the blur vanishes exactly.
    const double f_sharp = lens.image_plane_m * p / (lens.image_plane_m + p);
    worst_conjugate = std::max(worst_conjugate, optics::coc_radius(lens, f_sharp, p) / lens.aperture_radius_m);
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-12 && worst_conjugate <= 1e-15 && secs < 1.0,
          fmt::format("max relative error {:.3g}, max R/D at conjugate {:.3g}, {:.3f} s", worst, worst_conjugate, secs)};
}

// 2. Backprop against central differences on the reduced network.

// ReLU on/off states and max-pool winners. The network is piecewise smooth, so a central
// difference is only an oracle while both probes stay on the same piece.
std::vector<int> activation_pattern(const std::vector<model::StepRecord<double>>& records) {
  std::vector<int> v;
  for (const auto& r : records) {
    for (const auto* group : {&r.cache.enc_activations, &r.cache.dec_activations})
      for (const auto& a : *group)
        for (Eigen::Index i = 0; i < a.size(); ++i) v.push_back(a.data()[i] > 0.0);
    for (const auto& a : r.cache.pool_argmax) v.insert(v.end(), a.begin(), a.end());
  }
  return v;
}

double objective(const model::BasicParams<double>& p, const std::vector<Image>& images,
                 const std::vector<double>& targets, const std::vector<int>& labels,
                 std::vector<int>* pattern_out = nullptr,
                 std::vector<model::StepRecord<double>>* records_out = nullptr) {
  std::vector<model::StepRecord<double>> records;
  auto state = model::RecurrentState<double>::zeros(p.config);
  for (std::size_t t = 0; t < images.size(); ++t) {
    model::StepRecord<double> r;
    r.cache = model::forward_step_cached(p, images[t], state);
    r.target_step = targets[t];
    r.labels = labels;
    state = r.cache.out.state;
    records.push_back(std::move(r));
  }
  const auto l = model::episode_losses<double>(records);
  if (pattern_out) *pattern_out = activation_pattern(records);
  if (records_out) *records_out = std::move(records);
  const double n = static_cast<double>(l.steps);
  return l.focus / n + p.config.lambda_heatmap * l.heatmap / n;
}

Outcome gradient_check() {
  const auto start = Clock::now();
  const auto cfg = model::ModelConfig::reduced();
  const auto layout = model::parameter_layout(cfg);
  double worst = 0.0;
  std::string worst_name;
  std::size_t entries = 0, reduced = 0;
  for (std::uint64_t draw = 0; draw < 3; ++draw) {
    Rng rng(900 + draw);
    auto p = model::ModelParams::random(cfg, 500 + draw).cast<double>();
    for (std::size_t k = 1; k < p.tensors.size(); k += 2)
      for (Eigen::Index i = 0; i < p.tensors[k].size(); ++i) p.tensors[k].data()[i] += rng.uniform(-0.1, 0.1);
    std::vector<Image> images;
    std::vector<double> targets;
    for (int t = 0; t < 3; ++t) {
      images.push_back(random_image(cfg.width, cfg.height, rng));
      targets.push_back(rng.uniform(-2, 2));
    }
    Image mask(cfg.width, cfg.height);
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) mask.at(x, y) = std::hypot(x - 7.0, y - 9.0) < 5.0 ? 1.0 : 0.0;
    const auto labels = model::mask_labels(mask);

    std::vector<model::StepRecord<double>> records;
    std::vector<int> base;
    objective(p, images, targets, labels, &base, &records);
    model::BasicParams<double> grads;
    model::backward<double>(p, records, static_cast<double>(images.size()), grads);

    const double h = 1e-4;
    for (std::size_t k = 0; k < p.tensors.size(); ++k) {
      auto& w = p.tensors[k];
      double diff = 0.0, na = 0.0, nn = 0.0;
      entries += static_cast<std::size_t>(w.size());
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double saved = w.data()[i];
        double numeric = 0.0;
        // Start at 1e-4; halve while a probe crosses a kink.
        for (double step = h; step > 1e-9; step /= 2) {
          std::vector<int> up_pattern, down_pattern;
          w.data()[i] = saved + step;
          const double up = objective(p, images, targets, labels, &up_pattern);
          w.data()[i] = saved - step;
          const double down = objective(p, images, targets, labels, &down_pattern);
          w.data()[i] = saved;
          numeric = (up - down) / (2 * step);
          if (up_pattern == base && down_pattern == base) break;
          if (step == h) ++reduced;
        }
        const double analytic = grads.tensors[k].data()[i];
        diff += (analytic - numeric) * (analytic - numeric);
        na += analytic * analytic;
        nn += numeric * numeric;
      }
      const double scale = std::sqrt(std::max(na, nn));
      const double err = scale < 1e-10 ? std::sqrt(diff) : std::sqrt(diff) / scale;
      if (err > worst) {
        worst = err;
        worst_name = fmt::format("{} (draw {})", layout[k].name, draw);
      }
    }
  }
  const double secs = seconds_since(start);
  return {worst < 1e-3 && secs < 300.0,
          fmt::format("worst tensor {} relative error {:.3g}; {} of {} entries needed a step below 1e-4 "
                      "to avoid a kink; {:.1f} s",
                      worst_name, worst, reduced, entries, secs)};
}

// 3. Fibonacci search on 80-position stacks with the object in focus at every position.
Outcome fibonacci_baseline() {
  const auto start = Clock::now();
  const optics::LensConfig lens;
  const camera::FocusRange range = camera::FocusRange::of(lens);
  const auto positions = camera::uniform_positions(lens.focus_min_dpt, lens.focus_max_dpt, 80);
  const auto scene = camera::make_synthetic_scene(64, 31);
  std::size_t worst_offset = 0, most_captures = 0;
  for (std::size_t peak = 0; peak < positions.size(); ++peak) {
    optics::ObjectPose pose;
    // The lowest position focuses at infinity; a distant object stands in for it.
    pose.distance_m = peak == 0 ? 1e4 : optics::object_distance_for_focus(lens, positions[peak]);
    auto stack = std::make_shared<const camera::FocalStack>(
        camera::synthesize_layered_stack(scene.sharp, scene.mask, lens, pose, 0.8, positions));
    controllers::FibonacciController fib(positions, stack->width(), stack->height(), range);
    auto state = camera::start_episode(stack, {}, range, 0.0);
    double command = 0.0;
    std::size_t captures = 0;
    std::size_t final_index = 0;
    for (int t = 0; t < 40; ++t) {
      const auto cap = camera::capture(state, command);
      ++captures;
      const auto d = fib.observe({cap.image, command, &stack->object_mask()});
      command = d.next_focus_dpt;
      state = cap.next;
      if (d.terminated) {
        final_index = stack->nearest_index(command);
        break;
      }
    }
    const std::size_t offset =
        final_index > stack->best_index() ? final_index - stack->best_index() : stack->best_index() - final_index;
    worst_offset = std::max(worst_offset, offset);
    most_captures = std::max(most_captures, captures);
  }
  const double secs = seconds_since(start);
  return {worst_offset <= 2 && most_captures <= 16 && secs < 10.0,
          fmt::format("worst offset {} positions, at most {} captures, {:.2f} s", worst_offset, most_captures, secs)};
}

// 6. Metric and PSF invariants, 100 randomized cases each.
Outcome metric_invariants() {
  const auto start = Clock::now();
  Rng rng(66);
  std::vector<std::string> failures;
  auto check = [&failures](const char* name, const std::function<bool(int)>& body) {
    for (int i = 0; i < 100; ++i)
      if (!body(i)) {
        failures.push_back(fmt::format("{} case {}", name, i));
        return;
      }
  };
  check("scale covariance", [&](int) {
    const int s = 8 + static_cast<int>(rng.below(24));
    const Image img = random_image(s, s, rng), w = random_image(s, s, rng);
    const double a = rng.uniform(0.1, 10.0);
    Image scaled = img;
    for (auto& v : scaled.pixels()) v *= a;
    return relative_error(metrics::tenengrad(scaled, w), a * metrics::tenengrad(img, w)) < 1e-12;
  });
  check("constant image", [&](int) {
    const int s = 4 + static_cast<int>(rng.below(28));
    return metrics::tenengrad(Image(s, s, rng.uniform(0, 1)), random_image(s, s, rng)) == 0.0;
  });
  check("weight locality", [&](int) {
    const int s = 16 + static_cast<int>(rng.below(16));
    const Image img = random_image(s, s, rng);
    Image w(s, s);
    const int x0 = 4 + static_cast<int>(rng.below(s / 2 - 4)), y0 = 4 + static_cast<int>(rng.below(s / 2 - 4));
    for (int y = y0; y < y0 + 4; ++y)
      for (int x = x0; x < x0 + 4; ++x) w.at(x, y) = 1.0;
    Image changed = img;
    // Pixels more than one step from the support do not enter its stencils.
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        if (x < x0 - 1 || x > x0 + 4 || y < y0 - 1 || y > y0 + 4) changed.at(x, y) = rng.uniform();
    return metrics::tenengrad(img, w) == metrics::tenengrad(changed, w);
  });
  check("normalize_curve", [&](int) {
    std::vector<double> v(2 + rng.below(40));
    for (auto& x : v) x = rng.uniform(-5, 5);
    const auto n = metrics::normalize_curve(v);
    const auto [lo, hi] = std::minmax_element(n.begin(), n.end());
    if (*lo != 0.0 || *hi != 1.0) return false;
    if (metrics::argmax_lowest(n) != metrics::argmax_lowest(v)) return false;
    const auto twice = metrics::normalize_curve(n);
    for (std::size_t i = 0; i < n.size(); ++i)
      if (std::abs(twice[i] - n[i]) > 1e-15) return false;
    const std::vector<double> flat(v.size(), v[0]);
    for (double x : metrics::normalize_curve(flat))
      if (x != 0.0) return false;
    return true;
  });
  check("psf normalization", [&](int) {
    const auto k = optics::psf_kernel(rng.uniform(0.0, 10.0));
    double sum = 0.0;
    for (double t : k.taps()) {
      if (t < 0.0) return false;
      sum += t;
    }
    return std::abs(sum - 1.0) < 1e-12;
  });
  check("monotone defocus", [&](int) {
    const int s = 12 + static_cast<int>(rng.below(20));
    const Image img = random_image(s, s, rng);
    const Image w(s, s, 1.0);
    const double r1 = rng.uniform(0.0, 8.0), r2 = rng.uniform(0.0, 8.0);
    return metrics::tenengrad(optics::apply_defocus(img, optics::psf_kernel(std::min(r1, r2))), w) >=
           metrics::tenengrad(optics::apply_defocus(img, optics::psf_kernel(std::max(r1, r2))), w);
  });
  const double secs = seconds_since(start);
  std::string detail = failures.empty() ? "6 suites x 100 cases" : "failed: " + failures.front();
  return {failures.empty() && secs < 60.0, fmt::format("{}, {:.2f} s", detail, secs)};
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void report(int number, const char* title, const Outcome& o) {
  std::cout << fmt::format("{} criterion {} ({}): {}\n", o.pass ? "PASS" : "FAIL", number, title, o.detail)
            << std::flush;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app("focuslab acceptance suite");
  fs::path workdir = "acceptance_work";
  fs::path config_path;
  fs::path checkpoint;
  app.add_option("--workdir", workdir, "scratch directory for trained weights and suite outputs");
  app.add_option("--config", config_path, "experiment config for criteria 4, 5 and 7")->required();
  app.add_option("--checkpoint", checkpoint, "reuse these weights instead of training");
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  auto record = [&failures](int number, const char* title, const Outcome& o) {
    report(number, title, o);
    if (!o.pass) ++failures;
  };
  auto guarded = [](const std::function<Outcome()>& criterion) -> Outcome {
    try {
      return criterion();
    } catch (const std::exception& e) {
      return {false, std::string("error: ") + e.what()};
    }
  };

  record(1, "optics equivalence", guarded(optics_equivalence));
  record(2, "gradient correctness", guarded(gradient_check));
  record(3, "fibonacci baseline", guarded(fibonacci_baseline));

  try {
    auto config = bench::load_experiment(config_path);
    config.output = workdir / "suite";
    fs::create_directories(workdir);

    // 4. Train (or reuse) the learned controller, then score held-out static episodes.
    const auto learned = std::find_if(config.controllers.begin(), config.controllers.end(),
                                      [](const auto& c) { return c.type == "learned"; });
    if (learned == config.controllers.end() || !config.training)
      throw InvalidArgument("acceptance config needs a learned controller and a [training] section");
    std::shared_ptr<const model::ModelParams> params;
    std::string train_detail;
    double train_minutes = 0.0;
    std::size_t train_stacks = 0;
    if (!checkpoint.empty()) {
      params = std::make_shared<const model::ModelParams>(model::load_checkpoint(checkpoint));
      train_detail = "weights from " + checkpoint.string();
    } else {
      const auto start = Clock::now();
      auto result = bench::train_from_config(config, &std::cout);
      train_minutes = seconds_since(start) / 60.0;
      train_stacks = config.training->stacks.count;
      if (result.diverged) throw NumericError("training diverged: " + result.divergence_reason);
      model::save_checkpoint(result.params, workdir / "learned.ckpt");
      params = std::make_shared<const model::ModelParams>(std::move(result.params));
      train_detail = fmt::format("trained {:.1f} min on {} stacks, {} updates", train_minutes, train_stacks,
                                 result.updates);
    }

    const auto eval_start = Clock::now();
    const auto stacks = bench::load_stacks(config.stacks, config.lens);
    bench::ControllerFactory factory(config);
    factory.set_model(learned->name, params);
    const auto suite = bench::run_suite(config, stacks, factory);
    bench::write_suite_outputs(config.output, suite, config.n_steps);
    const double eval_minutes = seconds_since(eval_start) / 60.0;

    const int last = config.n_steps - 1;
    const bool trained_here = checkpoint.empty();
    const double static_mean = bench::mean_over_steps(suite, "static", learned->name, 3, last);
    const bool desk = params->config.width == 64 && params->config.height == 64;
    record(4, "static learned controller",
           {static_mean >= 0.85 && config.n_episodes >= 20 && desk &&
                (!trained_here || (train_minutes <= 30.0 && train_stacks >= 20)),
            fmt::format("mean normalized sharpness steps 3-{} = {:.4f} over {} episodes; {}", last, static_mean,
                        config.n_episodes, train_detail)});

    // 5. Swing scene: learned mean above Fibonacci, Fibonacci spread above learned.
    const double learned_mean = bench::mean_over_steps(suite, "swing", learned->name, 5, last);
    const double fib_mean = bench::mean_over_steps(suite, "swing", "fibonacci", 5, last);
    const double learned_std = bench::stddev_over_steps(suite, "swing", learned->name, 5, last);
    const double fib_std = bench::stddev_over_steps(suite, "swing", "fibonacci", 5, last);
    record(5, "swing comparison",
           {learned_mean > fib_mean && fib_std > learned_std && eval_minutes < 10.0,
            fmt::format("mean learned {:.4f} vs fibonacci {:.4f}; per-step std learned {:.4f} vs fibonacci {:.4f}; "
                        "suite {:.1f} min",
                        learned_mean, fib_mean, learned_std, fib_std, eval_minutes)});

    record(6, "metric invariants", guarded(metric_invariants));

    // 7. The same suite again, from scratch, must reproduce traces.csv byte for byte.
    auto again = config;
    again.output = workdir / "suite_rerun";
    bench::ControllerFactory factory2(again);
    factory2.set_model(learned->name, params);
    bench::write_suite_outputs(again.output, bench::run_suite(again, bench::load_stacks(again.stacks, again.lens),
                                                              factory2),
                               again.n_steps);
    const std::string first = read_file(config.output / "traces.csv");
    const std::string second = read_file(again.output / "traces.csv");
    record(7, "determinism",
           {!first.empty() && first == second,
            fmt::format("traces.csv {} bytes, reruns {}", first.size(), first == second ? "identical" : "differ")});
  } catch (const std::exception& e) {
    std::cout << "error: " << e.what() << '\n';
    for (int n : {4, 5}) report(n, n == 4 ? "static learned controller" : "swing comparison", {false, "not run"});
    record(6, "metric invariants", guarded(metric_invariants));
    report(7, "determinism", {false, "not run"});
    failures += 3;
  }

  std::cout << (failures == 0 ? "all criteria passed\n" : fmt::format("{} criteria failed\n", failures));
  return failures == 0 ? 0 : 1;
}
