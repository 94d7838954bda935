#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "focuslab/camera.hpp"
#include "focuslab/image.hpp"
#include "focuslab/model.hpp"

namespace focuslab::controllers {

/// Absolute focus command for the next capture.
struct ControllerDecision {
  double next_focus_dpt = 0.0;
  /// The search has converged; later decisions repeat the final position.
  bool terminated = false;
  std::map<std::string, double> debug;
};

/// What a controller sees after each capture.
struct Observation {
  const Image& image;
  /// Command under which `image` was captured.
  double prev_focus_dpt = 0.0;
  /// Region of interest for search baselines (ground-truth mask); null means the whole frame.
  const Image* roi = nullptr;
};

/// Closed-loop focus policy: f_t = f_{t-1} + step_t.
class Controller {
public:
  Controller(int width, int height, camera::FocusRange range);
  virtual ~Controller() = default;

  virtual std::string name() const = 0;
  /// Forget all episode state.
  virtual void reset() = 0;
  /// Throws InvalidArgument when the image size differs from the configured input size.
  ControllerDecision observe(const Observation& obs);

  const camera::FocusRange& range() const noexcept { return range_; }

protected:
  virtual ControllerDecision decide(const Observation& obs) = 0;
  double roi_sharpness(const Observation& obs) const;

  int width_;
  int height_;
  camera::FocusRange range_;
};

/// Static part of a Fibonacci search over n ordered positions.
struct FibonacciPlan {
  std::size_t n_positions = 0;
  /// Minimal k with Fib(k) >= n (Fib(1) = Fib(2) = 1); the evaluation bound.
  std::size_t required_probes = 0;
  std::size_t budget = 0;
  bool truncated = false;
};

/// Throws InvalidArgument for n < 2.
FibonacciPlan fibonacci_plan(std::size_t n_positions, std::size_t budget);

/// Fib(k) with Fib(1) = Fib(2) = 1.
std::size_t fibonacci_number(std::size_t k);

/// Discrete Fibonacci search for the maximum of a unimodal sequence, driven one probe at a
/// time: both ends are evaluated first, then the interior (0, Fib(k)) is narrowed with reused
/// probes; indices past the end count as -infinity and cost nothing.
class FibonacciSearch {
public:
  explicit FibonacciSearch(FibonacciPlan plan);

  /// Next index to evaluate; empty once converged.
  std::optional<std::size_t> next_probe() const noexcept { return pending_; }
  /// Value at the index returned by next_probe().
  void report(double value);

  bool converged() const noexcept { return !pending_.has_value(); }
  std::size_t evaluations() const noexcept { return values_.size(); }
  /// Result once converged (best evaluated index before that).
  std::size_t best_index() const;
  /// Surviving bracket in index space, inclusive.
  std::pair<std::size_t, std::size_t> interval() const;
  const FibonacciPlan& plan() const noexcept { return plan_; }

private:
  void advance();
  std::optional<double> value(std::size_t index) const;

  FibonacciPlan plan_;
  std::map<std::size_t, double> values_;
  std::optional<std::size_t> pending_;
  // Interior bracket (lo_, lo_ + Fib(order_)) with exclusive ends.
  long lo_ = 0;
  std::size_t order_ = 0;
  bool ends_done_ = false;
  bool finished_ = false;
};

/// Fibonacci search in stack-index space. The first frame (at the episode's initial focus) is
/// ignored; afterwards each captured frame scores the previous probe.
class FibonacciController final : public Controller {
public:
  FibonacciController(std::vector<double> positions_dpt, int width, int height, camera::FocusRange range,
                      std::size_t budget = 64);
  std::string name() const override { return "fibonacci"; }
  void reset() override;
  const FibonacciSearch& search() const noexcept { return search_; }

protected:
  ControllerDecision decide(const Observation& obs) override;

private:
  std::vector<double> positions_;
  std::size_t budget_;
  FibonacciSearch search_;
  bool started_ = false;
};

/// Hill climbing on ROI sharpness: keep stepping while sharpness increases; on a decrease
/// reverse and halve the step; stop once the step drops below half the stack spacing.
class HillClimbController final : public Controller {
public:
  /// Throws InvalidArgument unless step_dpt > 0 and spacing_dpt > 0.
  HillClimbController(double step_dpt, double spacing_dpt, int width, int height, camera::FocusRange range);
  std::string name() const override { return "hillclimb"; }
  void reset() override;

protected:
  ControllerDecision decide(const Observation& obs) override;

private:
  ControllerDecision propose();

  double initial_step_;
  double spacing_;
  double step_ = 0.0;
  int direction_ = 1;
  bool started_ = false;
  double best_focus_ = 0.0;
  double best_value_ = 0.0;
  double pending_ = 0.0;
  bool done_ = false;
};

/// Network-driven controller: f_t = clamp(f_{t-1} + predicted step); carries the recurrent
/// state across the episode.
class LearnedController final : public Controller {
public:
  LearnedController(std::shared_ptr<const model::ModelParams> params, camera::FocusRange range);
  std::string name() const override { return "learned"; }
  void reset() override;
  const model::RecurrentState<float>& state() const noexcept { return state_; }

protected:
  ControllerDecision decide(const Observation& obs) override;

private:
  std::shared_ptr<const model::ModelParams> params_;
  model::RecurrentState<float> state_;
};

/// Reference policy that always commands the true best focus (supplied by the harness).
class OracleController final : public Controller {
public:
  OracleController(std::function<double()> best_command, int width, int height, camera::FocusRange range);
  std::string name() const override { return "oracle"; }
  void reset() override {}

protected:
  ControllerDecision decide(const Observation& obs) override;

private:
  std::function<double()> best_command_;
};

} // namespace focuslab::controllers
