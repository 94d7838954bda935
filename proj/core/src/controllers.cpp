#include "focuslab/controllers.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "focuslab/error.hpp"
#include "focuslab/metrics.hpp"

namespace focuslab::controllers {

Controller::Controller(int width, int height, camera::FocusRange range)
    : width_(width), height_(height), range_(range) {
  if (width < 1 || height < 1) throw InvalidArgument("controller: input size must be positive");
  if (!(range.max_dpt > range.min_dpt)) throw InvalidArgument("controller: empty focus range");
}

ControllerDecision Controller::observe(const Observation& obs) {
  if (obs.image.width() != width_ || obs.image.height() != height_)
    throw InvalidArgument(name() + ": observed image is " + std::to_string(obs.image.width()) + "x" +
                          std::to_string(obs.image.height()) + ", expected " + std::to_string(width_) + "x" +
                          std::to_string(height_));
  ControllerDecision d = decide(obs);
  d.next_focus_dpt = range_.clamp(d.next_focus_dpt);
  return d;
}

double Controller::roi_sharpness(const Observation& obs) const {
  if (obs.roi) return metrics::tenengrad(obs.image, *obs.roi);
  return metrics::tenengrad(obs.image, Image(obs.image.width(), obs.image.height(), 1.0));
}

// ---------------------------------------------------------------------------------------
// Fibonacci search

std::size_t fibonacci_number(std::size_t k) {
  std::size_t a = 0, b = 1;  // Fib(0), Fib(1)
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t next = a + b;
    a = b;
    b = next;
  }
  return a;
}

FibonacciPlan fibonacci_plan(std::size_t n_positions, std::size_t budget) {
  if (n_positions < 2) throw InvalidArgument("fibonacci_plan: need at least two positions");
  FibonacciPlan plan;
  plan.n_positions = n_positions;
  std::size_t k = 1;
  while (fibonacci_number(k) < n_positions) ++k;
  plan.required_probes = k;
  plan.budget = budget;
  plan.truncated = budget < k;
  return plan;
}

FibonacciSearch::FibonacciSearch(FibonacciPlan plan) : plan_(plan) {
  if (plan_.n_positions < 2) throw InvalidArgument("FibonacciSearch: need at least two positions");
  advance();
}

std::optional<double> FibonacciSearch::value(std::size_t index) const {
  if (index >= plan_.n_positions) return -std::numeric_limits<double>::infinity();
  const auto it = values_.find(index);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void FibonacciSearch::report(double v) {
  if (!pending_) throw InvalidArgument("FibonacciSearch::report: search already converged");
  values_[*pending_] = v;
  advance();
}

void FibonacciSearch::advance() {
  pending_.reset();
  auto request = [this](std::size_t index) {
    if (values_.size() >= plan_.budget) {
      finished_ = true;
      return;
    }
    pending_ = index;
  };
  if (finished_) return;

  if (!ends_done_) {
    if (!value(0)) return request(0);
    if (!value(plan_.n_positions - 1)) return request(plan_.n_positions - 1);
    ends_done_ = true;
    lo_ = 0;
    order_ = plan_.required_probes;
  }
  // Bracket (lo, lo + Fib(order)) exclusive; a bracket of length 2 leaves one candidate.
  while (order_ > 3) {
    const std::size_t x1 = static_cast<std::size_t>(lo_) + fibonacci_number(order_ - 2);
    const std::size_t x2 = static_cast<std::size_t>(lo_) + fibonacci_number(order_ - 1);
    const auto v1 = value(x1);
    if (!v1) return request(x1);
    const auto v2 = value(x2);
    if (!v2) return request(x2);
    if (*v1 < *v2) lo_ = static_cast<long>(x1);
    --order_;
  }
  finished_ = true;
}

std::size_t FibonacciSearch::best_index() const {
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (const auto& [index, v] : values_)
    if (v > best_v) {
      best = index;
      best_v = v;
    }
  return best;
}

std::pair<std::size_t, std::size_t> FibonacciSearch::interval() const {
  const std::size_t last = plan_.n_positions - 1;
  if (converged()) {
    const std::size_t b = best_index();
    return {b, b};
  }
  if (!ends_done_) return {0, last};
  const std::size_t lo = static_cast<std::size_t>(lo_) + 1;
  const std::size_t hi = std::min(last, static_cast<std::size_t>(lo_) + fibonacci_number(order_) - 1);
  return {lo, hi};
}

FibonacciController::FibonacciController(std::vector<double> positions, int width, int height,
                                         camera::FocusRange range, std::size_t budget)
    : Controller(width, height, range), positions_(std::move(positions)), budget_(budget),
      search_(fibonacci_plan(positions_.size(), budget)) {}

void FibonacciController::reset() {
  search_ = FibonacciSearch(fibonacci_plan(positions_.size(), budget_));
  started_ = false;
}

ControllerDecision FibonacciController::decide(const Observation& obs) {
  if (!started_) {
    started_ = true;
  } else if (!search_.converged()) {
    search_.report(roi_sharpness(obs));
  }
  ControllerDecision d;
  const auto [lo, hi] = search_.interval();
  d.debug["interval_lo"] = static_cast<double>(lo);
  d.debug["interval_hi"] = static_cast<double>(hi);
  d.debug["evaluations"] = static_cast<double>(search_.evaluations());
  if (const auto probe = search_.next_probe()) {
    d.next_focus_dpt = positions_[*probe];
    d.debug["probe"] = static_cast<double>(*probe);
  } else {
    d.next_focus_dpt = positions_[search_.best_index()];
    d.terminated = true;
  }
  return d;
}

// ---------------------------------------------------------------------------------------
// Hill climbing

HillClimbController::HillClimbController(double step_dpt, double spacing_dpt, int width, int height,
                                         camera::FocusRange range)
    : Controller(width, height, range), initial_step_(step_dpt), spacing_(spacing_dpt) {
  if (!(step_dpt > 0.0)) throw InvalidArgument("hillclimb: step must be positive");
  if (!(spacing_dpt > 0.0)) throw InvalidArgument("hillclimb: stack spacing must be positive");
  reset();
}

void HillClimbController::reset() {
  step_ = initial_step_;
  direction_ = 1;
  started_ = false;
  done_ = false;
}

ControllerDecision HillClimbController::propose() {
  int blocked = 0;
  while (step_ >= spacing_ / 2) {
    const double x = range_.clamp(best_focus_ + direction_ * step_);
    if (std::abs(x - best_focus_) >= spacing_ / 2) {
      pending_ = x;
      ControllerDecision d;
      d.next_focus_dpt = x;
      d.debug["step"] = step_;
      d.debug["best_focus"] = best_focus_;
      return d;
    }
    // Pinned against the end of the range: try the other way, then shrink.
    direction_ = -direction_;
    if (++blocked >= 2) {
      step_ /= 2;
      blocked = 0;
    }
  }
  done_ = true;
  ControllerDecision d;
  d.next_focus_dpt = best_focus_;
  d.terminated = true;
  return d;
}

ControllerDecision HillClimbController::decide(const Observation& obs) {
  if (done_) {
    ControllerDecision d;
    d.next_focus_dpt = best_focus_;
    d.terminated = true;
    return d;
  }
  const double v = roi_sharpness(obs);
  if (!started_) {
    started_ = true;
    best_focus_ = range_.clamp(obs.prev_focus_dpt);
    best_value_ = v;
  } else if (v > best_value_) {
    best_focus_ = pending_;
    best_value_ = v;
  } else {
    direction_ = -direction_;
    step_ /= 2;
  }
  return propose();
}

// ---------------------------------------------------------------------------------------
// Learned and oracle controllers

LearnedController::LearnedController(std::shared_ptr<const model::ModelParams> params, camera::FocusRange range)
    : Controller(params ? params->config.width : 1, params ? params->config.height : 1, range),
      params_(std::move(params)) {
  if (!params_) throw InvalidArgument("learned controller: null parameters");
  params_->config.validate();
  reset();
}

void LearnedController::reset() { state_ = model::RecurrentState<float>::zeros(params_->config); }

ControllerDecision LearnedController::decide(const Observation& obs) {
  auto act = model::forward_step(*params_, obs.image, state_);
  state_ = std::move(act.state);
  ControllerDecision d;
  d.next_focus_dpt = obs.prev_focus_dpt + static_cast<double>(act.focus_step);
  d.debug["step"] = static_cast<double>(act.focus_step);
  return d;
}

OracleController::OracleController(std::function<double()> best_command, int width, int height,
                                   camera::FocusRange range)
    : Controller(width, height, range), best_command_(std::move(best_command)) {
  if (!best_command_) throw InvalidArgument("oracle controller: missing best-command source");
}

ControllerDecision OracleController::decide(const Observation&) {
  ControllerDecision d;
  d.next_focus_dpt = best_command_();
  return d;
}

} // namespace focuslab::controllers
