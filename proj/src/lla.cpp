#include "fresel/lla.hpp"

#include <cmath>
#include <stdexcept>

namespace fresel {

double penalty_derivative(const FoldedPenalty& pen, double t) {
  if (t < 0.0) throw std::invalid_argument("penalty_derivative: t must be nonnegative");
  if (!(pen.lambda > 0.0)) throw std::invalid_argument("penalty_derivative: lambda must be positive");
  if (pen.kind == FoldedPenalty::Kind::scad) {
    if (!(pen.a > 2.0)) throw std::invalid_argument("penalty_derivative: scad needs a > 2");
    if (t <= pen.lambda) return pen.lambda;
    if (t <= pen.a * pen.lambda) return (pen.a * pen.lambda - t) / (pen.a - 1.0);
    return 0.0;
  }
  if (!(pen.a > 1.0)) throw std::invalid_argument("penalty_derivative: mcp needs a > 1");
  return std::max(pen.lambda - t / pen.a, 0.0);
}

double penalty_value(const FoldedPenalty& pen, double t) {
  if (t < 0.0) throw std::invalid_argument("penalty_value: t must be nonnegative");
  const double l = pen.lambda, a = pen.a;
  if (pen.kind == FoldedPenalty::Kind::scad) {
    if (t <= l) return l * t;
    if (t <= a * l) return (2.0 * a * l * t - t * t - l * l) / (2.0 * (a - 1.0));
    return l * l * (a + 1.0) / 2.0;
  }
  if (t <= a * l) return l * t - t * t / (2.0 * a);
  return a * l * l / 2.0;
}

namespace {

double folded_objective(const StackedDesign& design, const Eigen::VectorXd& u,
                        const FoldedPenalty& pen, double lambda2, const FitResult& fit) {
  PenaltyParams plain;  // data term plus ridge only
  plain.lambda2 = lambda2;
  double val = objective_value(design, u, plain, fit.theta);
  for (int j = 0; j < design.p(); ++j) val += penalty_value(pen, fit.norms[j]);
  return val;
}

}  // namespace

LLAResult lla_fit(const StackedDesign& design, const Eigen::VectorXd& u, const FoldedPenalty& pen,
                  double lambda2, const LLAConfig& config, const FitResult* init_fit,
                  const ADMMState* warm_start) {
  if (!(pen.lambda > 0.0)) throw std::invalid_argument("lla_fit: lambda must be positive");
  if (config.max_outer < 1) throw std::invalid_argument("lla_fit: max_outer must be >= 1");

  FitResult init;
  if (init_fit) {
    init = *init_fit;
  } else if (config.init == LLAConfig::Init::ridge) {
    const double l2 = config.init_lambda2 > 0.0 ? config.init_lambda2 : lambda2;
    init = ridge_solve(design, u, l2);
  } else {
    PenaltyParams ppen;
    ppen.lambda1 = config.init_lambda1;
    ppen.lambda2 = config.init_lambda2 > 0.0 ? config.init_lambda2 : lambda2;
    init = admm_solve(design, u, ppen, config.inner);
  }

  LLAResult result;
  const int p = design.p();
  Eigen::VectorXd norms = init.norms;
  Eigen::VectorXd prev_weights;
  std::vector<int> prev_active;
  FitResult fit = init;

  for (int outer = 0; outer < config.max_outer; ++outer) {
    Eigen::VectorXd w(p);
    for (int j = 0; j < p; ++j) w[j] = penalty_derivative(pen, norms[j]);

    PenaltyParams ppen;
    ppen.lambda1 = pen.lambda;
    ppen.lambda2 = lambda2;
    ppen.weights = w / pen.lambda;

    const ADMMState* warm =
        outer == 0 ? (warm_start ? warm_start : &init.state) : &fit.state;
    fit = admm_solve(design, u, ppen, config.inner, warm);
    norms = fit.norms;

    LLAStep step;
    step.weights = w;
    step.active_set = fit.active_set;
    step.objective = folded_objective(design, u, pen, lambda2, fit);
    result.trace.push_back(std::move(step));

    if (outer > 0 && prev_active == fit.active_set &&
        (w - prev_weights).cwiseAbs().maxCoeff() <= 1e-10)
      break;
    prev_weights = w;
    prev_active = fit.active_set;
  }

  result.fit = std::move(fit);
  return result;
}

LLAResult lla_fit(const Eigen::VectorXd& u, const GramStack& grams, const FoldedPenalty& pen,
                  double lambda2, const LLAConfig& config, const FitResult* init_fit,
                  const ADMMState* warm_start) {
  StackedDesign design(grams);
  return lla_fit(design, u, pen, lambda2, config, init_fit, warm_start);
}

}  // namespace fresel
