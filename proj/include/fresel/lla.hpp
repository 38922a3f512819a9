#pragma once

#include <vector>

#include "fresel/solver.hpp"

namespace fresel {

// Folded concave penalty for one-group norms. a must exceed 2 (scad) or 1
// (mcp); 3.7 is the usual scad choice.
struct FoldedPenalty {
  enum class Kind { scad, mcp };
  Kind kind = Kind::scad;
  double lambda = 0.0;
  double a = 3.7;
};

double penalty_derivative(const FoldedPenalty& pen, double t);
double penalty_value(const FoldedPenalty& pen, double t);

struct LLAConfig {
  int max_outer = 3;
  enum class Init { ridge, elastic_net };
  Init init = Init::ridge;
  double init_lambda1 = 0.0;  // elastic_net init only
  double init_lambda2 = 0.0;  // 0 means "reuse the fit's lambda2"
  ADMMConfig inner;
};

struct LLAStep {
  Eigen::VectorXd weights;  // penalty derivatives at the previous norms
  std::vector<int> active_set;
  double objective;  // folded-penalty objective at this step's solution
};

struct LLAResult {
  FitResult fit;
  std::vector<LLAStep> trace;
};

// Local linear approximation: each outer step solves a weighted group elastic
// net with weights P'(||f_j||) from the previous iterate. Stops early when
// both the active set and the weights stabilize. lambda2 is kept fixed across
// outer iterations. An initializer fit may be passed to avoid recomputing it
// across a path sweep; otherwise it is built per config.init. warm, when
// given, seeds the first inner solve (weights still come from the
// initializer, so the solution is unchanged).
LLAResult lla_fit(const StackedDesign& design, const Eigen::VectorXd& u,
                  const FoldedPenalty& pen, double lambda2, const LLAConfig& config = {},
                  const FitResult* init_fit = nullptr, const ADMMState* warm = nullptr);

LLAResult lla_fit(const Eigen::VectorXd& u, const GramStack& grams, const FoldedPenalty& pen,
                  double lambda2, const LLAConfig& config = {},
                  const FitResult* init_fit = nullptr, const ADMMState* warm = nullptr);

}  // namespace fresel
