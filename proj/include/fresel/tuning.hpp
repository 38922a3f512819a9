#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fresel/lla.hpp"
#include "fresel/solver.hpp"
#include "fresel/transform.hpp"

namespace fresel {

struct TuneGrid {
  std::vector<double> lambda1;  // empty: log-spaced from lambda_max downward
  int num_lambda1 = 50;
  double min_ratio = 1e-3;      // smallest auto grid point relative to lambda_max
  std::vector<double> lambda2;  // empty: one value from the trace scale of B^T B/n
};

struct SplitSpec {
  enum class Mode { holdout, kfold };
  Mode mode = Mode::holdout;
  double train_fraction = 0.75;
  int k = 10;
  std::uint64_t seed = 1;
};

enum class FitMethod { elastic_net, rscad_l2, escad_l2 };

std::string method_name(FitMethod method);
FitMethod method_from_name(const std::string& name);

struct TuneOptions {
  ADMMConfig inner;
  int lla_max_outer = 3;
  double scad_a = 3.7;
  FoldedPenalty::Kind folded_kind = FoldedPenalty::Kind::scad;
};

struct TuneEntry {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double mse = 0.0;          // validation MSE, mean over folds
  double active_size = 0.0;  // mean over folds
  Eigen::VectorXd norms;     // per-covariate block norms, mean over folds
};

struct TuneReport {
  std::vector<double> grid_lambda1;  // as swept, decreasing
  std::vector<double> grid_lambda2;
  std::vector<TuneEntry> entries;    // lambda2-major, lambda1 decreasing within
  double chosen_lambda1 = 0.0;
  double chosen_lambda2 = 0.0;
  double chosen_mse = 0.0;
  double baseline_lambda1 = 0.0;  // escad_l2 only: elastic net pair used for the init
  double baseline_lambda2 = 0.0;
  FitResult final_fit;  // refit on the full data at the chosen pair
  bool any_nonconverged = false;
};

// Centered predictions for held-out rows from representer coefficients and
// centered cross-Grams (one matrix per covariate, n_train x n_test).
Eigen::VectorXd predict(const FitResult& fit, const std::vector<Eigen::MatrixXd>& cross);

// Mean squared error between raw held-out transform values centered by the
// training mean and the predictions.
double test_mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& u_test_raw,
                double u_mean_train);

// Deterministic in all arguments. Kernel bandwidths, the reference pair and
// the transform are resolved on each training portion; the auto lambda1 grid
// and default lambda2 come from the first fold. The winning pair (smallest
// mean validation MSE, ties to the larger lambda1) is refit on the full data.
TuneReport tune(const Eigen::MatrixXd& X, const std::vector<MetricResponse>& Y,
                const std::vector<KernelChoice>& kernels, const ReferencePolicy& policy,
                const TuneGrid& grid, const SplitSpec& split, FitMethod method,
                const TuneOptions& options = {});

// Split materialization, exposed for tests: returns per-fold (train, test)
// index sets, each sorted ascending.
std::vector<std::pair<std::vector<int>, std::vector<int>>> make_splits(const SplitSpec& split,
                                                                       int n);

}  // namespace fresel
