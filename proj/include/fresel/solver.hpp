#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fresel/kernels.hpp"

namespace fresel {

// Group elastic net parameters: lambda1 * sum_j w_j ||theta_j|| plus
// (lambda2/2) * sum_j ||theta_j||^2. Empty weights mean all ones.
struct PenaltyParams {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  Eigen::VectorXd weights;

  double weight(int j) const { return weights.size() ? weights[j] : 1.0; }
};

struct ADMMConfig {
  double rho = 1.0;
  int max_iter = 5000;
  double tol_primal = 1e-8;
  double tol_dual = 1e-8;
  double over_relax = 1.5;
  bool adaptive_rho = true;
  double active_tol = 1e-7;  // block norm threshold for the reported active set
};

// Stacked design over all Gram blocks: columns of B are the per-block PSD
// square roots laid side by side. One symmetric eigendecomposition (of
// B^T B/n, or of B B^T/n via Woodbury when R > n) is done at construction and
// every shifted solve afterwards is two dense products, so penalty or rho
// changes never trigger refactorization.
class StackedDesign {
 public:
  explicit StackedDesign(const GramStack& grams);

  int n() const { return n_; }
  int p() const { return static_cast<int>(offsets_.size()) - 1; }
  int total_rank() const { return r_total_; }
  int offset(int j) const { return offsets_[j]; }
  int rank(int j) const { return offsets_[j + 1] - offsets_[j]; }
  const GramStack& grams() const { return *grams_; }

  // (B^T B/n + shift I)^{-1} rhs, shift > 0.
  Eigen::VectorXd solve_shifted(double shift, const Eigen::VectorXd& rhs) const;
  Eigen::VectorXd apply_B(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd apply_Bt(const Eigen::VectorXd& v) const;

  Eigen::VectorXd block(const Eigen::VectorXd& stacked, int j) const {
    return stacked.segment(offset(j), rank(j));
  }

 private:
  const GramStack* grams_;
  std::vector<int> offsets_;
  int n_ = 0;
  int r_total_ = 0;
  bool dual_route_ = false;
  Eigen::MatrixXd stacked_;  // n x R
  Eigen::MatrixXd q_;        // eigenvectors of G (primal) or M (dual)
  Eigen::VectorXd lam_;      // matching eigenvalues
  Eigen::MatrixXd proj_;     // dual route only: Q^T B
};

struct KKTGroupReport {
  bool active = false;
  double residual = 0.0;  // stationarity residual (active) or threshold excess (inactive)
  bool pass = true;
};

struct KKTReport {
  std::vector<KKTGroupReport> groups;
  double tol = 1e-6;
  bool pass = true;
};

// Opaque warm-start state (consensus iterate, scaled dual, penalty rho).
struct ADMMState {
  Eigen::VectorXd z;
  Eigen::VectorXd s;
  double rho = 1.0;
};

struct FitResult {
  std::vector<Eigen::VectorXd> theta;  // per-block solution (the consensus z)
  Eigen::VectorXd norms;               // ||theta_j||
  std::vector<Eigen::VectorXd> alpha;  // representer coefficients, length n each
  std::vector<int> active_set;         // 0-based, norms above active_tol
  double objective = 0.0;
  KKTReport kkt;
  int iterations = 0;
  bool converged = true;
  ADMMState state;
};

// Proximal map of tau1 ||.|| + (tau2/2) ||.||^2.
Eigen::VectorXd group_prox(const Eigen::VectorXd& v, double tau1, double tau2);

double objective_value(const StackedDesign& design, const Eigen::VectorXd& u,
                       const PenaltyParams& pen, const std::vector<Eigen::VectorXd>& theta);

// Smallest lambda1 with an all-zero solution: max_j ||B_j^T u||/(n w_j) over
// blocks with positive weight. Throws if no block has positive weight.
double lambda_max(const StackedDesign& design, const Eigen::VectorXd& u,
                  const Eigen::VectorXd& weights = Eigen::VectorXd());

KKTReport kkt_check(const StackedDesign& design, const Eigen::VectorXd& u,
                    const PenaltyParams& pen, const std::vector<Eigen::VectorXd>& theta,
                    double tol = 1e-6);

// Consensus ADMM with over-relaxation and adaptive rho. Returns the consensus
// iterate, which is exactly sparse blockwise.
FitResult admm_solve(const StackedDesign& design, const Eigen::VectorXd& u,
                     const PenaltyParams& pen, const ADMMConfig& config = {},
                     const ADMMState* warm = nullptr);

// lambda1 = 0 closed form, used as the LLA ridge initializer.
FitResult ridge_solve(const StackedDesign& design, const Eigen::VectorXd& u, double lambda2);

// Convenience overloads that build the stacked design on the fly.
FitResult admm_solve(const Eigen::VectorXd& u, const GramStack& grams, const PenaltyParams& pen,
                     const ADMMConfig& config = {}, const ADMMState* warm = nullptr);
FitResult ridge_solve(const Eigen::VectorXd& u, const GramStack& grams, double lambda2);
double lambda_max(const Eigen::VectorXd& u, const GramStack& grams,
                  const Eigen::VectorXd& weights = Eigen::VectorXd());

}  // namespace fresel
