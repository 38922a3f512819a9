#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "fresel/objects.hpp"

namespace fresel {

enum class KernelKind { linear, gaussian, laplacian };

std::string kernel_kind_name(KernelKind kind);
KernelKind kernel_kind_from_name(const std::string& name);

// Fully resolved kernel. gamma must be positive for gaussian/laplacian and is
// ignored for linear (which is only defined on scalar covariates).
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  double gamma = 1.0;
};

// Kernel as configured: gamma <= 0 means "pick by the median heuristic on the
// training column when the Gram is built".
struct KernelChoice {
  KernelKind kind = KernelKind::gaussian;
  double gamma = 0.0;
};

double eval_kernel(const KernelSpec& spec, const CovariateValue& a, const CovariateValue& b);

// 1/median of pairwise squared distances (gaussian) or distances (laplacian).
// Falls back to 1 when the median is zero (constant column).
double auto_bandwidth(KernelKind kind, std::span<const CovariateValue> column);

KernelSpec resolve_kernel(const KernelChoice& choice, std::span<const CovariateValue> column);

// One covariate's contribution to the design: PSD square root B of the doubly
// centered Gram plus the raw-Gram statistics needed to center test columns
// consistently at prediction time.
struct GramBlock {
  KernelSpec spec;
  Eigen::MatrixXd B;         // n x r, B B^T reproduces the centered Gram
  Eigen::VectorXd eigvals;   // r retained eigenvalues, descending
  Eigen::VectorXd col_means; // raw Gram column means (training stats)
  double grand_mean = 0.0;

  int n() const { return static_cast<int>(B.rows()); }
  int rank() const { return static_cast<int>(B.cols()); }
};

struct GramStack {
  std::vector<GramBlock> blocks;
  int n = 0;

  int p() const { return static_cast<int>(blocks.size()); }
  int total_rank() const;
};

// Uncentered Gram K0[i,k] = kernel(x_i, x_k).
Eigen::MatrixXd raw_gram(const KernelSpec& spec, std::span<const CovariateValue> column);

// Double centering K = H K0 H with H = I - 11^T/n.
Eigen::MatrixXd center_gram(const Eigen::MatrixXd& k0);

// Symmetric PSD square root via eigendecomposition. Negative eigenvalues are
// clamped to zero; eigenvalues below tol_eig * max_eig (relative) are dropped.
// Returns B = Q_r diag(sqrt(lambda_r)) and the retained eigenvalues.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> sqrt_psd(const Eigen::MatrixXd& k,
                                                     double tol_eig = 1e-10);

GramBlock build_gram(const KernelSpec& spec, std::span<const CovariateValue> column,
                     double tol_eig = 1e-10);

// Centered cross-Gram between training and test columns, n_train x n_test.
// Centering uses training statistics only, so cross_gram(train, train)
// reproduces the centered training Gram.
Eigen::MatrixXd cross_gram(const GramBlock& block, std::span<const CovariateValue> train_column,
                           std::span<const CovariateValue> test_column);

// Scalar columns are the common case; wrap them for the span-based API.
std::vector<CovariateValue> scalar_column(const Eigen::VectorXd& x);

}  // namespace fresel
