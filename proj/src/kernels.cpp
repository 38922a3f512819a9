#include "fresel/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fresel {

std::string kernel_kind_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::linear: return "linear";
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::laplacian: return "laplacian";
  }
  return "gaussian";
}

KernelKind kernel_kind_from_name(const std::string& name) {
  if (name == "linear") return KernelKind::linear;
  if (name == "gaussian") return KernelKind::gaussian;
  if (name == "laplacian") return KernelKind::laplacian;
  throw std::invalid_argument("unknown kernel kind: " + name);
}

double eval_kernel(const KernelSpec& spec, const CovariateValue& a, const CovariateValue& b) {
  if (spec.kind == KernelKind::linear) {
    const double* xa = std::get_if<double>(&a);
    const double* xb = std::get_if<double>(&b);
    if (!xa || !xb)
      throw std::invalid_argument("eval_kernel: linear kernel requires scalar covariates");
    return (*xa) * (*xb);
  }
  if (!(spec.gamma > 0.0))
    throw std::invalid_argument("eval_kernel: bandwidth must be positive");
  const double d2 = covariate_dist_sq(a, b);
  if (spec.kind == KernelKind::gaussian) return std::exp(-spec.gamma * d2);
  return std::exp(-spec.gamma * std::sqrt(d2));
}

double auto_bandwidth(KernelKind kind, std::span<const CovariateValue> column) {
  if (kind == KernelKind::linear)
    throw std::invalid_argument("auto_bandwidth: linear kernel has no bandwidth");
  const int n = static_cast<int>(column.size());
  if (n < 2) throw std::invalid_argument("auto_bandwidth: need at least two points");
  std::vector<double> vals;
  vals.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k) {
      double d2 = covariate_dist_sq(column[i], column[k]);
      vals.push_back(kind == KernelKind::gaussian ? d2 : std::sqrt(d2));
    }
  auto mid = vals.begin() + vals.size() / 2;
  std::nth_element(vals.begin(), mid, vals.end());
  double med = *mid;
  if (vals.size() % 2 == 0) {
    // Lower middle is the max of the first half once nth_element has run.
    double lo = *std::max_element(vals.begin(), mid);
    med = 0.5 * (med + lo);
  }
  return med > 0.0 ? 1.0 / med : 1.0;
}

KernelSpec resolve_kernel(const KernelChoice& choice, std::span<const CovariateValue> column) {
  KernelSpec spec;
  spec.kind = choice.kind;
  if (choice.kind == KernelKind::linear) {
    spec.gamma = 0.0;
    return spec;
  }
  spec.gamma = choice.gamma > 0.0 ? choice.gamma : auto_bandwidth(choice.kind, column);
  return spec;
}

int GramStack::total_rank() const {
  int r = 0;
  for (const auto& b : blocks) r += b.rank();
  return r;
}

Eigen::MatrixXd raw_gram(const KernelSpec& spec, std::span<const CovariateValue> column) {
  const int n = static_cast<int>(column.size());
  if (n == 0) throw std::invalid_argument("raw_gram: empty column");
  Eigen::MatrixXd k0(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double v = eval_kernel(spec, column[i], column[j]);
      k0(i, j) = v;
      k0(j, i) = v;
    }
  }
  return k0;
}

Eigen::MatrixXd center_gram(const Eigen::MatrixXd& k0) {
  const int n = static_cast<int>(k0.rows());
  Eigen::VectorXd col_means = k0.colwise().mean();
  double grand = col_means.mean();
  Eigen::MatrixXd k = k0;
  k.rowwise() -= col_means.transpose();
  k.colwise() -= col_means;
  k.array() += grand;
  return k;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> sqrt_psd(const Eigen::MatrixXd& k, double tol_eig) {
  if (k.rows() != k.cols()) throw std::invalid_argument("sqrt_psd: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  if (es.info() != Eigen::Success) throw std::runtime_error("sqrt_psd: eigendecomposition failed");
  const Eigen::VectorXd& ev = es.eigenvalues();  // ascending
  const int n = static_cast<int>(k.rows());
  const double max_eig = std::max(ev[n - 1], 0.0);
  const double cutoff = tol_eig * max_eig;
  int r = 0;
  for (int i = 0; i < n; ++i)
    if (ev[i] > cutoff && ev[i] > 0.0) ++r;
  Eigen::MatrixXd b(n, r);
  Eigen::VectorXd lambda(r);
  // Flip to descending order so the leading column carries the top eigenvalue.
  for (int out = 0; out < r; ++out) {
    const int src = n - 1 - out;
    lambda[out] = ev[src];
    b.col(out) = es.eigenvectors().col(src) * std::sqrt(ev[src]);
  }
  return {std::move(b), std::move(lambda)};
}

GramBlock build_gram(const KernelSpec& spec, std::span<const CovariateValue> column,
                     double tol_eig) {
  GramBlock block;
  block.spec = spec;
  Eigen::MatrixXd k0 = raw_gram(spec, column);
  block.col_means = k0.colwise().mean();
  block.grand_mean = block.col_means.mean();
  Eigen::MatrixXd k = k0;
  k.rowwise() -= block.col_means.transpose();
  k.colwise() -= block.col_means;
  k.array() += block.grand_mean;
  auto [b, lambda] = sqrt_psd(k, tol_eig);
  block.B = std::move(b);
  block.eigvals = std::move(lambda);
  return block;
}

Eigen::MatrixXd cross_gram(const GramBlock& block, std::span<const CovariateValue> train_column,
                           std::span<const CovariateValue> test_column) {
  const int n_train = static_cast<int>(train_column.size());
  const int n_test = static_cast<int>(test_column.size());
  if (n_train != block.col_means.size())
    throw std::invalid_argument("cross_gram: training column does not match block stats");
  Eigen::MatrixXd c0(n_train, n_test);
  for (int i = 0; i < n_test; ++i)
    for (int k = 0; k < n_train; ++k)
      c0(k, i) = eval_kernel(block.spec, train_column[k], test_column[i]);
  Eigen::VectorXd test_means = c0.colwise().mean();
  Eigen::MatrixXd c = c0;
  c.colwise() -= block.col_means;
  c.rowwise() -= test_means.transpose();
  c.array() += block.grand_mean;
  return c;
}

std::vector<CovariateValue> scalar_column(const Eigen::VectorXd& x) {
  std::vector<CovariateValue> col;
  col.reserve(x.size());
  for (int i = 0; i < x.size(); ++i) col.emplace_back(x[i]);
  return col;
}

}  // namespace fresel
