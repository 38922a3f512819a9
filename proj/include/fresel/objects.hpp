#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fresel {

// Univariate distribution represented by its quantile function sampled on a
// fixed level grid. Two objects are comparable only on identical grids; the
// grid itself is implicit (levels k/(m+1) everywhere in this codebase) and
// only the size is checked.
struct QuantileObject {
  Eigen::VectorXd values;

  QuantileObject() = default;
  explicit QuantileObject(Eigen::VectorXd v);

  int m() const { return static_cast<int>(values.size()); }
};

// Symmetric positive definite matrix with its lower Cholesky factor cached
// (positive diagonal convention). Construction fails on asymmetric or
// non-definite input.
class SPDObject {
 public:
  SPDObject() = default;
  explicit SPDObject(const Eigen::MatrixXd& a);

  const Eigen::MatrixXd& mat() const { return mat_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  int dim() const { return static_cast<int>(mat_.rows()); }

 private:
  Eigen::MatrixXd mat_;
  Eigen::MatrixXd chol_;
};

enum class ResponseTag { quantile_w2, spd_cholesky };

using MetricResponse = std::variant<QuantileObject, SPDObject>;

ResponseTag response_tag(const MetricResponse& y);
std::string tag_name(ResponseTag tag);

// Squared 2-Wasserstein distance between quantile representations:
// mean over the grid of squared quantile differences.
double w2_sq(const QuantileObject& a, const QuantileObject& b);

// Squared Cholesky-factor distance ||L_a - L_b||_F^2.
double cholesky_dist_sq(const SPDObject& a, const SPDObject& b);

// Squared distance between responses of the same tag.
double response_dist_sq(const MetricResponse& a, const MetricResponse& b);

// Covariates are scalars or the same object types; the kernel layer only ever
// sees squared distances.
using CovariateValue = std::variant<double, QuantileObject, SPDObject>;

double covariate_dist_sq(const CovariateValue& a, const CovariateValue& b);

// Sample Frechet mean. Quantile: pointwise mean of quantile values. SPD: mean
// of Cholesky factors, reassembled as L_bar * L_bar^T. Input must be nonempty
// and homogeneous in tag and size.
MetricResponse frechet_mean(std::span<const MetricResponse> ys);

// Mean squared distance to the sample Frechet mean (Frechet variance).
double frechet_variance(std::span<const MetricResponse> ys, const MetricResponse& center);

}  // namespace fresel
