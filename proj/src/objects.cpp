#include "fresel/objects.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace fresel {

QuantileObject::QuantileObject(Eigen::VectorXd v) : values(std::move(v)) {
  if (values.size() == 0)
    throw std::invalid_argument("QuantileObject: empty value grid");
  // Tiny backwards steps are float noise from upstream arithmetic; real
  // inversions are data errors.
  const double slack = 1e-9 * (1.0 + values.cwiseAbs().maxCoeff());
  for (int k = 0; k + 1 < values.size(); ++k) {
    if (values[k + 1] < values[k] - slack)
      throw std::invalid_argument("QuantileObject: quantile values must be nondecreasing");
  }
}

SPDObject::SPDObject(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw std::invalid_argument("SPDObject: matrix must be square and nonempty");
  const double scale = a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + scale))
    throw std::invalid_argument("SPDObject: matrix is not symmetric");
  mat_ = 0.5 * (a + a.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(mat_);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("SPDObject: matrix is not positive definite");
  chol_ = llt.matrixL();
}

ResponseTag response_tag(const MetricResponse& y) {
  return std::holds_alternative<QuantileObject>(y) ? ResponseTag::quantile_w2
                                                   : ResponseTag::spd_cholesky;
}

std::string tag_name(ResponseTag tag) {
  return tag == ResponseTag::quantile_w2 ? "quantile_w2" : "spd_cholesky";
}

double w2_sq(const QuantileObject& a, const QuantileObject& b) {
  if (a.m() != b.m())
    throw std::invalid_argument("w2_sq: quantile grids differ in size");
  return (a.values - b.values).squaredNorm() / static_cast<double>(a.m());
}

double cholesky_dist_sq(const SPDObject& a, const SPDObject& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("cholesky_dist_sq: dimensions differ");
  return (a.chol() - b.chol()).squaredNorm();
}

double response_dist_sq(const MetricResponse& a, const MetricResponse& b) {
  if (response_tag(a) != response_tag(b))
    throw std::invalid_argument("response_dist_sq: mixed response tags");
  if (const auto* qa = std::get_if<QuantileObject>(&a))
    return w2_sq(*qa, std::get<QuantileObject>(b));
  return cholesky_dist_sq(std::get<SPDObject>(a), std::get<SPDObject>(b));
}

double covariate_dist_sq(const CovariateValue& a, const CovariateValue& b) {
  if (a.index() != b.index())
    throw std::invalid_argument("covariate_dist_sq: mixed covariate types");
  if (const auto* xa = std::get_if<double>(&a)) {
    const double d = *xa - std::get<double>(b);
    return d * d;
  }
  if (const auto* qa = std::get_if<QuantileObject>(&a))
    return w2_sq(*qa, std::get<QuantileObject>(b));
  return cholesky_dist_sq(std::get<SPDObject>(a), std::get<SPDObject>(b));
}

MetricResponse frechet_mean(std::span<const MetricResponse> ys) {
  if (ys.empty()) throw std::invalid_argument("frechet_mean: empty sample");
  const ResponseTag tag = response_tag(ys[0]);
  for (const auto& y : ys)
    if (response_tag(y) != tag)
      throw std::invalid_argument("frechet_mean: mixed response tags");

  if (tag == ResponseTag::quantile_w2) {
    const int m = std::get<QuantileObject>(ys[0]).m();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
    for (const auto& y : ys) {
      const auto& q = std::get<QuantileObject>(y);
      if (q.m() != m) throw std::invalid_argument("frechet_mean: quantile grids differ");
      acc += q.values;
    }
    acc /= static_cast<double>(ys.size());
    return QuantileObject(std::move(acc));
  }

  const int d = std::get<SPDObject>(ys[0]).dim();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (const auto& y : ys) {
    const auto& s = std::get<SPDObject>(y);
    if (s.dim() != d) throw std::invalid_argument("frechet_mean: dimensions differ");
    acc += s.chol();
  }
  acc /= static_cast<double>(ys.size());
  return SPDObject(acc * acc.transpose());
}

double frechet_variance(std::span<const MetricResponse> ys, const MetricResponse& center) {
  if (ys.empty()) throw std::invalid_argument("frechet_variance: empty sample");
  double acc = 0.0;
  for (const auto& y : ys) acc += response_dist_sq(y, center);
  return acc / static_cast<double>(ys.size());
}

}  // namespace fresel
