#include "fresel/transform.hpp"

#include <cmath>
#include <stdexcept>

#include "fresel/rng.hpp"

namespace fresel {

ReferencePolicy default_policy(std::uint64_t seed) {
  ReferencePolicy p;
  p.y0_rule = ReferencePolicy::Y0Rule::frechet_mean;
  p.y_rule = ReferencePolicy::YRule::random_sample;
  p.seed = seed;
  return p;
}

namespace {

MetricResponse perturb_mean(const MetricResponse& mean, std::span<const MetricResponse> train,
                            double scale, std::uint64_t seed) {
  Rng rng(seed);
  if (const auto* q = std::get_if<QuantileObject>(&mean)) {
    // A constant shift keeps the quantile function monotone; its size is tied
    // to the metric spread of the sample.
    double sd = std::sqrt(frechet_variance(train, mean));
    double shift = scale * sd * rng.normal();
    Eigen::VectorXd v = q->values;
    v.array() += shift;
    return QuantileObject(std::move(v));
  }
  const auto& s = std::get<SPDObject>(mean);
  Eigen::MatrixXd l = s.chol();
  const int d = s.dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) l(i, j) += scale * rng.normal();
  // Keep the factor nonsingular so the rebuilt matrix stays definite.
  for (int i = 0; i < d; ++i)
    if (std::fabs(l(i, i)) < 1e-8) l(i, i) = l(i, i) < 0.0 ? -1e-8 : 1e-8;
  return SPDObject(l * l.transpose());
}

}  // namespace

ResolvedReference resolve_reference(const ReferencePolicy& policy,
                                    std::span<const MetricResponse> train) {
  if (train.empty()) throw std::invalid_argument("resolve_reference: empty training sample");
  ResolvedReference ref;

  switch (policy.y0_rule) {
    case ReferencePolicy::Y0Rule::frechet_mean:
      ref.y0 = frechet_mean(train);
      break;
    case ReferencePolicy::Y0Rule::explicit_object:
      ref.y0 = policy.y0_object;
      break;
  }

  switch (policy.y_rule) {
    case ReferencePolicy::YRule::random_sample: {
      Rng rng(policy.seed);
      ref.y_index = rng.uniform_index(static_cast<int>(train.size()));
      ref.y = train[ref.y_index];
      break;
    }
    case ReferencePolicy::YRule::sample_index: {
      if (policy.sample_index < 0 || policy.sample_index >= static_cast<int>(train.size()))
        throw std::invalid_argument("resolve_reference: sample index out of range");
      ref.y_index = policy.sample_index;
      ref.y = train[ref.y_index];
      break;
    }
    case ReferencePolicy::YRule::perturbed_mean: {
      MetricResponse mean = policy.y0_rule == ReferencePolicy::Y0Rule::frechet_mean
                                ? ref.y0
                                : frechet_mean(train);
      ref.y = perturb_mean(mean, train, policy.perturb_scale, policy.seed);
      break;
    }
    case ReferencePolicy::YRule::explicit_object:
      ref.y = policy.y_object;
      break;
  }

  if (response_tag(ref.y) != response_tag(ref.y0))
    throw std::invalid_argument("resolve_reference: y and y0 have different tags");
  return ref;
}

Eigen::VectorXd raw_transform(std::span<const MetricResponse> ys, const ResolvedReference& ref) {
  Eigen::VectorXd u(ys.size());
  for (size_t i = 0; i < ys.size(); ++i)
    u[static_cast<int>(i)] = response_dist_sq(ys[i], ref.y) - response_dist_sq(ys[i], ref.y0);
  return u;
}

TransformedResponse transform_response(std::span<const MetricResponse> ys,
                                       const ResolvedReference& ref) {
  if (ys.empty()) throw std::invalid_argument("transform_response: empty sample");
  TransformedResponse out;
  out.u = raw_transform(ys, ref);
  out.u_mean = out.u.mean();
  out.u.array() -= out.u_mean;
  return out;
}

}  // namespace fresel
