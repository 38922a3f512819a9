#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>

#include "fresel/objects.hpp"

namespace fresel {

// How the reference pair (y, y0) is obtained from training responses.
// Defaults: y0 is the sample Frechet mean, y is a seeded uniformly random
// training sample. Selection should not depend on the draw of y (that is
// exercised by the invariance harness), but predictions do.
struct ReferencePolicy {
  enum class Y0Rule { frechet_mean, explicit_object };
  enum class YRule { random_sample, sample_index, perturbed_mean, explicit_object };

  Y0Rule y0_rule = Y0Rule::frechet_mean;
  MetricResponse y0_object;  // explicit_object only

  YRule y_rule = YRule::random_sample;
  std::uint64_t seed = 1;      // random_sample and perturbed_mean
  int sample_index = 0;        // sample_index only
  double perturb_scale = 0.5;  // perturbed_mean only
  MetricResponse y_object;     // explicit_object only
};

ReferencePolicy default_policy(std::uint64_t seed);

struct ResolvedReference {
  MetricResponse y;
  MetricResponse y0;
  int y_index = -1;  // training index when y came from the sample, else -1
};

// Deterministic in (policy, training responses).
ResolvedReference resolve_reference(const ReferencePolicy& policy,
                                    std::span<const MetricResponse> train);

struct TransformedResponse {
  Eigen::VectorXd u;    // centered transform values
  double u_mean = 0.0;  // mean of the raw values, needed at prediction time
};

// Raw transform values d^2(Y_i, y) - d^2(Y_i, y0), no centering. Used for
// held-out rows, which are centered with the training mean.
Eigen::VectorXd raw_transform(std::span<const MetricResponse> ys, const ResolvedReference& ref);

TransformedResponse transform_response(std::span<const MetricResponse> ys,
                                       const ResolvedReference& ref);

}  // namespace fresel
