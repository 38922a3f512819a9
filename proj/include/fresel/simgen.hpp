#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

#include "fresel/objects.hpp"
#include "fresel/rng.hpp"

namespace fresel {

// Synthetic regression designs. Models 1-3 produce distribution responses on
// a fixed quantile grid; models 4-5 produce small SPD matrices. Parameter
// fields left as NaN pick up the per-model defaults.
struct SimModelSpec {
  int model = 1;
  int n = 200;
  int p = 0;        // 0: model default (30 for models 1 and 4, 10 otherwise)
  double rho = 0.5; // AR correlation of the latent Gaussian covariates
  int m_grid = 100; // quantile grid size, models 1-3
  int d_spd = 3;    // matrix dimension, models 4-5
  std::uint64_t seed = 1;

  double mu0 = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double sigma0 = std::numeric_limits<double>::quiet_NaN();
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double nu1 = std::numeric_limits<double>::quiet_NaN();
  double nu2 = std::numeric_limits<double>::quiet_NaN();
};

struct SimDataset {
  SimModelSpec spec;  // resolved
  Eigen::MatrixXd X;
  std::vector<MetricResponse> responses;
  std::vector<int> truth;  // 0-based covariate indices carrying signal
};

// Fills defaults and validates; throws invalid_argument on bad fields.
SimModelSpec resolve_spec(const SimModelSpec& spec);

std::vector<int> truth_set(int model);
ResponseTag model_tag(int model);

// Covariates first, responses second, one stream: response draws depend on X
// only through the truth columns, which keeps regeneration with modified
// noise columns bit-identical (exercised by tests).
Eigen::MatrixXd gen_covariates(const SimModelSpec& resolved, Rng& rng);
std::vector<MetricResponse> gen_responses(const SimModelSpec& resolved, const Eigen::MatrixXd& X,
                                          Rng& rng);

SimDataset gen_model(const SimModelSpec& spec);

}  // namespace fresel
