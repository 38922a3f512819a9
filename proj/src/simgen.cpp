#include "fresel/simgen.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fresel {

namespace {

struct ModelDefaults {
  int p;
  double mu0, beta, sigma0, gamma, nu1, nu2;
};

ModelDefaults defaults_for(int model) {
  switch (model) {
    case 1: return {30, 0.0, 0.75, 0.0, 3.0, 1.0, 0.5};
    case 2: return {10, 0.0, 12.0, 0.0, 12.0, 1.0, 0.5};
    case 3: return {10, 0.0, 10.0, 0.0, 20.0, 1.0, 0.5};
    case 4: return {30, 3.0, 1.0, 1.0, 1.0, 0.25, 0.5};
    case 5: return {10, 3.0, 2.0, 1.0, 4.0, 1.0, 0.5};
    default: throw std::invalid_argument("resolve_spec: model must be 1..5");
  }
}

double pick(double value, double fallback) { return std::isnan(value) ? fallback : value; }

// Gamma draw with the mean/dispersion parameterization used by all models:
// shape = mean^2/nu2, scale = nu2/mean, so E = mean and Var = nu2. The mean
// is floored away from zero to keep the distribution well defined.
double gamma_by_mean(Rng& rng, double mean, double nu2) {
  const double m = std::max(mean, 0.1);
  return rng.gamma(m * m / nu2, nu2 / m);
}

}  // namespace

std::vector<int> truth_set(int model) {
  if (model >= 1 && model <= 3) return {0, 3, 7};
  if (model == 4 || model == 5) return {0, 2, 4, 6, 8};
  throw std::invalid_argument("truth_set: model must be 1..5");
}

ResponseTag model_tag(int model) {
  if (model >= 1 && model <= 3) return ResponseTag::quantile_w2;
  if (model == 4 || model == 5) return ResponseTag::spd_cholesky;
  throw std::invalid_argument("model_tag: model must be 1..5");
}

SimModelSpec resolve_spec(const SimModelSpec& spec) {
  ModelDefaults d = defaults_for(spec.model);
  SimModelSpec r = spec;
  if (r.p == 0) r.p = d.p;
  r.mu0 = pick(r.mu0, d.mu0);
  r.beta = pick(r.beta, d.beta);
  r.sigma0 = pick(r.sigma0, d.sigma0);
  r.gamma = pick(r.gamma, d.gamma);
  r.nu1 = pick(r.nu1, d.nu1);
  r.nu2 = pick(r.nu2, d.nu2);

  if (r.n < 2) throw std::invalid_argument("resolve_spec: n must be >= 2");
  int need_p = 0;
  for (int j : truth_set(r.model)) need_p = std::max(need_p, j + 1);
  if (r.p < need_p)
    throw std::invalid_argument("resolve_spec: p too small for the model's signal covariates");
  if (!(r.rho >= 0.0 && r.rho < 1.0))
    throw std::invalid_argument("resolve_spec: rho must be in [0, 1)");
  if (r.m_grid < 1) throw std::invalid_argument("resolve_spec: m_grid must be >= 1");
  if (r.d_spd < 2) throw std::invalid_argument("resolve_spec: d_spd must be >= 2");
  if (!(r.nu1 >= 0.0)) throw std::invalid_argument("resolve_spec: nu1 must be >= 0");
  if (!(r.nu2 > 0.0)) throw std::invalid_argument("resolve_spec: nu2 must be > 0");
  return r;
}

Eigen::MatrixXd gen_covariates(const SimModelSpec& spec, Rng& rng) {
  Eigen::MatrixXd x(spec.n, spec.p);
  const double carry = spec.rho;
  const double fresh = std::sqrt(1.0 - spec.rho * spec.rho);
  const bool to_uniform = spec.model <= 3;
  for (int i = 0; i < spec.n; ++i) {
    double z = rng.normal();
    x(i, 0) = z;
    for (int j = 1; j < spec.p; ++j) {
      z = carry * z + fresh * rng.normal();
      x(i, j) = z;
    }
    if (to_uniform)
      for (int j = 0; j < spec.p; ++j) x(i, j) = 2.0 * norm_cdf(x(i, j)) - 1.0;
  }
  return x;
}

std::vector<MetricResponse> gen_responses(const SimModelSpec& spec, const Eigen::MatrixXd& X,
                                          Rng& rng) {
  if (X.rows() != spec.n || X.cols() != spec.p)
    throw std::invalid_argument("gen_responses: covariate matrix does not match spec");
  std::vector<MetricResponse> ys;
  ys.reserve(spec.n);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  if (spec.model <= 3) {
    Eigen::VectorXd grid(spec.m_grid);
    for (int k = 0; k < spec.m_grid; ++k)
      grid[k] = norm_quantile(static_cast<double>(k + 1) / (spec.m_grid + 1));
    for (int i = 0; i < spec.n; ++i) {
      const double x1 = X(i, 0), x4 = X(i, 3), x8 = X(i, 7);
      double mu_mean = 0.0, sigma_mean = 0.0;
      switch (spec.model) {
        case 1:
          mu_mean = spec.mu0 + spec.beta * (x4 + x8);
          sigma_mean = spec.sigma0 + spec.gamma * (x1 + 1.0) / 2.0;
          break;
        case 2:
          mu_mean = spec.mu0 + spec.beta * (std::exp(-x4 * x4) + std::exp(-x8 * x8));
          sigma_mean = spec.sigma0 + spec.gamma * std::exp(-2.0 * (x1 - 1.0) * (x1 - 1.0));
          break;
        case 3:
          mu_mean = spec.mu0 + spec.beta * (std::sin(two_pi * x4) + 2.0 / (1.0 + std::fabs(x8)));
          sigma_mean = spec.sigma0 + spec.gamma * std::exp(-(x1 - 1.0) * (x1 - 1.0));
          break;
      }
      const double mu = mu_mean + std::sqrt(spec.nu1) * rng.normal();
      const double sigma = gamma_by_mean(rng, sigma_mean, spec.nu2);
      ys.emplace_back(QuantileObject(mu + sigma * grid.array()));
    }
    return ys;
  }

  // Models 4 and 5: upper triangular A, response A^T A.
  const int d = spec.d_spd;
  for (int i = 0; i < spec.n; ++i) {
    double diag_coef, upper_coef;
    if (spec.model == 4) {
      diag_coef = spec.mu0 + spec.beta * (X(i, 0) + X(i, 2));
      upper_coef = spec.sigma0 + spec.gamma * (X(i, 4) + X(i, 6) + X(i, 8));
    } else {
      diag_coef = spec.mu0 + spec.beta * (3.0 * X(i, 0) * X(i, 0) + std::sin(two_pi * X(i, 2)));
      const double eta = std::exp(-X(i, 4)) +
                         2.0 * std::exp(-2.0 * (X(i, 6) - 1.0) * (X(i, 6) - 1.0)) +
                         2.0 / (1.0 + std::fabs(X(i, 8)));
      upper_coef = gamma_by_mean(rng, spec.sigma0 + spec.gamma * eta, spec.nu2);
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (int r = 0; r < d; ++r) {
      a(r, r) = diag_coef;
      for (int c = r + 1; c < d; ++c) a(r, c) = upper_coef;
    }
    for (int r = 0; r < d; ++r)
      for (int c = r; c < d; ++c) a(r, c) += spec.nu1 * rng.normal();
    ys.emplace_back(SPDObject(a.transpose() * a));
  }
  return ys;
}

SimDataset gen_model(const SimModelSpec& spec) {
  SimDataset ds;
  ds.spec = resolve_spec(spec);
  ds.truth = truth_set(ds.spec.model);
  Rng rng(ds.spec.seed);
  ds.X = gen_covariates(ds.spec, rng);
  ds.responses = gen_responses(ds.spec, ds.X, rng);
  return ds;
}

}  // namespace fresel
