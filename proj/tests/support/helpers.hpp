#pragma once

// Shared builders for randomized test instances.

#include <Eigen/Dense>
#include <vector>

#include "fresel/kernels.hpp"
#include "fresel/objects.hpp"
#include "fresel/rng.hpp"
#include "fresel/solver.hpp"

namespace testhelp {

inline Eigen::VectorXd random_vector(fresel::Rng& rng, int n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

inline fresel::QuantileObject random_quantile(fresel::Rng& rng, int m) {
  // location-scale normal quantiles, always nondecreasing
  const double mu = rng.normal();
  const double sigma = 0.2 + rng.uniform();
  Eigen::VectorXd v(m);
  for (int k = 0; k < m; ++k)
    v[k] = mu + sigma * fresel::norm_quantile((k + 1.0) / (m + 1.0));
  return fresel::QuantileObject(v);
}

inline fresel::SPDObject random_spd(fresel::Rng& rng, int d) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  Eigen::MatrixXd m = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
  return fresel::SPDObject(0.5 * (m + m.transpose()));
}

inline std::vector<fresel::MetricResponse> random_quantiles(fresel::Rng& rng, int n, int m) {
  std::vector<fresel::MetricResponse> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.emplace_back(random_quantile(rng, m));
  return out;
}

inline std::vector<fresel::MetricResponse> random_spds(fresel::Rng& rng, int n, int d) {
  std::vector<fresel::MetricResponse> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.emplace_back(random_spd(rng, d));
  return out;
}

// Gram stack over p random scalar columns. Kernels cycle through
// linear/gaussian/laplacian when mixed, otherwise all gaussian.
inline fresel::GramStack random_stack(fresel::Rng& rng, int n, int p, bool mixed = true) {
  fresel::GramStack stack;
  stack.n = n;
  for (int j = 0; j < p; ++j) {
    auto col = fresel::scalar_column(random_vector(rng, n));
    fresel::KernelChoice choice;
    if (mixed)
      choice.kind = j % 3 == 0   ? fresel::KernelKind::linear
                    : j % 3 == 1 ? fresel::KernelKind::gaussian
                                 : fresel::KernelKind::laplacian;
    fresel::KernelSpec spec = fresel::resolve_kernel(choice, col);
    stack.blocks.push_back(fresel::build_gram(spec, col));
  }
  return stack;
}

// Per-block B matrices in stack order, the shape the reference solver wants.
inline std::vector<Eigen::MatrixXd> stack_blocks(const fresel::GramStack& stack) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(stack.blocks.size());
  for (const auto& b : stack.blocks) out.push_back(b.B);
  return out;
}

inline double max_block_gap(const std::vector<Eigen::VectorXd>& a,
                            const std::vector<Eigen::VectorXd>& b) {
  double worst = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j].size() == 0 && b[j].size() == 0) continue;
    worst = std::max(worst, (a[j] - b[j]).norm());
  }
  return worst;
}

}  // namespace testhelp
