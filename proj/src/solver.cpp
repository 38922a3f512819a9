#include "fresel/solver.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace fresel {

StackedDesign::StackedDesign(const GramStack& grams) : grams_(&grams), n_(grams.n) {
  const int p = grams.p();
  if (p == 0) throw std::invalid_argument("StackedDesign: no Gram blocks");
  offsets_.resize(p + 1);
  offsets_[0] = 0;
  for (int j = 0; j < p; ++j) {
    if (grams.blocks[j].n() != n_)
      throw std::invalid_argument("StackedDesign: Gram blocks disagree on n");
    offsets_[j + 1] = offsets_[j] + grams.blocks[j].rank();
  }
  r_total_ = offsets_[p];
  stacked_.resize(n_, r_total_);
  for (int j = 0; j < p; ++j)
    if (grams.blocks[j].rank() > 0)
      stacked_.middleCols(offsets_[j], grams.blocks[j].rank()) = grams.blocks[j].B;
  if (r_total_ == 0) return;

  dual_route_ = r_total_ > n_;
  if (dual_route_) {
    Eigen::MatrixXd m = stacked_ * stacked_.transpose() / static_cast<double>(n_);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("StackedDesign: eigendecomposition failed");
    q_ = es.eigenvectors();
    lam_ = es.eigenvalues().cwiseMax(0.0);
    proj_ = q_.transpose() * stacked_;
  } else {
    Eigen::MatrixXd g = stacked_.transpose() * stacked_ / static_cast<double>(n_);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("StackedDesign: eigendecomposition failed");
    q_ = es.eigenvectors();
    lam_ = es.eigenvalues().cwiseMax(0.0);
  }
}

Eigen::VectorXd StackedDesign::solve_shifted(double shift, const Eigen::VectorXd& rhs) const {
  if (!(shift > 0.0)) throw std::invalid_argument("solve_shifted: shift must be positive");
  if (r_total_ == 0) return Eigen::VectorXd();
  if (!dual_route_) {
    Eigen::VectorXd w = q_.transpose() * rhs;
    w.array() /= (lam_.array() + shift);
    return q_ * w;
  }
  // Woodbury: (B^T B/n + shift I)^{-1} = (I - B^T (n shift I + B B^T)^{-1} B)/shift.
  Eigen::VectorXd w = proj_ * rhs;  // Q^T B rhs
  w.array() /= (lam_.array() + shift) * static_cast<double>(n_);
  return (rhs - proj_.transpose() * w) / shift;
}

Eigen::VectorXd StackedDesign::apply_B(const Eigen::VectorXd& theta) const {
  if (r_total_ == 0) return Eigen::VectorXd::Zero(n_);
  return stacked_ * theta;
}

Eigen::VectorXd StackedDesign::apply_Bt(const Eigen::VectorXd& v) const {
  if (r_total_ == 0) return Eigen::VectorXd();
  return stacked_.transpose() * v;
}

Eigen::VectorXd group_prox(const Eigen::VectorXd& v, double tau1, double tau2) {
  const double norm = v.norm();
  if (norm <= tau1) return Eigen::VectorXd::Zero(v.size());
  return v * ((1.0 - tau1 / norm) / (1.0 + tau2));
}

namespace {

void check_penalty(const StackedDesign& design, const PenaltyParams& pen) {
  if (pen.lambda1 < 0.0 || pen.lambda2 < 0.0)
    throw std::invalid_argument("penalty parameters must be nonnegative");
  if (pen.weights.size() && pen.weights.size() != design.p())
    throw std::invalid_argument("penalty weights must have one entry per covariate");
  if (pen.weights.size() && (pen.weights.array() < 0.0).any())
    throw std::invalid_argument("penalty weights must be nonnegative");
}

std::vector<Eigen::VectorXd> blockify(const StackedDesign& design, const Eigen::VectorXd& stacked) {
  std::vector<Eigen::VectorXd> out(design.p());
  for (int j = 0; j < design.p(); ++j) out[j] = design.block(stacked, j);
  return out;
}

// Fills norms, alpha, active set, objective and the KKT report from the
// blockwise solution.
void finalize_fit(const StackedDesign& design, const Eigen::VectorXd& u, const PenaltyParams& pen,
                  double active_tol, FitResult& fit) {
  const int p = design.p();
  fit.norms.resize(p);
  fit.alpha.resize(p);
  fit.active_set.clear();
  for (int j = 0; j < p; ++j) {
    fit.norms[j] = fit.theta[j].norm();
    const GramBlock& block = design.grams().blocks[j];
    if (block.rank() > 0)
      fit.alpha[j] = block.B * fit.theta[j].cwiseQuotient(block.eigvals);
    else
      fit.alpha[j] = Eigen::VectorXd::Zero(design.n());
    if (fit.norms[j] > active_tol) fit.active_set.push_back(j);
  }
  fit.objective = objective_value(design, u, pen, fit.theta);
  fit.kkt = kkt_check(design, u, pen, fit.theta);
}

}  // namespace

double objective_value(const StackedDesign& design, const Eigen::VectorXd& u,
                       const PenaltyParams& pen, const std::vector<Eigen::VectorXd>& theta) {
  Eigen::VectorXd stacked(design.total_rank());
  for (int j = 0; j < design.p(); ++j)
    if (design.rank(j) > 0) stacked.segment(design.offset(j), design.rank(j)) = theta[j];
  const Eigen::VectorXd resid = u - design.apply_B(stacked);
  double val = resid.squaredNorm() / (2.0 * design.n());
  for (int j = 0; j < design.p(); ++j) {
    const double norm = theta[j].norm();
    val += pen.lambda1 * pen.weight(j) * norm + 0.5 * pen.lambda2 * norm * norm;
  }
  return val;
}

double lambda_max(const StackedDesign& design, const Eigen::VectorXd& u,
                  const Eigen::VectorXd& weights) {
  if (weights.size() && weights.size() != design.p())
    throw std::invalid_argument("lambda_max: weights must have one entry per covariate");
  const Eigen::VectorXd btu = design.apply_Bt(u) / static_cast<double>(design.n());
  double best = -1.0;
  for (int j = 0; j < design.p(); ++j) {
    const double w = weights.size() ? weights[j] : 1.0;
    if (!(w > 0.0)) continue;
    if (design.rank(j) == 0) continue;
    best = std::max(best, btu.segment(design.offset(j), design.rank(j)).norm() / w);
  }
  if (best < 0.0) throw std::invalid_argument("lambda_max: no block with positive weight");
  return best;
}

KKTReport kkt_check(const StackedDesign& design, const Eigen::VectorXd& u,
                    const PenaltyParams& pen, const std::vector<Eigen::VectorXd>& theta,
                    double tol) {
  check_penalty(design, pen);
  KKTReport report;
  report.tol = tol;
  report.groups.resize(design.p());

  Eigen::VectorXd stacked(design.total_rank());
  for (int j = 0; j < design.p(); ++j)
    if (design.rank(j) > 0) stacked.segment(design.offset(j), design.rank(j)) = theta[j];
  const Eigen::VectorXd resid = u - design.apply_B(stacked);
  const Eigen::VectorXd grad = design.apply_Bt(resid) / static_cast<double>(design.n());

  for (int j = 0; j < design.p(); ++j) {
    KKTGroupReport& g = report.groups[j];
    if (design.rank(j) == 0) {
      g.active = false;
      g.residual = 0.0;
      g.pass = true;
      continue;
    }
    const Eigen::VectorXd gj = grad.segment(design.offset(j), design.rank(j));
    const double norm = theta[j].norm();
    const double w = pen.weight(j);
    if (norm > 0.0) {
      g.active = true;
      g.residual =
          (gj - pen.lambda2 * theta[j] - pen.lambda1 * w / norm * theta[j]).norm();
      g.pass = g.residual <= tol;
    } else {
      g.active = false;
      g.residual = std::max(0.0, gj.norm() - pen.lambda1 * w);
      g.pass = gj.norm() <= pen.lambda1 * w + tol;
    }
    if (!g.pass) report.pass = false;
  }
  return report;
}

FitResult admm_solve(const StackedDesign& design, const Eigen::VectorXd& u,
                     const PenaltyParams& pen, const ADMMConfig& config, const ADMMState* warm) {
  check_penalty(design, pen);
  if (u.size() != design.n()) throw std::invalid_argument("admm_solve: u has wrong length");
  const int R = design.total_rank();
  const int p = design.p();

  FitResult fit;
  if (R == 0) {
    fit.theta.assign(p, Eigen::VectorXd());
    fit.state = {Eigen::VectorXd(), Eigen::VectorXd(), config.rho};
    finalize_fit(design, u, pen, config.active_tol, fit);
    return fit;
  }

  Eigen::VectorXd z = Eigen::VectorXd::Zero(R);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(R);
  double rho = config.rho;
  if (warm && warm->z.size() == R) {
    z = warm->z;
    s = warm->s;
    if (warm->rho > 0.0) rho = warm->rho;
  }

  const Eigen::VectorXd btu = design.apply_Bt(u) / static_cast<double>(design.n());
  const double alpha = config.over_relax;

  Eigen::VectorXd theta(R), theta_hat(R), z_prev(R);
  bool converged = false;
  int it = 0;
  for (it = 1; it <= config.max_iter; ++it) {
    theta = design.solve_shifted(rho, btu + rho * (z - s));
    theta_hat = alpha * theta + (1.0 - alpha) * z;
    z_prev.swap(z);
    for (int j = 0; j < p; ++j) {
      const int off = design.offset(j), r = design.rank(j);
      if (r == 0) continue;
      z.segment(off, r) = group_prox(theta_hat.segment(off, r) + s.segment(off, r),
                                     pen.weight(j) * pen.lambda1 / rho, pen.lambda2 / rho);
    }
    s += theta_hat - z;

    const double r_primal = (theta - z).norm();
    const double r_dual = rho * (z - z_prev).norm();
    if (r_primal <= config.tol_primal * (1.0 + z.norm()) &&
        r_dual <= config.tol_dual * (1.0 + s.norm())) {
      converged = true;
      break;
    }
    if (config.adaptive_rho) {
      // Boyd-style residual balancing; the shifted solve is factorization-free
      // so changing rho costs nothing.
      if (r_primal > 10.0 * r_dual && rho < 1e8) {
        rho *= 2.0;
        s *= 0.5;
      } else if (r_dual > 10.0 * r_primal && rho > 1e-8) {
        rho *= 0.5;
        s *= 2.0;
      }
    }
  }

  fit.converged = converged;
  fit.iterations = converged ? it : config.max_iter;
  fit.theta = blockify(design, z);
  fit.state = {z, s, rho};
  finalize_fit(design, u, pen, config.active_tol, fit);
  return fit;
}

FitResult ridge_solve(const StackedDesign& design, const Eigen::VectorXd& u, double lambda2) {
  if (!(lambda2 > 0.0)) throw std::invalid_argument("ridge_solve: lambda2 must be positive");
  if (u.size() != design.n()) throw std::invalid_argument("ridge_solve: u has wrong length");
  const Eigen::VectorXd btu = design.apply_Bt(u) / static_cast<double>(design.n());
  Eigen::VectorXd theta = design.total_rank() ? design.solve_shifted(lambda2, btu)
                                              : Eigen::VectorXd();
  PenaltyParams pen;
  pen.lambda2 = lambda2;
  FitResult fit;
  fit.theta = blockify(design, theta);
  fit.state = {theta, Eigen::VectorXd::Zero(theta.size()), 1.0};
  fit.iterations = 0;
  fit.converged = true;
  finalize_fit(design, u, pen, ADMMConfig{}.active_tol, fit);
  return fit;
}

FitResult admm_solve(const Eigen::VectorXd& u, const GramStack& grams, const PenaltyParams& pen,
                     const ADMMConfig& config, const ADMMState* warm) {
  StackedDesign design(grams);
  return admm_solve(design, u, pen, config, warm);
}

FitResult ridge_solve(const Eigen::VectorXd& u, const GramStack& grams, double lambda2) {
  StackedDesign design(grams);
  return ridge_solve(design, u, lambda2);
}

double lambda_max(const Eigen::VectorXd& u, const GramStack& grams,
                  const Eigen::VectorXd& weights) {
  StackedDesign design(grams);
  return lambda_max(design, u, weights);
}

}  // namespace fresel
