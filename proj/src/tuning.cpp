#include "fresel/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "fresel/rng.hpp"
#include "fresel/util.hpp"

namespace fresel {

std::string method_name(FitMethod method) {
  switch (method) {
    case FitMethod::elastic_net: return "elastic_net";
    case FitMethod::rscad_l2: return "rscad_l2";
    case FitMethod::escad_l2: return "escad_l2";
  }
  return "elastic_net";
}

FitMethod method_from_name(const std::string& name) {
  if (name == "elastic_net") return FitMethod::elastic_net;
  if (name == "rscad_l2") return FitMethod::rscad_l2;
  if (name == "escad_l2") return FitMethod::escad_l2;
  throw std::invalid_argument("unknown method: " + name);
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> make_splits(const SplitSpec& split,
                                                                       int n) {
  if (n < 2) throw std::invalid_argument("make_splits: need at least two rows");
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(split.seed);
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);

  std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
  if (split.mode == SplitSpec::Mode::holdout) {
    if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
      throw std::invalid_argument("make_splits: train_fraction must be in (0,1)");
    int n_train = static_cast<int>(std::llround(split.train_fraction * n));
    n_train = std::clamp(n_train, 1, n - 1);
    std::vector<int> train(order.begin(), order.begin() + n_train);
    std::vector<int> test(order.begin() + n_train, order.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    out.emplace_back(std::move(train), std::move(test));
    return out;
  }

  const int k = split.k;
  if (k < 2 || k > n) throw std::invalid_argument("make_splits: k must be in [2, n]");
  for (int f = 0; f < k; ++f) {
    const int lo = static_cast<int>(static_cast<long long>(f) * n / k);
    const int hi = static_cast<int>(static_cast<long long>(f + 1) * n / k);
    std::vector<int> test(order.begin() + lo, order.begin() + hi);
    std::vector<int> train;
    train.reserve(n - (hi - lo));
    train.insert(train.end(), order.begin(), order.begin() + lo);
    train.insert(train.end(), order.begin() + hi, order.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    out.emplace_back(std::move(train), std::move(test));
  }
  return out;
}

Eigen::VectorXd predict(const FitResult& fit, const std::vector<Eigen::MatrixXd>& cross) {
  if (fit.alpha.size() != cross.size())
    throw std::invalid_argument("predict: one cross-Gram per covariate required");
  if (cross.empty()) throw std::invalid_argument("predict: no covariates");
  Eigen::VectorXd pred = Eigen::VectorXd::Zero(cross[0].cols());
  for (size_t j = 0; j < cross.size(); ++j) {
    if (cross[j].rows() != fit.alpha[j].size())
      throw std::invalid_argument("predict: cross-Gram rows must match training size");
    pred.noalias() += cross[j].transpose() * fit.alpha[j];
  }
  return pred;
}

double test_mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& u_test_raw,
                double u_mean_train) {
  if (pred.size() != u_test_raw.size() || pred.size() == 0)
    throw std::invalid_argument("test_mse: size mismatch");
  return (u_test_raw.array() - u_mean_train - pred.array()).square().mean();
}

namespace {

struct FoldData {
  std::vector<int> train_idx, test_idx;
  std::unique_ptr<GramStack> grams;
  std::unique_ptr<StackedDesign> design;
  ResolvedReference ref;
  Eigen::VectorXd u;  // centered training transform
  double u_mean = 0.0;
  Eigen::VectorXd u_test_raw;
  std::vector<Eigen::MatrixXd> cross;
};

std::vector<MetricResponse> gather(const std::vector<MetricResponse>& ys,
                                   const std::vector<int>& idx) {
  std::vector<MetricResponse> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(ys[i]);
  return out;
}

Eigen::VectorXd gather_col(const Eigen::MatrixXd& x, int j, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[static_cast<int>(i)] = x(idx[i], j);
  return out;
}

FoldData prepare_fold(const Eigen::MatrixXd& x, const std::vector<MetricResponse>& ys,
                      const std::vector<KernelChoice>& kernels, const ReferencePolicy& policy,
                      std::uint64_t ref_salt, std::vector<int> train_idx,
                      std::vector<int> test_idx, const MetricResponse* y_carry = nullptr) {
  FoldData fold;
  fold.train_idx = std::move(train_idx);
  fold.test_idx = std::move(test_idx);
  const int p = static_cast<int>(x.cols());

  fold.grams = std::make_unique<GramStack>();
  fold.grams->n = static_cast<int>(fold.train_idx.size());
  fold.grams->blocks.reserve(p);
  for (int j = 0; j < p; ++j) {
    auto col_tr = scalar_column(gather_col(x, j, fold.train_idx));
    KernelSpec spec = resolve_kernel(kernels[j], col_tr);
    GramBlock block = build_gram(spec, col_tr);
    if (!fold.test_idx.empty()) {
      auto col_te = scalar_column(gather_col(x, j, fold.test_idx));
      fold.cross.push_back(cross_gram(block, col_tr, col_te));
    }
    fold.grams->blocks.push_back(std::move(block));
  }
  fold.design = std::make_unique<StackedDesign>(*fold.grams);

  auto y_tr = gather(ys, fold.train_idx);
  ReferencePolicy fold_policy = policy;
  if (ref_salt != 0) fold_policy.seed = mix_seed(policy.seed, ref_salt);
  if (y_carry) {
    // Keep the anchor from the tuning fold so this problem shares its signal
    // scale and the swept penalties stay meaningful. y0 still follows the
    // policy on the current rows.
    fold_policy.y_rule = ReferencePolicy::YRule::explicit_object;
    fold_policy.y_object = *y_carry;
  }
  fold.ref = resolve_reference(fold_policy, y_tr);
  TransformedResponse tr = transform_response(y_tr, fold.ref);
  fold.u = std::move(tr.u);
  fold.u_mean = tr.u_mean;
  if (!fold.test_idx.empty()) {
    auto y_te = gather(ys, fold.test_idx);
    fold.u_test_raw = raw_transform(y_te, fold.ref);
  }
  return fold;
}

// Default ridge level: a small fraction of the mean per-covariate variance
// scale of the design, trace(B^T B/n)/p.
double default_lambda2(const GramStack& grams) {
  double trace = 0.0;
  for (const auto& block : grams.blocks) trace += block.eigvals.sum();
  const double scale = trace / grams.n / std::max(1, grams.p());
  return scale > 0.0 ? 1e-3 * scale : 1e-3;
}

std::vector<double> auto_lambda1_grid(const FoldData& fold, const TuneGrid& grid) {
  double lmax = 0.0;
  try {
    lmax = lambda_max(*fold.design, fold.u);
  } catch (const std::invalid_argument&) {
    lmax = 0.0;  // no usable block
  }
  if (!(lmax > 0.0)) return {0.0};
  const int num = std::max(grid.num_lambda1, 1);
  if (num == 1) return {lmax};
  std::vector<double> out(num);
  for (int i = 0; i < num; ++i)
    out[i] = lmax * std::pow(grid.min_ratio, static_cast<double>(i) / (num - 1));
  return out;
}

// One method evaluation at a fixed penalty pair. init is the per-fold
// initializer (ridge for rscad_l2, baseline elastic net for escad_l2).
FitResult method_fit(FitMethod method, const StackedDesign& design, const Eigen::VectorXd& u,
                     double l1, double l2, const TuneOptions& options, const FitResult* init,
                     const ADMMState* warm) {
  if (method == FitMethod::elastic_net || l1 <= 0.0) {
    PenaltyParams pen;
    pen.lambda1 = l1;
    pen.lambda2 = l2;
    return admm_solve(design, u, pen, options.inner, warm);
  }
  FoldedPenalty pen;
  pen.kind = options.folded_kind;
  pen.lambda = l1;
  pen.a = options.scad_a;
  LLAConfig config;
  config.max_outer = options.lla_max_outer;
  config.inner = options.inner;
  return lla_fit(design, u, pen, l2, config, init, warm).fit;
}

struct SweepResult {
  std::vector<TuneEntry> entries;
  int chosen_index = 0;
  bool any_nonconverged = false;
};

SweepResult sweep(const std::vector<FoldData>& folds, const std::vector<double>& l1_grid,
                  const std::vector<double>& l2_grid, FitMethod method,
                  const TuneOptions& options, double base_l1, double base_l2) {
  const int n1 = static_cast<int>(l1_grid.size());
  const int n2 = static_cast<int>(l2_grid.size());
  const int p = folds[0].design->p();

  SweepResult result;
  result.entries.assign(static_cast<size_t>(n1) * n2, TuneEntry{});
  for (int i2 = 0; i2 < n2; ++i2)
    for (int i1 = 0; i1 < n1; ++i1) {
      TuneEntry& e = result.entries[i2 * n1 + i1];
      e.lambda1 = l1_grid[i1];
      e.lambda2 = l2_grid[i2];
      e.norms = Eigen::VectorXd::Zero(p);
    }

  for (const FoldData& fold : folds) {
    // Per-fold initializer, shared across the whole grid.
    FitResult init;
    bool has_init = false;
    if (method == FitMethod::escad_l2) {
      PenaltyParams pen;
      pen.lambda1 = base_l1;
      pen.lambda2 = base_l2;
      init = admm_solve(*fold.design, fold.u, pen, options.inner);
      has_init = true;
    }
    for (int i2 = 0; i2 < n2; ++i2) {
      if (method == FitMethod::rscad_l2) {
        init = ridge_solve(*fold.design, fold.u, l2_grid[i2]);
        has_init = true;
      }
      ADMMState warm;
      bool has_warm = false;
      for (int i1 = 0; i1 < n1; ++i1) {
        FitResult fit = method_fit(method, *fold.design, fold.u, l1_grid[i1], l2_grid[i2],
                                   options, has_init ? &init : nullptr,
                                   has_warm ? &warm : nullptr);
        warm = fit.state;
        has_warm = true;
        if (!fit.converged) result.any_nonconverged = true;

        TuneEntry& e = result.entries[i2 * n1 + i1];
        e.mse += test_mse(predict(fit, fold.cross), fold.u_test_raw, fold.u_mean);
        e.active_size += static_cast<double>(fit.active_set.size());
        e.norms += fit.norms;
      }
    }
  }

  const double nf = static_cast<double>(folds.size());
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < result.entries.size(); ++i) {
    TuneEntry& e = result.entries[i];
    e.mse /= nf;
    e.active_size /= nf;
    e.norms /= nf;
    if (e.mse < best) {
      best = e.mse;
      result.chosen_index = static_cast<int>(i);
    }
  }
  return result;
}

}  // namespace

TuneReport tune(const Eigen::MatrixXd& X, const std::vector<MetricResponse>& Y,
                const std::vector<KernelChoice>& kernels, const ReferencePolicy& policy,
                const TuneGrid& grid, const SplitSpec& split, FitMethod method,
                const TuneOptions& options) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (n != static_cast<int>(Y.size()))
    throw std::invalid_argument("tune: covariate rows and responses disagree");
  if (p == 0) throw std::invalid_argument("tune: no covariates");
  std::vector<KernelChoice> ks = kernels;
  if (ks.size() == 1 && p > 1) ks.assign(p, kernels[0]);
  if (static_cast<int>(ks.size()) != p)
    throw std::invalid_argument("tune: one kernel choice per covariate required");

  auto split_sets = make_splits(split, n);
  std::vector<FoldData> folds;
  folds.reserve(split_sets.size());
  for (size_t f = 0; f < split_sets.size(); ++f)
    folds.push_back(prepare_fold(X, Y, ks, policy, f + 1, std::move(split_sets[f].first),
                                 std::move(split_sets[f].second)));

  TuneReport report;
  report.grid_lambda1 = grid.lambda1;
  if (report.grid_lambda1.empty()) report.grid_lambda1 = auto_lambda1_grid(folds[0], grid);
  std::sort(report.grid_lambda1.begin(), report.grid_lambda1.end(), std::greater<double>());
  report.grid_lambda2 = grid.lambda2;
  if (report.grid_lambda2.empty())
    report.grid_lambda2 = {default_lambda2(*folds[0].grams)};

  if (method == FitMethod::escad_l2) {
    SweepResult base = sweep(folds, report.grid_lambda1, report.grid_lambda2,
                             FitMethod::elastic_net, options, 0.0, 0.0);
    report.baseline_lambda1 = base.entries[base.chosen_index].lambda1;
    report.baseline_lambda2 = base.entries[base.chosen_index].lambda2;
    report.any_nonconverged = base.any_nonconverged;
  }

  SweepResult main = sweep(folds, report.grid_lambda1, report.grid_lambda2, method, options,
                           report.baseline_lambda1, report.baseline_lambda2);
  report.entries = std::move(main.entries);
  report.any_nonconverged = report.any_nonconverged || main.any_nonconverged;
  const TuneEntry& chosen = report.entries[main.chosen_index];
  report.chosen_lambda1 = chosen.lambda1;
  report.chosen_lambda2 = chosen.lambda2;
  report.chosen_mse = chosen.mse;

  // Refit on the full data at the winning pair, keeping the first fold's
  // anchor so the penalties transfer to a problem of the same scale.
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  FoldData full = prepare_fold(X, Y, ks, policy, 0, std::move(all), {}, &folds[0].ref.y);
  FitResult init;
  const FitResult* init_ptr = nullptr;
  if (method == FitMethod::rscad_l2) {
    init = ridge_solve(*full.design, full.u, report.chosen_lambda2);
    init_ptr = &init;
  } else if (method == FitMethod::escad_l2) {
    PenaltyParams pen;
    pen.lambda1 = report.baseline_lambda1;
    pen.lambda2 = report.baseline_lambda2;
    init = admm_solve(*full.design, full.u, pen, options.inner);
    init_ptr = &init;
  }
  report.final_fit = method_fit(method, *full.design, full.u, report.chosen_lambda1,
                                report.chosen_lambda2, options, init_ptr, nullptr);
  report.any_nonconverged = report.any_nonconverged || !report.final_fit.converged;
  return report;
}

}  // namespace fresel
