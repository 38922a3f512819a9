// Acceptance checks. Each case prints exactly one summary line so a log scan
// shows the whole scorecard at a glance; the doctest assertions carry the
// same conditions so ctest reports match the printed verdicts.

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "fresel/harness.hpp"
#include "fresel/lla.hpp"
#include "fresel/simgen.hpp"
#include "fresel/solver.hpp"
#include "fresel/transform.hpp"
#include "fresel/util.hpp"
#include "support/helpers.hpp"
#include "support/prox_grad.hpp"

using namespace fresel;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("acceptance %s: %s (%s)\n", name, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string e1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1e", v);
  return buf;
}

std::string s1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f s", v);
  return buf;
}

double max_inactive(const FrequencyReport& rep) {
  double worst = 0.0;
  for (std::size_t j = 0; j < rep.frequency.size(); ++j)
    if (std::find(rep.truth.begin(), rep.truth.end(), static_cast<int>(j)) == rep.truth.end())
      worst = std::max(worst, rep.frequency[j]);
  return worst;
}

}  // namespace

TEST_SUITE("acceptance") {

TEST_CASE("solver matches the proximal gradient oracle") {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int p = 2 + (i % 3);
    GramStack stack = testhelp::random_stack(rng, 20, p, true);
    StackedDesign design(stack);
    const Eigen::VectorXd u = testhelp::random_vector(rng, 20);
    const double lmax = lambda_max(design, u);
    for (double frac : {0.1, 0.5}) {
      PenaltyParams pen{frac * lmax, 0.1, Eigen::VectorXd()};
      const FitResult fit = admm_solve(design, u, pen);
      const auto oracle =
          refimpl::prox_grad_solve(testhelp::stack_blocks(stack), u, pen.lambda1, pen.lambda2);
      const double gap =
          std::abs(fit.objective - oracle.objective) / (1.0 + std::abs(oracle.objective));
      worst = std::max(worst, gap);
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst <= 1e-6 && secs < 5.0;
  report("solver_oracle_agreement", pass,
         "20 instances x 2 penalties, max rel objective gap " + e1(worst) + ", " + s1(secs));
  CHECK(worst <= 1e-6);
  CHECK(secs < 5.0);
}

TEST_CASE("kkt certificates validate converged fits and detect perturbations") {
  Rng rng(101);
  int converged = 0;
  int cert_failures = 0;
  int perturbed = 0;
  int missed_detections = 0;
  for (int i = 0; i < 20; ++i) {
    const int p = 2 + (i % 3);
    GramStack stack = testhelp::random_stack(rng, 20, p, true);
    StackedDesign design(stack);
    const Eigen::VectorXd u = testhelp::random_vector(rng, 20);
    const double lmax = lambda_max(design, u);
    for (double frac : {0.1, 0.5}) {
      PenaltyParams pen{frac * lmax, 0.1, Eigen::VectorXd()};
      const FitResult fit = admm_solve(design, u, pen);
      if (!fit.converged) continue;
      ++converged;
      if (!kkt_check(design, u, pen, fit.theta).pass) ++cert_failures;
      for (int j : fit.active_set) {
        auto theta = fit.theta;
        theta[j](0) += 1e-2;
        ++perturbed;
        if (kkt_check(design, u, pen, theta).pass) ++missed_detections;
      }
    }
  }
  const bool pass =
      converged == 40 && cert_failures == 0 && perturbed > 0 && missed_detections == 0;
  report("kkt_certificates", pass,
         std::to_string(converged) + "/40 converged, " + std::to_string(cert_failures) +
             " certificate failures, " + std::to_string(missed_detections) + "/" +
             std::to_string(perturbed) + " perturbations missed");
  CHECK(converged == 40);
  CHECK(cert_failures == 0);
  CHECK(perturbed > 0);
  CHECK(missed_detections == 0);
}

TEST_CASE("penalty above the threshold yields the null model") {
  Rng rng(202);
  int null_misses = 0;
  int live_misses = 0;
  for (int i = 0; i < 10; ++i) {
    const int p = 2 + (i % 3);
    GramStack stack = testhelp::random_stack(rng, 20, p, true);
    StackedDesign design(stack);
    const Eigen::VectorXd u = testhelp::random_vector(rng, 20);
    const double lmax = lambda_max(design, u);
    const FitResult hi = admm_solve(design, u, {1.001 * lmax, 0.1, Eigen::VectorXd()});
    if (!hi.active_set.empty() || hi.norms.maxCoeff() != 0.0) ++null_misses;
    const FitResult lo = admm_solve(design, u, {0.9 * lmax, 0.1, Eigen::VectorXd()});
    if (lo.active_set.empty()) ++live_misses;
  }
  const bool pass = null_misses == 0 && live_misses == 0;
  report("null_threshold", pass,
         "10 instances, " + std::to_string(null_misses) + " nonzero above threshold, " +
             std::to_string(live_misses) + " zero below threshold");
  CHECK(null_misses == 0);
  CHECK(live_misses == 0);
}

TEST_CASE("distribution response selection with the folded penalty") {
  const auto t0 = Clock::now();
  ExperimentSpec spec;
  spec.sim.model = 1;
  spec.sim.n = 200;
  spec.method = FitMethod::rscad_l2;
  spec.kernel.kind = KernelKind::linear;
  spec.replicates = 50;
  spec.base_seed = 1;
  const FrequencyReport rep = run_experiment(spec);
  const double secs = seconds_since(t0);
  const double a1 = rep.frequency[0];
  const double a4 = rep.frequency[3];
  const double a8 = rep.frequency[7];
  const double worst_inactive = max_inactive(rep);
  const bool pass = rep.failed == 0 && a1 >= 0.90 && a4 >= 0.90 && a8 >= 0.90 &&
                    worst_inactive <= 0.15 && secs <= 1200.0;
  report("distribution_selection", pass,
         "actives X1 " + f2(a1) + " X4 " + f2(a4) + " X8 " + f2(a8) +
             " (need >= 0.90), max inactive " + f2(worst_inactive) + " (need <= 0.15), " +
             s1(secs));
  CHECK(rep.failed == 0);
  CHECK(a1 >= 0.90);
  CHECK(a4 >= 0.90);
  CHECK(a8 >= 0.90);
  CHECK(worst_inactive <= 0.15);
  CHECK(secs <= 1200.0);
}

TEST_CASE("kernel flexibility separates scale signals") {
  const auto t0 = Clock::now();
  ExperimentSpec spec;
  spec.sim.model = 2;
  spec.sim.n = 200;
  spec.method = FitMethod::elastic_net;
  spec.kernel.kind = KernelKind::gaussian;
  spec.replicates = 50;
  spec.base_seed = 1;
  const FrequencyReport gauss = run_experiment(spec);

  ExperimentSpec linear_spec = spec;
  linear_spec.kernel.kind = KernelKind::linear;
  const FrequencyReport lin = run_experiment(linear_spec);
  const double secs = seconds_since(t0);

  const double a1 = gauss.frequency[0];
  const double a4 = gauss.frequency[3];
  const double a8 = gauss.frequency[7];
  const double worst_inactive = max_inactive(gauss);
  const double lin4 = lin.frequency[3];
  const double lin8 = lin.frequency[7];
  const bool pass = gauss.failed == 0 && lin.failed == 0 && a1 >= 0.95 && a4 >= 0.95 &&
                    a8 >= 0.95 && worst_inactive <= 0.10 && lin4 <= 0.3 && lin8 <= 0.3;
  report("kernel_flexibility", pass,
         "gaussian actives X1 " + f2(a1) + " X4 " + f2(a4) + " X8 " + f2(a8) +
             " (need >= 0.95), max inactive " + f2(worst_inactive) +
             " (need <= 0.10); linear X4 " + f2(lin4) + " X8 " + f2(lin8) + " (need <= 0.3), " +
             s1(secs));
  CHECK(gauss.failed == 0);
  CHECK(lin.failed == 0);
  CHECK(a1 >= 0.95);
  CHECK(a4 >= 0.95);
  CHECK(a8 >= 0.95);
  CHECK(worst_inactive <= 0.10);
  CHECK(lin4 <= 0.3);
  CHECK(lin8 <= 0.3);
}

TEST_CASE("matrix response selection with the folded penalty") {
  const auto t0 = Clock::now();
  ExperimentSpec spec;
  spec.sim.model = 4;
  spec.sim.n = 200;
  spec.method = FitMethod::rscad_l2;
  spec.kernel.kind = KernelKind::linear;
  spec.replicates = 50;
  spec.base_seed = 1;
  const FrequencyReport rep = run_experiment(spec);
  const double secs = seconds_since(t0);

  double worst_active = 1.0;
  std::string actives;
  for (int j : rep.truth) {
    worst_active = std::min(worst_active, rep.frequency[j]);
    actives += " X" + std::to_string(j + 1) + " " + f2(rep.frequency[j]);
  }
  const double worst_inactive = max_inactive(rep);
  const bool pass =
      rep.failed == 0 && worst_active >= 0.90 && worst_inactive <= 0.15 && secs <= 1200.0;
  report("matrix_selection", pass,
         "actives" + actives + " (need >= 0.90), max inactive " + f2(worst_inactive) +
             " (need <= 0.15), " + s1(secs));
  CHECK(rep.failed == 0);
  CHECK(worst_active >= 0.90);
  CHECK(worst_inactive <= 0.15);
  CHECK(secs <= 1200.0);
}

TEST_CASE("one step localization reaches the restricted oracle") {
  const auto t0 = Clock::now();
  const std::vector<int> truth = truth_set(4);
  int recovered = 0;
  int matched = 0;
  double worst_gap = 0.0;
  const int n_seeds = 50;
  for (std::uint64_t seed = 1; seed <= n_seeds; ++seed) {
    SimModelSpec s;
    s.model = 4;
    s.n = 200;
    s.seed = seed;
    s.nu1 = 0.0;  // noise-free responses: the strong-signal premise holds
    const SimDataset ds = gen_model(s);

    GramStack stack;
    stack.n = s.n;
    for (int j = 0; j < ds.X.cols(); ++j) {
      const auto col = scalar_column(ds.X.col(j));
      stack.blocks.push_back(build_gram(KernelSpec{KernelKind::linear, 1.0}, col));
    }
    StackedDesign design(stack);
    const ResolvedReference ref = resolve_reference(default_policy(seed), ds.responses);
    const TransformedResponse tr = transform_response(ds.responses, ref);
    const double lmax = lambda_max(design, tr.u);
    double trace = 0.0;
    for (const auto& block : stack.blocks) trace += block.eigvals.sum();
    const double lambda2 = 1e-3 * (trace / stack.n) / stack.p();

    FoldedPenalty pen{FoldedPenalty::Kind::scad, 0.1 * lmax, 3.7};
    LLAConfig config;
    config.max_outer = 1;
    config.init = LLAConfig::Init::elastic_net;
    config.init_lambda1 = 0.1 * lmax;
    const LLAResult res = lla_fit(design, tr.u, pen, lambda2, config);
    if (res.fit.active_set != truth) continue;
    ++recovered;

    GramStack rstack;
    rstack.n = stack.n;
    for (int j : truth) rstack.blocks.push_back(stack.blocks[j]);
    StackedDesign rdesign(rstack);
    const FitResult oracle = ridge_solve(rdesign, tr.u, lambda2);
    double gap = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k)
      gap = std::max(gap, (res.fit.theta[truth[k]] - oracle.theta[k]).norm());
    worst_gap = std::max(worst_gap, gap);
    if (gap <= 1e-5) ++matched;
  }
  const double secs = seconds_since(t0);
  const bool pass = recovered >= 48 && matched == recovered;
  report("one_step_oracle", pass,
         std::to_string(recovered) + "/50 exact supports (need >= 48), " +
             std::to_string(matched) + " oracle matches, worst block gap " + e1(worst_gap) +
             ", " + s1(secs));
  CHECK(recovered >= 48);
  CHECK(matched == recovered);
}

TEST_CASE("selection is stable across reference draws") {
  const auto t0 = Clock::now();
  ExperimentSpec spec;
  spec.sim.model = 1;
  spec.sim.n = 200;
  spec.method = FitMethod::rscad_l2;
  spec.kernel.kind = KernelKind::linear;
  spec.replicates = 30;
  spec.base_seed = 1;

  std::vector<ReferencePolicy> policies;
  policies.push_back(default_policy(mix_seed(1, 100)));
  for (int i = 1; i <= 4; ++i) {
    ReferencePolicy perturbed = default_policy(mix_seed(1, 100 + i));
    perturbed.y_rule = ReferencePolicy::YRule::perturbed_mean;
    perturbed.perturb_scale = 0.5;
    policies.push_back(perturbed);
  }
  const InvarianceReport rep = run_invariance(spec, policies);
  const double secs = seconds_since(t0);
  const bool pass = rep.failed == 0 && rep.identical_fraction >= 0.90;
  report("reference_invariance", pass,
         "identical sets in " + f2(rep.identical_fraction) +
             " of replicates (need >= 0.90), mean jaccard " + f2(rep.overall_mean_jaccard) +
             ", " + s1(secs));
  CHECK(rep.failed == 0);
  CHECK(rep.identical_fraction >= 0.90);
}

TEST_CASE("core property rollup") {
  std::string failures;
  Rng rng(7);

  {  // metric axioms on both response types
    bool ok = true;
    const auto qs = testhelp::random_quantiles(rng, 10, 15);
    const auto ms = testhelp::random_spds(rng, 10, 3);
    for (const auto* batch : {&qs, &ms}) {
      const auto& ys = *batch;
      for (std::size_t i = 0; i < ys.size(); ++i) {
        ok &= response_dist_sq(ys[i], ys[i]) == 0.0;
        for (std::size_t j = i + 1; j < ys.size(); ++j) {
          ok &= response_dist_sq(ys[i], ys[j]) == response_dist_sq(ys[j], ys[i]);
          for (std::size_t k = 0; k < ys.size(); ++k) {
            const double ac = std::sqrt(response_dist_sq(ys[i], ys[k]));
            const double ab = std::sqrt(response_dist_sq(ys[i], ys[j]));
            const double bc = std::sqrt(response_dist_sq(ys[j], ys[k]));
            ok &= ac <= ab + bc + 1e-12;
          }
        }
      }
    }
    if (!ok) failures += " metric_axioms";
  }

  {  // centered Grams: PSD factors and zero row sums
    bool ok = true;
    GramStack stack = testhelp::random_stack(rng, 25, 3, true);
    for (const auto& block : stack.blocks) {
      ok &= block.eigvals.minCoeff() >= 0.0;
      const Eigen::MatrixXd k = block.B * block.B.transpose();
      ok &= k.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, k.cwiseAbs().maxCoeff());
    }
    if (!ok) failures += " gram_invariants";
  }

  {  // proximal map identities
    bool ok = true;
    for (int rep = 0; rep < 10; ++rep) {
      const Eigen::VectorXd v = testhelp::random_vector(rng, 5);
      ok &= (group_prox(v, 0.0, 0.3) - v / 1.3).cwiseAbs().maxCoeff() <= 1e-14;
      ok &= group_prox(v, v.norm() * 1.01, 0.5).cwiseAbs().maxCoeff() == 0.0;
      const double tau1 = 0.4 * v.norm();
      const Eigen::VectorXd expect = (1.0 - tau1 / v.norm()) * v / 1.25;
      ok &= (group_prox(v, tau1, 0.25) - expect).cwiseAbs().maxCoeff() <= 1e-12;
    }
    if (!ok) failures += " prox_identities";
  }

  {  // folded penalty derivative pinned at the three regimes
    const FoldedPenalty scad{FoldedPenalty::Kind::scad, 1.0, 3.7};
    bool ok = std::abs(penalty_derivative(scad, 0.5) - 1.0) <= 1e-12;
    ok &= std::abs(penalty_derivative(scad, 2.0) - 1.7 / 2.7) <= 1e-12;
    ok &= penalty_derivative(scad, 5.0) == 0.0;
    if (!ok) failures += " scad_derivative";
  }

  {  // the transform vanishes when both references coincide
    const auto ys = testhelp::random_quantiles(rng, 12, 20);
    ResolvedReference ref;
    ref.y0 = frechet_mean(ys);
    ref.y = ref.y0;
    const TransformedResponse tr = transform_response(ys, ref);
    if (tr.u.cwiseAbs().maxCoeff() != 0.0) failures += " transform_vanishing";
  }

  {  // seeded experiments are deterministic, including across worker counts
    ExperimentSpec spec;
    spec.sim.model = 2;
    spec.sim.n = 40;
    spec.method = FitMethod::elastic_net;
    spec.kernel.kind = KernelKind::gaussian;
    spec.grid.num_lambda1 = 4;
    spec.replicates = 2;
    spec.base_seed = 5;
    const FrequencyReport a = run_experiment(spec);
    const FrequencyReport b = run_experiment(spec);
    set_threads(3);
    const FrequencyReport c = run_experiment(spec);
    set_threads(0);
    bool ok = a.frequency == b.frequency && a.frequency == c.frequency;
    ok &= a.mse_mean == b.mse_mean && a.mse_mean == c.mse_mean;
    ok &= a.active_sets == b.active_sets && a.active_sets == c.active_sets;
    if (!ok) failures += " determinism";
  }

  const bool pass = failures.empty();
  report("property_rollup", pass, pass ? "metric axioms, gram invariants, prox identities, "
                                         "penalty derivative, transform, determinism all hold"
                                       : "failing:" + failures);
  CHECK_MESSAGE(failures.empty(), failures);
}

}  // TEST_SUITE("acceptance")
