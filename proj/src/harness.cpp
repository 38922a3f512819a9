#include "fresel/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>

#include "fresel/util.hpp"
#include "fresel/version.hpp"

namespace fresel {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string cov_name(int j) { return "X" + std::to_string(j + 1); }

std::vector<std::string> cov_names(const std::vector<int>& idx) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (int j : idx) out.push_back(cov_name(j));
  return out;
}

double sample_sd(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / (xs.size() - 1));
}

std::string policy_label(const ReferencePolicy& policy) {
  switch (policy.y_rule) {
    case ReferencePolicy::YRule::random_sample:
      return "random_sample(seed=" + std::to_string(policy.seed) + ")";
    case ReferencePolicy::YRule::sample_index:
      return "sample_index(" + std::to_string(policy.sample_index) + ")";
    case ReferencePolicy::YRule::perturbed_mean:
      return "perturbed_mean(scale=" + fmt_g6(policy.perturb_scale) +
             ",seed=" + std::to_string(policy.seed) + ")";
    case ReferencePolicy::YRule::explicit_object:
      return "explicit";
  }
  return "unknown";
}

ordered_json spec_to_json(const ExperimentSpec& spec) {
  const SimModelSpec sim = resolve_spec(spec.sim);
  ordered_json j;
  j["model"] = sim.model;
  j["n"] = sim.n;
  j["p"] = sim.p;
  j["rho"] = sim.rho;
  if (model_tag(sim.model) == ResponseTag::quantile_w2)
    j["m_grid"] = sim.m_grid;
  else
    j["d_spd"] = sim.d_spd;
  j["params"] = {{"mu0", sim.mu0},     {"beta", sim.beta}, {"sigma0", sim.sigma0},
                 {"gamma", sim.gamma}, {"nu1", sim.nu1},   {"nu2", sim.nu2}};
  j["method"] = method_name(spec.method);
  ordered_json kernel;
  kernel["kind"] = kernel_kind_name(spec.kernel.kind);
  if (spec.kernel.gamma > 0.0)
    kernel["gamma"] = spec.kernel.gamma;
  else
    kernel["gamma"] = nullptr;  // median heuristic per training column
  j["kernel"] = kernel;
  ordered_json grid;
  if (!spec.grid.lambda1.empty()) grid["lambda1"] = spec.grid.lambda1;
  grid["num_lambda1"] = spec.grid.num_lambda1;
  grid["min_ratio"] = spec.grid.min_ratio;
  if (!spec.grid.lambda2.empty()) grid["lambda2"] = spec.grid.lambda2;
  j["grid"] = grid;
  ordered_json split;
  split["mode"] = spec.split.mode == SplitSpec::Mode::holdout ? "holdout" : "kfold";
  if (spec.split.mode == SplitSpec::Mode::holdout)
    split["train_fraction"] = spec.split.train_fraction;
  else
    split["k"] = spec.split.k;
  j["split"] = split;
  j["replicates"] = spec.replicates;
  j["base_seed"] = spec.base_seed;
  return j;
}

ordered_json report_header(const char* kind) {
  ordered_json j;
  j["format_version"] = "fresel/1";
  j["tool_version"] = FRESEL_VERSION;
  j["kind"] = kind;
  return j;
}

// CSV artifacts carry the same header as comment lines so no artifact is
// separable from the config that produced it.
std::string csv_header(const char* kind, const ExperimentSpec& spec) {
  return "# format_version: fresel/1\n# kind: " + std::string(kind) +
         "\n# config: " + spec_to_json(spec).dump() + "\n";
}

}  // namespace

double jaccard(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::vector<int> inter, uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

FrequencyReport run_experiment(const ExperimentSpec& spec) {
  FrequencyReport report;
  report.spec = spec;
  report.spec.sim = resolve_spec(spec.sim);
  report.truth = truth_set(report.spec.sim.model);
  const int R = spec.replicates;
  const int p = report.spec.sim.p;
  if (R < 1) throw std::invalid_argument("run_experiment: replicates must be >= 1");

  struct Slot {
    std::vector<int> active;
    double mse = 0.0;
    double secs = 0.0;
    bool ok = false;
    bool nonconv = false;
  };
  std::vector<Slot> slots(R);

  parallel_for(R, [&](int idx) {
    const int r = idx + 1;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      SimModelSpec sim = report.spec.sim;
      sim.seed = spec.base_seed + static_cast<std::uint64_t>(r);
      SimDataset ds = gen_model(sim);
      ReferencePolicy policy =
          default_policy(mix_seed(spec.base_seed, static_cast<std::uint64_t>(r) << 1));
      SplitSpec split = spec.split;
      split.seed = mix_seed(spec.base_seed, (static_cast<std::uint64_t>(r) << 1) | 1);
      TuneReport t = tune(ds.X, ds.responses, {spec.kernel}, policy, spec.grid, split,
                          spec.method, spec.options);
      slots[idx].active = t.final_fit.active_set;
      slots[idx].mse = t.chosen_mse;
      slots[idx].nonconv = t.any_nonconverged || !t.final_fit.converged;
      slots[idx].ok = true;
    } catch (const std::exception&) {
      slots[idx].ok = false;
    }
    slots[idx].secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  std::vector<int> counts(p, 0);
  for (int idx = 0; idx < R; ++idx) {
    const Slot& s = slots[idx];
    report.wall_seconds.push_back(s.secs);
    if (!s.ok) {
      ++report.failed;
      report.failed_replicates.push_back(idx + 1);
      report.active_sets.emplace_back();
      continue;
    }
    report.active_sets.push_back(s.active);
    report.mse.push_back(s.mse);
    if (s.nonconv) ++report.nonconverged;
    for (int j : s.active) ++counts[j];
  }
  report.frequency.resize(p);
  for (int j = 0; j < p; ++j)
    report.frequency[j] = round4(static_cast<double>(counts[j]) / R);
  if (!report.mse.empty()) {
    double mean = 0.0;
    for (double v : report.mse) mean += v;
    mean /= static_cast<double>(report.mse.size());
    report.mse_mean = mean;
    report.mse_sd = sample_sd(report.mse, mean);
  }
  return report;
}

InvarianceReport run_invariance(const ExperimentSpec& spec,
                                const std::vector<ReferencePolicy>& policies) {
  if (policies.size() < 2)
    throw std::invalid_argument("run_invariance: need at least two policies");
  InvarianceReport report;
  report.spec = spec;
  report.spec.sim = resolve_spec(spec.sim);
  const int R = spec.replicates;
  const int np = static_cast<int>(policies.size());
  for (const auto& policy : policies) report.policy_labels.push_back(policy_label(policy));

  struct Slot {
    std::vector<std::vector<int>> sets;
    bool ok = false;
    bool nonconv = false;
  };
  std::vector<Slot> slots(R);

  parallel_for(R, [&](int idx) {
    const int r = idx + 1;
    try {
      SimModelSpec sim = report.spec.sim;
      sim.seed = spec.base_seed + static_cast<std::uint64_t>(r);
      SimDataset ds = gen_model(sim);
      SplitSpec split = spec.split;
      split.seed = mix_seed(spec.base_seed, (static_cast<std::uint64_t>(r) << 1) | 1);
      Slot slot;
      for (const ReferencePolicy& policy : policies) {
        TuneReport t = tune(ds.X, ds.responses, {spec.kernel}, policy, spec.grid, split,
                            spec.method, spec.options);
        if (t.any_nonconverged || !t.final_fit.converged) slot.nonconv = true;
        slot.sets.push_back(t.final_fit.active_set);
      }
      slot.ok = true;
      slots[idx] = std::move(slot);
    } catch (const std::exception&) {
      slots[idx].ok = false;
    }
  });

  int identical = 0;
  double jac_acc = 0.0;
  int jac_count = 0;
  for (int idx = 0; idx < R; ++idx) {
    if (slots[idx].nonconv) ++report.nonconverged;
    if (!slots[idx].ok) {
      ++report.failed;
      report.sets.emplace_back();
      report.mean_jaccard.push_back(0.0);
      continue;
    }
    const auto& sets = slots[idx].sets;
    double acc = 0.0;
    int pairs = 0;
    bool same = true;
    for (int a = 0; a < np; ++a)
      for (int b = a + 1; b < np; ++b) {
        acc += jaccard(sets[a], sets[b]);
        ++pairs;
        if (sets[a] != sets[b]) same = false;
      }
    const double mean_j = pairs ? acc / pairs : 1.0;
    report.sets.push_back(sets);
    report.mean_jaccard.push_back(mean_j);
    jac_acc += mean_j;
    ++jac_count;
    if (same) ++identical;
  }
  report.identical_fraction = round4(static_cast<double>(identical) / R);
  report.overall_mean_jaccard = jac_count ? jac_acc / jac_count : 0.0;
  return report;
}

std::string report_basename(const ExperimentSpec& spec) {
  return "model" + std::to_string(spec.sim.model) + "_" + method_name(spec.method) + "_" +
         kernel_kind_name(spec.kernel.kind) + "_R" + std::to_string(spec.replicates);
}

void write_report(const FrequencyReport& report, const std::filesystem::path& path,
                  ReportFormat format) {
  const int p = static_cast<int>(report.frequency.size());
  if (format == ReportFormat::csv) {
    std::string out = csv_header("frequency_report", report.spec);
    out += "covariate,frequency,truth\n";
    for (int j = 0; j < p; ++j) {
      const bool is_truth =
          std::find(report.truth.begin(), report.truth.end(), j) != report.truth.end();
      out += cov_name(j) + "," + fmt_f4(report.frequency[j]) + "," + (is_truth ? "1" : "0") +
             "\n";
    }
    atomic_write(path, out);
    return;
  }
  ordered_json j = report_header("frequency_report");
  j["spec"] = spec_to_json(report.spec);
  ordered_json covs = ordered_json::array();
  for (int c = 0; c < p; ++c) covs.push_back(cov_name(c));
  j["covariates"] = covs;
  j["truth"] = cov_names(report.truth);
  j["frequency"] = report.frequency;
  ordered_json sets = ordered_json::array();
  for (const auto& s : report.active_sets) sets.push_back(cov_names(s));
  j["active_sets"] = sets;
  j["mse"] = report.mse;
  j["mse_mean"] = report.mse_mean;
  j["mse_sd"] = report.mse_sd;
  j["wall_seconds"] = report.wall_seconds;
  j["failed"] = report.failed;
  j["failed_replicates"] = report.failed_replicates;
  j["nonconverged"] = report.nonconverged;
  atomic_write(path, j.dump(2) + "\n");
}

void write_report(const InvarianceReport& report, const std::filesystem::path& path,
                  ReportFormat format) {
  if (format == ReportFormat::csv) {
    std::string out = csv_header("invariance_report", report.spec);
    out += "replicate,mean_jaccard,identical\n";
    for (size_t r = 0; r < report.sets.size(); ++r) {
      bool same = !report.sets[r].empty();
      for (size_t a = 1; same && a < report.sets[r].size(); ++a)
        if (report.sets[r][a] != report.sets[r][0]) same = false;
      out += std::to_string(r + 1) + "," + fmt_g6(report.mean_jaccard[r]) + "," +
             (same ? "1" : "0") + "\n";
    }
    atomic_write(path, out);
    return;
  }
  ordered_json j = report_header("invariance_report");
  j["spec"] = spec_to_json(report.spec);
  j["policies"] = report.policy_labels;
  ordered_json sets = ordered_json::array();
  for (const auto& reps : report.sets) {
    ordered_json row = ordered_json::array();
    for (const auto& s : reps) row.push_back(cov_names(s));
    sets.push_back(row);
  }
  j["sets"] = sets;
  j["mean_jaccard"] = report.mean_jaccard;
  j["identical_fraction"] = report.identical_fraction;
  j["overall_mean_jaccard"] = report.overall_mean_jaccard;
  j["failed"] = report.failed;
  j["nonconverged"] = report.nonconverged;
  atomic_write(path, j.dump(2) + "\n");
}

}  // namespace fresel
