#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fresel/simgen.hpp"
#include "fresel/tuning.hpp"

namespace fresel {

// A replicated selection experiment: R datasets from one simulation spec,
// each tuned with a fresh default reference policy and split, aggregated into
// selection frequencies.
struct ExperimentSpec {
  SimModelSpec sim;
  FitMethod method = FitMethod::rscad_l2;
  KernelChoice kernel;
  TuneGrid grid;
  SplitSpec split;
  TuneOptions options;
  int replicates = 50;
  std::uint64_t base_seed = 1;
};

struct FrequencyReport {
  ExperimentSpec spec;  // resolved echo
  std::vector<double> frequency;              // per covariate, #selected / R, 4 decimals
  std::vector<int> truth;                     // 0-based
  std::vector<std::vector<int>> active_sets;  // per replicate (empty for failed ones)
  std::vector<double> mse;                    // successful replicates, in replicate order
  double mse_mean = 0.0;
  double mse_sd = 0.0;
  std::vector<double> wall_seconds;  // per replicate
  int failed = 0;
  std::vector<int> failed_replicates;  // 1-based replicate numbers
  int nonconverged = 0;  // replicates where some inner solve hit max_iter
};

FrequencyReport run_experiment(const ExperimentSpec& spec);

// Same datasets selected under several reference policies; stability is
// measured by pairwise Jaccard overlap and the share of replicates whose
// active sets agree exactly across every policy.
struct InvarianceReport {
  ExperimentSpec spec;
  std::vector<std::string> policy_labels;
  std::vector<std::vector<std::vector<int>>> sets;  // [replicate][policy]
  std::vector<double> mean_jaccard;                 // per replicate, pairwise mean
  double identical_fraction = 0.0;                  // 4 decimals
  double overall_mean_jaccard = 0.0;
  int failed = 0;
  int nonconverged = 0;
};

InvarianceReport run_invariance(const ExperimentSpec& spec,
                                const std::vector<ReferencePolicy>& policies);

double jaccard(const std::vector<int>& a, const std::vector<int>& b);

enum class ReportFormat { json, csv };

// "model<id>_<method>_<kernel>_R<replicates>"
std::string report_basename(const ExperimentSpec& spec);

void write_report(const FrequencyReport& report, const std::filesystem::path& path,
                  ReportFormat format);
void write_report(const InvarianceReport& report, const std::filesystem::path& path,
                  ReportFormat format);

}  // namespace fresel
