#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "fresel/kernels.hpp"
#include "fresel/objects.hpp"
#include "fresel/simgen.hpp"

namespace fresel {

// Bad user input (malformed config, unknown keys, invalid enums): exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad data files (missing, inconsistent sizes, non-SPD matrices...): exit 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// In-memory dataset as loaded from a manifest: scalar covariates plus one
// metric response per row.
struct LoadedDataset {
  Eigen::MatrixXd X;
  std::vector<std::string> covariate_names;
  std::vector<MetricResponse> responses;
  ResponseTag tag = ResponseTag::quantile_w2;
  std::vector<KernelChoice> kernels;  // per covariate
  std::vector<int> truth;             // 0-based, empty when unknown
};

// Writes covariates.csv, responses.csv (quantile) or responses/ (spd) and
// manifest.json into dir. Deterministic bytes for identical inputs. source,
// when given, is echoed into the manifest so the dataset records how it was
// produced.
void write_dataset_files(const LoadedDataset& ds, const std::filesystem::path& dir,
                         const nlohmann::ordered_json* source = nullptr);

LoadedDataset load_dataset(const std::filesystem::path& manifest_path);

LoadedDataset dataset_from_sim(const SimDataset& sim, const KernelChoice& kernel);

struct IngestSpec {
  std::filesystem::path counts_csv;
  std::string group_column;
  std::string value_column;
  int m = 100;
  bool standardize = true;
  int noise_covariates = 0;
  std::uint64_t seed = 1;
};

struct IngestResult {
  LoadedDataset data;
  std::vector<std::string> group_keys;  // row order
  int groups_skipped = 0;
};

// Groups rows of a counts CSV by group_column, summarizes each group's
// value_column as m empirical quantiles at levels k/(m+1) (type-7 order
// statistic interpolation), and carries the remaining numeric columns as per
// group mean covariates. Optionally appends seeded standard normal noise
// covariates named X1..Xq. Groups with fewer than two values are skipped.
IngestResult ingest_dataset(const IngestSpec& spec);

// Type-7 quantile of sorted values at level t in (0,1).
double quantile_type7(const std::vector<double>& sorted_values, double t);

}  // namespace fresel
