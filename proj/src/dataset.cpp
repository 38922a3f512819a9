#include "fresel/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fresel/rng.hpp"
#include "fresel/util.hpp"

namespace fresel {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Full round-trip precision for data payloads. Summary artifacts use the
// shorter fmt_g6 instead.
std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

double parse_number(const std::string& s, const std::string& where) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0'))
    throw DataError("non-numeric value '" + s + "' in " + where);
  return v;
}

std::string spd_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d.mat.txt", index + 1);
  return buf;
}

}  // namespace

double quantile_type7(const std::vector<double>& v, double t) {
  const std::size_t n = v.size();
  if (n == 0) throw std::invalid_argument("quantile of empty sample");
  if (n == 1) return v[0];
  double h = static_cast<double>(n - 1) * t;
  double fl = std::floor(h);
  std::size_t lo = static_cast<std::size_t>(fl);
  if (lo >= n - 1) return v[n - 1];
  double frac = h - fl;
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

void write_dataset_files(const LoadedDataset& ds, const fs::path& dir,
                         const ordered_json* source) {
  const int n = static_cast<int>(ds.X.rows());
  const int p = static_cast<int>(ds.X.cols());
  if (static_cast<int>(ds.responses.size()) != n)
    throw std::invalid_argument("row count mismatch between X and responses");
  fs::create_directories(dir);

  {
    std::string csv;
    for (int j = 0; j < p; ++j) {
      if (j) csv += ',';
      csv += ds.covariate_names[j];
    }
    csv += '\n';
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) {
        if (j) csv += ',';
        csv += fmt_g17(ds.X(i, j));
      }
      csv += '\n';
    }
    atomic_write(dir / "covariates.csv", csv);
  }

  std::string responses_entry;
  int m_or_d = 0;
  if (ds.tag == ResponseTag::quantile_w2) {
    responses_entry = "responses.csv";
    std::string csv;
    for (int i = 0; i < n; ++i) {
      const auto& q = std::get<QuantileObject>(ds.responses[i]);
      if (i == 0) m_or_d = static_cast<int>(q.values.size());
      for (int k = 0; k < q.values.size(); ++k) {
        if (k) csv += ',';
        csv += fmt_g17(q.values[k]);
      }
      csv += '\n';
    }
    atomic_write(dir / responses_entry, csv);
  } else {
    responses_entry = "responses";
    fs::create_directories(dir / responses_entry);
    for (int i = 0; i < n; ++i) {
      const auto& s = std::get<SPDObject>(ds.responses[i]);
      const int d = s.dim();
      if (i == 0) m_or_d = d;
      std::string txt;
      for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
          if (c) txt += ' ';
          txt += fmt_g17(s.mat()(r, c));
        }
        txt += '\n';
      }
      atomic_write(dir / responses_entry / spd_filename(i), txt);
    }
  }

  ordered_json manifest;
  manifest["format_version"] = "fresel/1";
  manifest["tag"] = tag_name(ds.tag);
  manifest["n"] = n;
  manifest["p"] = p;
  if (ds.tag == ResponseTag::quantile_w2) {
    manifest["m"] = m_or_d;
    manifest["levels"] = "k/(m+1)";
  } else {
    manifest["d"] = m_or_d;
  }
  manifest["covariates"] = "covariates.csv";
  manifest["responses"] = responses_entry;
  ordered_json kernels = ordered_json::array();
  for (int j = 0; j < p; ++j) {
    ordered_json k;
    k["column"] = ds.covariate_names[j];
    k["kind"] = kernel_kind_name(ds.kernels[j].kind);
    if (ds.kernels[j].gamma > 0)
      k["gamma"] = ds.kernels[j].gamma;
    else
      k["gamma"] = nullptr;  // median heuristic at fit time
    kernels.push_back(k);
  }
  manifest["kernels"] = kernels;
  if (!ds.truth.empty()) {
    ordered_json truth = ordered_json::array();
    for (int j : ds.truth) truth.push_back(ds.covariate_names[j]);
    manifest["truth"] = truth;
  }
  if (source) manifest["source"] = *source;
  atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedDataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open " + manifest_path.string());
  ordered_json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& e) {
    throw DataError("invalid manifest JSON: " + std::string(e.what()));
  }
  const fs::path base = manifest_path.parent_path();

  LoadedDataset ds;
  try {
    std::string tag = manifest.at("tag").get<std::string>();
    if (tag == tag_name(ResponseTag::quantile_w2))
      ds.tag = ResponseTag::quantile_w2;
    else if (tag == tag_name(ResponseTag::spd_cholesky))
      ds.tag = ResponseTag::spd_cholesky;
    else
      throw DataError("unknown response tag '" + tag + "'");

    const int n = manifest.at("n").get<int>();
    const int p = manifest.at("p").get<int>();
    if (n < 1 || p < 1) throw DataError("manifest n and p must be positive");

    auto rows = read_csv(base / manifest.at("covariates").get<std::string>());
    if (rows.empty()) throw DataError("covariates file is empty");
    ds.covariate_names = rows.front();
    if (static_cast<int>(ds.covariate_names.size()) != p)
      throw DataError("covariate header has " + std::to_string(ds.covariate_names.size()) +
                      " columns, manifest says p=" + std::to_string(p));
    if (static_cast<int>(rows.size()) - 1 != n)
      throw DataError("covariates file has " + std::to_string(rows.size() - 1) +
                      " data rows, manifest says n=" + std::to_string(n));
    ds.X.resize(n, p);
    for (int i = 0; i < n; ++i) {
      const auto& r = rows[i + 1];
      if (static_cast<int>(r.size()) != p)
        throw DataError("covariates row " + std::to_string(i + 1) + " has " +
                        std::to_string(r.size()) + " fields, expected " + std::to_string(p));
      for (int j = 0; j < p; ++j)
        ds.X(i, j) = parse_number(r[j], "covariates row " + std::to_string(i + 1));
    }

    const std::string responses_entry = manifest.at("responses").get<std::string>();
    ds.responses.reserve(n);
    if (ds.tag == ResponseTag::quantile_w2) {
      const int m = manifest.at("m").get<int>();
      if (m < 1) throw DataError("manifest m must be positive");
      auto qrows = read_csv(base / responses_entry);
      if (static_cast<int>(qrows.size()) != n)
        throw DataError("responses file has " + std::to_string(qrows.size()) +
                        " rows, manifest says n=" + std::to_string(n));
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(qrows[i].size()) != m)
          throw DataError("responses row " + std::to_string(i + 1) + " has " +
                          std::to_string(qrows[i].size()) + " values, expected m=" +
                          std::to_string(m));
        Eigen::VectorXd v(m);
        for (int k = 0; k < m; ++k)
          v[k] = parse_number(qrows[i][k], "responses row " + std::to_string(i + 1));
        try {
          ds.responses.emplace_back(QuantileObject(v));
        } catch (const std::exception& e) {
          throw DataError("responses row " + std::to_string(i + 1) + ": " + e.what());
        }
      }
    } else {
      const int d = manifest.at("d").get<int>();
      if (d < 1) throw DataError("manifest d must be positive");
      for (int i = 0; i < n; ++i) {
        const fs::path f = base / responses_entry / spd_filename(i);
        std::ifstream min(f);
        if (!min) throw DataError("cannot open " + f.string());
        Eigen::MatrixXd M(d, d);
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c)
            if (!(min >> M(r, c)))
              throw DataError("matrix " + f.string() + " is not a full " +
                              std::to_string(d) + "x" + std::to_string(d) + " grid");
        double extra;
        if (min >> extra)
          throw DataError("matrix " + f.string() + " has trailing values");
        try {
          ds.responses.emplace_back(SPDObject(M));
        } catch (const std::exception& e) {
          throw DataError("matrix " + f.string() + ": " + e.what());
        }
      }
    }

    ds.kernels.assign(p, KernelChoice{});
    if (manifest.contains("kernels")) {
      std::map<std::string, int> col_index;
      for (int j = 0; j < p; ++j) col_index[ds.covariate_names[j]] = j;
      for (const auto& k : manifest.at("kernels")) {
        const std::string col = k.at("column").get<std::string>();
        auto it = col_index.find(col);
        if (it == col_index.end())
          throw DataError("kernel assignment names unknown column '" + col + "'");
        KernelChoice kc;
        kc.kind = kernel_kind_from_name(k.at("kind").get<std::string>());
        if (k.contains("gamma") && !k.at("gamma").is_null())
          kc.gamma = k.at("gamma").get<double>();
        ds.kernels[it->second] = kc;
      }
    }

    if (manifest.contains("truth")) {
      std::map<std::string, int> col_index;
      for (int j = 0; j < p; ++j) col_index[ds.covariate_names[j]] = j;
      for (const auto& t : manifest.at("truth")) {
        auto it = col_index.find(t.get<std::string>());
        if (it == col_index.end())
          throw DataError("truth names unknown column '" + t.get<std::string>() + "'");
        ds.truth.push_back(it->second);
      }
      std::sort(ds.truth.begin(), ds.truth.end());
    }
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError("manifest " + manifest_path.string() + ": " + e.what());
  }
  return ds;
}

LoadedDataset dataset_from_sim(const SimDataset& sim, const KernelChoice& kernel) {
  LoadedDataset ds;
  ds.X = sim.X;
  ds.responses = sim.responses;
  ds.tag = model_tag(sim.spec.model);
  ds.truth = sim.truth;
  const int p = static_cast<int>(sim.X.cols());
  ds.covariate_names.reserve(p);
  for (int j = 0; j < p; ++j) ds.covariate_names.push_back("X" + std::to_string(j + 1));
  ds.kernels.assign(p, kernel);
  return ds;
}

IngestResult ingest_dataset(const IngestSpec& spec) {
  if (spec.m < 1) throw ConfigError("ingest m must be at least 1");
  if (spec.noise_covariates < 0) throw ConfigError("noise_covariates must be nonnegative");

  auto rows = read_csv(spec.counts_csv);
  if (rows.size() < 2) throw DataError("counts file has no data rows");
  const auto& header = rows.front();

  int group_col = -1, value_col = -1;
  std::vector<int> covariate_cols;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    if (header[j] == spec.group_column)
      group_col = j;
    else if (header[j] == spec.value_column)
      value_col = j;
    else
      covariate_cols.push_back(j);
  }
  if (group_col < 0) throw DataError("group column '" + spec.group_column + "' not found");
  if (value_col < 0) throw DataError("value column '" + spec.value_column + "' not found");

  // Group in first-appearance order so the output is stable under row order.
  std::vector<std::string> keys;
  std::map<std::string, int> key_index;
  struct Group {
    std::vector<double> values;
    std::vector<double> cov_sums;
  };
  std::vector<Group> groups;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != header.size())
      throw DataError("counts row " + std::to_string(i) + " has " + std::to_string(r.size()) +
                      " fields, expected " + std::to_string(header.size()));
    const std::string& key = r[group_col];
    auto [it, inserted] = key_index.try_emplace(key, static_cast<int>(groups.size()));
    if (inserted) {
      keys.push_back(key);
      groups.push_back(Group{{}, std::vector<double>(covariate_cols.size(), 0.0)});
    }
    Group& g = groups[it->second];
    g.values.push_back(parse_number(r[value_col], "counts row " + std::to_string(i)));
    for (std::size_t c = 0; c < covariate_cols.size(); ++c)
      g.cov_sums[c] += parse_number(r[covariate_cols[c]], "counts row " + std::to_string(i));
  }

  IngestResult out;
  std::vector<int> kept;
  for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
    if (groups[g].values.size() < 2) {
      std::cerr << "warning: group '" << keys[g] << "' has "
                << groups[g].values.size() << " value(s), skipped\n";
      ++out.groups_skipped;
    } else {
      kept.push_back(g);
    }
  }
  if (kept.empty()) throw DataError("no group has at least two values");

  const int n = static_cast<int>(kept.size());
  const int p_real = static_cast<int>(covariate_cols.size());
  const int p = p_real + spec.noise_covariates;

  LoadedDataset& ds = out.data;
  ds.tag = ResponseTag::quantile_w2;
  ds.X.resize(n, p);
  ds.responses.reserve(n);
  out.group_keys.reserve(n);
  for (int i = 0; i < n; ++i) {
    Group& g = groups[kept[i]];
    out.group_keys.push_back(keys[kept[i]]);
    std::sort(g.values.begin(), g.values.end());
    Eigen::VectorXd q(spec.m);
    for (int k = 0; k < spec.m; ++k)
      q[k] = quantile_type7(g.values, (k + 1.0) / (spec.m + 1.0));
    ds.responses.emplace_back(QuantileObject(q));
    const double cnt = static_cast<double>(g.values.size());
    for (int c = 0; c < p_real; ++c) ds.X(i, c) = g.cov_sums[c] / cnt;
  }

  Rng rng(spec.seed);
  for (int c = 0; c < spec.noise_covariates; ++c)
    for (int i = 0; i < n; ++i) ds.X(i, p_real + c) = rng.normal();

  if (spec.standardize) {
    for (int j = 0; j < p; ++j) {
      const double mean = ds.X.col(j).mean();
      ds.X.col(j).array() -= mean;
      const double sd = std::sqrt(ds.X.col(j).squaredNorm() / (n - 1));
      if (sd > 0) ds.X.col(j) /= sd;
    }
  }

  ds.covariate_names.reserve(p);
  for (int c = 0; c < p_real; ++c) ds.covariate_names.push_back(header[covariate_cols[c]]);
  for (int c = 0; c < spec.noise_covariates; ++c)
    ds.covariate_names.push_back("X" + std::to_string(c + 1));
  ds.kernels.assign(p, KernelChoice{});
  return out;
}

}  // namespace fresel
