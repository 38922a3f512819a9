#include "fresel/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fresel/dataset.hpp"
#include "fresel/harness.hpp"
#include "fresel/util.hpp"
#include "fresel/version.hpp"

namespace fresel::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct Common {
  fs::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool strict = false;
  fs::path out_dir = ".";
  std::string format = "json";
};

ordered_json load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    ordered_json cfg = ordered_json::parse(in);
    if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");
    return cfg;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

// Any key outside the declared schema is rejected so typos fail loudly
// instead of silently running with defaults.
void check_keys(const ordered_json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

const ordered_json* find(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

double get_num(const ordered_json& obj, const char* key, double fallback,
               const std::string& where) {
  const ordered_json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(where + "." + key + " must be a number");
  return v->get<double>();
}

int get_int(const ordered_json& obj, const char* key, int fallback, const std::string& where) {
  const ordered_json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
  return v->get<int>();
}

std::uint64_t get_seed(const ordered_json& obj, const char* key, std::uint64_t fallback,
                       const std::string& where) {
  const ordered_json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer() && !v->is_number_unsigned())
    throw ConfigError(where + "." + key + " must be an integer seed");
  return v->get<std::uint64_t>();
}

bool get_bool(const ordered_json& obj, const char* key, bool fallback, const std::string& where) {
  const ordered_json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(where + "." + key + " must be a boolean");
  return v->get<bool>();
}

std::string get_str(const ordered_json& obj, const char* key, const std::string& fallback,
                    const std::string& where) {
  const ordered_json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v->get<std::string>();
}

std::vector<double> get_num_array(const ordered_json& obj, const char* key,
                                  const std::string& where) {
  const ordered_json* v = find(obj, key);
  if (!v) return {};
  if (!v->is_array()) throw ConfigError(where + "." + key + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : *v) {
    if (!e.is_number()) throw ConfigError(where + "." + key + " must contain only numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

SimModelSpec parse_sim(const ordered_json& j, std::uint64_t default_seed) {
  check_keys(j, "sim", {"model", "n", "p", "rho", "m_grid", "d_spd", "seed", "params"});
  SimModelSpec spec;
  spec.model = get_int(j, "model", spec.model, "sim");
  spec.n = get_int(j, "n", spec.n, "sim");
  spec.p = get_int(j, "p", spec.p, "sim");
  spec.rho = get_num(j, "rho", spec.rho, "sim");
  spec.m_grid = get_int(j, "m_grid", spec.m_grid, "sim");
  spec.d_spd = get_int(j, "d_spd", spec.d_spd, "sim");
  spec.seed = get_seed(j, "seed", default_seed, "sim");
  if (const ordered_json* params = find(j, "params")) {
    check_keys(*params, "sim.params", {"mu0", "beta", "sigma0", "gamma", "nu1", "nu2"});
    spec.mu0 = get_num(*params, "mu0", spec.mu0, "sim.params");
    spec.beta = get_num(*params, "beta", spec.beta, "sim.params");
    spec.sigma0 = get_num(*params, "sigma0", spec.sigma0, "sim.params");
    spec.gamma = get_num(*params, "gamma", spec.gamma, "sim.params");
    spec.nu1 = get_num(*params, "nu1", spec.nu1, "sim.params");
    spec.nu2 = get_num(*params, "nu2", spec.nu2, "sim.params");
  }
  try {
    return resolve_spec(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sim: ") + e.what());
  }
}

KernelChoice parse_kernel(const ordered_json& j) {
  check_keys(j, "kernel", {"kind", "gamma"});
  KernelChoice k;
  const std::string kind = get_str(j, "kind", "gaussian", "kernel");
  try {
    k.kind = kernel_kind_from_name(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("kernel: ") + e.what());
  }
  k.gamma = get_num(j, "gamma", 0.0, "kernel");
  if (k.gamma < 0) throw ConfigError("kernel.gamma must be positive (or null for auto)");
  return k;
}

ReferencePolicy parse_policy(const ordered_json& j, std::uint64_t default_seed) {
  check_keys(j, "reference", {"y0", "y", "seed", "index", "scale"});
  ReferencePolicy policy = default_policy(default_seed);
  const std::string y0 = get_str(j, "y0", "frechet_mean", "reference");
  if (y0 != "frechet_mean")
    throw ConfigError("reference.y0 must be \"frechet_mean\" (explicit objects are API only)");
  const std::string y = get_str(j, "y", "random_sample", "reference");
  if (y == "random_sample") {
    policy.y_rule = ReferencePolicy::YRule::random_sample;
  } else if (y == "sample_index") {
    policy.y_rule = ReferencePolicy::YRule::sample_index;
    policy.sample_index = get_int(j, "index", 0, "reference");
    if (policy.sample_index < 0) throw ConfigError("reference.index must be nonnegative");
  } else if (y == "perturbed_mean") {
    policy.y_rule = ReferencePolicy::YRule::perturbed_mean;
    policy.perturb_scale = get_num(j, "scale", 0.5, "reference");
  } else {
    throw ConfigError("reference.y must be random_sample, sample_index or perturbed_mean");
  }
  policy.seed = get_seed(j, "seed", default_seed, "reference");
  return policy;
}

TuneGrid parse_grid(const ordered_json& j) {
  check_keys(j, "grid", {"lambda1", "num_lambda1", "min_ratio", "lambda2"});
  TuneGrid grid;
  grid.lambda1 = get_num_array(j, "lambda1", "grid");
  grid.num_lambda1 = get_int(j, "num_lambda1", grid.num_lambda1, "grid");
  grid.min_ratio = get_num(j, "min_ratio", grid.min_ratio, "grid");
  grid.lambda2 = get_num_array(j, "lambda2", "grid");
  if (grid.num_lambda1 < 1) throw ConfigError("grid.num_lambda1 must be at least 1");
  if (grid.min_ratio <= 0 || grid.min_ratio > 1)
    throw ConfigError("grid.min_ratio must be in (0, 1]");
  for (double v : grid.lambda1)
    if (v < 0) throw ConfigError("grid.lambda1 entries must be nonnegative");
  for (double v : grid.lambda2)
    if (v < 0) throw ConfigError("grid.lambda2 entries must be nonnegative");
  return grid;
}

SplitSpec parse_split(const ordered_json& j, std::uint64_t default_seed) {
  check_keys(j, "split", {"mode", "train_fraction", "k", "seed"});
  SplitSpec split;
  const std::string mode = get_str(j, "mode", "holdout", "split");
  if (mode == "holdout")
    split.mode = SplitSpec::Mode::holdout;
  else if (mode == "kfold")
    split.mode = SplitSpec::Mode::kfold;
  else
    throw ConfigError("split.mode must be holdout or kfold");
  split.train_fraction = get_num(j, "train_fraction", split.train_fraction, "split");
  split.k = get_int(j, "k", split.k, "split");
  split.seed = get_seed(j, "seed", default_seed, "split");
  if (split.mode == SplitSpec::Mode::holdout &&
      (split.train_fraction <= 0 || split.train_fraction >= 1))
    throw ConfigError("split.train_fraction must be in (0, 1)");
  if (split.mode == SplitSpec::Mode::kfold && split.k < 2)
    throw ConfigError("split.k must be at least 2");
  return split;
}

TuneOptions parse_options(const ordered_json& j) {
  check_keys(j, "options",
             {"max_iter", "tol_primal", "tol_dual", "rho", "over_relax", "adaptive_rho",
              "active_tol", "lla_max_outer", "scad_a", "penalty"});
  TuneOptions opt;
  opt.inner.max_iter = get_int(j, "max_iter", opt.inner.max_iter, "options");
  opt.inner.tol_primal = get_num(j, "tol_primal", opt.inner.tol_primal, "options");
  opt.inner.tol_dual = get_num(j, "tol_dual", opt.inner.tol_dual, "options");
  opt.inner.rho = get_num(j, "rho", opt.inner.rho, "options");
  opt.inner.over_relax = get_num(j, "over_relax", opt.inner.over_relax, "options");
  opt.inner.adaptive_rho = get_bool(j, "adaptive_rho", opt.inner.adaptive_rho, "options");
  opt.inner.active_tol = get_num(j, "active_tol", opt.inner.active_tol, "options");
  opt.lla_max_outer = get_int(j, "lla_max_outer", opt.lla_max_outer, "options");
  opt.scad_a = get_num(j, "scad_a", opt.scad_a, "options");
  const std::string pen = get_str(j, "penalty", "scad", "options");
  if (pen == "scad")
    opt.folded_kind = FoldedPenalty::Kind::scad;
  else if (pen == "mcp")
    opt.folded_kind = FoldedPenalty::Kind::mcp;
  else
    throw ConfigError("options.penalty must be scad or mcp");
  if (opt.inner.max_iter < 1) throw ConfigError("options.max_iter must be at least 1");
  if (opt.lla_max_outer < 1) throw ConfigError("options.lla_max_outer must be at least 1");
  return opt;
}

FitMethod parse_method(const std::string& name) {
  try {
    return method_from_name(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

// The artifact echo: the config as parsed plus the command line overrides
// actually in effect.
ordered_json config_echo(const Common& c, const ordered_json& cfg, std::uint64_t master) {
  ordered_json echo;
  echo["file"] = cfg;
  ordered_json flags;
  flags["seed"] = master;
  flags["threads"] = effective_threads();
  flags["strict"] = c.strict;
  flags["out_dir"] = c.out_dir.string();
  flags["format"] = c.format;
  echo["effective"] = flags;
  return echo;
}

ordered_json artifact_header(const char* kind, const Common& c, const ordered_json& cfg,
                             std::uint64_t master) {
  ordered_json j;
  j["format_version"] = "fresel/1";
  j["tool_version"] = FRESEL_VERSION;
  j["kind"] = kind;
  j["config"] = config_echo(c, cfg, master);
  return j;
}

std::uint64_t master_seed(const Common& c, const ordered_json& cfg) {
  if (c.seed) return *c.seed;
  return get_seed(cfg, "seed", 1, "config");
}

void apply_threads(const Common& c, const ordered_json& cfg) {
  if (c.threads)
    set_threads(*c.threads);
  else if (const ordered_json* t = find(cfg, "threads"))
    set_threads(get_int(cfg, "threads", 0, "config"));
}

// Keys every command accepts at the top level (mirrors the flags so configs
// can be self-contained).
constexpr std::initializer_list<const char*> kCommonKeys = {"seed", "threads"};

void append_keys(std::vector<const char*>& keys, std::initializer_list<const char*> extra) {
  keys.insert(keys.end(), extra.begin(), extra.end());
}

void check_top(const ordered_json& cfg, std::initializer_list<const char*> extra) {
  std::vector<const char*> keys(kCommonKeys);
  append_keys(keys, extra);
  if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError("unknown key '" + it.key() + "' in config");
  }
}

struct FullFit {
  GramStack grams;
  std::unique_ptr<StackedDesign> design;
  ResolvedReference ref;
  Eigen::VectorXd u;
  double u_mean = 0.0;
  double lmax = 0.0;
  std::vector<double> gammas;  // resolved per covariate
};

FullFit prepare_full(const LoadedDataset& ds, const ReferencePolicy& policy) {
  FullFit out;
  const int n = static_cast<int>(ds.X.rows());
  const int p = static_cast<int>(ds.X.cols());
  out.grams.n = n;
  out.grams.blocks.reserve(p);
  for (int j = 0; j < p; ++j) {
    std::vector<CovariateValue> column = scalar_column(ds.X.col(j));
    KernelSpec spec = resolve_kernel(ds.kernels[j], column);
    out.grams.blocks.push_back(build_gram(spec, column));
    out.gammas.push_back(spec.kind == KernelKind::linear ? 0.0 : spec.gamma);
  }
  out.design = std::make_unique<StackedDesign>(out.grams);
  out.ref = resolve_reference(policy, ds.responses);
  TransformedResponse tr = transform_response(ds.responses, out.ref);
  out.u = tr.u;
  out.u_mean = tr.u_mean;
  out.lmax = lambda_max(*out.design, out.u);
  return out;
}

double trace_scale_lambda2(const GramStack& grams) {
  double trace = 0.0;
  for (const auto& block : grams.blocks) trace += block.eigvals.sum();
  const int p = grams.p();
  if (p == 0 || grams.n == 0) return 1e-3;
  return 1e-3 * (trace / grams.n) / p;
}

struct DataSource {
  LoadedDataset data;
  ordered_json summary;  // n, p, tag, source used in artifacts
};

DataSource acquire_data(const ordered_json& cfg, std::uint64_t master) {
  const ordered_json* dataset = find(cfg, "dataset");
  const ordered_json* sim = find(cfg, "sim");
  if (dataset && sim) throw ConfigError("config must give either dataset or sim, not both");
  if (!dataset && !sim) throw ConfigError("config needs a dataset path or a sim block");

  DataSource out;
  if (dataset) {
    if (!dataset->is_string()) throw ConfigError("dataset must be a manifest path string");
    out.data = load_dataset(dataset->get<std::string>());
    out.summary["source"] = "dataset";
    out.summary["manifest"] = dataset->get<std::string>();
  } else {
    SimModelSpec spec = parse_sim(*sim, master);
    SimDataset sd = gen_model(spec);
    KernelChoice kernel;
    if (const ordered_json* k = find(cfg, "kernel")) kernel = parse_kernel(*k);
    out.data = dataset_from_sim(sd, kernel);
    out.summary["source"] = "sim";
    out.summary["model"] = spec.model;
    out.summary["sim_seed"] = spec.seed;
  }
  // A kernel block next to a dataset path overrides every column.
  if (dataset) {
    if (const ordered_json* k = find(cfg, "kernel")) {
      KernelChoice kernel = parse_kernel(*k);
      out.data.kernels.assign(out.data.X.cols(), kernel);
    }
  }
  out.summary["n"] = static_cast<int>(out.data.X.rows());
  out.summary["p"] = static_cast<int>(out.data.X.cols());
  out.summary["tag"] = tag_name(out.data.tag);
  return out;
}

ordered_json kernels_json(const LoadedDataset& ds, const std::vector<double>& gammas) {
  ordered_json arr = ordered_json::array();
  for (std::size_t j = 0; j < ds.kernels.size(); ++j) {
    ordered_json k;
    k["column"] = ds.covariate_names[j];
    k["kind"] = kernel_kind_name(ds.kernels[j].kind);
    if (j < gammas.size() && gammas[j] > 0)
      k["gamma"] = gammas[j];
    else
      k["gamma"] = nullptr;
    arr.push_back(k);
  }
  return arr;
}

ordered_json reference_json(const ReferencePolicy& policy, const ResolvedReference& ref) {
  ordered_json r;
  r["y0"] = "frechet_mean";
  switch (policy.y_rule) {
    case ReferencePolicy::YRule::random_sample:
      r["y"] = "random_sample";
      r["seed"] = policy.seed;
      break;
    case ReferencePolicy::YRule::sample_index:
      r["y"] = "sample_index";
      r["index"] = policy.sample_index;
      break;
    case ReferencePolicy::YRule::perturbed_mean:
      r["y"] = "perturbed_mean";
      r["scale"] = policy.perturb_scale;
      r["seed"] = policy.seed;
      break;
    case ReferencePolicy::YRule::explicit_object:
      r["y"] = "explicit";
      break;
  }
  r["y_index"] = ref.y_index;
  return r;
}

ordered_json fit_json(const FitResult& fit, const std::vector<std::string>& names,
                      FitMethod method, double lambda1, double lambda2) {
  ordered_json f;
  f["method"] = method_name(method);
  f["lambda1"] = lambda1;
  f["lambda2"] = lambda2;
  f["objective"] = fit.objective;
  f["iterations"] = fit.iterations;
  f["converged"] = fit.converged;
  ordered_json norms;
  for (std::size_t j = 0; j < names.size(); ++j) norms[names[j]] = fit.norms[j];
  f["norms"] = norms;
  ordered_json active = ordered_json::array();
  for (int j : fit.active_set) active.push_back(names[j]);
  f["active_set"] = active;
  ordered_json kkt;
  kkt["tol"] = fit.kkt.tol;
  kkt["pass"] = fit.kkt.pass;
  ordered_json groups = ordered_json::array();
  for (std::size_t j = 0; j < fit.kkt.groups.size(); ++j) {
    ordered_json g;
    g["covariate"] = names[j];
    g["active"] = fit.kkt.groups[j].active;
    g["residual"] = fit.kkt.groups[j].residual;
    g["pass"] = fit.kkt.groups[j].pass;
    groups.push_back(g);
  }
  kkt["groups"] = groups;
  f["kkt"] = kkt;
  return f;
}

FitResult run_method_fit(const StackedDesign& design, const Eigen::VectorXd& u, FitMethod method,
                         double lambda1, double lambda2, const TuneOptions& opt,
                         double init_lambda1, const ADMMState* warm) {
  if (method == FitMethod::elastic_net || lambda1 <= 0) {
    PenaltyParams pen{lambda1, lambda2, Eigen::VectorXd()};
    return admm_solve(design, u, pen, opt.inner, warm);
  }
  FoldedPenalty pen{opt.folded_kind, lambda1, opt.scad_a};
  LLAConfig config;
  config.max_outer = opt.lla_max_outer;
  config.inner = opt.inner;
  if (method == FitMethod::escad_l2) {
    config.init = LLAConfig::Init::elastic_net;
    config.init_lambda1 = init_lambda1 > 0 ? init_lambda1 : lambda1;
  }
  return lla_fit(design, u, pen, lambda2, config, nullptr, warm).fit;
}

int cmd_simulate(const Common& c, const ordered_json& cfg) {
  check_top(cfg, {"sim", "kernel"});
  const std::uint64_t master = master_seed(c, cfg);
  apply_threads(c, cfg);
  const ordered_json* sim = find(cfg, "sim");
  if (!sim) throw ConfigError("simulate needs a sim block");
  SimModelSpec spec = parse_sim(*sim, master);
  KernelChoice kernel;
  if (const ordered_json* k = find(cfg, "kernel")) kernel = parse_kernel(*k);
  SimDataset ds = gen_model(spec);
  LoadedDataset data = dataset_from_sim(ds, kernel);

  ordered_json source;
  source["command"] = "simulate";
  source["tool_version"] = FRESEL_VERSION;
  source["config"] = config_echo(c, cfg, master);
  ordered_json resolved;
  resolved["model"] = spec.model;
  resolved["n"] = spec.n;
  resolved["p"] = spec.p;
  resolved["rho"] = spec.rho;
  if (model_tag(spec.model) == ResponseTag::quantile_w2)
    resolved["m_grid"] = spec.m_grid;
  else
    resolved["d_spd"] = spec.d_spd;
  resolved["seed"] = spec.seed;
  resolved["params"] = {{"mu0", spec.mu0},     {"beta", spec.beta}, {"sigma0", spec.sigma0},
                        {"gamma", spec.gamma}, {"nu1", spec.nu1},   {"nu2", spec.nu2}};
  source["sim"] = resolved;
  write_dataset_files(data, c.out_dir, &source);
  std::cout << "wrote " << (c.out_dir / "manifest.json").string() << " (n=" << data.X.rows()
            << ", p=" << data.X.cols() << ", " << tag_name(data.tag) << ")\n";
  return 0;
}

int cmd_ingest(const Common& c, const ordered_json& cfg) {
  check_top(cfg, {"ingest"});
  const std::uint64_t master = master_seed(c, cfg);
  apply_threads(c, cfg);
  const ordered_json* ing = find(cfg, "ingest");
  if (!ing) throw ConfigError("ingest needs an ingest block");
  check_keys(*ing, "ingest",
             {"counts", "group_column", "value_column", "m", "standardize",
              "noise_covariates", "seed"});
  IngestSpec spec;
  const ordered_json* counts = find(*ing, "counts");
  if (!counts || !counts->is_string())
    throw ConfigError("ingest.counts must be a CSV path string");
  spec.counts_csv = counts->get<std::string>();
  spec.group_column = get_str(*ing, "group_column", "", "ingest");
  spec.value_column = get_str(*ing, "value_column", "", "ingest");
  if (spec.group_column.empty() || spec.value_column.empty())
    throw ConfigError("ingest needs group_column and value_column");
  spec.m = get_int(*ing, "m", spec.m, "ingest");
  spec.standardize = get_bool(*ing, "standardize", spec.standardize, "ingest");
  spec.noise_covariates = get_int(*ing, "noise_covariates", 0, "ingest");
  spec.seed = get_seed(*ing, "seed", master, "ingest");

  IngestResult result = ingest_dataset(spec);
  ordered_json source;
  source["command"] = "ingest";
  source["tool_version"] = FRESEL_VERSION;
  source["config"] = config_echo(c, cfg, master);
  source["groups_kept"] = static_cast<int>(result.group_keys.size());
  source["groups_skipped"] = result.groups_skipped;
  source["group_keys"] = result.group_keys;
  write_dataset_files(result.data, c.out_dir, &source);
  std::cout << "wrote " << (c.out_dir / "manifest.json").string() << " (" << result.group_keys.size()
            << " groups kept, " << result.groups_skipped << " skipped)\n";
  return 0;
}

int cmd_fit(const Common& c, const ordered_json& cfg) {
  check_top(cfg, {"dataset", "sim", "kernel", "reference", "fit", "grid", "options"});
  const std::uint64_t master = master_seed(c, cfg);
  apply_threads(c, cfg);
  DataSource src = acquire_data(cfg, master);

  ReferencePolicy policy = default_policy(mix_seed(master, 1));
  if (const ordered_json* r = find(cfg, "reference"))
    policy = parse_policy(*r, mix_seed(master, 1));
  TuneOptions opt;
  if (const ordered_json* o = find(cfg, "options")) opt = parse_options(*o);

  const ordered_json* fj = find(cfg, "fit");
  if (!fj) throw ConfigError("fit needs a fit block with lambda1 (or lambda1_rel)");
  check_keys(*fj, "fit", {"method", "lambda1", "lambda1_rel", "lambda2", "init_lambda1"});
  const FitMethod method = parse_method(get_str(*fj, "method", "elastic_net", "fit"));

  FullFit full = prepare_full(src.data, policy);

  const ordered_json* l1_abs = find(*fj, "lambda1");
  const ordered_json* l1_rel = find(*fj, "lambda1_rel");
  if (l1_abs && l1_rel) throw ConfigError("fit: give lambda1 or lambda1_rel, not both");
  if (!l1_abs && !l1_rel) throw ConfigError("fit: lambda1 (or lambda1_rel) is required");
  double lambda1 = l1_abs ? get_num(*fj, "lambda1", 0.0, "fit")
                          : get_num(*fj, "lambda1_rel", 0.0, "fit") * full.lmax;
  if (lambda1 < 0) throw ConfigError("fit: lambda1 must be nonnegative");
  double lambda2 = get_num(*fj, "lambda2", trace_scale_lambda2(full.grams), "fit");
  if (lambda2 < 0) throw ConfigError("fit: lambda2 must be nonnegative");
  const double init_lambda1 = get_num(*fj, "init_lambda1", 0.0, "fit");

  FitResult fit =
      run_method_fit(*full.design, full.u, method, lambda1, lambda2, opt, init_lambda1, nullptr);

  ordered_json out = artifact_header("fit_result", c, cfg, master);
  out["data"] = src.summary;
  out["covariates"] = src.data.covariate_names;
  out["kernels"] = kernels_json(src.data, full.gammas);
  out["reference"] = reference_json(policy, full.ref);
  out["u_mean"] = full.u_mean;
  out["lambda_max"] = full.lmax;
  out["fit"] = fit_json(fit, src.data.covariate_names, method, lambda1, lambda2);

  bool any_nonconverged = !fit.converged;

  // Optional regularization path: lambda1 swept decreasing at fixed lambda2,
  // warm-started, one CSV row of block norms per grid point.
  if (const ordered_json* gj = find(cfg, "grid")) {
    TuneGrid grid = parse_grid(*gj);
    std::vector<double> l1s = grid.lambda1;
    if (l1s.empty()) {
      const int num = grid.num_lambda1;
      for (int i = 0; i < num; ++i)
        l1s.push_back(num == 1 ? full.lmax
                               : full.lmax * std::pow(grid.min_ratio,
                                                      static_cast<double>(i) / (num - 1)));
    }
    std::sort(l1s.begin(), l1s.end(), std::greater<double>());
    const double path_l2 = grid.lambda2.empty() ? lambda2 : grid.lambda2.front();

    std::string csv = "# format_version: fresel/1\n# kind: fit_path\n# config: " +
                      config_echo(c, cfg, master).dump() + "\n";
    csv += "lambda1,lambda2,objective,active_size,converged";
    for (const auto& name : src.data.covariate_names) csv += ",norm_" + name;
    csv += "\n";
    ADMMState path_state;
    const ADMMState* warm = nullptr;
    for (double l1 : l1s) {
      FitResult step =
          run_method_fit(*full.design, full.u, method, l1, path_l2, opt, init_lambda1, warm);
      path_state = step.state;
      warm = &path_state;
      if (!step.converged) any_nonconverged = true;
      csv += fmt_g6(l1) + "," + fmt_g6(path_l2) + "," + fmt_g6(step.objective) + "," +
             std::to_string(step.active_set.size()) + "," + (step.converged ? "1" : "0");
      for (int j = 0; j < step.norms.size(); ++j) csv += "," + fmt_g6(step.norms[j]);
      csv += "\n";
    }
    fs::create_directories(c.out_dir);
    atomic_write(c.out_dir / "fit_path.csv", csv);
    out["path_csv"] = "fit_path.csv";
  }

  fs::create_directories(c.out_dir);
  atomic_write(c.out_dir / "fit.json", out.dump(2) + "\n");
  std::cout << "wrote " << (c.out_dir / "fit.json").string() << " (active "
            << fit.active_set.size() << "/" << src.data.covariate_names.size()
            << ", kkt " << (fit.kkt.pass ? "pass" : "fail") << ")\n";
  if (c.strict && any_nonconverged) {
    std::cerr << "error: solver did not converge within max_iter\n";
    return 4;
  }
  return 0;
}

int cmd_tune(const Common& c, const ordered_json& cfg) {
  check_top(cfg, {"dataset", "sim", "kernel", "reference", "method", "grid", "split", "options"});
  const std::uint64_t master = master_seed(c, cfg);
  apply_threads(c, cfg);
  DataSource src = acquire_data(cfg, master);

  ReferencePolicy policy = default_policy(mix_seed(master, 1));
  if (const ordered_json* r = find(cfg, "reference"))
    policy = parse_policy(*r, mix_seed(master, 1));
  const ordered_json* mj = find(cfg, "method");
  if (!mj || !mj->is_string()) throw ConfigError("tune needs a method string");
  const FitMethod method = parse_method(mj->get<std::string>());
  TuneGrid grid;
  if (const ordered_json* g = find(cfg, "grid")) grid = parse_grid(*g);
  SplitSpec split;
  split.seed = mix_seed(master, 2);
  if (const ordered_json* s = find(cfg, "split")) split = parse_split(*s, mix_seed(master, 2));
  TuneOptions opt;
  if (const ordered_json* o = find(cfg, "options")) opt = parse_options(*o);

  TuneReport report =
      tune(src.data.X, src.data.responses, src.data.kernels, policy, grid, split, method, opt);

  ordered_json out = artifact_header("tune_report", c, cfg, master);
  out["data"] = src.summary;
  out["covariates"] = src.data.covariate_names;
  out["grid"] = {{"lambda1", report.grid_lambda1}, {"lambda2", report.grid_lambda2}};
  ordered_json entries = ordered_json::array();
  for (const TuneEntry& e : report.entries) {
    ordered_json row;
    row["lambda1"] = e.lambda1;
    row["lambda2"] = e.lambda2;
    row["mse"] = e.mse;
    row["active_size"] = e.active_size;
    entries.push_back(row);
  }
  out["entries"] = entries;
  out["chosen"] = {{"lambda1", report.chosen_lambda1},
                   {"lambda2", report.chosen_lambda2},
                   {"mse", report.chosen_mse}};
  if (method == FitMethod::escad_l2)
    out["baseline"] = {{"lambda1", report.baseline_lambda1},
                       {"lambda2", report.baseline_lambda2}};
  out["any_nonconverged"] = report.any_nonconverged;
  out["fit"] = fit_json(report.final_fit, src.data.covariate_names, method,
                        report.chosen_lambda1, report.chosen_lambda2);

  fs::create_directories(c.out_dir);
  atomic_write(c.out_dir / "tune.json", out.dump(2) + "\n");
  if (c.format == "csv") {
    std::string csv = "# format_version: fresel/1\n# kind: tune_entries\n# config: " +
                      config_echo(c, cfg, master).dump() + "\n";
    csv += "lambda1,lambda2,mse,active_size\n";
    for (const TuneEntry& e : report.entries)
      csv += fmt_g6(e.lambda1) + "," + fmt_g6(e.lambda2) + "," + fmt_g6(e.mse) + "," +
             fmt_g6(e.active_size) + "\n";
    atomic_write(c.out_dir / "tune_entries.csv", csv);
  }
  std::cout << "wrote " << (c.out_dir / "tune.json").string() << " (lambda1 "
            << fmt_g6(report.chosen_lambda1) << ", lambda2 " << fmt_g6(report.chosen_lambda2)
            << ", active " << report.final_fit.active_set.size() << ")\n";
  if (c.strict && (report.any_nonconverged || !report.final_fit.converged)) {
    std::cerr << "error: some inner solve did not converge within max_iter\n";
    return 4;
  }
  return 0;
}

ExperimentSpec parse_experiment(const ordered_json& cfg, std::uint64_t master) {
  const ordered_json* ej = find(cfg, "experiment");
  if (!ej) throw ConfigError("config needs an experiment block");
  check_keys(*ej, "experiment",
             {"sim", "method", "kernel", "grid", "split", "options", "replicates", "base_seed"});
  ExperimentSpec spec;
  const ordered_json* sim = find(*ej, "sim");
  if (!sim) throw ConfigError("experiment needs a sim block");
  spec.sim = parse_sim(*sim, 1);  // per-replicate seeds come from base_seed
  const ordered_json* mj = find(*ej, "method");
  if (!mj || !mj->is_string()) throw ConfigError("experiment needs a method string");
  spec.method = parse_method(mj->get<std::string>());
  if (const ordered_json* k = find(*ej, "kernel")) spec.kernel = parse_kernel(*k);
  if (const ordered_json* g = find(*ej, "grid")) spec.grid = parse_grid(*g);
  if (const ordered_json* s = find(*ej, "split")) spec.split = parse_split(*s, 1);
  if (const ordered_json* o = find(*ej, "options")) spec.options = parse_options(*o);
  spec.replicates = get_int(*ej, "replicates", spec.replicates, "experiment");
  spec.base_seed = get_seed(*ej, "base_seed", master, "experiment");
  if (spec.replicates < 1) throw ConfigError("experiment.replicates must be at least 1");
  return spec;
}

int cmd_bench(const Common& c, const ordered_json& cfg) {
  check_top(cfg, {"experiment"});
  const std::uint64_t master = master_seed(c, cfg);
  apply_threads(c, cfg);
  ExperimentSpec spec = parse_experiment(cfg, master);

  FrequencyReport report = run_experiment(spec);
  const ReportFormat format = c.format == "csv" ? ReportFormat::csv : ReportFormat::json;
  const fs::path path =
      c.out_dir / (report_basename(spec) + (format == ReportFormat::csv ? ".csv" : ".json"));
  fs::create_directories(c.out_dir);
  write_report(report, path, format);
  std::cout << "wrote " << path.string() << " (mse " << fmt_g6(report.mse_mean) << " +- "
            << fmt_g6(report.mse_sd) << ", failed " << report.failed << "/" << spec.replicates
            << ")\n";
  if (report.failed > 0) {
    std::cerr << "error: " << report.failed << " replicate(s) failed\n";
    return 3;
  }
  if (c.strict && report.nonconverged > 0) {
    std::cerr << "error: " << report.nonconverged << " replicate(s) hit max_iter\n";
    return 4;
  }
  return 0;
}

int cmd_invariance(const Common& c, const ordered_json& cfg) {
  check_top(cfg, {"experiment", "policies"});
  const std::uint64_t master = master_seed(c, cfg);
  apply_threads(c, cfg);
  ExperimentSpec spec = parse_experiment(cfg, master);
  const ordered_json* pj = find(cfg, "policies");
  if (!pj || !pj->is_array() || pj->size() < 2)
    throw ConfigError("invariance needs a policies array with at least two entries");
  std::vector<ReferencePolicy> policies;
  for (std::size_t i = 0; i < pj->size(); ++i)
    policies.push_back(parse_policy((*pj)[i], mix_seed(master, 100 + i)));

  InvarianceReport report = run_invariance(spec, policies);
  const ReportFormat format = c.format == "csv" ? ReportFormat::csv : ReportFormat::json;
  const fs::path path = c.out_dir / (report_basename(spec) + "_invariance" +
                                     (format == ReportFormat::csv ? ".csv" : ".json"));
  fs::create_directories(c.out_dir);
  write_report(report, path, format);
  std::cout << "wrote " << path.string() << " (identical " << fmt_f4(report.identical_fraction)
            << ", mean jaccard " << fmt_g6(report.overall_mean_jaccard) << ")\n";
  if (report.failed > 0) {
    std::cerr << "error: " << report.failed << " replicate(s) failed\n";
    return 3;
  }
  if (c.strict && report.nonconverged > 0) {
    std::cerr << "error: " << report.nonconverged << " replicate(s) hit max_iter\n";
    return 4;
  }
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Additive kernel regression with sparse selection for metric space responses"};
  app.set_version_flag("--version", FRESEL_VERSION);
  app.require_subcommand(1);

  Common common;
  std::string command;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "master seed, overrides the config");
    sub->add_option("--threads", common.threads, "worker threads (FRESEL_THREADS as fallback)");
    sub->add_flag("--strict", common.strict, "exit 4 when any solve hits max_iter");
    sub->add_option("--out-dir", common.out_dir, "artifact directory (default .)");
    sub->add_option("--format", common.format, "report format")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->callback([&, sub] { command = sub->get_name(); });
  };

  add_common(app.add_subcommand("simulate", "generate a synthetic dataset to files"));
  add_common(app.add_subcommand("ingest", "summarize a counts CSV into quantile responses"));
  add_common(app.add_subcommand("fit", "single penalized fit, optional lambda1 path"));
  add_common(app.add_subcommand("tune", "grid search with validation and final refit"));
  add_common(app.add_subcommand("bench", "replicated selection frequency experiment"));
  add_common(app.add_subcommand("invariance", "selection stability across reference draws"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const ordered_json cfg = load_config(common.config_path);
    if (command == "simulate") return cmd_simulate(common, cfg);
    if (command == "ingest") return cmd_ingest(common, cfg);
    if (command == "fit") return cmd_fit(common, cfg);
    if (command == "tune") return cmd_tune(common, cfg);
    if (command == "bench") return cmd_bench(common, cfg);
    if (command == "invariance") return cmd_invariance(common, cfg);
    std::cerr << "error: unknown command\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace fresel::cli
