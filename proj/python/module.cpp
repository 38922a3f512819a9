#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fresel/harness.hpp"
#include "fresel/rng.hpp"
#include "fresel/util.hpp"
#include "fresel/version.hpp"

namespace py = pybind11;
using namespace fresel;

namespace {

ResponseTag tag_from_name(const std::string& tag) {
  if (tag == "quantile_w2") return ResponseTag::quantile_w2;
  if (tag == "spd_cholesky") return ResponseTag::spd_cholesky;
  throw py::value_error("tag must be quantile_w2 or spd_cholesky");
}

std::vector<MetricResponse> to_responses(const py::iterable& items, ResponseTag tag) {
  std::vector<MetricResponse> out;
  for (py::handle h : items) {
    if (tag == ResponseTag::quantile_w2)
      out.emplace_back(QuantileObject(h.cast<Eigen::VectorXd>()));
    else
      out.emplace_back(SPDObject(h.cast<Eigen::MatrixXd>()));
  }
  if (out.empty()) throw py::value_error("responses must be nonempty");
  return out;
}

py::object response_to_py(const MetricResponse& y) {
  if (std::holds_alternative<QuantileObject>(y))
    return py::cast(std::get<QuantileObject>(y).values);
  return py::cast(std::get<SPDObject>(y).mat());
}

KernelChoice make_kernel(const std::string& kind, double gamma) {
  KernelChoice k;
  k.kind = kernel_kind_from_name(kind);
  k.gamma = gamma;
  return k;
}

struct Pipeline {
  GramStack grams;
  std::unique_ptr<StackedDesign> design;
  Eigen::VectorXd u;
  double u_mean = 0.0;
  int y_index = -1;
  double lmax = 0.0;
};

Pipeline build_pipeline(const Eigen::MatrixXd& X, const std::vector<MetricResponse>& ys,
                        const KernelChoice& kernel, std::uint64_t ref_seed) {
  if (static_cast<int>(ys.size()) != X.rows())
    throw py::value_error("X rows and responses length differ");
  Pipeline pl;
  pl.grams.n = static_cast<int>(X.rows());
  for (int j = 0; j < X.cols(); ++j) {
    std::vector<CovariateValue> column = scalar_column(X.col(j));
    pl.grams.blocks.push_back(build_gram(resolve_kernel(kernel, column), column));
  }
  pl.design = std::make_unique<StackedDesign>(pl.grams);
  ResolvedReference ref = resolve_reference(default_policy(ref_seed), ys);
  pl.y_index = ref.y_index;
  TransformedResponse tr = transform_response(ys, ref);
  pl.u = tr.u;
  pl.u_mean = tr.u_mean;
  pl.lmax = lambda_max(*pl.design, pl.u);
  return pl;
}

py::dict simulate(int model, int n, int p, double rho, int m_grid, int d_spd,
                  std::uint64_t seed) {
  SimModelSpec spec;
  spec.model = model;
  spec.n = n;
  spec.p = p;
  spec.rho = rho;
  spec.m_grid = m_grid;
  spec.d_spd = d_spd;
  spec.seed = seed;
  SimDataset ds = gen_model(spec);
  py::list responses;
  for (const auto& y : ds.responses) responses.append(response_to_py(y));
  py::dict out;
  out["X"] = ds.X;
  out["responses"] = responses;
  out["truth"] = ds.truth;
  out["tag"] = tag_name(model_tag(ds.spec.model));
  return out;
}

double trace_scale_lambda2(const GramStack& grams) {
  double trace = 0.0;
  for (const auto& block : grams.blocks) trace += block.eigvals.sum();
  const int p = grams.p();
  if (p == 0 || grams.n == 0) return 1e-3;
  return 1e-3 * (trace / grams.n) / p;
}

py::dict fit(const Eigen::MatrixXd& X, const py::iterable& responses, const std::string& tag,
             double lambda1, double lambda2, const std::string& method,
             const std::string& kernel, double gamma, std::uint64_t ref_seed) {
  std::vector<MetricResponse> ys = to_responses(responses, tag_from_name(tag));
  Pipeline pl = build_pipeline(X, ys, make_kernel(kernel, gamma), ref_seed);
  if (lambda2 < 0) lambda2 = trace_scale_lambda2(pl.grams);
  const FitMethod fm = method_from_name(method);
  FitResult fr;
  if (fm == FitMethod::elastic_net || lambda1 <= 0) {
    fr = admm_solve(*pl.design, pl.u, PenaltyParams{lambda1, lambda2, Eigen::VectorXd()});
  } else {
    FoldedPenalty pen{FoldedPenalty::Kind::scad, lambda1, 3.7};
    LLAConfig config;
    if (fm == FitMethod::escad_l2) {
      config.init = LLAConfig::Init::elastic_net;
      config.init_lambda1 = lambda1;
    }
    fr = lla_fit(*pl.design, pl.u, pen, lambda2, config).fit;
  }
  py::dict out;
  out["norms"] = fr.norms;
  out["active_set"] = fr.active_set;
  out["objective"] = fr.objective;
  out["iterations"] = fr.iterations;
  out["converged"] = fr.converged;
  out["kkt_pass"] = fr.kkt.pass;
  out["lambda_max"] = pl.lmax;
  out["u_mean"] = pl.u_mean;
  out["y_index"] = pl.y_index;
  return out;
}

py::dict tune_py(const Eigen::MatrixXd& X, const py::iterable& responses, const std::string& tag,
                 const std::string& method, const std::string& kernel, double gamma,
                 int num_lambda1, double min_ratio, const std::vector<double>& lambda2,
                 const std::string& split_mode, double train_fraction, int k,
                 std::uint64_t split_seed, std::uint64_t ref_seed) {
  std::vector<MetricResponse> ys = to_responses(responses, tag_from_name(tag));
  TuneGrid grid;
  grid.num_lambda1 = num_lambda1;
  grid.min_ratio = min_ratio;
  grid.lambda2 = lambda2;
  SplitSpec split;
  if (split_mode == "holdout")
    split.mode = SplitSpec::Mode::holdout;
  else if (split_mode == "kfold")
    split.mode = SplitSpec::Mode::kfold;
  else
    throw py::value_error("split_mode must be holdout or kfold");
  split.train_fraction = train_fraction;
  split.k = k;
  split.seed = split_seed;
  TuneReport report = tune(X, ys, {make_kernel(kernel, gamma)}, default_policy(ref_seed), grid,
                           split, method_from_name(method));
  py::dict out;
  out["chosen_lambda1"] = report.chosen_lambda1;
  out["chosen_lambda2"] = report.chosen_lambda2;
  out["chosen_mse"] = report.chosen_mse;
  out["active_set"] = report.final_fit.active_set;
  out["norms"] = report.final_fit.norms;
  out["converged"] = report.final_fit.converged;
  out["any_nonconverged"] = report.any_nonconverged;
  py::list entries;
  for (const TuneEntry& e : report.entries)
    entries.append(py::make_tuple(e.lambda1, e.lambda2, e.mse, e.active_size));
  out["entries"] = entries;
  return out;
}

double w2_sq_py(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return w2_sq(QuantileObject(a), QuantileObject(b));
}

double cholesky_dist_sq_py(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return cholesky_dist_sq(SPDObject(a), SPDObject(b));
}

py::object frechet_mean_py(const py::iterable& items, const std::string& tag) {
  std::vector<MetricResponse> ys = to_responses(items, tag_from_name(tag));
  return response_to_py(frechet_mean(ys));
}

}  // namespace

py::tuple holdout_indices(int n, double train_fraction, std::uint64_t seed) {
  SplitSpec split;
  split.mode = SplitSpec::Mode::holdout;
  split.train_fraction = train_fraction;
  split.seed = seed;
  auto sets = make_splits(split, n);
  return py::make_tuple(sets[0].first, sets[0].second);
}

std::uint64_t mix_seed_py(std::uint64_t base, std::uint64_t salt) { return mix_seed(base, salt); }

int uniform_index_py(std::uint64_t seed, int n) { return Rng(seed).uniform_index(n); }

PYBIND11_MODULE(_fresel, m) {
  m.doc() = "Additive kernel regression with sparse selection for metric space responses";
  m.attr("__version__") = FRESEL_VERSION;

  m.def("simulate", &simulate, py::arg("model") = 1, py::arg("n") = 200, py::arg("p") = 0,
        py::arg("rho") = 0.5, py::arg("m_grid") = 100, py::arg("d_spd") = 3,
        py::arg("seed") = 1,
        "Generate a synthetic dataset; returns X, responses, truth and tag.");

  m.def("fit", &fit, py::arg("X"), py::arg("responses"), py::arg("tag"), py::arg("lambda1"),
        py::arg("lambda2") = -1.0, py::arg("method") = "elastic_net", py::arg("kernel") = "gaussian",
        py::arg("gamma") = 0.0, py::arg("ref_seed") = 1,
        "Penalized additive fit at a fixed penalty pair.");

  m.def("tune", &tune_py, py::arg("X"), py::arg("responses"), py::arg("tag"), py::arg("method"),
        py::arg("kernel") = "gaussian", py::arg("gamma") = 0.0, py::arg("num_lambda1") = 50,
        py::arg("min_ratio") = 1e-3, py::arg("lambda2") = std::vector<double>(),
        py::arg("split_mode") = "holdout", py::arg("train_fraction") = 0.75, py::arg("k") = 10,
        py::arg("split_seed") = 1, py::arg("ref_seed") = 1,
        "Grid search with validation and a final refit on all rows.");

  m.def("wasserstein_sq", &w2_sq_py, py::arg("a"), py::arg("b"),
        "Squared 2-Wasserstein distance between quantile vectors on a shared grid.");
  m.def("cholesky_dist_sq", &cholesky_dist_sq_py, py::arg("a"), py::arg("b"),
        "Squared Cholesky-factor Frobenius distance between SPD matrices.");
  m.def("frechet_mean", &frechet_mean_py, py::arg("responses"), py::arg("tag"),
        "Sample Frechet mean of quantile vectors or SPD matrices.");

  m.def("holdout_indices", &holdout_indices, py::arg("n"), py::arg("train_fraction"),
        py::arg("seed"), "Seeded holdout split; returns (train, test) row indices.");
  m.def("mix_seed", &mix_seed_py, py::arg("base"), py::arg("salt"),
        "Derive a stream seed from a base seed and a salt.");
  m.def("uniform_index", &uniform_index_py, py::arg("seed"), py::arg("n"),
        "First uniform draw in [0, n) from a fresh seeded generator.");
}
