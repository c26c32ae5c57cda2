#include "demexp/errors.hpp"
#include "demexp/experiments.hpp"
#include "demexp/gbart.hpp"
#include "demexp/gp_conjugate.hpp"
#include "demexp/kernels.hpp"
#include "demexp/spike_gp.hpp"
#include "demexp/summaries.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace demexp;

namespace {

py::tuple law_tuple(const GaussianLaw& law) { return py::make_tuple(law.mean, law.covariance); }

RegressionData make_data(const Matrix& x, const Vector& y) {
  RegressionData d{x, y, {}};
  d.validate();
  return d;
}

// Retained draws as column arrays; fields a sampler does not produce are NaN.
py::dict chain_dict(const McmcChain& chain) {
  const Index m = static_cast<Index>(chain.size());
  const Index p = chain.empty() ? 0 : chain.draws.front().beta.size();
  Matrix beta(m, p);
  Vector sigma(m), r_squared(m), sigma_mu_sq(m), rho(m);
  std::vector<bool> included(static_cast<std::size_t>(m)), all_empty(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    const McmcDraw& d = chain.draws[static_cast<std::size_t>(i)];
    beta.row(i) = d.beta.transpose();
    sigma(i) = d.sigma;
    r_squared(i) = d.r_squared;
    sigma_mu_sq(i) = d.sigma_mu_sq;
    rho(i) = d.rho;
    included[static_cast<std::size_t>(i)] = d.included;
    all_empty[static_cast<std::size_t>(i)] = d.all_empty;
  }
  py::dict out;
  out["beta"] = beta;
  out["sigma"] = sigma;
  out["included"] = included;
  out["all_empty"] = all_empty;
  out["r_squared"] = r_squared;
  out["sigma_mu_sq"] = sigma_mu_sq;
  out["rho"] = rho;
  out["mu_mean"] = chain.mu_mean;
  out["mu_draws"] = chain.mu_draws;
  return out;
}

py::list result_rows(const ExperimentResult& r) {
  py::list rows;
  for (const auto& row : r.rows()) {
    py::dict d;
    d["experiment"] = row.experiment;
    d["method"] = row.method;
    d["kernel"] = row.kernel;
    d["N"] = row.n;
    d["lambda0"] = row.lambda0;
    d["sigma0"] = row.sigma0;
    d["rep"] = row.rep;
    d["seed"] = row.seed;
    d["metric"] = row.metric;
    d["value"] = row.value;
    rows.append(d);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Parametric-anchored nonparametric regression";
  m.attr("__version__") = DEMEXP_VERSION;

  static py::exception<Error> base_error(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base_error.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base_error.ptr());
  py::register_exception<RankDeficientError>(m, "RankDeficientError", base_error.ptr());
  py::register_exception<FactorizationError>(m, "FactorizationError", base_error.ptr());
  py::register_exception<ParseError>(m, "ParseError", base_error.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base_error.ptr());

  py::class_<KernelSpec>(m, "Kernel")
      .def_static("linear", &KernelSpec::linear, py::arg("sigma_beta_sq"))
      .def_static("squared_exponential", &KernelSpec::squared_exponential, py::arg("rho"))
      .def_static("laplace", &KernelSpec::laplace)
      .def_static("scaled", &KernelSpec::scaled, py::arg("amplitude"), py::arg("child"))
      .def_static("sum", &KernelSpec::sum, py::arg("children"))
      .def("projected", [](const KernelSpec& k, const Matrix& x) { return project_kernel(k, x); },
           py::arg("x"), "Orthogonalized against the columns of x.")
      .def("gram", [](const KernelSpec& k, const Matrix& x) { return gram(k, x); }, py::arg("x"))
      .def("cross_gram",
           [](const KernelSpec& k, const Matrix& x, const Matrix& x_new) {
             return cross_gram(k, x, x_new);
           },
           py::arg("x"), py::arg("x_new"))
      .def("sample",
           [](const KernelSpec& k, const Matrix& x, std::uint64_t seed, Index count) {
             Rng rng(seed);
             return sample_prior(k, x, rng, count);
           },
           py::arg("x"), py::arg("seed"), py::arg("count") = 1)
      .def("__repr__", &KernelSpec::describe);

  m.def("gp_posterior",
        [](const KernelSpec& k, const Matrix& x, const Vector& y, double noise_sd, double alpha) {
          return law_tuple(posterior_at_design(GpFit{k, x, y, noise_sd, alpha}));
        },
        py::arg("kernel"), py::arg("x"), py::arg("y"), py::arg("noise_sd") = 1.0,
        py::arg("alpha") = 1.0, "Mean and covariance of mu at the design rows.");
  m.def("gp_projection",
        [](const KernelSpec& k, const Matrix& x, const Vector& y, double noise_sd, double alpha) {
          return law_tuple(posterior_projection(GpFit{k, x, y, noise_sd, alpha}));
        },
        py::arg("kernel"), py::arg("x"), py::arg("y"), py::arg("noise_sd") = 1.0,
        py::arg("alpha") = 1.0, "Mean and covariance of the least-squares projection of mu.");
  m.def("gp_predict",
        [](const KernelSpec& k, const Matrix& x, const Vector& y, const Matrix& x_new,
           double noise_sd, double alpha) {
          return law_tuple(predict(GpFit{k, x, y, noise_sd, alpha}, x_new));
        },
        py::arg("kernel"), py::arg("x"), py::arg("y"), py::arg("x_new"), py::arg("noise_sd") = 1.0,
        py::arg("alpha") = 1.0);

  py::class_<SpikeGpConfig>(m, "SpikeGpConfig")
      .def(py::init<>())
      .def_readwrite("p0", &SpikeGpConfig::p0)
      .def_readwrite("a_sigma_mu", &SpikeGpConfig::a_sigma_mu)
      .def_readwrite("b_sigma_mu", &SpikeGpConfig::b_sigma_mu)
      .def_readwrite("a_rho", &SpikeGpConfig::a_rho)
      .def_readwrite("b_rho", &SpikeGpConfig::b_rho)
      .def_readwrite("a_sigma", &SpikeGpConfig::a_sigma)
      .def_readwrite("b_sigma", &SpikeGpConfig::b_sigma)
      .def_readwrite("alpha", &SpikeGpConfig::alpha)
      .def_readwrite("iterations", &SpikeGpConfig::iterations)
      .def_readwrite("burn_in", &SpikeGpConfig::burn_in)
      .def_readwrite("proposal_sd", &SpikeGpConfig::proposal_sd)
      .def_readwrite("orthogonalize", &SpikeGpConfig::orthogonalize);

  m.def("fit_spike_gp",
        [](const Matrix& x, const Vector& y, const SpikeGpConfig& config, std::uint64_t seed) {
          const RegressionData d = make_data(x, y);
          Rng rng(seed);
          McmcChain chain;
          {
            py::gil_scoped_release release;
            chain = run_chain(d, config, rng);
          }
          py::dict out = chain_dict(chain);
          out["inclusion_probability"] = inclusion_probability(chain);
          return out;
        },
        py::arg("x"), py::arg("y"), py::arg("config") = SpikeGpConfig{}, py::arg("seed") = 1);

  py::class_<BartPrior>(m, "BartPrior")
      .def(py::init<>())
      .def_readwrite("num_trees", &BartPrior::num_trees)
      .def_readwrite("branch_a", &BartPrior::branch_a)
      .def_readwrite("branch_b", &BartPrior::branch_b)
      .def_readwrite("sigma_mu", &BartPrior::sigma_mu)
      .def_readwrite("sigma_mu_half_cauchy", &BartPrior::sigma_mu_half_cauchy)
      .def("all_empty_probability",
           [](const BartPrior& p) { return prior_all_empty_probability(p); });

  py::class_<GbartRunConfig>(m, "GbartRunConfig")
      .def(py::init<>())
      .def_readwrite("iterations", &GbartRunConfig::iterations)
      .def_readwrite("burn_in", &GbartRunConfig::burn_in)
      .def_readwrite("alpha", &GbartRunConfig::alpha)
      .def_readwrite("linear_component", &GbartRunConfig::linear_component)
      .def_readwrite("keep_mu_draws", &GbartRunConfig::keep_mu_draws)
      .def_readwrite("sigma_nu", &GbartRunConfig::sigma_nu)
      .def_readwrite("sigma_quantile", &GbartRunConfig::sigma_quantile);

  m.def("fit_gbart",
        [](const Matrix& x, const Vector& y, const BartPrior& prior, const GbartRunConfig& run,
           std::uint64_t seed) {
          const RegressionData d = make_data(x, y);
          Rng rng(seed);
          McmcChain chain;
          {
            py::gil_scoped_release release;
            chain = fit_gbart(d, prior, run, rng);
          }
          return chain_dict(chain);
        },
        py::arg("x"), py::arg("y"), py::arg("prior") = BartPrior{},
        py::arg("run") = GbartRunConfig{}, py::arg("seed") = 1);

  m.def("linear_projection",
        [](const Vector& mu, const Matrix& x) {
          const ProjectionSummary s = linear_projection(mu, x);
          return py::make_tuple(s.beta_star, s.r_squared);
        },
        py::arg("mu"), py::arg("x"), "Least-squares coefficients and R^2 of mu on x.");
  m.def("kl_projection_logistic", &kl_projection_logistic, py::arg("p"), py::arg("x"),
        py::arg("tol") = 1e-10, py::arg("max_iter") = 100, py::arg("max_norm") = 1e6);
  m.def("cart_summary",
        [](const Vector& residuals, const Matrix& x, int depth_limit, int min_leaf) {
          const CartSummary s = cart_residual_fit(residuals, x, depth_limit, min_leaf);
          py::dict out;
          out["text"] = s.tree.to_text();
          out["fitted"] = s.tree.predict(x);
          out["sse_root"] = s.sse_root;
          out["sse_fit"] = s.sse_fit;
          return out;
        },
        py::arg("residuals"), py::arg("x"), py::arg("depth_limit") = 3, py::arg("min_leaf") = 10);

  m.def("simulate_quadratic",
        [](Index n, double lambda0, double sigma0, int p, std::uint64_t seed) {
          Rng rng(seed);
          const SimulatedData s = generate(DgpSpec::quadratic(lambda0, sigma0, p), n, rng);
          return py::make_tuple(s.data.x, s.data.y, s.mu0);
        },
        py::arg("n"), py::arg("lambda0"), py::arg("sigma0") = 1.0, py::arg("p") = 5,
        py::arg("seed") = 1, "Design (with intercept), targets and true mean.");

  m.def("run_bvm_experiment",
        [](const std::vector<long>& sample_sizes, int replications,
           const std::vector<std::string>& kernels, std::uint64_t seed, int threads) {
          BvmConfig c;
          c.sample_sizes = sample_sizes;
          c.replications = replications;
          c.kernels = kernels;
          ExperimentResult r;
          {
            py::gil_scoped_release release;
            r = run_bvm_experiment(c, seed, threads);
          }
          return result_rows(r);
        },
        py::arg("sample_sizes"), py::arg("replications"),
        py::arg("kernels") = BvmConfig{}.kernels, py::arg("seed") = 1, py::arg("threads") = 1,
        "Tidy result rows as dicts.");
  m.def("run_rate_experiment",
        [](const std::vector<long>& sample_sizes, const std::vector<double>& lambda0s,
           const std::vector<double>& sigma0s, int replications, const GbartRunConfig& run,
           std::uint64_t seed, int threads) {
          RateConfig c;
          c.sample_sizes = sample_sizes;
          c.lambda0s = lambda0s;
          c.sigma0s = sigma0s;
          c.replications = replications;
          c.run = run;
          ExperimentResult r;
          {
            py::gil_scoped_release release;
            r = run_rate_experiment(c, seed, threads);
          }
          return result_rows(r);
        },
        py::arg("sample_sizes"), py::arg("lambda0s"), py::arg("sigma0s"), py::arg("replications"),
        py::arg("run") = GbartRunConfig{}, py::arg("seed") = 1, py::arg("threads") = 1,
        "Tidy result rows as dicts; methods BART, GBART and Linear.");
  m.def("split_seed", &split_seed, py::arg("master_seed"), py::arg("stream_id"),
        py::arg("counter"));
}
