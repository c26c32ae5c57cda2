#include "demexp/experiments.hpp"

#include "demexp/errors.hpp"
#include "demexp/gp_conjugate.hpp"
#include "demexp/kernels.hpp"
#include "demexp/svg.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

namespace demexp {

namespace {

constexpr double kBvmBeta = 1.55;

// Collects one task's rows and diagnostics, then merges them under a lock.
class Collector {
 public:
  void merge(ExperimentResult&& part) {
    std::lock_guard<std::mutex> lock(mutex_);
    result_.merge(std::move(part));
  }
  ExperimentResult take() { return std::move(result_); }

 private:
  std::mutex mutex_;
  ExperimentResult result_;
};

Vector least_squares_fit(const RegressionData& data) {
  return data.x * (least_squares_operator(data.x) * data.y);
}

std::string cell_label(long n, double lambda0, double sigma0) {
  return fmt::format("N={}/lambda0={}/sigma0={}", n, lambda0, sigma0);
}

}  // namespace

DgpSpec DgpSpec::quadratic(double lambda0, double sigma0, int p) {
  DgpSpec d;
  d.kind = DgpKind::Quadratic;
  d.p = p;
  d.lambda0 = lambda0;
  d.sigma0 = sigma0;
  d.intercept = true;
  return d;
}

DgpSpec DgpSpec::linear_bvm(int p) {
  DgpSpec d;
  d.kind = DgpKind::LinearBvm;
  d.p = p;
  d.sigma0 = 1.0;
  d.beta0 = Vector::Constant(p, kBvmBeta);
  d.intercept = false;
  return d;
}

void DgpSpec::validate() const {
  if (p < 1) throw InvalidArgument("dgp.p must be positive");
  if (!(sigma0 > 0.0)) throw InvalidArgument("dgp.sigma0 must be positive");
  if (kind == DgpKind::LinearBvm && beta0.size() != 0 && beta0.size() != p) {
    throw DimensionError("dgp.beta0 must have length p");
  }
}

SimulatedData generate(const DgpSpec& dgp, Index n, Rng& rng) {
  dgp.validate();
  if (n < 1) throw InvalidArgument("generate needs N >= 1");
  const Index offset = dgp.intercept ? 1 : 0;
  const Index p = dgp.p;
  const Vector beta0 = dgp.beta0.size() == p ? dgp.beta0 : Vector::Constant(p, kBvmBeta);

  SimulatedData out;
  out.data.x.resize(n, p + offset);
  out.data.y.resize(n);
  out.mu0.resize(n);
  if (dgp.intercept) out.data.names.push_back("intercept");
  for (Index j = 0; j < p; ++j) out.data.names.push_back(fmt::format("x{}", j + 1));

  const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(p));
  for (Index i = 0; i < n; ++i) {
    if (dgp.intercept) out.data.x(i, 0) = 1.0;
    double mu = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double v = standard_normal(rng);
      out.data.x(i, j + offset) = v;
      mu += dgp.kind == DgpKind::Quadratic ? inv_sqrt_p * v : beta0(j) * v;
    }
    if (dgp.kind == DgpKind::Quadratic) {
      const double x1 = out.data.x(i, offset);
      mu += dgp.lambda0 * x1 * x1;
    }
    out.mu0(i) = mu;
    out.data.y(i) = mu + dgp.sigma0 * standard_normal(rng);
  }
  return out;
}

double mse(const Vector& mu_hat, const Vector& mu0) {
  if (mu_hat.size() != mu0.size()) {
    throw DimensionError("mse: lengths " + std::to_string(mu_hat.size()) + " and " +
                         std::to_string(mu0.size()) + " differ");
  }
  if (mu0.size() == 0) throw InvalidArgument("mse of empty vectors");
  return (mu_hat - mu0).squaredNorm() / static_cast<double>(mu0.size());
}

void ExperimentResult::add(ResultRow row) {
  Key key{row.experiment, row.method, row.kernel, row.n, row.lambda0, row.sigma0, row.rep,
          row.metric};
  if (rows_.count(key) != 0) {
    throw InvalidArgument(fmt::format("duplicate result row {}/{}/{}/{}/rep={}/{}",
                                      row.experiment, row.method, row.kernel,
                                      cell_label(row.n, row.lambda0, row.sigma0), row.rep,
                                      row.metric));
  }
  rows_.emplace(std::move(key), std::move(row));
}

void ExperimentResult::merge(ExperimentResult&& other) {
  for (auto& [key, row] : other.rows_) add(std::move(row));
  for (auto& d : other.diagnostics_) add_diagnostic(std::move(d));
  other.rows_.clear();
  other.diagnostics_.clear();
}

void ExperimentResult::add_diagnostic(std::string message) {
  diagnostics_.insert(std::upper_bound(diagnostics_.begin(), diagnostics_.end(), message),
                      std::move(message));
}

std::vector<ResultRow> ExperimentResult::rows() const {
  std::vector<ResultRow> out;
  out.reserve(rows_.size());
  for (const auto& [key, row] : rows_) out.push_back(row);
  return out;
}

double ExperimentResult::mean(const std::string& metric, const std::string& method,
                              const std::string& kernel, long n, double lambda0,
                              double sigma0) const {
  double sum = 0.0;
  int count = 0;
  for (const auto& [key, row] : rows_) {
    if (row.metric != metric || row.n != n || row.lambda0 != lambda0 || row.sigma0 != sigma0) {
      continue;
    }
    if (!method.empty() && row.method != method) continue;
    if (!kernel.empty() && row.kernel != kernel) continue;
    sum += row.value;
    ++count;
  }
  return count == 0 ? std::nan("") : sum / count;
}

const char* ExperimentResult::csv_header() {
  return "experiment,method,kernel,N,lambda0,sigma0,rep,seed,metric,value";
}

void ExperimentResult::write_csv(std::ostream& os) const {
  os << csv_header() << '\n';
  for (const auto& [key, r] : rows_) {
    os << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.experiment, r.method, r.kernel, r.n,
                      r.lambda0, r.sigma0, r.rep, r.seed, r.metric, r.value);
  }
}

void run_tasks(std::size_t count, int threads, const std::function<void(std::size_t)>& task) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  if (workers == 1 || count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

ExperimentResult run_rate_experiment(const RateConfig& config, std::uint64_t master_seed,
                                     int threads) {
  for (const auto& m : config.methods) {
    if (m != "BART" && m != "GBART" && m != "Linear") {
      throw InvalidArgument("unknown rate method '" + m + "' (expected BART, GBART or Linear)");
    }
  }
  if (config.replications < 1) throw InvalidArgument("rate.replications must be positive");
  config.prior.validate();
  config.run.validate();

  struct Task {
    long n;
    double sigma0;
    double lambda0;
    int rep;
  };
  std::vector<Task> tasks;
  for (long n : config.sample_sizes)
    for (double s : config.sigma0s)
      for (double l : config.lambda0s)
        for (int r = 0; r < config.replications; ++r) tasks.push_back({n, s, l, r});

  Collector collector;
  run_tasks(tasks.size(), threads, [&](std::size_t i) {
    const Task& t = tasks[i];
    const std::string cell = cell_label(t.n, t.lambda0, t.sigma0);
    const std::uint64_t seed =
        split_seed(master_seed, "rate/" + cell, static_cast<std::uint64_t>(t.rep));
    Rng data_rng(seed);
    const SimulatedData sim = generate(DgpSpec::quadratic(t.lambda0, t.sigma0, config.p), t.n,
                                       data_rng);
    ExperimentResult part;
    auto row = [&](const std::string& method, const std::string& metric, double value) {
      part.add({"rate", method, "", t.n, t.lambda0, t.sigma0, t.rep, seed, metric, value});
    };
    for (const auto& method : config.methods) {
      try {
        if (method == "Linear") {
          require_full_column_rank(sim.data.x, "least squares");
          row(method, "mse", mse(least_squares_fit(sim.data), sim.mu0));
          continue;
        }
        GbartRunConfig run = config.run;
        run.linear_component = method == "GBART";
        Rng rng(split_seed(seed, method, 0));
        const McmcChain chain = fit_gbart(sim.data, config.prior, run, rng);
        row(method, "mse", mse(chain.mu_mean, sim.mu0));
        if (method == "GBART") {
          double empty = 0.0;
          for (const auto& d : chain.draws) empty += d.all_empty ? 1.0 : 0.0;
          row(method, "all_empty_fraction", empty / static_cast<double>(chain.size()));
        }
      } catch (const Error& e) {
        part.add_diagnostic(fmt::format("rate/{}/{}/rep={}: {}: {}", method, cell, t.rep,
                                        e.kind(), e.what()));
      }
    }
    spdlog::debug("rate {} rep {} done", cell, t.rep);
    collector.merge(std::move(part));
  });
  return collector.take();
}

ExperimentResult run_selection_experiment(const SelectionConfig& config,
                                          std::uint64_t master_seed, int threads) {
  if (config.replications < 1) throw InvalidArgument("selection.replications must be positive");
  config.sampler.validate();

  struct Task {
    long n;
    double sigma0;
    double lambda0;
    int rep;
  };
  std::vector<Task> tasks;
  for (long n : config.sample_sizes)
    for (double s : config.sigma0s)
      for (double l : config.lambda0s)
        for (int r = 0; r < config.replications; ++r) tasks.push_back({n, s, l, r});

  Collector collector;
  run_tasks(tasks.size(), threads, [&](std::size_t i) {
    const Task& t = tasks[i];
    const std::string cell = cell_label(t.n, t.lambda0, t.sigma0);
    const std::uint64_t seed =
        split_seed(master_seed, "selection/" + cell, static_cast<std::uint64_t>(t.rep));
    Rng data_rng(seed);
    const SimulatedData sim = generate(DgpSpec::quadratic(t.lambda0, t.sigma0, config.p), t.n,
                                       data_rng);
    ExperimentResult part;
    try {
      Rng rng(split_seed(seed, "SpikeGP", 0));
      const McmcChain chain = run_chain(sim.data, config.sampler, rng);
      part.add({"selection", "SpikeGP", "se", t.n, t.lambda0, t.sigma0, t.rep, seed,
                "inclusion_probability", inclusion_probability(chain)});
    } catch (const Error& e) {
      part.add_diagnostic(fmt::format("selection/SpikeGP/{}/rep={}: {}: {}", cell, t.rep,
                                      e.kind(), e.what()));
    }
    spdlog::debug("selection {} rep {} done", cell, t.rep);
    collector.merge(std::move(part));
  });
  return collector.take();
}

KernelSpec bvm_kernel(const std::string& name, double linear_coef, double se_rho) {
  if (name == "laplace") return KernelSpec::laplace();
  if (name == "se") return KernelSpec::squared_exponential(se_rho);
  if (name == "se_linear") {
    return KernelSpec::sum({KernelSpec::linear(linear_coef), KernelSpec::laplace()});
  }
  if (name == "se_linear_squared") {
    return KernelSpec::sum(
        {KernelSpec::linear(linear_coef), KernelSpec::squared_exponential(se_rho)});
  }
  throw InvalidArgument("unknown kernel '" + name +
                        "' (expected laplace, se, se_linear or se_linear_squared)");
}

ExperimentResult run_bvm_experiment(const BvmConfig& config, std::uint64_t master_seed,
                                    int threads) {
  if (config.replications < 1) throw InvalidArgument("bvm.replications must be positive");
  if (!(config.level > 0.0 && config.level < 1.0)) {
    throw InvalidArgument("bvm.level must lie in (0, 1)");
  }
  std::vector<KernelSpec> kernels;
  for (const auto& k : config.kernels) {
    kernels.push_back(bvm_kernel(k, config.linear_coef, config.se_rho));
  }

  struct Task {
    long n;
    int rep;
  };
  std::vector<Task> tasks;
  for (long n : config.sample_sizes)
    for (int r = 0; r < config.replications; ++r) tasks.push_back({n, r});

  Collector collector;
  run_tasks(tasks.size(), threads, [&](std::size_t i) {
    const Task& t = tasks[i];
    const std::string cell = cell_label(t.n, 0.0, 1.0);
    const std::uint64_t seed =
        split_seed(master_seed, "bvm/" + cell, static_cast<std::uint64_t>(t.rep));
    Rng data_rng(seed);
    DgpSpec dgp = DgpSpec::linear_bvm(config.p);
    dgp.beta0 = Vector::Constant(config.p, config.beta0);
    const SimulatedData sim = generate(dgp, t.n, data_rng);
    const double root_n = std::sqrt(static_cast<double>(t.n));

    ExperimentResult part;
    for (std::size_t k = 0; k < kernels.size(); ++k) {
      const std::string& name = config.kernels[k];
      try {
        if (t.n <= config.p) {
          throw InvalidArgument("N must exceed P for the projection to be identified");
        }
        GpFit fit{kernels[k], sim.data.x, sim.data.y, 1.0, 1.0};
        if (config.estimate_sigma) {
          const Vector resid = sim.data.y - least_squares_fit(sim.data);
          fit.noise_sd = std::sqrt(resid.squaredNorm() / static_cast<double>(t.n - config.p));
        }
        const GaussianLaw law = posterior_projection(fit);
        const auto [lo, hi] = credible_interval(law, 0, config.level);
        auto row = [&](const std::string& metric, double value) {
          part.add({"bvm", "GP", name, t.n, 0.0, 1.0, t.rep, seed, metric, value});
        };
        row("coverage", (lo <= config.beta0 && config.beta0 <= hi) ? 1.0 : 0.0);
        row("scaled_bias", root_n * (law.mean(0) - config.beta0));
        row("scaled_variance", static_cast<double>(t.n) * law.variance(0));
      } catch (const Error& e) {
        part.add_diagnostic(fmt::format("bvm/GP/{}/{}/rep={}: {}: {}", name, cell, t.rep,
                                        e.kind(), e.what()));
      }
    }
    collector.merge(std::move(part));
  });
  return collector.take();
}

namespace {

struct CellAxes {
  std::set<std::string> methods;
  std::set<std::string> kernels;
  std::set<long> ns;
  std::set<double> lambda0s;
  std::set<double> sigma0s;
};

CellAxes axes_of(const ExperimentResult& result, const std::string& metric) {
  CellAxes a;
  for (const auto& r : result.rows()) {
    if (r.metric != metric) continue;
    a.methods.insert(r.method);
    a.kernels.insert(r.kernel);
    a.ns.insert(r.n);
    a.lambda0s.insert(r.lambda0);
    a.sigma0s.insert(r.sigma0);
  }
  return a;
}

}  // namespace

std::string rate_plot_svg(const ExperimentResult& result) {
  const CellAxes a = axes_of(result, "mse");
  std::vector<PlotPanel> panels;
  for (double lambda0 : a.lambda0s) {
    for (double sigma0 : a.sigma0s) {
      PlotPanel panel{fmt::format("lambda0 = {}, sigma0 = {}", lambda0, sigma0), "N", "MSE",
                      true, true, {}};
      for (const auto& method : a.methods) {
        PlotSeries s{method, {}, {}};
        for (long n : a.ns) {
          s.x.push_back(static_cast<double>(n));
          s.y.push_back(result.mean("mse", method, "", n, lambda0, sigma0));
        }
        panel.series.push_back(std::move(s));
      }
      panels.push_back(std::move(panel));
    }
  }
  return render_svg(panels, std::max<int>(1, static_cast<int>(a.sigma0s.size())));
}

std::string selection_plot_svg(const ExperimentResult& result) {
  const CellAxes a = axes_of(result, "inclusion_probability");
  std::vector<PlotPanel> panels;
  for (long n : a.ns) {
    for (double sigma0 : a.sigma0s) {
      PlotPanel panel{fmt::format("N = {}, sigma0 = {}", n, sigma0), "lambda0",
                      "inclusion probability", false, false, {}};
      for (const auto& method : a.methods) {
        PlotSeries s{method, {}, {}};
        for (double lambda0 : a.lambda0s) {
          s.x.push_back(lambda0);
          s.y.push_back(result.mean("inclusion_probability", method, "", n, lambda0, sigma0));
        }
        panel.series.push_back(std::move(s));
      }
      panels.push_back(std::move(panel));
    }
  }
  return render_svg(panels, std::max<int>(1, static_cast<int>(a.sigma0s.size())));
}

std::string bvm_plot_svg(const ExperimentResult& result) {
  std::vector<PlotPanel> panels;
  for (const std::string metric : {"coverage", "scaled_bias", "scaled_variance"}) {
    const CellAxes a = axes_of(result, metric);
    PlotPanel panel{metric, "N", metric, true, false, {}};
    for (const auto& kernel : a.kernels) {
      PlotSeries s{kernel, {}, {}};
      for (long n : a.ns) {
        s.x.push_back(static_cast<double>(n));
        s.y.push_back(result.mean(metric, "", kernel, n, 0.0, 1.0));
      }
      panel.series.push_back(std::move(s));
    }
    panels.push_back(std::move(panel));
  }
  return render_svg(panels, 3);
}

}  // namespace demexp
