#pragma once

#include "demexp/chain.hpp"
#include "demexp/gbart.hpp"
#include "demexp/kernels.hpp"
#include "demexp/random.hpp"
#include "demexp/spike_gp.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace demexp {

enum class DgpKind { Quadratic, LinearBvm };

/// Simulation designs with X_ij iid Normal(0, 1) and Normal(0, sigma0^2) noise.
///   Quadratic:  mu0(x) = sum_j x_j / sqrt(P) + lambda0 x_1^2
///   LinearBvm:  mu0(x) = sum_j beta0_j x_j
/// With `intercept` set, the returned design gets a leading column of ones
/// that does not enter mu0; column j of the formulas is then design column j+1.
struct DgpSpec {
  DgpKind kind = DgpKind::Quadratic;
  int p = 5;
  double lambda0 = 0.0;
  double sigma0 = 1.0;
  Vector beta0;  // LinearBvm; empty means 1.55 in every coordinate
  bool intercept = true;

  static DgpSpec quadratic(double lambda0, double sigma0, int p = 5);
  static DgpSpec linear_bvm(int p = 5);
  void validate() const;
};

struct SimulatedData {
  RegressionData data;
  Vector mu0;
};

SimulatedData generate(const DgpSpec& dgp, Index n, Rng& rng);

/// Mean squared difference.
double mse(const Vector& mu_hat, const Vector& mu0);

/// One tidy result row. `seed` is the task stream that produced the value.
struct ResultRow {
  std::string experiment;
  std::string method;
  std::string kernel;
  long n = 0;
  double lambda0 = 0.0;
  double sigma0 = 0.0;
  int rep = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

/// Long-format result table keyed by (experiment, method, kernel, N, lambda0,
/// sigma0, rep, metric). Iteration order is the key order, so the table does
/// not depend on the order in which tasks finished.
class ExperimentResult {
 public:
  using Key = std::tuple<std::string, std::string, std::string, long, double, double, int,
                         std::string>;

  /// Throws InvalidArgument when the key is already present.
  void add(ResultRow row);
  void merge(ExperimentResult&& other);
  void add_diagnostic(std::string message);

  std::vector<ResultRow> rows() const;
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }
  std::size_t size() const { return rows_.size(); }

  /// Mean of `metric` over replications for rows matching the given cell
  /// fields; NaN when nothing matches. An empty `method` or `kernel` matches any.
  double mean(const std::string& metric, const std::string& method, const std::string& kernel,
              long n, double lambda0, double sigma0) const;

  static const char* csv_header();
  void write_csv(std::ostream& os) const;

 private:
  std::map<Key, ResultRow> rows_;
  std::vector<std::string> diagnostics_;
};

/// Runs task(0), ..., task(count - 1) on `threads` workers pulling from a
/// shared counter. The first exception is rethrown after all workers stop.
void run_tasks(std::size_t count, int threads, const std::function<void(std::size_t)>& task);

struct RateConfig {
  std::vector<long> sample_sizes{64, 128, 256, 512, 1024, 2048, 4096};
  std::vector<double> sigma0s{1.0, 3.0, 5.0};
  std::vector<double> lambda0s{0.0, 0.4};
  int replications = 5;
  int p = 5;
  std::vector<std::string> methods{"BART", "GBART", "Linear"};
  BartPrior prior{.sigma_mu_half_cauchy = true};
  GbartRunConfig run;
};

struct SelectionConfig {
  std::vector<long> sample_sizes{200, 400, 800};
  std::vector<double> sigma0s{1.0, 2.0, 4.0};
  std::vector<double> lambda0s{0.0, 0.1, 0.2, 0.4};
  int replications = 20;
  int p = 5;
  SpikeGpConfig sampler;
};

/// Kernel names: "laplace", "se", "se_linear" (linear_coef x^T x' +
/// exp(-|x - x'|), the displayed formula) and "se_linear_squared"
/// (linear_coef x^T x' + exp(-|x - x'|^2)).
struct BvmConfig {
  std::vector<long> sample_sizes{250, 500, 1000};
  std::vector<std::string> kernels{"laplace", "se", "se_linear"};
  int replications = 200;
  int p = 5;
  double beta0 = 1.55;
  double linear_coef = 100.0;
  double se_rho = 1.0;
  double level = 0.95;
  /// Replaces the known sigma = 1 by the least-squares residual SD.
  bool estimate_sigma = false;
};

KernelSpec bvm_kernel(const std::string& name, double linear_coef, double se_rho);

/// Metric "mse" per method, plus "all_empty_fraction" for GBART.
ExperimentResult run_rate_experiment(const RateConfig& config, std::uint64_t master_seed,
                                     int threads = 1);
/// Metric "inclusion_probability", method "SpikeGP".
ExperimentResult run_selection_experiment(const SelectionConfig& config,
                                          std::uint64_t master_seed, int threads = 1);
/// Metrics "coverage", "scaled_bias", "scaled_variance" for the first
/// coordinate of the projection, method "GP".
ExperimentResult run_bvm_experiment(const BvmConfig& config, std::uint64_t master_seed,
                                    int threads = 1);

/// Line-chart views of a result table: MSE against N on log-log axes per
/// (lambda0, sigma0) panel; inclusion probability against lambda0 per
/// (N, sigma0) panel; each BvM metric against N per kernel.
std::string rate_plot_svg(const ExperimentResult& result);
std::string selection_plot_svg(const ExperimentResult& result);
std::string bvm_plot_svg(const ExperimentResult& result);

}  // namespace demexp
