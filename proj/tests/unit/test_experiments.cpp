#include "demexp/errors.hpp"
#include "demexp/experiments.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace demexp;
using namespace demexp::testing;

namespace {

bool same_rows(const ExperimentResult& a, const ExperimentResult& b) {
  const auto ra = a.rows(), rb = b.rows();
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const auto& x = ra[i];
    const auto& y = rb[i];
    if (x.experiment != y.experiment || x.method != y.method || x.kernel != y.kernel ||
        x.n != y.n || x.lambda0 != y.lambda0 || x.sigma0 != y.sigma0 || x.rep != y.rep ||
        x.seed != y.seed || x.metric != y.metric || x.value != y.value)
      return false;
  }
  return true;
}

RateConfig tiny_rate() {
  RateConfig c;
  c.sample_sizes = {64, 128};
  c.sigma0s = {1.0};
  c.replications = 2;
  c.prior.num_trees = 10;
  c.run.iterations = 30;
  c.run.burn_in = 10;
  return c;
}

}  // namespace

TEST_CASE("quadratic design formulas") {
  Rng rng(1);
  const SimulatedData sim = generate(DgpSpec::quadratic(0.0, 1.0), 50, rng);
  REQUIRE(sim.data.p() == 6);
  CHECK(sim.data.x.col(0) == Vector::Ones(50));
  CHECK(sim.data.names.front() == "intercept");
  for (Index i = 0; i < 50; ++i) {
    const double expected = sim.data.x.row(i).tail(5).sum() / std::sqrt(5.0);
    CHECK(sim.mu0(i) == doctest::Approx(expected).epsilon(1e-14));
  }

  Rng rng2(2);
  const SimulatedData curved = generate(DgpSpec::quadratic(0.4, 1.0), 50, rng2);
  for (Index i = 0; i < 50; ++i) {
    const double x1 = curved.data.x(i, 1);
    const double expected = curved.data.x.row(i).tail(5).sum() / std::sqrt(5.0) + 0.4 * x1 * x1;
    CHECK(curved.mu0(i) == doctest::Approx(expected).epsilon(1e-14));
  }
  // At x = e_1 the formula is 1/sqrt(5) + 0.4.
  const double at_e1 = 1.0 / std::sqrt(5.0) + 0.4;
  CHECK(at_e1 == doctest::Approx(0.8472135955));
}

TEST_CASE("linear design formula") {
  Rng rng(3);
  const SimulatedData sim = generate(DgpSpec::linear_bvm(), 40, rng);
  REQUIRE(sim.data.p() == 5);
  for (Index i = 0; i < 40; ++i)
    CHECK(sim.mu0(i) == doctest::Approx(1.55 * sim.data.x.row(i).sum()).epsilon(1e-14));
}

TEST_CASE("noise has the requested scale") {
  Rng rng(4);
  const SimulatedData sim = generate(DgpSpec::quadratic(0.0, 3.0), 20000, rng);
  const Vector e = sim.data.y - sim.mu0;
  CHECK(std::sqrt(e.squaredNorm() / 20000.0) == doctest::Approx(3.0).epsilon(0.03));
}

TEST_CASE("mse examples") {
  const Vector a = Vector::LinSpaced(5, 0.0, 1.0);
  CHECK(mse(a, a) == 0.0);
  CHECK(mse((a.array() + 0.3).matrix(), a) == doctest::Approx(0.09));
  CHECK_THROWS_AS(mse(a, Vector::Zero(4)), DimensionError);
}

TEST_CASE("least squares misses 2 lambda^2 of a quadratic mean") {
  // Under standard normal X1 the best linear predictor of X1^2 is the constant
  // 1, leaving variance lambda^2 Var(X1^2) = 2 lambda^2.
  Rng rng(5);
  const SimulatedData sim = generate(DgpSpec::quadratic(0.4, 1.0), 100000, rng);
  const Matrix& x = sim.data.x;
  const Vector fit = x * (x.transpose() * x).ldlt().solve(x.transpose() * sim.data.y);
  CHECK(std::abs(mse(fit, sim.mu0) - 0.32) < 0.01);
}

TEST_CASE("sample second moments of the linear design approach the identity") {
  Rng rng(6);
  for (Index n : {250, 1000, 4000}) {
    for (int rep = 0; rep < 10; ++rep) {
      const SimulatedData sim = generate(DgpSpec::linear_bvm(), n, rng);
      const Matrix sigma = sim.data.x.transpose() * sim.data.x / static_cast<double>(n);
      CHECK(max_abs(sigma - Matrix::Identity(5, 5)) < 5.0 / std::sqrt(static_cast<double>(n)));
    }
  }
}

TEST_CASE("design validation") {
  Rng rng(7);
  DgpSpec bad = DgpSpec::quadratic(0.0, 0.0);
  CHECK_THROWS_AS(generate(bad, 10, rng), InvalidArgument);
  CHECK_THROWS_AS(generate(DgpSpec::quadratic(0.0, 1.0), 0, rng), InvalidArgument);
}

TEST_CASE("result table keys are unique") {
  ExperimentResult r;
  r.add({"rate", "Linear", "", 64, 0.0, 1.0, 0, 1, "mse", 0.5});
  CHECK_THROWS_AS(r.add({"rate", "Linear", "", 64, 0.0, 1.0, 0, 2, "mse", 0.7}), InvalidArgument);
  r.add({"rate", "Linear", "", 64, 0.0, 1.0, 1, 3, "mse", 0.7});
  CHECK(r.size() == 2);
  CHECK(r.mean("mse", "Linear", "", 64, 0.0, 1.0) == doctest::Approx(0.6));
  CHECK(std::isnan(r.mean("mse", "GBART", "", 64, 0.0, 1.0)));

  ExperimentResult other;
  other.add({"rate", "Linear", "", 64, 0.0, 1.0, 0, 9, "mse", 0.1});
  CHECK_THROWS_AS(r.merge(std::move(other)), InvalidArgument);

  std::ostringstream os;
  r.write_csv(os);
  const std::string csv = os.str();
  CHECK(csv.rfind("experiment,method,kernel,N,lambda0,sigma0,rep,seed,metric,value\n", 0) == 0);
  CHECK(std::string(ExperimentResult::csv_header()) ==
        "experiment,method,kernel,N,lambda0,sigma0,rep,seed,metric,value");
}

TEST_CASE("task runner visits every index and rethrows") {
  std::vector<int> hits(50, 0);
  run_tasks(50, 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(run_tasks(10, 3, [](std::size_t i) {
                    if (i == 7) throw InvalidArgument("boom");
                  }),
                  InvalidArgument);
}

TEST_CASE("seed derivation is a pure function of its arguments") {
  CHECK(split_seed(1, "rate/a", 0) == split_seed(1, "rate/a", 0));
  CHECK(split_seed(1, "rate/a", 0) != split_seed(1, "rate/a", 1));
  CHECK(split_seed(1, "rate/a", 0) != split_seed(1, "rate/b", 0));
  CHECK(split_seed(1, "rate/a", 0) != split_seed(2, "rate/a", 0));
}

TEST_CASE("rate experiment is deterministic and order independent") {
  const RateConfig c = tiny_rate();
  const ExperimentResult a = run_rate_experiment(c, 42, 1);
  const ExperimentResult b = run_rate_experiment(c, 42, 3);
  CHECK(same_rows(a, b));
  RateConfig reordered = c;
  reordered.sample_sizes = {128, 64};
  reordered.lambda0s = {0.4, 0.0};
  CHECK(same_rows(a, run_rate_experiment(reordered, 42, 2)));
  CHECK_FALSE(same_rows(a, run_rate_experiment(c, 43, 1)));

  // 2 sizes x 2 lambda0 x 2 reps x (3 mse + 1 all-empty fraction).
  CHECK(a.size() == 2 * 2 * 2 * 4);
  for (const auto& row : a.rows()) {
    CHECK(row.value >= 0.0);
    if (row.metric == "all_empty_fraction") CHECK(row.value <= 1.0);
  }
  const std::string svg = rate_plot_svg(a);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("selection experiment rows") {
  SelectionConfig c;
  c.sample_sizes = {60};
  c.sigma0s = {1.0};
  c.lambda0s = {0.0, 0.4};
  c.replications = 2;
  c.sampler.iterations = 40;
  c.sampler.burn_in = 10;
  const ExperimentResult a = run_selection_experiment(c, 5, 1);
  CHECK(a.size() == 4);
  for (const auto& row : a.rows()) {
    CHECK(row.metric == "inclusion_probability");
    CHECK(row.method == "SpikeGP");
    CHECK(row.value >= 0.0);
    CHECK(row.value <= 1.0);
  }
  CHECK(same_rows(a, run_selection_experiment(c, 5, 2)));
  CHECK(selection_plot_svg(a).find("<svg") != std::string::npos);
}

TEST_CASE("bvm experiment metrics") {
  BvmConfig c;
  c.sample_sizes = {5, 120};
  c.replications = 3;
  const ExperimentResult a = run_bvm_experiment(c, 9, 2);
  // N = P leaves the projection unidentified, so those cells become diagnostics.
  CHECK(a.size() == 3 * 3 * 3);
  CHECK(a.diagnostics().size() == 3 * 3);
  std::set<std::string> kernels;
  for (const auto& row : a.rows()) {
    kernels.insert(row.kernel);
    CHECK(row.n == 120);
    if (row.metric == "coverage") CHECK((row.value == 0.0 || row.value == 1.0));
    if (row.metric == "scaled_variance") CHECK(row.value > 0.0);
  }
  CHECK(kernels == std::set<std::string>{"laplace", "se", "se_linear"});
  CHECK(same_rows(a, run_bvm_experiment(c, 9, 1)));
  CHECK(bvm_plot_svg(a).find("<svg") != std::string::npos);
}

TEST_CASE("bvm kernels") {
  Vector a(2), b(2);
  a << 1.0, 0.0;
  b << 0.0, 2.0;
  const double dist = std::sqrt(5.0);
  CHECK(eval_kernel(bvm_kernel("se_linear", 100.0, 1.0), a, b) == doctest::Approx(std::exp(-dist)));
  CHECK(eval_kernel(bvm_kernel("se_linear", 100.0, 1.0), a, a) == doctest::Approx(101.0));
  CHECK(eval_kernel(bvm_kernel("se_linear_squared", 100.0, 1.0), a, b) == doctest::Approx(std::exp(-5.0)));
  CHECK(eval_kernel(bvm_kernel("se", 100.0, 1.0), a, b) == doctest::Approx(std::exp(-5.0)));
  CHECK(eval_kernel(bvm_kernel("laplace", 100.0, 1.0), a, b) == doctest::Approx(std::exp(-dist)));
  CHECK_THROWS_AS(bvm_kernel("matern", 100.0, 1.0), InvalidArgument);
}
