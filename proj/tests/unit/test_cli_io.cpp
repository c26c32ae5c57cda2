#include "demexp/cli_io.hpp"
#include "demexp/errors.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace demexp;
using namespace demexp::testing;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, removed afterwards.
struct ScratchDir {
  fs::path path;
  ScratchDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("demexp_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(file(name)) << text;
    return file(name);
  }
};

struct CliRun {
  int status;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "demexp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable parse(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in, "test.csv");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

std::string write_simulated(const ScratchDir& dir, const std::string& name, Index n,
                            double curvature, std::uint64_t seed) {
  Rng rng(seed);
  RegressionData d;
  d.x = random_matrix(rng, n, 3);
  d.x.col(0).setOnes();
  d.names = {"intercept", "x1", "x2"};
  d.y = d.x.col(1) + curvature * d.x.col(1).array().square().matrix() + 0.3 * random_vector(rng, n);
  std::ostringstream os;
  write_dataset(d, os);
  return dir.write(name, os.str());
}

}  // namespace

TEST_CASE("dataset parsing") {
  const RegressionData d = dataset_from_table(parse("y,x1,x2\n1,2,3\n4,5,6\n7,8,9\n"), "t");
  CHECK(d.n() == 3);
  CHECK(d.p() == 2);
  CHECK(d.y(2) == 7.0);
  CHECK(d.x(1, 1) == 6.0);
  CHECK(d.names == std::vector<std::string>{"x1", "x2"});

  const RegressionData blank = dataset_from_table(parse("x1,y\n1,2\n3,4\n\n"), "t");
  CHECK(blank.n() == 2);
  CHECK(blank.y(1) == 4.0);

  try {
    dataset_from_table(parse("a,b\n1,2\n"), "t");
    FAIL("expected missing target error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("target column 'y' not found") != std::string::npos);
  }
  CHECK_THROWS_AS(dataset_from_table(parse("y,intercept\n1,1\n2,0.5\n"), "t"), ParseError);
}

TEST_CASE("malformed CSV input is reported with its location") {
  CHECK(error_of("").find("empty") != std::string::npos);
  CHECK(error_of("\n\n").find("empty") != std::string::npos);
  CHECK(error_of("y,x\n1,2\n3\n").find("line 3") != std::string::npos);
  const std::string word = error_of("y,x\n1,abc\n");
  CHECK(word.find("line 2") != std::string::npos);
  CHECK(word.find("'x'") != std::string::npos);
  CHECK(error_of("y,x\n1,nan\n").find("non-finite") != std::string::npos);
  CHECK(error_of("y,x\n1,inf\n").find("non-finite") != std::string::npos);
  CHECK(error_of("y,y\n1,2\n").find("duplicate") != std::string::npos);
  CHECK_THROWS_AS(read_csv_file("/nonexistent/file.csv"), ParseError);
}

TEST_CASE("datasets round-trip through CSV") {
  Rng rng(1);
  RegressionData d;
  d.x = random_matrix(rng, 25, 3) * 1e3;
  d.x.col(0).setOnes();
  d.y = random_vector(rng, 25) / 7.0;
  d.names = {"intercept", "a", "b"};
  std::stringstream ss;
  write_dataset(d, ss);
  const RegressionData back = dataset_from_table(read_csv(ss, "rt"), "rt");
  CHECK(back.x == d.x);
  CHECK(back.y == d.y);
  CHECK(back.names == d.names);

  RegressionData unnamed = d;
  unnamed.names.clear();
  std::stringstream ss2;
  write_dataset(unnamed, ss2);
  CHECK(ss2.str().rfind("y,x1,x2,x3\n", 0) == 0);
}

TEST_CASE("kernel JSON") {
  const Json j = Json::parse(
      R"({"kind":"sum","children":[{"kind":"linear","sigma_beta_sq":100.0},{"kind":"se","rho":1.0,"amplitude":1.0}]})");
  const KernelSpec k = kernel_from_json(j);
  Vector a(2), b(2);
  a << 0.5, -1.0;
  b << 1.0, 0.25;
  const double expected = 100.0 * a.dot(b) + std::exp(-(a - b).squaredNorm());
  CHECK(eval_kernel(k, a, b) == doctest::Approx(expected));
  CHECK(eval_kernel(kernel_from_json(kernel_to_json(k)), a, b) == eval_kernel(k, a, b));
  CHECK(eval_kernel(kernel_from_json(Json{{"kind", "laplace"}, {"amplitude", 2.0}}), a, b) ==
        doctest::Approx(2.0 * std::exp(-(a - b).norm())));

  CHECK_THROWS_AS(kernel_from_json(Json{{"kind", "matern"}}), ParseError);
  CHECK_THROWS_AS(kernel_from_json(Json{{"kind", "se"}, {"lengthscale", 1.0}}), ParseError);
  CHECK_THROWS_AS(kernel_from_json(Json{{"kind", "se"}, {"rho", "big"}}), ParseError);
  CHECK_THROWS_AS(kernel_from_json(Json{{"kind", "se"}, {"rho", -1.0}}), InvalidArgument);
}

TEST_CASE("config sections overlay defaults and reject unknown keys") {
  const SpikeGpConfig s = spike_gp_config_from_json(Json{{"p0", 0.3}, {"iterations", 50}, {"burn_in", 5}});
  CHECK(s.p0 == 0.3);
  CHECK(s.iterations == 50);
  CHECK(s.a_rho == 1.0);
  CHECK_THROWS_AS(spike_gp_config_from_json(Json{{"p_zero", 0.3}}), ParseError);
  CHECK_THROWS_AS(spike_gp_config_from_json(Json{{"p0", "half"}}), ParseError);
  CHECK(spike_gp_config_from_json(to_json(s)).p0 == s.p0);

  BartPrior prior;
  GbartRunConfig run;
  gbart_config_from_json(Json{{"num_trees", 50}, {"sigma_mu_prior", "half_cauchy"}, {"alpha", 0.5}},
                         prior, run);
  CHECK(prior.num_trees == 50);
  CHECK(prior.sigma_mu_half_cauchy);
  CHECK(run.alpha == 0.5);
  BartPrior prior2;
  GbartRunConfig run2;
  gbart_config_from_json(to_json(prior, run), prior2, run2);
  CHECK(to_json(prior2, run2) == to_json(prior, run));
  CHECK_THROWS_AS(gbart_config_from_json(Json{{"sigma_mu_prior", "normal"}}, prior, run), ParseError);
  CHECK_THROWS_AS(gbart_config_from_json(Json{{"trees", 5}}, prior, run), ParseError);

  const BvmConfig bvm = bvm_config_from_json(Json{{"sample_sizes", {100, 200}}, {"replications", 7}});
  CHECK(bvm.sample_sizes == std::vector<long>{100, 200});
  CHECK(to_json(bvm_config_from_json(to_json(bvm))) == to_json(bvm));
  CHECK(rate_config_from_json(Json{{"methods", {"Linear"}}}).methods == std::vector<std::string>{"Linear"});
  CHECK_THROWS_AS(selection_config_from_json(Json{{"grid", 1}}), ParseError);
}

TEST_CASE("chain writers use the documented headers") {
  McmcChain chain;
  McmcDraw d;
  d.beta = Vector::Ones(2);
  d.sigma = 0.5;
  d.all_empty = true;
  d.r_squared = 0.9;
  chain.draws = {d, d};
  std::ostringstream os;
  write_gbart_chain(chain, {"intercept", "x1"}, os);
  CHECK(os.str().rfind("draw,beta_intercept,beta_x1,sigma,all_empty,r2\n0,1,1,0.5,1,0.9\n", 0) == 0);

  std::ostringstream sp;
  write_spike_gp_chain(chain, {"intercept", "x1"}, sp);
  CHECK(sp.str().rfind("draw,beta_intercept,beta_x1,sigma,included,sigma_mu_sq,rho\n", 0) == 0);

  std::stringstream mu;
  write_mu(Vector::LinSpaced(3, 0.0, 1.0), mu);
  CHECK(read_csv(mu, "mu").values.col(0) == Vector::LinSpaced(3, 0.0, 1.0));

  std::stringstream draws;
  write_mu_draws(Matrix::Ones(2, 3), draws);
  const CsvTable t = read_csv(draws, "draws");
  CHECK(t.header == std::vector<std::string>{"mu_1", "mu_2", "mu_3"});
  CHECK(t.values.rows() == 2);
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(cli({}).status == 2);
  CHECK(cli({"frobnicate"}).status == 2);
  CHECK(cli({"experiment", "nonsense"}).status == 2);
  const CliRun r = cli({"fit"});
  CHECK(r.status == 2);
  CHECK(r.err.rfind("error: usage:", 0) == 0);
  const CliRun v = cli({"--version"});
  CHECK(v.status == 0);
  CHECK(v.out.find(DEMEXP_VERSION) != std::string::npos);
}

TEST_CASE("prior-check reports the all-empty frequency and refuses to overwrite") {
  ScratchDir dir;
  const std::string out = dir.file("prior");
  const CliRun r = cli({"prior-check", "bart", "--trees", "2", "--a", "0.5", "--draws", "10000",
                        "--out", out, "--seed", "3"});
  REQUIRE(r.status == 0);
  const CsvRecords rec = read_csv_records_file(out + "/prior_check.csv");
  CHECK(rec.header == std::vector<std::string>{"statistic", "empirical", "expected", "se", "z"});
  bool found = false;
  for (const auto& row : rec.rows) {
    if (row[0] != "forest_all_empty") continue;
    found = true;
    CHECK(std::stod(row[2]) == 0.25);
    CHECK(std::abs(std::stod(row[4])) < 3.0);
  }
  CHECK(found);

  const CliRun again = cli({"prior-check", "bart", "--out", out, "--draws", "10"});
  CHECK(again.status == 1);
  CHECK(again.err.rfind("error: exists:", 0) == 0);
  CHECK(cli({"prior-check", "bart", "--out", out, "--draws", "10", "--force"}).status == 0);
}

TEST_CASE("experiment writes results, plot and metadata") {
  ScratchDir dir;
  const std::string cfg = dir.write(
      "cfg.json", R"({"bvm": {"sample_sizes": [60], "replications": 2}, "threads": 2})");
  const std::string out = dir.file("bvm");
  const CliRun r = cli({"experiment", "bvm", "--config", cfg, "--seed", "7", "--out", out});
  REQUIRE(r.status == 0);
  const CsvRecords rec = read_csv_records_file(out + "/bvm_results.csv");
  CHECK(rec.header == std::vector<std::string>{"experiment", "method", "kernel", "N", "lambda0",
                                               "sigma0", "rep", "seed", "metric", "value"});
  CHECK(rec.rows.size() == 2 * 3 * 3);
  CHECK(slurp(out + "/bvm_plot.svg").find("<svg") != std::string::npos);

  const Json meta = Json::parse(slurp(out + "/metadata.json"));
  CHECK(meta.at("seed") == 7);
  CHECK(meta.at("threads") == 2);
  CHECK(meta.at("version") == DEMEXP_VERSION);
  CHECK(meta.at("config").at("replications") == 2);
  CHECK(meta.at("defaults").contains("bvm.sigma"));

  // A second run with the same seed reproduces the table byte for byte.
  const std::string out2 = dir.file("bvm2");
  REQUIRE(cli({"experiment", "bvm", "--config", cfg, "--seed", "7", "--out", out2,
               "--threads", "1"})
              .status == 0);
  CHECK(slurp(out + "/bvm_results.csv") == slurp(out2 + "/bvm_results.csv"));
}

TEST_CASE("config errors are one-line failures") {
  ScratchDir dir;
  const std::string bad = dir.write("bad.json", R"({"bvm": {"reps": 2}})");
  const CliRun r = cli({"experiment", "bvm", "--config", bad, "--out", dir.file("o")});
  CHECK(r.status == 1);
  CHECK(r.err.rfind("error: parse:", 0) == 0);
  CHECK(r.err.find('\n') == r.err.size() - 1);
  const std::string top = dir.write("top.json", R"({"rates": {}})");
  CHECK(cli({"experiment", "rate", "--config", top, "--out", dir.file("o")}).status == 1);
  const CliRun missing = cli({"fit", "gp", dir.file("missing.csv"), "--out", dir.file("o")});
  CHECK(missing.status == 1);
  CHECK(missing.err.rfind("error: parse: cannot open", 0) == 0);
}

TEST_CASE("fit and summarize commands produce readable outputs") {
  ScratchDir dir;
  const std::string data = write_simulated(dir, "data.csv", 60, 0.8, 11);
  const std::string cfg = dir.write(
      "cfg.json",
      R"({"gbart": {"num_trees": 10, "iterations": 40, "burn_in": 10, "keep_mu_draws": true},
          "spike_gp": {"iterations": 40, "burn_in": 10},
          "summaries": {"depth_limit": 2, "min_leaf": 5}})");

  const std::string gb = dir.file("gbart");
  REQUIRE(cli({"fit", "gbart", data, "--config", cfg, "--out", gb}).status == 0);
  const CsvRecords chain = read_csv_records_file(gb + "/chain.csv");
  CHECK(chain.header == std::vector<std::string>{"draw", "beta_intercept", "beta_x1", "beta_x2",
                                                 "sigma", "all_empty", "r2"});
  CHECK(chain.rows.size() == 30);
  CHECK(read_csv_file(gb + "/mu_draws.csv").values.rows() == 30);
  const CsvRecords proj = read_csv_records_file(gb + "/projection.csv");
  CHECK(proj.rows.size() == 31);
  CHECK(proj.rows.back()[0] == "mean");

  const std::string sg = dir.file("spikegp");
  REQUIRE(cli({"fit", "spikegp", data, "--config", cfg, "--out", sg}).status == 0);
  CHECK(read_csv_records_file(sg + "/chain.csv").rows.size() == 30);

  const std::string gp = dir.file("gp");
  REQUIRE(cli({"fit", "gp", data, "--out", gp}).status == 0);
  const CsvRecords gpp = read_csv_records_file(gp + "/projection.csv");
  CHECK(gpp.header == std::vector<std::string>{"term", "mean", "sd", "lower", "upper"});
  CHECK(gpp.rows.size() == 3);
  CHECK(read_csv_file(gp + "/posterior_mu.csv").values.rows() == 60);

  const std::string pl = dir.file("pl");
  REQUIRE(cli({"summarize", "project-linear", gb + "/mu_draws.csv", data, "--out", pl}).status == 0);
  CHECK(read_csv_records_file(pl + "/projection.csv").rows.size() == 31);

  const std::string ct = dir.file("cart");
  const CliRun cart = cli({"summarize", "cart", gb + "/mu_mean.csv", data, "--config", cfg, "--out", ct});
  REQUIRE(cart.status == 0);
  CHECK(slurp(ct + "/cart.dot").find("digraph") != std::string::npos);
  CHECK(!slurp(ct + "/cart.txt").empty());

  // Probabilities from a logistic model, summarized by the KL projection.
  Rng rng(12);
  const CsvTable table = read_csv_file(data);
  std::ostringstream probs;
  probs << "mu\n";
  for (Index i = 0; i < table.values.rows(); ++i)
    probs << 1.0 / (1.0 + std::exp(-(0.2 + 0.7 * table.values(i, 2) - 0.4 * table.values(i, 3)))) << '\n';
  const std::string mu = dir.write("probs.csv", probs.str());
  const std::string kl = dir.file("kl");
  REQUIRE(cli({"summarize", "kl-logistic", mu, data, "--out", kl}).status == 0);
  const CsvRecords klr = read_csv_records_file(kl + "/kl_projection.csv");
  REQUIRE(klr.rows.size() == 3);
  CHECK(std::stod(klr.rows[1][1]) == doctest::Approx(0.7).epsilon(1e-4));

  const CliRun mismatch = cli({"summarize", "cart", mu, write_simulated(dir, "short.csv", 20, 0.0, 3),
                               "--out", dir.file("x")});
  CHECK(mismatch.status == 1);
  CHECK(mismatch.err.rfind("error: dimension:", 0) == 0);
}

TEST_CASE("threads come from flags, then config, then the environment") {
  ScratchDir dir;
  const std::string cfg = dir.write("cfg.json", R"({"bvm": {"sample_sizes": [40], "replications": 1}, "threads": 3})");
  const std::string small = dir.write("small.json", R"({"bvm": {"sample_sizes": [40], "replications": 1}})");
  auto threads_of = [&](std::vector<std::string> extra, const std::string& name) {
    std::vector<std::string> args{"experiment", "bvm", "--out", dir.file(name)};
    args.insert(args.end(), extra.begin(), extra.end());
    REQUIRE(cli(args).status == 0);
    return Json::parse(slurp(dir.file(name) + "/metadata.json")).at("threads").get<int>();
  };
  ::setenv("DEMEXP_THREADS", "2", 1);
  CHECK(threads_of({"--config", cfg, "--threads", "4"}, "a") == 4);
  CHECK(threads_of({"--config", cfg}, "b") == 3);
  CHECK(threads_of({"--config", small}, "c") == 2);
  ::unsetenv("DEMEXP_THREADS");
  CHECK(threads_of({"--config", small}, "d") == 1);
  ::setenv("DEMEXP_THREADS", "many", 1);
  CHECK(cli({"experiment", "bvm", "--out", dir.file("e"), "--config", small}).status == 1);
  ::unsetenv("DEMEXP_THREADS");
}
