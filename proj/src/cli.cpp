#include "demexp/cli_io.hpp"
#include "demexp/errors.hpp"
#include "demexp/gp_conjugate.hpp"
#include "demexp/summaries.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#ifndef DEMEXP_VERSION
#define DEMEXP_VERSION "unknown"
#endif

namespace demexp {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  bool force = false;
  bool verbose = false;
};

struct Effective {
  Json root = Json::object();
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "results";
  bool force = false;
};

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  Json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  if (!root.is_object()) throw ParseError("config '" + path + "' must hold a JSON object");
  static const std::set<std::string> allowed{"seed",    "threads",  "out",   "rate",
                                             "selection", "bvm",   "spike_gp", "gbart",
                                             "gp",      "summaries"};
  for (const auto& [key, value] : root.items()) {
    if (allowed.count(key) == 0) throw ParseError("unknown top-level config key '" + key + "'");
  }
  return root;
}

// Flags beat config values, which beat a nonempty DEMEXP_THREADS, which beats the default.
Effective resolve(const GlobalOptions& g) {
  Effective e;
  e.root = load_config(g.config_path);
  e.force = g.force;
  if (g.seed) {
    e.seed = *g.seed;
  } else if (e.root.contains("seed")) {
    e.seed = e.root.at("seed").get<std::uint64_t>();
  }
  if (g.out_dir) {
    e.out_dir = *g.out_dir;
  } else if (e.root.contains("out")) {
    e.out_dir = e.root.at("out").get<std::string>();
  }
  if (g.threads) {
    e.threads = *g.threads;
  } else if (e.root.contains("threads")) {
    e.threads = e.root.at("threads").get<int>();
  } else if (const char* env = std::getenv("DEMEXP_THREADS"); env && *env) {
    try {
      e.threads = std::stoi(env);
    } catch (const std::exception&) {
      throw InvalidArgument(std::string("DEMEXP_THREADS is not an integer: '") + env + "'");
    }
  }
  if (e.threads < 1) throw InvalidArgument("threads must be positive");
  return e;
}

const Json& section(const Effective& e, const char* key) {
  static const Json empty = Json::object();
  return e.root.contains(key) ? e.root.at(key) : empty;
}

// Claims every output name up front so a run never overwrites results
// halfway through unless --force was given.
class OutputDir {
 public:
  OutputDir(std::string dir, bool force, std::vector<std::string> names)
      : dir_(std::move(dir)), names_(std::move(names)) {
    fs::create_directories(dir_);
    if (force) return;
    for (const auto& n : names_) {
      if (fs::exists(fs::path(dir_) / n)) {
        throw Error("exists", "'" + (fs::path(dir_) / n).string() +
                                  "' already exists (pass --force to overwrite)");
      }
    }
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const fs::path path = fs::path(dir_) / name;
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write '" + path.string() + "'");
    body(out);
    if (!out) throw Error("io", "failed writing '" + path.string() + "'");
    written_.push_back(path.string());
  }

  void write_text(const std::string& name, const std::string& text) {
    write(name, [&](std::ostream& os) { os << text; });
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  std::string dir_;
  std::vector<std::string> names_;
  std::vector<std::string> written_;
};

Json documented_defaults() {
  return {
      {"gbart.sigma_prior",
       "sigma^2 ~ nu lambda / chi^2_nu with nu = 3 and P(sigma < sigma_hat) = 0.9, sigma_hat the "
       "least-squares residual SD of the standardized target"},
      {"gbart.tree_moves", "GROW and PRUNE with probability 0.5 each"},
      {"gbart.forest_centering", "in-sample forest mean folded into the intercept coefficient"},
      {"gbart.sigma_mu_prior",
       "fixed sigma_mu = 0.5 for fit; half-Cauchy(0, 0.5) for the rate experiment"},
      {"gbart.chain", "4000 iterations, 1000 burn-in"},
      {"spike_gp.sigma_sq_prior", "InvGam(1, 1)"},
      {"spike_gp.orthogonalize", true},
      {"spike_gp.chain", "4000 iterations, 1000 burn-in, log-scale proposal sd 0.5"},
      {"rate.p", 5},
      {"rate.design", "intercept column plus P standard normal predictors"},
      {"selection.lambda0_grid", {0.0, 0.1, 0.2, 0.4}},
      {"selection.replications", 20},
      {"bvm.replications", 200},
      {"bvm.se_linear_kernel", "100 x^T x' + exp(-|x - x'|)"},
      {"bvm.sigma", "known, equal to 1"},
      {"gp.alpha", 1.0},
      {"seed_split", "FNV-1a over the stream id, xor master seed, SplitMix64, xor counter, "
                     "SplitMix64"},
      {"summaries.kl_objective", "full binary KL divergence"},
      {"summaries.cart", "depth_limit 3, min_leaf 10"}};
}

Json metadata(const std::string& command, const Effective& e, const Json& config,
              const std::vector<std::string>& outputs, const std::vector<std::string>& diags) {
  return {{"command", command},      {"version", DEMEXP_VERSION},   {"seed", e.seed},
          {"threads", e.threads},    {"config", config},            {"defaults", documented_defaults()},
          {"outputs", outputs},      {"diagnostics", diags}};
}

void finish(OutputDir& dir, const std::string& command, const Effective& e, const Json& config,
            const std::vector<std::string>& diags, std::ostream& out) {
  std::vector<std::string> outputs = dir.written();
  outputs.push_back((fs::path(e.out_dir) / "metadata.json").string());
  const Json meta = metadata(command, e, config, outputs, diags);
  dir.write_text("metadata.json", meta.dump(2) + "\n");
  for (const auto& d : diags) out << "diagnostic: " << d << '\n';
  for (const auto& f : outputs) out << "wrote " << f << '\n';
}

int run_experiment(const std::string& kind, const Effective& e, std::ostream& out) {
  OutputDir dir(e.out_dir, e.force,
                {kind + "_results.csv", kind + "_plot.svg", "metadata.json"});
  ExperimentResult result;
  Json config;
  std::string svg;
  if (kind == "rate") {
    RateConfig c = rate_config_from_json(section(e, "rate"));
    if (e.root.contains("gbart")) gbart_config_from_json(e.root.at("gbart"), c.prior, c.run);
    config = to_json(c);
    result = run_rate_experiment(c, e.seed, e.threads);
    svg = rate_plot_svg(result);
  } else if (kind == "selection") {
    SelectionConfig c = selection_config_from_json(section(e, "selection"));
    if (e.root.contains("spike_gp")) {
      c.sampler = spike_gp_config_from_json(e.root.at("spike_gp"), c.sampler);
    }
    config = to_json(c);
    result = run_selection_experiment(c, e.seed, e.threads);
    svg = selection_plot_svg(result);
  } else {
    const BvmConfig c = bvm_config_from_json(section(e, "bvm"));
    config = to_json(c);
    result = run_bvm_experiment(c, e.seed, e.threads);
    svg = bvm_plot_svg(result);
  }
  dir.write(kind + "_results.csv", [&](std::ostream& os) { result.write_csv(os); });
  dir.write_text(kind + "_plot.svg", svg);
  out << kind << ": " << result.size() << " result rows\n";
  finish(dir, "experiment " + kind, e, config, result.diagnostics(), out);
  return 0;
}

void write_projection(const PosteriorProjection& proj, const std::vector<std::string>& names,
                      std::ostream& os) {
  os << "draw";
  for (const auto& n : names) os << ",beta_star_" << n;
  os << ",r2,sse\n";
  auto row = [&](const std::string& label, const ProjectionSummary& s) {
    os << label;
    for (Index j = 0; j < s.beta_star.size(); ++j) os << ',' << fmt::format("{}", s.beta_star(j));
    os << ',' << fmt::format("{}", s.r_squared) << ',' << fmt::format("{}", s.sse) << '\n';
  };
  for (std::size_t d = 0; d < proj.per_draw.size(); ++d) row(std::to_string(d), proj.per_draw[d]);
  row("mean", proj.of_mean);
}

int run_fit(const std::string& model, const std::string& data_path, const Effective& e,
            std::ostream& out) {
  const RegressionData data = parse_dataset(data_path);
  const auto names = column_names(data);
  Rng rng(split_seed(e.seed, "fit/" + model, 0));

  if (model == "gbart") {
    BartPrior prior;
    GbartRunConfig run;
    if (e.root.contains("gbart")) gbart_config_from_json(e.root.at("gbart"), prior, run);
    std::vector<std::string> files{"chain.csv", "mu_mean.csv", "projection.csv", "metadata.json"};
    if (run.keep_mu_draws) files.push_back("mu_draws.csv");
    OutputDir dir(e.out_dir, e.force, files);
    const McmcChain chain = fit_gbart(data, prior, run, rng);
    const PosteriorProjection proj = project_posterior(chain.mu_draws, chain.mu_mean, data.x);
    dir.write("chain.csv", [&](std::ostream& os) { write_gbart_chain(chain, names, os); });
    dir.write("mu_mean.csv", [&](std::ostream& os) { write_mu(chain.mu_mean, os); });
    dir.write("projection.csv", [&](std::ostream& os) { write_projection(proj, names, os); });
    if (run.keep_mu_draws) {
      dir.write("mu_draws.csv", [&](std::ostream& os) { write_mu_draws(chain.mu_draws, os); });
    }
    double empty = 0.0;
    for (const auto& d : chain.draws) empty += d.all_empty ? 1.0 : 0.0;
    out << fmt::format("all-empty forest frequency: {:.4f}\n", empty / chain.size());
    out << fmt::format("summary R^2 of the posterior mean: {:.6f}\n", proj.of_mean.r_squared);
    finish(dir, "fit gbart", e, {{"data", data_path}, {"gbart", to_json(prior, run)}}, {}, out);
    return 0;
  }

  if (model == "spikegp") {
    const SpikeGpConfig config = spike_gp_config_from_json(section(e, "spike_gp"));
    OutputDir dir(e.out_dir, e.force, {"chain.csv", "mu_mean.csv", "projection.csv", "metadata.json"});
    const McmcChain chain = run_chain(data, config, rng);
    const PosteriorProjection proj = project_posterior(Matrix(0, 0), chain.mu_mean, data.x);
    dir.write("chain.csv", [&](std::ostream& os) { write_spike_gp_chain(chain, names, os); });
    dir.write("mu_mean.csv", [&](std::ostream& os) { write_mu(chain.mu_mean, os); });
    dir.write("projection.csv", [&](std::ostream& os) { write_projection(proj, names, os); });
    out << fmt::format("inclusion probability: {:.4f}\n", inclusion_probability(chain));
    out << fmt::format("summary R^2 of the posterior mean: {:.6f}\n", proj.of_mean.r_squared);
    finish(dir, "fit spikegp", e, {{"data", data_path}, {"spike_gp", to_json(config)}}, {}, out);
    return 0;
  }

  // Closed-form GP with known noise scale.
  const Json& g = section(e, "gp");
  for (const auto& [key, value] : g.items()) {
    if (key != "kernel" && key != "noise_sd" && key != "alpha" && key != "orthogonalize" &&
        key != "level") {
      throw ParseError("unknown key '" + key + "' in config section 'gp'");
    }
  }
  const Json kernel_json = g.contains("kernel")
                               ? g.at("kernel")
                               : Json{{"kind", "sum"},
                                      {"children",
                                       {{{"kind", "linear"}, {"sigma_beta_sq", 100.0}},
                                        {{"kind", "se"}, {"rho", 1.0}, {"amplitude", 1.0}}}}};
  KernelSpec kernel = kernel_from_json(kernel_json);
  const bool orthogonalize = g.value("orthogonalize", false);
  if (orthogonalize) kernel = project_kernel(kernel, data.x);
  const GpFit fit{kernel, data.x, data.y, g.value("noise_sd", 1.0), g.value("alpha", 1.0)};
  const double level = g.value("level", 0.95);

  OutputDir dir(e.out_dir, e.force, {"posterior_mu.csv", "projection.csv", "metadata.json"});
  const GaussianLaw mu = posterior_at_design(fit);
  const GaussianLaw beta = posterior_projection(fit);
  dir.write("posterior_mu.csv", [&](std::ostream& os) {
    os << "mean,sd\n";
    for (Index i = 0; i < mu.dim(); ++i) {
      os << fmt::format("{},{}\n", mu.mean(i), std::sqrt(std::max(0.0, mu.variance(i))));
    }
  });
  dir.write("projection.csv", [&](std::ostream& os) {
    os << "term,mean,sd,lower,upper\n";
    for (Index j = 0; j < beta.dim(); ++j) {
      const auto [lo, hi] = credible_interval(beta, j, level);
      os << fmt::format("{},{},{},{},{}\n", names[static_cast<std::size_t>(j)], beta.mean(j),
                        std::sqrt(std::max(0.0, beta.variance(j))), lo, hi);
    }
  });
  const ProjectionSummary summary = linear_projection(mu.mean, data.x);
  out << fmt::format("summary R^2 of the posterior mean: {:.6f}\n", summary.r_squared);
  finish(dir, "fit gp", e,
         {{"data", data_path},
          {"gp",
           {{"kernel", kernel_json},
            {"noise_sd", fit.noise_sd},
            {"alpha", fit.alpha},
            {"orthogonalize", orthogonalize},
            {"level", level}}}},
         {}, out);
  return 0;
}

int run_summarize(const std::string& method, const std::string& mu_path,
                  const std::string& data_path, const Effective& e, std::ostream& out) {
  const RegressionData data = parse_dataset(data_path);
  const auto names = column_names(data);
  const CsvTable mu_table = read_csv_file(mu_path);
  const Json& s = section(e, "summaries");
  for (const auto& [key, value] : s.items()) {
    if (key != "depth_limit" && key != "min_leaf" && key != "tol" && key != "max_iter") {
      throw ParseError("unknown key '" + key + "' in config section 'summaries'");
    }
  }

  // Either a single "mu" column or one row per draw with one column per design row.
  Matrix draws(0, 0);
  Vector mu;
  if (const Index c = mu_table.column("mu"); c >= 0) {
    mu = mu_table.values.col(c);
  } else {
    draws = mu_table.values;
    if (draws.rows() == 0) throw ParseError(mu_path + ": no draws");
    mu = draws.colwise().mean().transpose();
  }
  if (mu.size() != data.n()) {
    throw DimensionError(fmt::format("{} holds {} values per function but {} has {} rows", mu_path,
                                     mu.size(), data_path, data.n()));
  }

  if (method == "project-linear") {
    OutputDir dir(e.out_dir, e.force, {"projection.csv", "metadata.json"});
    const PosteriorProjection proj = project_posterior(draws, mu, data.x);
    dir.write("projection.csv", [&](std::ostream& os) { write_projection(proj, names, os); });
    out << fmt::format("summary R^2 of the mean function: {:.6f}\n", proj.of_mean.r_squared);
    if (!proj.per_draw.empty()) {
      double r2 = 0.0;
      for (const auto& p : proj.per_draw) r2 += p.r_squared;
      out << fmt::format("posterior mean of the per-draw R^2: {:.6f}\n", r2 / proj.per_draw.size());
    }
    finish(dir, "summarize project-linear", e, {{"mu", mu_path}, {"data", data_path}}, {}, out);
    return 0;
  }

  if (method == "kl-logistic") {
    const double tol = s.value("tol", 1e-10);
    const int max_iter = s.value("max_iter", 100);
    OutputDir dir(e.out_dir, e.force, {"kl_projection.csv", "metadata.json"});
    const Vector beta = kl_projection_logistic(mu, data.x, tol, max_iter);
    dir.write("kl_projection.csv", [&](std::ostream& os) {
      os << "term,beta_star\n";
      for (Index j = 0; j < beta.size(); ++j) {
        os << fmt::format("{},{}\n", names[static_cast<std::size_t>(j)], beta(j));
      }
    });
    finish(dir, "summarize kl-logistic", e,
           {{"mu", mu_path}, {"data", data_path}, {"tol", tol}, {"max_iter", max_iter}}, {}, out);
    return 0;
  }

  const int depth_limit = s.value("depth_limit", 3);
  const int min_leaf = s.value("min_leaf", 10);
  OutputDir dir(e.out_dir, e.force, {"cart.txt", "cart.dot", "metadata.json"});
  const ProjectionSummary proj = linear_projection(mu, data.x);
  const Vector residuals = mu - data.x * proj.beta_star;
  const CartSummary cart = cart_residual_fit(residuals, data.x, depth_limit, min_leaf);
  dir.write_text("cart.txt", cart.tree.to_text(names));
  dir.write_text("cart.dot", cart.tree.to_dot(names));
  out << cart.tree.to_text(names);
  out << fmt::format("residual SSE: {:.6g} -> {:.6g}\n", cart.sse_root, cart.sse_fit);
  finish(dir, "summarize cart", e,
         {{"mu", mu_path}, {"data", data_path}, {"depth_limit", depth_limit},
          {"min_leaf", min_leaf}},
         {}, out);
  return 0;
}

struct PriorCheckOptions {
  int trees = 200;
  double a = 0.95;
  double b = 2.0;
  int draws = 10000;
};

int run_prior_check(const PriorCheckOptions& o, const Effective& e, std::ostream& out) {
  BartPrior prior;
  prior.num_trees = o.trees;
  prior.branch_a = o.a;
  prior.branch_b = o.b;
  prior.validate();
  if (o.draws < 1) throw InvalidArgument("--draws must be positive");
  OutputDir dir(e.out_dir, e.force, {"prior_check.csv", "metadata.json"});

  Rng rng(split_seed(e.seed, "prior-check/bart", 0));
  const std::vector<PredictorRange> ranges{{0.0, 1.0}};
  long trees_total = 0;
  long stumps = 0;
  long empty_forests = 0;
  long depth1_nodes = 0;
  long depth1_splits = 0;
  for (int d = 0; d < o.draws; ++d) {
    bool all_empty = true;
    for (int t = 0; t < o.trees; ++t) {
      const Tree tree = sample_tree_prior(prior, ranges, rng);
      ++trees_total;
      if (tree.is_stump()) {
        ++stumps;
        continue;
      }
      all_empty = false;
      const auto& root = tree.node(Tree::kRoot);
      for (int child : {root.left, root.right}) {
        ++depth1_nodes;
        if (!tree.node(child).is_leaf()) ++depth1_splits;
      }
    }
    if (all_empty) ++empty_forests;
  }

  struct Stat {
    std::string name;
    double empirical;
    double expected;
    long trials;
  };
  const std::vector<Stat> stats{
      {"tree_no_split", static_cast<double>(stumps) / trees_total, 1.0 - o.a, trees_total},
      {"forest_all_empty", static_cast<double>(empty_forests) / o.draws,
       prior_all_empty_probability(prior), o.draws},
      {"depth1_branch", depth1_nodes ? static_cast<double>(depth1_splits) / depth1_nodes : NAN,
       prior.branch_probability(1), depth1_nodes}};
  dir.write("prior_check.csv", [&](std::ostream& os) {
    os << "statistic,empirical,expected,se,z\n";
    for (const auto& s : stats) {
      const double se =
          s.trials > 0 ? std::sqrt(s.expected * (1.0 - s.expected) / static_cast<double>(s.trials))
                       : NAN;
      const double z = se > 0.0 ? (s.empirical - s.expected) / se : NAN;
      os << fmt::format("{},{},{},{},{}\n", s.name, s.empirical, s.expected, se, z);
      out << fmt::format("{}: empirical {:.5f}, expected {:.5f}, se {:.5f}\n", s.name, s.empirical,
                         s.expected, se);
    }
  });
  finish(dir, "prior-check bart", e,
         {{"trees", o.trees}, {"a", o.a}, {"b", o.b}, {"draws", o.draws}}, {}, out);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parametric-anchored nonparametric regression, projection summaries and "
               "simulation studies",
               "demexp"};
  app.set_version_flag("--version", DEMEXP_VERSION);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out_dir, "output directory (default: results)");
  app.add_option("--threads", g.threads, "worker threads (fallback: DEMEXP_THREADS)");
  app.add_flag("--force", g.force, "overwrite existing result files");
  app.add_flag("-v,--verbose", g.verbose, "debug logging");
  app.require_subcommand(1);
  app.fallthrough();

  std::string experiment_kind;
  auto* experiment = app.add_subcommand("experiment", "run a simulation study");
  experiment->add_option("kind", experiment_kind, "rate | selection | bvm")
      ->required()
      ->check(CLI::IsMember({"rate", "selection", "bvm"}));

  std::string fit_model, fit_data;
  auto* fit = app.add_subcommand("fit", "fit a model to a CSV dataset");
  fit->add_option("model", fit_model, "gp | spikegp | gbart")
      ->required()
      ->check(CLI::IsMember({"gp", "spikegp", "gbart"}));
  fit->add_option("data", fit_data, "dataset CSV with a 'y' column")->required();

  std::string sum_method, sum_mu, sum_data;
  auto* summarize = app.add_subcommand("summarize", "summarize a fitted function");
  summarize->add_option("method", sum_method, "project-linear | kl-logistic | cart")
      ->required()
      ->check(CLI::IsMember({"project-linear", "kl-logistic", "cart"}));
  summarize->add_option("mu", sum_mu, "CSV with a 'mu' column, or one row per draw")->required();
  summarize->add_option("data", sum_data, "dataset CSV")->required();

  std::string prior_model;
  PriorCheckOptions pc;
  auto* prior = app.add_subcommand("prior-check", "Monte Carlo check of the tree prior");
  prior->add_option("model", prior_model, "bart")->required()->check(CLI::IsMember({"bart"}));
  prior->add_option("--trees", pc.trees, "trees per forest");
  prior->add_option("--a", pc.a, "branch_a");
  prior->add_option("--b", pc.b, "branch_b");
  prior->add_option("--draws", pc.draws, "forest draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n' << app.help();
    return 2;
  }

  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::warn);
  try {
    const Effective e = resolve(g);
    if (*experiment) return run_experiment(experiment_kind, e, out);
    if (*fit) return run_fit(fit_model, fit_data, e, out);
    if (*summarize) return run_summarize(sum_method, sum_mu, sum_data, e, out);
    return run_prior_check(pc, e, out);
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << '\n';
  } catch (const nlohmann::json::exception& e) {
    err << "error: parse: " << e.what() << '\n';
  } catch (const fs::filesystem_error& e) {
    err << "error: io: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace demexp
