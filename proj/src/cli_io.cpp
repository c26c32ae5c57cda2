#include "demexp/cli_io.hpp"

#include "demexp/errors.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace demexp {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Rejects keys of `j` outside `allowed`, naming the section.
void check_keys(const Json& j, const std::string& section, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ParseError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (allowed.count(key) == 0) {
      throw ParseError("unknown key '" + key + "' in config section '" + section + "'");
    }
  }
}

template <class T>
void read(const Json& j, const char* key, T& target, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config '" + section + "." + key + "': " + e.what());
  }
}

std::string format_double(double v) { return fmt::format("{}", v); }

}  // namespace

Index CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<Index>(i);
  }
  return -1;
}

CsvRecords read_csv_records(std::istream& in, const std::string& source) {
  CsvRecords records;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!have_header) {
      for (auto& f : fields) records.header.push_back(unquote(f));
      std::set<std::string> seen;
      for (const auto& h : records.header) {
        if (h.empty()) throw ParseError(source + ": empty column name in header");
        if (!seen.insert(h).second) throw ParseError(source + ": duplicate column '" + h + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != records.header.size()) {
      throw ParseError(fmt::format("{}: line {} has {} fields, header has {}", source, line_no,
                                   fields.size(), records.header.size()));
    }
    records.rows.push_back(std::move(fields));
    records.line_numbers.push_back(line_no);
  }
  if (!have_header) throw ParseError(source + ": file is empty");
  return records;
}

CsvTable read_csv(std::istream& in, const std::string& source) {
  const CsvRecords records = read_csv_records(in, source);
  CsvTable table;
  table.header = records.header;
  table.values.resize(static_cast<Index>(records.rows.size()),
                      static_cast<Index>(records.header.size()));
  for (std::size_t r = 0; r < records.rows.size(); ++r) {
    const int line_no = records.line_numbers[r];
    for (std::size_t c = 0; c < records.rows[r].size(); ++c) {
      const std::string& f = records.rows[r][c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError(fmt::format("{}: line {}, column '{}': '{}' is not a number", source,
                                     line_no, table.header[c], f));
      }
      if (!std::isfinite(v)) {
        throw ParseError(fmt::format("{}: line {}, column '{}': non-finite value '{}'", source,
                                     line_no, table.header[c], f));
      }
      table.values(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_csv(in, path);
}

CsvRecords read_csv_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_csv_records(in, path);
}

RegressionData dataset_from_table(const CsvTable& table, const std::string& source) {
  const Index y_col = table.column("y");
  if (y_col < 0) throw ParseError(source + ": target column 'y' not found");
  if (table.values.rows() == 0) throw ParseError(source + ": no data rows");
  RegressionData data;
  data.y = table.values.col(y_col);
  const Index p = table.values.cols() - 1;
  data.x.resize(table.values.rows(), p);
  Index j = 0;
  for (Index c = 0; c < table.values.cols(); ++c) {
    if (c == y_col) continue;
    const auto& name = table.header[static_cast<std::size_t>(c)];
    if (name == "intercept" && !(table.values.col(c).array() == 1.0).all()) {
      throw ParseError(source + ": column 'intercept' must contain only ones");
    }
    data.x.col(j++) = table.values.col(c);
    data.names.push_back(name);
  }
  return data;
}

RegressionData parse_dataset(const std::string& path) {
  return dataset_from_table(read_csv_file(path), path);
}

std::vector<std::string> column_names(const RegressionData& data) {
  if (static_cast<Index>(data.names.size()) == data.p()) return data.names;
  std::vector<std::string> out;
  for (Index j = 0; j < data.p(); ++j) out.push_back(fmt::format("x{}", j + 1));
  return out;
}

void write_dataset(const RegressionData& data, std::ostream& out) {
  data.validate();
  out << "y";
  for (const auto& name : column_names(data)) out << ',' << name;
  out << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    out << format_double(data.y(i));
    for (Index j = 0; j < data.p(); ++j) out << ',' << format_double(data.x(i, j));
    out << '\n';
  }
}

KernelSpec kernel_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("kind")) {
    throw ParseError("kernel must be an object with a \"kind\" field");
  }
  const std::string kind = j.at("kind").get<std::string>();
  auto number = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ParseError(std::string("kernel field '") + key + "' must be a number");
    return j.at(key).get<double>();
  };
  auto wrap = [&](KernelSpec k) {
    return j.contains("amplitude") ? KernelSpec::scaled(number("amplitude", 1.0), std::move(k)) : k;
  };
  if (kind == "linear") {
    check_keys(j, "kernel", {"kind", "sigma_beta_sq", "amplitude"});
    return wrap(KernelSpec::linear(number("sigma_beta_sq", 1.0)));
  }
  if (kind == "se" || kind == "squared_exponential") {
    check_keys(j, "kernel", {"kind", "rho", "amplitude"});
    return wrap(KernelSpec::squared_exponential(number("rho", 1.0)));
  }
  if (kind == "laplace") {
    check_keys(j, "kernel", {"kind", "amplitude"});
    return wrap(KernelSpec::laplace());
  }
  if (kind == "scaled") {
    check_keys(j, "kernel", {"kind", "amplitude", "child"});
    if (!j.contains("child")) throw ParseError("scaled kernel needs a \"child\"");
    return KernelSpec::scaled(number("amplitude", 1.0), kernel_from_json(j.at("child")));
  }
  if (kind == "sum") {
    check_keys(j, "kernel", {"kind", "children", "amplitude"});
    std::vector<KernelSpec> children;
    if (j.contains("children")) {
      if (!j.at("children").is_array()) throw ParseError("sum kernel \"children\" must be an array");
      for (const auto& c : j.at("children")) children.push_back(kernel_from_json(c));
    }
    return wrap(KernelSpec::sum(std::move(children)));
  }
  throw ParseError("unknown kernel kind '" + kind + "'");
}

Json kernel_to_json(const KernelSpec& spec) {
  switch (spec.kind()) {
    case KernelKind::Linear:
      return {{"kind", "linear"}, {"sigma_beta_sq", spec.sigma_beta_sq()}};
    case KernelKind::SquaredExponential:
      return {{"kind", "se"}, {"rho", spec.rho()}};
    case KernelKind::Laplace:
      return {{"kind", "laplace"}};
    case KernelKind::Scaled:
      return {{"kind", "scaled"},
              {"amplitude", spec.amplitude()},
              {"child", kernel_to_json(spec.children().front())}};
    case KernelKind::Sum: {
      Json children = Json::array();
      for (const auto& c : spec.children()) children.push_back(kernel_to_json(c));
      return {{"kind", "sum"}, {"children", children}};
    }
    case KernelKind::Projected:
      return {{"kind", "projected"}, {"base", kernel_to_json(spec.base())}};
  }
  return {};
}

SpikeGpConfig spike_gp_config_from_json(const Json& j, SpikeGpConfig c) {
  const std::string s = "spike_gp";
  check_keys(j, s,
             {"p0", "a_sigma_mu", "b_sigma_mu", "a_rho", "b_rho", "a_sigma", "b_sigma", "alpha",
              "iterations", "burn_in", "proposal_sd", "orthogonalize"});
  read(j, "p0", c.p0, s);
  read(j, "a_sigma_mu", c.a_sigma_mu, s);
  read(j, "b_sigma_mu", c.b_sigma_mu, s);
  read(j, "a_rho", c.a_rho, s);
  read(j, "b_rho", c.b_rho, s);
  read(j, "a_sigma", c.a_sigma, s);
  read(j, "b_sigma", c.b_sigma, s);
  read(j, "alpha", c.alpha, s);
  read(j, "iterations", c.iterations, s);
  read(j, "burn_in", c.burn_in, s);
  read(j, "proposal_sd", c.proposal_sd, s);
  read(j, "orthogonalize", c.orthogonalize, s);
  c.validate();
  return c;
}

void gbart_config_from_json(const Json& j, BartPrior& prior, GbartRunConfig& run) {
  const std::string s = "gbart";
  check_keys(j, s,
             {"num_trees", "branch_a", "branch_b", "sigma_mu", "sigma_mu_prior", "iterations",
              "burn_in", "alpha", "linear_component", "keep_mu_draws", "sigma_nu",
              "sigma_quantile"});
  read(j, "num_trees", prior.num_trees, s);
  read(j, "branch_a", prior.branch_a, s);
  read(j, "branch_b", prior.branch_b, s);
  read(j, "sigma_mu", prior.sigma_mu, s);
  if (j.contains("sigma_mu_prior")) {
    const auto v = j.at("sigma_mu_prior").get<std::string>();
    if (v != "fixed" && v != "half_cauchy") {
      throw ParseError("gbart.sigma_mu_prior must be \"fixed\" or \"half_cauchy\"");
    }
    prior.sigma_mu_half_cauchy = v == "half_cauchy";
  }
  read(j, "iterations", run.iterations, s);
  read(j, "burn_in", run.burn_in, s);
  read(j, "alpha", run.alpha, s);
  read(j, "linear_component", run.linear_component, s);
  read(j, "keep_mu_draws", run.keep_mu_draws, s);
  read(j, "sigma_nu", run.sigma_nu, s);
  read(j, "sigma_quantile", run.sigma_quantile, s);
  prior.validate();
  run.validate();
}

RateConfig rate_config_from_json(const Json& j, RateConfig c) {
  const std::string s = "rate";
  check_keys(j, s, {"sample_sizes", "sigma0s", "lambda0s", "replications", "p", "methods"});
  read(j, "sample_sizes", c.sample_sizes, s);
  read(j, "sigma0s", c.sigma0s, s);
  read(j, "lambda0s", c.lambda0s, s);
  read(j, "replications", c.replications, s);
  read(j, "p", c.p, s);
  read(j, "methods", c.methods, s);
  return c;
}

SelectionConfig selection_config_from_json(const Json& j, SelectionConfig c) {
  const std::string s = "selection";
  check_keys(j, s, {"sample_sizes", "sigma0s", "lambda0s", "replications", "p"});
  read(j, "sample_sizes", c.sample_sizes, s);
  read(j, "sigma0s", c.sigma0s, s);
  read(j, "lambda0s", c.lambda0s, s);
  read(j, "replications", c.replications, s);
  read(j, "p", c.p, s);
  return c;
}

BvmConfig bvm_config_from_json(const Json& j, BvmConfig c) {
  const std::string s = "bvm";
  check_keys(j, s,
             {"sample_sizes", "kernels", "replications", "p", "beta0", "linear_coef", "se_rho",
              "level", "estimate_sigma"});
  read(j, "sample_sizes", c.sample_sizes, s);
  read(j, "kernels", c.kernels, s);
  read(j, "replications", c.replications, s);
  read(j, "p", c.p, s);
  read(j, "beta0", c.beta0, s);
  read(j, "linear_coef", c.linear_coef, s);
  read(j, "se_rho", c.se_rho, s);
  read(j, "level", c.level, s);
  read(j, "estimate_sigma", c.estimate_sigma, s);
  return c;
}

Json to_json(const SpikeGpConfig& c) {
  return {{"p0", c.p0},           {"a_sigma_mu", c.a_sigma_mu}, {"b_sigma_mu", c.b_sigma_mu},
          {"a_rho", c.a_rho},     {"b_rho", c.b_rho},           {"a_sigma", c.a_sigma},
          {"b_sigma", c.b_sigma}, {"alpha", c.alpha},           {"iterations", c.iterations},
          {"burn_in", c.burn_in}, {"proposal_sd", c.proposal_sd},
          {"orthogonalize", c.orthogonalize}};
}

Json to_json(const BartPrior& prior, const GbartRunConfig& run) {
  return {{"num_trees", prior.num_trees},
          {"branch_a", prior.branch_a},
          {"branch_b", prior.branch_b},
          {"sigma_mu", prior.sigma_mu},
          {"sigma_mu_prior", prior.sigma_mu_half_cauchy ? "half_cauchy" : "fixed"},
          {"iterations", run.iterations},
          {"burn_in", run.burn_in},
          {"alpha", run.alpha},
          {"linear_component", run.linear_component},
          {"keep_mu_draws", run.keep_mu_draws},
          {"sigma_nu", run.sigma_nu},
          {"sigma_quantile", run.sigma_quantile}};
}

Json to_json(const RateConfig& c) {
  return {{"sample_sizes", c.sample_sizes}, {"sigma0s", c.sigma0s},
          {"lambda0s", c.lambda0s},         {"replications", c.replications},
          {"p", c.p},                       {"methods", c.methods},
          {"gbart", to_json(c.prior, c.run)}};
}

Json to_json(const SelectionConfig& c) {
  return {{"sample_sizes", c.sample_sizes}, {"sigma0s", c.sigma0s},
          {"lambda0s", c.lambda0s},         {"replications", c.replications},
          {"p", c.p},                       {"spike_gp", to_json(c.sampler)}};
}

Json to_json(const BvmConfig& c) {
  return {{"sample_sizes", c.sample_sizes}, {"kernels", c.kernels},
          {"replications", c.replications}, {"p", c.p},
          {"beta0", c.beta0},               {"linear_coef", c.linear_coef},
          {"se_rho", c.se_rho},             {"level", c.level},
          {"estimate_sigma", c.estimate_sigma}};
}

void write_gbart_chain(const McmcChain& chain, const std::vector<std::string>& names,
                       std::ostream& out) {
  out << "draw";
  for (const auto& n : names) out << ",beta_" << n;
  out << ",sigma,all_empty,r2\n";
  for (std::size_t d = 0; d < chain.size(); ++d) {
    const auto& draw = chain.draws[d];
    out << d;
    for (Index j = 0; j < draw.beta.size(); ++j) out << ',' << format_double(draw.beta(j));
    out << ',' << format_double(draw.sigma) << ',' << (draw.all_empty ? 1 : 0) << ','
        << format_double(draw.r_squared) << '\n';
  }
}

void write_spike_gp_chain(const McmcChain& chain, const std::vector<std::string>& names,
                          std::ostream& out) {
  out << "draw";
  for (const auto& n : names) out << ",beta_" << n;
  out << ",sigma,included,sigma_mu_sq,rho\n";
  for (std::size_t d = 0; d < chain.size(); ++d) {
    const auto& draw = chain.draws[d];
    out << d;
    for (Index j = 0; j < draw.beta.size(); ++j) out << ',' << format_double(draw.beta(j));
    out << ',' << format_double(draw.sigma) << ',' << (draw.included ? 1 : 0) << ','
        << format_double(draw.sigma_mu_sq) << ',' << format_double(draw.rho) << '\n';
  }
}

void write_mu(const Vector& mu, std::ostream& out) {
  out << "mu\n";
  for (Index i = 0; i < mu.size(); ++i) out << format_double(mu(i)) << '\n';
}

void write_mu_draws(const Matrix& draws, std::ostream& out) {
  for (Index i = 0; i < draws.cols(); ++i) out << (i == 0 ? "" : ",") << "mu_" << i + 1;
  out << '\n';
  for (Index d = 0; d < draws.rows(); ++d) {
    for (Index i = 0; i < draws.cols(); ++i) {
      out << (i == 0 ? "" : ",") << format_double(draws(d, i));
    }
    out << '\n';
  }
}

}  // namespace demexp
