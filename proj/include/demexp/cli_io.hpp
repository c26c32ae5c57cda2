#pragma once

#include "demexp/chain.hpp"
#include "demexp/experiments.hpp"
#include "demexp/gbart.hpp"
#include "demexp/kernels.hpp"
#include "demexp/spike_gp.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace demexp {

using Json = nlohmann::json;

/// A numeric CSV file: header names and one matrix row per data line.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;

  /// Column index by name, or -1.
  Index column(const std::string& name) const;
};

/// Header plus unparsed fields. Every CSV this tool writes reads back through
/// this; blank lines are skipped and ragged rows are errors.
struct CsvRecords {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // source line of each row
};

CsvRecords read_csv_records(std::istream& in, const std::string& source);
CsvRecords read_csv_records_file(const std::string& path);

/// Reads a header row followed by numeric rows. Blank lines are skipped.
/// Throws ParseError naming the line and column for ragged rows, non-numeric
/// fields and NaN/Inf cells; an empty input is also an error.
CsvTable read_csv(std::istream& in, const std::string& source);
CsvTable read_csv_file(const std::string& path);

/// Column "y" is the target; every other column, in header order, is a design
/// column. A column named "intercept" must contain only ones.
RegressionData parse_dataset(const std::string& path);
RegressionData dataset_from_table(const CsvTable& table, const std::string& source);

/// Header "y,<names>" (x1, x2, ... when the data carry no names), values
/// printed with round-trip precision.
void write_dataset(const RegressionData& data, std::ostream& out);

/// Kernel JSON: {"kind": "linear", "sigma_beta_sq": s}, {"kind": "se", "rho": r,
/// "amplitude": a}, {"kind": "laplace", "amplitude": a}, {"kind": "scaled",
/// "amplitude": a, "child": {...}}, {"kind": "sum", "children": [...]}.
/// "amplitude" is optional and wraps the kernel in a Scaled node.
KernelSpec kernel_from_json(const Json& j);
Json kernel_to_json(const KernelSpec& spec);

/// Overlay the fields present in `j` onto `base`. Unknown keys are errors.
SpikeGpConfig spike_gp_config_from_json(const Json& j, SpikeGpConfig base = {});
/// Reads both the prior fields and the run fields of a "gbart" object.
void gbart_config_from_json(const Json& j, BartPrior& prior, GbartRunConfig& run);
RateConfig rate_config_from_json(const Json& j, RateConfig base = {});
SelectionConfig selection_config_from_json(const Json& j, SelectionConfig base = {});
BvmConfig bvm_config_from_json(const Json& j, BvmConfig base = {});

Json to_json(const SpikeGpConfig& c);
Json to_json(const BartPrior& prior, const GbartRunConfig& run);
Json to_json(const RateConfig& c);
Json to_json(const SelectionConfig& c);
Json to_json(const BvmConfig& c);

/// Chain CSV, one row per retained draw. GBART: draw,beta_<name>...,sigma,
/// all_empty,r2. Spike-and-GP: draw,beta_<name>...,sigma,included,
/// sigma_mu_sq,rho.
void write_gbart_chain(const McmcChain& chain, const std::vector<std::string>& names,
                       std::ostream& out);
void write_spike_gp_chain(const McmcChain& chain, const std::vector<std::string>& names,
                          std::ostream& out);
/// Single column "mu".
void write_mu(const Vector& mu, std::ostream& out);
/// Columns mu_1..mu_N, one row per draw.
void write_mu_draws(const Matrix& draws, std::ostream& out);

/// Design column names, falling back to x1, x2, ...
std::vector<std::string> column_names(const RegressionData& data);

/// Full command-line entry point. Returns the process exit status: 0 on
/// success, 1 after printing "error: <kind>: <message>" to `err`, 2 for usage
/// errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace demexp
