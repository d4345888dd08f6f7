#pragma once

#include "svscl/ergolab.hpp"
#include "svscl/error.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace svscl {

struct ConfigDiagnostic {
  int line = 0;
  int column = 0;  // 0 when not tied to a column
  std::string message;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigDiagnostic> diagnostics);
  const std::vector<ConfigDiagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<ConfigDiagnostic> diagnostics_;
};

/// Malformed text (lexical or grammatical).
class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Well-formed text with unknown keys or values violating a precondition.
class ValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct RunConfig {
  SimConfig sim;
  /// Named exact constants declared under [flux].
  std::map<std::string, ExactScalar> constants;
  int radius = 8;
  std::optional<int> margin;  // unset: twice the flux degree

  int lattice_margin() const;

  std::string experiment;
  std::optional<std::size_t> ensemble_size;
  std::optional<double> burn_in;
  std::map<std::string, std::string> params;
  std::vector<Observable> observables;
  SpectralField initial_b;

  std::string output_path;
  std::string series_dir;
  std::size_t snapshot_every = 0;  // 0: about 100 snapshots per run

  double gram_basis_radius = 4.0;
  int gram_windows = 1;

  Wavevector tangent_xi;  // empty: first axis
  std::vector<double> tangent_epsilons = {1e-3, 1e-4, 1e-5};

  friend bool operator==(const RunConfig& a, const RunConfig& b);
};

/// Parses the line-based key = value grammar. Throws ParseError or
/// ValidationError carrying every diagnostic found.
RunConfig parse_config(std::string_view text);

/// Canonical text; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

/// Parses a polynomial in u with exact coefficients, e.g. "1/2 u^2 + sqrt(2) u".
/// Result[j] is the coefficient of u^j.
std::vector<ExactScalar> parse_polynomial(std::string_view text,
                                          const std::map<std::string, ExactScalar>& constants = {});
/// Parses an exact scalar literal such as "3/2 + 1/2*sqrt(3)".
ExactScalar parse_exact_scalar(std::string_view text, const std::map<std::string, ExactScalar>& constants = {});
std::string format_polynomial(const std::vector<ExactScalar>& coeffs);

/// Experiment spec from the registered defaults overlaid with the config.
ExperimentSpec experiment_spec(const RunConfig& config, const std::string& name, bool use_config_sim);

/// FNV-1a hash of the canonical config text.
std::uint64_t config_hash(const RunConfig& config);

/// Runs the command line; returns the process exit code (0 pass, 1 fail, 2 error).
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace svscl
