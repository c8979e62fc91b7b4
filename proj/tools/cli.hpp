#pragma once

// Configuration, execution and serialisation behind the qtherm executable.
//
// A config file holds one "key = value" pair per line; '#' starts a comment.
// Command-line flags are applied afterwards through the same parser, so they
// take precedence. Every output embeds the resolved configuration: CSV files
// end with "# key = value" lines, JSON files carry a "config" object.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qtherm/types.hpp"

namespace qtherm::cli {

enum class Mode { simulate, equilibrium, fp, verify_liouville, sample };
enum class Format { csv, json };

/// Invalid configuration. `key` names the offending key, `line` is the
/// config-file line (0 for flags and whole-config checks).
class ConfigError : public UsageError {
 public:
  ConfigError(std::string key, std::size_t line, const std::string& what)
      : UsageError(what), key_(std::move(key)), line_(line) {}
  const std::string& key() const noexcept { return key_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string key_;
  std::size_t line_;
};

struct RunConfig {
  std::optional<Mode> mode;
  std::optional<std::vector<double>> spectrum;
  std::optional<CMatrix> hamiltonian;
  std::optional<double> beta;
  std::optional<std::vector<double>> beta_grid;
  std::optional<double> kappa;
  std::optional<double> h;
  std::optional<double> dt;
  std::optional<std::uint64_t> steps;
  std::optional<std::uint64_t> ensemble;
  std::optional<std::uint64_t> record_stride;
  std::optional<std::uint64_t> grid;
  std::optional<double> t_max;
  std::optional<std::string> initial;
  std::optional<std::uint64_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<Format> format;

  bool operator==(const RunConfig& other) const;
};

/// Keys in the order they are serialised.
const std::vector<std::string>& config_keys();

/// Sets one key from its text value. Throws ConfigError for an unknown key
/// or an unparseable value.
void set_value(RunConfig& config, const std::string& key, const std::string& value,
               std::size_t line = 0);

/// Parses "key = value" text onto `config`.
void apply_text(RunConfig& config, std::istream& text);

/// File (may be empty) plus overrides, then validation.
RunConfig parse_config(const std::optional<std::string>& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides);

/// Mode-specific required keys and numeric guards; throws ConfigError or
/// GuardError naming the key.
void validate(const RunConfig& config);

/// (key, text value) for every key that is set.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);

/// Recovers the embedded configuration from a CSV or JSON output file.
RunConfig config_from_output(const std::string& path);

/// Runs a validated config, writing to `out` (stdout when unset or "-").
void run(const RunConfig& config, unsigned workers);

/// Full command-line entry point: returns 0 on success, 2 on a validation
/// failure and 1 on a runtime failure.
int main_entry(int argc, char** argv);

/// 17 significant digits.
std::string format_double(double x);

}  // namespace qtherm::cli
