#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qtherm/canonical.hpp"
#include "qtherm/fokker_planck.hpp"
#include "qtherm/moments.hpp"
#include "qtherm/parallel.hpp"
#include "qtherm/sde.hpp"

namespace qtherm::cli {

using Json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Text values

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) parts.push_back(trim(item));
  return parts;
}

[[noreturn]] void bad_value(const std::string& key, std::size_t line, const std::string& why) {
  std::string where = line > 0 ? " (line " + std::to_string(line) + ")" : "";
  throw ConfigError(key, line, key + where + ": " + why);
}

double parse_double(const std::string& key, const std::string& text, std::size_t line) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    bad_value(key, line, "expected a finite number, got '" + t + "'");
  }
  return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text, std::size_t line) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (!t.empty() && ec == std::errc() && ptr == t.data() + t.size()) return v;
  // Accept integral floating-point spellings such as 1e6.
  double d = 0.0;
  const auto [p2, e2] = std::from_chars(t.data(), t.data() + t.size(), d);
  if (!t.empty() && e2 == std::errc() && p2 == t.data() + t.size() && d >= 0.0 && d < 9.2e18 &&
      std::floor(d) == d) {
    return static_cast<std::uint64_t>(d);
  }
  bad_value(key, line, "expected a nonnegative integer, got '" + t + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& text, std::size_t line) {
  std::vector<double> out;
  for (const std::string& part : split(text, ',')) out.push_back(parse_double(key, part, line));
  if (out.empty()) bad_value(key, line, "expected a comma-separated list of numbers");
  return out;
}

Complex json_entry(const Json& v) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  throw std::invalid_argument("entries must be numbers or [re, im] pairs");
}

CMatrix parse_matrix(const std::string& key, const std::string& text, std::size_t line) {
  try {
    const Json j = Json::parse(text);
    if (!j.is_array() || j.empty()) throw std::invalid_argument("expected a nonempty array of rows");
    const std::size_t n = j.size();
    CMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
      if (!j[r].is_array() || j[r].size() != n) throw std::invalid_argument("matrix must be square");
      for (std::size_t c = 0; c < n; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = json_entry(j[r][c]);
      }
    }
    return m;
  } catch (const Json::exception& e) {
    bad_value(key, line, std::string("invalid JSON matrix: ") + e.what());
  } catch (const std::invalid_argument& e) {
    bad_value(key, line, std::string("invalid matrix: ") + e.what());
  }
}

std::string matrix_text(const CMatrix& m) {
  std::string s = "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    s += r ? ",[" : "[";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) s += ",";
      s += "[" + format_double(m(r, c).real()) + "," + format_double(m(r, c).imag()) + "]";
    }
    s += "]";
  }
  return s + "]";
}

std::string list_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

const std::map<std::string, Mode>& mode_names() {
  static const std::map<std::string, Mode> names{{"simulate", Mode::simulate},
                                                 {"equilibrium", Mode::equilibrium},
                                                 {"fp", Mode::fp},
                                                 {"verify-liouville", Mode::verify_liouville},
                                                 {"sample", Mode::sample}};
  return names;
}

std::string mode_text(Mode m) {
  for (const auto& [name, mode] : mode_names()) {
    if (mode == m) return name;
  }
  return {};
}

// ---------------------------------------------------------------------------
// Initial conditions

InitialLaw sde_initial(const RunConfig& c, std::size_t dim) {
  const std::string spec = c.initial.value_or("uniform");
  if (spec == "uniform") return InitialLaw::uniform(dim);
  if (spec.rfind("basis:", 0) == 0) {
    const auto k = parse_count("initial", spec.substr(6), 0);
    if (k >= dim) throw ConfigError("initial", 0, "initial: basis index out of range");
    return InitialLaw::fixed(PureState::basis(dim, k));
  }
  if (spec.rfind("state:", 0) == 0) {
    try {
      const Json j = Json::parse(spec.substr(6));
      if (!j.is_array() || j.size() != dim) throw std::invalid_argument("state needs one amplitude per level");
      CVector v(static_cast<Eigen::Index>(dim));
      for (std::size_t k = 0; k < dim; ++k) v[static_cast<Eigen::Index>(k)] = json_entry(j[k]);
      return InitialLaw::fixed(PureState(v));
    } catch (const Json::exception& e) {
      throw ConfigError("initial", 0, std::string("initial: invalid JSON state: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("initial", 0, std::string("initial: ") + e.what());
    }
  }
  throw ConfigError("initial", 0, "initial: expected uniform, basis:<k> or state:<json>");
}

Density1D fp_initial(const RunConfig& c, std::size_t cells, double h, double beta) {
  const std::string spec = c.initial.value_or("gaussian:0.5,0.1");
  try {
    if (spec == "stationary") return Density1D::stationary(cells, h, beta);
    if (spec == "uniform") return Density1D::uniform(cells);
    if (spec.rfind("gaussian:", 0) == 0) {
      const auto args = parse_list("initial", spec.substr(9), 0);
      if (args.size() != 2) throw ConfigError("initial", 0, "initial: gaussian needs center,width");
      return Density1D::gaussian(cells, args[0], args[1]);
    }
    if (spec.rfind("linear:", 0) == 0) {
      return Density1D::linear(cells, parse_double("initial", spec.substr(7), 0));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const UsageError& e) {
    throw ConfigError("initial", 0, std::string("initial: ") + e.what());
  }
  throw ConfigError("initial", 0,
                    "initial: expected stationary, uniform, gaussian:<c>,<w> or linear:<a>");
}

HermitianOperator hamiltonian_of(const RunConfig& c) {
  if (c.hamiltonian) return HermitianOperator(*c.hamiltonian);
  return HermitianOperator::diagonal(*c.spectrum);
}

SdeParams sde_params(const RunConfig& c) {
  SdeParams p;
  p.beta = *c.beta;
  p.kappa = *c.kappa;
  p.dt = *c.dt;
  p.steps = *c.steps;
  p.ensemble_size = *c.ensemble;
  p.master_seed = c.seed.value_or(0);
  p.record_stride = c.record_stride.value_or(1);
  return p;
}

// ---------------------------------------------------------------------------
// Validation helpers

template <class T>
const T& require(const std::optional<T>& v, const char* key, Mode mode) {
  if (!v) {
    throw ConfigError(key, 0, std::string("missing required key '") + key + "' for mode " + mode_text(mode));
  }
  return *v;
}

void require_operator(const RunConfig& c) {
  if (c.spectrum && c.hamiltonian) {
    throw ConfigError("hamiltonian", 0, "give either 'spectrum' or 'hamiltonian', not both");
  }
  if (!c.spectrum && !c.hamiltonian) {
    throw ConfigError("spectrum", 0, "missing required key 'spectrum' (or 'hamiltonian')");
  }
  if (c.spectrum && c.spectrum->size() < 2) {
    throw ConfigError("spectrum", 0, "spectrum needs at least two levels");
  }
  if (c.hamiltonian) {
    if (c.hamiltonian->rows() < 2) throw ConfigError("hamiltonian", 0, "hamiltonian needs dimension >= 2");
    try {
      HermitianOperator{*c.hamiltonian};
    } catch (const UsageError& e) {
      throw ConfigError("hamiltonian", 0, std::string("hamiltonian: ") + e.what());
    }
  }
}

std::size_t dim_of(const RunConfig& c) {
  return c.hamiltonian ? static_cast<std::size_t>(c.hamiltonian->rows()) : c.spectrum->size();
}

void require_format(const RunConfig& c, bool csv_allowed) {
  if (!csv_allowed && c.format == Format::csv) {
    throw ConfigError("format", 0, "format: mode " + mode_text(*c.mode) + " writes JSON only");
  }
}

// ---------------------------------------------------------------------------
// Output

Json config_json(const RunConfig& c) {
  Json j = Json::object();
  for (const auto& [key, text] : config_entries(c)) {
    if (key == "spectrum" || key == "beta_grid") {
      j[key] = key == "spectrum" ? *c.spectrum : *c.beta_grid;
    } else if (key == "hamiltonian") {
      j[key] = Json::parse(text);
    } else if (key == "mode" || key == "initial" || key == "out" || key == "format") {
      j[key] = text;
    } else if (key == "steps" || key == "ensemble" || key == "record_stride" || key == "grid" ||
               key == "samples" || key == "seed") {
      j[key] = parse_count(key, text, 0);
    } else {
      j[key] = parse_double(key, text, 0);
    }
  }
  return j;
}

std::string json_value_text(const std::string& key, const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_unsigned() || v.is_number_integer()) return v.dump();
  if (v.is_number()) return format_double(v.get<double>());
  if (key == "hamiltonian") return v.dump();
  if (v.is_array()) {
    std::vector<double> xs;
    for (const auto& x : v) xs.push_back(x.get<double>());
    return list_text(xs);
  }
  throw ConfigError(key, 0, key + ": unsupported value in embedded config");
}

class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}
  void add(std::vector<double> row) { rows_.push_back(std::move(row)); }

  std::string csv(const RunConfig& c) const {
    std::string s;
    for (std::size_t i = 0; i < columns_.size(); ++i) s += (i ? "," : "") + columns_[i];
    s += "\n";
    for (const auto& row : rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + format_double(row[i]);
      s += "\n";
    }
    s += "# qtherm config\n";
    for (const auto& [key, text] : config_entries(c)) s += "# " + key + " = " + text + "\n";
    return s;
  }

  Json json(const RunConfig& c) const {
    Json j;
    j["config"] = config_json(c);
    j["columns"] = columns_;
    Json rows = Json::array();
    for (const auto& row : rows_) rows.push_back(row);
    j["rows"] = rows;
    return j;
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

void emit(const RunConfig& c, const std::string& content) {
  const std::string path = c.out.value_or("-");
  if (path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open output file '" + path + "'");
  f << content;
  if (!f) throw std::runtime_error("failed writing output file '" + path + "'");
}

void emit_table(const RunConfig& c, const Table& t, Format fallback) {
  if (c.format.value_or(fallback) == Format::csv) {
    emit(c, t.csv(c));
  } else {
    emit(c, t.json(c).dump(2) + "\n");
  }
}

Json matrix_json(const CMatrix& m, bool imaginary) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index col = 0; col < m.cols(); ++col) row.push_back(imaginary ? m(r, col).imag() : m(r, col).real());
    rows.push_back(row);
  }
  return rows;
}

Json complex_list_json(const std::vector<Complex>& v, bool imaginary) {
  Json a = Json::array();
  for (Complex z : v) a.push_back(imaginary ? z.imag() : z.real());
  return a;
}

// ---------------------------------------------------------------------------
// Modes

void run_simulate(const RunConfig& c, unsigned workers) {
  const HermitianOperator h = hamiltonian_of(c);
  const EnsembleSeries s = simulate_ensemble(sde_initial(c, h.dim()), h, sde_params(c), workers);
  Table t({"t", "U", "U_se", "V", "V_se"});
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    t.add({s.times[k], s.mean_energy[k], s.se_energy[k], s.mean_variance[k], s.se_variance[k]});
  }
  emit_table(c, t, Format::csv);
}

void run_equilibrium(const RunConfig& c) {
  const HermitianOperator h = hamiltonian_of(c);
  const Spectrum& spec = h.spectrum();
  std::vector<double> betas = c.beta_grid ? *c.beta_grid : std::vector<double>{*c.beta};
  Table t({"beta", "z_rel", "U", "var_total", "C", "identity_residual", "var_classical", "U_von_neumann"});
  for (double beta : betas) {
    const CanonicalResult r = canonical_summary(spec, beta);
    const DensityMatrix vn = von_neumann_density_matrix(h, beta);
    const double u_vn = (h.matrix() * vn.matrix()).trace().real();
    t.add({beta, r.z_rel, r.u, r.var_total, r.c, verify_capacity_identity(spec, beta), r.var_classical, u_vn});
  }
  emit_table(c, t, Format::csv);
}

void run_fp(const RunConfig& c) {
  const double h = c.h.value_or(1.0);
  const std::size_t cells = c.grid.value_or(800);
  const Density1D rho0 = fp_initial(c, cells, h, *c.beta);
  const ThermoSeries s =
      solve(rho0, h, *c.beta, *c.kappa, *c.t_max, c.dt.value_or(0.0), c.record_stride.value_or(1));
  Table t({"t", "S", "U", "dSdt", "dUdt", "production", "residual", "l1_to_equilibrium"});
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    t.add({s.times[k], s.entropy[k], s.energy[k], s.d_entropy[k], s.d_energy[k], s.production[k],
           s.residual[k], s.l1_distance[k]});
  }
  emit_table(c, t, Format::csv);
}

void run_verify(const RunConfig& c, unsigned workers) {
  const HermitianOperator h = hamiltonian_of(c);
  const SdeParams p = sde_params(c);
  const MomentSeries series = run_moment_ensemble(sde_initial(c, h.dim()), h, p, workers);
  const LiouvilleReport report = verify_liouville(series, h, p.beta, p.kappa);

  Json j;
  j["config"] = config_json(c);
  j["summary"] = {{"residual_count", report.residuals.size()},
                  {"fraction_within_3", report.fraction_within_3},
                  {"max_abs_z", report.max_abs_z},
                  {"max_trace", report.max_trace},
                  {"max_hermiticity", report.max_hermiticity},
                  {"max_energy_channel", report.max_energy_channel},
                  {"passed", report.passed()}};
  Json residuals = Json::array();
  for (const NormalizedResidual& r : report.residuals) {
    residuals.push_back({{"t", r.time},
                         {"row", r.row},
                         {"col", r.col},
                         {"part", r.imaginary ? "im" : "re"},
                         {"residual", r.residual},
                         {"error", r.error},
                         {"z", r.z}});
  }
  j["residuals"] = residuals;
  Json snaps = Json::array();
  for (const MomentSnapshot& s : series.snapshots) {
    snaps.push_back({{"t", s.time},
                     {"rho_re", matrix_json(s.rho.matrix(), false)},
                     {"rho_im", matrix_json(s.rho.matrix(), true)}});
  }
  j["snapshots"] = snaps;
  emit(c, j.dump(2) + "\n");
}

void run_sample(const RunConfig& c, unsigned workers) {
  const HermitianOperator h = hamiltonian_of(c);
  const double beta = *c.beta;
  const McOptions mc{.samples = c.samples.value_or(1'000'000), .seed = c.seed.value_or(0), .workers = workers};
  const EquilibriumMoments eq = equilibrium_moments(h, beta, mc);
  const DensityMatrix exact = exact_equilibrium_density_matrix(h, beta);
  const McValue z = partition_function_mc(h.spectrum(), beta, mc);
  const DensityMatrix vn = von_neumann_density_matrix(h, beta);
  const double kappa = c.kappa.value_or(1.0);
  const FixedPointResidual fixed = canonical_fixed_point_residual(h, beta, kappa, mc);

  Json j;
  j["config"] = config_json(c);
  j["samples"] = eq.samples;
  j["z_rel"] = {{"monte_carlo", z.value}, {"std_error", z.std_error}, {"exact", partition_function(h.spectrum(), beta)}};
  j["energy"] = {{"monte_carlo", eq.energy}, {"std_error", eq.energy_se}, {"exact", equilibrium_energy(h.spectrum(), beta)}};
  j["rho"] = {{"re", matrix_json(eq.rho.matrix(), false)},
              {"im", matrix_json(eq.rho.matrix(), true)},
              {"se_re", matrix_json(eq.rho_se, false)},
              {"se_im", matrix_json(eq.rho_se, true)},
              {"exact_re", matrix_json(exact.matrix(), false)},
              {"exact_im", matrix_json(exact.matrix(), true)}};
  j["r2"] = {{"index_order", "a,b,c,d"},
             {"re", complex_list_json(eq.r2.entries(), false)},
             {"im", complex_list_json(eq.r2.entries(), true)},
             {"se_re", complex_list_json(eq.r2_se, false)},
             {"se_im", complex_list_json(eq.r2_se, true)}};
  j["von_neumann"] = {{"re", matrix_json(vn.matrix(), false)}, {"im", matrix_json(vn.matrix(), true)}};
  j["fixed_point"] = {{"kappa", kappa}, {"max_abs_z", fixed.max_abs_z}};
  emit(c, j.dump(2) + "\n");
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool RunConfig::operator==(const RunConfig& o) const {
  const bool same_h = hamiltonian.has_value() == o.hamiltonian.has_value() &&
                      (!hamiltonian || (hamiltonian->rows() == o.hamiltonian->rows() &&
                                        hamiltonian->cols() == o.hamiltonian->cols() &&
                                        *hamiltonian == *o.hamiltonian));
  return same_h && mode == o.mode && spectrum == o.spectrum && beta == o.beta &&
         beta_grid == o.beta_grid && kappa == o.kappa && this->h == o.h && dt == o.dt &&
         steps == o.steps && ensemble == o.ensemble && record_stride == o.record_stride &&
         grid == o.grid && t_max == o.t_max && initial == o.initial && samples == o.samples &&
         seed == o.seed && out == o.out && format == o.format;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "mode", "spectrum", "hamiltonian", "beta",    "beta_grid", "kappa", "h",   "dt",  "steps",
      "ensemble", "record_stride", "grid", "t_max", "initial", "samples", "seed", "out", "format"};
  return keys;
}

void set_value(RunConfig& c, const std::string& key, const std::string& raw, std::size_t line) {
  const std::string value = trim(raw);
  if (key == "mode") {
    const auto it = mode_names().find(value);
    if (it == mode_names().end()) {
      bad_value(key, line, "unknown mode '" + value + "' (simulate, equilibrium, fp, verify-liouville, sample)");
    }
    c.mode = it->second;
  } else if (key == "spectrum") {
    c.spectrum = parse_list(key, value, line);
  } else if (key == "hamiltonian") {
    c.hamiltonian = parse_matrix(key, value, line);
  } else if (key == "beta") {
    c.beta = parse_double(key, value, line);
  } else if (key == "beta_grid") {
    c.beta_grid = parse_list(key, value, line);
  } else if (key == "kappa") {
    c.kappa = parse_double(key, value, line);
  } else if (key == "h") {
    c.h = parse_double(key, value, line);
  } else if (key == "dt") {
    c.dt = parse_double(key, value, line);
  } else if (key == "steps") {
    c.steps = parse_count(key, value, line);
  } else if (key == "ensemble") {
    c.ensemble = parse_count(key, value, line);
  } else if (key == "record_stride") {
    c.record_stride = parse_count(key, value, line);
  } else if (key == "grid") {
    c.grid = parse_count(key, value, line);
  } else if (key == "t_max") {
    c.t_max = parse_double(key, value, line);
  } else if (key == "initial") {
    if (value.empty()) bad_value(key, line, "empty value");
    c.initial = value;
  } else if (key == "samples") {
    c.samples = parse_count(key, value, line);
  } else if (key == "seed") {
    c.seed = parse_count(key, value, line);
  } else if (key == "out") {
    if (value.empty()) bad_value(key, line, "empty value");
    c.out = value;
  } else if (key == "format") {
    if (value == "csv") {
      c.format = Format::csv;
    } else if (value == "json") {
      c.format = Format::json;
    } else {
      bad_value(key, line, "expected csv or json, got '" + value + "'");
    }
  } else {
    std::string where = line > 0 ? "line " + std::to_string(line) + ": " : "";
    throw ConfigError(key, line, where + "unknown key '" + key + "'");
  }
}

void apply_text(RunConfig& c, std::istream& text) {
  std::string raw;
  std::size_t line = 0;
  while (std::getline(text, raw)) {
    ++line;
    const std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", line, "line " + std::to_string(line) + ": expected 'key = value'");
    }
    set_value(c, trim(s.substr(0, eq)), s.substr(eq + 1), line);
  }
}

RunConfig parse_config(const std::optional<std::string>& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig c;
  if (path) {
    std::ifstream f(*path);
    if (!f) throw ConfigError("config", 0, "cannot read config file '" + *path + "'");
    apply_text(c, f);
  }
  for (const auto& [key, value] : overrides) set_value(c, key, value);
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  if (!c.mode) throw ConfigError("mode", 0, "missing required key 'mode'");
  const Mode mode = *c.mode;
  switch (mode) {
    case Mode::simulate:
    case Mode::verify_liouville: {
      require_operator(c);
      require(c.beta, "beta", mode);
      require(c.kappa, "kappa", mode);
      require(c.dt, "dt", mode);
      require(c.steps, "steps", mode);
      require(c.ensemble, "ensemble", mode);
      const SdeParams p = sde_params(c);
      p.validate(dim_of(c));
      if (p.ensemble_size < 2) throw GuardError("ensemble", "ensemble must be at least 2");
      if (mode == Mode::verify_liouville && p.steps / p.record_stride < 2) {
        throw GuardError("steps", "verify-liouville needs at least 3 snapshots (steps / record_stride >= 2)");
      }
      sde_initial(c, dim_of(c));
      require_format(c, mode == Mode::simulate);
      break;
    }
    case Mode::equilibrium: {
      require_operator(c);
      if (!c.beta && !c.beta_grid) throw ConfigError("beta_grid", 0, "missing required key 'beta_grid' (or 'beta')");
      const std::vector<double> betas = c.beta_grid ? *c.beta_grid : std::vector<double>{*c.beta};
      for (double b : betas) {
        if (!(b > 0.0)) {
          throw GuardError(c.beta_grid ? "beta_grid" : "beta", "equilibrium needs beta > 0 (heat capacity is dC/dT at T = 1/beta)");
        }
      }
      break;
    }
    case Mode::fp: {
      const double beta = require(c.beta, "beta", mode);
      const double kappa = require(c.kappa, "kappa", mode);
      const double t_max = require(c.t_max, "t_max", mode);
      if (beta < 0.0) throw GuardError("beta", "beta must be >= 0");
      if (!(kappa > 0.0)) throw GuardError("kappa", "fp needs kappa > 0");
      if (t_max < 0.0) throw GuardError("t_max", "t_max must be >= 0");
      const std::size_t cells = c.grid.value_or(800);
      if (cells < 3) throw GuardError("grid", "grid needs at least 3 cells");
      if (c.record_stride && *c.record_stride == 0) throw GuardError("record_stride", "record_stride must be positive");
      const FokkerPlanckCP1 solver(cells, c.h.value_or(1.0), beta, kappa);
      if (c.dt && (*c.dt <= 0.0 || *c.dt > solver.max_stable_dt())) {
        throw GuardError("dt", "fp dt must lie in (0, " + format_double(solver.max_stable_dt()) +
                                   "] (positivity bound 0.4 du^2 / (kappa^2 max flux coefficient))");
      }
      fp_initial(c, cells, c.h.value_or(1.0), beta);
      break;
    }
    case Mode::sample: {
      require_operator(c);
      const double beta = require(c.beta, "beta", mode);
      if (beta < 0.0) throw GuardError("beta", "beta must be >= 0");
      if (c.samples && *c.samples < 2) throw GuardError("samples", "samples must be at least 2");
      if (c.kappa && !(*c.kappa >= 0.0)) throw GuardError("kappa", "kappa must be >= 0");
      require_format(c, false);
      break;
    }
  }
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> e;
  auto num = [&](const char* key, const std::optional<double>& v) {
    if (v) e.emplace_back(key, format_double(*v));
  };
  auto count = [&](const char* key, const std::optional<std::uint64_t>& v) {
    if (v) e.emplace_back(key, std::to_string(*v));
  };
  if (c.mode) e.emplace_back("mode", mode_text(*c.mode));
  if (c.spectrum) e.emplace_back("spectrum", list_text(*c.spectrum));
  if (c.hamiltonian) e.emplace_back("hamiltonian", matrix_text(*c.hamiltonian));
  num("beta", c.beta);
  if (c.beta_grid) e.emplace_back("beta_grid", list_text(*c.beta_grid));
  num("kappa", c.kappa);
  num("h", c.h);
  num("dt", c.dt);
  count("steps", c.steps);
  count("ensemble", c.ensemble);
  count("record_stride", c.record_stride);
  count("grid", c.grid);
  num("t_max", c.t_max);
  if (c.initial) e.emplace_back("initial", *c.initial);
  count("samples", c.samples);
  count("seed", c.seed);
  if (c.out) e.emplace_back("out", *c.out);
  if (c.format) e.emplace_back("format", *c.format == Format::csv ? "csv" : "json");
  return e;
}

RunConfig config_from_output(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read '" + path + "'");
  std::stringstream buffer;
  buffer << f.rdbuf();
  const std::string text = buffer.str();
  RunConfig c;
  if (!text.empty() && text.front() == '{') {
    const Json j = Json::parse(text);
    for (const auto& [key, value] : j.at("config").items()) set_value(c, key, json_value_text(key, value));
    return c;
  }
  const auto marker = text.find("# qtherm config\n");
  if (marker == std::string::npos) throw std::runtime_error("no embedded config in '" + path + "'");
  std::istringstream block(text.substr(marker + 16));
  std::string line;
  std::stringstream cfg;
  while (std::getline(block, line)) {
    if (line.rfind("# ", 0) == 0) cfg << line.substr(2) << "\n";
  }
  apply_text(c, cfg);
  return c;
}

void run(const RunConfig& c, unsigned workers) {
  if (workers == 0) workers = default_workers();
  switch (*c.mode) {
    case Mode::simulate: run_simulate(c, workers); break;
    case Mode::equilibrium: run_equilibrium(c); break;
    case Mode::fp: run_fp(c); break;
    case Mode::verify_liouville: run_verify(c, workers); break;
    case Mode::sample: run_sample(c, workers); break;
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"qtherm: stochastic thermalisation of quantum states"};
  app.set_help_flag("--help", "Print this help and exit");
  app.set_version_flag("--version", "qtherm 0.1.0");
  std::optional<std::string> config_path;
  unsigned threads = 0;
  app.add_option("--config", config_path, "Config file of 'key = value' lines");
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency); not part of the config");

  struct Flag {
    const char* flag;
    const char* key;
    const char* help;
  };
  const std::vector<Flag> flags{
      {"--mode", "mode", "simulate | equilibrium | fp | verify-liouville | sample"},
      {"--spectrum", "spectrum", "Comma-separated energy levels"},
      {"--hamiltonian", "hamiltonian", "Hermitian matrix as a JSON array; entries real or [re, im]"},
      {"--beta", "beta", "Inverse temperature"},
      {"--beta-grid", "beta_grid", "Comma-separated inverse temperatures (equilibrium)"},
      {"--kappa", "kappa", "Noise strength"},
      {"--h", "h", "Level splitting half-width for fp"},
      {"--dt", "dt", "Time step"},
      {"--steps", "steps", "Number of SDE steps"},
      {"--ensemble", "ensemble", "Number of trajectories"},
      {"--record-stride", "record_stride", "Record every n steps"},
      {"--grid", "grid", "Fokker-Planck cells"},
      {"--t-max", "t_max", "Fokker-Planck final time"},
      {"--initial", "initial", "Initial condition (see README)"},
      {"--samples", "samples", "Monte Carlo samples"},
      {"--seed", "seed", "Master seed"},
      {"--out", "out", "Output path ('-' for stdout)"},
      {"--format", "format", "csv | json"},
  };
  std::vector<std::optional<std::string>> values(flags.size());
  for (std::size_t i = 0; i < flags.size(); ++i) app.add_option(flags[i].flag, values[i], flags[i].help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunConfig config;
  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (values[i]) overrides.emplace_back(flags[i].key, *values[i]);
    }
    config = parse_config(config_path, overrides);
  } catch (const GuardError& e) {
    std::cerr << "qtherm: invalid " << e.parameter() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "qtherm: " << e.what() << "\n";
    return 2;
  }

  try {
    run(config, threads);
  } catch (const std::exception& e) {
    std::cerr << "qtherm: run failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace qtherm::cli
