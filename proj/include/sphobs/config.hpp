#pragma once

// Flat key = value experiment configuration with flag overrides.

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sphobs/errors.hpp"
#include "sphobs/radon.hpp"
#include "sphobs/sphere.hpp"

namespace sphobs {

/// Configuration error naming the offending key and its source line (0 for flags).
class ConfigError : public PreconditionError {
 public:
  ConfigError(const std::string& key, int line, const std::string& msg)
      : PreconditionError(describe(key, line, msg)), key_(key), line_(line) {}

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  static std::string describe(const std::string& key, int line, const std::string& msg) {
    std::string where = line > 0 ? "line " + std::to_string(line) : "command line";
    return "config key '" + key + "' (" + where + "): " + msg;
  }
  std::string key_;
  int line_;
};

enum class KeyType { Real, Integer, String, Region, Bool };

struct KeySpec {
  const char* name;
  KeyType type;
  const char* help;
};

inline const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"alpha", KeyType::Real, "fractional order alpha > 0"},
      {"h", KeyType::Real, "semiclassical parameter in (0, 1]"},
      {"T", KeyType::Real, "time horizon (<= 0 in vgcc: derived from the slowest orbit)"},
      {"T_h", KeyType::Real, "long-time horizon for the windowed quotient (0 = off)"},
      {"T_factor", KeyType::Real, "vgcc horizon as a multiple of the slowest sampled period"},
      {"dt", KeyType::Real, "time step"},
      {"ds", KeyType::Real, "flow step on geodesic space"},
      {"lmax", KeyType::Integer, "harmonic bandwidth"},
      {"samples", KeyType::Integer, "number of lattice samples"},
      {"separatrix_samples", KeyType::Integer, "explicit separatrix starts per circle"},
      {"n_t", KeyType::Integer, "circle quadrature points"},
      {"tol", KeyType::Real, "orbit classification tolerance"},
      {"degeneracy_gap", KeyType::Real, "eigenvalue gap treated as degenerate"},
      {"steepness", KeyType::Real, "cutoff transition steepness"},
      {"generator", KeyType::String, "fractional | halfwave"},
      {"a", KeyType::Real, "triaxial form coefficient"},
      {"b", KeyType::Real, "triaxial form coefficient"},
      {"c", KeyType::Real, "triaxial form coefficient"},
      {"eps", KeyType::Real, "potential scale (default depends on the subcommand)"},
      {"potential", KeyType::String, "coefficient JSON of the potential"},
      {"region", KeyType::Region, "caps 'cx,cy,cz,r;...'"},
      {"wavepacket", KeyType::String, "initial wave packet 'x0;xi0', each 'x,y,z'"},
      {"init", KeyType::String, "coefficient JSON of the initial state"},
      {"input", KeyType::String, "input coefficient JSON"},
      {"invert", KeyType::Bool, "radon: invert on even functions instead of transforming"},
      {"trajectory", KeyType::String, "vgcc: also dump the flow from this start 'x,y,z'"},
      {"record_every", KeyType::Integer, "trajectory dump stride in steps"},
      {"seed", KeyType::Integer, "random seed"},
      {"out", KeyType::String, "output directory"},
  };
  return keys;
}

inline const KeySpec* find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (name == k.name) return &k;
  return nullptr;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    return std::nullopt;
  }
  if (pos != s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_integer(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  long long v;
  try {
    v = std::stoll(s, &pos);
  } catch (...) {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;
  return v;
}

/// Parses "x,y,z" into a unit vector.
inline UnitVec3 parse_unit_vector(const std::string& s) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) throw PreconditionError("expected three comma-separated numbers, got '" + s + "'");
  double v[3];
  for (int i = 0; i < 3; ++i) {
    const auto x = parse_real(parts[i]);
    if (!x) throw PreconditionError("not a number: '" + parts[i] + "'");
    v[i] = *x;
  }
  return UnitVec3(v[0], v[1], v[2]);
}

/// Parses "cx,cy,cz,r;cx,cy,cz,r;..." into caps.
inline Region parse_region(const std::string& s) {
  std::vector<Cap> caps;
  for (const std::string& part : split(s, ';')) {
    if (part.empty()) continue;
    const auto f = split(part, ',');
    if (f.size() != 4) throw PreconditionError("cap '" + part + "' must have four fields cx,cy,cz,r");
    double v[4];
    for (int i = 0; i < 4; ++i) {
      const auto x = parse_real(f[i]);
      if (!x) throw PreconditionError("cap '" + part + "': not a number: '" + f[i] + "'");
      v[i] = *x;
    }
    caps.emplace_back(UnitVec3(v[0], v[1], v[2]), v[3]);
  }
  if (caps.empty()) throw PreconditionError("region must contain at least one cap");
  return Region(std::move(caps));
}

/// Parses "x0;xi0" (two vectors) into a phase point.
inline PhasePoint parse_phase_point(const std::string& s) {
  const auto parts = split(s, ';');
  if (parts.size() != 2) throw PreconditionError("wave packet must be 'x0;xi0', got '" + s + "'");
  return PhasePoint(parse_unit_vector(parts[0]), parse_unit_vector(parts[1]).vec());
}

/// A raw value together with where it came from.
struct ConfigEntry {
  std::string value;
  int line = 0;  ///< 0 for command-line flags
};

/// Effective configuration: validated raw entries with typed accessors.
class ExperimentConfig {
 public:
  std::string subcommand;

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }
  double real(const std::string& key) const {
    const ConfigEntry& e = entry(key);
    return *parse_real(e.value);
  }
  long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }
  long long integer(const std::string& key) const { return *parse_integer(entry(key).value); }
  std::string string(const std::string& key, const std::string& fallback) const { return has(key) ? entry(key).value : fallback; }
  std::string string(const std::string& key) const { return entry(key).value; }
  bool flag(const std::string& key, bool fallback) const { return has(key) ? parse_bool(entry(key).value).value() : fallback; }
  Region region() const { return parse_region(entry("region").value); }
  int line_of(const std::string& key) const { return has(key) ? entry(key).line : -1; }

  /// Triaxial form when a, b and c are all present.
  std::optional<TriaxialForm> triaxial() const {
    if (!has("a") && !has("b") && !has("c")) return std::nullopt;
    for (const char* k : {"a", "b", "c"})
      if (!has(k)) throw ConfigError(k, 0, "triaxial form needs all of a, b, c");
    return TriaxialForm(real("a"), real("b"), real("c"));
  }

  /// Sorted key = value listing of the effective configuration.
  std::string echo() const {
    std::ostringstream os;
    os << "# effective configuration\n";
    os << "subcommand = " << subcommand << "\n";
    for (const auto& [k, e] : entries_) os << k << " = " << e.value << "\n";
    return os.str();
  }

  void set(const std::string& key, ConfigEntry e) { entries_[key] = std::move(e); }
  const std::map<std::string, ConfigEntry>& entries() const { return entries_; }

  static std::optional<bool> parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    return std::nullopt;
  }

 private:
  const ConfigEntry& entry(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(key, 0, "required key is missing");
    return it->second;
  }
  std::map<std::string, ConfigEntry> entries_;
};

/// Reads "key = value" lines; '#' starts a comment. Unknown keys and malformed lines are rejected.
inline std::map<std::string, ConfigEntry> parse_config_text(const std::string& text) {
  std::map<std::string, ConfigEntry> out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(s, line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (!find_key(key)) throw ConfigError(key, line, "unknown key");
    if (out.count(key)) throw ConfigError(key, line, "duplicate key (first set on line " + std::to_string(out[key].line) + ")");
    out[key] = {value, line};
  }
  return out;
}

/// Type and constraint checks for every present key.
inline void validate_config(const ExperimentConfig& cfg) {
  for (const auto& [key, e] : cfg.entries()) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError(key, e.line, "unknown key");
    switch (spec->type) {
      case KeyType::Real:
        if (!parse_real(e.value)) throw ConfigError(key, e.line, "expected a number, got '" + e.value + "'");
        break;
      case KeyType::Integer:
        if (!parse_integer(e.value)) throw ConfigError(key, e.line, "expected an integer, got '" + e.value + "'");
        break;
      case KeyType::Bool:
        if (!ExperimentConfig::parse_bool(e.value)) throw ConfigError(key, e.line, "expected true or false, got '" + e.value + "'");
        break;
      case KeyType::Region:
        try {
          parse_region(e.value);
        } catch (const std::exception& ex) {
          throw ConfigError(key, e.line, ex.what());
        }
        break;
      case KeyType::String:
        if (e.value.empty()) throw ConfigError(key, e.line, "empty value");
        break;
    }
  }
  auto require = [&](const char* key, bool ok, const char* what) {
    if (cfg.has(key) && !ok) throw ConfigError(key, cfg.line_of(key), what);
  };
  require("alpha", cfg.real("alpha", 1.0) > 0.0, "requires alpha > 0");
  require("h", cfg.real("h", 0.5) > 0.0 && cfg.real("h", 0.5) <= 1.0, "requires 0 < h <= 1");
  require("dt", cfg.real("dt", 1.0) > 0.0, "requires dt > 0");
  require("ds", cfg.real("ds", 1.0) > 0.0, "requires ds > 0");
  require("T_h", cfg.real("T_h", 0.0) >= 0.0, "requires T_h >= 0");
  require("T_factor", cfg.real("T_factor", 1.0) > 0.0, "requires T_factor > 0");
  require("lmax", cfg.integer("lmax", 0) >= 0, "requires lmax >= 0");
  require("samples", cfg.integer("samples", 1) >= 1, "requires samples >= 1");
  require("separatrix_samples", cfg.integer("separatrix_samples", 0) >= 0, "requires separatrix_samples >= 0");
  require("n_t", cfg.integer("n_t", 16) >= 16, "requires n_t >= 16");
  require("record_every", cfg.integer("record_every", 1) >= 1, "requires record_every >= 1");
  require("tol", cfg.real("tol", 1.0) > 0.0, "requires tol > 0");
  require("degeneracy_gap", cfg.real("degeneracy_gap", 1.0) > 0.0, "requires degeneracy_gap > 0");
  require("steepness", cfg.real("steepness", 1.0) > 0.0, "requires steepness > 0");
  require("eps", std::isfinite(cfg.real("eps", 1.0)), "requires a finite scale");
  const std::string gen = cfg.string("generator", "fractional");
  require("generator", gen == "fractional" || gen == "halfwave", "must be 'fractional' or 'halfwave'");
  if (cfg.has("dt") && cfg.has("T") && cfg.real("T") > 0.0 && cfg.real("dt") > cfg.real("T"))
    throw ConfigError("dt", cfg.line_of("dt"), "requires dt <= T");
  if (cfg.has("a") || cfg.has("b") || cfg.has("c")) {
    for (const char* k : {"a", "b", "c"})
      if (!cfg.has(k)) throw ConfigError(k, 0, "triaxial form needs all of a, b, c");
    const double a = cfg.real("a"), b = cfg.real("b"), c = cfg.real("c");
    if (!(0.0 < a && a < b && b < c)) throw ConfigError(cfg.line_of("a") >= cfg.line_of("c") ? "a" : "c",
                                                        std::max({cfg.line_of("a"), cfg.line_of("b"), cfg.line_of("c")}),
                                                        "requires 0<a<b<c");
  }
  if (cfg.has("wavepacket")) {
    try {
      parse_phase_point(cfg.string("wavepacket"));
    } catch (const std::exception& ex) {
      throw ConfigError("wavepacket", cfg.line_of("wavepacket"), ex.what());
    }
  }
  if (cfg.has("trajectory")) {
    try {
      parse_unit_vector(cfg.string("trajectory"));
    } catch (const std::exception& ex) {
      throw ConfigError("trajectory", cfg.line_of("trajectory"), ex.what());
    }
  }
}

/// File entries (if any) overridden by flag entries, then validated.
inline ExperimentConfig parse_config(const std::string& subcommand, const std::optional<std::string>& file_text,
                                     const std::map<std::string, std::string>& overrides) {
  ExperimentConfig cfg;
  cfg.subcommand = subcommand;
  if (file_text)
    for (auto& [k, e] : parse_config_text(*file_text)) cfg.set(k, e);
  for (const auto& [k, v] : overrides) {
    if (!find_key(k)) throw ConfigError(k, 0, "unknown key");
    cfg.set(k, {trim(v), 0});
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace sphobs
