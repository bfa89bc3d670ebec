#pragma once

// Coefficient JSON, CSV tables and atomic file output.

#include <json.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sphobs/errors.hpp"
#include "sphobs/harmonics.hpp"

namespace sphobs {

inline constexpr const char* kVersion = "sphobs 0.1.0";

/// Writes via a temporary sibling file and rename, so readers never see partial output.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Shortest round-trip decimal form of a double.
inline std::string format_number(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// JSON array of {l, m, re, im}; entries with |c| <= drop_below are omitted.
inline nlohmann::json coeffs_to_json(const HarmonicCoeffs& c, double drop_below = -1.0) {
  nlohmann::json arr = nlohmann::json::array();
  for (int l = 0; l <= c.lmax(); ++l)
    for (int m = -l; m <= l; ++m) {
      if (std::abs(c(l, m)) <= drop_below) continue;
      arr.push_back({{"l", l}, {"m", m}, {"re", c(l, m).real()}, {"im", c(l, m).imag()}});
    }
  return arr;
}

/// Inverse of coeffs_to_json; bandwidth is the largest l present unless given.
inline HarmonicCoeffs coeffs_from_json(const nlohmann::json& j, int lmax = -1) {
  if (!j.is_array()) throw PreconditionError("coefficient JSON must be an array of {l, m, re, im}");
  int lmax_seen = 0;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("l") || !e.contains("m") || !e.contains("re") || !e.contains("im"))
      throw PreconditionError("coefficient record must have fields l, m, re, im");
    if (!e["l"].is_number_integer() || !e["m"].is_number_integer() || !e["re"].is_number() || !e["im"].is_number())
      throw PreconditionError("coefficient record has a field of the wrong type");
    const int l = e["l"].get<int>(), m = e["m"].get<int>();
    if (l < 0 || std::abs(m) > l) throw PreconditionError("coefficient record has invalid (l, m) = (" + std::to_string(l) + ", " + std::to_string(m) + ")");
    lmax_seen = std::max(lmax_seen, l);
  }
  if (lmax >= 0 && lmax_seen > lmax) throw PreconditionError("coefficient file exceeds the requested bandwidth");
  HarmonicCoeffs c(lmax >= 0 ? lmax : lmax_seen);
  std::set<std::pair<int, int>> seen;
  for (const auto& e : j) {
    const int l = e["l"].get<int>(), m = e["m"].get<int>();
    if (!seen.insert({l, m}).second) throw PreconditionError("duplicate coefficient record (" + std::to_string(l) + ", " + std::to_string(m) + ")");
    c(l, m) = cplx(e["re"].get<double>(), e["im"].get<double>());
  }
  if (!c.all_finite()) throw PreconditionError("coefficient file contains non-finite values");
  return c;
}

inline HarmonicCoeffs read_coeffs(const std::filesystem::path& path, int lmax = -1) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw PreconditionError(path.string() + ": invalid JSON: " + e.what());
  }
  return coeffs_from_json(j, lmax);
}

inline void write_coeffs(const std::filesystem::path& path, const HarmonicCoeffs& c, double drop_below = -1.0) {
  write_file_atomic(path, coeffs_to_json(c, drop_below).dump(2) + "\n");
}

/// In-memory CSV table with a header row.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  class Row {
   public:
    explicit Row(CsvTable& t) : t_(t), pending_(std::uncaught_exceptions()) {}
    Row& operator<<(double v) { return cell(format_number(v)); }
    Row& operator<<(int v) { return cell(std::to_string(v)); }
    Row& operator<<(long long v) { return cell(std::to_string(v)); }
    Row& operator<<(std::size_t v) { return cell(std::to_string(v)); }
    Row& operator<<(const std::string& v) { return cell(v); }
    Row& operator<<(const char* v) { return cell(v); }
    /// Commits the row; a width mismatch throws unless the stack is already unwinding.
    ~Row() noexcept(false) {
      if (std::uncaught_exceptions() == pending_) t_.finish(cells_);
    }
    Row(const Row&) = delete;
    Row& operator=(const Row&) = delete;

   private:
    Row& cell(std::string s) {
      cells_.push_back(std::move(s));
      return *this;
    }
    CsvTable& t_;
    int pending_;
    std::vector<std::string> cells_;
  };

  Row row() { return Row(*this); }
  std::size_t rows() const { return n_rows_; }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
    out += "\n";
    return out + body_.str();
  }

  void write(const std::filesystem::path& path) const { write_file_atomic(path, str()); }

 private:
  void finish(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) throw std::logic_error("CsvTable: row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) body_ << (i ? "," : "") << cells[i];
    body_ << "\n";
    ++n_rows_;
  }

  std::vector<std::string> header_;
  std::ostringstream body_;
  std::size_t n_rows_ = 0;
};

/// Values on a grid as CSV theta, phi, re, im.
inline CsvTable grid_values_table(const std::vector<cplx>& values, const QuadGrid& grid) {
  if (values.size() != grid.size()) throw PreconditionError("grid_values_table: value count does not match grid");
  CsvTable t({"theta", "phi", "re", "im"});
  for (int j = 0; j < grid.n_theta(); ++j)
    for (int k = 0; k < grid.n_phi(); ++k) {
      const cplx v = values[grid.index(j, k)];
      t.row() << grid.theta(j) << grid.phi(k) << v.real() << v.imag();
    }
  return t;
}

}  // namespace sphobs
