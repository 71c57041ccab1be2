#pragma once

// CSV ingestion and output, and JSON serialization of fit reports and series.

#include <json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pgc/diagnostics.hpp"
#include "pgc/estimation.hpp"
#include "pgc/qp_tail.hpp"

namespace pgc {

struct Dataset {
  std::vector<std::string> names;
  Matrix values;                     // n x d, NaN where a cell is missing
  std::vector<std::size_t> missing;  // per column: empty, NA or non-numeric cells
  std::string source;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index d() const { return values.cols(); }

  /// Column by name, or by 1-based position when `key` is an integer.
  int column(const std::string& key) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == key) return static_cast<int>(i);
    int pos = 0;
    const auto res = std::from_chars(key.data(), key.data() + key.size(), pos);
    if (res.ec == std::errc() && res.ptr == key.data() + key.size() && pos >= 1 &&
        pos <= static_cast<int>(names.size())) {
      return pos - 1;
    }
    fail(ErrorCode::UsageError, "no column '" + key + "' in " + source);
  }

  std::vector<double> column_values(int c) const {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      if (!std::isnan(values(i, c))) out.push_back(values(i, c));
    return out;
  }
};

struct CsvOptions {
  char delimiter = ',';
  bool header = true;
  std::vector<std::string> na_tokens = {"", "NA", "N/A", "NaN", "nan", "null"};
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delimiter) {
      out.push_back(field);
      field.clear();
    } else {
      field += ch;
    }
  }
  out.push_back(field);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline Dataset parse_csv(std::istream& in, const std::string& source, const CsvOptions& options = {}) {
  Dataset ds;
  ds.source = source;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  auto missing_token = [&](const std::string& s) {
    for (const auto& t : options.na_tokens)
      if (s == t) return true;
    return false;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_line(line, options.delimiter);
    if (width == 0) {
      width = fields.size();
      ds.missing.assign(width, 0);
      if (options.header) {
        std::set<std::string> seen;
        for (auto& f : fields) {
          f = detail::trim(f);
          if (f.empty() || !seen.insert(f).second) {
            fail(ErrorCode::ParseError, source + ":" + std::to_string(line_no) +
                                            ": header names must be unique and non-empty");
          }
          ds.names.push_back(f);
        }
        continue;
      }
      for (std::size_t c = 0; c < width; ++c) ds.names.push_back("c" + std::to_string(c + 1));
    }
    if (fields.size() != width) {
      fail(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": expected " +
                                      std::to_string(width) + " fields, found " +
                                      std::to_string(fields.size()));
    }
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      const std::string cell = detail::trim(fields[c]);
      double v = std::numeric_limits<double>::quiet_NaN();
      if (!missing_token(cell)) {
        const char* first = cell.data();
        if (*first == '+') ++first;
        const auto res = std::from_chars(first, cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
          v = std::numeric_limits<double>::quiet_NaN();
        }
      }
      if (std::isnan(v)) ++ds.missing[c];
      row[c] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::EmptyData, source + ": no data rows");
  ds.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < width; ++c)
      ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  return ds;
}

inline Dataset load_csv(const std::string& path, const CsvOptions& options = {}) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  return parse_csv(in, path, options);
}

/// Shortest representation that reads back to the same double; NA for NaN.
inline std::string format_shortest(double v) {
  if (std::isnan(v)) return "NA";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// v rounded to 12 significant digits.
inline double round12(double v) {
  if (!std::isfinite(v)) return v;
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.12g", v);
  return std::strtod(buf.data(), nullptr);
}

inline void write_csv(std::ostream& out, const std::vector<std::string>& names, const Matrix& values,
                      char delimiter = ',') {
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? std::string(1, delimiter) : "") << names[c];
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out << delimiter;
      out << format_shortest(values(i, c));
    }
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const std::vector<std::string>& names, const Matrix& values,
                      char delimiter = ',') {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  write_csv(out, names, values, delimiter);
  if (!out) fail(ErrorCode::IoError, "write to '" + path + "' failed");
}

/// JSON number at 12 significant digits; null for NaN or infinities.
inline json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round12(v);
}

inline json json_interval(const Interval& iv) { return json::array({json_number(iv.lo), json_number(iv.hi)}); }

inline json json_matrix(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(json_number(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

inline json tail_fit_json(const TailFit& f) {
  return {{"k", f.k},
          {"hill", json_number(f.hill)},
          {"index", json_number(f.index)},
          {"se", json_number(f.se_index)},
          {"ci", json_interval(f.ci)},
          {"n_used", f.n_used},
          {"n_dropped", f.n_dropped}};
}

inline json report_json(const FitReport& report, const std::vector<std::string>& names = {}) {
  auto name_of = [&](int c) {
    return c < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(c)] : "c" + std::to_string(c + 1);
  };
  json margins = json::array();
  for (const auto& m : report.margins) {
    json entry = {{"col", m.column}, {"name", name_of(m.column)}, {"n_missing", m.n_missing}};
    if (m.fit) {
      entry["k"] = m.fit->k;
      entry["alpha"] = json_number(m.fit->index);
      entry["se"] = json_number(m.fit->se_index);
      entry["ci"] = json_interval(m.fit->ci);
      entry["theta"] = json_number(m.theta);
      entry["n_used"] = m.fit->n_used;
      entry["n_dropped"] = m.fit->n_dropped;
    } else {
      entry["error"] = std::string(to_string(*m.error));
      entry["message"] = m.message;
    }
    margins.push_back(entry);
  }
  json pairs = json::array();
  for (const auto& p : report.pairs) {
    json entry = {{"j", p.j}, {"l", p.l}, {"n_complete", p.n_complete}};
    if (p.error) {
      entry["error"] = std::string(to_string(*p.error));
      entry["message"] = p.message;
    } else {
      entry["k"] = p.gamma_fit->k;
      entry["gamma"] = json_number(p.gamma_fit->index);
      entry["ci"] = json_interval(p.gamma_fit->ci);
      entry["rho"] = json_number(p.rho_hat);
      entry["rho_ci"] = p.rho_ci ? json_interval(*p.rho_ci) : json(nullptr);
      entry["nu"] = p.rho_ci ? json_number(p.nu) : json(nullptr);
      entry["regime"] = std::string(regime_name(p.regime));
      entry["clamped"] = p.clamped;
      entry["near_boundary"] = p.near_boundary;
    }
    pairs.push_back(entry);
  }
  return {{"n", report.n},
          {"d", report.d},
          {"level", json_number(report.level)},
          {"k_policy", report.k_policy.describe()},
          {"margins", margins},
          {"pairs", pairs},
          {"sigma_raw", json_matrix(report.sigma_raw)},
          {"sigma_psd", json_matrix(report.sigma_psd)},
          {"sigma_psd_changed", report.psd_changed}};
}

inline json qp_json(const QpSolution& qp) {
  auto one_based = [](const IndexSet& s) {
    json a = json::array();
    for (int i : s) a.push_back(i + 1);
    return a;
  };
  json kappa = json::array();
  for (Eigen::Index i = 0; i < qp.kappa.size(); ++i) kappa.push_back(json_number(qp.kappa(i)));
  json h = json::array();
  for (Eigen::Index i = 0; i < qp.h.size(); ++i) h.push_back(json_number(qp.h(i)));
  return {{"gamma", json_number(qp.gamma)},
          {"active_set", one_based(qp.active)},
          {"complement", one_based(qp.inactive)},
          {"kappa", kappa},
          {"h", h},
          {"delta", json_number(qp.delta_exp)}};
}

inline json tail_asymptotic_json(const TailAsymptotic& a) {
  json exps = json::array();
  for (Eigen::Index i = 0; i < a.exponents.size(); ++i) exps.push_back(json_number(a.exponents(i)));
  json active = json::array();
  for (int i : a.active) active.push_back(i + 1);
  return {{"gamma", json_number(a.gamma)},
          {"log_power", json_number(a.log_power)},
          {"psi", json_number(a.psi)},
          {"exponents", exps},
          {"active_set", active},
          {"orthant_probability", json_number(a.orthant_probability)},
          {"orthant_standard_error", json_number(a.orthant_standard_error)}};
}

/// CSV with columns x, y, lo, hi, then any extra named columns.
inline void write_series_csv(std::ostream& out, const SeriesWithBands& s,
                             const std::vector<std::pair<std::string, std::vector<double>>>& extra = {}) {
  out << "x,y,lo,hi";
  for (const auto& [name, values] : extra) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << format_shortest(s.x[i]) << ',' << format_shortest(s.y[i]) << ',' << format_shortest(s.lo[i]) << ','
        << format_shortest(s.hi[i]);
    for (const auto& [name, values] : extra) out << ',' << format_shortest(values[i]);
    out << '\n';
  }
}

inline json series_sidecar_json(const SeriesWithBands& s) {
  json flagged = json::array();
  for (std::size_t i = 0; i < s.flags.size(); ++i) {
    if (!s.flags[i].empty()) flagged.push_back({{"x", json_number(s.x[i])}, {"flag", s.flags[i]}});
  }
  return {{"label", s.label}, {"method", s.method}, {"level", json_number(s.level)},
          {"points", s.size()}, {"columns", json::array({"x", "y", "lo", "hi"})}, {"flags", flagged}};
}

}  // namespace pgc
