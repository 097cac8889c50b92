#pragma once

// Unbalanced longitudinal data: per-subject sequences of (time, y, x).
// CSV ingestion uses the long format, one row per observation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "factorcop/errors.hpp"

namespace factorcop {

enum class ResponseFamily { gamma_log, normal_identity, binary_probit, ordinal_probit };

struct ResponseKind {
  ResponseFamily family = ResponseFamily::normal_identity;
  int categories = 0;  // K: 2 for binary, >= 2 for ordinal, 0 for continuous

  static ResponseKind gamma() { return {ResponseFamily::gamma_log, 0}; }
  static ResponseKind normal() { return {ResponseFamily::normal_identity, 0}; }
  static ResponseKind binary() { return {ResponseFamily::binary_probit, 2}; }
  static ResponseKind ordinal(int k) {
    if (k < 2) throw DomainError("ordinal response needs K >= 2 categories");
    return {ResponseFamily::ordinal_probit, k};
  }

  bool discrete() const {
    return family == ResponseFamily::binary_probit || family == ResponseFamily::ordinal_probit;
  }
  /// The ordinal model fixes the intercept at zero for identifiability.
  bool has_intercept() const { return family != ResponseFamily::ordinal_probit; }
  bool has_dispersion() const { return !discrete(); }
  /// Number of free thresholds (binary fixes its single threshold at 0).
  int n_thresholds() const { return family == ResponseFamily::ordinal_probit ? categories - 1 : 0; }

  /// Category index 1..K for a response code.
  int category(double y) const {
    return family == ResponseFamily::binary_probit ? static_cast<int>(y) + 1 : static_cast<int>(y);
  }

  bool operator==(const ResponseKind&) const = default;
};

inline std::string to_string(const ResponseKind& k) {
  switch (k.family) {
    case ResponseFamily::gamma_log: return "gamma";
    case ResponseFamily::normal_identity: return "normal";
    case ResponseFamily::binary_probit: return "binary";
    case ResponseFamily::ordinal_probit: return "ordinal";
  }
  return "?";
}

inline ResponseKind response_kind_from_string(std::string_view s, int k = 0) {
  if (s == "gamma") return ResponseKind::gamma();
  if (s == "normal") return ResponseKind::normal();
  if (s == "binary") return ResponseKind::binary();
  if (s == "ordinal") return ResponseKind::ordinal(k);
  throw DomainError("unknown response family '" + std::string(s) + "'");
}

struct Observation {
  double time = 0.0;
  double y = 0.0;
  std::vector<double> covariates;  // includes the intercept column when the family has one

  bool operator==(const Observation&) const = default;
};

struct Subject {
  std::string id;
  std::vector<Observation> observations;

  bool operator==(const Subject&) const = default;
};

struct LongitudinalDataset {
  std::vector<Subject> subjects;
  ResponseKind kind;
  std::vector<std::string> covariate_names;

  std::size_t n_subjects() const { return subjects.size(); }
  std::size_t n_covariates() const { return covariate_names.size(); }
  std::size_t n_observations() const {
    std::size_t n = 0;
    for (const auto& s : subjects) n += s.observations.size();
    return n;
  }

  /// Checks every invariant; throws DataError/DomainError on violation.
  void validate() const {
    if (subjects.empty()) throw DataError("empty dataset");
    for (const auto& s : subjects) {
      if (s.observations.empty()) throw DataError("subject '" + s.id + "' has no observations");
      for (std::size_t j = 0; j < s.observations.size(); ++j) {
        const auto& o = s.observations[j];
        if (o.covariates.size() != covariate_names.size())
          throw DataError("subject '" + s.id + "': covariate arity mismatch");
        if (j > 0 && o.time < s.observations[j - 1].time)
          throw DataError("subject '" + s.id + "': observations not sorted by time");
        check_response(o.y);
      }
    }
  }

  void check_response(double y) const {
    if (!std::isfinite(y)) throw DomainError("response must be finite");
    switch (kind.family) {
      case ResponseFamily::gamma_log:
        if (!(y > 0.0)) throw DomainError("gamma response must be positive");
        break;
      case ResponseFamily::binary_probit:
        if (y != 0.0 && y != 1.0) throw DomainError("binary response must be 0 or 1, got " + fmt_num(y));
        break;
      case ResponseFamily::ordinal_probit:
        if (y != std::floor(y) || y < 1.0 || y > kind.categories)
          throw DomainError("ordinal response must be an integer in 1.." + std::to_string(kind.categories) +
                            ", got " + fmt_num(y));
        break;
      case ResponseFamily::normal_identity: break;
    }
  }

  bool operator==(const LongitudinalDataset&) const = default;

 private:
  static std::string fmt_num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }
};

/// Flat, cache-friendly copy of a dataset used by the likelihood code.
struct Panel {
  ResponseKind kind;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x;
  Eigen::VectorXd y;
  Eigen::VectorXd time;
  std::vector<std::size_t> offsets;  // subject i owns rows [offsets[i], offsets[i+1])

  std::size_t n_subjects() const { return offsets.size() - 1; }
  std::size_t n_obs() const { return static_cast<std::size_t>(y.size()); }
  Eigen::Index n_cov() const { return x.cols(); }
  std::size_t size(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

inline Panel make_panel(const LongitudinalDataset& d) {
  Panel p;
  p.kind = d.kind;
  const auto n = static_cast<Eigen::Index>(d.n_observations());
  const auto k = static_cast<Eigen::Index>(d.n_covariates());
  p.x.resize(n, k);
  p.y.resize(n);
  p.time.resize(n);
  p.offsets.reserve(d.subjects.size() + 1);
  p.offsets.push_back(0);
  Eigen::Index r = 0;
  for (const auto& s : d.subjects) {
    for (const auto& o : s.observations) {
      for (Eigen::Index c = 0; c < k; ++c) p.x(r, c) = o.covariates[static_cast<std::size_t>(c)];
      p.y[r] = o.y;
      p.time[r] = o.time;
      ++r;
    }
    p.offsets.push_back(static_cast<std::size_t>(r));
  }
  return p;
}

// ---------------------------------------------------------------------------
// CSV

/// Maps logical columns to physical header names. An empty covariate list
/// means "every column that is not id/time/y, in file order".
struct CsvSchema {
  std::string id = "id";
  std::string time = "time";
  std::string y = "y";
  std::vector<std::string> covariates;
  double time_scale = 1.0;  // multiplies the time column
  int recode = 0;           // added to discrete response codes before validation
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  const std::string t = trim(cell);
  if (t.empty()) throw ParseError(row, "empty cell in column '" + column + "'");
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw ParseError(row, "non-numeric value '" + t + "' in column '" + column + "'");
  return v;
}

}  // namespace detail

inline LongitudinalDataset parse_csv(std::istream& in, const ResponseKind& kind, const CsvSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError(name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = column(schema.id);
  const std::size_t time_col = column(schema.time);
  const std::size_t y_col = column(schema.y);
  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != id_col && c != time_col && c != y_col) cov_names.push_back(header[c]);
  }
  std::vector<std::size_t> cov_cols;
  for (const auto& c : cov_names) cov_cols.push_back(column(c));

  LongitudinalDataset d;
  d.kind = kind;
  if (kind.has_intercept()) d.covariate_names.push_back("(Intercept)");
  d.covariate_names.insert(d.covariate_names.end(), cov_names.begin(), cov_names.end());

  std::unordered_map<std::string, std::size_t> index;
  std::size_t row = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(row, "expected " + std::to_string(header.size()) + " cells, found " +
                                std::to_string(cells.size()));
    const std::string id = detail::trim(cells[id_col]);
    if (id.empty()) throw ParseError(row, "empty subject id");
    Observation o;
    o.time = detail::parse_number(cells[time_col], row, schema.time) * schema.time_scale;
    o.y = detail::parse_number(cells[y_col], row, schema.y);
    if (kind.discrete()) o.y += schema.recode;
    try {
      d.check_response(o.y);
    } catch (const DomainError& e) {
      throw DomainError(std::string(e.what()) + " (row " + std::to_string(row) + ")");
    }
    if (kind.has_intercept()) o.covariates.push_back(1.0);
    for (std::size_t k = 0; k < cov_cols.size(); ++k)
      o.covariates.push_back(detail::parse_number(cells[cov_cols[k]], row, cov_names[k]));
    auto [it, inserted] = index.try_emplace(id, d.subjects.size());
    if (inserted) d.subjects.push_back(Subject{id, {}});
    d.subjects[it->second].observations.push_back(std::move(o));
  }
  // Stable sort keeps file order for tied times.
  for (auto& s : d.subjects)
    std::stable_sort(s.observations.begin(), s.observations.end(),
                     [](const Observation& a, const Observation& b) { return a.time < b.time; });
  d.validate();
  return d;
}

inline LongitudinalDataset load_csv(const std::string& path, const ResponseKind& kind, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  return parse_csv(in, kind, schema);
}

/// Writes the long format read by parse_csv (intercept column omitted).
inline void write_csv(std::ostream& out, const LongitudinalDataset& d) {
  const std::size_t first = d.kind.has_intercept() ? 1 : 0;
  out << "id,time,y";
  for (std::size_t c = first; c < d.covariate_names.size(); ++c) out << ',' << d.covariate_names[c];
  out << '\n';
  out << std::setprecision(17);
  for (const auto& s : d.subjects)
    for (const auto& o : s.observations) {
      out << s.id << ',' << o.time << ',' << o.y;
      for (std::size_t c = first; c < o.covariates.size(); ++c) out << ',' << o.covariates[c];
      out << '\n';
    }
}

struct DatasetSummary {
  std::size_t m = 0;
  std::size_t n_obs = 0;
  std::size_t min_n = 0;
  std::size_t max_n = 0;
  double mean_n = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  std::vector<double> covariate_means;
};

inline DatasetSummary summarize(const LongitudinalDataset& d) {
  if (d.subjects.empty()) throw DataError("empty dataset");
  DatasetSummary s;
  s.m = d.subjects.size();
  s.min_n = std::numeric_limits<std::size_t>::max();
  s.y_min = std::numeric_limits<double>::infinity();
  s.y_max = -s.y_min;
  s.covariate_means.assign(d.n_covariates(), 0.0);
  for (const auto& sub : d.subjects) {
    const std::size_t n = sub.observations.size();
    s.n_obs += n;
    s.min_n = std::min(s.min_n, n);
    s.max_n = std::max(s.max_n, n);
    for (const auto& o : sub.observations) {
      s.y_min = std::min(s.y_min, o.y);
      s.y_max = std::max(s.y_max, o.y);
      for (std::size_t c = 0; c < o.covariates.size(); ++c) s.covariate_means[c] += o.covariates[c];
    }
  }
  s.mean_n = static_cast<double>(s.n_obs) / static_cast<double>(s.m);
  for (double& v : s.covariate_means) v /= static_cast<double>(std::max<std::size_t>(s.n_obs, 1));
  return s;
}

}  // namespace factorcop
