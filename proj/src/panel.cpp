#include "bmc/panel.hpp"

#include "bmc/format.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <cmath>
#include <limits>

namespace bmc {

std::vector<Cell> PanelData::treated_cells() const {
  std::vector<Cell> cells;
  for (Index j = 0; j < mask.rows(); ++j)
    for (Index t = 0; t < mask.cols(); ++t)
      if (mask(j, t) != 0) cells.push_back({j, t});
  return cells;
}

Index PanelData::n_treated() const { return (mask.array() != 0).count(); }

std::vector<std::string> numbered_labels(Index n) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels.push_back(std::to_string(i + 1));
  return labels;
}

Mask build_mask(const TreatmentSpec& spec, Index J, Index T) {
  if (J < 1 || T < 1) throw std::invalid_argument("panel dimensions must be positive");
  Mask mask = Mask::Zero(J, T);
  using Kind = TreatmentSpec::Kind;
  if (spec.kind == Kind::ArbitraryCells) {
    if (spec.explicit_cells.empty()) throw std::invalid_argument("empty treated set");
    for (const auto& c : spec.explicit_cells) {
      if (c.unit < 0 || c.unit >= J || c.period < 0 || c.period >= T)
        throw std::invalid_argument("treated cell out of range");
      mask(c.unit, c.period) = 1;
    }
  } else {
    if (spec.treated_units.empty()) throw std::invalid_argument("empty treated set");
    if (spec.kind == Kind::SingleUnitBlock && spec.treated_units.size() != 1)
      throw std::invalid_argument("single-unit block needs exactly one treated unit");
    if (spec.start_period < 0 || spec.start_period >= T)
      throw std::invalid_argument("treatment start period out of range");
    for (Index j : spec.treated_units) {
      if (j < 0 || j >= J) throw std::invalid_argument("treated unit out of range");
      mask.row(j).tail(T - spec.start_period).setOnes();
    }
  }
  if ((mask.array() != 0).all())
    throw std::invalid_argument("treatment covers every cell; no controls remain");
  return mask;
}

std::vector<std::string> validate(const PanelData& data) {
  std::vector<std::string> report;
  const Index J = data.outcomes.rows();
  const Index T = data.outcomes.cols();
  if (J < 2) report.push_back("need at least 2 units");
  if (T < 2) report.push_back("need at least 2 periods");
  if (data.mask.rows() != J || data.mask.cols() != T) {
    report.push_back("mask dimensions do not match outcomes");
    return report;
  }
  for (std::size_t l = 0; l < data.covariates.size(); ++l) {
    if (data.covariates[l].rows() != J || data.covariates[l].cols() != T) {
      report.push_back("covariate " + std::to_string(l + 1) +
                       " dimensions do not match outcomes");
      return report;
    }
  }
  if (!data.unit_labels.empty() && static_cast<Index>(data.unit_labels.size()) != J)
    report.push_back("unit label count does not match units");
  if (!data.period_labels.empty() && static_cast<Index>(data.period_labels.size()) != T)
    report.push_back("period label count does not match periods");

  bool any_untreated = false;
  for (Index j = 0; j < J; ++j) {
    for (Index t = 0; t < T; ++t) {
      const int s = data.mask(j, t);
      const std::string at = "(" + std::to_string(j + 1) + "," + std::to_string(t + 1) + ")";
      if (s != 0 && s != 1) {
        report.push_back("mask not binary at " + at);
        continue;
      }
      if (!std::isfinite(data.outcomes(j, t)))
        report.push_back("non-finite outcome at " + at);
      for (std::size_t l = 0; l < data.covariates.size(); ++l)
        if (!std::isfinite(data.covariates[l](j, t)))
          report.push_back("non-finite covariate " + std::to_string(l + 1) + " at " + at);
      if (s == 0) any_untreated = true;
    }
  }
  if (!any_untreated) report.push_back("no untreated observations");
  return report;
}

void require_valid(const PanelData& data) {
  const auto report = validate(data);
  if (report.empty()) return;
  std::string msg = "invalid panel:";
  for (const auto& r : report) msg += "\n  " + r;
  throw std::invalid_argument(msg);
}

bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (trim(header[i]) == name) return i;
  throw PanelFormatError("missing column '" + name + "'");
}

}  // namespace

PanelData parse_panel_csv(std::istream& in, const CsvSchema& schema) {
  std::vector<std::string> header;
  if (!read_csv_record(in, header)) throw PanelFormatError("empty file: header row required");
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  const std::size_t c_unit = column_of(header, schema.unit);
  const std::size_t c_period = column_of(header, schema.period);
  const std::size_t c_outcome = column_of(header, schema.outcome);
  const std::size_t c_treat = column_of(header, schema.treatment);
  std::vector<std::size_t> c_cov;
  std::vector<bool> invariant;
  for (const auto& name : schema.covariates) {
    c_cov.push_back(column_of(header, name));
    invariant.push_back(std::find(schema.time_invariant.begin(), schema.time_invariant.end(),
                                  name) != schema.time_invariant.end());
  }
  for (const auto& name : schema.time_invariant)
    if (std::find(schema.covariates.begin(), schema.covariates.end(), name) ==
        schema.covariates.end())
      throw PanelFormatError("time-invariant column '" + name + "' is not a declared covariate");

  struct Row {
    std::string unit, period;
    double outcome;
    int treated;
    std::vector<std::optional<double>> cov;
  };
  std::vector<Row> rows;
  std::vector<std::string> units;
  std::unordered_map<std::string, Index> unit_index;
  std::vector<std::string> periods;
  std::unordered_map<std::string, Index> period_seen;

  std::vector<std::string> fields;
  std::size_t line = 1;
  while (read_csv_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    if (fields.size() != header.size())
      throw PanelFormatError("line " + std::to_string(line) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
    Row r;
    r.unit = trim(fields[c_unit]);
    r.period = trim(fields[c_period]);
    const auto y = parse_double(fields[c_outcome]);
    if (!y) throw PanelFormatError("line " + std::to_string(line) + ": non-numeric outcome '" +
                                   fields[c_outcome] + "'");
    r.outcome = *y;
    const auto s = parse_double(fields[c_treat]);
    if (!s || (*s != 0.0 && *s != 1.0))
      throw PanelFormatError("line " + std::to_string(line) + ": non-binary treatment value '" +
                             fields[c_treat] + "'");
    r.treated = static_cast<int>(*s);
    for (std::size_t l = 0; l < c_cov.size(); ++l) {
      auto x = parse_double(fields[c_cov[l]]);
      if (!x && !(invariant[l] && trim(fields[c_cov[l]]).empty()))
        throw PanelFormatError("line " + std::to_string(line) + ": non-numeric covariate '" +
                               schema.covariates[l] + "' value '" + fields[c_cov[l]] + "'");
      r.cov.push_back(x);
    }
    if (!unit_index.count(r.unit)) {
      unit_index.emplace(r.unit, static_cast<Index>(units.size()));
      units.push_back(r.unit);
    }
    if (!period_seen.count(r.period)) {
      period_seen.emplace(r.period, 0);
      periods.push_back(r.period);
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw PanelFormatError("no data rows");

  const bool numeric_periods = std::all_of(periods.begin(), periods.end(),
                                           [](const auto& p) { return parse_double(p).has_value(); });
  if (numeric_periods) {
    std::stable_sort(periods.begin(), periods.end(), [](const auto& a, const auto& b) {
      return *parse_double(a) < *parse_double(b);
    });
  } else {
    std::sort(periods.begin(), periods.end());
  }
  std::unordered_map<std::string, Index> period_index;
  for (std::size_t i = 0; i < periods.size(); ++i)
    period_index[periods[i]] = static_cast<Index>(i);

  const Index J = static_cast<Index>(units.size());
  const Index T = static_cast<Index>(periods.size());
  const std::size_t L = c_cov.size();
  PanelData data;
  data.outcomes = Eigen::MatrixXd::Constant(J, T, std::numeric_limits<double>::quiet_NaN());
  data.mask = Mask::Zero(J, T);
  data.covariates.assign(L, Eigen::MatrixXd::Constant(J, T, std::numeric_limits<double>::quiet_NaN()));
  data.unit_labels = units;
  data.period_labels = periods;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(J, T, false);

  for (const auto& r : rows) {
    const Index j = unit_index[r.unit];
    const Index t = period_index[r.period];
    if (seen(j, t))
      throw PanelFormatError("duplicate row: unit " + r.unit + " period " + r.period);
    seen(j, t) = true;
    data.outcomes(j, t) = r.outcome;
    data.mask(j, t) = r.treated;
    for (std::size_t l = 0; l < L; ++l)
      if (r.cov[l]) data.covariates[l](j, t) = *r.cov[l];
  }
  for (Index j = 0; j < J; ++j)
    for (Index t = 0; t < T; ++t)
      if (!seen(j, t)) throw IncompleteGridError(units[j], periods[t]);

  for (std::size_t l = 0; l < L; ++l) {
    if (!invariant[l]) continue;
    auto& x = data.covariates[l];
    for (Index j = 0; j < J; ++j) {
      double sum = 0.0;
      int n = 0;
      for (Index t = 0; t < T; ++t)
        if (std::isfinite(x(j, t))) {
          sum += x(j, t);
          ++n;
        }
      if (n == 0)
        throw PanelFormatError("time-invariant covariate '" + schema.covariates[l] +
                               "' has no value for unit " + units[j]);
      x.row(j).setConstant(sum / n);
    }
  }
  return data;
}

PanelData load_panel_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PanelFormatError("cannot open '" + path + "'");
  return parse_panel_csv(in, schema);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

void write_panel_csv(std::ostream& out, const PanelData& data,
                     const std::vector<std::string>& covariate_names) {
  const Index L = data.n_covariates();
  std::vector<std::string> names = covariate_names;
  if (names.empty())
    for (Index l = 0; l < L; ++l) names.push_back("x" + std::to_string(l + 1));
  if (static_cast<Index>(names.size()) != L)
    throw std::invalid_argument("covariate name count does not match covariates");
  const auto units = data.unit_labels.empty() ? numbered_labels(data.units()) : data.unit_labels;
  const auto periods =
      data.period_labels.empty() ? numbered_labels(data.periods()) : data.period_labels;

  out << "unit,period,outcome,treated";
  for (const auto& n : names) out << ',' << csv_field(n);
  out << '\n';
  for (Index j = 0; j < data.units(); ++j) {
    for (Index t = 0; t < data.periods(); ++t) {
      out << csv_field(units[j]) << ',' << csv_field(periods[t]) << ','
          << format_number(data.outcomes(j, t)) << ',' << data.mask(j, t);
      for (Index l = 0; l < L; ++l) out << ',' << format_number(data.covariates[l](j, t));
      out << '\n';
    }
  }
}

void write_panel_csv(const std::string& path, const PanelData& data,
                     const std::vector<std::string>& covariate_names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_panel_csv(out, data, covariate_names);
}

}  // namespace bmc
