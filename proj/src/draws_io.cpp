#include "bmc/draws_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <type_traits>

#include "bmc/format.hpp"
#include "json.hpp"

namespace bmc {

DrawTable draws_table(const PosteriorDraws& draws, const PanelData& data) {
  DrawTable t;
  const Index n = draws.n_draws();
  const Index L = draws.beta.cols();
  const Index C = static_cast<Index>(draws.treated_cells.size());
  const Index K = draws.gamma_eig.cols();
  t.columns.push_back({"draw", "draw", "", ""});
  t.columns.push_back({"tau", "tau", "", ""});
  t.columns.push_back({"log_posterior", "log_posterior", "", ""});
  for (Index l = 0; l < L; ++l) t.columns.push_back({"beta_" + std::to_string(l + 1), "beta", "", ""});
  for (const Cell& c : draws.treated_cells) {
    const auto unit = static_cast<std::size_t>(c.unit);
    const auto period = static_cast<std::size_t>(c.period);
    t.columns.push_back({"y_" + std::to_string(c.unit + 1) + "_" + std::to_string(c.period + 1),
                         "y_miss",
                         unit < data.unit_labels.size() ? data.unit_labels[unit] : "",
                         period < data.period_labels.size() ? data.period_labels[period] : ""});
  }
  for (Index k = 0; k < K; ++k) t.columns.push_back({"eig_" + std::to_string(k + 1), "eig", "", ""});

  t.values.resize(n, 3 + L + C + K);
  for (Index i = 0; i < n; ++i) t.values(i, 0) = static_cast<double>(i + 1);
  t.values.col(1) = draws.tau;
  t.values.col(2) = draws.log_posterior;
  if (L > 0) t.values.middleCols(3, L) = draws.beta;
  if (C > 0) t.values.middleCols(3 + L, C) = draws.y_miss;
  if (K > 0) t.values.middleCols(3 + L + C, K) = draws.gamma_eig;
  return t;
}

DrawFormat parse_draw_format(const std::string& name) {
  if (name == "csv") return DrawFormat::Csv;
  if (name == "binary") return DrawFormat::Binary;
  throw std::invalid_argument("unknown draws format '" + name + "' (expected csv or binary)");
}

std::string to_string(DrawFormat format) {
  return format == DrawFormat::Csv ? "csv" : "binary";
}

void write_draws_csv(std::ostream& out, const DrawTable& table) {
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << table.columns[c].name;
  out << '\n';
  for (Index i = 0; i < table.values.rows(); ++i) {
    for (Index c = 0; c < table.values.cols(); ++c)
      out << (c ? "," : "") << format_number(table.values(i, c));
    out << '\n';
  }
}

namespace {

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw DrawFileError("draws file line " + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
  } else {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
}

template <class T>
T get(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T)))
    throw DrawFileError("binary draws file is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

constexpr char kMagic[4] = {'B', 'M', 'C', 'D'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

DrawTable read_draws_csv(std::istream& in) {
  DrawTable t;
  std::vector<std::string> fields;
  if (!read_csv_record(in, fields)) throw DrawFileError("draws file is empty");
  for (const auto& f : fields) t.columns.push_back({f, "", "", ""});
  std::vector<std::vector<double>> rows;
  std::size_t line = 1;
  while (read_csv_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != t.columns.size())
      throw DrawFileError("draws file line " + std::to_string(line) + ": expected " +
                          std::to_string(t.columns.size()) + " fields, got " +
                          std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) row[c] = parse_double(fields[c], line);
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      t.values(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
  return t;
}

void write_draws_binary(std::ostream& out, const DrawTable& table) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(table.values.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(table.values.cols()));
  for (Index c = 0; c < table.values.cols(); ++c)
    for (Index i = 0; i < table.values.rows(); ++i) put<double>(out, table.values(i, c));
}

Eigen::MatrixXd read_draws_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DrawFileError("not a binary draws file (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw DrawFileError("unsupported binary draws version " + std::to_string(version));
  const auto rows = get<std::uint64_t>(in);
  const auto cols = get<std::uint64_t>(in);
  Eigen::MatrixXd v(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index c = 0; c < v.cols(); ++c)
    for (Index i = 0; i < v.rows(); ++i) v(i, c) = get<double>(in);
  return v;
}

void write_draws_schema(std::ostream& out, const DrawTable& table, DrawFormat format) {
  nlohmann::ordered_json j;
  j["format"] = to_string(format);
  j["rows"] = table.values.rows();
  auto& cols = j["columns"] = nlohmann::ordered_json::array();
  for (const auto& c : table.columns) {
    nlohmann::ordered_json col;
    col["name"] = c.name;
    col["kind"] = c.kind;
    if (c.kind == "y_miss") {
      col["unit"] = c.unit;
      col["period"] = c.period;
    }
    cols.push_back(std::move(col));
  }
  out << j.dump(2) << '\n';
}

DrawTable read_draws(const std::filesystem::path& data_file,
                     const std::filesystem::path& schema_file) {
  std::ifstream sin(schema_file);
  if (!sin) throw DrawFileError("cannot open draws schema " + schema_file.string());
  const auto j = nlohmann::json::parse(sin);
  const DrawFormat format = parse_draw_format(j.at("format").get<std::string>());

  DrawTable t;
  for (const auto& c : j.at("columns"))
    t.columns.push_back({c.at("name").get<std::string>(), c.at("kind").get<std::string>(),
                         c.value("unit", std::string()), c.value("period", std::string())});

  std::ifstream din(data_file, std::ios::binary);
  if (!din) throw DrawFileError("cannot open draws file " + data_file.string());
  if (format == DrawFormat::Csv) {
    DrawTable raw = read_draws_csv(din);
    if (raw.columns.size() != t.columns.size())
      throw DrawFileError("draws file and schema disagree on the number of columns");
    for (std::size_t c = 0; c < t.columns.size(); ++c)
      if (raw.columns[c].name != t.columns[c].name)
        throw DrawFileError("draws column " + std::to_string(c + 1) + " is '" +
                            raw.columns[c].name + "', schema says '" + t.columns[c].name + "'");
    t.values = std::move(raw.values);
  } else {
    t.values = read_draws_binary(din);
    if (static_cast<std::size_t>(t.values.cols()) != t.columns.size())
      throw DrawFileError("draws file and schema disagree on the number of columns");
  }
  if (t.values.rows() != j.at("rows").get<Index>())
    throw DrawFileError("draws file has " + std::to_string(t.values.rows()) +
                        " rows, schema says " + std::to_string(j.at("rows").get<Index>()));
  return t;
}

}  // namespace bmc
