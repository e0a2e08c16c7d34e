#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmc/panel.hpp"
#include "bmc/sampler.hpp"

namespace bmc {

// One column of a draws file. `kind` is one of draw, tau, log_posterior, beta,
// y_miss, eig; unit and period are set for y_miss columns only.
struct DrawColumn {
  std::string name;
  std::string kind;
  std::string unit;
  std::string period;
};

// Retained draws as a flat table: one row per draw, columns as described.
struct DrawTable {
  std::vector<DrawColumn> columns;
  Eigen::MatrixXd values;  // n_draws x columns.size()
};

// Columns: draw, tau, log_posterior, beta_1..beta_L, y_<j>_<t> for each
// treated cell (1-based unit and period indices), eig_1..eig_K.
DrawTable draws_table(const PosteriorDraws& draws, const PanelData& data);

enum class DrawFormat { Csv, Binary };

DrawFormat parse_draw_format(const std::string& name);
std::string to_string(DrawFormat format);

class DrawFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_draws_csv(std::ostream& out, const DrawTable& table);
DrawTable read_draws_csv(std::istream& in);

// "BMCD", uint32 version, uint64 rows, uint64 cols, then the values
// column-major as little-endian float64.
void write_draws_binary(std::ostream& out, const DrawTable& table);
// Column names come from the sidecar; the binary itself carries only values.
Eigen::MatrixXd read_draws_binary(std::istream& in);

// Sidecar JSON describing either file: format, rows, and the column list.
void write_draws_schema(std::ostream& out, const DrawTable& table, DrawFormat format);
DrawTable read_draws(const std::filesystem::path& data_file,
                     const std::filesystem::path& schema_file);

}  // namespace bmc
