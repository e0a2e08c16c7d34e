#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bmc {

using Index = Eigen::Index;
using Mask = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct Cell {
  Index unit = 0;
  Index period = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// A J x T panel with a binary treatment mask (1 = treated). Covariates are a
// J x T x L tensor stored as L matrices of shape J x T.
struct PanelData {
  Eigen::MatrixXd outcomes;
  Mask mask;
  std::vector<Eigen::MatrixXd> covariates;
  std::vector<std::string> unit_labels;
  std::vector<std::string> period_labels;

  Index units() const { return outcomes.rows(); }
  Index periods() const { return outcomes.cols(); }
  Index n_covariates() const { return static_cast<Index>(covariates.size()); }

  // Treated cells in unit-major order (unit, then period). Every draw array
  // indexed by treated cell uses this order.
  std::vector<Cell> treated_cells() const;
  Index n_treated() const;
};

// Default labels "1".."n".
std::vector<std::string> numbered_labels(Index n);

struct TreatmentSpec {
  enum class Kind { SingleUnitBlock, MultiUnitBlock, ArbitraryCells };
  Kind kind = Kind::SingleUnitBlock;
  std::vector<Index> treated_units;  // 0-based
  Index start_period = 0;            // 0-based, block kinds treat start..T-1
  std::vector<Cell> explicit_cells;  // 0-based, arbitrary kind
};

Mask build_mask(const TreatmentSpec& spec, Index J, Index T);

// Invariant violations, empty iff the panel is valid.
std::vector<std::string> validate(const PanelData& data);

// Throws std::invalid_argument listing every violation.
void require_valid(const PanelData& data);

// Long-format CSV column roles.
struct CsvSchema {
  std::string unit = "unit";
  std::string period = "period";
  std::string outcome = "outcome";
  std::string treatment = "treated";
  std::vector<std::string> covariates;
  // Subset of covariates that are constant per unit. Blank entries are
  // allowed; the unit's non-blank values are averaged and broadcast over t.
  std::vector<std::string> time_invariant;
};

class PanelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a (unit, period) pair is absent from the file.
class IncompleteGridError : public PanelFormatError {
 public:
  IncompleteGridError(std::string unit, std::string period)
      : PanelFormatError("incomplete grid: unit " + unit + " period " + period),
        unit_(std::move(unit)),
        period_(std::move(period)) {}
  const std::string& unit() const { return unit_; }
  const std::string& period() const { return period_; }

 private:
  std::string unit_;
  std::string period_;
};

PanelData load_panel_csv(const std::string& path, const CsvSchema& schema);
PanelData parse_panel_csv(std::istream& in, const CsvSchema& schema);

// Writes the long format read by load_panel_csv, covariates named x1..xL
// unless names are given.
void write_panel_csv(const std::string& path, const PanelData& data,
                     const std::vector<std::string>& covariate_names = {});
void write_panel_csv(std::ostream& out, const PanelData& data,
                     const std::vector<std::string>& covariate_names = {});

// Reads one CSV record, honoring double-quoted fields.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);

}  // namespace bmc
