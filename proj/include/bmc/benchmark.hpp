#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmc/baselines.hpp"
#include "bmc/dgp.hpp"
#include "bmc/sampler.hpp"

namespace bmc {

struct BenchmarkCase {
  DgpKind kind = DgpKind::Independent;
  Index units = 5;
  Index pre = 10;
  Index post = 20;
  double atet = 0.0;

  std::string label() const;  // kind:J:T0
};

// "kind:J:T0" with an optional ":T1".
BenchmarkCase parse_case(const std::string& text);

// Predictions of y(0) at the panel's treated cells, unit-major order.
using MethodFn = std::function<Eigen::VectorXd(const SyntheticPanel&, Rng&)>;

struct BenchmarkOptions {
  SamplerConfig bmc;              // chain settings for the Bayesian method
  int nnm_grid_size = 20;
  int nnm_folds = 5;
  SoftImputeOptions nnm;
  unsigned threads = 0;           // replications in flight; 0 = hardware
};

// scm, mcnnm, bmc, and the test hook "oracle" (returns the truth).
std::vector<std::string> available_methods();
MethodFn make_method(const std::string& name, const BenchmarkOptions& opts);

inline const std::string kNormalizerMethod = "scm";

struct ReplicationMetrics {
  std::size_t case_index = 0;
  std::string method;
  std::size_t replication = 0;
  double mse = 0.0;
  double mae = 0.0;
  double normalized_mse = 0.0;  // mse / mse of the normalizer, same replication
  double normalized_mae = 0.0;
  double seconds = 0.0;
};

struct BenchmarkRow {
  std::string case_label;
  std::string method;
  double normalized_mse = 0.0;  // mean over replications of per-replication ratios
  double normalized_mae = 0.0;
  double seconds = 0.0;
  std::size_t replications = 0;
};

struct BenchmarkReport {
  std::vector<BenchmarkCase> cases;
  std::vector<std::string> methods;
  std::vector<BenchmarkRow> rows;            // case-major, methods in request order
  std::vector<ReplicationMetrics> raw;       // (case, replication, method) order

  const BenchmarkRow& row(std::size_t case_index, const std::string& method) const;
};

// Replication r of every case draws its panel from a generator seeded by
// (seed, r); every method sees that same panel. Method m in replication r
// gets its own generator seeded by (seed, r, m + 1).
BenchmarkReport run_benchmark(const std::vector<BenchmarkCase>& cases,
                              const std::vector<std::string>& methods, std::size_t n_reps,
                              std::uint64_t seed, const BenchmarkOptions& opts = {});

// Same as above with caller-supplied methods (names must include "scm").
BenchmarkReport run_benchmark(const std::vector<BenchmarkCase>& cases,
                              const std::vector<std::pair<std::string, MethodFn>>& methods,
                              std::size_t n_reps, std::uint64_t seed, unsigned threads = 0);

// case,method,mse,mae,time,reps
void write_report_csv(std::ostream& out, const BenchmarkReport& report, bool include_time = true);
// case,replication,method,mse,mae,normalized_mse,normalized_mae,time
void write_raw_csv(std::ostream& out, const BenchmarkReport& report, bool include_time = true);

}  // namespace bmc
