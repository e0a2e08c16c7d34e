#include <sstream>

#include "bmc/benchmark.hpp"
#include "doctest.h"

using namespace bmc;

namespace {

BenchmarkOptions quick() {
  BenchmarkOptions o;
  o.bmc.chain.n_iter = 300;
  o.bmc.chain.n_burn = 100;
  o.threads = 2;
  return o;
}

}  // namespace

TEST_CASE("case parsing") {
  const BenchmarkCase c = parse_case("weighted:10:10");
  CHECK(c.kind == DgpKind::Weighted);
  CHECK(c.units == 10);
  CHECK(c.pre == 10);
  CHECK(c.post == 20);
  CHECK(c.label() == "weighted:10:10");
  CHECK(parse_case("independent:5:10:7").post == 7);
  CHECK_THROWS_AS(parse_case("independent:5"), std::invalid_argument);
  CHECK_THROWS_AS(parse_case("independent:five:10"), std::invalid_argument);
}

TEST_CASE("normalizer reads one and the oracle reads zero") {
  const auto cases = std::vector{parse_case("independent:5:10"), parse_case("weighted:10:10")};
  const BenchmarkReport r = run_benchmark(cases, {"scm", "oracle", "mcnnm"}, 3, 5, quick());
  REQUIRE(r.rows.size() == 6);
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(r.row(c, "scm").normalized_mse == 1.0);
    CHECK(r.row(c, "scm").normalized_mae == 1.0);
    CHECK(r.row(c, "oracle").normalized_mse == 0.0);
    CHECK(r.row(c, "mcnnm").replications == 3);
  }
  for (const auto& m : r.raw)
    if (m.method == "scm") CHECK(m.normalized_mse == 1.0);
  CHECK(r.raw.size() == 2 * 3 * 3);
}

TEST_CASE("methods share the replication's panel") {
  std::vector<Eigen::VectorXd> seen_a, seen_b;
  auto record = [](std::vector<Eigen::VectorXd>& sink) {
    return [&sink](const SyntheticPanel& sp, Rng&) {
      Eigen::VectorXd out(static_cast<Index>(sp.panel.n_treated()));
      Index i = 0;
      for (const auto& c : sp.panel.treated_cells()) out[i++] = sp.truth(c.unit, c.period);
      sink.push_back(out);
      return out;
    };
  };
  std::vector<std::pair<std::string, MethodFn>> methods = {
      {"scm", make_method("scm", {})}, {"a", record(seen_a)}, {"b", record(seen_b)}};
  run_benchmark({parse_case("independent:5:10")}, methods, 4, 9, 1);
  REQUIRE(seen_a.size() == 4);
  for (std::size_t r = 0; r < 4; ++r) CHECK(seen_a[r] == seen_b[r]);
}

TEST_CASE("errors: unknown method and missing normalizer") {
  CHECK_THROWS_WITH_AS(make_method("rscm", {}), doctest::Contains("available methods"), std::invalid_argument);
  CHECK_THROWS_AS(run_benchmark({parse_case("independent:5:10")}, {"mcnnm"}, 2, 1, quick()),
                  std::invalid_argument);
}

TEST_CASE("report is deterministic and thread-count independent") {
  const auto cases = std::vector{parse_case("dependent:5:10")};
  BenchmarkOptions one = quick();
  one.threads = 1;
  const BenchmarkReport a = run_benchmark(cases, {"scm", "mcnnm", "bmc"}, 3, 17, quick());
  const BenchmarkReport b = run_benchmark(cases, {"scm", "mcnnm", "bmc"}, 3, 17, one);
  std::ostringstream sa, sb, ra, rb;
  write_report_csv(sa, a, false);
  write_report_csv(sb, b, false);
  write_raw_csv(ra, a, false);
  write_raw_csv(rb, b, false);
  CHECK(sa.str() == sb.str());
  CHECK(ra.str() == rb.str());
  std::istringstream lines(sa.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "case,method,mse,mae,reps");
  int rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == 3);
}
