#include <filesystem>
#include <fstream>
#include <sstream>

#include "bmc/cli.hpp"
#include "bmc/dgp.hpp"
#include "bmc/draws_io.hpp"
#include "bmc/effects.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using namespace bmc;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bmc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

PosteriorDraws fitted(PanelData& data) {
  DgpSpec spec;
  spec.units = 4;
  spec.pre = 6;
  spec.post = 3;
  data = generate(spec).panel;
  SamplerConfig cfg;
  cfg.chain.n_iter = 120;
  cfg.chain.n_burn = 20;
  return run_mcmc(data, cfg);
}

}  // namespace

TEST_CASE("draws table: columns and CSV / binary round trips") {
  PanelData data;
  const PosteriorDraws draws = fitted(data);
  const DrawTable t = draws_table(draws, data);
  REQUIRE(t.values.rows() == 100);
  CHECK(t.columns[0].name == "draw");
  CHECK(t.columns[1].name == "tau");
  CHECK(t.columns[2].name == "log_posterior");
  CHECK(t.columns[3].name == "y_4_7");
  CHECK(t.columns[3].unit == "4");
  CHECK(t.columns[3].period == "7");
  CHECK(t.columns.back().name == "eig_4");
  CHECK(t.values.col(1) == draws.tau);

  const fs::path dir = test::scratch_dir("draws");
  for (DrawFormat f : {DrawFormat::Csv, DrawFormat::Binary}) {
    const fs::path data_path = dir / (f == DrawFormat::Csv ? "d.csv" : "d.bin");
    {
      std::ofstream out(data_path, std::ios::binary);
      f == DrawFormat::Csv ? write_draws_csv(out, t) : write_draws_binary(out, t);
      std::ofstream schema(dir / "s.json");
      write_draws_schema(schema, t, f);
    }
    const DrawTable back = read_draws(data_path, dir / "s.json");
    CHECK(back.values == t.values);  // shortest round-trip text is exact
    REQUIRE(back.columns.size() == t.columns.size());
    CHECK(back.columns[4].kind == "y_miss");
    CHECK(back.columns[4].period == t.columns[4].period);
  }

  std::istringstream junk("XXXX");
  CHECK_THROWS_AS(read_draws_binary(junk), DrawFileError);
  std::istringstream bad("a,b\n1,zz\n");
  CHECK_THROWS_AS(read_draws_csv(bad), DrawFileError);
  CHECK_THROWS_AS(parse_draw_format("parquet"), std::invalid_argument);
}

TEST_CASE("cli: simulate writes three deterministic files") {
  const fs::path a = test::scratch_dir("sim_a"), b = test::scratch_dir("sim_b");
  for (const auto& dir : {a, b}) {
    const Run r = cli({"simulate", "--kind", "independent", "--units", "5", "--pre", "10", "--post", "20",
                       "--atet", "5", "--seed", "7", "--out", dir.string()});
    REQUIRE(r.code == 0);
  }
  for (const char* f : {"panel.csv", "truth.csv", "simulate.json"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(test::read_file(a / f) == test::read_file(b / f));
  }
  const auto meta = nlohmann::json::parse(test::read_file(a / "simulate.json"));
  CHECK(meta["seed"] == 7);
  CHECK(meta["kind"] == "independent");
}

TEST_CASE("cli: usage and configuration errors are JSON on stderr") {
  const fs::path dir = test::scratch_dir("errors");
  Run r = cli({"simulate", "--kind", "weighted", "--units", "12", "--out", dir.string()});
  CHECK(r.code != 0);
  auto e = nlohmann::json::parse(r.err);
  CHECK(e["error"]["command"] == "simulate");
  CHECK(e["error"]["message"].get<std::string>().find("{10, 40}") != std::string::npos);

  r = cli({"fit"});
  CHECK(r.code == 2);
  CHECK(nlohmann::json::parse(r.err)["error"]["type"] == "usage");

  REQUIRE(cli({"simulate", "--out", dir.string()}).code == 0);
  r = cli({"fit", "--data", (dir / "panel.csv").string(), "--rank", "0", "--out", dir.string()});
  CHECK(r.code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"]["type"] == "config");

  r = cli({"benchmark", "--methods", "scm,bscm", "--out", dir.string()});
  CHECK(r.code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"]["message"].get<std::string>().find("mcnnm") != std::string::npos);

  r = cli({"report", "--fit-dir", (dir / "nothing").string()});
  CHECK(r.code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"]["message"].get<std::string>().find("effects.json") != std::string::npos);

  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("cli: fit and report end to end, repeatable") {
  const fs::path dir = test::scratch_dir("fit");
  REQUIRE(cli({"simulate", "--units", "5", "--pre", "10", "--post", "4", "--atet", "3", "--seed", "2",
               "--out", dir.string()}).code == 0);
  const std::string panel = (dir / "panel.csv").string();
  for (const char* sub : {"f1", "f2"}) {
    const Run r = cli({"fit", "--data", panel, "--iters", "300", "--burn", "100", "--seed", "4", "--keep-phi",
                       "--out", (dir / sub).string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  for (const char* f : {"draws.csv", "draws.schema.json", "effects.json", "periods.csv", "eigenvalues.csv",
                        "diagnostics.json", "loadings.csv"}) {
    REQUIRE(fs::exists(dir / "f1" / f));
    CHECK(test::read_file(dir / "f1" / f) == test::read_file(dir / "f2" / f));
  }
  const auto diag = nlohmann::json::parse(test::read_file(dir / "f1" / "diagnostics.json"));
  CHECK(diag["n_draws"] == 200);
  CHECK(diag["geweke"].contains("tau"));
  CHECK(diag["geweke"].contains("atet"));
  CHECK(diag["geweke"].contains("log_posterior"));

  const Run rep = cli({"report", "--fit-dir", (dir / "f1").string()});
  REQUIRE_MESSAGE(rep.code == 0, rep.err);
  std::istringstream csv(test::read_file(dir / "f1" / "report.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "period,label,realized,counterfactual_mean,low_70,high_70,low_90,high_90");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    std::vector<double> v;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 8);
    CHECK(v[4] <= v[3]);
    CHECK(v[3] <= v[5]);
    CHECK(v[6] <= v[3]);
    CHECK(v[3] <= v[7]);
  }
  CHECK(rows == 14);
  const std::string svg = test::read_file(dir / "f1" / "report.svg");
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("class=\"realized\"") != std::string::npos);
  CHECK(svg.find("class=\"band-90\"") != std::string::npos);

  const Run bin = cli({"fit", "--data", panel, "--iters", "300", "--burn", "100", "--seed", "4", "--format",
                       "binary", "--out", (dir / "fb").string()});
  REQUIRE(bin.code == 0);
  const DrawTable from_bin = read_draws(dir / "fb" / "draws.bin", dir / "fb" / "draws.schema.json");
  const DrawTable from_csv = read_draws(dir / "f1" / "draws.csv", dir / "f1" / "draws.schema.json");
  CHECK(from_bin.values == from_csv.values);
}

TEST_CASE("cli: benchmark outputs are repeatable and keep timings apart") {
  const fs::path dir = test::scratch_dir("bench");
  for (const char* sub : {"a", "b"}) {
    const Run r = cli({"benchmark", "--cases", "independent:5:10", "--methods", "scm,mcnnm,bmc", "--reps", "2",
                       "--iters", "200", "--burn", "50", "--seed", "1", "--out", (dir / sub).string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  CHECK(test::read_file(dir / "a" / "benchmark.csv") == test::read_file(dir / "b" / "benchmark.csv"));
  CHECK(test::read_file(dir / "a" / "benchmark_raw.csv") == test::read_file(dir / "b" / "benchmark_raw.csv"));
  CHECK(fs::exists(dir / "a" / "benchmark_time.csv"));
  std::istringstream csv(test::read_file(dir / "a" / "benchmark.csv"));
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 3);
  CHECK(test::read_file(dir / "a" / "benchmark.csv").find("independent:5:10,scm,1,1,2") != std::string::npos);
}
