#include "bmc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bmc/benchmark.hpp"
#include "bmc/dgp.hpp"
#include "bmc/diagnostics.hpp"
#include "bmc/draws_io.hpp"
#include "bmc/effects.hpp"
#include "bmc/format.hpp"
#include "bmc/panel.hpp"
#include "bmc/sampler.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace bmc {
namespace {

// Raised for problems with files the user pointed at (missing inputs,
// unwritable outputs).
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("BMC_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw ArtifactError("cannot create output directory " + dir.string());
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!f) throw ArtifactError("cannot write " + path.string());
  return f;
}

void close_out(std::ofstream& f, const fs::path& path) {
  f.close();
  if (!f) throw ArtifactError("failed writing " + path.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string kind = "independent";
  Index units = 5;
  Index pre = 10;
  Index post = 20;
  double atet = 0.0;
  std::uint64_t seed = 1;
  std::string out;
};

void cmd_simulate(const SimulateArgs& a, std::ostream& log) {
  DgpSpec spec;
  spec.kind = parse_dgp_kind(a.kind);
  spec.units = a.units;
  spec.pre = a.pre;
  spec.post = a.post;
  spec.atet = a.atet;
  spec.seed = a.seed;
  validate(spec);
  const SyntheticPanel sp = generate(spec);

  const fs::path dir = resolve_out_dir(a.out);
  ensure_dir(dir);

  const fs::path panel_path = dir / "panel.csv";
  auto pf = open_out(panel_path);
  write_panel_csv(pf, sp.panel);
  close_out(pf, panel_path);

  const fs::path truth_path = dir / "truth.csv";
  auto tf = open_out(truth_path);
  tf << "unit,period,truth\n";
  for (Index j = 0; j < sp.truth.rows(); ++j)
    for (Index t = 0; t < sp.truth.cols(); ++t)
      tf << sp.panel.unit_labels[static_cast<std::size_t>(j)] << ','
         << sp.panel.period_labels[static_cast<std::size_t>(t)] << ','
         << format_number(sp.truth(j, t)) << '\n';
  close_out(tf, truth_path);

  nlohmann::ordered_json meta;
  meta["kind"] = to_string(spec.kind);
  meta["units"] = spec.units;
  meta["pre"] = spec.pre;
  meta["post"] = spec.post;
  meta["atet"] = spec.atet;
  meta["seed"] = spec.seed;
  meta["noise_var"] = spec.noise_var;
  meta["treated_unit"] = sp.panel.unit_labels.back();
  meta["files"] = {"panel.csv", "truth.csv"};
  const fs::path meta_path = dir / "simulate.json";
  auto mf = open_out(meta_path);
  mf << meta.dump(2) << '\n';
  close_out(mf, meta_path);

  log << "wrote " << panel_path.string() << ", " << truth_path.string() << ", "
      << meta_path.string() << '\n';
}

// --------------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  CsvSchema schema;
  std::string covariates;
  std::string time_invariant;
  long iters = 3000;
  long burn = 1000;
  long thin = 1;
  long rank = -1;  // -1: default min(J, T)
  std::uint64_t seed = 1;
  bool keep_phi = false;
  bool appendix_literal = false;
  std::string format = "csv";
  std::string out;
};

nlohmann::ordered_json geweke_entry(const Eigen::VectorXd& chain) {
  nlohmann::ordered_json e;
  try {
    const double z = geweke_diagnostic(std::span<const double>(chain.data(), chain.size()));
    e["z"] = z;
    e["pass"] = std::abs(z) < kGewekeCritical;
  } catch (const std::exception& ex) {
    e["z"] = nullptr;
    e["pass"] = nullptr;
    e["note"] = ex.what();
  }
  return e;
}

void cmd_fit(const FitArgs& a, std::ostream& log) {
  CsvSchema schema = a.schema;
  schema.covariates = split_list(a.covariates);
  schema.time_invariant = split_list(a.time_invariant);
  if (!fs::exists(a.data)) throw ArtifactError("panel file not found: " + a.data);
  const PanelData data = load_panel_csv(a.data, schema);
  require_valid(data);

  if (a.rank == 0) throw std::invalid_argument("rank must be positive (omit --rank for min(J, T))");
  SamplerConfig cfg;
  cfg.chain.n_iter = a.iters;
  cfg.chain.n_burn = a.burn;
  cfg.chain.thin = a.thin;
  cfg.chain.seed = a.seed;
  cfg.hyper.rank = a.rank < 0 ? 0 : a.rank;
  cfg.keep_phi = a.keep_phi;
  if (a.appendix_literal) {
    cfg.phi_conditional = PhiConditional::AppendixLiteral;
    cfg.gmc.literal_adaptation = true;
  }
  const DrawFormat format = parse_draw_format(a.format);
  validate(cfg, data.units(), data.periods());

  const fs::path dir = resolve_out_dir(a.out);
  ensure_dir(dir);

  const PosteriorDraws draws = run_mcmc(data, cfg);
  const EffectSummary summary = atet_posterior(draws, data);

  const DrawTable table = draws_table(draws, data);
  const fs::path draws_path = dir / (format == DrawFormat::Csv ? "draws.csv" : "draws.bin");
  auto df = open_out(draws_path, format == DrawFormat::Binary);
  if (format == DrawFormat::Csv)
    write_draws_csv(df, table);
  else
    write_draws_binary(df, table);
  close_out(df, draws_path);
  const fs::path schema_path = dir / "draws.schema.json";
  auto sf = open_out(schema_path);
  write_draws_schema(sf, table, format);
  close_out(sf, schema_path);

  const fs::path effects_path = dir / "effects.json";
  auto ef = open_out(effects_path);
  write_summary_json(ef, summary);
  close_out(ef, effects_path);

  const fs::path periods_path = dir / "periods.csv";
  auto pf = open_out(periods_path);
  write_period_csv(pf, summary);
  close_out(pf, periods_path);

  const fs::path eig_path = dir / "eigenvalues.csv";
  auto gf = open_out(eig_path);
  gf << "component,mean,low_90,high_90\n";
  for (Index k = 0; k < draws.gamma_eig.cols(); ++k) {
    const Eigen::VectorXd col = draws.gamma_eig.col(k);
    const auto [lo, hi] = credible_interval(std::span<const double>(col.data(), col.size()), 0.9);
    gf << k + 1 << ',' << format_number(col.mean()) << ',' << format_number(lo) << ','
       << format_number(hi) << '\n';
  }
  close_out(gf, eig_path);

  if (cfg.keep_phi) {
    const fs::path load_path = dir / "loadings.csv";
    auto lf = open_out(load_path);
    lf << "unit,column,mean,low_90,high_90\n";
    for (Index j = 0; j < data.units(); ++j) {
      const LoadingSummary ls = loading_summary(draws, j, 0.9);
      for (Index h = 0; h < ls.mean.size(); ++h)
        lf << data.unit_labels[static_cast<std::size_t>(j)] << ',' << h + 1 << ','
           << format_number(ls.mean[h]) << ',' << format_number(ls.low[h]) << ','
           << format_number(ls.high[h]) << '\n';
    }
    close_out(lf, load_path);
  }

  nlohmann::ordered_json diag;
  diag["n_draws"] = draws.n_draws();
  diag["rank"] = draws.rank;
  diag["significance"] = 0.05;
  diag["critical_z"] = kGewekeCritical;
  auto& g = diag["geweke"] = nlohmann::ordered_json::object();
  g["tau"] = geweke_entry(draws.tau);
  g["atet"] = geweke_entry(summary.atet_draws);
  g["log_posterior"] = geweke_entry(draws.log_posterior);
  diag["accept_rate"] = draws.accept_rate;
  diag["burn_accept_rate"] = draws.burn_accept_rate;
  diag["eps_final"] = draws.eps_final;
  diag["reorthonormalizations"] = draws.reorthonormalizations;
  const fs::path diag_path = dir / "diagnostics.json";
  auto xf = open_out(diag_path);
  xf << diag.dump(2) << '\n';
  close_out(xf, diag_path);

  log << "ATET " << format_number(summary.atet_mean) << " (sd " << format_number(summary.atet_sd)
      << ", " << draws.n_draws() << " draws); outputs in " << dir.string() << '\n';
}

// --------------------------------------------------------------- benchmark

struct BenchmarkArgs {
  std::string cases = "independent:5:10";
  std::string methods = "scm,mcnnm,bmc";
  std::size_t reps = 20;
  std::uint64_t seed = 1;
  long iters = 3000;
  long burn = 1000;
  unsigned threads = 0;
  std::string out;
};

void cmd_benchmark(const BenchmarkArgs& a, std::ostream& log) {
  std::vector<BenchmarkCase> cases;
  for (const auto& c : split_list(a.cases)) cases.push_back(parse_case(c));
  if (cases.empty()) throw std::invalid_argument("no benchmark cases given");
  const std::vector<std::string> methods = split_list(a.methods);
  const auto avail = available_methods();
  for (const auto& m : methods)
    if (std::find(avail.begin(), avail.end(), m) == avail.end()) {
      std::string list;
      for (const auto& x : avail) list += (list.empty() ? "" : ", ") + x;
      throw std::invalid_argument("unknown method '" + m + "'; available methods: " + list);
    }
  if (a.reps == 0) throw std::invalid_argument("reps must be positive");

  BenchmarkOptions opts;
  opts.bmc.chain.n_iter = a.iters;
  opts.bmc.chain.n_burn = a.burn;
  opts.threads = a.threads;

  const fs::path dir = resolve_out_dir(a.out);
  ensure_dir(dir);
  const BenchmarkReport report = run_benchmark(cases, methods, a.reps, a.seed, opts);

  const fs::path report_path = dir / "benchmark.csv";
  auto rf = open_out(report_path);
  write_report_csv(rf, report, false);
  close_out(rf, report_path);

  const fs::path raw_path = dir / "benchmark_raw.csv";
  auto wf = open_out(raw_path);
  write_raw_csv(wf, report, false);
  close_out(wf, raw_path);

  // Wall times are not reproducible, so they live apart from the metrics.
  const fs::path time_path = dir / "benchmark_time.csv";
  auto tf = open_out(time_path);
  tf << "case,method,time\n";
  for (const auto& row : report.rows)
    tf << row.case_label << ',' << row.method << ',' << format_number(row.seconds) << '\n';
  close_out(tf, time_path);

  write_report_csv(log, report, true);
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::string fit_dir;
  std::string out;
  std::string title = "Realized and counterfactual outcomes";
};

const Band* find_band(const PeriodEffect& p, double level) {
  for (const auto& b : p.bands)
    if (std::abs(b.level - level) < 1e-9) return &b;
  return nullptr;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_svg(std::ostream& out, const EffectSummary& s, const std::string& title) {
  const double W = 720, Hgt = 420, left = 60, right = 20, top = 40, bottom = 50;
  const auto& pp = s.per_period;
  const std::size_t n = pp.size();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : pp) {
    lo = std::min({lo, p.realized, p.counterfactual_mean});
    hi = std::max({hi, p.realized, p.counterfactual_mean});
    for (const auto& b : p.bands) {
      lo = std::min(lo, b.low);
      hi = std::max(hi, b.high);
    }
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto xs = [&](std::size_t i) {
    return left + (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.5) *
                      (W - left - right);
  };
  auto ys = [&](double v) { return top + (hi - v) / (hi - lo) * (Hgt - top - bottom); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hgt
      << "\" viewBox=\"0 0 " << W << ' ' << Hgt << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"15\">" << xml_escape(title) << "</text>\n";

  for (double level : {0.9, 0.7}) {
    std::string upper;
    std::string lower;
    for (std::size_t i = 0; i < n; ++i) {
      const Band* b = find_band(pp[i], level);
      if (!b) continue;
      upper += fixed(xs(i)) + "," + fixed(ys(b->high)) + " ";
    }
    for (std::size_t k = n; k-- > 0;) {
      const Band* b = find_band(pp[k], level);
      if (!b) continue;
      lower += fixed(xs(k)) + "," + fixed(ys(b->low)) + " ";
    }
    if (upper.empty()) continue;
    out << "<polygon class=\"band-" << static_cast<int>(std::lround(level * 100))
        << "\" points=\"" << upper << lower << "\" fill=\"#4a78b5\" fill-opacity=\""
        << (level > 0.8 ? "0.18" : "0.32") << "\" stroke=\"none\"/>\n";
  }

  // First period with imputed cells.
  for (std::size_t i = 0; i < n; ++i)
    if (pp[i].treated_cells > 0) {
      out << "<line x1=\"" << fixed(xs(i)) << "\" y1=\"" << top << "\" x2=\"" << fixed(xs(i))
          << "\" y2=\"" << Hgt - bottom << "\" stroke=\"#888\" stroke-dasharray=\"2,3\"/>\n";
      break;
    }

  auto polyline = [&](auto value, const char* cls, const char* style) {
    out << "<polyline class=\"" << cls << "\" fill=\"none\" " << style << " points=\"";
    for (std::size_t i = 0; i < n; ++i) out << fixed(xs(i)) << ',' << fixed(ys(value(pp[i]))) << ' ';
    out << "\"/>\n";
  };
  polyline([](const PeriodEffect& p) { return p.counterfactual_mean; }, "counterfactual",
           "stroke=\"#1f4e9c\" stroke-width=\"2\" stroke-dasharray=\"6,4\"");
  polyline([](const PeriodEffect& p) { return p.realized; }, "realized",
           "stroke=\"black\" stroke-width=\"2\"");

  // Axes and ticks.
  out << "<line x1=\"" << left << "\" y1=\"" << Hgt - bottom << "\" x2=\"" << W - right
      << "\" y2=\"" << Hgt - bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << Hgt - bottom << "\" stroke=\"black\"/>\n";
  const std::size_t step = std::max<std::size_t>(1, (n + 9) / 10);
  for (std::size_t i = 0; i < n; i += step)
    out << "<text x=\"" << fixed(xs(i)) << "\" y=\"" << Hgt - bottom + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << xml_escape(pp[i].label) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    out << "<text x=\"" << left - 6 << "\" y=\"" << fixed(ys(v) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(v)
        << "</text>\n";
  }
  const double lx = left + 10, ly = top + 10;
  out << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 24 << "\" y2=\"" << ly
      << "\" stroke=\"black\" stroke-width=\"2\"/>"
      << "<text x=\"" << lx + 30 << "\" y=\"" << ly + 4
      << "\" font-family=\"sans-serif\" font-size=\"11\">realized</text>\n";
  out << "<line x1=\"" << lx << "\" y1=\"" << ly + 16 << "\" x2=\"" << lx + 24 << "\" y2=\""
      << ly + 16 << "\" stroke=\"#1f4e9c\" stroke-width=\"2\" stroke-dasharray=\"6,4\"/>"
      << "<text x=\"" << lx + 30 << "\" y=\"" << ly + 20
      << "\" font-family=\"sans-serif\" font-size=\"11\">counterfactual (70% and 90% bands)</text>\n";
  out << "</svg>\n";
}

void cmd_report(const ReportArgs& a, std::ostream& log) {
  const fs::path fit_dir = a.fit_dir.empty() ? resolve_out_dir("") : fs::path(a.fit_dir);
  const fs::path effects_path = fit_dir / "effects.json";
  std::ifstream in(effects_path);
  if (!in) throw ArtifactError("missing fit artifact: " + effects_path.string());
  const EffectSummary s = read_summary_json(in);

  const fs::path dir = a.out.empty() ? fit_dir : fs::path(a.out);
  ensure_dir(dir);

  const fs::path csv_path = dir / "report.csv";
  auto cf = open_out(csv_path);
  cf << "period,label,realized,counterfactual_mean,low_70,high_70,low_90,high_90\n";
  for (const auto& p : s.per_period) {
    cf << p.period + 1 << ',' << p.label << ',' << format_number(p.realized) << ','
       << format_number(p.counterfactual_mean);
    for (double level : {0.7, 0.9}) {
      const Band* b = find_band(p, level);
      if (b)
        cf << ',' << format_number(b->low) << ',' << format_number(b->high);
      else
        cf << ",,";
    }
    cf << '\n';
  }
  close_out(cf, csv_path);

  const fs::path svg_path = dir / "report.svg";
  auto sf = open_out(svg_path);
  write_svg(sf, s, a.title);
  close_out(sf, svg_path);
  log << "wrote " << csv_path.string() << ", " << svg_path.string() << '\n';
}

void print_error(std::ostream& err, const std::string& command, const std::string& type,
                 const std::string& message) {
  nlohmann::ordered_json e;
  e["error"]["command"] = command;
  e["error"]["type"] = type;
  e["error"]["message"] = message;
  err << e.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian matrix completion for panel-data causal inference"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic panel");
  s->add_option("--kind", sim.kind, "independent, dependent or weighted")->capture_default_str();
  s->add_option("--units", sim.units, "Number of units J")->capture_default_str();
  s->add_option("--pre", sim.pre, "Pretreatment periods T0")->capture_default_str();
  s->add_option("--post", sim.post, "Treated periods T1")->capture_default_str();
  s->add_option("--atet", sim.atet, "Additive treatment effect")->capture_default_str();
  s->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  s->add_option("--out", sim.out, "Output directory (default $BMC_OUTPUT_DIR or .)");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Run the sampler on a panel CSV");
  f->add_option("--data", fit.data, "Long-format panel CSV")->required();
  f->add_option("--unit-col", fit.schema.unit, "Unit column")->capture_default_str();
  f->add_option("--period-col", fit.schema.period, "Period column")->capture_default_str();
  f->add_option("--outcome-col", fit.schema.outcome, "Outcome column")->capture_default_str();
  f->add_option("--treatment-col", fit.schema.treatment, "0/1 treatment column")
      ->capture_default_str();
  f->add_option("--covariates", fit.covariates, "Comma-separated covariate columns");
  f->add_option("--time-invariant", fit.time_invariant,
                "Comma-separated covariates that are constant per unit");
  f->add_option("--iters", fit.iters, "Total sweeps")->capture_default_str();
  f->add_option("--burn", fit.burn, "Burn-in sweeps")->capture_default_str();
  f->add_option("--thin", fit.thin, "Keep every n-th sweep after burn-in")->capture_default_str();
  f->add_option("--rank", fit.rank, "Factor rank H (default min(J, T))");
  f->add_option("--seed", fit.seed, "Random seed")->capture_default_str();
  f->add_flag("--keep-phi", fit.keep_phi, "Retain loading draws and write loadings.csv");
  f->add_flag("--appendix-literal", fit.appendix_literal,
              "Use the appendix formulas as printed (no tau in the loading conditional, "
              "printed step-size rule)");
  f->add_option("--format", fit.format, "Draws file format: csv or binary")->capture_default_str();
  f->add_option("--out", fit.out, "Output directory (default $BMC_OUTPUT_DIR or .)");

  BenchmarkArgs bench;
  auto* b = app.add_subcommand("benchmark", "Compare estimators on simulated panels");
  b->add_option("--cases", bench.cases, "Comma-separated kind:J:T0[:T1] cases")
      ->capture_default_str();
  b->add_option("--methods", bench.methods, "Comma-separated methods")->capture_default_str();
  b->add_option("--reps", bench.reps, "Replications per case")->capture_default_str();
  b->add_option("--seed", bench.seed, "Random seed")->capture_default_str();
  b->add_option("--iters", bench.iters, "Sampler sweeps per fit")->capture_default_str();
  b->add_option("--burn", bench.burn, "Sampler burn-in per fit")->capture_default_str();
  b->add_option("--threads", bench.threads, "Replications in flight (0 = all cores)")
      ->capture_default_str();
  b->add_option("--out", bench.out, "Output directory (default $BMC_OUTPUT_DIR or .)");

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Plot-ready CSV and SVG from fit outputs");
  r->add_option("--fit-dir", rep.fit_dir, "Directory holding effects.json (default output dir)");
  r->add_option("--out", rep.out, "Output directory (default the fit directory)");
  r->add_option("--title", rep.title, "Chart title");

  std::string command = "bmc";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    for (auto* sub : app.get_subcommands()) command = sub->get_name();
    print_error(err, command, "usage", e.what());
    return 2;
  }

  command = app.get_subcommands().front()->get_name();
  try {
    if (*s) cmd_simulate(sim, out);
    if (*f) cmd_fit(fit, out);
    if (*b) cmd_benchmark(bench, out);
    if (*r) cmd_report(rep, out);
  } catch (const NonFiniteStateError& e) {
    print_error(err, command, "numerical", e.what());
    return 1;
  } catch (const ArtifactError& e) {
    print_error(err, command, "io", e.what());
    return 1;
  } catch (const PanelFormatError& e) {
    print_error(err, command, "data", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    print_error(err, command, "config", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, command, "runtime", e.what());
    return 1;
  }
  return 0;
}

}  // namespace bmc
