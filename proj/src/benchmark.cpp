#include "bmc/benchmark.hpp"

#include <chrono>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "bmc/format.hpp"
#include "bmc/parallel.hpp"

namespace bmc {

std::string BenchmarkCase::label() const {
  return to_string(kind) + ":" + std::to_string(units) + ":" + std::to_string(pre);
}

BenchmarkCase parse_case(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() < 3 || parts.size() > 4)
    throw std::invalid_argument("case '" + text + "' must look like kind:J:T0[:T1]");
  BenchmarkCase c;
  c.kind = parse_dgp_kind(parts[0]);
  try {
    c.units = std::stol(parts[1]);
    c.pre = std::stol(parts[2]);
    if (parts.size() == 4) c.post = std::stol(parts[3]);
  } catch (const std::exception&) {
    throw std::invalid_argument("case '" + text + "' has a non-integer size");
  }
  DgpSpec spec;
  spec.kind = c.kind;
  spec.units = c.units;
  spec.pre = c.pre;
  spec.post = c.post;
  validate(spec);
  return c;
}

std::vector<std::string> available_methods() { return {"scm", "mcnnm", "bmc", "oracle"}; }

namespace {

Eigen::VectorXd at_treated(const Eigen::MatrixXd& m, const PanelData& panel) {
  const auto cells = panel.treated_cells();
  Eigen::VectorXd out(static_cast<Index>(cells.size()));
  for (std::size_t c = 0; c < cells.size(); ++c)
    out[static_cast<Index>(c)] = m(cells[c].unit, cells[c].period);
  return out;
}

}  // namespace

MethodFn make_method(const std::string& name, const BenchmarkOptions& opts) {
  if (name == "scm") {
    return [](const SyntheticPanel& sp, Rng&) {
      const PanelData& p = sp.panel;
      const auto cells = p.treated_cells();
      const Index treated = cells.front().unit;
      Index t0 = p.periods();
      for (const auto& c : cells) t0 = std::min(t0, c.period);
      const ScmFit fit = scm_fit(p, treated, t0);
      const Eigen::VectorXd path = scm_predict(p.outcomes, fit);
      Eigen::VectorXd out(static_cast<Index>(cells.size()));
      for (std::size_t c = 0; c < cells.size(); ++c) out[static_cast<Index>(c)] = path[cells[c].period];
      return out;
    };
  }
  if (name == "mcnnm") {
    return [opts](const SyntheticPanel& sp, Rng& rng) {
      const auto grid = default_nnm_grid(sp.panel, opts.nnm_grid_size);
      const SoftImputeFit fit = mc_nnm_cv(sp.panel, grid, opts.nnm_folds, rng, opts.nnm);
      return at_treated(fit.completed, sp.panel);
    };
  }
  if (name == "bmc") {
    return [opts](const SyntheticPanel& sp, Rng& rng) {
      const PosteriorDraws draws = run_mcmc(sp.panel, opts.bmc, rng);
      return Eigen::VectorXd(draws.y_miss.colwise().mean().transpose());
    };
  }
  if (name == "oracle") {
    return [](const SyntheticPanel& sp, Rng&) { return at_treated(sp.truth, sp.panel); };
  }
  std::string list;
  for (const auto& m : available_methods()) list += (list.empty() ? "" : ", ") + m;
  throw std::invalid_argument("unknown method '" + name + "'; available methods: " + list);
}

BenchmarkReport run_benchmark(const std::vector<BenchmarkCase>& cases,
                              const std::vector<std::string>& methods, std::size_t n_reps,
                              std::uint64_t seed, const BenchmarkOptions& opts) {
  std::vector<std::pair<std::string, MethodFn>> fns;
  for (const auto& m : methods) fns.emplace_back(m, make_method(m, opts));
  return run_benchmark(cases, fns, n_reps, seed, opts.threads);
}

BenchmarkReport run_benchmark(const std::vector<BenchmarkCase>& cases,
                              const std::vector<std::pair<std::string, MethodFn>>& methods,
                              std::size_t n_reps, std::uint64_t seed, unsigned threads) {
  std::size_t norm = methods.size();
  for (std::size_t m = 0; m < methods.size(); ++m)
    if (methods[m].first == kNormalizerMethod) norm = m;
  if (norm == methods.size())
    throw std::invalid_argument("benchmark needs the normalizer method '" + kNormalizerMethod + "'");
  if (cases.empty() || n_reps == 0) throw std::invalid_argument("benchmark needs cases and replications");

  const std::size_t n_methods = methods.size();
  const std::size_t n_jobs = cases.size() * n_reps;
  std::vector<ReplicationMetrics> raw(n_jobs * n_methods);
  parallel_for(
      n_jobs,
      [&](std::size_t job) {
        const std::size_t ci = job / n_reps;
        const std::size_t r = job % n_reps;
        const auto& c = cases[ci];
        DgpSpec spec;
        spec.kind = c.kind;
        spec.units = c.units;
        spec.pre = c.pre;
        spec.post = c.post;
        spec.atet = c.atet;
        Rng data_rng = make_rng(seed, {r});
        const SyntheticPanel sp = generate(spec, data_rng);
        const auto cells = sp.panel.treated_cells();
        Eigen::VectorXd truth(static_cast<Index>(cells.size()));
        for (std::size_t k = 0; k < cells.size(); ++k)
          truth[static_cast<Index>(k)] = sp.truth(cells[k].unit, cells[k].period);

        for (std::size_t m = 0; m < n_methods; ++m) {
          Rng rng = make_rng(seed, {r, m + 1});
          const auto start = std::chrono::steady_clock::now();
          const Eigen::VectorXd pred = methods[m].second(sp, rng);
          const double secs =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          if (pred.size() != truth.size())
            throw std::runtime_error("method '" + methods[m].first + "' returned wrong length");
          auto& out = raw[job * n_methods + m];
          out.case_index = ci;
          out.method = methods[m].first;
          out.replication = r;
          out.mse = (pred - truth).squaredNorm() / static_cast<double>(truth.size());
          out.mae = (pred - truth).cwiseAbs().sum() / static_cast<double>(truth.size());
          out.seconds = secs;
        }
        const double nmse = raw[job * n_methods + norm].mse;
        const double nmae = raw[job * n_methods + norm].mae;
        for (std::size_t m = 0; m < n_methods; ++m) {
          auto& out = raw[job * n_methods + m];
          out.normalized_mse = m == norm ? 1.0 : out.mse / nmse;
          out.normalized_mae = m == norm ? 1.0 : out.mae / nmae;
        }
      },
      threads);

  BenchmarkReport report;
  report.cases = cases;
  for (const auto& m : methods) report.methods.push_back(m.first);
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      BenchmarkRow row;
      row.case_label = cases[ci].label();
      row.method = methods[m].first;
      for (std::size_t r = 0; r < n_reps; ++r) {
        const auto& x = raw[(ci * n_reps + r) * n_methods + m];
        row.normalized_mse += x.normalized_mse;
        row.normalized_mae += x.normalized_mae;
        row.seconds += x.seconds;
      }
      const double n = static_cast<double>(n_reps);
      row.normalized_mse /= n;
      row.normalized_mae /= n;
      row.seconds /= n;
      row.replications = n_reps;
      report.rows.push_back(std::move(row));
    }
  }
  report.raw = std::move(raw);
  return report;
}

const BenchmarkRow& BenchmarkReport::row(std::size_t case_index, const std::string& method) const {
  for (std::size_t m = 0; m < methods.size(); ++m)
    if (methods[m] == method) return rows.at(case_index * methods.size() + m);
  throw std::out_of_range("method '" + method + "' not in report");
}

void write_report_csv(std::ostream& out, const BenchmarkReport& report, bool include_time) {
  out << "case,method,mse,mae";
  if (include_time) out << ",time";
  out << ",reps\n";
  for (const auto& r : report.rows) {
    out << r.case_label << ',' << r.method << ',' << format_number(r.normalized_mse) << ','
        << format_number(r.normalized_mae);
    if (include_time) out << ',' << format_number(r.seconds);
    out << ',' << r.replications << '\n';
  }
}

void write_raw_csv(std::ostream& out, const BenchmarkReport& report, bool include_time) {
  out << "case,replication,method,mse,mae,normalized_mse,normalized_mae";
  if (include_time) out << ",time";
  out << '\n';
  for (const auto& x : report.raw) {
    out << report.cases[x.case_index].label() << ',' << x.replication + 1 << ',' << x.method << ','
        << format_number(x.mse) << ',' << format_number(x.mae) << ','
        << format_number(x.normalized_mse) << ',' << format_number(x.normalized_mae);
    if (include_time) out << ',' << format_number(x.seconds);
    out << '\n';
  }
}

}  // namespace bmc
