#include "bmc/effects.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "bmc/format.hpp"
#include "json.hpp"

namespace bmc {

double quantile(std::span<const double> samples, double p) {
  if (samples.empty()) throw std::invalid_argument("quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile probability outside [0, 1]");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  const double pos = n * p + 0.5;  // 1-based
  if (pos <= 1.0) return x.front();
  if (pos >= n) return x.back();
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  return x[lo - 1] + frac * (x[lo] - x[lo - 1]);
}

std::pair<double, double> credible_interval(std::span<const double> samples, double level) {
  if (samples.empty()) throw std::invalid_argument("credible interval of empty sample");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("credible level must lie in (0, 1)");
  const double tail = 0.5 * (1.0 - level);
  return {quantile(samples, tail), quantile(samples, 1.0 - tail)};
}

namespace {

void check_alignment(const PosteriorDraws& draws, const PanelData& data) {
  if (draws.treated_cells != data.treated_cells())
    throw std::invalid_argument("posterior draws are not aligned with the panel's treated cells");
  if (draws.y_miss.cols() != static_cast<Index>(draws.treated_cells.size()))
    throw std::invalid_argument("draw matrix width does not match treated cell count");
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

Eigen::VectorXd atet_per_draw(const PosteriorDraws& draws, const PanelData& data) {
  check_alignment(draws, data);
  const auto& cells = draws.treated_cells;
  if (cells.empty()) throw std::invalid_argument("no treated cells: ATET undefined");
  Eigen::VectorXd realized(static_cast<Index>(cells.size()));
  for (std::size_t c = 0; c < cells.size(); ++c)
    realized[static_cast<Index>(c)] = data.outcomes(cells[c].unit, cells[c].period);
  const double n = static_cast<double>(cells.size());
  return (realized.sum() - draws.y_miss.rowwise().sum().array()).matrix() / n;
}

EffectSummary atet_posterior(const PosteriorDraws& draws, const PanelData& data,
                             const std::vector<double>& levels) {
  EffectSummary s;
  s.atet_draws = atet_per_draw(draws, data);
  const Index N = s.atet_draws.size();
  if (N == 0) throw std::invalid_argument("no posterior draws");
  s.n_treated = static_cast<Index>(draws.treated_cells.size());
  s.atet_mean = s.atet_draws.mean();
  s.atet_sd = N > 1 ? std::sqrt((s.atet_draws.array() - s.atet_mean).square().sum() / (N - 1))
                    : 0.0;
  const auto atet = as_span(s.atet_draws);
  for (double p : {0.025, 0.05, 0.15, 0.5, 0.85, 0.95, 0.975}) s.atet_quantiles[p] = quantile(atet, p);
  for (double level : levels) {
    const auto [lo, hi] = credible_interval(atet, level);
    s.atet_intervals.push_back({level, lo, hi});
  }

  const Index J = data.units();
  const Index T = data.periods();
  std::vector<Index> tracked;
  for (Index j = 0; j < J; ++j)
    if ((data.mask.row(j).array() != 0).any()) tracked.push_back(j);
  // Column of each treated cell in the draw matrix.
  Eigen::MatrixXi column = Eigen::MatrixXi::Constant(J, T, -1);
  for (std::size_t c = 0; c < draws.treated_cells.size(); ++c)
    column(draws.treated_cells[c].unit, draws.treated_cells[c].period) = static_cast<int>(c);

  const auto labels = data.period_labels.empty() ? numbered_labels(T) : data.period_labels;
  const double n_tracked = static_cast<double>(tracked.size());
  for (Index t = 0; t < T; ++t) {
    PeriodEffect pe;
    pe.period = t;
    pe.label = labels[static_cast<std::size_t>(t)];
    Eigen::VectorXd cf = Eigen::VectorXd::Zero(N);
    for (Index j : tracked) {
      pe.realized += data.outcomes(j, t);
      if (column(j, t) >= 0) {
        ++pe.treated_cells;
        cf += draws.y_miss.col(column(j, t));
      } else {
        cf.array() += data.outcomes(j, t);
      }
    }
    pe.realized /= n_tracked;
    cf /= n_tracked;
    // Rounding in the sum can push the mean of constant draws past them.
    pe.counterfactual_mean = std::clamp(cf.mean(), cf.minCoeff(), cf.maxCoeff());
    for (double level : levels) {
      const auto [lo, hi] = credible_interval(as_span(cf), level);
      pe.bands.push_back({level, lo, hi});
    }
    s.per_period.push_back(std::move(pe));
  }
  return s;
}

Eigen::VectorXd eigenvalue_summary(const PosteriorDraws& draws) {
  if (draws.gamma_eig.rows() == 0) throw std::invalid_argument("no eigenvalue draws");
  Eigen::VectorXd means = draws.gamma_eig.colwise().mean().transpose();
  std::sort(means.data(), means.data() + means.size(), std::greater<>());
  return means;
}

LoadingSummary loading_summary(const PosteriorDraws& draws, Index unit, double level) {
  if (draws.phi.empty())
    throw std::invalid_argument(
        "loading draws were not retained; rerun the sampler with keep_phi (--keep-phi)");
  const Index H = draws.phi.front().cols();
  if (unit < 0 || unit >= draws.phi.front().rows()) throw std::invalid_argument("unit out of range");
  LoadingSummary out{Eigen::VectorXd(H), Eigen::VectorXd(H), Eigen::VectorXd(H), level};
  std::vector<double> values(draws.phi.size());
  for (Index h = 0; h < H; ++h) {
    double sum = 0.0;
    for (std::size_t i = 0; i < draws.phi.size(); ++i) {
      values[i] = draws.phi[i](unit, h);
      sum += values[i];
    }
    std::tie(out.low[h], out.high[h]) = credible_interval(values, level);
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    out.mean[h] = std::clamp(sum / static_cast<double>(values.size()), *mn, *mx);
  }
  return out;
}

namespace {

std::string level_key(double level) {
  return std::to_string(static_cast<int>(std::lround(level * 100.0)));
}

}  // namespace

void write_summary_json(std::ostream& out, const EffectSummary& s) {
  nlohmann::ordered_json j;
  j["atet_mean"] = s.atet_mean;
  j["atet_sd"] = s.atet_sd;
  j["n_treated_cells"] = s.n_treated;
  j["n_draws"] = s.atet_draws.size();
  auto& q = j["atet_quantiles"] = nlohmann::ordered_json::object();
  for (const auto& [p, v] : s.atet_quantiles) q[format_number(p)] = v;
  auto& ci = j["atet_intervals"] = nlohmann::ordered_json::array();
  for (const auto& b : s.atet_intervals) ci.push_back({{"level", b.level}, {"low", b.low}, {"high", b.high}});
  auto& pp = j["per_period"] = nlohmann::ordered_json::array();
  for (const auto& pe : s.per_period) {
    nlohmann::ordered_json row;
    row["period"] = pe.period;
    row["label"] = pe.label;
    row["treated_cells"] = pe.treated_cells;
    row["realized"] = pe.realized;
    row["counterfactual_mean"] = pe.counterfactual_mean;
    auto& bands = row["bands"] = nlohmann::ordered_json::array();
    for (const auto& b : pe.bands) bands.push_back({{"level", b.level}, {"low", b.low}, {"high", b.high}});
    pp.push_back(std::move(row));
  }
  out << j.dump(2) << '\n';
}

EffectSummary read_summary_json(std::istream& in) {
  const auto j = nlohmann::json::parse(in);
  EffectSummary s;
  s.atet_mean = j.at("atet_mean").get<double>();
  s.atet_sd = j.at("atet_sd").get<double>();
  s.n_treated = j.at("n_treated_cells").get<Index>();
  for (const auto& [k, v] : j.at("atet_quantiles").items()) s.atet_quantiles[std::stod(k)] = v.get<double>();
  for (const auto& b : j.at("atet_intervals"))
    s.atet_intervals.push_back({b.at("level").get<double>(), b.at("low").get<double>(), b.at("high").get<double>()});
  for (const auto& row : j.at("per_period")) {
    PeriodEffect pe;
    pe.period = row.at("period").get<Index>();
    pe.label = row.at("label").get<std::string>();
    pe.treated_cells = row.at("treated_cells").get<Index>();
    pe.realized = row.at("realized").get<double>();
    pe.counterfactual_mean = row.at("counterfactual_mean").get<double>();
    for (const auto& b : row.at("bands"))
      pe.bands.push_back({b.at("level").get<double>(), b.at("low").get<double>(), b.at("high").get<double>()});
    s.per_period.push_back(std::move(pe));
  }
  return s;
}

void write_period_csv(std::ostream& out, const EffectSummary& s) {
  out << "period,label,treated_cells,realized,counterfactual_mean";
  if (!s.per_period.empty())
    for (const auto& b : s.per_period.front().bands)
      out << ",low_" << level_key(b.level) << ",high_" << level_key(b.level);
  out << '\n';
  for (const auto& pe : s.per_period) {
    out << pe.period + 1 << ',' << pe.label << ',' << pe.treated_cells << ','
        << format_number(pe.realized) << ',' << format_number(pe.counterfactual_mean);
    for (const auto& b : pe.bands) out << ',' << format_number(b.low) << ',' << format_number(b.high);
    out << '\n';
  }
}

}  // namespace bmc
