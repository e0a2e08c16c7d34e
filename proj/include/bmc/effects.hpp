#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bmc/panel.hpp"
#include "bmc/sampler.hpp"

namespace bmc {

// Empirical quantile with linear interpolation between order statistics:
// the k-th smallest of n values sits at probability (k - 0.5) / n, and
// probabilities outside [0.5/n, 1 - 0.5/n] clamp to the extremes.
double quantile(std::span<const double> samples, double p);

// Equal-tailed interval at `level` in (0, 1).
std::pair<double, double> credible_interval(std::span<const double> samples, double level);

struct Band {
  double level = 0.0;
  double low = 0.0;
  double high = 0.0;
};

// Averages over the cells (j, t) of every unit that is treated in at least
// one period. Untreated cells contribute their observed value to every draw,
// so bands collapse where nothing is imputed.
struct PeriodEffect {
  Index period = 0;
  std::string label;
  Index treated_cells = 0;
  double realized = 0.0;
  double counterfactual_mean = 0.0;
  std::vector<Band> bands;
};

struct EffectSummary {
  double atet_mean = 0.0;
  double atet_sd = 0.0;
  std::map<double, double> atet_quantiles;  // probability -> value
  std::vector<Band> atet_intervals;
  std::vector<PeriodEffect> per_period;
  Eigen::VectorXd atet_draws;  // one ATET per posterior draw
  Index n_treated = 0;
};

// Per-draw ATET: mean over treated cells of y(1) - y^(i)(0).
Eigen::VectorXd atet_per_draw(const PosteriorDraws& draws, const PanelData& data);

EffectSummary atet_posterior(const PosteriorDraws& draws, const PanelData& data,
                             const std::vector<double>& levels = {0.7, 0.9});

// Posterior mean of each singular value of Gamma, descending.
Eigen::VectorXd eigenvalue_summary(const PosteriorDraws& draws);

struct LoadingSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd low;
  Eigen::VectorXd high;
  double level = 0.0;
};

LoadingSummary loading_summary(const PosteriorDraws& draws, Index unit, double level);

void write_summary_json(std::ostream& out, const EffectSummary& summary);
EffectSummary read_summary_json(std::istream& in);
// period, label, treated_cells, realized, counterfactual_mean, then
// low_<pct>/high_<pct> per band level.
void write_period_csv(std::ostream& out, const EffectSummary& summary);

}  // namespace bmc
