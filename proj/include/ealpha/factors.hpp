#pragma once

#include <map>
#include <string>
#include <vector>

#include "ealpha/panel.hpp"
#include "ealpha/parallel.hpp"

namespace ealpha {

struct DailySeries {
  std::vector<int> days;
  std::vector<double> values;

  void validate() const;
};

/// Exponentially weighted mean of the last `window` daily values, most
/// recent day weighted 1 and weights halving every `halflife` days.
double halflife_weighted_return(const DailySeries& s, int window, double halflife = 60.0);

/// Information ratio of the excess over the industry mean across the window.
double industry_excess_ir(const DailySeries& s, const DailySeries& industry_mean, int window = 20);

/// Compound annual growth rate over `years` annual values.
double cgr(const std::vector<double>& annual_values, int years = 5);

/// Flips the sign of a reversal-style return when the stock's metric sits
/// below the market average; an exact tie keeps the sign.
double reversal_flip(double stock_metric, double market_avg, double stock_return);

struct BetaResidVol {
  double beta = 0.0;
  double resid_std = 0.0;
};

BetaResidVol ts_beta_residvol(const DailySeries& stock, const DailySeries& benchmark, int window = 250);

/// First-level factor groups and their ordered second-level members.
struct FactorHierarchy {
  std::vector<std::string> groups;
  std::map<std::string, std::vector<std::string>> members;

  void validate(const std::vector<std::string>& panel_factors) const;
};

struct EwmStandardized {
  std::vector<double> z_window;
  std::vector<double> z_current;
  bool degenerate = false;
};

/// Min-max scaling by the historical window range; current-month values are
/// clipped into [0,1]. A flat window flattens everything to 0.
EwmStandardized ewm_standardize(const std::vector<double>& window_cells,
                                const std::vector<double>& current_cells);

struct EwmEntropy {
  double e = 1.0;
  bool degenerate = false;
};

/// Shannon entropy of the cell-share distribution, scaled into [0,1] by the
/// log of the cell count. All-zero input carries no information: entropy 1.
EwmEntropy ewm_entropy(const std::vector<double>& z_cells);

struct EwmGroupWeights {
  std::vector<double> w;
  bool degenerate = false;
};

EwmGroupWeights ewm_weights(const std::vector<double>& entropies);

std::vector<double> ewm_aggregate(const std::vector<std::vector<double>>& z_current_per_member,
                                  const std::vector<double>& w);

struct EntropyVintage {
  MonthIndex window_start{0, 1};
  MonthIndex window_end{0, 1};
  std::map<std::string, std::vector<double>> w;
  std::map<std::string, std::vector<double>> entropy;
  std::map<std::string, bool> equal_weight_fallback;
};

struct EntropyWeightSeries {
  FactorHierarchy hierarchy;
  std::vector<EntropyVintage> vintages;
  std::vector<int> vintage_of_month;  // one entry per panel month

  /// Mean applied weight per group member across all panel months.
  std::map<std::string, std::vector<double>> mean_weights() const;
};

struct SynthesisResult {
  FactorPanel scores;  // factor columns are the group names
  EntropyWeightSeries weights;
};

/// Rolls the entropy weighting forward month by month: the first 12 months
/// share one vintage fitted on themselves, every later month gets a vintage
/// fitted on the 12 months before it.
SynthesisResult rolling_synthesize(const FactorPanel& panel, const FactorHierarchy& hierarchy,
                                   ExecMode mode = ExecMode::parallel);

}  // namespace ealpha
