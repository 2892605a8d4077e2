#pragma once

#include <string>
#include <vector>

#include "ealpha/month.hpp"

namespace ealpha {

/// The seven forecast-combination schemes: five driven by rolling evaluation
/// metrics, two by the information coefficient history.
enum class SchemeId { rmse, mape, precision, recall, f1, ic_mean, ic_ratio };

const char* scheme_name(SchemeId scheme);
SchemeId scheme_from_name(const std::string& name);
std::vector<SchemeId> all_schemes();
bool scheme_uses_ic(SchemeId scheme);

struct WeightVector {
  MonthIndex month{0, 1};
  std::vector<double> w;
  std::vector<double> scores;  // pre-normalization; empty during warm-up
  bool warm_up = false;        // not enough history, equal weights substituted
  bool degenerate = false;     // every score was zero or clipped to zero
};

WeightVector equal_weights(std::size_t n_models);

/// Scores from trailing metric history: the mean of each model's last
/// `window` observations, inverted for error metrics where smaller is
/// better. All-zero scores fall back to equal weights, flagged.
WeightVector metric_weights(const std::vector<std::vector<double>>& history, SchemeId scheme,
                            int window = 20);

/// Per-model scores from IC history: the mean, or the mean over the
/// dispersion (sample standard deviation plus eps).
std::vector<double> ic_scores(const std::vector<std::vector<double>>& ic_history, SchemeId mode,
                              double eps = 1e-8);

/// Negative scores are clipped to zero before normalizing. When everything
/// clips away the weights are all zero, or equal when the fallback is on.
WeightVector normalize_scores(const std::vector<double>& scores,
                              bool equal_weight_fallback = false);

/// Weighted sum of the models' per-stock predictions.
std::vector<double> combine(const std::vector<std::vector<double>>& predictions,
                            const WeightVector& weights);

/// Month policy: metric schemes average whatever history exists, IC schemes
/// need `ic_window` observations before scoring; anything short of that gets
/// equal warm-up weights.
WeightVector scheme_weights(SchemeId scheme, const std::vector<std::vector<double>>& metric_history,
                            const std::vector<std::vector<double>>& ic_history, int metric_window,
                            int ic_window, bool equal_weight_fallback);

}  // namespace ealpha
