#include "ealpha/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "ealpha/errors.hpp"
#include "ealpha/stats.hpp"

namespace ealpha {

const char* scheme_name(SchemeId scheme) {
  switch (scheme) {
    case SchemeId::rmse:
      return "rmse";
    case SchemeId::mape:
      return "mape";
    case SchemeId::precision:
      return "precision";
    case SchemeId::recall:
      return "recall";
    case SchemeId::f1:
      return "f1";
    case SchemeId::ic_mean:
      return "ic_mean";
    case SchemeId::ic_ratio:
      return "ic_ratio";
  }
  return "unknown";
}

SchemeId scheme_from_name(const std::string& name) {
  for (SchemeId s : all_schemes())
    if (name == scheme_name(s)) return s;
  fail(ErrorCode::config, "unknown weighting scheme '" + name + "'");
}

std::vector<SchemeId> all_schemes() {
  return {SchemeId::rmse,   SchemeId::mape, SchemeId::precision, SchemeId::recall,
          SchemeId::f1,     SchemeId::ic_mean, SchemeId::ic_ratio};
}

bool scheme_uses_ic(SchemeId scheme) {
  return scheme == SchemeId::ic_mean || scheme == SchemeId::ic_ratio;
}

WeightVector equal_weights(std::size_t n_models) {
  if (n_models == 0) fail(ErrorCode::precondition, "need at least one model to weight");
  WeightVector wv;
  wv.w.assign(n_models, 1.0 / static_cast<double>(n_models));
  wv.warm_up = true;
  return wv;
}

namespace {

std::vector<double> trailing_means(const std::vector<std::vector<double>>& history, int window) {
  const std::size_t len = history.front().size();
  for (const auto& h : history)
    if (h.size() != len) fail(ErrorCode::alignment, "metric histories differ in length");
  if (len == 0) fail(ErrorCode::precondition, "metric history is empty");

  const std::size_t take = std::min(len, static_cast<std::size_t>(window));
  std::vector<double> means;
  for (const auto& h : history) {
    double acc = 0.0;
    for (std::size_t t = len - take; t < len; ++t) acc += h[t];
    means.push_back(acc / static_cast<double>(take));
  }
  return means;
}

}  // namespace

WeightVector metric_weights(const std::vector<std::vector<double>>& history, SchemeId scheme,
                            int window) {
  if (scheme_uses_ic(scheme))
    fail(ErrorCode::config, "metric weighting does not apply to IC schemes");
  if (history.empty()) fail(ErrorCode::precondition, "need at least one model to weight");
  if (window < 1) fail(ErrorCode::config, "metric window must be positive");

  const bool invert = scheme == SchemeId::rmse || scheme == SchemeId::mape;
  std::vector<double> scores = trailing_means(history, window);
  if (invert)
    for (double& s : scores) s = 1.0 / std::max(s, 1e-12);

  double total = 0.0;
  for (double s : scores) total += s;
  WeightVector wv;
  if (total == 0.0) {
    wv = equal_weights(history.size());
    wv.scores = scores;
    wv.warm_up = false;
    wv.degenerate = true;
    return wv;
  }
  for (double s : scores) wv.w.push_back(s / total);
  wv.scores = scores;
  return wv;
}

std::vector<double> ic_scores(const std::vector<std::vector<double>>& ic_history, SchemeId mode,
                              double eps) {
  if (!scheme_uses_ic(mode)) fail(ErrorCode::config, "ic scoring needs an IC scheme");
  std::vector<double> scores;
  for (const auto& h : ic_history) {
    if (h.empty()) fail(ErrorCode::precondition, "IC history is empty");
    if (mode == SchemeId::ic_mean) {
      scores.push_back(vec_mean(h));
    } else {
      if (h.size() < 2)
        fail(ErrorCode::insufficient_history, "IC dispersion needs at least 2 observations");
      scores.push_back(vec_mean(h) / (vec_stddev(h) + eps));
    }
  }
  return scores;
}

WeightVector normalize_scores(const std::vector<double>& scores, bool equal_weight_fallback) {
  double total = 0.0;
  for (double s : scores) total += std::max(s, 0.0);
  WeightVector wv;
  if (total == 0.0) {
    if (equal_weight_fallback && !scores.empty()) {
      wv = equal_weights(scores.size());
      wv.warm_up = false;
    } else {
      wv.w.assign(scores.size(), 0.0);
    }
    wv.scores = scores;
    wv.degenerate = true;
    return wv;
  }
  for (double s : scores) wv.w.push_back(std::max(s, 0.0) / total);
  wv.scores = scores;
  return wv;
}

std::vector<double> combine(const std::vector<std::vector<double>>& predictions,
                            const WeightVector& weights) {
  if (predictions.size() != weights.w.size())
    fail(ErrorCode::alignment, "prediction sets and weights disagree on model count");
  if (predictions.empty()) fail(ErrorCode::precondition, "nothing to combine");
  const std::size_t n = predictions.front().size();
  for (const auto& p : predictions)
    if (p.size() != n) fail(ErrorCode::alignment, "models predict different stock sets");

  std::vector<double> out(n, 0.0);
  for (std::size_t m = 0; m < predictions.size(); ++m)
    for (std::size_t s = 0; s < n; ++s) out[s] += weights.w[m] * predictions[m][s];
  return out;
}

WeightVector scheme_weights(SchemeId scheme, const std::vector<std::vector<double>>& metric_history,
                            const std::vector<std::vector<double>>& ic_history, int metric_window,
                            int ic_window, bool equal_weight_fallback) {
  if (scheme_uses_ic(scheme)) {
    if (ic_history.empty()) fail(ErrorCode::precondition, "need at least one model to weight");
    const std::size_t have = ic_history.front().size();
    for (const auto& h : ic_history)
      if (h.size() != have) fail(ErrorCode::alignment, "IC histories differ in length");
    if (have < static_cast<std::size_t>(ic_window)) return equal_weights(ic_history.size());

    std::vector<std::vector<double>> window_slices;
    for (const auto& h : ic_history)
      window_slices.emplace_back(h.end() - static_cast<std::ptrdiff_t>(ic_window), h.end());
    return normalize_scores(ic_scores(window_slices, scheme), equal_weight_fallback);
  }
  if (metric_history.empty()) fail(ErrorCode::precondition, "need at least one model to weight");
  if (metric_history.front().empty()) return equal_weights(metric_history.size());
  return metric_weights(metric_history, scheme, metric_window);
}

}  // namespace ealpha
