#include "ealpha/metrics.hpp"

#include <cmath>

#include "ealpha/errors.hpp"
#include "ealpha/stats.hpp"

namespace ealpha {

namespace {

void check_aligned(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(ErrorCode::alignment, "metric inputs differ in length");
  if (a.empty()) fail(ErrorCode::precondition, "metric inputs are empty");
}

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

double DirectionOutcome::precision() const { return safe_ratio(tp, tp + fp); }
double DirectionOutcome::recall() const { return safe_ratio(tp, tp + fn); }
double DirectionOutcome::f1() const {
  const double p = precision();
  const double r = recall();
  return safe_ratio(2.0 * p * r, p + r);
}

double rmse(const std::vector<double>& pred, const std::vector<double>& actual) {
  check_aligned(pred, actual);
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

double mape(const std::vector<double>& pred, const std::vector<double>& actual, double eps) {
  check_aligned(pred, actual);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    total += std::fabs(pred[i] - actual[i]) / std::max(std::fabs(actual[i]), eps);
  }
  return total / static_cast<double>(pred.size());
}

DirectionOutcome classify_directions(const std::vector<double>& pred, const std::vector<double>& actual,
                                     double threshold) {
  check_aligned(pred, actual);
  DirectionOutcome out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool pu = pred[i] > threshold;
    const bool au = actual[i] > threshold;
    if (pu && au)
      ++out.tp;
    else if (pu && !au)
      ++out.fp;
    else if (!pu && au)
      ++out.fn;
    else
      ++out.tn;
  }
  return out;
}

double ic_at(const std::vector<double>& predictions, const std::vector<double>& realized_next) {
  return spearman(predictions, realized_next);
}

std::vector<std::vector<double>> ICSeries::cumulative() const {
  std::vector<std::vector<double>> out(ic.size());
  for (std::size_t k = 0; k < ic.size(); ++k) {
    out[k].resize(ic[k].size());
    double run = 0.0;
    for (std::size_t t = 0; t < ic[k].size(); ++t) {
      run += ic[k][t];
      out[k][t] = run;
    }
  }
  return out;
}

}  // namespace ealpha
