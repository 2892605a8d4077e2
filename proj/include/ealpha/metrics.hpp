#pragma once

#include <map>
#include <string>
#include <vector>

#include "ealpha/month.hpp"

namespace ealpha {

struct DirectionOutcome {
  int tp = 0;
  int fp = 0;
  int tn = 0;
  int fn = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

double rmse(const std::vector<double>& pred, const std::vector<double>& actual);

/// Mean absolute percentage error with a floor on |actual| so zero realized
/// returns yield a large but finite value instead of a division blowup.
double mape(const std::vector<double>& pred, const std::vector<double>& actual, double eps = 1e-8);

DirectionOutcome classify_directions(const std::vector<double>& pred, const std::vector<double>& actual,
                                     double threshold = 0.0);

/// Rank correlation between one month's predictions and the following
/// month's realized returns, over the same stock set.
double ic_at(const std::vector<double>& predictions, const std::vector<double>& realized_next);

/// Chronological IC values per model plus running sums.
struct ICSeries {
  std::vector<MonthIndex> months;
  std::vector<std::string> models;
  std::vector<std::vector<double>> ic;  // [model][month]

  std::vector<std::vector<double>> cumulative() const;
};

}  // namespace ealpha
