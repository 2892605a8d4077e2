#pragma once

#include <vector>

namespace ealpha {

double vec_mean(const std::vector<double>& v);

/// Sample standard deviation (n-1 denominator).
double vec_stddev(const std::vector<double>& v);

double vec_median(std::vector<double> v);

/// 1-based ranks; tied values share the average of the ranks they span.
std::vector<double> average_tie_ranks(const std::vector<double>& v);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Pearson correlation of average-tie ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace ealpha
