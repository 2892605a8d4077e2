#include "ealpha/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ealpha/errors.hpp"

namespace ealpha {

double vec_mean(const std::vector<double>& v) {
  if (v.empty()) fail(ErrorCode::precondition, "mean of empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double vec_stddev(const std::vector<double>& v) {
  if (v.size() < 2) fail(ErrorCode::precondition, "sample stddev needs at least 2 values");
  const double mu = vec_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double vec_median(std::vector<double> v) {
  if (v.empty()) fail(ErrorCode::precondition, "median of empty vector");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> average_tie_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) fail(ErrorCode::alignment, "correlation inputs differ in length");
  if (x.size() < 2) fail(ErrorCode::precondition, "correlation needs at least 2 points");
  const double mx = vec_mean(x);
  const double my = vec_mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    fail(ErrorCode::undefined_value, "correlation undefined for a constant vector");
  return sxy / std::sqrt(sxx * syy);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(average_tie_ranks(x), average_tie_ranks(y));
}

}  // namespace ealpha
