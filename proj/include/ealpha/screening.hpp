#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ealpha/panel.hpp"
#include "ealpha/parallel.hpp"

namespace ealpha {

struct LassoFit {
  std::vector<double> beta;
  double intercept = 0.0;
  double lambda = 0.0;
  int n_iter = 0;
  bool converged = false;
};

/// Cyclic coordinate descent with soft-thresholding for the penalized loss
/// sum((y - X b)^2) + lambda * sum(|b_j|). Columns must arrive standardized
/// and y centered; the soft threshold is lambda / (2 * sum(x_j^2)).
LassoFit fit_lasso(const std::vector<std::vector<double>>& x_cols, const std::vector<double>& y,
                   double lambda);

/// Picks the grid value with the lowest mean out-of-fold squared error.
/// Folds are contiguous blocks: rows sharing a block id never straddle a
/// fold boundary, which keeps panel months together. Ties go to the larger
/// lambda. The seed is retained for interface stability; fold assignment is
/// deterministic.
double select_lambda(const std::vector<std::vector<double>>& x_cols, const std::vector<double>& y,
                     const std::vector<double>& grid, int k_folds, std::uint64_t seed,
                     const std::vector<int>* row_blocks = nullptr,
                     std::vector<std::pair<double, double>>* cv_curve = nullptr,
                     ExecMode mode = ExecMode::serial);

struct ScreenConfig {
  std::vector<double> grid;  // empty: derived from the data, see screen_factors
  int k_folds = 5;
  std::uint64_t seed = 0;
  ExecMode mode = ExecMode::parallel;
};

struct ScreenResult {
  std::vector<std::string> candidates;
  std::vector<std::string> kept;
  std::vector<std::string> excluded;
  double lambda_selected = 0.0;
  std::vector<std::pair<double, double>> cv_curve;
  LassoFit fit;
};

/// Pools every eligible (month, stock) row of a preprocessed panel with
/// next-month return as target, cross-validates the penalty, and splits the
/// factors into kept and excluded by the final coefficients.
ScreenResult screen_factors(const FactorPanel& panel, const ScreenConfig& cfg = {});

}  // namespace ealpha
