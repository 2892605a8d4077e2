#include "ealpha/screening.hpp"

#include <algorithm>
#include <cmath>

#include "ealpha/errors.hpp"
#include "ealpha/stats.hpp"

namespace ealpha {

namespace {

constexpr double kSweepTol = 1e-7;
constexpr int kMaxSweeps = 10000;
constexpr double kExclusionTol = 1e-10;

double soft_threshold(double a, double t) {
  if (a > t) return a - t;
  if (a < -t) return a + t;
  return 0.0;
}

void check_standardized(const std::vector<std::vector<double>>& x_cols, std::size_t n) {
  for (std::size_t j = 0; j < x_cols.size(); ++j) {
    if (x_cols[j].size() != n) fail(ErrorCode::alignment, "design columns differ in length");
    if (std::fabs(vec_mean(x_cols[j])) > 1e-6)
      fail(ErrorCode::precondition, "design column " + std::to_string(j) + " is not centered");
    if (std::fabs(vec_stddev(x_cols[j]) - 1.0) > 1e-3)
      fail(ErrorCode::precondition, "design column " + std::to_string(j) + " is not standardized");
  }
}

}  // namespace

LassoFit fit_lasso(const std::vector<std::vector<double>>& x_cols, const std::vector<double>& y,
                   double lambda) {
  const std::size_t n = y.size();
  const std::size_t p = x_cols.size();
  if (n < 2) fail(ErrorCode::precondition, "lasso needs at least 2 rows");
  if (lambda < 0.0) fail(ErrorCode::precondition, "lambda must be nonnegative");
  check_standardized(x_cols, n);

  LassoFit fit;
  fit.lambda = lambda;
  fit.intercept = vec_mean(y);
  fit.beta.assign(p, 0.0);

  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - fit.intercept;

  std::vector<double> col_sq(p, 0.0);
  for (std::size_t j = 0; j < p; ++j)
    for (double v : x_cols[j]) col_sq[j] += v * v;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double max_delta = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double rho = 0.0;
      const std::vector<double>& xj = x_cols[j];
      for (std::size_t i = 0; i < n; ++i) rho += xj[i] * r[i];
      rho += fit.beta[j] * col_sq[j];
      const double next = soft_threshold(rho, lambda / 2.0) / col_sq[j];
      const double delta = next - fit.beta[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) r[i] -= delta * xj[i];
        fit.beta[j] = next;
      }
      max_delta = std::max(max_delta, std::fabs(delta));
    }
    fit.n_iter = sweep + 1;
    if (max_delta < kSweepTol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

namespace {

struct FoldData {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> valid_rows;
  std::vector<std::vector<double>> x_train;  // standardized, kept columns only
  std::vector<std::vector<double>> x_valid;  // same transform as train
  std::vector<double> y_train;               // centered by the train mean
  std::vector<double> y_valid_offset;        // y_valid minus the train mean
  std::vector<std::size_t> kept_cols;
};

FoldData build_fold(const std::vector<std::vector<double>>& x_cols, const std::vector<double>& y,
                    const std::vector<int>& fold_of_row, int fold) {
  FoldData fd;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (fold_of_row[i] == fold)
      fd.valid_rows.push_back(i);
    else
      fd.train_rows.push_back(i);
  }
  if (fd.valid_rows.empty() || fd.train_rows.size() < 2)
    fail(ErrorCode::degenerate, "cross-validation fold " + std::to_string(fold) + " is degenerate");

  std::vector<double> yt;
  yt.reserve(fd.train_rows.size());
  for (std::size_t i : fd.train_rows) yt.push_back(y[i]);
  const double y_mean = vec_mean(yt);
  for (double v : yt) fd.y_train.push_back(v - y_mean);
  for (std::size_t i : fd.valid_rows) fd.y_valid_offset.push_back(y[i] - y_mean);

  for (std::size_t j = 0; j < x_cols.size(); ++j) {
    std::vector<double> tr;
    tr.reserve(fd.train_rows.size());
    for (std::size_t i : fd.train_rows) tr.push_back(x_cols[j][i]);
    const double mu = vec_mean(tr);
    const double sd = vec_stddev(tr);
    if (sd == 0.0) continue;  // constant within this fold's train slice, carries nothing
    fd.kept_cols.push_back(j);
    std::vector<double> ts;
    ts.reserve(tr.size());
    for (double v : tr) ts.push_back((v - mu) / sd);
    fd.x_train.push_back(std::move(ts));
    std::vector<double> vs;
    vs.reserve(fd.valid_rows.size());
    for (std::size_t i : fd.valid_rows) vs.push_back((x_cols[j][i] - mu) / sd);
    fd.x_valid.push_back(std::move(vs));
  }
  return fd;
}

}  // namespace

double select_lambda(const std::vector<std::vector<double>>& x_cols, const std::vector<double>& y,
                     const std::vector<double>& grid, int k_folds, std::uint64_t seed,
                     const std::vector<int>* row_blocks,
                     std::vector<std::pair<double, double>>* cv_curve, ExecMode mode) {
  (void)seed;
  const std::size_t n = y.size();
  if (grid.empty()) fail(ErrorCode::precondition, "lambda grid is empty");
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (grid[g] <= 0.0) fail(ErrorCode::precondition, "lambda grid must be strictly positive");
    if (g > 0 && grid[g] >= grid[g - 1])
      fail(ErrorCode::precondition, "lambda grid must be sorted descending");
  }
  if (k_folds < 2) fail(ErrorCode::precondition, "cross-validation needs at least 2 folds");
  if (n < static_cast<std::size_t>(k_folds))
    fail(ErrorCode::precondition, "fewer rows than cross-validation folds");

  // Rows sharing a block id stay in one fold; without ids each row is its
  // own block, so folds become contiguous row ranges.
  std::vector<int> block_of_row(n);
  if (row_blocks != nullptr) {
    if (row_blocks->size() != n) fail(ErrorCode::alignment, "row block ids differ in length");
    int next_id = -1;
    int last_raw = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int raw = (*row_blocks)[i];
      if (next_id < 0 || raw != last_raw) {
        ++next_id;
        last_raw = raw;
      }
      block_of_row[i] = next_id;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) block_of_row[i] = static_cast<int>(i);
  }
  const int n_blocks = block_of_row.back() + 1;
  if (n_blocks < k_folds)
    fail(ErrorCode::precondition, "fewer row blocks than cross-validation folds");
  std::vector<int> fold_of_row(n);
  for (std::size_t i = 0; i < n; ++i) {
    fold_of_row[i] = static_cast<int>(
        static_cast<long long>(block_of_row[i]) * k_folds / n_blocks);
  }

  std::vector<FoldData> folds;
  folds.reserve(static_cast<std::size_t>(k_folds));
  for (int f = 0; f < k_folds; ++f) folds.push_back(build_fold(x_cols, y, fold_of_row, f));

  std::vector<double> sse(grid.size() * static_cast<std::size_t>(k_folds), 0.0);
  run_for(mode, grid.size() * static_cast<std::size_t>(k_folds), [&](std::size_t task) {
    const std::size_t g = task / static_cast<std::size_t>(k_folds);
    const std::size_t f = task % static_cast<std::size_t>(k_folds);
    const FoldData& fd = folds[f];
    const LassoFit fit = fit_lasso(fd.x_train, fd.y_train, grid[g]);
    double acc = 0.0;
    for (std::size_t v = 0; v < fd.valid_rows.size(); ++v) {
      double pred = fit.intercept;
      for (std::size_t j = 0; j < fd.kept_cols.size(); ++j) pred += fit.beta[j] * fd.x_valid[j][v];
      const double err = fd.y_valid_offset[v] - pred;
      acc += err * err;
    }
    sse[task] = acc;
  });

  std::size_t best = 0;
  double best_err = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double total = 0.0;
    for (int f = 0; f < k_folds; ++f) total += sse[g * static_cast<std::size_t>(k_folds) + static_cast<std::size_t>(f)];
    const double mean_err = total / static_cast<double>(n);
    if (cv_curve != nullptr) cv_curve->emplace_back(grid[g], mean_err);
    if (g == 0 || mean_err < best_err) {
      best = g;
      best_err = mean_err;
    }
  }
  return grid[best];
}

ScreenResult screen_factors(const FactorPanel& panel, const ScreenConfig& cfg) {
  const int n_m = panel.n_months();
  const int n_s = panel.n_stocks();
  const int n_f = panel.n_factors();

  std::vector<std::vector<double>> x_cols(static_cast<std::size_t>(n_f));
  std::vector<double> y;
  std::vector<int> row_month;
  for (int m = 0; m < n_m; ++m) {
    for (int s = 0; s < n_s; ++s) {
      if (panel.flags(m, s).any()) continue;
      const double ret = panel.next_return(m, s);
      if (is_missing(ret)) continue;
      bool complete = true;
      for (int f = 0; f < n_f && complete; ++f)
        if (is_missing(panel.value(m, s, f))) complete = false;
      if (!complete) continue;
      for (int f = 0; f < n_f; ++f) x_cols[static_cast<std::size_t>(f)].push_back(panel.value(m, s, f));
      y.push_back(ret);
      row_month.push_back(m);
    }
  }
  if (y.size() < 10) fail(ErrorCode::insufficient_history, "too few usable rows for factor screening");

  ScreenResult out;
  out.candidates = panel.factor_names();

  // Standardize the pooled design; columns flat across the whole pool are
  // excluded outright since the penalty could never pick them.
  std::vector<std::vector<double>> x_std;
  std::vector<int> live_cols;
  for (int f = 0; f < n_f; ++f) {
    std::vector<double>& col = x_cols[static_cast<std::size_t>(f)];
    const double sd = vec_stddev(col);
    if (sd == 0.0) continue;
    const double mu = vec_mean(col);
    std::vector<double> std_col;
    std_col.reserve(col.size());
    for (double v : col) std_col.push_back((v - mu) / sd);
    x_std.push_back(std::move(std_col));
    live_cols.push_back(f);
  }
  const double y_mean = vec_mean(y);
  std::vector<double> y_centered;
  y_centered.reserve(y.size());
  for (double v : y) y_centered.push_back(v - y_mean);

  std::vector<double> grid = cfg.grid;
  if (grid.empty()) {
    double lambda_max = 0.0;
    for (const std::vector<double>& col : x_std) {
      double dot = 0.0;
      for (std::size_t i = 0; i < col.size(); ++i) dot += col[i] * y_centered[i];
      lambda_max = std::max(lambda_max, 2.0 * std::fabs(dot));
    }
    if (lambda_max <= 0.0) lambda_max = 1.0;
    const int points = 30;
    const double ratio = 1e-3;
    for (int g = 0; g < points; ++g)
      grid.push_back(lambda_max * std::pow(ratio, static_cast<double>(g) / (points - 1)));
  }

  out.lambda_selected = select_lambda(x_std, y_centered, grid, cfg.k_folds, cfg.seed, &row_month,
                                      &out.cv_curve, cfg.mode);
  const LassoFit live_fit = fit_lasso(x_std, y_centered, out.lambda_selected);

  out.fit = live_fit;
  out.fit.beta.assign(static_cast<std::size_t>(n_f), 0.0);
  for (std::size_t k = 0; k < live_cols.size(); ++k)
    out.fit.beta[static_cast<std::size_t>(live_cols[k])] = live_fit.beta[k];
  for (int f = 0; f < n_f; ++f) {
    if (std::fabs(out.fit.beta[static_cast<std::size_t>(f)]) < kExclusionTol)
      out.excluded.push_back(panel.factor_names()[static_cast<std::size_t>(f)]);
    else
      out.kept.push_back(panel.factor_names()[static_cast<std::size_t>(f)]);
  }
  return out;
}

}  // namespace ealpha
