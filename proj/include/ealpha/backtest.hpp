#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ealpha/ensemble.hpp"
#include "ealpha/factors.hpp"
#include "ealpha/month.hpp"
#include "ealpha/panel.hpp"
#include "ealpha/parallel.hpp"
#include "ealpha/predictors.hpp"
#include "ealpha/preprocess.hpp"
#include "ealpha/screening.hpp"

namespace ealpha {

enum class CostMode { total, two_sided };

struct BacktestConfig {
  int train_window = 12;
  int test_window = 1;
  double cost_rate = 0.003;
  int top_n = 30;
  int metric_window = 20;
  int ic_window = 20;
  bool equal_weight_fallback = false;
  CostMode cost_mode = CostMode::total;
  int periods_per_year = 12;
  std::uint64_t seed = 0;
  TrainConfig models;
  bool use_screened_factors = false;
  ScreenConfig screen;
  ExecMode mode = ExecMode::parallel;

  void validate() const;
};

struct Position {
  std::string ticker;
  double weight = 0.0;
};

struct EquityCurve {
  std::vector<MonthIndex> months;
  std::vector<double> gross_return;
  std::vector<double> net_return;
  std::vector<double> benchmark_return;
  std::vector<double> turnover;
  std::vector<double> wealth;  // cumulative product of 1 + net, basis 1.0
  std::vector<std::vector<Position>> holdings;
  std::vector<bool> shortfall;  // months holding fewer names than top_n
};

struct BacktestReport {
  double strategy_return = 0.0;
  double annualized_return = 0.0;
  double annualized_volatility = 0.0;
  double excess_return = 0.0;
  double sharpe = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
  double max_drawdown = 0.0;
};

/// One model's forecast quality in one test month, against raw realized
/// returns.
struct ModelMonthQuality {
  double rmse = 0.0;
  double mape = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ic = 0.0;
};

/// Averages of the same quantities over the whole run.
struct QualitySummary {
  double rmse = 0.0;
  double mape = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ic_mean = 0.0;
  double ic_ratio = 0.0;
};

struct MonthForecast {
  int month_pos = 0;  // position of the decision month in the panel
  MonthIndex month{0, 1};
  double benchmark = 0.0;
  std::vector<std::size_t> stock_pos;
  std::vector<std::string> tickers;
  std::vector<double> realized;  // raw next-period return per row
  std::vector<std::vector<double>> predictions;  // [model][row]
};

struct ForecastSet {
  std::vector<std::string> model_names;
  std::vector<MonthForecast> months;
  std::vector<std::vector<ModelMonthQuality>> quality;  // [model][test month]
};

/// Test instrumentation: called as the engine enters each phase of a test
/// month. Decisions may only read data from before the month boundary;
/// realization reads the month's own returns.
struct BacktestHooks {
  std::function<void(int month_pos)> decision_begin;
  std::function<void(int month_pos)> realize_begin;
};

/// Walk-forward model fitting: for every test month, train the three
/// predictors on the trailing window and record their predictions and
/// realized quality. Scheme-independent; one pass serves every weighting.
ForecastSet run_forecasts(const FactorPanel& panel, const BacktestConfig& cfg,
                          const std::vector<std::string>& feature_names = {},
                          const BacktestHooks* hooks = nullptr);

struct PortfolioPick {
  std::vector<std::size_t> picks;  // row indices, best predicted first
  double weight = 0.0;             // equal weight per held name
  bool shortfall = false;
};

/// Top-N selection by predicted return, ties to the lower row index (rows
/// arrive in ticker order). Fewer rows than top_n holds everything.
PortfolioPick form_portfolio(const std::vector<double>& predictions, int top_n);

double apply_costs(double gross_return, double turnover, double cost_rate,
                   CostMode mode = CostMode::total);

/// Peak-to-trough decline of a wealth path that starts at 1.0 before the
/// first element.
double max_drawdown(const std::vector<double>& wealth);

BacktestReport performance_report(const EquityCurve& curve, int periods_per_year = 12);

struct SchemeRow {
  std::string name;
  EquityCurve curve;
  BacktestReport report;
  bool has_report = false;  // needs at least two test months
  QualitySummary quality;
  bool has_quality = false;
  std::vector<WeightVector> weights;  // per test month; empty for benchmark
};

/// Runs one row of the comparison: a single model by name, a weighting
/// scheme by name, or "benchmark". Weights for month t come only from
/// history strictly before t.
SchemeRow run_scheme(const ForecastSet& forecasts, const std::string& row_name,
                     const BacktestConfig& cfg);

std::vector<std::string> default_row_names();

struct MatrixResult {
  ForecastSet forecasts;
  std::vector<SchemeRow> rows;
};

/// All requested rows over one shared forecast pass.
MatrixResult run_matrix(const FactorPanel& panel, const BacktestConfig& cfg,
                        const std::vector<std::string>& row_names = {});

struct PipelineResult {
  FactorPanel scores;
  EntropyWeightSeries synthesis;
  MatrixResult matrix;
};

/// Full research pipeline: preprocess, synthesize group scores, then the
/// walk-forward comparison. With use_screened_factors the predictors
/// consume the screened preprocessed factors instead of the group scores.
PipelineResult run_pipeline(const FactorPanel& raw, const FactorHierarchy& hierarchy,
                            const PreprocessConfig& pre, const BacktestConfig& cfg,
                            const std::vector<std::string>& row_names = {});

}  // namespace ealpha
