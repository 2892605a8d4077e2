#include "ealpha/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ealpha/errors.hpp"
#include "ealpha/metrics.hpp"
#include "ealpha/rng.hpp"
#include "ealpha/stats.hpp"

namespace ealpha {

void BacktestConfig::validate() const {
  if (train_window < 1 || test_window < 1) fail(ErrorCode::config, "windows must be positive");
  if (cost_rate < 0.0 || cost_rate >= 1.0) fail(ErrorCode::config, "cost rate must be in [0, 1)");
  if (top_n < 1) fail(ErrorCode::config, "top_n must be positive");
  if (metric_window < 1 || ic_window < 1) fail(ErrorCode::config, "history windows must be positive");
  if (periods_per_year < 1) fail(ErrorCode::config, "periods per year must be positive");
}

namespace {

constexpr std::uint64_t kSeedBlock = 1000000;

struct MonthRows {
  std::vector<std::size_t> stock_pos;
  std::vector<std::vector<double>> features;  // row-major, one vector per stock
  std::vector<double> target;                 // raw next-period return
};

/// Eligible stocks of one month whose feature vector is complete. Returns
/// are not consulted: eligibility must be knowable at decision time.
MonthRows collect_rows(const FactorPanel& panel, int m, const std::vector<int>& feature_ids) {
  MonthRows rows;
  const UniverseMask mask = filter_universe(panel, panel.months()[static_cast<std::size_t>(m)]);
  for (int s = 0; s < panel.n_stocks(); ++s) {
    if (mask.eligible[static_cast<std::size_t>(s)] == 0) continue;
    std::vector<double> feats;
    bool complete = true;
    for (int f : feature_ids) {
      const double v = panel.value(m, s, f);
      if (is_missing(v)) {
        complete = false;
        break;
      }
      feats.push_back(v);
    }
    if (!complete) continue;
    rows.stock_pos.push_back(static_cast<std::size_t>(s));
    rows.features.push_back(std::move(feats));
  }
  return rows;
}

/// Cross-sectional z within the month; a flat column contributes zeros.
void standardize_columns(std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) return;
  const std::size_t p = rows.front().size();
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> col;
    for (const auto& r : rows) col.push_back(r[j]);
    const double m = vec_mean(col);
    const double sd = vec_stddev(col);
    for (auto& r : rows) r[j] = sd > 1e-12 ? (r[j] - m) / sd : 0.0;
  }
}

void standardize_vector(std::vector<double>& v) {
  if (v.size() < 2) return;
  const double m = vec_mean(v);
  const double sd = vec_stddev(v);
  for (double& x : v) x = sd > 1e-12 ? (x - m) / sd : 0.0;
}

bool non_constant(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo != *hi;
}

ModelMonthQuality month_quality(const std::vector<double>& pred, const std::vector<double>& realized) {
  std::vector<double> p, a;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!is_missing(realized[i])) {
      p.push_back(pred[i]);
      a.push_back(realized[i]);
    }
  }
  ModelMonthQuality q;
  if (p.empty()) return q;
  q.rmse = rmse(p, a);
  q.mape = mape(p, a);
  const DirectionOutcome d = classify_directions(p, a);
  q.precision = d.precision();
  q.recall = d.recall();
  q.f1 = d.f1();
  q.ic = p.size() >= 2 && non_constant(p) && non_constant(a) ? ic_at(p, a) : 0.0;
  return q;
}

}  // namespace

ForecastSet run_forecasts(const FactorPanel& panel, const BacktestConfig& cfg,
                          const std::vector<std::string>& feature_names,
                          const BacktestHooks* hooks) {
  cfg.validate();
  const int n_months = panel.n_months();
  if (n_months < cfg.train_window + 1)
    fail(ErrorCode::insufficient_history,
         "panel has " + std::to_string(n_months) + " months, need " +
             std::to_string(cfg.train_window + 1));

  std::vector<int> feature_ids;
  std::vector<std::string> names = feature_names;
  if (names.empty()) names = panel.factor_names();
  for (const std::string& name : names) {
    const int f = panel.factor_pos(name);
    if (f < 0) fail(ErrorCode::schema, "feature '" + name + "' is not in the panel");
    feature_ids.push_back(f);
  }
  if (feature_ids.empty()) fail(ErrorCode::precondition, "no features to train on");

  ForecastSet fx;
  fx.model_names = {"ridge", "mlp", "forest"};
  const int n_tests = n_months - cfg.train_window;
  fx.months.resize(static_cast<std::size_t>(n_tests));
  fx.quality.assign(fx.model_names.size(),
                    std::vector<ModelMonthQuality>(static_cast<std::size_t>(n_tests)));

  run_for(cfg.mode, static_cast<std::size_t>(n_tests), [&](std::size_t k) {
    const int t = cfg.train_window + static_cast<int>(k);
    // models are refit at the start of each test block
    const int anchor =
        cfg.train_window + (static_cast<int>(k) / cfg.test_window) * cfg.test_window;
    if (hooks != nullptr && hooks->decision_begin) hooks->decision_begin(t);

    FeatureMatrix train_x;
    train_x.names = names;
    std::vector<double> train_y;
    for (int m = anchor - cfg.train_window; m < anchor; ++m) {
      MonthRows rows = collect_rows(panel, m, feature_ids);
      std::vector<std::size_t> keep;
      std::vector<double> target;
      for (std::size_t i = 0; i < rows.stock_pos.size(); ++i) {
        const double r = panel.next_return(m, static_cast<int>(rows.stock_pos[i]));
        if (!is_missing(r)) {
          keep.push_back(i);
          target.push_back(r);
        }
      }
      if (keep.size() < 2) continue;
      std::vector<std::vector<double>> feats;
      for (std::size_t i : keep) feats.push_back(std::move(rows.features[i]));
      standardize_columns(feats);
      standardize_vector(target);
      for (std::size_t i = 0; i < keep.size(); ++i) {
        train_x.rows.push_back(std::move(feats[i]));
        train_y.push_back(target[i]);
      }
    }
    if (train_x.rows.size() < 4)
      fail(ErrorCode::insufficient_history,
           "too few usable training rows before month " +
               panel.months()[static_cast<std::size_t>(t)].str());

    MonthRows test_rows = collect_rows(panel, t, feature_ids);
    if (test_rows.stock_pos.empty())
      fail(ErrorCode::degenerate,
           "no eligible stocks in month " + panel.months()[static_cast<std::size_t>(t)].str());
    FeatureMatrix test_x;
    test_x.names = names;
    test_x.rows = test_rows.features;
    standardize_columns(test_x.rows);

    MonthForecast& mf = fx.months[k];
    mf.month_pos = t;
    mf.month = panel.months()[static_cast<std::size_t>(t)];
    mf.stock_pos = test_rows.stock_pos;
    for (std::size_t s : mf.stock_pos) mf.tickers.push_back(panel.stocks()[s]);

    const std::uint64_t a64 = static_cast<std::uint64_t>(anchor);
    const TrainedModel ridge = train_ridge(train_x, train_y, cfg.models.ridge);
    const TrainedModel mlp =
        train_mlp(train_x, train_y, cfg.models.mlp, derive_seed(cfg.seed, kSeedBlock + a64));
    const TrainedModel forest = train_forest(train_x, train_y, cfg.models.forest,
                                             derive_seed(cfg.seed, 2 * kSeedBlock + a64), cfg.mode);
    mf.predictions.push_back(predict(ridge, test_x));
    mf.predictions.push_back(predict(mlp, test_x));
    mf.predictions.push_back(predict(forest, test_x));

    if (hooks != nullptr && hooks->realize_begin) hooks->realize_begin(t);
    for (std::size_t s : mf.stock_pos)
      mf.realized.push_back(panel.next_return(t, static_cast<int>(s)));
    mf.benchmark = panel.benchmark_return(t);
    for (std::size_t model = 0; model < fx.model_names.size(); ++model)
      fx.quality[model][k] = month_quality(mf.predictions[model], mf.realized);
  });
  return fx;
}

PortfolioPick form_portfolio(const std::vector<double>& predictions, int top_n) {
  if (predictions.empty()) fail(ErrorCode::precondition, "no stocks to pick from");
  if (top_n < 1) fail(ErrorCode::config, "top_n must be positive");
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (predictions[a] != predictions[b]) return predictions[a] > predictions[b];
    return a < b;
  });

  PortfolioPick pick;
  const std::size_t take = std::min(predictions.size(), static_cast<std::size_t>(top_n));
  pick.picks.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
  pick.weight = 1.0 / static_cast<double>(take);
  pick.shortfall = predictions.size() < static_cast<std::size_t>(top_n);
  return pick;
}

double apply_costs(double gross_return, double turnover, double cost_rate, CostMode mode) {
  if (turnover < 0.0 || turnover > 1.0) fail(ErrorCode::range, "turnover must be in [0, 1]");
  if (cost_rate < 0.0 || cost_rate >= 1.0) fail(ErrorCode::range, "cost rate must be in [0, 1)");
  const double charge = cost_rate * turnover * (mode == CostMode::two_sided ? 2.0 : 1.0);
  return gross_return - charge;
}

double max_drawdown(const std::vector<double>& wealth) {
  double peak = 1.0;
  double worst = 0.0;
  for (double w : wealth) {
    if (w > peak) peak = w;
    worst = std::max(worst, (peak - w) / peak);
  }
  return worst;
}

BacktestReport performance_report(const EquityCurve& curve, int periods_per_year) {
  const std::size_t t_count = curve.net_return.size();
  if (t_count < 2) fail(ErrorCode::precondition, "need at least two test months to report");
  if (curve.benchmark_return.size() != t_count || curve.wealth.size() != t_count)
    fail(ErrorCode::alignment, "equity curve columns differ in length");

  BacktestReport rep;
  double growth = 1.0;
  double bench_growth = 1.0;
  for (std::size_t i = 0; i < t_count; ++i) {
    growth *= 1.0 + curve.net_return[i];
    bench_growth *= 1.0 + curve.benchmark_return[i];
  }
  rep.strategy_return = growth - 1.0;
  const double years = static_cast<double>(t_count) / static_cast<double>(periods_per_year);
  rep.annualized_return = std::pow(1.0 + rep.strategy_return, 1.0 / years) - 1.0;
  rep.annualized_volatility =
      vec_stddev(curve.net_return) * std::sqrt(static_cast<double>(periods_per_year));
  rep.excess_return = rep.strategy_return - (bench_growth - 1.0);
  if (rep.annualized_volatility <= 0.0)
    fail(ErrorCode::undefined_value, "zero return volatility, no risk-adjusted figures");
  rep.sharpe = rep.annualized_return / rep.annualized_volatility;

  const double bench_mean = vec_mean(curve.benchmark_return);
  const double net_mean = vec_mean(curve.net_return);
  double cov = 0.0;
  double var = 0.0;
  for (std::size_t i = 0; i < t_count; ++i) {
    cov += (curve.net_return[i] - net_mean) * (curve.benchmark_return[i] - bench_mean);
    var += (curve.benchmark_return[i] - bench_mean) * (curve.benchmark_return[i] - bench_mean);
  }
  if (var <= 0.0) fail(ErrorCode::undefined_value, "benchmark variance is zero");
  rep.beta = cov / var;
  rep.alpha = (net_mean - rep.beta * bench_mean) * static_cast<double>(periods_per_year);
  rep.max_drawdown = max_drawdown(curve.wealth);
  return rep;
}

std::vector<std::string> default_row_names() {
  std::vector<std::string> rows = {"ridge", "mlp", "forest"};
  for (SchemeId s : all_schemes()) rows.push_back(scheme_name(s));
  rows.push_back("benchmark");
  return rows;
}

namespace {

double scheme_metric(const ModelMonthQuality& q, SchemeId scheme) {
  switch (scheme) {
    case SchemeId::rmse:
      return q.rmse;
    case SchemeId::mape:
      return q.mape;
    case SchemeId::precision:
      return q.precision;
    case SchemeId::recall:
      return q.recall;
    case SchemeId::f1:
      return q.f1;
    case SchemeId::ic_mean:
    case SchemeId::ic_ratio:
      return q.ic;
  }
  return 0.0;
}

SchemeRow benchmark_row(const ForecastSet& fx, int periods_per_year) {
  SchemeRow row;
  row.name = "benchmark";
  double wealth = 1.0;
  for (const MonthForecast& mf : fx.months) {
    row.curve.months.push_back(mf.month);
    row.curve.gross_return.push_back(mf.benchmark);
    row.curve.net_return.push_back(mf.benchmark);
    row.curve.benchmark_return.push_back(mf.benchmark);
    row.curve.turnover.push_back(0.0);
    wealth *= 1.0 + mf.benchmark;
    row.curve.wealth.push_back(wealth);
    row.curve.holdings.emplace_back();
    row.curve.shortfall.push_back(false);
  }
  if (row.curve.months.size() >= 2) {
    row.report = performance_report(row.curve, periods_per_year);
    row.has_report = true;
  }
  return row;
}

}  // namespace

SchemeRow run_scheme(const ForecastSet& fx, const std::string& row_name, const BacktestConfig& cfg) {
  cfg.validate();
  if (fx.months.empty()) fail(ErrorCode::precondition, "no test months to run");
  if (row_name == "benchmark") return benchmark_row(fx, cfg.periods_per_year);

  const std::size_t n_models = fx.model_names.size();
  int single_model = -1;
  for (std::size_t m = 0; m < n_models; ++m)
    if (fx.model_names[m] == row_name) single_model = static_cast<int>(m);
  const bool is_scheme = single_model < 0;
  const SchemeId scheme = is_scheme ? scheme_from_name(row_name) : SchemeId::rmse;

  SchemeRow row;
  row.name = row_name;
  double wealth = 1.0;
  std::map<std::string, double> prev_weights;
  double q_rmse = 0.0, q_mape = 0.0, q_precision = 0.0, q_recall = 0.0, q_f1 = 0.0;
  std::vector<double> q_ics;
  std::size_t q_count = 0;

  for (std::size_t k = 0; k < fx.months.size(); ++k) {
    const MonthForecast& mf = fx.months[k];

    WeightVector wv;
    if (!is_scheme) {
      wv.w.assign(n_models, 0.0);
      wv.w[static_cast<std::size_t>(single_model)] = 1.0;
    } else {
      std::vector<std::vector<double>> metric_history(n_models);
      std::vector<std::vector<double>> ic_history(n_models);
      for (std::size_t m = 0; m < n_models; ++m) {
        for (std::size_t past = 0; past < k; ++past) {
          metric_history[m].push_back(scheme_metric(fx.quality[m][past], scheme));
          ic_history[m].push_back(fx.quality[m][past].ic);
        }
      }
      wv = scheme_weights(scheme, metric_history, ic_history, cfg.metric_window, cfg.ic_window,
                          cfg.equal_weight_fallback);
    }
    wv.month = mf.month;
    row.weights.push_back(wv);

    const std::vector<double> combined = combine(mf.predictions, wv);
    const PortfolioPick pick = form_portfolio(combined, cfg.top_n);

    double gross = 0.0;
    std::map<std::string, double> weights_now;
    std::vector<Position> holdings;
    for (std::size_t idx : pick.picks) {
      const std::string& ticker = mf.tickers[idx];
      weights_now[ticker] = pick.weight;
      holdings.push_back({ticker, pick.weight});
      if (!is_missing(mf.realized[idx])) gross += pick.weight * mf.realized[idx];
    }

    double turnover = 1.0;
    if (k > 0) {
      turnover = 0.0;
      for (const auto& [ticker, w] : weights_now) {
        const auto it = prev_weights.find(ticker);
        const double before = it == prev_weights.end() ? 0.0 : it->second;
        turnover += std::max(0.0, w - before);
      }
      turnover = std::min(turnover, 1.0);
    }
    prev_weights = std::move(weights_now);

    const double net = apply_costs(gross, turnover, cfg.cost_rate, cfg.cost_mode);
    wealth *= 1.0 + net;
    row.curve.months.push_back(mf.month);
    row.curve.gross_return.push_back(gross);
    row.curve.net_return.push_back(net);
    row.curve.benchmark_return.push_back(mf.benchmark);
    row.curve.turnover.push_back(turnover);
    row.curve.wealth.push_back(wealth);
    row.curve.holdings.push_back(std::move(holdings));
    row.curve.shortfall.push_back(pick.shortfall);

    std::vector<double> finite_realized;
    for (double r : mf.realized)
      if (!is_missing(r)) finite_realized.push_back(r);
    const bool scorable = finite_realized.size() >= 2 && non_constant(combined) &&
                          non_constant(finite_realized);
    if (scorable) {
      const ModelMonthQuality q = month_quality(combined, mf.realized);
      q_rmse += q.rmse;
      q_mape += q.mape;
      q_precision += q.precision;
      q_recall += q.recall;
      q_f1 += q.f1;
      q_ics.push_back(q.ic);
      ++q_count;
    }
  }

  if (q_count > 0) {
    const double n = static_cast<double>(q_count);
    row.quality.rmse = q_rmse / n;
    row.quality.mape = q_mape / n;
    row.quality.precision = q_precision / n;
    row.quality.recall = q_recall / n;
    row.quality.f1 = q_f1 / n;
    row.quality.ic_mean = vec_mean(q_ics);
    row.quality.ic_ratio =
        q_ics.size() >= 2 ? row.quality.ic_mean / (vec_stddev(q_ics) + 1e-8) : 0.0;
    row.has_quality = true;
  }
  if (row.curve.months.size() >= 2) {
    row.report = performance_report(row.curve, cfg.periods_per_year);
    row.has_report = true;
  }
  return row;
}

MatrixResult run_matrix(const FactorPanel& panel, const BacktestConfig& cfg,
                        const std::vector<std::string>& row_names) {
  MatrixResult result;
  result.forecasts = run_forecasts(panel, cfg);
  const std::vector<std::string> rows = row_names.empty() ? default_row_names() : row_names;
  result.rows.resize(rows.size());
  run_for(cfg.mode, rows.size(), [&](std::size_t i) {
    result.rows[i] = run_scheme(result.forecasts, rows[i], cfg);
  });
  return result;
}

PipelineResult run_pipeline(const FactorPanel& raw, const FactorHierarchy& hierarchy,
                            const PreprocessConfig& pre, const BacktestConfig& cfg,
                            const std::vector<std::string>& row_names) {
  cfg.validate();
  const FactorPanel clean = preprocess_panel(raw, pre, nullptr, cfg.mode);
  PipelineResult result;
  SynthesisResult synthesis = rolling_synthesize(clean, hierarchy, cfg.mode);
  result.scores = std::move(synthesis.scores);
  result.synthesis = std::move(synthesis.weights);

  if (cfg.use_screened_factors) {
    ScreenConfig screen_cfg = cfg.screen;
    screen_cfg.mode = cfg.mode;
    const ScreenResult screened = screen_factors(clean, screen_cfg);
    if (screened.kept.empty())
      fail(ErrorCode::degenerate, "screening kept no factors to train on");
    result.matrix.forecasts = run_forecasts(clean, cfg, screened.kept);
  } else {
    result.matrix.forecasts = run_forecasts(result.scores, cfg);
  }

  const std::vector<std::string> rows = row_names.empty() ? default_row_names() : row_names;
  result.matrix.rows.resize(rows.size());
  run_for(cfg.mode, rows.size(), [&](std::size_t i) {
    result.matrix.rows[i] = run_scheme(result.matrix.forecasts, rows[i], cfg);
  });
  return result;
}

}  // namespace ealpha
