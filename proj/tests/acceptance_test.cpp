// Release gate. Every property the engine promises is checked here against
// independent reference implementations and subprocess runs, one summary
// line per property. Exit status is nonzero when any line fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ealpha/backtest.hpp"
#include "ealpha/metrics.hpp"
#include "ealpha/rng.hpp"
#include "ealpha/stats.hpp"
#include "oracles.hpp"

using namespace ealpha;
namespace fs = std::filesystem;

namespace {

class Gate {
 public:
  void expect(bool ok, const std::string& label) {
    ++checks_;
    if (!ok) {
      ++failed_;
      if (notes_.size() < 4) notes_.push_back(label);
    }
  }
  void note(const std::string& text) { note_ = text; }

  bool ok() const { return failed_ == 0; }
  int checks() const { return checks_; }
  const std::string& extra() const { return note_; }
  std::string failures() const {
    std::string out;
    for (std::size_t i = 0; i < notes_.size(); ++i) {
      if (i > 0) out += "; ";
      out += notes_[i];
    }
    if (failed_ > static_cast<int>(notes_.size()))
      out += "; and " + std::to_string(failed_ - static_cast<int>(notes_.size())) + " more";
    return out;
  }

 private:
  int checks_ = 0;
  int failed_ = 0;
  std::vector<std::string> notes_;
  std::string note_;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::vector<double> standardized(std::vector<double> v) {
  const double mu = vec_mean(v);
  const double sd = vec_stddev(v);
  for (double& x : v) x = (x - mu) / sd;
  return v;
}

std::vector<std::vector<double>> random_design(Rng& rng, std::size_t n, std::size_t p) {
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> col;
    for (std::size_t i = 0; i < n; ++i) col.push_back(rng.normal());
    cols.push_back(standardized(std::move(col)));
  }
  return cols;
}

std::vector<double> centered(std::vector<double> v) {
  const double mu = vec_mean(v);
  for (double& x : v) x -= mu;
  return v;
}

/// Worst violation of the subgradient optimality conditions, zero when the
/// fit is exact: active coordinates need gradient lambda * sign(beta),
/// inactive ones gradient magnitude at most lambda.
double kkt_worst_gap(const std::vector<std::vector<double>>& cols, const std::vector<double>& y,
                     const LassoFit& fit) {
  const std::size_t n = y.size();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double pred = fit.intercept;
    for (std::size_t j = 0; j < cols.size(); ++j) pred += fit.beta[j] * cols[j][i];
    r[i] = y[i] - pred;
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    double grad = 0.0;
    for (std::size_t i = 0; i < n; ++i) grad += cols[j][i] * r[i];
    grad *= 2.0;
    if (fit.beta[j] != 0.0) {
      const double sign = fit.beta[j] > 0.0 ? 1.0 : -1.0;
      worst = std::max(worst, std::fabs(grad - fit.lambda * sign));
    } else {
      worst = std::max(worst, std::fabs(grad) - fit.lambda);
    }
  }
  return worst;
}

FeatureMatrix make_features(int n, int p, std::uint64_t seed) {
  FeatureMatrix x;
  for (int j = 0; j < p; ++j) x.names.push_back("x" + std::to_string(j));
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    std::vector<double> row;
    for (int j = 0; j < p; ++j) row.push_back(rng.normal());
    x.rows.push_back(std::move(row));
  }
  return x;
}

std::vector<double> fd_gradient(const MlpModel& m, const FeatureMatrix& x,
                                const std::vector<double>& y, double h) {
  MlpModel probe = m;
  std::vector<double> grad(m.params.size());
  for (std::size_t k = 0; k < m.params.size(); ++k) {
    const double saved = probe.params[k];
    probe.params[k] = saved + h;
    const double up = mlp_loss(probe, x, y);
    probe.params[k] = saved - h;
    const double down = mlp_loss(probe, x, y);
    probe.params[k] = saved;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

bool curves_equal(const EquityCurve& a, const EquityCurve& b) {
  return a.months == b.months && a.gross_return == b.gross_return &&
         a.net_return == b.net_return && a.benchmark_return == b.benchmark_return &&
         a.turnover == b.turnover && a.wealth == b.wealth && a.shortfall == b.shortfall;
}

/// Single-model forecast set with pseudo random predictions and outcomes.
ForecastSet one_model_forecasts(int n_stocks, int n_months, std::uint64_t seed) {
  Rng rng(seed);
  ForecastSet fx;
  fx.model_names = {"ridge"};
  fx.quality.resize(1);
  const MonthIndex base{2020, 1};
  for (int k = 0; k < n_months; ++k) {
    MonthForecast mf;
    mf.month_pos = k;
    mf.month = MonthIndex::from_serial(base.serial() + k);
    mf.benchmark = 0.002 * rng.normal();
    std::vector<double> preds, realized;
    for (int s = 0; s < n_stocks; ++s) {
      char name[8];
      std::snprintf(name, sizeof(name), "S%02d", s);
      mf.stock_pos.push_back(static_cast<std::size_t>(s));
      mf.tickers.push_back(name);
      preds.push_back(0.03 * rng.normal());
      realized.push_back(0.03 * rng.normal());
    }
    mf.realized = realized;
    mf.predictions = {preds};
    fx.months.push_back(std::move(mf));
    fx.quality[0].push_back(ModelMonthQuality{});
  }
  return fx;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double g_directional_seconds = 0.0;

void rank_correlation_oracle(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  auto mixed_vector = [&rng](std::size_t n, std::uint64_t lattice) {
    std::vector<double> v(n);
    bool flat = true;
    do {
      for (double& x : v)
        x = rng.below(3) == 0 ? static_cast<double>(rng.below(lattice)) : rng.normal();
      flat = std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
    } while (flat);
    return v;
  };

  double worst = 0.0;
  int tied_vectors = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 3 + rng.below(60);
    const std::vector<double> x = mixed_vector(n, 5);
    const std::vector<double> y = mixed_vector(n, 4);
    auto has_tie = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      return std::adjacent_find(v.begin(), v.end()) != v.end();
    };
    if (has_tie(x) || has_tie(y)) ++tied_vectors;

    const double got = spearman(x, y);
    const double want = oracle::spearman_counting(x, y);
    worst = std::max(worst, std::fabs(got - want));
    g.expect(std::fabs(got - want) <= 1e-12,
             "trial " + std::to_string(trial) + " off by " + num(got - want));
    g.expect(ic_at(x, y) == got, "ic disagrees with rank correlation at trial " +
                                     std::to_string(trial));
  }
  g.expect(tied_vectors >= 200, "only " + std::to_string(tied_vectors) + " tied vectors");
  const double elapsed = seconds_since(t0);
  g.expect(elapsed < 5.0, "took " + num(elapsed) + "s");
  g.note("worst gap " + num(worst) + ", " + std::to_string(tied_vectors) + " vectors with ties");
}

void entropy_weight_oracle(Gate& g) {
  SyntheticSpec spec;
  spec.n_stocks = 4;
  spec.n_months = 13;
  spec.n_factors = 2;
  spec.signal = {{"f00", 0.02, false}};
  spec.seed = 402;
  const FactorPanel p = generate_synthetic_panel(spec);

  FactorHierarchy h;
  h.groups = {"g"};
  h.members["g"] = {"f00", "f01"};
  const SynthesisResult r = rolling_synthesize(p, h, ExecMode::serial);

  std::vector<std::vector<std::vector<double>>> x(
      2, std::vector<std::vector<double>>(13, std::vector<double>(4)));
  for (int f = 0; f < 2; ++f)
    for (int m = 0; m < 13; ++m)
      for (int s = 0; s < 4; ++s)
        x[static_cast<std::size_t>(f)][static_cast<std::size_t>(m)][static_cast<std::size_t>(s)] =
            p.value(m, s, f);
  const auto expect = oracle::ewm_scores_direct(x);

  double worst = 0.0;
  for (int m = 0; m < 13; ++m)
    for (int s = 0; s < 4; ++s) {
      const double got = r.scores.value(m, s, 0);
      const double want = expect[static_cast<std::size_t>(m)][static_cast<std::size_t>(s)];
      worst = std::max(worst, std::fabs(got - want));
      g.expect(std::fabs(got - want) <= 1e-12,
               "score at month " + std::to_string(m) + " stock " + std::to_string(s) +
                   " off by " + num(got - want));
    }

  for (int m = 0; m < 13; ++m) {
    const int v = r.weights.vintage_of_month[static_cast<std::size_t>(m)];
    double sum = 0.0;
    for (double w : r.weights.vintages[static_cast<std::size_t>(v)].w.at("g")) sum += w;
    g.expect(std::fabs(sum - 1.0) <= 1e-12,
             "weights at month " + std::to_string(m) + " sum to " + num(sum));
  }
  g.note("worst score gap " + num(worst));
}

void lasso_properties(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();

  {
    Rng rng(501);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 200, p = 20;
      auto cols = random_design(rng, n, p);
      std::vector<double> y;
      for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < p; ++j)
          if (j % 3 == 0) v += 0.3 * cols[j][i];
        y.push_back(v + 0.2 * rng.normal());
      }
      y = centered(y);
      const double lambda = 0.5 + 5.0 * rng.uniform();
      const LassoFit fit = fit_lasso(cols, y, lambda);
      g.expect(fit.converged, "no convergence at trial " + std::to_string(trial));
      const double gap = kkt_worst_gap(cols, y, fit);
      worst = std::max(worst, gap);
      g.expect(gap <= 1e-4, "kkt gap " + num(gap) + " at trial " + std::to_string(trial));
    }
    g.note("worst kkt gap " + num(worst));
  }

  {
    // Sign-pattern columns scaled to sample std 1 are orthogonal with
    // sum-of-squares 3, so the closed form threshold is lambda / 6.
    const double a = std::sqrt(3.0) / 2.0;
    const std::vector<std::vector<double>> cols = {
        {a, a, -a, -a}, {a, -a, a, -a}, {a, -a, -a, a}};
    const std::vector<double> b_true{3.0, -1.5, 0.2};
    std::vector<double> y(4, 0.0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j) y[i] += b_true[j] * cols[j][i];
    for (double lambda : {0.5, 2.0, 6.0}) {
      const LassoFit fit = fit_lasso(cols, y, lambda);
      for (std::size_t j = 0; j < 3; ++j) {
        const double thr = lambda / 6.0;
        const double expect =
            std::fabs(b_true[j]) <= thr ? 0.0 : b_true[j] - (b_true[j] > 0 ? thr : -thr);
        g.expect(std::fabs(fit.beta[j] - expect) <= 1e-8,
                 "soft threshold off by " + num(fit.beta[j] - expect) + " at lambda " +
                     num(lambda));
      }
    }
  }

  {
    Rng rng(502);
    const std::size_t n = 200, p = 10;
    auto cols = random_design(rng, n, p);
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < p; ++j)
        y[i] += (0.1 * static_cast<double>(j) - 0.4) * cols[j][i];
      y[i] += 0.05 * rng.normal();
    }
    y = centered(y);
    const LassoFit fit = fit_lasso(cols, y, 0.0);
    const auto ols = oracle::least_squares_dense(cols, y);
    for (std::size_t j = 0; j < p; ++j)
      g.expect(std::fabs(fit.beta[j] - ols[j]) <= 1e-6,
               "penalty-free coefficient " + std::to_string(j) + " off by " +
                   num(fit.beta[j] - ols[j]));
  }

  {
    int exact = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
      Rng rng(derive_seed(510, static_cast<std::uint64_t>(t)));
      const std::size_t n = 200, p = 20;
      auto cols = random_design(rng, n, p);
      std::vector<double> y;
      for (std::size_t i = 0; i < n; ++i)
        y.push_back(0.6 * cols[3][i] - 0.5 * cols[11][i] + 0.4 * cols[17][i] +
                    0.02 * rng.normal());
      y = centered(y);

      std::vector<double> grid;
      double lambda_max = 0.0;
      for (const auto& col : cols) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += col[i] * y[i];
        lambda_max = std::max(lambda_max, 2.0 * std::fabs(dot));
      }
      for (int gp = 0; gp < 25; ++gp) grid.push_back(lambda_max * std::pow(1e-2, gp / 24.0));
      const double lambda = select_lambda(cols, y, grid, 5, 0);
      const LassoFit fit = fit_lasso(cols, y, lambda);
      std::set<std::size_t> support;
      for (std::size_t j = 0; j < p; ++j)
        if (std::fabs(fit.beta[j]) >= 1e-10) support.insert(j);
      if (support == std::set<std::size_t>{3, 11, 17}) ++exact;
    }
    g.expect(exact >= 45, "planted support recovered in only " + std::to_string(exact) +
                              " of 50 runs");
    g.note(g.extra() + ", support recovery " + std::to_string(exact) + "/50");
  }

  const double elapsed = seconds_since(t0);
  g.expect(elapsed < 60.0, "took " + num(elapsed) + "s");
}

void predictor_properties(Gate& g) {
  {
    const FeatureMatrix x = make_features(80, 6, 404);
    Rng rng(405);
    std::vector<double> y;
    for (const auto& row : x.rows) y.push_back(0.8 * row[0] - 0.5 * row[3] + 0.3 * rng.normal());
    const TrainedModel tm = train_ridge(x, y);
    const RidgeModel& rm = std::get<RidgeModel>(tm.impl);

    const Eigen::Index n = static_cast<Eigen::Index>(x.n_rows());
    const Eigen::Index p = static_cast<Eigen::Index>(x.n_features());
    Eigen::MatrixXd xc(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j)
        xc(i, j) = x.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    const Eigen::RowVectorXd means = xc.colwise().mean();
    xc.rowwise() -= means;
    Eigen::VectorXd yc(n);
    const double y_mean = vec_mean(y);
    for (Eigen::Index i = 0; i < n; ++i) yc[i] = y[static_cast<std::size_t>(i)] - y_mean;
    Eigen::VectorXd beta(p);
    for (Eigen::Index j = 0; j < p; ++j) beta[j] = rm.beta[static_cast<std::size_t>(j)];

    Eigen::MatrixXd a = xc.transpose() * xc;
    for (Eigen::Index j = 0; j < p; ++j) a(j, j) += rm.lambda;
    const double resid = (a * beta - xc.transpose() * yc).cwiseAbs().maxCoeff();
    g.expect(resid <= 1e-8, "normal equation residual " + num(resid));
    const double want_intercept = y_mean - means * beta;
    g.expect(std::fabs(rm.intercept - want_intercept) <= 1e-8,
             "intercept off by " + num(rm.intercept - want_intercept));
    g.note("ridge residual " + num(resid) + " at lambda " + num(rm.lambda));
  }

  {
    const FeatureMatrix x = make_features(5, 3, 71);
    const std::vector<double> y = {0.3, -0.2, 0.5, 0.1, -0.4};
    for (const std::vector<int>& hidden : {std::vector<int>{4}, std::vector<int>{4, 3}}) {
      MlpConfig cfg;
      cfg.hidden = hidden;
      cfg.epochs = 0;
      cfg.batch = 5;
      const MlpModel m = std::get<MlpModel>(train_mlp(x, y, cfg, 33).impl);
      const std::vector<double> analytic = mlp_gradient(m, x, y);
      const std::vector<double> numeric = fd_gradient(m, x, y, 1e-6);
      g.expect(analytic.size() == numeric.size(), "gradient length mismatch");
      double worst = 0.0;
      for (std::size_t k = 0; k < analytic.size(); ++k) {
        const double denom = std::max(1e-8, std::fabs(analytic[k]) + std::fabs(numeric[k]));
        worst = std::max(worst, std::fabs(analytic[k] - numeric[k]) / denom);
      }
      g.expect(worst < 1e-5, "gradient gap " + num(worst) + " with " +
                                 std::to_string(hidden.size()) + " hidden layers");
    }
  }

  {
    const FeatureMatrix x = make_features(30, 4, 111);
    const std::vector<double> y(30, 3.25);
    ForestConfig cfg;
    cfg.n_trees = 10;
    const TrainedModel m = train_forest(x, y, cfg, 5);
    for (const ForestTree& tree : std::get<ForestModel>(m.impl).trees)
      g.expect(tree.nodes.size() == 1 && tree.nodes[0].leaf, "constant target grew a split");
    for (double v : predict(m, x)) g.expect(v == 3.25, "constant target predicted " + num(v));
  }

  {
    FeatureMatrix x;
    x.names = {"flag", "clock"};
    std::vector<double> y;
    for (int i = 0; i < 32; ++i) {
      const double group = static_cast<double>(i % 2);
      x.rows.push_back({group, static_cast<double>(i)});
      y.push_back(group);
    }
    ForestConfig cfg;
    cfg.n_trees = 1;
    cfg.max_depth = 1;
    cfg.min_leaf = 1;
    cfg.features_per_split = 2;
    const TrainedModel m = train_forest(x, y, cfg, 7);
    const ForestTree& tree = std::get<ForestModel>(m.impl).trees[0];
    g.expect(tree.nodes.size() == 3, "depth-one tree has " +
                                         std::to_string(tree.nodes.size()) + " nodes");
    if (tree.nodes.size() == 3) {
      const ForestNode& root = tree.nodes[0];
      g.expect(!root.leaf && root.feature == 0 && root.threshold == 0.5,
               "split chose feature " + std::to_string(root.feature) + " at " +
                   num(root.threshold));
      g.expect(tree.nodes[static_cast<std::size_t>(root.left)].value == 0.0 &&
                   tree.nodes[static_cast<std::size_t>(root.right)].value == 1.0,
               "leaf values are not the group means");
    }
  }

  {
    const FeatureMatrix x = make_features(200, 6, 406);
    Rng rng(407);
    std::vector<double> y;
    for (const auto& row : x.rows) y.push_back(row[1] - row[4] + 0.2 * rng.normal());
    ForestConfig cfg;
    cfg.n_trees = 40;
    set_max_threads(1);
    const std::vector<double> narrow = predict(train_forest(x, y, cfg, 9, ExecMode::parallel), x);
    set_max_threads(4);
    const std::vector<double> wide = predict(train_forest(x, y, cfg, 9, ExecMode::parallel), x);
    set_max_threads(0);
    g.expect(narrow == wide, "forest predictions depend on the thread cap");
  }

  {
    SyntheticSpec spec;
    spec.n_stocks = 20;
    spec.n_months = 15;
    spec.n_factors = 4;
    spec.n_industries = 3;
    spec.signal = {{"f00", 0.02, false}, {"f02", -0.01, false}};
    spec.noise = 0.01;
    spec.seed = 408;
    const FactorPanel panel = generate_synthetic_panel(spec);
    FactorHierarchy h;
    h.groups = {"alpha", "quality"};
    h.members["alpha"] = {"f00", "f01"};
    h.members["quality"] = {"f02", "f03"};
    BacktestConfig cfg;
    cfg.top_n = 5;
    cfg.seed = 41;
    cfg.models.mlp.hidden = {4};
    cfg.models.mlp.epochs = 4;
    cfg.models.forest.n_trees = 8;
    cfg.models.forest.max_depth = 4;

    set_max_threads(1);
    const PipelineResult a = run_pipeline(panel, h, PreprocessConfig{}, cfg, {"forest", "ic_mean"});
    set_max_threads(4);
    const PipelineResult b = run_pipeline(panel, h, PreprocessConfig{}, cfg, {"forest", "ic_mean"});
    set_max_threads(0);
    for (std::size_t k = 0; k < a.matrix.forecasts.months.size(); ++k)
      g.expect(a.matrix.forecasts.months[k].predictions ==
                   b.matrix.forecasts.months[k].predictions,
               "predictions depend on the thread cap at test month " + std::to_string(k));
    for (std::size_t i = 0; i < a.matrix.rows.size(); ++i)
      g.expect(curves_equal(a.matrix.rows[i].curve, b.matrix.rows[i].curve),
               "curve for " + a.matrix.rows[i].name + " depends on the thread cap");
  }
}

void ensemble_weighting(Gate& g) {
  const int n_stocks = 60;
  const int n_months = 48;
  const int window = 20;
  int dominated = 0;
  double pooled_good = 0.0;
  int pooled_count = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(derive_seed(905, seed));
    std::vector<std::vector<double>> ic(3);
    std::vector<double> post_warmup_weight(3, 0.0);
    bool bad_always_zero = true;
    int scored_months = 0;
    for (int t = 0; t < n_months; ++t) {
      std::vector<double> returns(static_cast<std::size_t>(n_stocks));
      for (double& r : returns) r = rng.normal();
      const std::vector<double> rho = {0.5, 0.0, -0.3};
      std::vector<std::vector<double>> preds(3, std::vector<double>(static_cast<std::size_t>(n_stocks)));
      for (std::size_t m = 0; m < 3; ++m)
        for (int s = 0; s < n_stocks; ++s)
          preds[m][static_cast<std::size_t>(s)] =
              rho[m] * returns[static_cast<std::size_t>(s)] +
              std::sqrt(1.0 - rho[m] * rho[m]) * rng.normal();

      const WeightVector wv = scheme_weights(SchemeId::ic_mean, {}, ic, window, window, false);
      if (!wv.warm_up) {
        for (std::size_t m = 0; m < 3; ++m) post_warmup_weight[m] += wv.w[m];
        if (wv.w[2] != 0.0) bad_always_zero = false;
        ++scored_months;
      }
      for (std::size_t m = 0; m < 3; ++m) ic[m].push_back(ic_at(preds[m], returns));
    }
    g.expect(scored_months == n_months - window,
             "scored " + std::to_string(scored_months) + " months");
    for (std::size_t m = 0; m < 3; ++m)
      post_warmup_weight[m] /= static_cast<double>(scored_months);
    pooled_good += post_warmup_weight[0];
    ++pooled_count;
    if (post_warmup_weight[0] > 0.8 && bad_always_zero) ++dominated;
  }
  g.expect(dominated == 50, "informative model dominated in only " +
                                std::to_string(dominated) + " of 50 runs");
  g.note("mean weight of the informative model " + num(pooled_good / pooled_count));

  const WeightVector wv = normalize_scores({0.2, -0.1, 0.3});
  g.expect(wv.w.size() == 3 && wv.w[0] == 0.4 && wv.w[1] == 0.0 && wv.w[2] == 0.6,
           "scores (0.2, -0.1, 0.3) normalized to (" + num(wv.w[0]) + ", " + num(wv.w[1]) +
               ", " + num(wv.w[2]) + ")");
}

void backtest_integrity(Gate& g) {
  {
    struct RecordingObserver : PanelAccessObserver {
      mutable int phase = 0;  // 0 outside, 1 deciding, 2 realizing
      mutable int current = -1;
      mutable std::vector<std::string> violations;

      void on_access(PanelField field, int month) const override {
        if (phase == 1) {
          const bool is_return =
              field == PanelField::next_return || field == PanelField::benchmark_return;
          if (is_return && month >= current)
            violations.push_back("return read at month " + std::to_string(month) +
                                 " while deciding month " + std::to_string(current));
          if (!is_return && month > current)
            violations.push_back("feature read past month " + std::to_string(current));
        }
        if (phase == 2 && month != current)
          violations.push_back("realization touched month " + std::to_string(month));
      }
    };

    SyntheticSpec spec;
    spec.n_stocks = 20;
    spec.n_months = 18;
    spec.n_factors = 4;
    spec.n_industries = 3;
    spec.signal = {{"f00", 0.02, false}, {"f02", -0.01, false}};
    spec.noise = 0.01;
    spec.seed = 601;
    const FactorPanel panel = generate_synthetic_panel(spec);
    BacktestConfig cfg;
    cfg.top_n = 5;
    cfg.seed = 41;
    cfg.models.mlp.hidden = {4};
    cfg.models.mlp.epochs = 4;
    cfg.models.forest.n_trees = 8;
    cfg.models.forest.max_depth = 4;
    cfg.mode = ExecMode::serial;
    const FactorPanel clean = preprocess_panel(panel, PreprocessConfig{}, nullptr, ExecMode::serial);
    FactorHierarchy h;
    h.groups = {"alpha", "quality"};
    h.members["alpha"] = {"f00", "f01"};
    h.members["quality"] = {"f02", "f03"};
    const SynthesisResult synth = rolling_synthesize(clean, h, ExecMode::serial);

    RecordingObserver obs;
    BacktestHooks hooks;
    hooks.decision_begin = [&](int t) {
      obs.phase = 1;
      obs.current = t;
    };
    hooks.realize_begin = [&](int t) {
      obs.phase = 2;
      obs.current = t;
    };
    synth.scores.set_access_observer(&obs);
    run_forecasts(synth.scores, cfg, {}, &hooks);
    synth.scores.set_access_observer(nullptr);
    g.expect(obs.violations.empty(),
             obs.violations.empty() ? "" : "look-ahead: " + obs.violations.front());
  }

  {
    Rng rng(606);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> wealth;
      double w = 1.0;
      const std::size_t len = 1 + rng.below(40);
      for (std::size_t k = 0; k < len; ++k) {
        w *= 1.0 + 0.4 * (rng.uniform() - 0.5);
        wealth.push_back(w);
      }
      const double got = max_drawdown(wealth);
      const double want = oracle::max_drawdown_bruteforce(wealth);
      g.expect(got == want, "drawdown " + num(got) + " vs " + num(want) + " at trial " +
                                std::to_string(trial));
    }
  }

  {
    const ForecastSet fx = one_model_forecasts(12, 10, 607);
    BacktestConfig cfg;
    cfg.top_n = 4;
    std::vector<double> finals;
    for (double rate : {0.0, 0.003, 0.01}) {
      BacktestConfig c = cfg;
      c.cost_rate = rate;
      const SchemeRow row = run_scheme(fx, "ridge", c);
      finals.push_back(row.curve.wealth.back());

      double acc = 1.0;
      for (std::size_t k = 0; k < row.curve.net_return.size(); ++k) {
        acc *= 1.0 + row.curve.net_return[k];
        g.expect(std::fabs(row.curve.wealth[k] - acc) <= 1e-12,
                 "wealth drifts from compounded net returns at month " + std::to_string(k));
        g.expect(std::fabs(row.curve.net_return[k] -
                           (row.curve.gross_return[k] - rate * row.curve.turnover[k])) <= 1e-15,
                 "net return is not gross minus turnover cost at month " + std::to_string(k));
      }
    }
    g.expect(finals[0] > finals[1] && finals[1] > finals[2],
             "wealth is not decreasing in the cost rate: " + num(finals[0]) + ", " +
                 num(finals[1]) + ", " + num(finals[2]));
  }
}

void directional_outperformance(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  // Two regimes with different champions: a spread-out linear signal that
  // shallow trees cannot assemble, then a v-shaped signal that a linear
  // model cannot express. No single model is good in both.
  SyntheticSpec spec;
  spec.n_stocks = 100;
  spec.n_months = 48;
  spec.n_factors = 16;
  spec.n_industries = 5;
  spec.signal = {{"f00", 0.012, false}, {"f02", 0.012, false}, {"f03", 0.012, false},
                 {"f04", 0.012, false}, {"f05", 0.012, false}, {"f06", 0.012, false}};
  spec.signal_late = {{"f01", 0.03, true}};
  spec.switch_month = 32;
  spec.noise = 0.025;
  spec.seed = 7101;
  const FactorPanel panel = generate_synthetic_panel(spec);

  FactorHierarchy h;
  for (int f = 0; f < 16; ++f) {
    const std::string name = "g" + std::to_string(f);
    char member[8];
    std::snprintf(member, sizeof(member), "f%02d", f);
    h.groups.push_back(name);
    h.members[name] = {member};
  }

  BacktestConfig cfg;
  cfg.top_n = 20;
  cfg.seed = 907;
  cfg.ic_window = 4;
  cfg.models.mlp.hidden = {8};
  cfg.models.mlp.learning_rate = 1e-2;
  cfg.models.mlp.epochs = 50;
  cfg.models.mlp.batch = 32;
  cfg.models.forest.n_trees = 30;
  cfg.models.forest.max_depth = 4;
  cfg.models.forest.min_leaf = 20;

  const PipelineResult r = run_pipeline(panel, h, PreprocessConfig{}, cfg,
                                        {"ridge", "mlp", "forest", "ic_mean", "ic_ratio"});
  std::map<std::string, double> ret;
  for (const SchemeRow& row : r.matrix.rows) {
    g.expect(row.has_report, "row " + row.name + " has no report");
    ret[row.name] = row.report.strategy_return;
  }
  for (const std::string& combo : {"ic_mean", "ic_ratio"})
    for (const std::string& single : {"ridge", "mlp", "forest"})
      g.expect(ret[combo] > ret[single],
               combo + " " + num(ret[combo]) + " does not beat " + single + " " +
                   num(ret[single]));
  g.note("ic_mean " + num(ret["ic_mean"]) + ", ic_ratio " + num(ret["ic_ratio"]) +
         " vs ridge " + num(ret["ridge"]) + ", mlp " + num(ret["mlp"]) + ", forest " +
         num(ret["forest"]));
  g_directional_seconds = seconds_since(t0);
}

void screening_uplift(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  int uplift = 0;
  int kept_signal = 0;
  int kept_total = 0;
  double delta_sum = 0.0;
  for (std::uint64_t t = 0; t < 25; ++t) {
    SyntheticSpec spec;
    spec.n_stocks = 30;
    spec.n_months = 48;
    spec.n_factors = 13;
    spec.n_industries = 4;
    spec.signal = {{"f00", 0.015, false}, {"f01", -0.012, false}, {"f02", 0.01, false}};
    spec.noise = 0.04;
    spec.seed = derive_seed(7200, t);
    const FactorPanel panel = generate_synthetic_panel(spec);
    const FactorPanel clean = preprocess_panel(panel, PreprocessConfig{});

    const ScreenResult sr = screen_factors(clean);
    const std::set<std::string> kept(sr.kept.begin(), sr.kept.end());
    if (kept.count("f00") && kept.count("f01") && kept.count("f02")) ++kept_signal;
    kept_total += static_cast<int>(sr.kept.size());

    BacktestConfig cfg;
    cfg.top_n = 12;
    cfg.seed = 911;
    cfg.ic_window = 6;
    cfg.models.mlp.hidden = {10};
    cfg.models.mlp.learning_rate = 1e-2;
    cfg.models.mlp.epochs = 80;
    cfg.models.mlp.batch = 32;
    cfg.models.forest.n_trees = 40;
    cfg.models.forest.max_depth = 8;
    cfg.models.forest.min_leaf = 2;

    const ForecastSet full = run_forecasts(clean, cfg);
    const ForecastSet screened = run_forecasts(clean, cfg, sr.kept);
    const SchemeRow a = run_scheme(full, "ic_mean", cfg);
    const SchemeRow b = run_scheme(screened, "ic_mean", cfg);
    g.expect(a.has_report && b.has_report, "missing report at seed " + std::to_string(t));
    delta_sum += b.report.strategy_return - a.report.strategy_return;
    if (b.report.strategy_return > a.report.strategy_return) ++uplift;
  }
  g.expect(uplift >= 20, "screening helped in only " + std::to_string(uplift) + " of 25 runs");
  g.note("uplift in " + std::to_string(uplift) + "/25 runs, mean return delta " +
         num(delta_sum / 25.0) + ", mean kept " + num(kept_total / 25.0) +
         ", signal factors all kept in " + std::to_string(kept_signal) + "/25");

  const double elapsed = g_directional_seconds + seconds_since(t0);
  g.expect(elapsed < 300.0, "combined directional runtime " + num(elapsed) + "s");
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void cli_reproducibility(Gate& g) {
  const fs::path scratch = "acceptance_scratch";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  const std::string ini =
      "seed = 3\n"
      "\n"
      "[data]\n"
      "panel = " + (scratch / "panel.csv").string() + "\n"
      "stocks = 40\n"
      "months = 18\n"
      "factors = 8\n"
      "industries = 4\n"
      "signal = f00:0.02, f04:-0.01\n"
      "noise = 0.01\n"
      "\n"
      "[hierarchy]\n"
      "alpha = f00, f01\n"
      "value = f02, f03\n"
      "risk = f04, f05\n"
      "flow = f06, f07\n"
      "\n"
      "[predictors]\n"
      "mlp_hidden = 6\n"
      "mlp_epochs = 4\n"
      "mlp_batch = 32\n"
      "forest_trees = 10\n"
      "forest_depth = 4\n"
      "\n"
      "[backtest]\n"
      "top_n = 8\n";
  {
    std::ofstream out(scratch / "run.ini", std::ios::binary);
    out << ini;
  }

  auto run_cli = [&scratch](const std::string& args) {
    const std::string cmd = std::string(EALPHA_CLI_PATH) + " " + args + " >" +
                            (scratch / "stdout.txt").string() + " 2>" +
                            (scratch / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  auto tree_bytes = [](const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
  };

  const std::string config = " --config " + (scratch / "run.ini").string();
  g.expect(run_cli("synth" + config + " --out " + scratch.string()) == 0, "synth failed");
  g.expect(run_cli("backtest" + config + " --seed 7 --out " + (scratch / "runA").string()) == 0,
           "first backtest failed");
  g.expect(run_cli("backtest" + config + " --seed 7 --out " + (scratch / "runB").string()) == 0,
           "second backtest failed");

  const auto a = tree_bytes(scratch / "runA");
  const auto b = tree_bytes(scratch / "runB");
  g.expect(!a.empty(), "first run produced no files");
  g.expect(a.count("manifest.json") == 1 && a.count("report.json") == 1,
           "expected artifacts are missing");
  g.expect(a.size() == b.size(), "runs produced different file sets");
  int diffs = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      ++diffs;
      g.expect(false, name + " differs between identically seeded runs");
    }
  }
  g.note(std::to_string(a.size()) + " files per run, " + std::to_string(diffs) + " differing");
}

}  // namespace

int main() {
  struct Entry {
    const char* id;
    const char* name;
    std::function<void(Gate&)> body;
  };
  const std::vector<Entry> criteria = {
      {"1", "rank-correlation-oracle", rank_correlation_oracle},
      {"2", "entropy-weight-oracle", entropy_weight_oracle},
      {"3", "lasso-correctness", lasso_properties},
      {"4", "predictor-correctness", predictor_properties},
      {"5", "ensemble-weighting", ensemble_weighting},
      {"6", "backtest-integrity", backtest_integrity},
      {"7a", "ensemble-beats-single-models", directional_outperformance},
      {"7b", "screening-uplift", screening_uplift},
      {"8", "cli-reproducibility", cli_reproducibility},
  };

  int failed = 0;
  for (const Entry& entry : criteria) {
    Gate gate;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      entry.body(gate);
    } catch (const std::exception& e) {
      gate.expect(false, std::string("threw: ") + e.what());
    }
    const double elapsed = seconds_since(t0);
    if (gate.ok()) {
      std::printf("ACCEPTANCE %s %s: PASS  [%d checks, %.1fs]%s%s\n", entry.id, entry.name,
                  gate.checks(), elapsed, gate.extra().empty() ? "" : " ",
                  gate.extra().c_str());
    } else {
      ++failed;
      std::printf("ACCEPTANCE %s %s: FAIL  [%d checks, %.1fs] %s%s%s\n", entry.id, entry.name,
                  gate.checks(), elapsed, gate.failures().c_str(),
                  gate.extra().empty() ? "" : " | ", gate.extra().c_str());
    }
    std::fflush(stdout);
  }
  if (failed > 0) std::printf("ACCEPTANCE SUMMARY: %d criteria failed\n", failed);
  else std::printf("ACCEPTANCE SUMMARY: all criteria passed\n");
  return failed == 0 ? 0 : 1;
}
