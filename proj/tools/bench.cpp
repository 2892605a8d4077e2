#include <chrono>
#include <cstdio>
#include <string>

#include "ealpha/backtest.hpp"
#include "ealpha/factors.hpp"
#include "ealpha/panel.hpp"
#include "ealpha/parallel.hpp"
#include "ealpha/predictors.hpp"
#include "ealpha/preprocess.hpp"
#include "ealpha/rng.hpp"

using namespace ealpha;

namespace {

double seconds(void (*body)(ExecMode), ExecMode mode) {
  const auto t0 = std::chrono::steady_clock::now();
  body(mode);
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

FactorPanel bench_panel() {
  SyntheticSpec spec;
  spec.n_stocks = 300;
  spec.n_months = 36;
  spec.n_factors = 24;
  spec.n_industries = 8;
  spec.signal = {{"f00", 0.02, false}, {"f05", -0.01, false}};
  spec.noise = 0.02;
  spec.seed = 2024;
  return generate_synthetic_panel(spec);
}

void bench_preprocess(ExecMode mode) {
  const FactorPanel panel = bench_panel();
  preprocess_panel(panel, PreprocessConfig{}, nullptr, mode);
}

void bench_synthesize(ExecMode mode) {
  const FactorPanel clean = preprocess_panel(bench_panel(), PreprocessConfig{}, nullptr, mode);
  FactorHierarchy h;
  for (int g = 0; g < 8; ++g) {
    const std::string group = "g" + std::to_string(g);
    h.groups.push_back(group);
    for (int j = 0; j < 3; ++j) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "f%02d", g * 3 + j);
      h.members[group].push_back(buf);
    }
  }
  rolling_synthesize(clean, h, mode);
}

void bench_forest(ExecMode mode) {
  Rng rng(5);
  const std::size_t n = 2000;
  const std::size_t p = 8;
  FeatureMatrix x;
  for (std::size_t j = 0; j < p; ++j) x.names.push_back("x" + std::to_string(j));
  std::vector<double> y(n);
  x.rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    x.rows[i].resize(p);
    for (std::size_t j = 0; j < p; ++j) x.rows[i][j] = rng.uniform(-1.0, 1.0);
    y[i] = 1.5 * x.rows[i][0] - x.rows[i][1] + 0.1 * rng.normal();
  }
  ForestConfig cfg;
  cfg.n_trees = 120;
  cfg.max_depth = 10;
  train_forest(x, y, cfg, 7, mode);
}

void bench_matrix(ExecMode mode) {
  SyntheticSpec spec;
  spec.n_stocks = 80;
  spec.n_months = 20;
  spec.n_factors = 8;
  spec.n_industries = 5;
  spec.signal = {{"f00", 0.02, false}};
  spec.noise = 0.015;
  spec.seed = 99;
  const FactorPanel panel = generate_synthetic_panel(spec);
  FactorHierarchy h;
  for (int g = 0; g < 4; ++g) {
    const std::string group = "g" + std::to_string(g);
    h.groups.push_back(group);
    char a[8], b[8];
    std::snprintf(a, sizeof(a), "f%02d", 2 * g);
    std::snprintf(b, sizeof(b), "f%02d", 2 * g + 1);
    h.members[group] = {a, b};
  }
  BacktestConfig cfg;
  cfg.top_n = 10;
  cfg.seed = 3;
  cfg.mode = mode;
  cfg.models.mlp.hidden = {8};
  cfg.models.mlp.epochs = 10;
  cfg.models.forest.n_trees = 40;
  cfg.models.forest.max_depth = 6;
  run_pipeline(panel, h, PreprocessConfig{}, cfg);
}

void row(const char* name, void (*body)(ExecMode)) {
  const double s = seconds(body, ExecMode::serial);
  const double p = seconds(body, ExecMode::parallel);
  std::printf("%-28s %9.3fs %9.3fs %7.2fx\n", name, s, p, p > 0.0 ? s / p : 0.0);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", max_threads());
  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial", "parallel", "speedup");
  row("preprocess_panel", bench_preprocess);
  row("rolling_synthesize", bench_synthesize);
  row("train_forest", bench_forest);
  row("run_pipeline", bench_matrix);
  return 0;
}
