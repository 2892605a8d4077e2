#include <doctest.h>

#include <cmath>

#include "ealpha/errors.hpp"
#include "ealpha/metrics.hpp"
#include "ealpha/rng.hpp"
#include "ealpha/stats.hpp"
#include "oracles.hpp"

using namespace ealpha;

TEST_SUITE("metrics") {
  TEST_CASE("rmse basics") {
    CHECK(rmse({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(rmse({4, -2}, {1, 2}) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
    CHECK(rmse({1.3, 2.3}, {1.0, 2.0}) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(rmse({1, 2}, {3, 5}) == rmse({3, 5}, {1, 2}));
    CHECK_THROWS_AS(rmse({}, {}), Error);
    CHECK_THROWS_AS(rmse({1}, {1, 2}), Error);
  }

  TEST_CASE("mape floors tiny actuals and is asymmetric") {
    CHECK(mape({2}, {1}) == doctest::Approx(1.0));
    CHECK(mape({1, 2}, {1, 2}) == 0.0);
    CHECK(mape({1}, {0}) == doctest::Approx(1e8));
    CHECK(mape({2}, {1}) != mape({1}, {2}));
  }

  TEST_CASE("direction metrics follow the confusion matrix") {
    DirectionOutcome d = classify_directions({1, 1, 1, 1}, {0.5, 0.5, -0.5, -0.5});
    CHECK(d.tp == 2);
    CHECK(d.fp == 2);
    CHECK(d.precision() == doctest::Approx(0.5));
    CHECK(d.recall() == doctest::Approx(1.0));
    CHECK(d.f1() == doctest::Approx(2.0 / 3.0));

    DirectionOutcome perfect = classify_directions({0.1, -0.2, 0.3}, {0.4, -0.1, 0.9});
    CHECK(perfect.precision() == 1.0);
    CHECK(perfect.recall() == 1.0);
    CHECK(perfect.f1() == 1.0);

    DirectionOutcome none = classify_directions({-1, -1}, {1, -1});
    CHECK(none.precision() == 0.0);
    CHECK(none.recall() == 0.0);
    CHECK(none.f1() == 0.0);
  }

  TEST_CASE("direction metrics invariant under positive scaling of predictions") {
    const std::vector<double> pred{0.3, -0.1, 0.0, 0.7, -0.4};
    const std::vector<double> actual{0.2, 0.1, -0.3, 0.4, -0.2};
    DirectionOutcome a = classify_directions(pred, actual);
    std::vector<double> scaled;
    for (double p : pred) scaled.push_back(17.5 * p);
    DirectionOutcome b = classify_directions(scaled, actual);
    CHECK(a.tp == b.tp);
    CHECK(a.fp == b.fp);
    CHECK(a.tn == b.tn);
    CHECK(a.fn == b.fn);
  }

  TEST_CASE("spearman matches textbook values") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {40, 30, 20, 10}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 2, 3, 4, 5}, {1, 3, 2, 5, 4}) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), Error);
    CHECK_THROWS_AS(spearman({1}, {2}), Error);
  }

  TEST_CASE("spearman invariant under strictly increasing transforms") {
    Rng rng(99);
    std::vector<double> x, y;
    for (int i = 0; i < 50; ++i) {
      x.push_back(rng.normal());
      y.push_back(rng.normal());
    }
    const double base = spearman(x, y);
    std::vector<double> ex, cy;
    for (double v : x) ex.push_back(std::exp(v));
    for (double v : y) cy.push_back(v * v * v + 2.0 * v);
    CHECK(spearman(ex, y) == doctest::Approx(base).epsilon(1e-12));
    CHECK(spearman(x, cy) == doctest::Approx(base).epsilon(1e-12));
  }

  TEST_CASE("spearman equals the counting-rank oracle on random data with ties") {
    Rng rng(4242);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(40));
      std::vector<double> x, y;
      for (int i = 0; i < n; ++i) {
        // Coarse rounding forces frequent ties.
        x.push_back(std::round(rng.normal() * 4.0) / 4.0);
        y.push_back(std::round(rng.normal() * 4.0) / 4.0);
      }
      auto distinct = [](const std::vector<double>& v) {
        for (double a : v)
          if (a != v[0]) return true;
        return false;
      };
      if (!distinct(x) || !distinct(y)) continue;
      CHECK(spearman(x, y) == doctest::Approx(oracle::spearman_counting(x, y)).epsilon(1e-12));
    }
  }

  TEST_CASE("independent vectors rarely show large IC") {
    Rng rng(2026);
    int large = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
      std::vector<double> p, a;
      for (int i = 0; i < 300; ++i) {
        p.push_back(rng.normal());
        a.push_back(rng.normal());
      }
      if (std::fabs(ic_at(p, a)) >= 0.2) ++large;
    }
    CHECK(large <= trials / 20);
  }

  TEST_CASE("ic matches sign conventions") {
    const std::vector<double> r{0.05, -0.02, 0.01, 0.03, -0.04};
    CHECK(ic_at(r, r) == doctest::Approx(1.0));
    std::vector<double> neg;
    for (double v : r) neg.push_back(-v);
    CHECK(ic_at(neg, r) == doctest::Approx(-1.0));
  }

  TEST_CASE("cumulative ic is a prefix sum") {
    ICSeries s;
    s.months = {MonthIndex{2020, 1}, MonthIndex{2020, 2}};
    s.models = {"a", "b"};
    s.ic = {{0.1, -0.05}, {0.0, 0.0}};
    auto c = s.cumulative();
    CHECK(c[0][0] == doctest::Approx(0.1));
    CHECK(c[0][1] == doctest::Approx(0.05));
    CHECK(c[1][0] == 0.0);
    CHECK(c[1][1] == 0.0);
  }

  TEST_CASE("rank helper averages ties") {
    auto r = average_tie_ranks({10, 20, 20, 30});
    CHECK(r[0] == doctest::Approx(1.0));
    CHECK(r[1] == doctest::Approx(2.5));
    CHECK(r[2] == doctest::Approx(2.5));
    CHECK(r[3] == doctest::Approx(4.0));
  }

  TEST_CASE("median and stddev helpers") {
    CHECK(vec_median({3, 1, 2}) == 2.0);
    CHECK(vec_median({4, 1, 3, 2}) == doctest::Approx(2.5));
    CHECK(vec_stddev({1, 2, 3, 4}) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-12));
    CHECK_THROWS_AS(vec_stddev({1.0}), Error);
  }
}
