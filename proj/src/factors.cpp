#include "ealpha/factors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ealpha/errors.hpp"
#include "ealpha/stats.hpp"

namespace ealpha {

void DailySeries::validate() const {
  if (days.size() != values.size()) fail(ErrorCode::alignment, "daily series days and values differ in length");
  for (std::size_t i = 1; i < days.size(); ++i) {
    if (days[i] <= days[i - 1]) fail(ErrorCode::structural, "daily series days must strictly increase");
  }
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::range, "daily series values must be finite");
  }
}

double halflife_weighted_return(const DailySeries& s, int window, double halflife) {
  s.validate();
  if (window < 1) fail(ErrorCode::precondition, "window must be at least 1 day");
  if (halflife <= 0.0) fail(ErrorCode::precondition, "halflife must be positive");
  if (static_cast<int>(s.values.size()) < window)
    fail(ErrorCode::insufficient_history, "series has " + std::to_string(s.values.size()) +
                                              " days, window needs " + std::to_string(window));
  const double lambda = std::pow(0.5, 1.0 / halflife);
  double num = 0.0;
  double den = 0.0;
  for (int age = 0; age < window; ++age) {
    const double wgt = std::pow(lambda, age);
    num += wgt * s.values[s.values.size() - 1 - static_cast<std::size_t>(age)];
    den += wgt;
  }
  return num / den;
}

double industry_excess_ir(const DailySeries& s, const DailySeries& industry_mean, int window) {
  s.validate();
  industry_mean.validate();
  if (window < 2) fail(ErrorCode::precondition, "excess IR needs a window of at least 2 days");
  if (static_cast<int>(s.values.size()) < window || static_cast<int>(industry_mean.values.size()) < window)
    fail(ErrorCode::insufficient_history, "both series must cover the window");
  std::vector<double> excess;
  excess.reserve(static_cast<std::size_t>(window));
  for (int k = window; k >= 1; --k) {
    const std::size_t i = s.values.size() - static_cast<std::size_t>(k);
    const std::size_t j = industry_mean.values.size() - static_cast<std::size_t>(k);
    if (s.days[i] != industry_mean.days[j])
      fail(ErrorCode::alignment, "stock and industry series disagree on trading days");
    excess.push_back(s.values[i] - industry_mean.values[j]);
  }
  const double sd = vec_stddev(excess);
  if (sd == 0.0) fail(ErrorCode::undefined_value, "excess IR undefined: zero dispersion");
  return vec_mean(excess) / sd;
}

double cgr(const std::vector<double>& annual_values, int years) {
  if (years < 2) fail(ErrorCode::precondition, "growth rate needs at least 2 years");
  if (static_cast<int>(annual_values.size()) != years)
    fail(ErrorCode::precondition, "expected " + std::to_string(years) + " annual values");
  const double first = annual_values.front();
  const double last = annual_values.back();
  if (first == 0.0 || first * last <= 0.0)
    fail(ErrorCode::undefined_value, "growth rate undefined for zero or sign-changing values");
  if (first < 0.0) fail(ErrorCode::undefined_value, "growth rate undefined for a negative base");
  return std::pow(last / first, 1.0 / (years - 1)) - 1.0;
}

double reversal_flip(double stock_metric, double market_avg, double stock_return) {
  return stock_metric >= market_avg ? stock_return : -stock_return;
}

BetaResidVol ts_beta_residvol(const DailySeries& stock, const DailySeries& benchmark, int window) {
  stock.validate();
  benchmark.validate();
  if (window < 3) fail(ErrorCode::precondition, "regression window must be at least 3 days");
  if (static_cast<int>(stock.values.size()) < window || static_cast<int>(benchmark.values.size()) < window)
    fail(ErrorCode::insufficient_history, "both series must cover the regression window");
  std::vector<double> y, x;
  for (int k = window; k >= 1; --k) {
    const std::size_t i = stock.values.size() - static_cast<std::size_t>(k);
    const std::size_t j = benchmark.values.size() - static_cast<std::size_t>(k);
    if (stock.days[i] != benchmark.days[j])
      fail(ErrorCode::alignment, "stock and benchmark series disagree on trading days");
    y.push_back(stock.values[i]);
    x.push_back(benchmark.values[j]);
  }
  const auto [x_lo, x_hi] = std::minmax_element(x.begin(), x.end());
  if (*x_lo == *x_hi) fail(ErrorCode::undefined_value, "beta undefined: benchmark has zero variance");
  const double mx = vec_mean(x);
  const double my = vec_mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  BetaResidVol out;
  out.beta = sxy / sxx;
  const double a = my - out.beta * mx;
  std::vector<double> resid;
  resid.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) resid.push_back(y[i] - a - out.beta * x[i]);
  out.resid_std = vec_stddev(resid);
  return out;
}

void FactorHierarchy::validate(const std::vector<std::string>& panel_factors) const {
  if (groups.empty()) fail(ErrorCode::config, "factor hierarchy has no groups");
  std::set<std::string> seen_groups;
  std::set<std::string> seen_members;
  const std::set<std::string> available(panel_factors.begin(), panel_factors.end());
  for (const std::string& g : groups) {
    if (!seen_groups.insert(g).second) fail(ErrorCode::config, "duplicate group '" + g + "'");
    const auto it = members.find(g);
    if (it == members.end() || it->second.empty())
      fail(ErrorCode::config, "group '" + g + "' has no members");
    for (const std::string& m : it->second) {
      if (!seen_members.insert(m).second)
        fail(ErrorCode::config, "factor '" + m + "' appears in more than one group");
      if (available.count(m) == 0)
        fail(ErrorCode::config, "group member '" + m + "' is not a panel factor");
    }
  }
  for (const auto& [g, _] : members) {
    if (seen_groups.count(g) == 0) fail(ErrorCode::config, "members listed for unknown group '" + g + "'");
  }
}

EwmStandardized ewm_standardize(const std::vector<double>& window_cells,
                                const std::vector<double>& current_cells) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (double v : window_cells) {
    if (is_missing(v)) continue;
    if (!any) {
      lo = hi = v;
      any = true;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  EwmStandardized out;
  if (!any || hi == lo) {
    out.degenerate = true;
    out.z_window.assign(window_cells.size(), 0.0);
    out.z_current.assign(current_cells.size(), 0.0);
    for (std::size_t i = 0; i < window_cells.size(); ++i)
      if (is_missing(window_cells[i])) out.z_window[i] = missing_value();
    for (std::size_t i = 0; i < current_cells.size(); ++i)
      if (is_missing(current_cells[i])) out.z_current[i] = missing_value();
    return out;
  }
  const double span = hi - lo;
  out.z_window.reserve(window_cells.size());
  for (double v : window_cells)
    out.z_window.push_back(is_missing(v) ? missing_value() : (v - lo) / span);
  out.z_current.reserve(current_cells.size());
  for (double v : current_cells)
    out.z_current.push_back(is_missing(v) ? missing_value() : std::clamp((v - lo) / span, 0.0, 1.0));
  return out;
}

EwmEntropy ewm_entropy(const std::vector<double>& z_cells) {
  double total = 0.0;
  std::size_t count = 0;
  for (double z : z_cells) {
    if (is_missing(z)) continue;
    if (z < 0.0) fail(ErrorCode::precondition, "entropy input must be nonnegative");
    total += z;
    ++count;
  }
  EwmEntropy out;
  if (count < 2) fail(ErrorCode::precondition, "entropy needs at least 2 cells");
  if (total == 0.0) {
    out.e = 1.0;
    out.degenerate = true;
    return out;
  }
  double acc = 0.0;
  for (double z : z_cells) {
    if (is_missing(z) || z == 0.0) continue;
    const double p = z / total;
    acc += p * std::log(p);
  }
  out.e = -acc / std::log(static_cast<double>(count));
  return out;
}

EwmGroupWeights ewm_weights(const std::vector<double>& entropies) {
  if (entropies.empty()) fail(ErrorCode::precondition, "weights need at least one entropy");
  EwmGroupWeights out;
  double total = 0.0;
  for (double e : entropies) total += 1.0 - e;
  if (total <= 0.0) {
    out.degenerate = true;
    out.w.assign(entropies.size(), 1.0 / static_cast<double>(entropies.size()));
    return out;
  }
  out.w.reserve(entropies.size());
  for (double e : entropies) out.w.push_back((1.0 - e) / total);
  return out;
}

std::vector<double> ewm_aggregate(const std::vector<std::vector<double>>& z_current_per_member,
                                  const std::vector<double>& w) {
  if (z_current_per_member.size() != w.size())
    fail(ErrorCode::alignment, "weights and member scores differ in count");
  if (w.empty()) fail(ErrorCode::precondition, "aggregate needs at least one member");
  const std::size_t n = z_current_per_member.front().size();
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (z_current_per_member[j].size() != n)
      fail(ErrorCode::alignment, "member score vectors differ in length");
    for (std::size_t a = 0; a < n; ++a) {
      if (is_missing(out[a])) continue;
      const double z = z_current_per_member[j][a];
      out[a] = is_missing(z) ? missing_value() : out[a] + w[j] * z;
    }
  }
  return out;
}

std::map<std::string, std::vector<double>> EntropyWeightSeries::mean_weights() const {
  std::map<std::string, std::vector<double>> acc;
  if (vintage_of_month.empty()) return acc;
  for (const std::string& g : hierarchy.groups)
    acc[g].assign(hierarchy.members.at(g).size(), 0.0);
  for (int v : vintage_of_month) {
    const EntropyVintage& vin = vintages[static_cast<std::size_t>(v)];
    for (const std::string& g : hierarchy.groups) {
      const std::vector<double>& w = vin.w.at(g);
      for (std::size_t j = 0; j < w.size(); ++j) acc[g][j] += w[j];
    }
  }
  const double n = static_cast<double>(vintage_of_month.size());
  for (auto& [g, w] : acc)
    for (double& x : w) x /= n;
  return acc;
}

namespace {

constexpr int kWindowMonths = 12;

std::vector<double> member_window_cells(const FactorPanel& panel, int f, int month_begin, int month_end) {
  std::vector<double> cells;
  cells.reserve(static_cast<std::size_t>(month_end - month_begin) *
                static_cast<std::size_t>(panel.n_stocks()));
  for (int m = month_begin; m < month_end; ++m)
    for (int s = 0; s < panel.n_stocks(); ++s) cells.push_back(panel.value(m, s, f));
  return cells;
}

}  // namespace

SynthesisResult rolling_synthesize(const FactorPanel& panel, const FactorHierarchy& hierarchy,
                                   ExecMode mode) {
  hierarchy.validate(panel.factor_names());
  const int n_m = panel.n_months();
  const int n_s = panel.n_stocks();
  if (n_m < kWindowMonths + 1)
    fail(ErrorCode::insufficient_history, "synthesis needs at least " + std::to_string(kWindowMonths + 1) +
                                              " months, panel has " + std::to_string(n_m));

  const int n_groups = static_cast<int>(hierarchy.groups.size());
  const int n_vintages = 1 + (n_m - kWindowMonths);

  struct MemberFit {
    double lo = 0.0;
    double hi = 0.0;
    bool degenerate = false;
    double entropy = 1.0;
  };
  struct GroupFit {
    std::vector<MemberFit> members;
    std::vector<double> w;
    bool equal_weight_fallback = false;
  };
  std::vector<GroupFit> fits(static_cast<std::size_t>(n_vintages) * static_cast<std::size_t>(n_groups));

  auto window_begin = [&](int v) { return v == 0 ? 0 : v - 1; };

  run_for(mode, static_cast<std::size_t>(n_vintages) * static_cast<std::size_t>(n_groups),
          [&](std::size_t task) {
            const int v = static_cast<int>(task) / n_groups;
            const int g = static_cast<int>(task) % n_groups;
            const int begin = window_begin(v);
            const int end = begin + kWindowMonths;
            const std::vector<std::string>& member_names =
                hierarchy.members.at(hierarchy.groups[static_cast<std::size_t>(g)]);

            GroupFit fit;
            std::vector<double> entropies;
            for (const std::string& name : member_names) {
              const int f = panel.factor_pos(name);
              const std::vector<double> cells = member_window_cells(panel, f, begin, end);
              double lo = 0.0, hi = 0.0;
              bool any = false;
              for (double c : cells) {
                if (is_missing(c)) continue;
                if (!any) {
                  lo = hi = c;
                  any = true;
                } else {
                  lo = std::min(lo, c);
                  hi = std::max(hi, c);
                }
              }
              MemberFit mf;
              mf.degenerate = !any || hi == lo;
              if (!mf.degenerate) {
                mf.lo = lo;
                mf.hi = hi;
                std::vector<double> z;
                z.reserve(cells.size());
                for (double c : cells)
                  z.push_back(is_missing(c) ? missing_value() : (c - lo) / (hi - lo));
                mf.entropy = ewm_entropy(z).e;
              }
              entropies.push_back(mf.entropy);
              fit.members.push_back(mf);
            }
            EwmGroupWeights gw = ewm_weights(entropies);
            fit.w = std::move(gw.w);
            fit.equal_weight_fallback = gw.degenerate;
            fits[task] = std::move(fit);
          });

  FactorPanel scores(panel.stocks(), panel.months(), hierarchy.groups);
  for (int m = 0; m < n_m; ++m) {
    scores.set_benchmark_return(m, panel.benchmark_return(m));
    for (int s = 0; s < n_s; ++s) {
      scores.set_next_return(m, s, panel.next_return(m, s));
      scores.set_market_cap(m, s, panel.market_cap(m, s));
      scores.set_industry(m, s, panel.industry(m, s));
      scores.set_flags(m, s, panel.flags(m, s));
    }
  }

  auto vintage_for_month = [&](int m) { return m < kWindowMonths ? 0 : m - kWindowMonths + 1; };

  run_for(mode, static_cast<std::size_t>(n_m), [&](std::size_t mi) {
    const int m = static_cast<int>(mi);
    const int v = vintage_for_month(m);
    for (int g = 0; g < n_groups; ++g) {
      const GroupFit& fit =
          fits[static_cast<std::size_t>(v) * static_cast<std::size_t>(n_groups) + static_cast<std::size_t>(g)];
      const std::vector<std::string>& member_names =
          hierarchy.members.at(hierarchy.groups[static_cast<std::size_t>(g)]);
      for (int s = 0; s < n_s; ++s) {
        double f_score = 0.0;
        bool miss = false;
        for (std::size_t j = 0; j < member_names.size(); ++j) {
          const int f = panel.factor_pos(member_names[j]);
          const double x = panel.value(m, s, f);
          if (is_missing(x)) {
            miss = true;
            break;
          }
          const MemberFit& mf = fit.members[j];
          const double z =
              mf.degenerate ? 0.0 : std::clamp((x - mf.lo) / (mf.hi - mf.lo), 0.0, 1.0);
          f_score += fit.w[j] * z;
        }
        scores.set_value(m, s, g, miss ? missing_value() : f_score);
      }
    }
  });

  SynthesisResult result{std::move(scores), EntropyWeightSeries{}};
  result.weights.hierarchy = hierarchy;
  result.weights.vintage_of_month.resize(static_cast<std::size_t>(n_m));
  for (int m = 0; m < n_m; ++m) result.weights.vintage_of_month[static_cast<std::size_t>(m)] = vintage_for_month(m);
  result.weights.vintages.resize(static_cast<std::size_t>(n_vintages));
  for (int v = 0; v < n_vintages; ++v) {
    EntropyVintage vin;
    const int begin = window_begin(v);
    vin.window_start = panel.months()[static_cast<std::size_t>(begin)];
    vin.window_end = panel.months()[static_cast<std::size_t>(begin + kWindowMonths - 1)];
    for (int g = 0; g < n_groups; ++g) {
      const std::string& name = hierarchy.groups[static_cast<std::size_t>(g)];
      const GroupFit& fit =
          fits[static_cast<std::size_t>(v) * static_cast<std::size_t>(n_groups) + static_cast<std::size_t>(g)];
      vin.w[name] = fit.w;
      std::vector<double> es;
      for (const MemberFit& mf : fit.members) es.push_back(mf.entropy);
      vin.entropy[name] = std::move(es);
      vin.equal_weight_fallback[name] = fit.equal_weight_fallback;
    }
    result.weights.vintages[static_cast<std::size_t>(v)] = std::move(vin);
  }
  return result;
}

}  // namespace ealpha
