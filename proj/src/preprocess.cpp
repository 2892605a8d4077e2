#include "ealpha/preprocess.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ealpha/errors.hpp"
#include "ealpha/stats.hpp"

namespace ealpha {

CrossSection impute_missing(const CrossSection& cs) {
  std::vector<double> pool;
  std::map<std::string, std::vector<double>> by_industry;
  for (std::size_t i = 0; i < cs.values.size(); ++i) {
    if (!is_missing(cs.values[i])) {
      pool.push_back(cs.values[i]);
      by_industry[cs.industry[i]].push_back(cs.values[i]);
    }
  }
  if (pool.empty()) fail(ErrorCode::degenerate, "cannot impute a cross-section with no observed values");
  const double pool_median = vec_median(pool);

  CrossSection out = cs;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (!is_missing(out.values[i])) continue;
    const auto it = by_industry.find(cs.industry[i]);
    out.values[i] = it == by_industry.end() ? pool_median : vec_median(it->second);
  }
  return out;
}

WinsorizeResult winsorize_mad(const std::vector<double>& values, double k) {
  if (values.size() < 2) fail(ErrorCode::precondition, "winsorize needs at least 2 values");
  for (double v : values)
    if (!std::isfinite(v)) fail(ErrorCode::precondition, "winsorize input must be finite");
  const double m = vec_median(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::fabs(v - m));
  const double mad = vec_median(dev);
  WinsorizeResult out;
  if (mad == 0.0) {
    out.values = values;
    out.degenerate_dispersion = true;
    return out;
  }
  const double lo = m - k * mad;
  const double hi = m + k * mad;
  out.values.reserve(values.size());
  for (double v : values) out.values.push_back(std::clamp(v, lo, hi));
  return out;
}

std::vector<double> zscore(const std::vector<double>& values) {
  const double sd = vec_stddev(values);
  if (sd == 0.0) fail(ErrorCode::degenerate, "zscore of a constant vector");
  const double mu = vec_mean(values);
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back((v - mu) / sd);
  return out;
}

namespace {

/// Orthonormal basis of the design columns, built left to right. Columns that
/// add no independent direction are dropped so the reference-dummy and
/// singleton-industry collinearity cases stay solvable.
struct DesignBasis {
  Eigen::MatrixXd q;  // n x rank
  bool dropped = false;
};

DesignBasis build_basis(const std::vector<Eigen::VectorXd>& columns) {
  const Eigen::Index n = columns.empty() ? 0 : columns.front().size();
  DesignBasis basis;
  basis.q.resize(n, 0);
  for (const Eigen::VectorXd& col : columns) {
    const double norm0 = col.norm();
    Eigen::VectorXd r = col;
    if (basis.q.cols() > 0) {
      r -= basis.q * (basis.q.transpose() * r);
      r -= basis.q * (basis.q.transpose() * r);
    }
    if (norm0 == 0.0 || r.norm() <= 1e-10 * norm0) {
      basis.dropped = true;
      continue;
    }
    basis.q.conservativeResize(Eigen::NoChange, basis.q.cols() + 1);
    basis.q.col(basis.q.cols() - 1) = r / r.norm();
  }
  return basis;
}

}  // namespace

NeutralizeResult neutralize(const CrossSection& cs, bool include_size) {
  const std::size_t n = cs.values.size();
  if (n != cs.industry.size() || (include_size && n != cs.log_mcap.size()))
    fail(ErrorCode::alignment, "cross-section fields differ in length");
  for (double v : cs.values)
    if (!std::isfinite(v)) fail(ErrorCode::precondition, "neutralize input must be finite");

  std::set<std::string> industries(cs.industry.begin(), cs.industry.end());
  std::vector<std::string> dummy_levels(industries.begin(), industries.end());
  // First level is absorbed by the intercept.
  if (!dummy_levels.empty()) dummy_levels.erase(dummy_levels.begin());

  const std::size_t n_cols = 1 + dummy_levels.size() + (include_size ? 1 : 0);
  if (n <= n_cols)
    fail(ErrorCode::underdetermined, "neutralize needs more stocks (" + std::to_string(n) +
                                         ") than regressors (" + std::to_string(n_cols) + ")");

  std::vector<Eigen::VectorXd> columns;
  columns.push_back(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));
  for (const std::string& level : dummy_levels) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) d[static_cast<Eigen::Index>(i)] = cs.industry[i] == level ? 1.0 : 0.0;
    columns.push_back(std::move(d));
  }
  if (include_size) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(cs.log_mcap[i]))
        fail(ErrorCode::precondition, "log market cap must be finite for neutralization");
      s[static_cast<Eigen::Index>(i)] = cs.log_mcap[i];
    }
    columns.push_back(std::move(s));
  }

  const DesignBasis basis = build_basis(columns);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = cs.values[i];
  const Eigen::VectorXd resid = y - basis.q * (basis.q.transpose() * y);

  NeutralizeResult out;
  out.dropped_collinear = basis.dropped;
  out.residuals.assign(resid.data(), resid.data() + resid.size());
  return out;
}

namespace {

struct CellFlags {
  std::uint8_t degenerate = 0;
  std::uint8_t constant = 0;
  std::uint8_t dropped = 0;
};

}  // namespace

FactorPanel preprocess_panel(const FactorPanel& panel, const PreprocessConfig& cfg,
                             PreprocessDiagnostics* diag, ExecMode mode) {
  const int n_m = panel.n_months();
  const int n_f = panel.n_factors();
  const int n_s = panel.n_stocks();
  FactorPanel out = panel;

  std::vector<std::uint8_t> size_factor(static_cast<std::size_t>(n_f), 0);
  for (const std::string& name : cfg.size_factor_names) {
    const int f = panel.factor_pos(name);
    if (f < 0) fail(ErrorCode::config, "size factor '" + name + "' is not a panel factor");
    size_factor[static_cast<std::size_t>(f)] = 1;
  }

  std::vector<CellFlags> flags(static_cast<std::size_t>(n_m) * static_cast<std::size_t>(n_f));

  run_for(mode, n_m * n_f, [&](int task) {
    const int m = task / n_f;
    const int f = task % n_f;

    CrossSection cs;
    std::vector<int> rows;
    for (int s = 0; s < n_s; ++s) {
      if (panel.flags(m, s).any()) continue;
      rows.push_back(s);
      cs.stock_ids.push_back(panel.stocks()[static_cast<std::size_t>(s)]);
      cs.values.push_back(panel.value(m, s, f));
      cs.industry.push_back(panel.industry(m, s));
      cs.log_mcap.push_back(std::log(panel.market_cap(m, s)));
    }
    if (cs.values.size() < 2)
      fail(ErrorCode::degenerate,
           "fewer than 2 eligible stocks at " + panel.months()[static_cast<std::size_t>(m)].str());

    CellFlags& cell = flags[static_cast<std::size_t>(task)];
    cs = impute_missing(cs);
    WinsorizeResult w = winsorize_mad(cs.values, cfg.mad_k);
    cell.degenerate = w.degenerate_dispersion ? 1 : 0;
    cs.values = std::move(w.values);

    std::vector<double> processed;
    const double sd = vec_stddev(cs.values);
    if (sd == 0.0) {
      // A constant column carries no cross-sectional information; keep the
      // month alive by zeroing it instead of aborting the whole pipeline.
      cell.constant = 1;
      processed.assign(cs.values.size(), 0.0);
    } else {
      cs.values = zscore(cs.values);
      const bool include_size = cfg.neutralize_size && size_factor[static_cast<std::size_t>(f)] == 0;
      NeutralizeResult nr = neutralize(cs, include_size);
      cell.dropped = nr.dropped_collinear ? 1 : 0;
      processed = std::move(nr.residuals);
    }

    for (int s = 0; s < n_s; ++s) out.set_value(m, s, f, missing_value());
    for (std::size_t i = 0; i < rows.size(); ++i) out.set_value(m, rows[i], f, processed[i]);
  });

  if (diag != nullptr) {
    *diag = PreprocessDiagnostics{};
    for (const CellFlags& c : flags) {
      diag->degenerate_dispersion += c.degenerate;
      diag->constant_columns += c.constant;
      diag->dropped_collinear += c.dropped;
    }
  }
  return out;
}

}  // namespace ealpha
