#pragma once

#include <string>
#include <vector>

#include "ealpha/panel.hpp"
#include "ealpha/parallel.hpp"

namespace ealpha {

/// One factor observed across the stocks of a single month.
struct CrossSection {
  std::vector<std::string> stock_ids;
  std::vector<double> values;
  std::vector<std::string> industry;
  std::vector<double> log_mcap;
};

CrossSection impute_missing(const CrossSection& cs);

struct WinsorizeResult {
  std::vector<double> values;
  bool degenerate_dispersion = false;
};

WinsorizeResult winsorize_mad(const std::vector<double>& values, double k = 3.0);

std::vector<double> zscore(const std::vector<double>& values);

struct NeutralizeResult {
  std::vector<double> residuals;
  bool dropped_collinear = false;
};

/// Residuals of the factor on intercept, industry dummies and, when
/// include_size is set, log market cap.
NeutralizeResult neutralize(const CrossSection& cs, bool include_size);

struct PreprocessConfig {
  double mad_k = 3.0;
  bool neutralize_size = true;
  /// Factors regressed on industry only; size exposure is the signal itself.
  std::vector<std::string> size_factor_names;
};

struct PreprocessDiagnostics {
  int degenerate_dispersion = 0;
  int constant_columns = 0;
  int dropped_collinear = 0;
};

/// Runs impute, clip, standardize, neutralize for every month and factor over
/// the eligible universe. Ineligible cells come back missing. A column that is
/// constant after clipping becomes all zero and is counted in diagnostics.
FactorPanel preprocess_panel(const FactorPanel& panel, const PreprocessConfig& cfg,
                             PreprocessDiagnostics* diag = nullptr,
                             ExecMode mode = ExecMode::parallel);

}  // namespace ealpha
