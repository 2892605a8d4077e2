#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ealpha/backtest.hpp"
#include "ealpha/factors.hpp"
#include "ealpha/screening.hpp"

namespace ealpha {

std::uint64_t fnv1a(const std::string& bytes);

/// Writes artifacts under one directory and remembers what it wrote, so a
/// failed run can sweep its partial outputs and a finished run can emit a
/// digest manifest. File contents carry no timestamps; a rerun with the
/// same inputs reproduces every byte.
class OutputWriter {
 public:
  explicit OutputWriter(std::string dir);

  void write(const std::string& name, const std::string& content);
  /// Records a file some other writer already placed in the directory.
  void adopt(const std::string& name);
  void write_manifest();
  void remove_written();

  const std::string& dir() const { return dir_; }
  const std::vector<std::string>& written() const { return names_; }

 private:
  std::string dir_;
  std::vector<std::string> names_;
  std::vector<std::uint64_t> digests_;
  std::vector<std::size_t> sizes_;
};

/// Fixed-precision decimal text for every number that lands in a file;
/// round-trips doubles exactly and never varies across runs.
std::string format_number(double v);

std::string render_report_json(const MatrixResult& matrix);
std::string render_equity_csv(const SchemeRow& row);
std::string render_weights_csv(const SchemeRow& row, const std::vector<std::string>& models);
std::string render_ic_series_csv(const ForecastSet& fx);
std::string render_metric_series_csv(const ForecastSet& fx);
std::string render_cumulative_ic_csv(const ForecastSet& fx);
std::string render_equity_plot_csv(const MatrixResult& matrix);
std::string render_equity_svg(const MatrixResult& matrix);
std::string render_screen_json(const ScreenResult& screen);
std::string render_synthesis_csv(const EntropyWeightSeries& weights);

}  // namespace ealpha
