#include "ealpha/outputs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ealpha/errors.hpp"

namespace ealpha {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) fail(ErrorCode::io, "write failed for '" + path + "'");
}

}  // namespace

OutputWriter::OutputWriter(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::io, "cannot create output directory '" + dir_ + "': " + ec.message());
}

void OutputWriter::write(const std::string& name, const std::string& content) {
  write_file(dir_ + "/" + name, content);
  names_.push_back(name);
  digests_.push_back(fnv1a(content));
  sizes_.push_back(content.size());
}

void OutputWriter::adopt(const std::string& name) {
  const std::string path = dir_ + "/" + name;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read back '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();
  names_.push_back(name);
  digests_.push_back(fnv1a(content));
  sizes_.push_back(content.size());
}

void OutputWriter::write_manifest() {
  std::vector<std::size_t> order(names_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return names_[a] < names_[b]; });

  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (std::size_t i : order) {
    files.push_back({{"name", names_[i]},
                     {"bytes", sizes_[i]},
                     {"fnv1a", hex64(digests_[i])}});
  }
  nlohmann::ordered_json manifest{{"files", files}};
  write_file(dir_ + "/manifest.json", manifest.dump(2) + "\n");
  names_.push_back("manifest.json");
}

void OutputWriter::remove_written() {
  for (const std::string& name : names_) {
    std::error_code ec;
    std::filesystem::remove(dir_ + "/" + name, ec);
  }
  names_.clear();
  digests_.clear();
  sizes_.clear();
}

namespace {

nlohmann::ordered_json report_json(const BacktestReport& r) {
  return {{"strategy_return", r.strategy_return},
          {"annualized_return", r.annualized_return},
          {"annualized_volatility", r.annualized_volatility},
          {"excess_return", r.excess_return},
          {"sharpe", r.sharpe},
          {"beta", r.beta},
          {"alpha", r.alpha},
          {"max_drawdown", r.max_drawdown}};
}

nlohmann::ordered_json quality_json(const QualitySummary& q) {
  return {{"rmse", q.rmse},         {"mape", q.mape}, {"precision", q.precision},
          {"recall", q.recall},     {"f1", q.f1},     {"ic_mean", q.ic_mean},
          {"ic_ratio", q.ic_ratio}};
}

/// Wealth path of the per-month benchmark returns, basis 1.0.
std::vector<double> benchmark_wealth(const ForecastSet& fx) {
  std::vector<double> wealth;
  double w = 1.0;
  for (const MonthForecast& mf : fx.months) {
    w *= 1.0 + mf.benchmark;
    wealth.push_back(w);
  }
  return wealth;
}

}  // namespace

std::string render_report_json(const MatrixResult& matrix) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const SchemeRow& row : matrix.rows) {
    nlohmann::ordered_json entry{{"name", row.name},
                                 {"months", row.curve.months.size()}};
    entry["report"] = row.has_report ? report_json(row.report) : nlohmann::ordered_json(nullptr);
    entry["quality"] =
        row.has_quality ? quality_json(row.quality) : nlohmann::ordered_json(nullptr);
    if (!row.curve.wealth.empty()) entry["final_wealth"] = row.curve.wealth.back();
    rows.push_back(std::move(entry));
  }
  nlohmann::ordered_json doc{{"test_months", matrix.forecasts.months.size()},
                             {"models", matrix.forecasts.model_names},
                             {"rows", rows}};
  return doc.dump(2) + "\n";
}

std::string render_equity_csv(const SchemeRow& row) {
  std::string out = "month,gross_return,net_return,benchmark_return,turnover,wealth,shortfall\n";
  const EquityCurve& c = row.curve;
  for (std::size_t k = 0; k < c.months.size(); ++k) {
    out += c.months[k].str();
    out += ',' + format_number(c.gross_return[k]);
    out += ',' + format_number(c.net_return[k]);
    out += ',' + format_number(c.benchmark_return[k]);
    out += ',' + format_number(c.turnover[k]);
    out += ',' + format_number(c.wealth[k]);
    out += ',';
    out += c.shortfall[k] ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string render_weights_csv(const SchemeRow& row, const std::vector<std::string>& models) {
  std::string out = "month";
  for (const std::string& m : models) out += ",w_" + m;
  for (const std::string& m : models) out += ",score_" + m;
  out += ",warm_up,degenerate\n";
  for (const WeightVector& wv : row.weights) {
    out += wv.month.str();
    for (std::size_t i = 0; i < models.size(); ++i)
      out += ',' + format_number(i < wv.w.size() ? wv.w[i] : 0.0);
    for (std::size_t i = 0; i < models.size(); ++i) {
      out += ',';
      out += i < wv.scores.size() ? format_number(wv.scores[i]) : "nan";
    }
    out += ',';
    out += wv.warm_up ? '1' : '0';
    out += ',';
    out += wv.degenerate ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string render_ic_series_csv(const ForecastSet& fx) {
  std::string out = "month";
  for (const std::string& m : fx.model_names) out += ',' + m;
  out += '\n';
  for (std::size_t k = 0; k < fx.months.size(); ++k) {
    out += fx.months[k].month.str();
    for (std::size_t m = 0; m < fx.model_names.size(); ++m)
      out += ',' + format_number(fx.quality[m][k].ic);
    out += '\n';
  }
  return out;
}

std::string render_metric_series_csv(const ForecastSet& fx) {
  std::string out = "month,model,rmse,mape,precision,recall,f1,ic\n";
  for (std::size_t k = 0; k < fx.months.size(); ++k) {
    for (std::size_t m = 0; m < fx.model_names.size(); ++m) {
      const ModelMonthQuality& q = fx.quality[m][k];
      out += fx.months[k].month.str();
      out += ',' + fx.model_names[m];
      out += ',' + format_number(q.rmse);
      out += ',' + format_number(q.mape);
      out += ',' + format_number(q.precision);
      out += ',' + format_number(q.recall);
      out += ',' + format_number(q.f1);
      out += ',' + format_number(q.ic);
      out += '\n';
    }
  }
  return out;
}

std::string render_cumulative_ic_csv(const ForecastSet& fx) {
  std::string out = "month";
  for (const std::string& m : fx.model_names) out += ',' + m;
  out += '\n';
  std::vector<double> running(fx.model_names.size(), 0.0);
  for (std::size_t k = 0; k < fx.months.size(); ++k) {
    out += fx.months[k].month.str();
    for (std::size_t m = 0; m < fx.model_names.size(); ++m) {
      running[m] += fx.quality[m][k].ic;
      out += ',' + format_number(running[m]);
    }
    out += '\n';
  }
  return out;
}

std::string render_equity_plot_csv(const MatrixResult& matrix) {
  std::string out = "month";
  for (const SchemeRow& row : matrix.rows) out += ',' + row.name;
  out += ",benchmark_index\n";
  const std::vector<double> index = benchmark_wealth(matrix.forecasts);
  for (std::size_t k = 0; k < matrix.forecasts.months.size(); ++k) {
    out += matrix.forecasts.months[k].month.str();
    for (const SchemeRow& row : matrix.rows)
      out += ',' + format_number(k < row.curve.wealth.size() ? row.curve.wealth[k] : 1.0);
    out += ',' + format_number(index[k]);
    out += '\n';
  }
  return out;
}

namespace {

const char* kPalette[] = {"#1f6fb2", "#d1495b", "#2e8540", "#8e5ba6", "#c77d1f",
                          "#13808b", "#a03d68", "#556b2f", "#3f51b5", "#b35340"};

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string render_equity_svg(const MatrixResult& matrix) {
  const std::size_t n = matrix.forecasts.months.size();
  const std::vector<double> index = benchmark_wealth(matrix.forecasts);

  double lo = 1.0;
  double hi = 1.0;
  auto stretch = [&](const std::vector<double>& series) {
    for (double v : series) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  for (const SchemeRow& row : matrix.rows) stretch(row.curve.wealth);
  stretch(index);
  if (hi <= lo) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double width = 960.0;
  const double height = 540.0;
  const double ml = 70.0, mr = 20.0, mt = 20.0, mb = 50.0;
  const double pw = width - ml - mr;
  const double ph = height - mt - mb;
  auto x_at = [&](std::size_t k) {
    return ml + (n > 1 ? pw * static_cast<double>(k) / static_cast<double>(n - 1) : pw / 2);
  };
  auto y_at = [&](double v) { return mt + ph * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << " " << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  for (int g = 0; g <= 4; ++g) {
    const double v = lo + (hi - lo) * g / 4.0;
    const double y = y_at(v);
    svg << "<line x1=\"" << coord(ml) << "\" y1=\"" << coord(y) << "\" x2=\"" << coord(ml + pw)
        << "\" y2=\"" << coord(y) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << coord(ml - 8) << "\" y=\"" << coord(y + 4)
        << "\" text-anchor=\"end\">" << coord(v) << "</text>\n";
  }
  if (n > 0) {
    svg << "<text x=\"" << coord(ml) << "\" y=\"" << coord(height - mb + 20)
        << "\">" << matrix.forecasts.months.front().month.str() << "</text>\n";
    svg << "<text x=\"" << coord(ml + pw) << "\" y=\"" << coord(height - mb + 20)
        << "\" text-anchor=\"end\">" << matrix.forecasts.months.back().month.str()
        << "</text>\n";
  }

  auto polyline = [&](const std::vector<double>& series, const std::string& stroke, bool dashed) {
    svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\"";
    if (dashed) svg << " stroke-dasharray=\"6 4\"";
    svg << " points=\"";
    for (std::size_t k = 0; k < series.size(); ++k) {
      if (k > 0) svg << ' ';
      svg << coord(x_at(k)) << ',' << coord(y_at(series[k]));
    }
    svg << "\"/>\n";
  };

  std::size_t color = 0;
  double legend_y = mt + 16.0;
  for (const SchemeRow& row : matrix.rows) {
    const std::string stroke = kPalette[color % (sizeof(kPalette) / sizeof(kPalette[0]))];
    ++color;
    polyline(row.curve.wealth, stroke, false);
    svg << "<line x1=\"" << coord(ml + 10) << "\" y1=\"" << coord(legend_y - 4) << "\" x2=\""
        << coord(ml + 34) << "\" y2=\"" << coord(legend_y - 4) << "\" stroke=\"" << stroke
        << "\" stroke-width=\"3\"/>\n";
    svg << "<text x=\"" << coord(ml + 40) << "\" y=\"" << coord(legend_y) << "\">" << row.name
        << "</text>\n";
    legend_y += 16.0;
  }
  polyline(index, "#444444", true);
  svg << "<line x1=\"" << coord(ml + 10) << "\" y1=\"" << coord(legend_y - 4) << "\" x2=\""
      << coord(ml + 34) << "\" y2=\"" << coord(legend_y - 4)
      << "\" stroke=\"#444444\" stroke-width=\"3\" stroke-dasharray=\"6 4\"/>\n";
  svg << "<text x=\"" << coord(ml + 40) << "\" y=\"" << coord(legend_y)
      << "\">benchmark_index</text>\n";

  svg << "</svg>\n";
  return svg.str();
}

std::string render_synthesis_csv(const EntropyWeightSeries& weights) {
  std::string out = "group,member,mean_weight\n";
  const std::map<std::string, std::vector<double>> means = weights.mean_weights();
  for (const std::string& group : weights.hierarchy.groups) {
    const std::vector<std::string>& members = weights.hierarchy.members.at(group);
    const std::vector<double>& w = means.at(group);
    for (std::size_t j = 0; j < members.size(); ++j) {
      out += group;
      out += ',' + members[j];
      out += ',' + format_number(w[j]);
      out += '\n';
    }
  }
  return out;
}

std::string render_screen_json(const ScreenResult& screen) {
  nlohmann::ordered_json cv = nlohmann::ordered_json::array();
  for (const auto& [lambda, score] : screen.cv_curve)
    cv.push_back({{"lambda", lambda}, {"cv_mse", score}});
  nlohmann::ordered_json coef = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < screen.candidates.size() && i < screen.fit.beta.size(); ++i)
    coef[screen.candidates[i]] = screen.fit.beta[i];
  nlohmann::ordered_json doc{{"candidates", screen.candidates},
                             {"kept", screen.kept},
                             {"excluded", screen.excluded},
                             {"lambda", screen.lambda_selected},
                             {"coefficients", coef},
                             {"cv_curve", cv}};
  return doc.dump(2) + "\n";
}

}  // namespace ealpha
