#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ealpha/backtest.hpp"
#include "ealpha/config.hpp"
#include "ealpha/errors.hpp"
#include "ealpha/outputs.hpp"
#include "ealpha/panel.hpp"

namespace {

using namespace ealpha;

struct FlagSet {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  std::string schemes;
  int top_n = 0;
  double cost_rate = 0.0;
  bool compare_screening = false;
};

struct Attached {
  CLI::Option* seed = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* schemes = nullptr;
  CLI::Option* top_n = nullptr;
  CLI::Option* cost_rate = nullptr;
};

Attached attach_flags(CLI::App* cmd, FlagSet& f) {
  Attached a;
  cmd->add_option("--config", f.config_path, "configuration file path");
  a.seed = cmd->add_option("--seed", f.seed, "override the global seed");
  a.out = cmd->add_option("--out", f.out, "override the output directory");
  a.schemes = cmd->add_option("--schemes", f.schemes, "comma list of comparison rows");
  a.top_n = cmd->add_option("--top-n", f.top_n, "portfolio size");
  a.cost_rate = cmd->add_option("--cost-rate", f.cost_rate, "transaction cost rate");
  return a;
}

std::vector<std::string> parse_row_list(const std::string& raw) {
  std::vector<std::string> rows;
  std::string item;
  std::stringstream ss(raw);
  while (std::getline(ss, item, ',')) {
    const std::size_t b = item.find_first_not_of(" \t");
    const std::size_t e = item.find_last_not_of(" \t");
    if (b == std::string::npos) fail(ErrorCode::config, "empty entry in --schemes");
    rows.push_back(item.substr(b, e - b + 1));
  }
  if (rows.empty()) fail(ErrorCode::config, "--schemes names no rows");
  const std::vector<std::string> known = default_row_names();
  for (const std::string& row : rows)
    if (std::find(known.begin(), known.end(), row) == known.end())
      fail(ErrorCode::config, "unknown scheme '" + row + "' in --schemes");
  return rows;
}

RunConfig resolve_config(const FlagSet& f, const Attached& a) {
  RunConfig rc = f.config_path.empty() ? RunConfig{} : load_run_config(f.config_path);
  if (a.seed->count() > 0) {
    rc.seed = f.seed;
    rc.synth.seed = f.seed;
    rc.backtest.seed = f.seed;
    rc.backtest.screen.seed = f.seed;
  }
  if (a.out->count() > 0) rc.output_dir = f.out;
  if (a.schemes->count() > 0) rc.rows = parse_row_list(f.schemes);
  if (a.top_n->count() > 0) rc.backtest.top_n = f.top_n;
  if (a.cost_rate->count() > 0) rc.backtest.cost_rate = f.cost_rate;
  return rc;
}

std::string describe_signal(const std::vector<SignalTerm>& terms) {
  if (terms.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i > 0) out += ", ";
    if (terms[i].absolute)
      out += "abs(" + terms[i].factor + ")";
    else
      out += terms[i].factor;
    out += ':' + format_number(terms[i].coef);
  }
  return out;
}

int cmd_synth(const RunConfig& rc) {
  const FactorPanel panel = generate_synthetic_panel(rc.synth);
  OutputWriter w(rc.output_dir);
  const std::string path = w.dir() + "/panel.csv";
  try {
    write_panel(panel, path);
    w.adopt("panel.csv");
    w.write_manifest();
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(path, ec);
    w.remove_written();
    throw;
  }
  std::cout << "panel: " << path << "\n";
  std::cout << "stocks: " << rc.synth.n_stocks << "  months: " << rc.synth.n_months
            << "  factors: " << rc.synth.n_factors << "\n";
  std::cout << "seed: " << rc.synth.seed << "\n";
  std::cout << "signal: " << describe_signal(rc.synth.signal) << "\n";
  if (!rc.synth.signal_late.empty())
    std::cout << "signal from month " << rc.synth.switch_month << ": "
              << describe_signal(rc.synth.signal_late) << "\n";
  return 0;
}

int cmd_screen(const RunConfig& rc) {
  if (rc.panel_path.empty())
    fail(ErrorCode::config, "screening needs a panel path ([data] panel = ...)");
  const FactorPanel raw = load_panel(rc.panel_path);
  const FactorPanel clean = preprocess_panel(raw, rc.preprocess);
  const ScreenResult screen = screen_factors(clean, rc.backtest.screen);
  OutputWriter w(rc.output_dir);
  try {
    w.write("screen.json", render_screen_json(screen));
    w.write_manifest();
  } catch (...) {
    w.remove_written();
    throw;
  }
  std::cout << "kept " << screen.kept.size() << " of " << screen.candidates.size()
            << " factors at lambda " << format_number(screen.lambda_selected) << "\n";
  for (const std::string& name : screen.kept) std::cout << "  " << name << "\n";
  return 0;
}

void print_report_table(const nlohmann::json& doc) {
  std::printf("%-12s %8s %10s %10s %8s %8s %8s\n", "row", "months", "return", "annual",
              "sharpe", "max_dd", "ic_mean");
  for (const auto& row : doc.at("rows")) {
    const std::string name = row.at("name").get<std::string>();
    const std::size_t months = row.at("months").get<std::size_t>();
    char ret[16] = "-", ann[16] = "-", sharpe[16] = "-", dd[16] = "-", ic[16] = "-";
    if (row.at("report").is_object()) {
      const auto& rep = row.at("report");
      std::snprintf(ret, sizeof(ret), "%.4f", rep.at("strategy_return").get<double>());
      std::snprintf(ann, sizeof(ann), "%.4f", rep.at("annualized_return").get<double>());
      std::snprintf(sharpe, sizeof(sharpe), "%.4f", rep.at("sharpe").get<double>());
      std::snprintf(dd, sizeof(dd), "%.4f", rep.at("max_drawdown").get<double>());
    }
    if (row.at("quality").is_object())
      std::snprintf(ic, sizeof(ic), "%.4f", row.at("quality").at("ic_mean").get<double>());
    std::printf("%-12s %8zu %10s %10s %8s %8s %8s\n", name.c_str(), months, ret, ann, sharpe,
                dd, ic);
  }
}

int cmd_backtest(const RunConfig& rc, bool compare_screening) {
  if (rc.panel_path.empty())
    fail(ErrorCode::config, "backtest needs a panel path ([data] panel = ...)");
  if (rc.hierarchy.groups.empty())
    fail(ErrorCode::config, "backtest needs a [hierarchy] section");
  const FactorPanel raw = load_panel(rc.panel_path);
  const PipelineResult result =
      run_pipeline(raw, rc.hierarchy, rc.preprocess, rc.backtest, rc.rows);

  std::string comparison_csv;
  if (compare_screening) {
    BacktestConfig screened = rc.backtest;
    screened.use_screened_factors = !rc.backtest.use_screened_factors;
    const PipelineResult other =
        run_pipeline(raw, rc.hierarchy, rc.preprocess, screened, rc.rows);
    const MatrixResult& before =
        rc.backtest.use_screened_factors ? other.matrix : result.matrix;
    const MatrixResult& after =
        rc.backtest.use_screened_factors ? result.matrix : other.matrix;
    comparison_csv = "row,unscreened_return,screened_return\n";
    for (std::size_t i = 0; i < before.rows.size(); ++i) {
      comparison_csv += before.rows[i].name;
      comparison_csv += ',';
      comparison_csv += before.rows[i].has_report
                            ? format_number(before.rows[i].report.strategy_return)
                            : "nan";
      comparison_csv += ',';
      comparison_csv += after.rows[i].has_report
                            ? format_number(after.rows[i].report.strategy_return)
                            : "nan";
      comparison_csv += '\n';
    }
  }

  const std::string report = render_report_json(result.matrix);
  OutputWriter w(rc.output_dir);
  try {
    w.write("report.json", report);
    for (const SchemeRow& row : result.matrix.rows) {
      w.write("equity_" + row.name + ".csv", render_equity_csv(row));
      if (!row.weights.empty())
        w.write("weights_" + row.name + ".csv",
                render_weights_csv(row, result.matrix.forecasts.model_names));
    }
    w.write("ic_series.csv", render_ic_series_csv(result.matrix.forecasts));
    w.write("metric_series.csv", render_metric_series_csv(result.matrix.forecasts));
    w.write("cumulative_ic.csv", render_cumulative_ic_csv(result.matrix.forecasts));
    w.write("equity_plot.csv", render_equity_plot_csv(result.matrix));
    w.write("equity.svg", render_equity_svg(result.matrix));
    w.write("synthesis_weights.csv", render_synthesis_csv(result.synthesis));
    if (!comparison_csv.empty()) w.write("screening_comparison.csv", comparison_csv);
    w.write_manifest();
  } catch (...) {
    w.remove_written();
    throw;
  }
  print_report_table(nlohmann::json::parse(report));
  if (!comparison_csv.empty()) std::cout << "\n" << comparison_csv;
  return 0;
}

int cmd_report(const RunConfig& rc) {
  const std::string path = rc.output_dir + "/report.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "' (run a backtest first)");
  nlohmann::json doc;
  try {
    in >> doc;
    print_report_table(doc);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, "malformed report file '" + path + "': " + e.what());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"walk-forward stock selection research pipeline"};
  app.require_subcommand(1);

  FlagSet f;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic factor panel");
  const Attached synth_flags = attach_flags(synth, f);
  CLI::App* screen = app.add_subcommand("screen", "penalized factor screening on a panel");
  const Attached screen_flags = attach_flags(screen, f);
  CLI::App* backtest = app.add_subcommand("backtest", "run the walk-forward comparison");
  const Attached backtest_flags = attach_flags(backtest, f);
  backtest->add_flag("--compare-screening", f.compare_screening,
                     "rerun with factor screening toggled and tabulate both");
  CLI::App* report = app.add_subcommand("report", "print the table from a finished run");
  const Attached report_flags = attach_flags(report, f);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(resolve_config(f, synth_flags));
    if (screen->parsed()) return cmd_screen(resolve_config(f, screen_flags));
    if (backtest->parsed())
      return cmd_backtest(resolve_config(f, backtest_flags), f.compare_screening);
    if (report->parsed()) return cmd_report(resolve_config(f, report_flags));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
