#include "ealpha/config.hpp"

#include <algorithm>
#include <cctype>
#include <climits>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ealpha/errors.hpp"

namespace ealpha {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail_line(int line, const std::string& msg) {
  fail(ErrorCode::parse, "line " + std::to_string(line) + ": " + msg);
}

double parse_real(const std::string& key, const std::string& raw) {
  const char* begin = raw.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + raw.size() || raw.empty())
    fail(ErrorCode::parse, "key '" + key + "': '" + raw + "' is not a number");
  return v;
}

long long parse_ll(const std::string& key, const std::string& raw) {
  const char* begin = raw.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(begin, &end, 10);
  if (end != begin + raw.size() || raw.empty())
    fail(ErrorCode::parse, "key '" + key + "': '" + raw + "' is not an integer");
  return v;
}

int parse_int(const std::string& key, const std::string& raw) {
  const long long v = parse_ll(key, raw);
  if (v < INT_MIN || v > INT_MAX)
    fail(ErrorCode::parse, "key '" + key + "': '" + raw + "' does not fit an int");
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  if (raw.empty() || raw[0] == '-')
    fail(ErrorCode::parse, "key '" + key + "': '" + raw + "' is not a non-negative integer");
  const char* begin = raw.c_str();
  char* end = nullptr;
  const unsigned long long v = std::strtoull(begin, &end, 10);
  if (end != begin + raw.size())
    fail(ErrorCode::parse, "key '" + key + "': '" + raw + "' is not a non-negative integer");
  return v;
}

bool parse_flag(const std::string& key, const std::string& raw) {
  if (raw == "true") return true;
  if (raw == "false") return false;
  fail(ErrorCode::parse, "key '" + key + "': expected true or false, got '" + raw + "'");
}

std::vector<std::string> split_list(const std::string& key, const std::string& raw) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(raw);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail(ErrorCode::parse, "key '" + key + "': empty list element");
    out.push_back(item);
  }
  if (out.empty()) fail(ErrorCode::parse, "key '" + key + "': empty list");
  return out;
}

std::vector<double> parse_real_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  for (const std::string& item : split_list(key, raw)) out.push_back(parse_real(key, item));
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& raw) {
  std::vector<int> out;
  for (const std::string& item : split_list(key, raw)) out.push_back(parse_int(key, item));
  return out;
}

/// name:coef terms, comma separated; abs(name):coef marks an absolute term.
std::vector<SignalTerm> parse_signal(const std::string& key, const std::string& raw) {
  std::vector<SignalTerm> out;
  for (const std::string& item : split_list(key, raw)) {
    const std::size_t colon = item.rfind(':');
    if (colon == std::string::npos)
      fail(ErrorCode::parse, "key '" + key + "': term '" + item + "' is not name:coefficient");
    SignalTerm term;
    std::string name = trim(item.substr(0, colon));
    if (name.size() > 5 && name.rfind("abs(", 0) == 0 && name.back() == ')') {
      term.absolute = true;
      name = trim(name.substr(4, name.size() - 5));
    }
    if (name.empty())
      fail(ErrorCode::parse, "key '" + key + "': term '" + item + "' names no factor");
    term.factor = name;
    term.coef = parse_real(key, trim(item.substr(colon + 1)));
    out.push_back(term);
  }
  return out;
}

void apply_root(const ConfigSection& sec, RunConfig& rc) {
  for (const auto& [key, value] : sec.entries) {
    if (key == "seed")
      rc.seed = parse_u64(key, value);
    else
      fail(ErrorCode::config, "unknown key '" + key + "' outside any section");
  }
}

void apply_data(const ConfigSection& sec, RunConfig& rc) {
  for (const auto& [key, value] : sec.entries) {
    if (key == "panel")
      rc.panel_path = value;
    else if (key == "stocks")
      rc.synth.n_stocks = parse_int(key, value);
    else if (key == "months")
      rc.synth.n_months = parse_int(key, value);
    else if (key == "factors")
      rc.synth.n_factors = parse_int(key, value);
    else if (key == "industries")
      rc.synth.n_industries = parse_int(key, value);
    else if (key == "start")
      rc.synth.start = MonthIndex::parse(value);
    else if (key == "signal")
      rc.synth.signal = parse_signal(key, value);
    else if (key == "signal_late")
      rc.synth.signal_late = parse_signal(key, value);
    else if (key == "switch_month")
      rc.synth.switch_month = parse_int(key, value);
    else if (key == "noise")
      rc.synth.noise = parse_real(key, value);
    else if (key == "flag_prob")
      rc.synth.flag_prob = parse_real(key, value);
    else
      fail(ErrorCode::config, "unknown key '" + key + "' in [data]");
  }
}

void apply_preprocess(const ConfigSection& sec, RunConfig& rc) {
  for (const auto& [key, value] : sec.entries) {
    if (key == "mad_k")
      rc.preprocess.mad_k = parse_real(key, value);
    else if (key == "neutralize_size")
      rc.preprocess.neutralize_size = parse_flag(key, value);
    else if (key == "size_factors")
      rc.preprocess.size_factor_names = split_list(key, value);
    else
      fail(ErrorCode::config, "unknown key '" + key + "' in [preprocess]");
  }
}

void apply_hierarchy(const ConfigSection& sec, RunConfig& rc) {
  for (const auto& [key, value] : sec.entries) {
    rc.hierarchy.groups.push_back(key);
    rc.hierarchy.members[key] = split_list(key, value);
  }
}

void apply_screening(const ConfigSection& sec, RunConfig& rc) {
  for (const auto& [key, value] : sec.entries) {
    if (key == "k_folds")
      rc.backtest.screen.k_folds = parse_int(key, value);
    else if (key == "grid") {
      if (value != "auto") rc.backtest.screen.grid = parse_real_list(key, value);
    } else
      fail(ErrorCode::config, "unknown key '" + key + "' in [screening]");
  }
}

void apply_predictors(const ConfigSection& sec, RunConfig& rc) {
  TrainConfig& models = rc.backtest.models;
  for (const auto& [key, value] : sec.entries) {
    if (key == "ridge_grid") {
      if (value != "default") models.ridge.penalty_grid = parse_real_list(key, value);
    } else if (key == "mlp_hidden")
      models.mlp.hidden = parse_int_list(key, value);
    else if (key == "mlp_learning_rate")
      models.mlp.learning_rate = parse_real(key, value);
    else if (key == "mlp_epochs")
      models.mlp.epochs = parse_int(key, value);
    else if (key == "mlp_batch")
      models.mlp.batch = parse_int(key, value);
    else if (key == "mlp_activation") {
      if (value != "tanh" && value != "relu")
        fail(ErrorCode::config, "mlp_activation must be tanh or relu, got '" + value + "'");
      models.mlp.activation = value;
    } else if (key == "forest_trees")
      models.forest.n_trees = parse_int(key, value);
    else if (key == "forest_depth")
      models.forest.max_depth = parse_int(key, value);
    else if (key == "forest_min_leaf")
      models.forest.min_leaf = parse_int(key, value);
    else if (key == "forest_mtry")
      models.forest.features_per_split = parse_int(key, value);
    else
      fail(ErrorCode::config, "unknown key '" + key + "' in [predictors]");
  }
}

void apply_ensemble(const ConfigSection& sec, RunConfig& rc) {
  for (const auto& [key, value] : sec.entries) {
    if (key == "metric_window")
      rc.backtest.metric_window = parse_int(key, value);
    else if (key == "ic_window")
      rc.backtest.ic_window = parse_int(key, value);
    else if (key == "equal_weight_fallback")
      rc.backtest.equal_weight_fallback = parse_flag(key, value);
    else
      fail(ErrorCode::config, "unknown key '" + key + "' in [ensemble]");
  }
}

void apply_backtest(const ConfigSection& sec, RunConfig& rc) {
  for (const auto& [key, value] : sec.entries) {
    if (key == "train_window")
      rc.backtest.train_window = parse_int(key, value);
    else if (key == "test_window")
      rc.backtest.test_window = parse_int(key, value);
    else if (key == "cost_rate")
      rc.backtest.cost_rate = parse_real(key, value);
    else if (key == "cost_mode") {
      if (value == "total")
        rc.backtest.cost_mode = CostMode::total;
      else if (value == "two_sided")
        rc.backtest.cost_mode = CostMode::two_sided;
      else
        fail(ErrorCode::config, "cost_mode must be total or two_sided, got '" + value + "'");
    } else if (key == "top_n")
      rc.backtest.top_n = parse_int(key, value);
    else if (key == "periods_per_year")
      rc.backtest.periods_per_year = parse_int(key, value);
    else if (key == "use_screened_factors")
      rc.backtest.use_screened_factors = parse_flag(key, value);
    else if (key == "schemes") {
      rc.rows = split_list(key, value);
      const std::vector<std::string> known = default_row_names();
      for (const std::string& row : rc.rows)
        if (std::find(known.begin(), known.end(), row) == known.end())
          fail(ErrorCode::config, "unknown scheme '" + row + "' in schemes list");
    } else
      fail(ErrorCode::config, "unknown key '" + key + "' in [backtest]");
  }
}

void apply_output(const ConfigSection& sec, RunConfig& rc) {
  for (const auto& [key, value] : sec.entries) {
    if (key == "dir")
      rc.output_dir = value;
    else
      fail(ErrorCode::config, "unknown key '" + key + "' in [output]");
  }
}

}  // namespace

const std::string* ConfigSection::find(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

const ConfigSection* ConfigFile::find(const std::string& name) const {
  for (const ConfigSection& sec : sections)
    if (sec.name == name) return &sec;
  return nullptr;
}

ConfigFile parse_config_text(const std::string& text) {
  ConfigFile file;
  file.sections.push_back(ConfigSection{"", {}});
  ConfigSection* current = &file.sections.back();

  std::stringstream ss(text);
  std::string raw_line;
  int line_no = 0;
  while (std::getline(ss, raw_line)) {
    ++line_no;
    if (!raw_line.empty() && raw_line.back() == '\r') raw_line.pop_back();
    const std::string line = trim(raw_line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;

    if (line[0] == '[') {
      if (line.back() != ']') fail_line(line_no, "unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) fail_line(line_no, "empty section name");
      if (file.find(name) != nullptr) fail_line(line_no, "duplicate section [" + name + "]");
      file.sections.push_back(ConfigSection{name, {}});
      current = &file.sections.back();
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail_line(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail_line(line_no, "empty key");
    if (current->find(key) != nullptr)
      fail_line(line_no, "duplicate key '" + key + "' in section [" + current->name + "]");
    current->entries.emplace_back(key, value);
  }
  return file;
}

ConfigFile parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

namespace {

RunConfig resolve(const ConfigFile& file) {
  RunConfig rc;
  for (const ConfigSection& sec : file.sections) {
    if (sec.name == "")
      apply_root(sec, rc);
    else if (sec.name == "data")
      apply_data(sec, rc);
    else if (sec.name == "preprocess")
      apply_preprocess(sec, rc);
    else if (sec.name == "hierarchy")
      apply_hierarchy(sec, rc);
    else if (sec.name == "screening")
      apply_screening(sec, rc);
    else if (sec.name == "predictors")
      apply_predictors(sec, rc);
    else if (sec.name == "ensemble")
      apply_ensemble(sec, rc);
    else if (sec.name == "backtest")
      apply_backtest(sec, rc);
    else if (sec.name == "output")
      apply_output(sec, rc);
    else
      fail(ErrorCode::config, "unknown section [" + sec.name + "]");
  }
  rc.synth.seed = rc.seed;
  rc.backtest.seed = rc.seed;
  rc.backtest.screen.seed = rc.seed;
  return rc;
}

}  // namespace

RunConfig run_config_from_text(const std::string& text) {
  return resolve(parse_config_text(text));
}

RunConfig load_run_config(const std::string& path) { return resolve(parse_config_file(path)); }

}  // namespace ealpha
