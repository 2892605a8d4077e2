#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ealpha/backtest.hpp"
#include "ealpha/factors.hpp"
#include "ealpha/panel.hpp"
#include "ealpha/preprocess.hpp"
#include "ealpha/screening.hpp"

namespace ealpha {

/// Raw sectioned key-value file, entries in file order. Keys before the
/// first [section] header land in the "" section. Duplicate sections and
/// duplicate keys within a section are rejected.
struct ConfigSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* find(const std::string& key) const;
};

struct ConfigFile {
  std::vector<ConfigSection> sections;

  const ConfigSection* find(const std::string& name) const;
};

ConfigFile parse_config_text(const std::string& text);
ConfigFile parse_config_file(const std::string& path);

/// Everything one run needs, resolved from a config file with defaults for
/// absent keys. Flags applied by the front end win over file values.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::string panel_path;  // empty when the run generates its own panel
  SyntheticSpec synth;
  PreprocessConfig preprocess;
  FactorHierarchy hierarchy;
  BacktestConfig backtest;  // carries TrainConfig, screening toggle, windows
  std::vector<std::string> rows;  // empty: the full comparison table
};

RunConfig run_config_from_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace ealpha
