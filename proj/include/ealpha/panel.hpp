#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ealpha/month.hpp"

namespace ealpha {

/// Missing cells are carried as quiet NaN; nothing else in a panel may be NaN.
inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

struct StockFlags {
  bool is_st = false;
  bool is_suspended = false;
  bool is_new_listing = false;

  bool any() const { return is_st || is_suspended || is_new_listing; }
  bool operator==(const StockFlags&) const = default;
};

enum class PanelField {
  factor_value,
  next_return,
  market_cap,
  industry,
  flags,
  benchmark_return,
};

/// Test hook: panels report every cell read to an installed observer.
/// The backtest look-ahead harness uses this to prove the rolling engine
/// never reads data from the future.
class PanelAccessObserver {
 public:
  virtual ~PanelAccessObserver() = default;
  virtual void on_access(PanelField field, int month_index) const = 0;
};

/// Dense stock x month x factor panel. Immutable once built (all mutation
/// happens during construction); safe for concurrent reads.
class FactorPanel {
 public:
  FactorPanel() = default;
  FactorPanel(std::vector<std::string> stocks, std::vector<MonthIndex> months,
              std::vector<std::string> factor_names);

  int n_stocks() const { return static_cast<int>(stocks_.size()); }
  int n_months() const { return static_cast<int>(months_.size()); }
  int n_factors() const { return static_cast<int>(factor_names_.size()); }

  const std::vector<std::string>& stocks() const { return stocks_; }
  const std::vector<MonthIndex>& months() const { return months_; }
  const std::vector<std::string>& factor_names() const { return factor_names_; }

  /// Position lookups; -1 when absent.
  int month_pos(MonthIndex m) const;
  int factor_pos(const std::string& name) const;
  int stock_pos(const std::string& code) const;

  double value(int m, int s, int f) const {
    touch(PanelField::factor_value, m);
    return values_[cell(m, s, f)];
  }
  double next_return(int m, int s) const {
    touch(PanelField::next_return, m);
    return next_return_[pair(m, s)];
  }
  double market_cap(int m, int s) const {
    touch(PanelField::market_cap, m);
    return market_cap_[pair(m, s)];
  }
  const std::string& industry(int m, int s) const {
    touch(PanelField::industry, m);
    return industry_[pair(m, s)];
  }
  StockFlags flags(int m, int s) const {
    touch(PanelField::flags, m);
    return flags_[pair(m, s)];
  }
  double benchmark_return(int m) const {
    touch(PanelField::benchmark_return, m);
    return benchmark_return_[static_cast<std::size_t>(m)];
  }

  void set_value(int m, int s, int f, double v) { values_[cell(m, s, f)] = v; }
  void set_next_return(int m, int s, double v) { next_return_[pair(m, s)] = v; }
  void set_market_cap(int m, int s, double v) { market_cap_[pair(m, s)] = v; }
  void set_industry(int m, int s, std::string v) { industry_[pair(m, s)] = std::move(v); }
  void set_flags(int m, int s, StockFlags v) { flags_[pair(m, s)] = v; }
  void set_benchmark_return(int m, double v) { benchmark_return_[static_cast<std::size_t>(m)] = v; }

  void set_access_observer(const PanelAccessObserver* obs) const { observer_ = obs; }

  /// Checks structural invariants (contiguous months, sorted unique stocks,
  /// positive market caps, no NaN outside factor/next-return cells).
  void validate() const;

  bool operator==(const FactorPanel& other) const;

 private:
  std::size_t cell(int m, int s, int f) const {
    return (static_cast<std::size_t>(m) * stocks_.size() + static_cast<std::size_t>(s)) *
               factor_names_.size() +
           static_cast<std::size_t>(f);
  }
  std::size_t pair(int m, int s) const {
    return static_cast<std::size_t>(m) * stocks_.size() + static_cast<std::size_t>(s);
  }
  void touch(PanelField field, int m) const {
    if (observer_ != nullptr) observer_->on_access(field, m);
  }

  std::vector<std::string> stocks_;
  std::vector<MonthIndex> months_;
  std::vector<std::string> factor_names_;
  std::vector<double> values_;
  std::vector<double> next_return_;
  std::vector<double> market_cap_;
  std::vector<std::string> industry_;
  std::vector<StockFlags> flags_;
  std::vector<double> benchmark_return_;
  mutable const PanelAccessObserver* observer_ = nullptr;
};

/// Per-month eligibility: true iff none of the exclusion flags is set.
struct UniverseMask {
  MonthIndex month;
  std::vector<std::uint8_t> eligible;

  int count() const;
};

UniverseMask filter_universe(const FactorPanel& panel, MonthIndex month);

/// Maps canonical column roles to the column names used in a file.
struct PanelSchema {
  std::map<std::string, std::string> columns;

  static PanelSchema defaults();
  const std::string& col(const std::string& canonical) const;
};

FactorPanel load_panel(const std::string& path, const PanelSchema& schema = PanelSchema::defaults());
void write_panel(const FactorPanel& panel, const std::string& path,
                 const PanelSchema& schema = PanelSchema::defaults());

/// One additive term of the planted return signal. `absolute` plants a
/// non-monotone |x| dependence that a linear model cannot express.
struct SignalTerm {
  std::string factor;
  double coef = 0.0;
  bool absolute = false;
};

struct SyntheticSpec {
  int n_stocks = 100;
  int n_months = 48;
  int n_factors = 16;
  int n_industries = 5;
  MonthIndex start{2015, 1};
  std::vector<SignalTerm> signal;       // active from month 0
  std::vector<SignalTerm> signal_late;  // replaces `signal` from switch_month on
  int switch_month = -1;                // 0-based; -1 disables the switch
  double noise = 0.02;
  double flag_prob = 0.0;
  std::uint64_t seed = 0;
};

/// Seed-deterministic synthetic panel: factors are iid N(0,1) draws,
/// next_return is the planted signal plus Gaussian noise, benchmark is the
/// cross-sectional mean return. Identical spec => bit-identical panel.
FactorPanel generate_synthetic_panel(const SyntheticSpec& spec);

}  // namespace ealpha
