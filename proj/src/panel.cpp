#include "ealpha/panel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ealpha/errors.hpp"
#include "ealpha/rng.hpp"

namespace ealpha {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double_cell(const std::string& cell, const std::string& column, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0') {
    fail(ErrorCode::parse,
         "line " + std::to_string(line_no) + ": cannot parse '" + cell + "' in column '" + column + "'");
  }
  return v;
}

bool parse_flag_cell(const std::string& cell, const std::string& column, std::size_t line_no) {
  if (cell == "0" || cell == "false") return false;
  if (cell == "1" || cell == "true") return true;
  fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": flag column '" + column +
                             "' must be 0/1/true/false, got '" + cell + "'");
}

}  // namespace

FactorPanel::FactorPanel(std::vector<std::string> stocks, std::vector<MonthIndex> months,
                         std::vector<std::string> factor_names)
    : stocks_(std::move(stocks)), months_(std::move(months)), factor_names_(std::move(factor_names)) {
  const std::size_t pairs = stocks_.size() * months_.size();
  values_.assign(pairs * factor_names_.size(), missing_value());
  next_return_.assign(pairs, missing_value());
  market_cap_.assign(pairs, missing_value());
  industry_.assign(pairs, std::string());
  flags_.assign(pairs, StockFlags{});
  benchmark_return_.assign(months_.size(), missing_value());
}

int FactorPanel::month_pos(MonthIndex m) const {
  if (months_.empty()) return -1;
  const int offset = m.serial() - months_.front().serial();
  if (offset < 0 || offset >= n_months()) return -1;
  return offset;
}

int FactorPanel::factor_pos(const std::string& name) const {
  const auto it = std::find(factor_names_.begin(), factor_names_.end(), name);
  return it == factor_names_.end() ? -1 : static_cast<int>(it - factor_names_.begin());
}

int FactorPanel::stock_pos(const std::string& code) const {
  const auto it = std::lower_bound(stocks_.begin(), stocks_.end(), code);
  if (it == stocks_.end() || *it != code) return -1;
  return static_cast<int>(it - stocks_.begin());
}

void FactorPanel::validate() const {
  if (stocks_.empty() || months_.empty()) fail(ErrorCode::structural, "panel has no stocks or months");
  for (std::size_t i = 1; i < stocks_.size(); ++i) {
    if (!(stocks_[i - 1] < stocks_[i]))
      fail(ErrorCode::structural, "stock codes not sorted and unique at '" + stocks_[i] + "'");
  }
  for (std::size_t i = 1; i < months_.size(); ++i) {
    if (months_[i].serial() != months_[i - 1].serial() + 1)
      fail(ErrorCode::structural, "months not contiguous at " + months_[i].str());
  }
  for (int m = 0; m < n_months(); ++m) {
    if (is_missing(benchmark_return_[static_cast<std::size_t>(m)]))
      fail(ErrorCode::structural, "missing benchmark return for " + months_[static_cast<std::size_t>(m)].str());
    for (int s = 0; s < n_stocks(); ++s) {
      const std::size_t p = pair(m, s);
      if (is_missing(market_cap_[p]) || market_cap_[p] <= 0.0)
        fail(ErrorCode::range, "market cap must be positive for " + stocks_[static_cast<std::size_t>(s)] +
                                   " at " + months_[static_cast<std::size_t>(m)].str());
      if (industry_[p].empty())
        fail(ErrorCode::structural, "missing industry for " + stocks_[static_cast<std::size_t>(s)] + " at " +
                                        months_[static_cast<std::size_t>(m)].str());
    }
  }
}

bool FactorPanel::operator==(const FactorPanel& other) const {
  auto same_doubles = [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const bool ma = is_missing(a[i]);
      const bool mb = is_missing(b[i]);
      if (ma != mb) return false;
      if (!ma && a[i] != b[i]) return false;
    }
    return true;
  };
  return stocks_ == other.stocks_ && months_ == other.months_ && factor_names_ == other.factor_names_ &&
         same_doubles(values_, other.values_) && same_doubles(next_return_, other.next_return_) &&
         same_doubles(market_cap_, other.market_cap_) && industry_ == other.industry_ &&
         flags_ == other.flags_ && same_doubles(benchmark_return_, other.benchmark_return_);
}

int UniverseMask::count() const {
  int n = 0;
  for (auto e : eligible) n += e != 0 ? 1 : 0;
  return n;
}

UniverseMask filter_universe(const FactorPanel& panel, MonthIndex month) {
  const int m = panel.month_pos(month);
  if (m < 0) fail(ErrorCode::range, "month " + month.str() + " not in panel");
  UniverseMask mask;
  mask.month = month;
  mask.eligible.resize(static_cast<std::size_t>(panel.n_stocks()));
  for (int s = 0; s < panel.n_stocks(); ++s) {
    mask.eligible[static_cast<std::size_t>(s)] = panel.flags(m, s).any() ? 0 : 1;
  }
  return mask;
}

PanelSchema PanelSchema::defaults() {
  PanelSchema s;
  for (const char* name : {"date", "ticker", "industry", "market_cap", "next_return", "is_st",
                           "is_suspended", "is_new_listing", "benchmark_return"}) {
    s.columns[name] = name;
  }
  return s;
}

const std::string& PanelSchema::col(const std::string& canonical) const {
  const auto it = columns.find(canonical);
  if (it == columns.end()) fail(ErrorCode::schema, "schema has no mapping for column role '" + canonical + "'");
  return it->second;
}

FactorPanel load_panel(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");

  std::string header_line;
  if (!std::getline(in, header_line)) fail(ErrorCode::schema, "'" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(header_line);

  auto col_index = [&](const std::string& canonical) {
    const std::string& name = schema.col(canonical);
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      fail(ErrorCode::schema, "'" + path + "' is missing required column '" + name + "'");
    return static_cast<int>(it - header.begin());
  };

  const int c_date = col_index("date");
  const int c_ticker = col_index("ticker");
  const int c_industry = col_index("industry");
  const int c_mcap = col_index("market_cap");
  const int c_ret = col_index("next_return");
  const int c_st = col_index("is_st");
  const int c_susp = col_index("is_suspended");
  const int c_new = col_index("is_new_listing");
  const int c_bench = col_index("benchmark_return");

  std::set<int> reserved{c_date, c_ticker, c_industry, c_mcap, c_ret, c_st, c_susp, c_new, c_bench};
  std::vector<std::string> factor_names;
  std::vector<int> factor_cols;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    if (reserved.count(i) == 0) {
      factor_names.push_back(header[static_cast<std::size_t>(i)]);
      factor_cols.push_back(i);
    }
  }
  if (factor_names.empty()) fail(ErrorCode::schema, "'" + path + "' has no factor columns");
  {
    std::set<std::string> uniq(header.begin(), header.end());
    if (uniq.size() != header.size()) fail(ErrorCode::schema, "'" + path + "' has duplicate column names");
  }

  struct Row {
    MonthIndex month;
    std::string ticker;
    std::string industry;
    double mcap;
    double ret;
    StockFlags flg;
    double bench;
    std::vector<double> factors;
  };
  std::vector<Row> rows;
  std::set<std::string> stock_set;
  std::set<int> month_serials;
  std::set<std::pair<int, std::string>> seen_keys;

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    Row row;
    row.month = MonthIndex::parse(cells[static_cast<std::size_t>(c_date)]);
    row.ticker = cells[static_cast<std::size_t>(c_ticker)];
    if (row.ticker.empty()) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": empty ticker");
    row.industry = cells[static_cast<std::size_t>(c_industry)];
    row.mcap = parse_double_cell(cells[static_cast<std::size_t>(c_mcap)], schema.col("market_cap"), line_no);
    const std::string& ret_cell = cells[static_cast<std::size_t>(c_ret)];
    row.ret = ret_cell.empty() ? missing_value() : parse_double_cell(ret_cell, schema.col("next_return"), line_no);
    row.flg.is_st = parse_flag_cell(cells[static_cast<std::size_t>(c_st)], schema.col("is_st"), line_no);
    row.flg.is_suspended =
        parse_flag_cell(cells[static_cast<std::size_t>(c_susp)], schema.col("is_suspended"), line_no);
    row.flg.is_new_listing =
        parse_flag_cell(cells[static_cast<std::size_t>(c_new)], schema.col("is_new_listing"), line_no);
    row.bench =
        parse_double_cell(cells[static_cast<std::size_t>(c_bench)], schema.col("benchmark_return"), line_no);
    row.factors.reserve(factor_cols.size());
    for (std::size_t j = 0; j < factor_cols.size(); ++j) {
      const std::string& cell = cells[static_cast<std::size_t>(factor_cols[j])];
      row.factors.push_back(cell.empty() ? missing_value()
                                         : parse_double_cell(cell, factor_names[j], line_no));
    }

    const auto key = std::make_pair(row.month.serial(), row.ticker);
    if (!seen_keys.insert(key).second)
      fail(ErrorCode::structural,
           "duplicate row for " + row.ticker + " at " + row.month.str() + " (line " + std::to_string(line_no) + ")");
    stock_set.insert(row.ticker);
    month_serials.insert(row.month.serial());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::structural, "'" + path + "' has no data rows");

  {
    int prev = -1;
    for (int serial : month_serials) {
      if (prev >= 0 && serial != prev + 1)
        fail(ErrorCode::structural, "months are not contiguous around " + MonthIndex::from_serial(serial).str());
      prev = serial;
    }
  }
  if (rows.size() != stock_set.size() * month_serials.size())
    fail(ErrorCode::structural, "panel grid is incomplete: " + std::to_string(rows.size()) + " rows for " +
                                    std::to_string(stock_set.size()) + " stocks x " +
                                    std::to_string(month_serials.size()) + " months");

  std::vector<std::string> stocks(stock_set.begin(), stock_set.end());
  std::vector<MonthIndex> months;
  for (int serial : month_serials) months.push_back(MonthIndex::from_serial(serial));

  FactorPanel panel(std::move(stocks), std::move(months), std::move(factor_names));
  for (const Row& row : rows) {
    const int m = panel.month_pos(row.month);
    const int s = panel.stock_pos(row.ticker);
    for (int f = 0; f < panel.n_factors(); ++f)
      panel.set_value(m, s, f, row.factors[static_cast<std::size_t>(f)]);
    panel.set_next_return(m, s, row.ret);
    panel.set_market_cap(m, s, row.mcap);
    panel.set_industry(m, s, row.industry);
    panel.set_flags(m, s, row.flg);
    const double existing = panel.benchmark_return(m);
    if (!is_missing(existing) && existing != row.bench)
      fail(ErrorCode::structural, "inconsistent benchmark return at " + row.month.str());
    panel.set_benchmark_return(m, row.bench);
  }
  panel.validate();
  return panel;
}

void write_panel(const FactorPanel& panel, const std::string& path, const PanelSchema& schema) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write '" + path + "'");
  out << schema.col("date") << ',' << schema.col("ticker") << ',' << schema.col("industry") << ','
      << schema.col("market_cap") << ',' << schema.col("next_return") << ',' << schema.col("is_st") << ','
      << schema.col("is_suspended") << ',' << schema.col("is_new_listing") << ','
      << schema.col("benchmark_return");
  for (const std::string& f : panel.factor_names()) out << ',' << f;
  out << '\n';
  for (int m = 0; m < panel.n_months(); ++m) {
    for (int s = 0; s < panel.n_stocks(); ++s) {
      const StockFlags flg = panel.flags(m, s);
      out << panel.months()[static_cast<std::size_t>(m)].str() << ','
          << panel.stocks()[static_cast<std::size_t>(s)] << ',' << panel.industry(m, s) << ','
          << fmt_double(panel.market_cap(m, s)) << ',';
      const double ret = panel.next_return(m, s);
      if (!is_missing(ret)) out << fmt_double(ret);
      out << ',' << (flg.is_st ? 1 : 0) << ',' << (flg.is_suspended ? 1 : 0) << ','
          << (flg.is_new_listing ? 1 : 0) << ',' << fmt_double(panel.benchmark_return(m));
      for (int f = 0; f < panel.n_factors(); ++f) {
        const double v = panel.value(m, s, f);
        out << ',';
        if (!is_missing(v)) out << fmt_double(v);
      }
      out << '\n';
    }
  }
  if (!out) fail(ErrorCode::io, "write to '" + path + "' failed");
}

FactorPanel generate_synthetic_panel(const SyntheticSpec& spec) {
  if (spec.n_stocks < 2 || spec.n_months < 1 || spec.n_factors < 1)
    fail(ErrorCode::range, "synthetic panel needs at least 2 stocks, 1 month, 1 factor");
  if (spec.n_industries < 1) fail(ErrorCode::range, "synthetic panel needs at least 1 industry");
  {
    bool live = spec.noise > 0.0;
    for (const SignalTerm& t : spec.signal)
      if (t.coef != 0.0) live = true;
    for (const SignalTerm& t : spec.signal_late)
      if (t.coef != 0.0) live = true;
    if (!live) fail(ErrorCode::degenerate, "synthetic returns would be identically zero");
  }

  std::vector<std::string> stocks;
  stocks.reserve(static_cast<std::size_t>(spec.n_stocks));
  for (int s = 0; s < spec.n_stocks; ++s) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%04d", s);
    stocks.emplace_back(buf);
  }
  std::vector<MonthIndex> months;
  months.reserve(static_cast<std::size_t>(spec.n_months));
  for (int m = 0; m < spec.n_months; ++m) months.push_back(MonthIndex::from_serial(spec.start.serial() + m));
  std::vector<std::string> factor_names;
  factor_names.reserve(static_cast<std::size_t>(spec.n_factors));
  for (int f = 0; f < spec.n_factors; ++f) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "f%02d", f);
    factor_names.emplace_back(buf);
  }

  auto resolve_terms = [&](const std::vector<SignalTerm>& terms) {
    std::vector<std::pair<int, SignalTerm>> out;
    for (const SignalTerm& t : terms) {
      const auto it = std::find(factor_names.begin(), factor_names.end(), t.factor);
      if (it == factor_names.end())
        fail(ErrorCode::range, "signal references unknown factor '" + t.factor + "'");
      out.emplace_back(static_cast<int>(it - factor_names.begin()), t);
    }
    return out;
  };
  const auto early_terms = resolve_terms(spec.signal);
  const auto late_terms = resolve_terms(spec.signal_late);

  FactorPanel panel(std::move(stocks), std::move(months), factor_names);

  // One sequential draw order (factors, then noise, then caps, then flags)
  // keeps the panel identical regardless of thread settings elsewhere.
  Rng factor_rng(derive_seed(spec.seed, 1));
  for (int m = 0; m < spec.n_months; ++m)
    for (int s = 0; s < spec.n_stocks; ++s)
      for (int f = 0; f < spec.n_factors; ++f) panel.set_value(m, s, f, factor_rng.normal());

  Rng noise_rng(derive_seed(spec.seed, 2));
  std::vector<double> rets(static_cast<std::size_t>(spec.n_stocks));
  for (int m = 0; m < spec.n_months; ++m) {
    const bool late = spec.switch_month >= 0 && m >= spec.switch_month;
    const auto& terms = late ? late_terms : early_terms;
    double sum = 0.0;
    for (int s = 0; s < spec.n_stocks; ++s) {
      double r = 0.0;
      for (const auto& [f, term] : terms) {
        const double x = panel.value(m, s, f);
        r += term.coef * (term.absolute ? std::fabs(x) : x);
      }
      r += spec.noise * noise_rng.normal();
      rets[static_cast<std::size_t>(s)] = r;
      panel.set_next_return(m, s, r);
      sum += r;
    }
    panel.set_benchmark_return(m, sum / spec.n_stocks);
  }

  Rng cap_rng(derive_seed(spec.seed, 3));
  for (int m = 0; m < spec.n_months; ++m) {
    for (int s = 0; s < spec.n_stocks; ++s) {
      panel.set_market_cap(m, s, std::exp(1.0 + 0.8 * cap_rng.normal()) * 1e9);
      char buf[16];
      std::snprintf(buf, sizeof(buf), "IND%02d", s % spec.n_industries);
      panel.set_industry(m, s, buf);
    }
  }

  if (spec.flag_prob > 0.0) {
    Rng flag_rng(derive_seed(spec.seed, 4));
    for (int m = 0; m < spec.n_months; ++m) {
      for (int s = 0; s < spec.n_stocks; ++s) {
        StockFlags flg;
        flg.is_st = flag_rng.uniform() < spec.flag_prob;
        flg.is_suspended = flag_rng.uniform() < spec.flag_prob;
        flg.is_new_listing = flag_rng.uniform() < spec.flag_prob;
        panel.set_flags(m, s, flg);
      }
    }
  }

  panel.validate();
  return panel;
}

}  // namespace ealpha
