#include "pairflow/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "pairflow/error.hpp"

namespace pairflow {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Symbol order: descending volume, then ticker.
std::vector<std::string> rank_symbols(const std::map<std::string, double>& totals) {
  std::vector<std::string> out;
  out.reserve(totals.size());
  for (const auto& [t, _] : totals) out.push_back(t);
  std::stable_sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
    return totals.at(a) > totals.at(b);
  });
  return out;
}

VolumeMatrix accumulate(const SymbolTable& symbols, const std::vector<VolumeRecord>& records,
                        std::string_view period) {
  const auto n = static_cast<Eigen::Index>(symbols.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const auto& r : records) {
    if (r.window != period) continue;
    const auto i = static_cast<Eigen::Index>(symbols.at(r.base));
    const auto j = static_cast<Eigen::Index>(symbols.at(r.quote));
    const auto a = std::min(i, j);
    const auto b = std::max(i, j);
    m(a, b) += r.volume;
  }
  m.triangularView<Eigen::StrictlyLower>() = m.transpose().triangularView<Eigen::StrictlyLower>();
  return VolumeMatrix(std::move(m));
}

}  // namespace

bool is_period(std::string_view s) {
  if (s.size() != 7 || s[4] != '-') return false;
  for (std::size_t i = 0; i < 7; ++i) {
    if (i != 4 && !std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  const int month = (s[5] - '0') * 10 + (s[6] - '0');
  return month >= 1 && month <= 12;
}

std::string next_period(std::string_view period) {
  if (!is_period(period)) throw ValidationError("invalid period id: " + std::string(period));
  int year = 0;
  std::from_chars(period.data(), period.data() + 4, year);
  int month = (period[5] - '0') * 10 + (period[6] - '0');
  if (++month > 12) {
    month = 1;
    ++year;
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year % 10000, month);
  return buf;
}

std::vector<VolumeRecord> parse_volume_csv(std::istream& in) {
  std::vector<VolumeRecord> out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
    if (trim(view).empty() || trim(view).front() == '#') continue;
    const auto fields = split_commas(view);
    if (!header_seen) {
      if (fields.size() != 4 || lower(fields[0]) != "base" || lower(fields[1]) != "quote" ||
          lower(fields[2]) != "volume" || lower(fields[3]) != "window") {
        throw ParseError(line_no, "expected header base,quote,volume,window");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 4) {
      throw ParseError(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
    }
    VolumeRecord r;
    r.base = SymbolTable::normalize(fields[0]);
    r.quote = SymbolTable::normalize(fields[1]);
    if (r.base.empty() || r.quote.empty()) throw ParseError(line_no, "empty ticker");
    if (r.base == r.quote) throw ParseError(line_no, "self-pair " + r.base + "/" + r.quote);
    const auto vol = fields[2];
    const auto [ptr, ec] = std::from_chars(vol.data(), vol.data() + vol.size(), r.volume);
    if (ec != std::errc() || ptr != vol.data() + vol.size() || !std::isfinite(r.volume)) {
      throw ParseError(line_no, "malformed volume '" + std::string(vol) + "'");
    }
    if (r.volume < 0.0) throw ParseError(line_no, "negative volume");
    if (!is_period(fields[3])) {
      throw ParseError(line_no, "malformed window '" + std::string(fields[3]) + "', expected YYYY-MM");
    }
    r.window = std::string(fields[3]);
    out.push_back(std::move(r));
  }
  return out;
}

void write_volume_csv(std::ostream& out, const std::vector<VolumeRecord>& records) {
  out << "base,quote,volume,window\n";
  for (const auto& r : records) {
    out << r.base << ',' << r.quote << ',' << format_double(r.volume) << ',' << r.window << '\n';
  }
}

std::vector<std::string> list_periods(const std::vector<VolumeRecord>& records) {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.window);
  return {s.begin(), s.end()};
}

WindowMatrix aggregate_window(const std::vector<VolumeRecord>& records, std::string_view period) {
  std::map<std::string, double> totals;
  bool any = false;
  for (const auto& r : records) {
    if (r.window != period) continue;
    any = true;
    totals[r.base] += r.volume;
    totals[r.quote] += r.volume;
  }
  if (!any) throw EmptyWindow("no records in window " + std::string(period));
  SymbolTable symbols(rank_symbols(totals));
  VolumeMatrix v = accumulate(symbols, records, period);
  return {std::move(symbols), std::move(v)};
}

WindowedDataset build_dataset(const std::vector<VolumeRecord>& records) {
  if (records.empty()) throw EmptyWindow("no records in input");
  std::map<std::string, double> totals;
  for (const auto& r : records) {
    totals[r.base] += r.volume;
    totals[r.quote] += r.volume;
  }
  WindowedDataset data;
  data.symbols = SymbolTable(rank_symbols(totals));
  for (const auto& p : list_periods(records)) {
    data.windows.emplace_back(p, accumulate(data.symbols, records, p));
  }
  return data;
}

namespace {

std::vector<Index> top_k_indices(const Eigen::VectorXd& rows, Index k) {
  std::vector<Index> order(static_cast<std::size_t>(rows.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return rows(static_cast<Eigen::Index>(a)) > rows(static_cast<Eigen::Index>(b));
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

void check_k(Index k, Index n) {
  if (k < 1 || k > n) {
    throw InfeasibleConfig("top-k: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
}

VolumeMatrix submatrix(const VolumeMatrix& v, const std::vector<Index>& keep) {
  const auto k = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) m(a, b) = v(keep[a], keep[b]);
  }
  return VolumeMatrix(std::move(m));
}

SymbolTable subtable(const SymbolTable& symbols, const std::vector<Index>& keep) {
  std::vector<std::string> t;
  t.reserve(keep.size());
  for (Index i : keep) t.push_back(symbols[i]);
  return SymbolTable(std::move(t));
}

}  // namespace

WindowMatrix top_k_filter(const SymbolTable& symbols, const VolumeMatrix& v, Index k) {
  if (symbols.size() != v.n()) throw DimensionMismatch("top_k_filter: symbol table size differs from matrix");
  check_k(k, v.n());
  const auto keep = top_k_indices(v.row_sums(), k);
  return {subtable(symbols, keep), submatrix(v, keep)};
}

WindowedDataset top_k_filter(const WindowedDataset& data, Index k) {
  const Index n = data.symbols.size();
  check_k(k, n);
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (const auto& [_, v] : data.windows) rows += v.row_sums();
  const auto keep = top_k_indices(rows, k);
  WindowedDataset out;
  out.symbols = subtable(data.symbols, keep);
  for (const auto& [p, v] : data.windows) out.windows.emplace_back(p, submatrix(v, keep));
  return out;
}

DatasetStats concentration_stats(const SymbolTable& symbols, const VolumeMatrix& v, Index k) {
  if (symbols.size() != v.n()) {
    throw DimensionMismatch("concentration_stats: symbol table size differs from matrix");
  }
  const Index n = v.n();
  if (k > n) throw InfeasibleConfig("concentration_stats: k exceeds asset count");
  DatasetStats st;
  st.k = k;
  st.total_volume = v.total();
  const Eigen::VectorXd rows = v.row_sums();
  for (Index i = 0; i < n; ++i) {
    if (rows(static_cast<Eigen::Index>(i)) > 0.0) ++st.n_coins;
    for (Index j = i + 1; j < n; ++j) {
      if (v(i, j) > 0.0) ++st.n_pairs;
    }
  }
  if (!(st.total_volume > 0.0)) throw UndefinedShare("concentration_stats: total volume is zero");

  std::vector<char> top(n, 0);
  if (k > 0) {
    for (Index i : top_k_indices(rows, k)) top[i] = 1;
  }
  double covered = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (top[i] || top[j]) covered += v(i, j);
    }
  }
  st.topk_share = std::clamp(covered / st.total_volume, 0.0, 1.0);
  return st;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionMismatch("pearson: length mismatch");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw InsufficientData("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationResult same_base_correlation(const SymbolTable& symbols, const VolumeMatrix& v,
                                        std::string_view quote_a, std::string_view quote_b) {
  const Index qa = symbols.at(quote_a);
  const Index qb = symbols.at(quote_b);
  if (qa == qb) throw ValidationError("same_base_correlation: quotes must differ");
  std::vector<double> xa, xb;
  for (Index b = 0; b < v.n(); ++b) {
    if (b == qa || b == qb) continue;
    if (v(b, qa) > 0.0 && v(b, qb) > 0.0) {
      xa.push_back(v(b, qa));
      xb.push_back(v(b, qb));
    }
  }
  if (xa.size() < 3) {
    throw InsufficientData("same_base_correlation: need at least 3 common bases, have " +
                           std::to_string(xa.size()));
  }
  CorrelationResult res;
  res.pairs_used = xa.size();
  res.raw_correlation = pearson(xa, xb);
  for (auto& x : xa) x = std::log(x);
  for (auto& x : xb) x = std::log(x);
  res.log_correlation = pearson(xa, xb);
  return res;
}

std::string render_stats_table(const std::vector<StatsRow>& rows) {
  const Index k = rows.empty() ? 20 : rows.front().stats.k;
  const std::vector<std::string> head = {"ID", "Period", "#Coins", "#Pairs", "Volume($)",
                                         "Top" + std::to_string(k) + "(%)"};
  std::vector<std::vector<std::string>> cells;
  cells.push_back(head);
  for (const auto& r : rows) {
    char vol[32], share[32];
    std::snprintf(vol, sizeof vol, "%.4e", r.stats.total_volume);
    std::snprintf(share, sizeof share, "%.2f", 100.0 * r.stats.topk_share);
    cells.push_back({r.id, r.period, std::to_string(r.stats.n_coins), std::to_string(r.stats.n_pairs),
                     vol, share});
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      os << row[c];
      if (c + 1 < row.size()) os << std::string(width[c] - row[c].size() + 2, ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace pairflow
