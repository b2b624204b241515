#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pairflow/matcore.hpp"

namespace pairflow {

struct VolumeRecord {
  std::string base;
  std::string quote;
  double volume = 0.0;
  std::string window;  // "YYYY-MM"

  friend bool operator==(const VolumeRecord&, const VolumeRecord&) = default;
};

/// True for a calendar month written as "YYYY-MM".
bool is_period(std::string_view s);

/// The calendar month after `period`; throws ValidationError on a bad id.
std::string next_period(std::string_view period);

/// Parses CSV with header `base,quote,volume,window`. Tickers are
/// uppercase-normalized; blank lines and lines starting with '#' are skipped.
/// Errors carry the 1-based line number.
std::vector<VolumeRecord> parse_volume_csv(std::istream& in);

/// Writes records in the format read by parse_volume_csv. Volumes use %.17g
/// so that a parse round trip is exact.
void write_volume_csv(std::ostream& out, const std::vector<VolumeRecord>& records);

/// Distinct periods present in `records`, ascending.
std::vector<std::string> list_periods(const std::vector<VolumeRecord>& records);

struct WindowMatrix {
  SymbolTable symbols;
  VolumeMatrix v;
};

/// Sums the records of one period per unordered pair. Symbols are ordered
/// by descending total volume, then alphabetically.
WindowMatrix aggregate_window(const std::vector<VolumeRecord>& records, std::string_view period);

struct WindowedDataset {
  SymbolTable symbols;
  std::vector<std::pair<std::string, VolumeMatrix>> windows;  // ascending period
};

/// One matrix per period over a symbol table shared by every window, ordered
/// by descending volume over the whole record set.
WindowedDataset build_dataset(const std::vector<VolumeRecord>& records);

/// Keeps the k assets with the largest row sums, preserving their relative
/// order. Throws InfeasibleConfig unless 1 <= k <= n.
WindowMatrix top_k_filter(const SymbolTable& symbols, const VolumeMatrix& v, Index k);

/// Applies one top-k selection, ranked by volume summed over all windows.
WindowedDataset top_k_filter(const WindowedDataset& data, Index k);

struct DatasetStats {
  Index n_coins = 0;  // assets with positive volume
  Index n_pairs = 0;  // nonzero upper-triangle cells
  double total_volume = 0.0;
  double topk_share = 0.0;
  Index k = 0;
};

/// topk_share is the volume on pairs touching at least one of the k assets
/// with the largest row sums, over total volume. Throws UndefinedShare when
/// the total is zero.
DatasetStats concentration_stats(const SymbolTable& symbols, const VolumeMatrix& v, Index k);

struct CorrelationResult {
  Index pairs_used = 0;
  double log_correlation = 0.0;
  double raw_correlation = 0.0;
};

/// Pearson correlation, across bases traded against both quotes with
/// positive volume, of the volumes against quote_a and quote_b.
CorrelationResult same_base_correlation(const SymbolTable& symbols, const VolumeMatrix& v,
                                        std::string_view quote_a, std::string_view quote_b);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct StatsRow {
  std::string id;
  std::string period;
  DatasetStats stats;
};

/// Plain-text table with the columns ID, Period, #Coins, #Pairs, Volume($),
/// Top<k>(%).
std::string render_stats_table(const std::vector<StatsRow>& rows);

}  // namespace pairflow
