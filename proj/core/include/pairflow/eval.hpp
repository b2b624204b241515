#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pairflow/bnb.hpp"
#include "pairflow/ingest.hpp"
#include "pairflow/ipm.hpp"

namespace pairflow {

// What the per-window search maximizes.
enum class CoverageWeights {
  Realized,  // realized volume; K* only orders candidates of equal volume
  KStar,     // estimated K*; realized volume only orders ties
};

struct EvalConfig {
  IpmConfig ipm;
  std::uint64_t node_cap = 10'000'000;
  BranchRule branch_rule = BranchRule::LargestValue;
  BoundRule bound_rule = BoundRule::Spanning;
  CoverageWeights weights = CoverageWeights::Realized;
  int threads = 1;
  /// When set, points also carry m * reference_n / n, the edge budget an
  /// exchange with reference_n assets would need for the same density.
  std::optional<Index> reference_n;
};

struct WindowFit {
  std::string window;
  Eigen::MatrixXd k_star;  // empty when estimation failed
  IpmReport report;
  std::string error;
};

struct CoveragePoint {
  std::string window;
  Index m = 0;
  std::optional<double> m_normalized;
  double coverage_realized = 0.0;
  double coverage_kstar = 0.0;
  bool optimal = false;
  bool ipm_converged = false;
  std::uint64_t nodes_expanded = 0;
  std::string error;  // empty on success
};

struct RetentionPoint {
  Index m = 0;
  std::optional<double> m_normalized;
  double retention = 0.0;
  Index transitions = 0;  // consecutive window pairs averaged
  bool optimal = false;   // every contributing search exhausted
  std::string error;
};

struct PairDiff {
  std::vector<std::pair<std::string, std::string>> removed;  // observed, not optimal
  std::vector<std::pair<std::string, std::string>> added;    // optimal, not observed
};

struct Evaluation {
  std::vector<WindowFit> fits;
  std::vector<CoveragePoint> coverage;  // window-major, then in the order of ms
  std::vector<RetentionPoint> retention;
  std::vector<std::vector<PairGraph>> graphs;  // [window][m index]; empty graph on error
};

/// Estimates K* for every window from its volumes and support.
std::vector<WindowFit> fit_windows(const WindowedDataset& data, const EvalConfig& config);

/// Coverage for every window and budget, and retention when the dataset has
/// at least two windows. Per-point failures are recorded in the point and the
/// sweep continues. Throws InfeasibleBudget when a budget is out of range.
Evaluation evaluate(const WindowedDataset& data, const std::vector<Index>& ms, const EvalConfig& config);

/// Coverage points of one window, identified by its period.
std::vector<CoveragePoint> coverage_curve(const WindowedDataset& data, std::string_view window,
                                          const std::vector<Index>& ms, const EvalConfig& config);

/// Throws InsufficientData when the dataset has fewer than two windows.
std::vector<RetentionPoint> retention_curve(const WindowedDataset& data, const std::vector<Index>& ms,
                                            const EvalConfig& config);

/// Pairs as (first, second) ticker in alphabetical order, lists sorted.
PairDiff diff_pairs(const PairGraph& observed, const PairGraph& optimal, const SymbolTable& symbols);

}  // namespace pairflow
