#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pairflow/matcore.hpp"

namespace pairflow {

// Best-first branch and bound for the connected M-edge graph maximizing
// covered K* volume. Positions are the N(N-1)/2 unordered pairs in
// row-major upper-triangle order (see pair_index).

enum class Slot : std::uint8_t { Present = 0, Absent = 1, Undecided = 2 };

enum class BranchRule {
  LargestValue,    // undecided position with the largest K*, lowest position on ties
  FirstUndecided,  // lowest undecided position
};

enum class BoundRule {
  TopRemaining,  // PRESENT + top (m - n_present) positive UNDECIDED values
  Spanning,      // min of the above and a bound that charges for reconnecting components
};

struct SearchNode {
  std::vector<Slot> assignment;
  Index n_present = 0;
  Index n_absent = 0;
  double ub = 0.0;
  double lb = 0.0;
  bool visited = false;
  bool dead = false;

  static SearchNode root(Index n);
  Index n_undecided() const { return assignment.size() - n_present - n_absent; }
  bool complete() const { return n_undecided() == 0; }
  /// Graph of PRESENT positions.
  PairGraph present_graph(Index n) const;
};

struct SearchConfig {
  Index m = 0;
  std::uint64_t node_cap = 10'000'000;
  BranchRule branch_rule = BranchRule::LargestValue;
  BoundRule bound_rule = BoundRule::Spanning;
  /// Called with every node as it is expanded, in expansion order.
  std::function<void(const SearchNode&)> on_expand;

  /// Throws InfeasibleBudget unless n - 1 <= m <= n(n-1)/2, InfeasibleConfig
  /// for a zero node cap.
  void validate(Index n) const;
};

struct SearchResult {
  PairGraph graph;
  double objective = 0.0;
  bool optimal = false;
  std::uint64_t nodes_expanded = 0;
  std::uint64_t nodes_pruned = 0;
};

/// Heap order of the search: larger ub first, then fewer UNDECIDED, then the
/// lexicographically smaller assignment (PRESENT < ABSENT < UNDECIDED).
bool expands_before(const SearchNode& a, const SearchNode& b);

/// Maximum-weight spanning tree under K*, then the largest remaining entries
/// until m edges. Throws InfeasibleBudget when m is out of range.
PairGraph greedy_incumbent(const Eigen::MatrixXd& k_star, Index m);

/// PRESENT value plus the (m - n_present) largest positive UNDECIDED values.
double upper_bound(const SearchNode& node, const Eigen::MatrixXd& k_star, Index m);

/// Completes the assignment when either budget is used up; otherwise returns
/// the node unchanged.
SearchNode force_fill(SearchNode node, Index m);

/// Splits on one UNDECIDED position (PRESENT child first). Children are force
/// filled, bounded (never above the parent's ub), and marked dead when they
/// break a budget or when their PRESENT and UNDECIDED positions cannot
/// connect the assets. Throws InternalError when nothing is undecided.
std::pair<SearchNode, SearchNode> branch(const SearchNode& node, const Eigen::MatrixXd& k_star,
                                         const SearchConfig& config);

/// Throws ValidationError when k_star is not square, symmetric with zero
/// diagonal and finite; InfeasibleBudget when m is out of range. Hitting
/// node_cap returns the incumbent with optimal = false.
///
/// `tie_break`, when given, orders positions of equal K* (larger first) for
/// branching and for the greedy and completion heuristics. It never changes
/// the optimal objective.
SearchResult search(const Eigen::MatrixXd& k_star, const SearchConfig& config,
                    const Eigen::MatrixXd* tie_break = nullptr);

}  // namespace pairflow
