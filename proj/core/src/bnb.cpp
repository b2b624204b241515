#include "pairflow/bnb.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "pairflow/error.hpp"

namespace pairflow {

namespace {

struct Problem {
  Index n = 0;
  Index pairs = 0;
  PairIndexTable table;
  std::vector<double> value;  // K* per position
  std::vector<Index> rank;    // positions by descending value, ascending position on ties

  explicit Problem(const Eigen::MatrixXd& k, const Eigen::MatrixXd* tie_break = nullptr)
      : n(static_cast<Index>(k.rows())), pairs(pair_count(n)), table(n) {
    auto at = [&](const Eigen::MatrixXd& a, Index p) {
      return a(static_cast<Eigen::Index>(table.first(p)), static_cast<Eigen::Index>(table.second(p)));
    };
    value.resize(pairs);
    std::vector<double> second(pairs, 0.0);
    for (Index p = 0; p < pairs; ++p) {
      value[p] = at(k, p);
      if (tie_break) second[p] = at(*tie_break, p);
    }
    rank.resize(pairs);
    std::iota(rank.begin(), rank.end(), Index{0});
    std::stable_sort(rank.begin(), rank.end(), [&](Index a, Index b) {
      if (value[a] != value[b]) return value[a] > value[b];
      return second[a] > second[b];
    });
  }
};

void check_k_star(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw DimensionMismatch("search: K* is not square");
  if (k.rows() == 0) throw InvalidProblem("search: empty K*");
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    if (k(i, i) != 0.0) throw ValidationError("search: K* diagonal must be zero");
    for (Eigen::Index j = i + 1; j < k.cols(); ++j) {
      if (!std::isfinite(k(i, j))) throw ValidationError("search: K* has non-finite entries");
      if (k(i, j) != k(j, i)) throw ValidationError("search: K* is not symmetric");
    }
  }
}

void check_budget(Index n, Index m) {
  const Index lo = n == 0 ? 0 : n - 1;
  if (m < lo || m > pair_count(n)) {
    throw InfeasibleBudget("edge budget m=" + std::to_string(m) + " outside [" + std::to_string(lo) + ", " +
                           std::to_string(pair_count(n)) + "] for n=" + std::to_string(n) +
                           " (a connected graph needs at least n-1 pairs)");
  }
}

double present_value(const SearchNode& node, const Problem& pb) {
  double sum = 0.0;
  for (Index p = 0; p < pb.pairs; ++p) {
    if (node.assignment[p] == Slot::Present) sum += pb.value[p];
  }
  return sum;
}

double top_remaining(const SearchNode& node, const Problem& pb, Index count) {
  double sum = 0.0;
  for (Index p : pb.rank) {
    if (count == 0 || pb.value[p] <= 0.0) break;
    if (node.assignment[p] == Slot::Undecided) {
      sum += pb.value[p];
      --count;
    }
  }
  return sum;
}

double top_remaining_bound(const SearchNode& node, const Problem& pb, Index m) {
  return present_value(node, pb) + top_remaining(node, pb, m - node.n_present);
}

// Any connected completion must join the c components of the PRESENT graph
// with at least c - 1 UNDECIDED edges forming a spanning tree of the
// contracted graph; their value is at most that of the maximum such tree. The
// remaining picks are bounded by the top positive UNDECIDED values. Returns
// -inf when the components cannot be joined within the budget.
double spanning_bound(const SearchNode& node, const Problem& pb, Index m) {
  UnionFind uf(pb.n);
  for (Index p = 0; p < pb.pairs; ++p) {
    if (node.assignment[p] == Slot::Present) uf.unite(pb.table.first(p), pb.table.second(p));
  }
  const Index links = uf.components() - 1;
  const Index need = m - node.n_present;
  if (links > need) return -std::numeric_limits<double>::infinity();
  double tree = 0.0;
  for (Index p : pb.rank) {
    if (uf.components() == 1) break;
    if (node.assignment[p] == Slot::Undecided && uf.unite(pb.table.first(p), pb.table.second(p))) {
      tree += pb.value[p];
    }
  }
  if (uf.components() > 1) return -std::numeric_limits<double>::infinity();
  return present_value(node, pb) + tree + top_remaining(node, pb, need - links);
}

double node_bound(const SearchNode& node, const Problem& pb, Index m, BoundRule rule) {
  const double ub = top_remaining_bound(node, pb, m);
  if (rule == BoundRule::Spanning && !node.complete()) return std::min(ub, spanning_bound(node, pb, m));
  return ub;
}

bool connectable(const SearchNode& node, const Problem& pb) {
  UnionFind uf(pb.n);
  for (Index p = 0; p < pb.pairs; ++p) {
    if (node.assignment[p] != Slot::Absent && uf.unite(pb.table.first(p), pb.table.second(p)) &&
        uf.components() == 1) {
      return true;
    }
  }
  return uf.components() == 1;
}

bool within_budget(const SearchNode& node, const Problem& pb, Index m) {
  return node.n_present <= m && node.n_absent <= pb.pairs - m;
}

// Bounds a freshly created node and marks it dead when infeasible.
void finish_child(SearchNode& child, double parent_ub, const Problem& pb, const SearchConfig& cfg) {
  if (!within_budget(child, pb, cfg.m)) {
    child.dead = true;
    return;
  }
  child = force_fill(std::move(child), cfg.m);
  if (!connectable(child, pb)) {
    child.dead = true;
    return;
  }
  child.ub = node_bound(child, pb, cfg.m, cfg.bound_rule);
  if (!child.complete()) child.ub = std::min(child.ub, parent_ub);
  if (child.ub == -std::numeric_limits<double>::infinity()) {
    child.dead = true;
    return;
  }
  child.lb = child.complete() ? child.ub : 0.0;
}

Index pick_position(const SearchNode& node, const Problem& pb, BranchRule rule) {
  if (rule == BranchRule::LargestValue) {
    for (Index p : pb.rank) {
      if (node.assignment[p] == Slot::Undecided) return p;
    }
  } else {
    for (Index p = 0; p < pb.pairs; ++p) {
      if (node.assignment[p] == Slot::Undecided) return p;
    }
  }
  throw InternalError("branch: node has no undecided position");
}

std::pair<SearchNode, SearchNode> branch_impl(const SearchNode& node, double node_ub, const Problem& pb,
                                              const SearchConfig& cfg) {
  const Index p = pick_position(node, pb, cfg.branch_rule);
  SearchNode with = node;
  with.visited = false;
  with.assignment[p] = Slot::Present;
  ++with.n_present;
  SearchNode without = node;
  without.visited = false;
  without.assignment[p] = Slot::Absent;
  ++without.n_absent;
  finish_child(with, node_ub, pb, cfg);
  finish_child(without, node_ub, pb, cfg);
  return {std::move(with), std::move(without)};
}

// Best completion ignoring connectivity: PRESENT plus the largest UNDECIDED
// values up to the budget. When it happens to be connected it is the exact
// optimum of the subtree.
bool connected_best_completion(const SearchNode& node, const Problem& pb, Index m, double& value,
                               std::vector<Index>& chosen) {
  chosen.clear();
  Index need = m - node.n_present;
  for (Index p : pb.rank) {
    if (need == 0) break;
    if (node.assignment[p] == Slot::Undecided) {
      chosen.push_back(p);
      --need;
    }
  }
  UnionFind uf(pb.n);
  value = 0.0;
  for (Index p = 0; p < pb.pairs; ++p) {
    if (node.assignment[p] == Slot::Present) {
      uf.unite(pb.table.first(p), pb.table.second(p));
      value += pb.value[p];
    }
  }
  for (Index p : chosen) {
    uf.unite(pb.table.first(p), pb.table.second(p));
    value += pb.value[p];
  }
  return uf.components() == 1;
}

// Node storage for the search: two bit planes (PRESENT, ABSENT) per node in
// one pool, recycled through a free list.
class NodePool {
 public:
  explicit NodePool(Index pairs) : pairs_(pairs), words_((pairs + 63) / 64) {}

  std::uint32_t store(const SearchNode& node) {
    std::uint32_t id;
    if (!free_.empty()) {
      id = free_.back();
      free_.pop_back();
    } else {
      id = static_cast<std::uint32_t>(bits_.size() / (2 * words_));
      bits_.resize(bits_.size() + 2 * words_);
    }
    std::uint64_t* w = plane(id);
    std::fill(w, w + 2 * words_, 0);
    for (Index p = 0; p < pairs_; ++p) {
      if (node.assignment[p] == Slot::Present) w[p / 64] |= std::uint64_t{1} << (p % 64);
      if (node.assignment[p] == Slot::Absent) w[words_ + p / 64] |= std::uint64_t{1} << (p % 64);
    }
    return id;
  }

  void load(std::uint32_t id, SearchNode& node) const {
    const std::uint64_t* w = plane(id);
    node.assignment.assign(pairs_, Slot::Undecided);
    node.n_present = node.n_absent = 0;
    for (Index p = 0; p < pairs_; ++p) {
      const std::uint64_t bit = std::uint64_t{1} << (p % 64);
      if (w[p / 64] & bit) {
        node.assignment[p] = Slot::Present;
        ++node.n_present;
      } else if (w[words_ + p / 64] & bit) {
        node.assignment[p] = Slot::Absent;
        ++node.n_absent;
      }
    }
  }

  void release(std::uint32_t id) { free_.push_back(id); }

  // Lexicographic order on slot codes (PRESENT < ABSENT < UNDECIDED) by
  // position.
  bool lex_less(std::uint32_t a, std::uint32_t b) const {
    const std::uint64_t* x = plane(a);
    const std::uint64_t* y = plane(b);
    for (Index k = 0; k < words_; ++k) {
      const std::uint64_t diff = (x[k] ^ y[k]) | (x[words_ + k] ^ y[words_ + k]);
      if (diff == 0) continue;
      const int bit = std::countr_zero(diff);
      const std::uint64_t mask = std::uint64_t{1} << bit;
      auto code = [&](const std::uint64_t* w) { return (w[k] & mask) ? 0 : (w[words_ + k] & mask) ? 1 : 2; };
      return code(x) < code(y);
    }
    return false;
  }

 private:
  std::uint64_t* plane(std::uint32_t id) { return bits_.data() + static_cast<std::size_t>(id) * 2 * words_; }
  const std::uint64_t* plane(std::uint32_t id) const {
    return bits_.data() + static_cast<std::size_t>(id) * 2 * words_;
  }

  Index pairs_;
  Index words_;
  std::vector<std::uint64_t> bits_;
  std::vector<std::uint32_t> free_;
};

struct HeapEntry {
  double ub;
  Index undecided;
  std::uint32_t id;
};

}  // namespace

void SearchConfig::validate(Index n) const {
  check_budget(n, m);
  if (node_cap == 0) throw InfeasibleConfig("node_cap must be > 0");
}

bool expands_before(const SearchNode& a, const SearchNode& b) {
  if (a.ub != b.ub) return a.ub > b.ub;
  if (a.n_undecided() != b.n_undecided()) return a.n_undecided() < b.n_undecided();
  return a.assignment < b.assignment;
}

SearchNode SearchNode::root(Index n) {
  SearchNode node;
  node.assignment.assign(pair_count(n), Slot::Undecided);
  return node;
}

PairGraph SearchNode::present_graph(Index n) const {
  PairGraph g(n);
  for (Index p = 0; p < assignment.size(); ++p) {
    if (assignment[p] == Slot::Present) {
      const auto [i, j] = pair_at(n, p);
      g.add_edge(i, j);
    }
  }
  return g;
}

namespace {

PairGraph greedy_impl(const Problem& pb, Index m) {
  UnionFind uf(pb.n);
  std::vector<char> used(pb.pairs, 0);
  PairGraph g(pb.n);
  for (Index p : pb.rank) {
    if (uf.components() == 1) break;
    if (uf.unite(pb.table.first(p), pb.table.second(p))) {
      used[p] = 1;
      g.add_edge(pb.table.first(p), pb.table.second(p));
    }
  }
  for (Index p : pb.rank) {
    if (g.edge_count() >= m) break;
    if (!used[p]) g.add_edge(pb.table.first(p), pb.table.second(p));
  }
  return g;
}

}  // namespace

PairGraph greedy_incumbent(const Eigen::MatrixXd& k_star, Index m) {
  check_k_star(k_star);
  const Problem pb(k_star);
  check_budget(pb.n, m);
  return greedy_impl(pb, m);
}

double upper_bound(const SearchNode& node, const Eigen::MatrixXd& k_star, Index m) {
  const Problem pb(k_star);
  if (node.assignment.size() != pb.pairs) throw DimensionMismatch("upper_bound: assignment length");
  return top_remaining_bound(node, pb, m);
}

SearchNode force_fill(SearchNode node, Index m) {
  const Index pairs = node.assignment.size();
  Slot fill;
  if (node.n_present == m) {
    fill = Slot::Absent;
  } else if (m <= pairs && node.n_absent == pairs - m) {
    fill = Slot::Present;
  } else {
    return node;
  }
  for (auto& s : node.assignment) {
    if (s == Slot::Undecided) {
      s = fill;
      ++(fill == Slot::Absent ? node.n_absent : node.n_present);
    }
  }
  return node;
}

std::pair<SearchNode, SearchNode> branch(const SearchNode& node, const Eigen::MatrixXd& k_star,
                                         const SearchConfig& config) {
  check_k_star(k_star);
  const Problem pb(k_star);
  if (node.assignment.size() != pb.pairs) throw DimensionMismatch("branch: assignment length");
  return branch_impl(node, node_bound(node, pb, config.m, config.bound_rule), pb, config);
}

SearchResult search(const Eigen::MatrixXd& k_star, const SearchConfig& config,
                    const Eigen::MatrixXd* tie_break) {
  check_k_star(k_star);
  if (tie_break && (tie_break->rows() != k_star.rows() || tie_break->cols() != k_star.cols())) {
    throw DimensionMismatch("search: tie-break matrix shape differs from K*");
  }
  const Problem pb(k_star, tie_break);
  config.validate(pb.n);
  const Index m = config.m;
  const double inf = std::numeric_limits<double>::infinity();

  SearchResult res;
  PairGraph best_graph = greedy_impl(pb, m);
  double incumbent = covered_volume(k_star, best_graph);
  auto prunable = [&](double ub) { return ub <= incumbent + 1e-12 * (1.0 + std::abs(incumbent)); };
  std::vector<Index> chosen;

  // Returns true when the node still needs expanding.
  auto settle = [&](SearchNode& node) {
    if (node.dead) {
      ++res.nodes_pruned;
      return false;
    }
    if (node.complete()) {
      if (node.lb > incumbent) {
        incumbent = node.lb;
        best_graph = node.present_graph(pb.n);
      }
      return false;
    }
    if (prunable(node.ub)) {
      ++res.nodes_pruned;
      return false;
    }
    double value = 0.0;
    if (connected_best_completion(node, pb, m, value, chosen)) {
      node.lb = value;
      if (value > incumbent) {
        incumbent = value;
        PairGraph g = node.present_graph(pb.n);
        for (Index p : chosen) g.add_edge(pb.table.first(p), pb.table.second(p));
        best_graph = std::move(g);
      }
      return false;
    }
    return true;
  };

  NodePool pool(pb.pairs);
  auto lower_priority = [&](const HeapEntry& a, const HeapEntry& b) {
    if (a.ub != b.ub) return a.ub < b.ub;
    if (a.undecided != b.undecided) return a.undecided > b.undecided;
    return pool.lex_less(b.id, a.id);
  };
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, decltype(lower_priority)> heap(lower_priority);

  SearchNode root = force_fill(SearchNode::root(pb.n), m);
  if (connectable(root, pb)) {
    root.ub = node_bound(root, pb, m, config.bound_rule);
    root.lb = root.complete() ? root.ub : 0.0;
    root.dead = root.ub == -inf;
  } else {
    root.dead = true;
  }
  if (settle(root)) heap.push({root.ub, root.n_undecided(), pool.store(root)});

  res.optimal = true;
  SearchNode node;
  while (!heap.empty()) {
    const HeapEntry top = heap.top();
    if (prunable(top.ub)) {
      res.nodes_pruned += heap.size();
      break;
    }
    if (res.nodes_expanded >= config.node_cap) {
      res.optimal = false;
      break;
    }
    heap.pop();
    pool.load(top.id, node);
    pool.release(top.id);
    node.ub = top.ub;
    node.visited = true;
    ++res.nodes_expanded;
    if (config.on_expand) config.on_expand(node);

    auto [with, without] = branch_impl(node, node.ub, pb, config);
    for (SearchNode* child : {&with, &without}) {
      if (settle(*child)) heap.push({child->ub, child->n_undecided(), pool.store(*child)});
    }
  }

  res.graph = std::move(best_graph);
  res.objective = covered_volume(k_star, res.graph);
  return res;
}

}  // namespace pairflow
