#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pairflow {

using Index = std::size_t;
using Edge = std::pair<Index, Index>;

/// Number of unordered off-diagonal pairs among n assets, n(n-1)/2.
constexpr Index pair_count(Index n) { return n < 2 ? 0 : n * (n - 1) / 2; }

/// Position of the unordered pair {i, j} (i != j) in row-major upper-triangle
/// order: (0,1), (0,2), ..., (0,n-1), (1,2), ...
Index pair_index(Index n, Index i, Index j);

/// Inverse of pair_index. Precomputing a table is faster in hot loops; see
/// PairIndexTable.
Edge pair_at(Index n, Index p);

class PairIndexTable {
 public:
  explicit PairIndexTable(Index n);

  Index n() const { return n_; }
  Index size() const { return first_.size(); }
  Index first(Index p) const { return first_[p]; }
  Index second(Index p) const { return second_[p]; }

 private:
  Index n_;
  std::vector<Index> first_;
  std::vector<Index> second_;
};

/// Ordered, uppercase-normalized ticker list with its inverse index.
class SymbolTable {
 public:
  SymbolTable() = default;
  /// Throws ValidationError on empty or duplicate tickers (after uppercasing).
  explicit SymbolTable(std::vector<std::string> tickers);

  Index size() const { return tickers_.size(); }
  bool empty() const { return tickers_.empty(); }
  const std::string& operator[](Index i) const { return tickers_[i]; }
  const std::vector<std::string>& tickers() const { return tickers_; }

  std::optional<Index> find(std::string_view ticker) const;
  /// Throws ValidationError when the ticker is unknown.
  Index at(std::string_view ticker) const;

  static std::string normalize(std::string_view ticker);

  friend bool operator==(const SymbolTable& a, const SymbolTable& b) {
    return a.tickers_ == b.tickers_;
  }

 private:
  std::vector<std::string> tickers_;
  std::unordered_map<std::string, Index> index_;
};

/// Undirected simple graph over n assets. Symmetric by construction.
class PairGraph {
 public:
  PairGraph() = default;
  explicit PairGraph(Index n);
  static PairGraph complete(Index n);
  static PairGraph from_edges(Index n, const std::vector<Edge>& edges);

  Index n() const { return n_; }
  bool has_edge(Index i, Index j) const { return adj_[i * n_ + j] != 0; }
  void add_edge(Index i, Index j);
  void remove_edge(Index i, Index j);

  Index edge_count() const { return edge_count_; }
  /// Edges as (i < j) in row-major upper-triangle order.
  std::vector<Edge> edges() const;

  friend bool operator==(const PairGraph& a, const PairGraph& b) {
    return a.n_ == b.n_ && a.adj_ == b.adj_;
  }

 private:
  Index n_ = 0;
  Index edge_count_ = 0;
  std::vector<unsigned char> adj_;
};

/// Symmetric, nonnegative observed volumes with a zero diagonal.
class VolumeMatrix {
 public:
  VolumeMatrix() = default;
  explicit VolumeMatrix(Index n);
  /// Validates symmetry (exact), nonnegativity and zero diagonal.
  explicit VolumeMatrix(Eigen::MatrixXd values);

  Index n() const { return static_cast<Index>(values_.rows()); }
  double operator()(Index i, Index j) const { return values_(i, j); }
  const Eigen::MatrixXd& values() const { return values_; }

  /// Graph of cells with strictly positive volume.
  PairGraph support() const;
  /// Sum over the strict upper triangle (each pair once).
  double total() const;
  /// Per-asset participation: row sums of the full symmetric matrix.
  Eigen::VectorXd row_sums() const { return values_.rowwise().sum(); }

 private:
  Eigen::MatrixXd values_;
};

/// Signed rank-2 factors: K* = w1 w1^T - w2 w2^T.
struct FactorPair {
  Eigen::VectorXd w1;
  Eigen::VectorXd w2;

  FactorPair() = default;
  explicit FactorPair(Index n) : w1(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
                                 w2(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}
  FactorPair(Eigen::VectorXd a, Eigen::VectorXd b);

  Index n() const { return static_cast<Index>(w1.size()); }
  /// Stacked [w1; w2], the flattening used by every Jacobian in the library.
  Eigen::VectorXd stacked() const;
  static FactorPair from_stacked(const Eigen::VectorXd& x);
};

/// K*[i][j] = w1[i] w1[j] - w2[i] w2[j] off the diagonal, 0 on it.
/// Throws InvalidProblem when n < 2.
Eigen::MatrixXd reconstruct_k(const FactorPair& factors);

/// Sum over i != j of mask[i][j] * a[i][j]^2 (both orientations counted).
double masked_sq_frobenius(const Eigen::MatrixXd& a, const PairGraph& mask);

/// Sum of k_star over the strict upper triangle restricted to edges of g.
double covered_volume(const Eigen::MatrixXd& k_star, const PairGraph& g);

bool is_connected(const PairGraph& g);

class UnionFind {
 public:
  explicit UnionFind(Index n);

  Index find(Index x);
  /// Returns true when x and y were in different sets.
  bool unite(Index x, Index y);
  Index components() const { return components_; }

 private:
  std::vector<Index> parent_;
  std::vector<unsigned char> rank_;
  Index components_;
};

}  // namespace pairflow
