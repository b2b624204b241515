#include "pairflow/matcore.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "pairflow/error.hpp"

namespace pairflow {

Index pair_index(Index n, Index i, Index j) {
  if (i == j || i >= n || j >= n) {
    throw DimensionMismatch("pair_index: invalid pair (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") for n=" + std::to_string(n));
  }
  if (i > j) std::swap(i, j);
  // rows before i contribute (n-1) + (n-2) + ... + (n-i)
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

Edge pair_at(Index n, Index p) {
  if (p >= pair_count(n)) {
    throw DimensionMismatch("pair_at: position out of range");
  }
  Index i = 0;
  Index row_len = n - 1;
  while (p >= row_len) {
    p -= row_len;
    ++i;
    --row_len;
  }
  return {i, i + 1 + p};
}

PairIndexTable::PairIndexTable(Index n) : n_(n) {
  first_.reserve(pair_count(n));
  second_.reserve(pair_count(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      first_.push_back(i);
      second_.push_back(j);
    }
  }
}

// ---------------------------------------------------------------------------

std::string SymbolTable::normalize(std::string_view ticker) {
  std::string out;
  out.reserve(ticker.size());
  for (char c : ticker) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

SymbolTable::SymbolTable(std::vector<std::string> tickers) {
  tickers_.reserve(tickers.size());
  for (auto& t : tickers) {
    std::string norm = normalize(t);
    if (norm.empty()) throw ValidationError("empty ticker in symbol table");
    if (!index_.emplace(norm, tickers_.size()).second) {
      throw ValidationError("duplicate ticker in symbol table: " + norm);
    }
    tickers_.push_back(std::move(norm));
  }
}

std::optional<Index> SymbolTable::find(std::string_view ticker) const {
  auto it = index_.find(normalize(ticker));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Index SymbolTable::at(std::string_view ticker) const {
  auto idx = find(ticker);
  if (!idx) throw ValidationError("unknown ticker: " + std::string(ticker));
  return *idx;
}

// ---------------------------------------------------------------------------

PairGraph::PairGraph(Index n) : n_(n), adj_(n * n, 0) {}

PairGraph PairGraph::complete(Index n) {
  PairGraph g(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) g.add_edge(i, j);
  }
  return g;
}

PairGraph PairGraph::from_edges(Index n, const std::vector<Edge>& edges) {
  PairGraph g(n);
  for (const auto& [i, j] : edges) g.add_edge(i, j);
  return g;
}

void PairGraph::add_edge(Index i, Index j) {
  if (i == j || i >= n_ || j >= n_) {
    throw DimensionMismatch("PairGraph::add_edge: invalid edge");
  }
  if (adj_[i * n_ + j] == 0) {
    adj_[i * n_ + j] = 1;
    adj_[j * n_ + i] = 1;
    ++edge_count_;
  }
}

void PairGraph::remove_edge(Index i, Index j) {
  if (i == j || i >= n_ || j >= n_) {
    throw DimensionMismatch("PairGraph::remove_edge: invalid edge");
  }
  if (adj_[i * n_ + j] != 0) {
    adj_[i * n_ + j] = 0;
    adj_[j * n_ + i] = 0;
    --edge_count_;
  }
}

std::vector<Edge> PairGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (Index i = 0; i < n_; ++i) {
    for (Index j = i + 1; j < n_; ++j) {
      if (has_edge(i, j)) out.emplace_back(i, j);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

VolumeMatrix::VolumeMatrix(Index n)
    : values_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))) {}

VolumeMatrix::VolumeMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols()) {
    throw DimensionMismatch("VolumeMatrix: matrix is not square");
  }
  const Eigen::Index n = values_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (values_(i, i) != 0.0) throw ValidationError("VolumeMatrix: nonzero diagonal");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = values_(i, j);
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ValidationError("VolumeMatrix: negative or non-finite volume");
      }
      if (values_(j, i) != v) throw ValidationError("VolumeMatrix: not symmetric");
    }
  }
}

PairGraph VolumeMatrix::support() const {
  PairGraph g(n());
  for (Index i = 0; i < n(); ++i) {
    for (Index j = i + 1; j < n(); ++j) {
      if ((*this)(i, j) > 0.0) g.add_edge(i, j);
    }
  }
  return g;
}

double VolumeMatrix::total() const {
  double sum = 0.0;
  for (Index i = 0; i < n(); ++i) {
    for (Index j = i + 1; j < n(); ++j) sum += (*this)(i, j);
  }
  return sum;
}

// ---------------------------------------------------------------------------

FactorPair::FactorPair(Eigen::VectorXd a, Eigen::VectorXd b) : w1(std::move(a)), w2(std::move(b)) {
  if (w1.size() != w2.size()) throw DimensionMismatch("FactorPair: w1 and w2 differ in length");
}

Eigen::VectorXd FactorPair::stacked() const {
  Eigen::VectorXd x(w1.size() + w2.size());
  x << w1, w2;
  return x;
}

FactorPair FactorPair::from_stacked(const Eigen::VectorXd& x) {
  if (x.size() % 2 != 0) throw DimensionMismatch("FactorPair: odd stacked length");
  const Eigen::Index n = x.size() / 2;
  return FactorPair(x.head(n), x.tail(n));
}

Eigen::MatrixXd reconstruct_k(const FactorPair& factors) {
  const Index n = factors.n();
  if (n < 2) throw InvalidProblem("reconstruct_k: need at least two assets");
  const Eigen::Index sn = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd k(sn, sn);
  for (Eigen::Index i = 0; i < sn; ++i) {
    k(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < sn; ++j) {
      const double v = factors.w1(i) * factors.w1(j) - factors.w2(i) * factors.w2(j);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

double masked_sq_frobenius(const Eigen::MatrixXd& a, const PairGraph& mask) {
  const Index n = mask.n();
  if (static_cast<Index>(a.rows()) != n || static_cast<Index>(a.cols()) != n) {
    throw DimensionMismatch("masked_sq_frobenius: dimension mismatch");
  }
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i != j && mask.has_edge(i, j)) {
        const double v = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        sum += v * v;
      }
    }
  }
  return sum;
}

double covered_volume(const Eigen::MatrixXd& k_star, const PairGraph& g) {
  const Index n = g.n();
  if (static_cast<Index>(k_star.rows()) != n || static_cast<Index>(k_star.cols()) != n) {
    throw DimensionMismatch("covered_volume: dimension mismatch");
  }
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (g.has_edge(i, j)) sum += k_star(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return sum;
}

bool is_connected(const PairGraph& g) {
  if (g.n() <= 1) return true;
  UnionFind uf(g.n());
  for (Index i = 0; i < g.n(); ++i) {
    for (Index j = i + 1; j < g.n(); ++j) {
      if (g.has_edge(i, j) && uf.unite(i, j) && uf.components() == 1) return true;
    }
  }
  return uf.components() == 1;
}

// ---------------------------------------------------------------------------

UnionFind::UnionFind(Index n) : parent_(n), rank_(n, 0), components_(n) {
  std::iota(parent_.begin(), parent_.end(), Index{0});
}

Index UnionFind::find(Index x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool UnionFind::unite(Index x, Index y) {
  x = find(x);
  y = find(y);
  if (x == y) return false;
  if (rank_[x] < rank_[y]) std::swap(x, y);
  parent_[y] = x;
  if (rank_[x] == rank_[y]) ++rank_[x];
  --components_;
  return true;
}

}  // namespace pairflow
