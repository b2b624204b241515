#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pairflow/error.hpp"
#include "pairflow/matcore.hpp"

namespace pairflow {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(PairIndex, RowMajorUpperTriangle) {
  EXPECT_EQ(pair_index(4, 0, 1), 0u);
  EXPECT_EQ(pair_index(4, 0, 3), 2u);
  EXPECT_EQ(pair_index(4, 1, 2), 3u);
  EXPECT_EQ(pair_index(4, 3, 2), 5u);
  for (Index n = 2; n < 9; ++n) {
    for (Index p = 0; p < pair_count(n); ++p) {
      const auto [i, j] = pair_at(n, p);
      EXPECT_LT(i, j);
      EXPECT_EQ(pair_index(n, i, j), p);
    }
  }
  EXPECT_THROW(pair_index(3, 1, 1), DimensionMismatch);
  EXPECT_THROW(pair_at(3, 3), DimensionMismatch);
}

TEST(SymbolTable, NormalizesAndIndexes) {
  SymbolTable t({"btc", " Eth", "USDT"});
  EXPECT_EQ(t[0], "BTC");
  EXPECT_EQ(t[1], "ETH");
  EXPECT_EQ(t.at("usdt"), 2u);
  EXPECT_FALSE(t.find("DOGE").has_value());
  EXPECT_THROW(t.at("DOGE"), ValidationError);
  for (Index i = 0; i < t.size(); ++i) EXPECT_EQ(t.at(t[i]), i);
}

TEST(SymbolTable, RejectsDuplicatesAndEmpty) {
  EXPECT_THROW(SymbolTable({"BTC", "btc"}), ValidationError);
  EXPECT_THROW(SymbolTable({"BTC", " "}), ValidationError);
}

TEST(VolumeMatrix, Validates) {
  MatrixXd a(2, 2);
  a << 0, 1, 2, 0;
  EXPECT_THROW(VolumeMatrix{a}, ValidationError);
  a << 1, 1, 1, 0;
  EXPECT_THROW(VolumeMatrix{a}, ValidationError);
  a << 0, -1, -1, 0;
  EXPECT_THROW(VolumeMatrix{a}, ValidationError);
  EXPECT_THROW(VolumeMatrix{MatrixXd::Zero(2, 3)}, DimensionMismatch);
  a << 0, 4, 4, 0;
  const VolumeMatrix v(a);
  EXPECT_DOUBLE_EQ(v.total(), 4.0);
  EXPECT_EQ(v.support().edge_count(), 1u);
}

TEST(PairGraph, SymmetricEdgeCount) {
  PairGraph g(4);
  g.add_edge(2, 0);
  g.add_edge(0, 2);
  g.add_edge(1, 3);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_TRUE(g.has_edge(0, 2));
  EXPECT_TRUE(g.has_edge(2, 0));
  EXPECT_FALSE(g.has_edge(0, 0));
  g.remove_edge(2, 0);
  EXPECT_EQ(g.edge_count(), 1u);
  EXPECT_THROW(g.add_edge(1, 1), DimensionMismatch);
  EXPECT_EQ(PairGraph::complete(5).edge_count(), 10u);
  const auto edges = PairGraph::from_edges(4, {{3, 1}, {0, 2}}).edges();
  ASSERT_EQ(edges.size(), 2u);
  EXPECT_EQ(edges[0], Edge(0, 2));
  EXPECT_EQ(edges[1], Edge(1, 3));
}

TEST(ReconstructK, Examples) {
  MatrixXd k = reconstruct_k(FactorPair(VectorXd::Map(std::vector<double>{1, 2}.data(), 2), VectorXd::Zero(2)));
  EXPECT_EQ(k(0, 1), 2.0);
  EXPECT_EQ(k(0, 0), 0.0);
  EXPECT_EQ(k(1, 1), 0.0);

  k = reconstruct_k(FactorPair(VectorXd::Zero(2), VectorXd::Ones(2)));
  EXPECT_EQ(k(0, 1), -1.0);

  VectorXd w1(3), w2(3);
  w1 << 2, 1, 1;
  w2 << 0.5, -0.5, 0;
  k = reconstruct_k(FactorPair(w1, w2));
  EXPECT_DOUBLE_EQ(k(0, 1), 2.25);
  EXPECT_DOUBLE_EQ(k(0, 2), 2.0);
  EXPECT_DOUBLE_EQ(k(1, 2), 1.0);

  EXPECT_THROW(reconstruct_k(FactorPair(1)), InvalidProblem);
}

TEST(ReconstructK, BitwiseSymmetric) {
  testing::Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const VectorXd w1 = VectorXd::Random(7);
    const VectorXd w2 = VectorXd::Random(7) * testing::uniform(rng, 0.1, 3.0);
    const MatrixXd k = reconstruct_k(FactorPair(w1, w2));
    EXPECT_TRUE(k == k.transpose());
    EXPECT_TRUE((k.diagonal().array() == 0.0).all());
  }
}

TEST(MaskedSqFrobenius, Examples) {
  MatrixXd a = MatrixXd::Ones(2, 2);
  a.diagonal().setZero();
  EXPECT_EQ(masked_sq_frobenius(a, PairGraph::complete(2)), 2.0);
  EXPECT_EQ(masked_sq_frobenius(a, PairGraph(2)), 0.0);

  MatrixXd b = MatrixXd::Zero(3, 3);
  b(0, 1) = b(1, 0) = 3.0;
  EXPECT_EQ(masked_sq_frobenius(b, PairGraph::complete(3)), 18.0);

  EXPECT_THROW(masked_sq_frobenius(b, PairGraph(2)), DimensionMismatch);
}

TEST(MaskedSqFrobenius, CompleteMaskIsOffDiagonalNorm) {
  MatrixXd a = MatrixXd::Random(6, 6);
  a = (a + a.transpose()).eval();
  a.diagonal().setConstant(5.0);
  MatrixXd off = a;
  off.diagonal().setZero();
  EXPECT_NEAR(masked_sq_frobenius(a, PairGraph::complete(6)), off.squaredNorm(), 1e-12);
}

MatrixXd fixture_k3() {
  MatrixXd k = MatrixXd::Zero(3, 3);
  k(0, 1) = k(1, 0) = 5;
  k(0, 2) = k(2, 0) = 3;
  k(1, 2) = k(2, 1) = 4;
  return k;
}

TEST(CoveredVolume, Examples) {
  const MatrixXd k = fixture_k3();
  EXPECT_EQ(covered_volume(k, PairGraph::complete(3)), 12.0);
  EXPECT_EQ(covered_volume(k, PairGraph(3)), 0.0);
  EXPECT_EQ(covered_volume(k, PairGraph::from_edges(3, {{0, 1}, {1, 2}})), 9.0);
  EXPECT_THROW(covered_volume(k, PairGraph(4)), DimensionMismatch);
}

TEST(CoveredVolume, AdditiveAndMonotone) {
  testing::Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const MatrixXd k = testing::random_symmetric(6, 0.0, 10.0, rng);
    PairGraph a(6), b(6), both(6);
    for (Index p = 0; p < pair_count(6); ++p) {
      const auto [i, j] = pair_at(6, p);
      const double u = testing::uniform(rng, 0.0, 1.0);
      if (u < 0.3) a.add_edge(i, j);
      else if (u < 0.6) b.add_edge(i, j);
      if (u < 0.6) both.add_edge(i, j);
    }
    EXPECT_NEAR(covered_volume(k, both), covered_volume(k, a) + covered_volume(k, b), 1e-12);
    EXPECT_GE(covered_volume(k, both), covered_volume(k, a));
  }
}

TEST(IsConnected, Examples) {
  EXPECT_TRUE(is_connected(PairGraph::from_edges(3, {{0, 1}, {1, 2}})));
  EXPECT_FALSE(is_connected(PairGraph::from_edges(3, {{0, 1}})));
  EXPECT_TRUE(is_connected(PairGraph(1)));
}

TEST(IsConnected, AgreesWithBfsOnAllSmallGraphs) {
  for (Index n = 1; n <= 6; ++n) {
    const Index pairs = pair_count(n);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs); ++mask) {
      PairGraph g(n);
      std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
      for (Index p = 0; p < pairs; ++p) {
        if (!((mask >> p) & 1u)) continue;
        const auto [i, j] = pair_at(n, p);
        g.add_edge(i, j);
        adj[i][j] = adj[j][i] = true;
      }
      ASSERT_EQ(is_connected(g), testing::bfs_connected(adj)) << "n=" << n << " mask=" << mask;
    }
  }
}

TEST(UnionFind, CountsComponents) {
  UnionFind uf(5);
  EXPECT_EQ(uf.components(), 5u);
  EXPECT_TRUE(uf.unite(0, 1));
  EXPECT_TRUE(uf.unite(3, 4));
  EXPECT_FALSE(uf.unite(1, 0));
  EXPECT_EQ(uf.components(), 3u);
  EXPECT_EQ(uf.find(0), uf.find(1));
  EXPECT_NE(uf.find(0), uf.find(3));
}

TEST(FactorPair, StackRoundTrip) {
  VectorXd w1(3), w2(3);
  w1 << 1, 2, 3;
  w2 << -1, 0, 1;
  const FactorPair f(w1, w2);
  const VectorXd x = f.stacked();
  EXPECT_EQ(x(0), 1.0);
  EXPECT_EQ(x(3), -1.0);
  const FactorPair g = FactorPair::from_stacked(x);
  EXPECT_EQ(g.w1, w1);
  EXPECT_EQ(g.w2, w2);
}

}  // namespace
}  // namespace pairflow
