#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "pairflow/error.hpp"
#include "pairflow/eval.hpp"
#include "pairflow/synth.hpp"

namespace pairflow {
namespace {

using Eigen::MatrixXd;

WindowedDataset synthetic_dataset(Index n, int windows, double drift, double noise, std::uint64_t seed) {
  SynthConfig c;
  c.n = n;
  c.windows = windows;
  c.drift = drift;
  c.noise = noise;
  c.seed = seed;
  return build_dataset(to_records(synthesize(c)));
}

std::vector<Index> full_sweep(Index n) {
  std::vector<Index> ms;
  for (Index m = n - 1; m <= pair_count(n); ++m) ms.push_back(m);
  return ms;
}

TEST(Coverage, MonotoneAndCompleteAtFullBudget) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto data = synthetic_dataset(7, 1, 0.0, 0.2, seed);
    const auto ms = full_sweep(7);
    const auto pts = coverage_curve(data, data.windows[0].first, ms, {});
    ASSERT_EQ(pts.size(), ms.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      ASSERT_TRUE(pts[i].error.empty()) << pts[i].error;
      EXPECT_TRUE(pts[i].optimal);
      EXPECT_GE(pts[i].coverage_realized, 0.0);
      EXPECT_LE(pts[i].coverage_realized, 1.0);
      if (i > 0) {
        EXPECT_GE(pts[i].coverage_realized, pts[i - 1].coverage_realized);
      }
    }
    EXPECT_EQ(pts.back().coverage_realized, 1.0);
    EXPECT_DOUBLE_EQ(pts.back().coverage_kstar, 1.0);
  }
}

TEST(Coverage, SinglePairHoldsAllVolume) {
  for (Index n = 3; n <= 6; ++n) {
    MatrixXd v = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    v(1, 2) = v(2, 1) = 42.0;
    WindowedDataset data;
    std::vector<std::string> tick;
    for (Index i = 0; i < n; ++i) tick.push_back("C" + std::to_string(i));
    data.symbols = SymbolTable(tick);
    data.windows.emplace_back("2022-01", VolumeMatrix(v));
    const auto pts = coverage_curve(data, "2022-01", {n - 1}, {});
    ASSERT_TRUE(pts[0].error.empty()) << pts[0].error;
    EXPECT_EQ(pts[0].coverage_realized, 1.0);
    EXPECT_EQ(testing::brute_force_best(v, n - 1).value / 42.0, 1.0);
  }
}

TEST(Coverage, UnknownWindow) {
  const auto data = synthetic_dataset(5, 1, 0.0, 0.0, 0);
  EXPECT_THROW(coverage_curve(data, "1999-01", {4}, {}), EmptyWindow);
  EXPECT_THROW(coverage_curve(data, data.windows[0].first, {3}, {}), InfeasibleBudget);
}

TEST(Retention, IdenticalWindowsGiveOne) {
  const auto data = synthetic_dataset(7, 4, 0.0, 0.0, 5);
  const auto pts = retention_curve(data, {6, 9, 14, 21}, {});
  ASSERT_EQ(pts.size(), 4u);
  for (const auto& p : pts) {
    EXPECT_EQ(p.retention, 1.0);
    EXPECT_EQ(p.transitions, 3u);
    EXPECT_TRUE(p.optimal);
  }
}

TEST(Retention, NeedsTwoWindows) {
  const auto data = synthetic_dataset(5, 1, 0.0, 0.0, 0);
  EXPECT_THROW(retention_curve(data, {4}, {}), InsufficientData);
}

TEST(Retention, MatchesSetIntersectionAndPigeonholeFloor) {
  const auto data = synthetic_dataset(7, 4, 0.5, 0.3, 9);
  const auto ms = full_sweep(7);
  const Evaluation ev = evaluate(data, ms, {});
  ASSERT_EQ(ev.retention.size(), ms.size());
  const Index pairs = pair_count(7);
  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    const Index m = ms[mi];
    double sum = 0.0;
    for (std::size_t w = 0; w + 1 < data.windows.size(); ++w) {
      const auto a = ev.graphs[w][mi].edges();
      const auto b = ev.graphs[w + 1][mi].edges();
      std::set<Edge> sa(a.begin(), a.end());
      Index shared = 0;
      for (const auto& e : b) shared += sa.count(e);
      sum += static_cast<double>(shared) / static_cast<double>(m);
    }
    const double expect = sum / static_cast<double>(data.windows.size() - 1);
    const RetentionPoint& rp = ev.retention[mi];
    EXPECT_DOUBLE_EQ(rp.retention, expect);
    const double floor = std::max(0.0, (2.0 * static_cast<double>(m) - static_cast<double>(pairs)) /
                                           static_cast<double>(m));
    EXPECT_GE(rp.retention, floor - 1e-15);
    EXPECT_LE(rp.retention, 1.0);
  }
  EXPECT_EQ(ev.retention.back().retention, 1.0);
  for (const auto& row : ev.graphs) {
    for (std::size_t mi = 0; mi < ms.size(); ++mi) EXPECT_EQ(row[mi].edge_count(), ms[mi]);
  }
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
  const auto data = synthetic_dataset(8, 3, 0.3, 0.2, 2);
  const std::vector<Index> ms = {7, 10, 14, 28};
  EvalConfig one, four;
  four.threads = 4;
  const Evaluation a = evaluate(data, ms, one);
  const Evaluation b = evaluate(data, ms, four);
  ASSERT_EQ(a.coverage.size(), b.coverage.size());
  for (std::size_t i = 0; i < a.coverage.size(); ++i) {
    EXPECT_EQ(a.coverage[i].coverage_realized, b.coverage[i].coverage_realized);
    EXPECT_EQ(a.coverage[i].coverage_kstar, b.coverage[i].coverage_kstar);
    EXPECT_EQ(a.coverage[i].nodes_expanded, b.coverage[i].nodes_expanded);
  }
  for (std::size_t i = 0; i < a.retention.size(); ++i) EXPECT_EQ(a.retention[i].retention, b.retention[i].retention);
}

TEST(Evaluate, NormalizedBudget) {
  const auto data = synthetic_dataset(6, 2, 0.0, 0.0, 1);
  EvalConfig cfg;
  cfg.reference_n = 12;
  const Evaluation ev = evaluate(data, {5, 10}, cfg);
  ASSERT_TRUE(ev.coverage[0].m_normalized.has_value());
  EXPECT_DOUBLE_EQ(*ev.coverage[0].m_normalized, 10.0);
  EXPECT_DOUBLE_EQ(*ev.retention[1].m_normalized, 20.0);
  cfg.reference_n = 0;
  EXPECT_THROW(evaluate(data, {5}, cfg), InfeasibleConfig);
}

TEST(Evaluate, RejectsInfeasibleBudget) {
  const auto data = synthetic_dataset(6, 2, 0.0, 0.0, 1);
  EXPECT_THROW(evaluate(data, {4}, {}), InfeasibleBudget);
  EXPECT_THROW(evaluate(data, {16}, {}), InfeasibleBudget);
}

TEST(DiffPairs, Examples) {
  const SymbolTable t({"A", "B", "C"});
  const PairGraph g = PairGraph::from_edges(3, {{0, 1}});
  const PairDiff same = diff_pairs(g, g, t);
  EXPECT_TRUE(same.removed.empty());
  EXPECT_TRUE(same.added.empty());

  const PairDiff d = diff_pairs(g, PairGraph::from_edges(3, {{0, 2}}), t);
  ASSERT_EQ(d.removed.size(), 1u);
  ASSERT_EQ(d.added.size(), 1u);
  EXPECT_EQ(d.removed[0], std::make_pair(std::string("A"), std::string("B")));
  EXPECT_EQ(d.added[0], std::make_pair(std::string("A"), std::string("C")));

  EXPECT_THROW(diff_pairs(g, PairGraph(4), t), DimensionMismatch);
}

TEST(DiffPairs, MatchesSetDifference) {
  testing::Rng rng(6);
  const SymbolTable t({"ZEC", "BTC", "ADA", "XRP", "ETH"});
  for (int trial = 0; trial < 50; ++trial) {
    PairGraph a(5), b(5);
    std::set<std::pair<std::string, std::string>> sa, sb;
    for (Index p = 0; p < 10; ++p) {
      const auto [i, j] = pair_at(5, p);
      const auto named = std::minmax(t[i], t[j]);
      if (rng() % 2) {
        a.add_edge(i, j);
        sa.insert(named);
      }
      if (rng() % 2) {
        b.add_edge(i, j);
        sb.insert(named);
      }
    }
    std::vector<std::pair<std::string, std::string>> removed, added;
    std::set_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(removed));
    std::set_difference(sb.begin(), sb.end(), sa.begin(), sa.end(), std::back_inserter(added));
    const PairDiff d = diff_pairs(a, b, t);
    EXPECT_EQ(d.removed, removed);
    EXPECT_EQ(d.added, added);
    if (a.edge_count() == b.edge_count()) {
      EXPECT_EQ(d.removed.size(), d.added.size());
    }
  }
}

}  // namespace
}  // namespace pairflow
