#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "pairflow/bnb.hpp"
#include "pairflow/error.hpp"

namespace pairflow {
namespace {

using Eigen::MatrixXd;

MatrixXd fixture_k3() {
  MatrixXd k = MatrixXd::Zero(3, 3);
  k(0, 1) = k(1, 0) = 5;
  k(0, 2) = k(2, 0) = 3;
  k(1, 2) = k(2, 1) = 4;
  return k;
}

SearchConfig config_for(Index m, BoundRule rule = BoundRule::Spanning) {
  SearchConfig c;
  c.m = m;
  c.bound_rule = rule;
  return c;
}

SearchNode node_from(const std::vector<int>& slots) {
  SearchNode node;
  for (int s : slots) {
    node.assignment.push_back(static_cast<Slot>(s));
    if (s == 0) ++node.n_present;
    if (s == 1) ++node.n_absent;
  }
  return node;
}

TEST(Greedy, Examples) {
  const PairGraph g = greedy_incumbent(fixture_k3(), 2);
  EXPECT_EQ(g, PairGraph::from_edges(3, {{0, 1}, {1, 2}}));
  EXPECT_EQ(covered_volume(fixture_k3(), g), 9.0);

  testing::Rng rng(1);
  const MatrixXd k = testing::random_symmetric(5, 0.0, 1.0, rng);
  EXPECT_EQ(greedy_incumbent(k, 10), PairGraph::complete(5));

  // Star around asset 0 plus the heaviest remaining edge (2,3).
  MatrixXd star = MatrixXd::Zero(4, 4);
  for (int j = 1; j < 4; ++j) star(0, j) = star(j, 0) = 10.0 + j;
  star(1, 2) = star(2, 1) = 1.0;
  star(2, 3) = star(3, 2) = 2.0;
  star(1, 3) = star(3, 1) = 0.5;
  const PairGraph gs = greedy_incumbent(star, 4);
  EXPECT_EQ(gs, PairGraph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}, {2, 3}}));
  EXPECT_EQ(covered_volume(star, gs), testing::brute_force_best(star, 4).value);

  EXPECT_THROW(greedy_incumbent(fixture_k3(), 1), InfeasibleBudget);
}

TEST(Greedy, AlwaysConnectedWithMEdges) {
  testing::Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const Index n = 2 + static_cast<Index>(t % 7);
    const MatrixXd k = testing::random_symmetric(n, -1.0, 10.0, rng);
    for (Index m = n - 1; m <= pair_count(n); ++m) {
      const PairGraph g = greedy_incumbent(k, m);
      EXPECT_EQ(g.edge_count(), m);
      EXPECT_TRUE(is_connected(g));
    }
  }
}

TEST(UpperBound, Examples) {
  const MatrixXd k = fixture_k3();
  const SearchNode full = node_from({0, 1, 0});
  EXPECT_EQ(upper_bound(full, k, 2), 9.0);
  EXPECT_EQ(upper_bound(SearchNode::root(3), k, 2), 9.0);
  EXPECT_EQ(upper_bound(SearchNode::root(3), k, 1), 5.0);

  // Negative values are never picked, but a PRESENT negative edge counts.
  MatrixXd neg = k;
  neg(0, 2) = neg(2, 0) = -3;
  neg(1, 2) = neg(2, 1) = -4;
  EXPECT_EQ(upper_bound(SearchNode::root(3), neg, 2), 5.0);
  EXPECT_EQ(upper_bound(node_from({2, 0, 2}), neg, 2), 2.0);
}

TEST(UpperBound, SoundOnRandomNodes) {
  testing::Rng rng(17);
  for (int t = 0; t < 300; ++t) {
    const Index n = 4 + static_cast<Index>(t % 2);
    const Index pairs = pair_count(n);
    const MatrixXd k = testing::random_symmetric(n, -1.0, 10.0, rng);
    const Index m = n - 1 + static_cast<Index>(rng() % (pairs - n + 2));
    std::vector<int> slots(pairs);
    for (auto& s : slots) s = static_cast<int>(rng() % 3);
    const auto best = testing::brute_force_completion(k, m, slots);
    if (!best.feasible) continue;
    EXPECT_GE(upper_bound(node_from(slots), k, m), best.value - 1e-12);
  }
}

TEST(ForceFill, Examples) {
  SearchNode a = force_fill(node_from({0, 0, 2}), 2);
  EXPECT_EQ(a.assignment, node_from({0, 0, 1}).assignment);
  EXPECT_EQ(a.n_absent, 1u);

  SearchNode b = force_fill(node_from({1, 2, 2}), 2);
  EXPECT_EQ(b.assignment, node_from({1, 0, 0}).assignment);
  EXPECT_EQ(b.n_present, 2u);

  const SearchNode slack = node_from({0, 2, 2, 2, 1, 2});
  EXPECT_EQ(force_fill(slack, 3).assignment, slack.assignment);
}

TEST(Branch, RootSplitsOnLargestValue) {
  const auto [with, without] = branch(SearchNode::root(3), fixture_k3(), config_for(2));
  EXPECT_EQ(with.assignment[0], Slot::Present);
  EXPECT_EQ(without.assignment[0], Slot::Absent);
  EXPECT_FALSE(with.dead);
  EXPECT_FALSE(without.dead);
  // Dropping (0,1) forces the other two edges in.
  EXPECT_TRUE(without.complete());
  EXPECT_EQ(without.ub, 7.0);
  EXPECT_EQ(without.lb, 7.0);
  EXPECT_EQ(with.ub, 9.0);
}

TEST(Branch, FirstUndecidedRule) {
  MatrixXd k = fixture_k3();
  k(1, 2) = k(2, 1) = 50;
  SearchConfig c = config_for(2);
  c.branch_rule = BranchRule::FirstUndecided;
  EXPECT_EQ(branch(SearchNode::root(3), k, c).first.assignment[0], Slot::Present);
  c.branch_rule = BranchRule::LargestValue;
  EXPECT_EQ(branch(SearchNode::root(3), k, c).first.assignment[2], Slot::Present);
}

TEST(Branch, DisconnectedChildIsDead) {
  // n=4: (0,1) and (0,2) absent, (0,3) undecided; dropping it isolates 0.
  MatrixXd k = MatrixXd::Ones(4, 4);
  k.diagonal().setZero();
  k(0, 3) = k(3, 0) = 9;
  const SearchNode node = node_from({1, 1, 2, 2, 2, 2});
  SearchConfig c = config_for(3);
  const auto [with, without] = branch(node, k, c);
  EXPECT_EQ(with.assignment[2], Slot::Present);
  EXPECT_FALSE(with.dead);
  EXPECT_TRUE(without.dead);
}

TEST(Branch, BudgetExhaustionFillsChild) {
  const auto [with, without] = branch(node_from({0, 2, 2}), fixture_k3(), config_for(2));
  EXPECT_TRUE(with.complete());
  EXPECT_EQ(with.n_present, 2u);
  EXPECT_EQ(with.n_absent, 1u);
  EXPECT_EQ(with.ub, with.lb);
  EXPECT_EQ(with.ub, 9.0);
  // Dropping (1,2) leaves only one absent slot, so the rest is forced in.
  EXPECT_TRUE(without.complete());
  EXPECT_EQ(without.n_present, 2u);
  EXPECT_EQ(without.ub, 8.0);
}

TEST(Branch, ThrowsWithoutUndecided) {
  EXPECT_THROW(branch(node_from({0, 0, 1}), fixture_k3(), config_for(2)), InternalError);
}

TEST(ExpandsBefore, HeapOrder) {
  SearchNode a = node_from({0, 2, 2});
  SearchNode b = node_from({1, 2, 2});
  a.ub = 5;
  b.ub = 6;
  EXPECT_TRUE(expands_before(b, a));
  EXPECT_FALSE(expands_before(a, b));
  b.ub = 5;
  EXPECT_TRUE(expands_before(a, b));  // PRESENT sorts before ABSENT
  SearchNode c = node_from({1, 0, 2});
  c.ub = 5;
  EXPECT_TRUE(expands_before(c, a));  // fewer undecided wins
  EXPECT_FALSE(expands_before(a, a));
}

TEST(Search, Example) {
  const SearchResult r = search(fixture_k3(), config_for(2));
  EXPECT_TRUE(r.optimal);
  EXPECT_EQ(r.objective, 9.0);
  EXPECT_EQ(r.graph, PairGraph::from_edges(3, {{0, 1}, {1, 2}}));
}

TEST(Search, CompleteBudgetKeepsNegativeEdges) {
  testing::Rng rng(4);
  const MatrixXd k = testing::random_symmetric(5, -5.0, 5.0, rng);
  const SearchResult r = search(k, config_for(10));
  EXPECT_EQ(r.graph, PairGraph::complete(5));
  EXPECT_NEAR(r.objective, k.sum() / 2.0, 1e-12);
}

TEST(Search, RejectsBadInput) {
  EXPECT_THROW(search(fixture_k3(), config_for(1)), InfeasibleBudget);
  EXPECT_THROW(search(fixture_k3(), config_for(4)), InfeasibleBudget);
  MatrixXd asym = fixture_k3();
  asym(0, 1) = 1;
  EXPECT_THROW(search(asym, config_for(2)), ValidationError);
  SearchConfig c = config_for(2);
  c.node_cap = 0;
  EXPECT_THROW(search(fixture_k3(), c), InfeasibleConfig);
}

class SearchBruteForce : public ::testing::TestWithParam<std::tuple<int, BoundRule, BranchRule>> {};

TEST_P(SearchBruteForce, MatchesEnumeration) {
  const auto [n_int, bound, branch_rule] = GetParam();
  const auto n = static_cast<Index>(n_int);
  testing::Rng rng(100 + n);
  for (int t = 0; t < 20; ++t) {
    const MatrixXd k = testing::random_symmetric(n, -1.0, 10.0, rng);
    for (Index m = n - 1; m <= pair_count(n); ++m) {
      SearchConfig c = config_for(m, bound);
      c.branch_rule = branch_rule;
      const SearchResult r = search(k, c);
      const auto ref = testing::brute_force_best(k, m);
      ASSERT_TRUE(r.optimal);
      EXPECT_NEAR(r.objective, ref.value, 1e-9) << "n=" << n << " m=" << m << " t=" << t;
      EXPECT_EQ(r.graph.edge_count(), m);
      EXPECT_TRUE(is_connected(r.graph));
      EXPECT_DOUBLE_EQ(r.objective, covered_volume(k, r.graph));
    }
  }
}

INSTANTIATE_TEST_SUITE_P(SmallGraphs, SearchBruteForce,
                         ::testing::Combine(::testing::Values(4, 5, 6),
                                            ::testing::Values(BoundRule::TopRemaining, BoundRule::Spanning),
                                            ::testing::Values(BranchRule::LargestValue, BranchRule::FirstUndecided)));

TEST(Search, ExpandedBoundsAreSoundAndNonIncreasing) {
  testing::Rng rng(77);
  for (int t = 0; t < 40; ++t) {
    const Index n = 4 + static_cast<Index>(t % 2);
    const MatrixXd k = testing::random_symmetric(n, -1.0, 10.0, rng);
    for (Index m = n - 1; m <= pair_count(n); ++m) {
      for (BoundRule rule : {BoundRule::TopRemaining, BoundRule::Spanning}) {
        SearchConfig c = config_for(m, rule);
        double last = std::numeric_limits<double>::infinity();
        int violations = 0;
        c.on_expand = [&](const SearchNode& node) {
          EXPECT_TRUE(node.visited);
          if (node.ub > last) ++violations;
          last = node.ub;
          std::vector<int> slots;
          for (Slot s : node.assignment) slots.push_back(static_cast<int>(s));
          const auto best = testing::brute_force_completion(k, m, slots);
          if (best.feasible && node.ub < best.value - 1e-9) ++violations;
          if (node.n_present > m || node.n_absent > pair_count(n) - m) ++violations;
        };
        search(k, c);
        EXPECT_EQ(violations, 0) << "n=" << n << " m=" << m;
      }
    }
  }
}

TEST(Search, ChildBoundsAreSound) {
  testing::Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const Index n = 5;
    const MatrixXd k = testing::random_symmetric(n, -1.0, 10.0, rng);
    const Index m = 4 + static_cast<Index>(rng() % 7);
    std::vector<int> slots(pair_count(n));
    for (auto& s : slots) s = (rng() % 4 == 0) ? static_cast<int>(rng() % 2) : 2;
    SearchNode node = node_from(slots);
    if (node.n_present > m || node.n_absent > pair_count(n) - m || node.complete()) continue;
    for (BoundRule rule : {BoundRule::TopRemaining, BoundRule::Spanning}) {
      const auto [a, b] = branch(node, k, config_for(m, rule));
      for (const SearchNode* child : {&a, &b}) {
        std::vector<int> cs;
        for (Slot s : child->assignment) cs.push_back(static_cast<int>(s));
        const auto best = testing::brute_force_completion(k, m, cs);
        if (child->dead) {
          EXPECT_FALSE(best.feasible);
        } else if (best.feasible) {
          EXPECT_GE(child->ub, best.value - 1e-9);
          EXPECT_GE(child->ub, child->lb);
        }
      }
    }
  }
}

TEST(Search, MonotoneInBudgetForNonnegativeValues) {
  testing::Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const MatrixXd k = testing::random_symmetric(7, 0.0, 10.0, rng);
    double last = -1.0;
    for (Index m = 6; m <= 21; ++m) {
      const SearchResult r = search(k, config_for(m));
      ASSERT_TRUE(r.optimal);
      EXPECT_GE(r.objective, last);
      last = r.objective;
    }
  }
}

TEST(Search, NodeCapReturnsIncumbent) {
  testing::Rng rng(9);
  // Find an instance the greedy incumbent does not settle at the root.
  MatrixXd k;
  SearchConfig c = config_for(12, BoundRule::TopRemaining);
  do {
    k = testing::random_symmetric(8, 0.0, 1.0, rng);
  } while (search(k, c).nodes_expanded < 2);
  c.node_cap = 1;
  const SearchResult r = search(k, c);
  EXPECT_FALSE(r.optimal);
  EXPECT_EQ(r.nodes_expanded, 1u);
  EXPECT_EQ(r.graph.edge_count(), 12u);
  EXPECT_TRUE(is_connected(r.graph));
}

TEST(Search, TieBreakKeepsObjective) {
  MatrixXd k = MatrixXd::Ones(5, 5);
  k.diagonal().setZero();
  testing::Rng rng(10);
  const MatrixXd tie = testing::random_symmetric(5, 0.0, 1.0, rng);
  const SearchResult plain = search(k, config_for(6));
  const SearchResult broken = search(k, config_for(6), &tie);
  EXPECT_EQ(plain.objective, broken.objective);
  EXPECT_EQ(broken.graph.edge_count(), 6u);
  EXPECT_TRUE(is_connected(broken.graph));
}

TEST(Search, Deterministic) {
  testing::Rng rng(12);
  const MatrixXd k = testing::random_symmetric(9, -1.0, 10.0, rng);
  const SearchResult a = search(k, config_for(14));
  const SearchResult b = search(k, config_for(14));
  EXPECT_EQ(a.graph, b.graph);
  EXPECT_EQ(a.nodes_expanded, b.nodes_expanded);
  EXPECT_EQ(a.objective, b.objective);
}

}  // namespace
}  // namespace pairflow
