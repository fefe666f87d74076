#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace palmplan;
using namespace palmplan::oracle;

TEST(Dubins, StraightAhead) {
  const auto p = shortest_dubins({0, 0, 0}, {0.3, 0, 0}, 0.05);
  EXPECT_NEAR(p.length(), 0.3, 1e-12);
  EXPECT_NEAR(p.lengths[1], 0.3, 1e-12);
  EXPECT_EQ(std::string(to_string(p.word)).at(1), 'S');
}

TEST(Dubins, EndpointsReached) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-0.5, 0.5), yaw(-kPi, kPi);
  for (int i = 0; i < 500; ++i) {
    const PlanarPose a{u(rng), u(rng), yaw(rng)}, b{u(rng), u(rng), yaw(rng)};
    const double r = 0.02 + 0.2 * (u(rng) + 0.5);
    for (int w = 0; w < 6; ++w) {
      const auto p = dubins_path(a, b, r, static_cast<DubinsWord>(w));
      if (!p) continue;
      const auto e = p->end();
      EXPECT_LT(std::hypot(e.x - b.x, e.y - b.y), 1e-9) << to_string(p->word);
      EXPECT_LT(std::abs(wrap_angle(e.yaw - b.yaw)), 1e-9);
      for (double l : p->lengths) EXPECT_GE(l, 0.0);
    }
  }
}

TEST(Dubins, MatchesGeometricOracle) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-0.4, 0.4), yaw(-kPi, kPi);
  for (int i = 0; i < 25; ++i) {
    const PlanarPose a{u(rng), u(rng), yaw(rng)}, b{u(rng), u(rng), yaw(rng)};
    const double r = i % 2 ? 0.024 : 0.15;
    EXPECT_NEAR(shortest_dubins(a, b, r).length(), oracle_length(a, b, r), 1e-6) << "case " << i;
  }
}

TEST(Dijkstra, SmallExample) {
  const std::vector<WeightedEdge> e = {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 2.5}, {2, 3, 0.5}};
  const auto p = dijkstra(4, e, 0, 3);
  ASSERT_TRUE(p.found);
  EXPECT_DOUBLE_EQ(p.cost, 2.5);
  EXPECT_EQ(p.edges, (std::vector<int>{0, 1, 3}));
  EXPECT_FALSE(dijkstra(4, e, 3, 0).found);
  const auto self = dijkstra(4, e, 2, 2);
  EXPECT_TRUE(self.found);
  EXPECT_TRUE(self.edges.empty());
}

TEST(Dijkstra, TieBreakPrefersEarlierEdges) {
  const std::vector<WeightedEdge> e = {{0, 2, 2.0}, {0, 1, 1.0}, {1, 2, 1.0}};
  EXPECT_EQ(dijkstra(3, e, 0, 2).edges, (std::vector<int>{0}));
}

TEST(Dijkstra, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> cost(0.1, 5.0), u(0.0, 1.0);
  for (int g = 0; g < 50; ++g) {
    const int n = 3 + g % 10;
    std::vector<WeightedEdge> e;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && u(rng) < 0.3) e.push_back({i, j, cost(rng)});
    const double best = exhaustive_shortest(n, e);
    const auto p = dijkstra(n, e, 0, n - 1);
    EXPECT_EQ(p.found, std::isfinite(best));
    if (p.found) {
      EXPECT_NEAR(p.cost, best, 1e-12);
      double sum = 0.0;
      for (int ei : p.edges) sum += e[ei].cost;
      EXPECT_NEAR(sum, p.cost, 1e-12);
    }
  }
}
