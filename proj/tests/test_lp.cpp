#include <gtest/gtest.h>

#include "dualgame/lp.hpp"
#include "dualgame/simplex_grid.hpp"

using namespace dualgame;

TEST(Lp, SmallMaximization)
{
   // max 3x + 2y  s.t. x + y <= 4, x + 3y <= 6, x <= 3
   lp::Problem p(lp::Sense::kMaximize);
   auto x = p.add_variable(3.0);
   auto y = p.add_variable(2.0);
   p.add_constraint({{x, 1}, {y, 1}}, lp::Relation::kLessEqual, 4);
   p.add_constraint({{x, 1}, {y, 3}}, lp::Relation::kLessEqual, 6);
   p.add_constraint({{x, 1}}, lp::Relation::kLessEqual, 3);
   auto s = p.solve();
   ASSERT_TRUE(s.optimal());
   EXPECT_NEAR(s.objective, 11.0, 1e-9);
   EXPECT_NEAR(s.x[x], 3.0, 1e-9);
   EXPECT_NEAR(s.x[y], 1.0, 1e-9);
}

TEST(Lp, EqualitiesFreeVariablesAndNegativeRhs)
{
   // min t  s.t. t >= -2 - u, t >= u - 5, u free, t free  -> u = 1.5, t = -3.5
   lp::Problem p;
   auto u = p.add_variable(0.0, true);
   auto t = p.add_variable(1.0, true);
   p.add_constraint({{t, 1}, {u, 1}}, lp::Relation::kGreaterEqual, -2);
   p.add_constraint({{t, 1}, {u, -1}}, lp::Relation::kGreaterEqual, -5);
   auto s = p.solve();
   ASSERT_TRUE(s.optimal());
   EXPECT_NEAR(s.objective, -3.5, 1e-9);
   EXPECT_NEAR(s.x[u], 1.5, 1e-9);
}

TEST(Lp, DetectsInfeasibleAndUnbounded)
{
   lp::Problem a;
   auto x = a.add_variable(1.0);
   a.add_constraint({{x, 1}}, lp::Relation::kLessEqual, 1);
   a.add_constraint({{x, 1}}, lp::Relation::kGreaterEqual, 2);
   EXPECT_EQ(a.solve().status, lp::Status::kInfeasible);
   EXPECT_THROW(lp::solve_or_throw(a, "test"), LpError);

   lp::Problem b;
   auto y = b.add_variable(-1.0);
   b.add_constraint({{y, 1}}, lp::Relation::kGreaterEqual, 1);
   EXPECT_EQ(b.solve().status, lp::Status::kUnbounded);
}

TEST(Lp, RedundantEqualityRows)
{
   lp::Problem p;
   auto x = p.add_variable(1.0);
   auto y = p.add_variable(2.0);
   p.add_constraint({{x, 1}, {y, 1}}, lp::Relation::kEqual, 1);
   p.add_constraint({{x, 2}, {y, 2}}, lp::Relation::kEqual, 2);
   auto s = p.solve();
   ASSERT_TRUE(s.optimal());
   EXPECT_NEAR(s.objective, 1.0, 1e-9);
}

TEST(Lp, MatrixGameValue)
{
   // matching pennies: value 0, uniform strategy
   lp::Problem p(lp::Sense::kMaximize);
   auto v = p.add_variable(1.0, true);
   auto a = p.add_variable();
   auto b = p.add_variable();
   p.add_constraint({{a, 1}, {b, 1}}, lp::Relation::kEqual, 1);
   p.add_constraint({{v, 1}, {a, -1}, {b, 1}}, lp::Relation::kLessEqual, 0);
   p.add_constraint({{v, 1}, {a, 1}, {b, -1}}, lp::Relation::kLessEqual, 0);
   for(std::size_t run : {0u, 32u}) {
      lp::Options o;
      o.degenerate_run = run;
      auto s = p.solve(o);
      ASSERT_TRUE(s.optimal());
      EXPECT_NEAR(s.objective, 0.0, 1e-12);
      EXPECT_NEAR(s.x[a], 0.5, 1e-12);
   }
}

TEST(SimplexGrid, SizeOrderAndMesh)
{
   EXPECT_EQ(simplex_grid_size(3, 4), 15u);
   auto g = simplex_grid(3, 4);
   ASSERT_EQ(g.size(), 15u);
   EXPECT_EQ(g.front(), (Vector{1.0, 0.0, 0.0}));
   EXPECT_EQ(g.back(), (Vector{0.0, 0.0, 1.0}));
   for(const auto& p : g)
      EXPECT_TRUE(is_probability(p));
   EXPECT_DOUBLE_EQ(simplex_grid_mesh(2, 8), 1.0 / 8.0);
   EXPECT_THROW(simplex_grid(4, 40, 100), ResourceError);
}

TEST(SimplexGrid, RoundingStaysWithinMesh)
{
   for(std::size_t dim : {2u, 3u, 4u})
      for(double a = 0.0; a <= 1.0; a += 0.037) {
         Vector p(dim, (1.0 - a) / static_cast<double>(dim - 1));
         p[0] = a;
         Vector q = round_to_grid(p, 5);
         EXPECT_TRUE(is_probability(q, 1e-12));
         EXPECT_LE(l1_distance(p, q), simplex_grid_mesh(dim, 5) + 1e-12);
      }
}

TEST(SimplexGrid, ProductOrder)
{
   std::vector<std::vector<std::size_t>> seen;
   for_each_product({2, 3}, [&](const auto& idx) { seen.push_back(idx); });
   ASSERT_EQ(seen.size(), 6u);
   EXPECT_EQ(seen[1], (std::vector<std::size_t>{0, 1}));
   EXPECT_EQ(seen[3], (std::vector<std::size_t>{1, 0}));
}
