#include <gtest/gtest.h>

#include <random>

#include "dualgame/oracle.hpp"
#include "fixtures.hpp"

using namespace dualgame;
using namespace fixtures;

namespace {

JointBelief half_prior()
{
   Matrix pi(2, 1);
   pi(0, 0) = pi(1, 0) = 0.5;
   return JointBelief(pi);
}

}  // namespace

TEST(Oracle, MatchingPenniesEveryHorizon)
{
   auto g = matching_pennies();
   JointBelief pi(Matrix(1, 1, 1.0));
   for(std::size_t n = 1; n <= 3; ++n) {
      auto sol = primal_value(g, pi, Evaluation::uniform(n));
      EXPECT_NEAR(sol.value, 0.0, 1e-9);
      EXPECT_NEAR(sol.value_player2, 0.0, 1e-9);
   }
}

TEST(Oracle, HalfExample)
{
   auto g = half_game();
   auto sol = primal_value(g, half_prior(), Evaluation::uniform(1));
   EXPECT_NEAR(sol.value, 0.5, 1e-9);
   EXPECT_NEAR(sol.s1.at(0, 0, 0)[0], 1.0, 1e-9);
   EXPECT_NEAR(sol.s1.at(1, 0, 0)[1], 1.0, 1e-9);
   EXPECT_NEAR(primal_value_only(g, half_prior(), Evaluation::uniform(1), AuxWeight{{0.0, 0.0}}), 0.0, 1e-12);
}

TEST(Oracle, BestResponseAgainstColumnOne)
{
   auto g = half_game();
   BehaviorStrategy t(1, 2, 2, 2, 1);
   t.set(0, 0, 0, Vector{1.0, 0.0});
   auto br = best_response_value(g, half_prior(), Evaluation::uniform(1), t);
   EXPECT_NEAR(br.value, 0.5, 1e-12);
   EXPECT_DOUBLE_EQ(br.reply.at(0, 0, 0)[0], 1.0);
}

TEST(Oracle, LpStrategiesAreNearlyUnexploitable)
{
   std::mt19937_64 rng(7);
   for(int rep = 0; rep < 4; ++rep) {
      auto g = random_game(rng, 2, 2, 2, 2);
      auto pi = random_belief(rng, 2, 2);
      Evaluation theta({0.6, 0.4});
      auto sol = primal_value(g, pi, theta);
      auto br = best_response_value(g, pi, theta, sol.s2);
      EXPECT_LE(br.value - sol.value, 1e-7);
      EXPECT_GE(br.value - sol.value, -1e-9);
      // and the value is what the optimal pair earns
      EXPECT_NEAR(payoff_primal(g, pi, sol.s1, sol.s2, theta), sol.value, 1e-7);
      // random strategies are weakly worse for player 2
      auto rnd = random_behavior(rng, 2, 2, 2, 2, 2);
      EXPECT_GE(best_response_value(g, pi, theta, rnd).value, sol.value - 1e-9);
   }
}

TEST(Oracle, ConcaveAndLipschitzInP)
{
   std::mt19937_64 rng(11);
   auto g = random_game(rng, 2, 2, 2, 2);
   Matrix Q = random_stochastic(rng, 2, 2);
   Evaluation theta({0.5, 0.5});
   auto model = primal_value_model(g, Q, AuxWeight::ones(2), theta, 4);
   const auto& s = model.samples();
   for(std::size_t a = 0; a < s.size(); ++a)
      for(std::size_t b = a + 1; b < s.size(); ++b)
         for(double lam : {0.25, 0.5, 0.75}) {
            Vector p(2);
            for(std::size_t k = 0; k < 2; ++k)
               p[k] = lam * s[a].point[k] + (1 - lam) * s[b].point[k];
            const double mid = primal_value_only(g, Disintegration::product(p, Q), theta, AuxWeight::ones(2));
            EXPECT_GE(mid, lam * s[a].value + (1 - lam) * s[b].value - 1e-9);
         }
}

TEST(Oracle, PayoffShiftAndTruncation)
{
   std::mt19937_64 rng(3);
   auto g = random_game(rng, 2, 2, 2, 2);
   auto pi = random_belief(rng, 2, 2);
   std::vector<double> shifted = g.tensor();
   for(double& v : shifted)
      v += 0.75;
   GameSpec gs(2, 2, 2, 2, shifted);
   Evaluation theta({0.5, 0.3, 0.2});
   EXPECT_NEAR(primal_value(gs, pi, theta).value, primal_value(g, pi, theta).value + 0.75, 1e-8);

   auto t = truncate(theta.weights(), 2);
   const double full = primal_value(g, pi, theta).value;
   const double cut = t.scale() * primal_value(g, pi, t.normalized).value;
   EXPECT_LE(std::abs(full - cut), t.error_bound(g) + 1e-9);
}

TEST(Oracle, SequenceCap)
{
   auto g = GameSpec(2, 2, 2, 2, std::vector<double>(16, 1.0));
   JointBelief pi(Matrix(2, 2, 0.25));
   EXPECT_THROW(primal_value(g, pi, Evaluation::uniform(6)), ResourceError);
   OracleOptions o;
   o.sequence_cap = 50;
   EXPECT_THROW(primal_value(g, pi, Evaluation::uniform(3), o), ResourceError);
}

TEST(Oracle, DirectDualBracketsExactDual)
{
   std::mt19937_64 rng(5);
   for(int rep = 0; rep < 3; ++rep) {
      auto g = random_game(rng, 2, 2, 2, 2);
      Matrix Q = random_stochastic(rng, 2, 2);
      AuxWeight z{{1.0, 0.5}};
      Evaluation theta({0.7, 0.3});
      Vector x{0.2, -0.1};
      auto exact = dual_value_exact(g, x, Q, z, theta);
      auto direct = dual_value_direct(g, x, Q, z, theta, 8);
      EXPECT_LE(direct.value, exact.value + 1e-8);
      EXPECT_LE(exact.value, direct.value + direct.error_bound + 1e-8);
      // translation
      Vector y{x[0] + 0.3, x[1] + 0.3};
      EXPECT_NEAR(dual_value_direct(g, y, Q, z, theta, 8).value, direct.value - 0.3, 1e-12);
      EXPECT_NEAR(dual_value_exact(g, y, Q, z, theta).value, exact.value - 0.3, 1e-8);
   }
}

TEST(Oracle, SingleStageDualAtZeroIsMaxValue)
{
   auto g = half_game();
   Matrix Q(2, 1, 1.0);
   auto d = dual_value_direct(g, Vector{0.0, 0.0}, Q, AuxWeight::ones(2), Evaluation::uniform(1), 8);
   double best = -1e300;
   for(const auto& s : d.conjugate.model.pieces())
      best = std::max(best, s.intercept);
   EXPECT_DOUBLE_EQ(d.value, best);
   EXPECT_NEAR(d.value, 0.5, 1e-9);  // v1 is p(1-p)... maximized at p = 1/2 here
}

TEST(Oracle, RecursionCheck)
{
   auto g = half_game();
   Matrix pi(2, 1);
   pi(0, 0) = pi(1, 0) = 0.5;
   OracleOptions o;
   o.strategy_grid = 8;
   auto rc = primal_recursion_check(g, JointBelief(pi), Evaluation({0.5, 0.5}), o);
   EXPECT_TRUE(rc.holds) << rc.maxmin << " " << rc.minmax << " " << rc.oracle_value << " " << rc.bound;
   EXPECT_LE(rc.maxmin, rc.minmax + 1e-12);

   auto one = primal_recursion_check(g, JointBelief(pi), Evaluation::uniform(1), o);
   EXPECT_EQ(one.bound, 0.0);
   EXPECT_DOUBLE_EQ(one.maxmin, one.oracle_value);

   Matrix A(2, 2);
   A(0, 0) = 2;
   A(0, 1) = -1;
   A(1, 0) = -1;
   A(1, 1) = 1;
   auto tf = type_free(2, 2, A);
   auto rt = primal_recursion_check(tf, JointBelief(Matrix(2, 2, 0.25)), Evaluation({0.5, 0.5}), o);
   EXPECT_NEAR(rt.oracle_value, 0.2, 1e-9);  // val(A) = 1/5
   EXPECT_TRUE(rt.holds);
}
