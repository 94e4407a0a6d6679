#include <gtest/gtest.h>

#include <random>

#include "dualgame/dual_solver.hpp"
#include "fixtures.hpp"

using namespace dualgame;
using namespace fixtures;

namespace {

constexpr double kTol = 1e-7;

Matrix rows_equal(std::span<const double> q, std::size_t K)
{
   Matrix Q(K, q.size());
   for(std::size_t k = 0; k < K; ++k)
      for(std::size_t l = 0; l < q.size(); ++l)
         Q(k, l) = q[l];
   return Q;
}

double matrix_game_value(const Matrix& A)
{
   GameSpec g = type_free(1, 1, A);
   return primal_value_only(g, JointBelief(Matrix(1, 1, 1.0)), Evaluation::uniform(1), AuxWeight::ones(1));
}

// value - error_below <= exact <= value + error_above
void expect_brackets(const DualSolution& d, double exact)
{
   EXPECT_GE(exact, d.value - d.error_below - kTol);
   EXPECT_LE(exact, d.value + d.error_above + kTol);
}

}  // namespace

TEST(DualSolver, OneStageMatchesSequenceForm)
{
   std::mt19937_64 rng(3);
   for(int t = 0; t < 10; ++t) {
      auto g = random_game(rng, 2, 2, 2, 3);
      Matrix Q = random_stochastic(rng, 2, 2);
      AuxWeight z{{1.5 * random_simplex(rng, 2)[0], -0.5}};
      Vector x{0.2, -0.1 * t};
      const double lp = one_stage_dual(g, x, Q, z).value;
      EXPECT_NEAR(lp, dual_value_exact(g, x, Q, z, Evaluation::uniform(1)).value, kTol);
   }
}

TEST(DualSolver, BaseOfZeroGame)
{
   GameSpec g(2, 2, 2, 2, std::vector<double>(16, 0.0));
   DualState s{{0.3, -0.4}, Matrix(2, 2, 0.5), AuxWeight::ones(2), Evaluation::uniform(1)};
   auto d = dual_base(g, s);
   EXPECT_NEAR(d.value, 0.4, 1e-12);
   EXPECT_EQ(d.error_bound(), 0.0);
}

TEST(DualSolver, BaseTranslationAndHalfGame)
{
   auto g = half_game();
   DualState s{{0.0, 0.0}, Matrix(2, 1, 1.0), AuxWeight::ones(2), Evaluation::uniform(1)};
   auto d0 = dual_base(g, s);
   // w(0) = max_p v_1(p) = 1/2, attained at p = (1/2, 1/2)
   EXPECT_GE(d0.value, 0.5 - 1e-9);
   EXPECT_LE(d0.value, 0.5 + 1e-9);
   EXPECT_LE(d0.value, one_stage_dual(g, s.x, s.Q, s.zeta).value + 1e-9);
   DualState shifted = s;
   shifted.x = {0.75, 0.75};
   EXPECT_NEAR(dual_base(g, shifted).value, d0.value - 0.75, 1e-9);
   // off-grid point: the exact value lies within the certificate
   s.x = {0.13, -0.29};
   auto d = dual_base(g, s);
   expect_brackets(d, one_stage_dual(g, s.x, s.Q, s.zeta).value);
}

TEST(DualSolver, RequiresTwoStages)
{
   auto g = half_game();
   DualState s{{0.0, 0.0}, Matrix(2, 1, 1.0), AuxWeight::ones(2), Evaluation::uniform(1)};
   EXPECT_THROW((void)dual_recursive(g, s), DomainError);
   s.theta = Evaluation::uniform(2);
   EXPECT_THROW((void)dual_base(g, s), DomainError);
}

TEST(DualSolver, TypeFreePayoffs)
{
   Matrix A(2, 2);
   A(0, 0) = 1.0, A(0, 1) = -0.5, A(1, 0) = -0.25, A(1, 1) = 0.5;
   auto g = type_free(2, 2, A);
   const double val = matrix_game_value(A);
   std::mt19937_64 rng(5);
   for(int t = 0; t < 3; ++t) {
      Vector x{0.3 * t, -0.2};
      DualState s{x, random_stochastic(rng, 2, 2), AuxWeight::ones(2), Evaluation::uniform(2)};
      auto d = dual_recursive(g, s);
      expect_brackets(d, val - std::min(x[0], x[1]));
   }
}

TEST(DualSolver, MatchesExactAndDirectOnTwoStages)
{
   std::mt19937_64 rng(7);
   for(int t = 0; t < 6; ++t) {
      const std::size_t L = t < 2 ? 1 : 2;  // the first two are one-sided
      auto g = random_game(rng, 2, L, 2, 2);
      Matrix Q = random_stochastic(rng, 2, L);
      Vector x{0.1 * t, -0.15};
      DualState s{x, Q, AuxWeight::ones(2), Evaluation::uniform(2)};
      auto d = dual_recursive(g, s);
      expect_brackets(d, dual_value_exact(g, x, Q, s.zeta, s.theta).value);
      auto direct = dual_value_direct(g, x, Q, s.zeta, s.theta, 16);
      EXPECT_LE(std::abs(d.value - direct.value), d.error_bound() + direct.error_bound + kTol);
   }
}

TEST(DualSolver, AuxiliaryWeightEntersTheStagePayoff)
{
   // zeta multiplies stage payoffs, so the split target uses zeta^k G^{k,Q}_{i tau}
   std::mt19937_64 rng(9);
   for(int t = 0; t < 6; ++t) {
      auto g = random_game(rng, 2, 2, 2, 2);
      Matrix Q = random_stochastic(rng, 2, 2);
      AuxWeight z{{0.7, -0.4 + 0.3 * t}};
      Vector x{0.05 * t, 0.1};
      Evaluation theta(Vector{0.6, 0.4});
      DualState s{x, Q, z, theta};
      auto d = dual_recursive(g, s);
      expect_brackets(d, dual_value_exact(g, x, Q, z, theta).value);
      for(std::size_t i = 0; i < 2; ++i) {
         const Vector G = conditional_payoff_vector(g, Q, d.tau, i);
         for(std::size_t k = 0; k < 2; ++k) {
            double total = 0.0;
            for(std::size_t j = 0; j < 2; ++j)
               total += d.splits[i][j][k];
            EXPECT_NEAR(total, (x[k] - 0.6 * z[k] * G[k]) / 0.4, 1e-9);
         }
      }
   }
}

TEST(DualSolver, WeakDualityOnGrid)
{
   std::mt19937_64 rng(11);
   auto g = random_game(rng, 2, 2, 2, 2);
   Matrix Q = random_stochastic(rng, 2, 2);
   DualState s{{0.2, -0.3}, Q, AuxWeight::ones(2), Evaluation::uniform(2)};
   auto d = dual_recursive(g, s);
   for(const Vector& p : simplex_grid(2, 16)) {
      const double v = primal_value_only(g, Disintegration::product(p, Q), s.theta, s.zeta);
      EXPECT_GE(d.value + d.error_below + kTol, v - dot(p, s.x));
   }
}

TEST(DualSolver, TranslationAndScaling)
{
   std::mt19937_64 rng(13);
   auto g = random_game(rng, 2, 2, 2, 2);
   Matrix Q = random_stochastic(rng, 2, 2);
   DualState s{{0.2, -0.3}, Q, AuxWeight{{1.0, 0.5}}, Evaluation::uniform(2)};
   DualSolver solver(g);
   auto a = solver.dual_recursive(s);
   DualState t = s;
   t.x = {0.2 + 0.4, -0.3 + 0.4};
   EXPECT_NEAR(solver.dual_recursive(t).value, a.value - 0.4, 1e-8);

   // w(x, Q; alpha zeta) = alpha w(x / alpha, Q; zeta)
   const double alpha = 2.0;
   DualState u{{s.x[0] * alpha, s.x[1] * alpha}, Q, AuxWeight{{alpha * 1.0, alpha * 0.5}}, s.theta};
   auto b = solver.dual_recursive(u);
   EXPECT_LE(std::abs(b.value - alpha * a.value), b.error_bound() + alpha * a.error_bound() + kTol);
}

TEST(DualSolver, ZeroWeightShortCircuits)
{
   std::mt19937_64 rng(15);
   auto g = random_game(rng, 2, 2, 2, 2);
   DualState s{{0.2, -0.3}, random_stochastic(rng, 2, 2), AuxWeight{{0.0, 0.0}}, Evaluation::uniform(2)};
   auto d = dual_recursive(g, s);
   EXPECT_NEAR(d.value, 0.3, 1e-9);
   EXPECT_EQ(d.error_bound(), 0.0);
}

TEST(DualSolver, RefinementNeverRaisesValueBeyondBound)
{
   std::mt19937_64 rng(17);
   auto g = random_game(rng, 2, 2, 2, 2);
   DualState s{{0.1, 0.0}, random_stochastic(rng, 2, 2), AuxWeight::ones(2), Evaluation::uniform(2)};
   DualConfig coarse;
   coarse.tau_grid = 4;
   DualConfig fine = coarse;
   fine.tau_grid = 8;
   fine.x_grid = 32;
   auto a = dual_recursive(g, s, coarse);
   auto b = dual_recursive(g, s, fine);
   EXPECT_LE(b.value, a.value + a.error_bound() + kTol);
   EXPECT_LT(b.tau_term, a.tau_term);
}

TEST(DualSolver, ThreadsDoNotChangeTheResult)
{
   std::mt19937_64 rng(19);
   auto g = random_game(rng, 2, 2, 2, 2);
   DualState s{{0.1, 0.0}, random_stochastic(rng, 2, 2), AuxWeight::ones(2), Evaluation::uniform(2)};
   DualConfig one, three;
   three.threads = 3;
   auto a = dual_recursive(g, s, one);
   auto b = dual_recursive(g, s, three);
   EXPECT_EQ(a.value, b.value);
   EXPECT_EQ(a.tau, b.tau);
}

TEST(DualSolver, ThreeStagesBracketExact)
{
   std::mt19937_64 rng(21);
   auto g = random_game(rng, 2, 2, 2, 2);
   Matrix Q = random_stochastic(rng, 2, 2);
   DualConfig cfg;
   cfg.tau_grid = 4;
   cfg.x_grid = 8;
   cfg.jitter = 2;
   DualState s{{0.1, -0.1}, Q, AuxWeight::ones(2), Evaluation::uniform(3)};
   DualSolver solver(g, cfg);
   auto d = solver.dual_recursive(s);
   EXPECT_GT(solver.cache_size(), 0u);
   EXPECT_GT(d.xgrid_term, 0.0);
   expect_brackets(d, dual_value_exact(g, s.x, Q, s.zeta, s.theta).value);
}

TEST(DualSolver, IndependentMatchesGeneralRecursion)
{
   std::mt19937_64 rng(23);
   for(int t = 0; t < 3; ++t) {
      auto g = random_game(rng, 2, 2, 2, 2);
      Vector q = random_simplex(rng, 2);
      Vector x{0.1 * t, -0.2};
      DualSolver solver(g);
      auto ind = solver.independent_recursive(x, q, Evaluation::uniform(2));
      auto dep = solver.dual_recursive(DualState{x, rows_equal(q, 2), AuxWeight::ones(2), Evaluation::uniform(2)});
      EXPECT_LE(std::abs(ind.value - dep.value), ind.error_bound() + dep.error_bound() + kTol);
      ASSERT_EQ(ind.weights.size(), 2u);
      expect_brackets(ind, dual_value_exact(g, x, rows_equal(q, 2), AuxWeight::ones(2), Evaluation::uniform(2)).value);
   }
}

TEST(DualSolver, IndependentRejectsDependentPrior)
{
   Matrix Q(2, 2);
   Q(0, 0) = 0.9, Q(0, 1) = 0.1, Q(1, 0) = 0.5, Q(1, 1) = 0.5;
   GameSpec g2(2, 2, 2, 2, std::vector<double>(16, 1.0));
   DualSolver solver(g2);
   EXPECT_THROW((void)solver.independent_recursive(Vector{0.0, 0.0}, Q, Evaluation::uniform(2)), DomainError);
}

TEST(DualSolver, IndependentConstantAndZeroMassBranch)
{
   GameSpec g(2, 2, 2, 2, std::vector<double>(16, 0.75));
   Vector x{0.2, -0.1};
   auto d = independent_recursive(g, x, Vector{0.5, 0.5}, Evaluation::uniform(2));
   expect_brackets(d, 0.75 + 0.1);
   // a game where player 2's second action is dominated keeps the zero-mass column harmless
   Matrix A(2, 2);
   A(0, 0) = 0.0, A(0, 1) = 1.0, A(1, 0) = 0.0, A(1, 1) = 2.0;
   auto h = type_free(2, 2, A);
   auto e = independent_recursive(h, x, Vector{0.3, 0.7}, Evaluation::uniform(2));
   EXPECT_NEAR(e.tau(0, 1), 0.0, 1e-12);
   EXPECT_NEAR(e.tau(1, 1), 0.0, 1e-12);
   EXPECT_NEAR(e.weights[1], 0.0, 1e-12);
   expect_brackets(e, 0.0 + 0.1);
}

TEST(DualSolver, NonRevealingBound)
{
   Matrix A(2, 2);
   A(0, 0) = 1.0, A(0, 1) = -0.5, A(1, 0) = -0.25, A(1, 1) = 0.5;
   auto free_g = type_free(2, 2, A);
   std::mt19937_64 rng(25);
   Matrix Q = random_stochastic(rng, 2, 2);
   auto nr = nonrevealing_bound(free_g, Vector{0.1, 0.0}, Q, Evaluation::uniform(2));
   EXPECT_TRUE(nr.holds);
   EXPECT_TRUE(nr.equality);

   for(int t = 0; t < 3; ++t) {
      auto g = random_game(rng, 2, 2, 2, 2);
      auto r = nonrevealing_bound(g, Vector{0.1 * t, 0.0}, random_stochastic(rng, 2, 2), Evaluation::uniform(2));
      EXPECT_TRUE(r.holds);
      EXPECT_GE(r.slack, -(r.recursive.error_bound() + r.rhs_below + r.rhs_above));
   }

   auto single = random_game(rng, 2, 2, 2, 1);
   auto s = nonrevealing_bound(single, Vector{0.0, 0.2}, random_stochastic(rng, 2, 2), Evaluation::uniform(2));
   EXPECT_NEAR(s.slack, 0.0, 1e-9);
}
