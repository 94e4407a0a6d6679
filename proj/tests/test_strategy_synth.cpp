#include <gtest/gtest.h>

#include <random>

#include "dualgame/strategy_synth.hpp"
#include "fixtures.hpp"

using namespace dualgame;
using namespace fixtures;

namespace {

JointBelief independent_belief(std::mt19937_64& rng, std::size_t K, std::size_t L)
{
   const Vector p = random_simplex(rng, K), q = random_simplex(rng, L);
   Matrix pi(K, L);
   for(std::size_t k = 0; k < K; ++k)
      for(std::size_t l = 0; l < L; ++l)
         pi(k, l) = p[k] * q[l];
   return JointBelief(pi);
}

std::vector<std::pair<std::size_t, std::size_t>> random_path(std::mt19937_64& rng, std::size_t len, std::size_t I,
                                                           std::size_t J)
{
   std::vector<std::pair<std::size_t, std::size_t>> path;
   for(std::size_t m = 0; m < len; ++m)
      path.emplace_back(rng() % I, rng() % J);
   return path;
}

}  // namespace

TEST(StrategySynth, ChooseXOnConstantGame)
{
   GameSpec g(2, 2, 2, 2, std::vector<double>(16, 0.75));
   Matrix Q(2, 2, 0.5);
   auto c = choose_x(g, Vector{0.3, 0.7}, Q, Evaluation::uniform(1), 8);
   EXPECT_NEAR(c.x[0], 0.0, 1e-9);
   EXPECT_NEAR(c.x[1], 0.0, 1e-9);
   EXPECT_NEAR(c.hull_value, 0.75, 1e-9);
}

TEST(StrategySynth, ChooseXWithOneType)
{
   auto g = matching_pennies();
   auto c = choose_x(g, Vector{1.0}, Matrix(1, 1, 1.0), Evaluation::uniform(1), 8);
   ASSERT_EQ(c.x.size(), 1u);
   EXPECT_EQ(c.x[0], 0.0);
   EXPECT_EQ(c.mesh_term, 0.0);
}

TEST(StrategySynth, ChooseXSupportsTheHull)
{
   auto g = half_game();
   Matrix Q(2, 1, 1.0);
   auto c = choose_x(g, Vector{0.5, 0.5}, Q, Evaluation::uniform(1), 8);
   // hull(p) + <p' - p, x> lies above every sample; here v peaks at p so x = 0
   EXPECT_NEAR(c.hull_value, 0.5, 1e-9);
   for(const auto& s : c.model.samples())
      EXPECT_GE(c.hull_value + (s.point[0] - 0.5) * c.x[0] + (s.point[1] - 0.5) * c.x[1], s.value - 1e-9);
   EXPECT_NEAR(c.x[0] + c.x[1], 0.0, 1e-12);

   auto off = choose_x(g, Vector{0.25, 0.75}, Q, Evaluation::uniform(1), 8);
   for(const auto& s : off.model.samples())
      EXPECT_GE(off.hull_value + (s.point[0] - 0.25) * off.x[0] + (s.point[1] - 0.75) * off.x[1], s.value - 1e-9);
}

TEST(StrategySynth, ConstantGameIsUnexploitable)
{
   GameSpec g(2, 2, 2, 2, std::vector<double>(16, 0.75));
   std::mt19937_64 rng(1);
   auto pi = random_belief(rng, 2, 2);
   auto tree = synthesize(g, pi, Evaluation::uniform(2));
   std::vector<const PolicyNode*> nodes{tree.root.get()};
   for(const auto& child : tree.root->children)
      nodes.push_back(child.get());
   for(const PolicyNode* n : nodes)
      for(std::size_t j = 0; j < 2; ++j)
         EXPECT_NEAR(n->tau(1, j), n->tau(0, j), 1e-12);
   auto c = certify(g, pi, Evaluation::uniform(2), tree);
   EXPECT_NEAR(c.exploitability, 0.0, 1e-9);
   EXPECT_TRUE(c.within);
}

TEST(StrategySynth, SingleStageTree)
{
   std::mt19937_64 rng(3);
   auto g = random_game(rng, 2, 2, 2, 3);
   auto pi = random_belief(rng, 2, 2);
   auto tree = synthesize(g, pi, Evaluation::uniform(1));
   EXPECT_TRUE(tree.root->leaf());
   EXPECT_EQ(tree.nodes, 1u);
   auto c = certify(g, pi, Evaluation::uniform(1), tree);
   EXPECT_TRUE(c.within) << c.exploitability << " " << c.epsilon_total;
}

TEST(StrategySynth, LpStrategyCertifies)
{
   std::mt19937_64 rng(5);
   auto g = random_game(rng, 2, 2, 2, 2);
   auto pi = random_belief(rng, 2, 2);
   Evaluation theta({0.6, 0.4});
   auto sol = primal_value(g, pi, theta);
   auto c = certify(g, pi, theta, sol.s2);
   EXPECT_LE(c.exploitability, 1e-7);
   EXPECT_GE(c.exploitability, -1e-9);
}

TEST(StrategySynth, RandomTwoStageWithinEpsilon)
{
   std::mt19937_64 rng(7);
   for(int t = 0; t < 4; ++t) {
      auto g = random_game(rng, 2, 2, 2, 2);
      auto pi = random_belief(rng, 2, 2);
      Evaluation theta = t % 2 ? Evaluation({0.7, 0.3}) : Evaluation::uniform(2);
      auto tree = synthesize(g, pi, theta);
      auto c = certify(g, pi, theta, tree);
      EXPECT_TRUE(c.within) << c.exploitability << " " << c.epsilon_total << " " << c.guarantee_bound;
      EXPECT_GE(c.exploitability, -1e-9);
      EXPECT_EQ(tree.audit.mismatches, 0u);
      auto s = as_behavior_strategy(tree);
      EXPECT_LE(q_consistency_gap(tree, s), 1e-10);
      for(int r = 0; r < 4; ++r)
         EXPECT_TRUE(zeta_trace_check(tree, random_path(rng, 1, 2, 2)));
   }
}

TEST(StrategySynth, IndependentPriorKeepsRowsEqual)
{
   std::mt19937_64 rng(9);
   auto g = random_game(rng, 2, 2, 2, 2);
   auto pi = independent_belief(rng, 2, 2);
   auto tree = synthesize(g, pi, Evaluation::uniform(2));
   for(const auto& child : tree.root->children)
      for(std::size_t l = 0; l < 2; ++l)
         EXPECT_NEAR(child->state.Q(1, l), child->state.Q(0, l), 1e-12);
}

TEST(StrategySynth, ZetaTraceOnHandBuiltTree)
{
   // uniform play: zeta after m stages is J^-m on every type
   const std::size_t J = 2;
   Matrix Q(2, 2, 0.5);
   auto leaf = std::make_shared<PolicyNode>();
   leaf->state = DualState{{0.0, 0.0}, Q, AuxWeight{{0.5, 0.5}}, Evaluation::uniform(1)};
   leaf->tau = Matrix(2, J, 0.5);
   auto root = std::make_shared<PolicyNode>();
   root->state = DualState{{0.0, 0.0}, Q, AuxWeight::ones(2), Evaluation::uniform(2)};
   root->tau = Matrix(2, J, 0.5);
   root->splits.assign(2, std::vector<Vector>(J, Vector{0.0, 0.0}));
   root->children.assign(2 * J, leaf);
   PolicyTree t;
   t.root = root;
   t.horizon = 2;
   t.i_size = 2, t.j_size = J, t.l_size = 2;
   t.p = {0.5, 0.5};
   t.Q = Q;
   EXPECT_TRUE(zeta_trace_check(t, {}));
   EXPECT_TRUE(zeta_trace_check(t, {{1, 0}}));
   EXPECT_THROW((void)zeta_trace_check(t, {{0, 0}, {0, 0}}), DomainError);
   EXPECT_THROW((void)zeta_trace_check(t, {{2, 0}}), DomainError);

   auto wrong = std::make_shared<PolicyNode>(*leaf);
   wrong->state.zeta = AuxWeight{{0.5, 0.25}};
   root->children[3] = wrong;
   EXPECT_FALSE(zeta_trace_check(t, {{1, 1}}));
}

TEST(StrategySynth, SwapIsAnInvolution)
{
   std::mt19937_64 rng(11);
   auto g = random_game(rng, 2, 3, 2, 2);
   auto pi = random_belief(rng, 2, 3);
   auto [g2, pi2] = swap_roles(g, pi);
   EXPECT_EQ(g2.k_size(), 3u);
   auto [g3, pi3] = swap_roles(g2, pi2);
   EXPECT_EQ(g3.tensor(), g.tensor());
   const Evaluation theta({0.5, 0.5});
   EXPECT_NEAR(primal_value(g2, pi2, theta).value, -primal_value(g, pi, theta).value, 1e-8);
}

TEST(StrategySynth, PlayerOneThroughSwap)
{
   std::mt19937_64 rng(13);
   auto g = random_game(rng, 2, 2, 2, 2);
   auto pi = random_belief(rng, 2, 2);
   auto [g2, pi2] = swap_roles(g, pi);
   const Evaluation theta = Evaluation::uniform(2);
   auto tree = synthesize(g2, pi2, theta);
   auto c = certify(g2, pi2, theta, tree);
   EXPECT_TRUE(c.within) << c.exploitability << " " << c.epsilon_total;
}

TEST(StrategySynth, FinerGridsTightenEpsilon)
{
   std::mt19937_64 rng(15);
   auto g = random_game(rng, 2, 2, 2, 2);
   auto pi = random_belief(rng, 2, 2);
   const Evaluation theta = Evaluation::uniform(2);
   double prev = std::numeric_limits<double>::infinity();
   for(std::size_t level = 0; level < 3; ++level) {
      DualConfig cfg;
      cfg.p_grid = 16u << level;
      cfg.tau_grid = 4u << level;
      auto tree = synthesize(g, pi, theta, cfg);
      EXPECT_LT(tree.epsilon_total, prev);
      prev = tree.epsilon_total;
   }
}
