#ifndef DUALGAME_STRATEGY_SYNTH_HPP
#define DUALGAME_STRATEGY_SYNTH_HPP

// Player 2's Markovian strategy from the dual recursion. The root takes zeta = 1 and x a
// supergradient of p -> v_theta(p (x) Q) at the prior marginal. Each node plays its tau, and
// after (i, j) the play moves to the child state (x_ij, Q_j, zeta_j, theta+). Leaves play
// the exact one-stage dual strategy.
//
// Guarantees: G(leaf) = w_1(x, Q; zeta) exactly, G(node) = (1 - theta_1) max_i sum_j G(child_ij).
// G bounds player 1's payoff in the dual game against the tree, so the primal best response is
// at most G(root) + <p, x>.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "dualgame/convex_tools.hpp"
#include "dualgame/dual_solver.hpp"
#include "dualgame/errors.hpp"
#include "dualgame/game_core.hpp"
#include "dualgame/numeric.hpp"
#include "dualgame/oracle.hpp"
#include "dualgame/parallel.hpp"

namespace dualgame {

struct ChosenX {
   Vector x;
   ConcaveModel model;  ///< samples of p -> v_theta(p (x) Q)
   double hull_value;   ///< concave hull of the samples at p; a lower bound on v_theta(p (x) Q)
   double mesh_term;    ///< w(x) <= v(p) - <p, x> + mesh_term
};

inline ChosenX choose_x(const GameSpec& g, std::span<const double> p, const Matrix& Q, const Evaluation& theta,
                        std::size_t resolution, const OracleOptions& opt = {})
{
   if(p.size() != g.k_size() || !is_probability(p, 1e-9))
      throw DomainError("choose_x: p must lie in the simplex on K");
   ConcaveModel model = primal_value_model(g, Q, AuxWeight::ones(g.k_size()), theta, resolution, opt);
   Vector x = supergradient(model, p);
   const double hull = concave_hull_value(model, p);
   const double term = (model.lipschitz() + centered_norm(x)) * model.mesh();
   return ChosenX{std::move(x), std::move(model), hull, term};
}

struct PolicyNode {
   DualState state;
   Matrix tau;                               ///< L x J
   std::vector<std::vector<Vector>> splits;  ///< [i][j]; empty at leaves
   std::vector<std::shared_ptr<const PolicyNode>> children;  ///< (i, j) -> i * J + j; empty at leaves
   double guarantee = 0.0;  ///< G(node)
   double epsilon = 0.0;    ///< a priori bound on G(node) - w(state)
   double value = 0.0;      ///< dual value estimate at the state
   bool degenerate = false; ///< zeta = 0: payoff-irrelevant, uniform play

   [[nodiscard]] bool leaf() const noexcept { return children.empty(); }
};

struct MarkovAudit {
   std::size_t collisions = 0;  ///< histories that reached an already built state
   std::size_t mismatches = 0;  ///< of those, recomputations that disagreed with the stored node
};

struct PolicyTree {
   std::shared_ptr<const PolicyNode> root;
   std::size_t horizon = 0;
   std::size_t i_size = 0, j_size = 0, l_size = 0;
   Vector p;
   Matrix Q;
   ChosenX chosen;
   double epsilon_total = 0.0;  ///< mesh_term + root epsilon
   MarkovAudit audit;
   std::size_t nodes = 0;

   /// a posteriori: G(root) + <p, x> - hull_value, also a bound on exploitability
   [[nodiscard]] double guarantee_bound() const
   {
      return root->guarantee + dot(p, chosen.x) - chosen.hull_value;
   }
};

namespace detail {

inline std::vector<double> state_key(const DualState& s)
{
   std::vector<double> key(s.x);
   key.insert(key.end(), s.Q.data().begin(), s.Q.data().end());
   key.insert(key.end(), s.zeta.zeta.begin(), s.zeta.zeta.end());
   key.push_back(-1.0);
   key.insert(key.end(), s.theta.weights().begin(), s.theta.weights().end());
   return key;
}

class TreeBuilder {
  public:
   TreeBuilder(const DualSolver& solver, std::size_t threads) : m_solver(solver), m_threads(threads) {}

   std::shared_ptr<const PolicyNode> build(const DualState& s)
   {
      const std::vector<double> key = state_key(s);
      std::shared_ptr<const PolicyNode> seen;
      {
         std::lock_guard lock(m_mutex);
         auto it = m_nodes.find(key);
         if(it != m_nodes.end())
            seen = it->second;
      }
      if(seen) {
         // the play at a node is a function of its state: recompute and compare
         const bool same = first_move(s) == seen->tau;
         std::lock_guard lock(m_mutex);
         ++m_audit.collisions;
         if(!same)
            ++m_audit.mismatches;
         return seen;
      }
      auto node = make(s);
      std::lock_guard lock(m_mutex);
      ++m_count;
      m_nodes.emplace(key, node);
      return node;
   }

   [[nodiscard]] MarkovAudit audit() const { return m_audit; }
   [[nodiscard]] std::size_t count() const { return m_count; }

  private:
   [[nodiscard]] Matrix first_move(const DualState& s) const
   {
      const GameSpec& g = m_solver.game();
      if(s.zeta.is_zero())
         return Matrix(g.l_size(), g.j_size(), 1.0 / static_cast<double>(g.j_size()));
      if(s.theta.single_stage())
         return one_stage_dual(g, s.x, s.Q, s.zeta).tau;
      return m_solver.dual_recursive(s).tau;
   }

   std::shared_ptr<const PolicyNode> make(const DualState& s)
   {
      const GameSpec& g = m_solver.game();
      const std::size_t I = g.i_size(), J = g.j_size();
      auto node = std::make_shared<PolicyNode>();
      node->state = s;

      if(s.zeta.is_zero()) {
         // nothing at stake below this node; the dual payoff is -<p, x>, at most -min x
         node->degenerate = true;
         node->tau = first_move(s);
         node->value = node->guarantee = -*std::min_element(s.x.begin(), s.x.end());
         return node;
      }
      if(s.theta.single_stage()) {
         OneStageDual d = one_stage_dual(g, s.x, s.Q, s.zeta);
         node->tau = std::move(d.tau);
         node->value = node->guarantee = d.value;
         return node;
      }

      const DualSolution sol = m_solver.dual_recursive(s);
      const double t1 = s.theta.head();
      const Evaluation tail = s.theta.tail();
      node->tau = sol.tau;
      node->value = sol.value;
      node->splits = sol.splits;
      node->children.resize(I * J);
      parallel_for(I * J, m_threads, [&](std::size_t c) {
         const std::size_t i = c / J, j = c % J;
         node->children[c] = build(DualState{sol.splits[i][j], sol.child_Q[j], sol.child_zeta[j], tail});
      });
      double worst_g = -std::numeric_limits<double>::infinity(), worst_e = 0.0;
      for(std::size_t i = 0; i < I; ++i) {
         double gs = 0.0, es = 0.0;
         for(std::size_t j = 0; j < J; ++j) {
            gs += node->children[i * J + j]->guarantee;
            es += sol.child_above[i][j] + node->children[i * J + j]->epsilon;
         }
         worst_g = std::max(worst_g, gs);
         worst_e = std::max(worst_e, es);
      }
      node->guarantee = (1.0 - t1) * worst_g;
      node->epsilon = sol.error_below + (1.0 - t1) * worst_e;
      return node;
   }

   const DualSolver& m_solver;
   std::size_t m_threads;
   std::mutex m_mutex;
   std::map<std::vector<double>, std::shared_ptr<const PolicyNode>> m_nodes;
   MarkovAudit m_audit;
   std::size_t m_count = 0;
};

}  // namespace detail

inline PolicyTree synthesize(const GameSpec& g, const JointBelief& pi, const Evaluation& theta,
                             const DualConfig& cfg = {})
{
   if(pi.k_size() != g.k_size() || pi.l_size() != g.l_size())
      throw DomainError("synthesize: prior does not match the game");
   const Disintegration d = Disintegration::of(pi);
   PolicyTree t;
   t.horizon = theta.horizon();
   t.i_size = g.i_size();
   t.j_size = g.j_size();
   t.l_size = g.l_size();
   t.p = d.p;
   t.Q = d.Q;
   t.chosen = choose_x(g, d.p, d.Q, theta, cfg.p_resolution(g.k_size()), cfg.oracle);

   const DualSolver solver(g, cfg);
   detail::TreeBuilder builder(solver, cfg.threads);
   t.root = builder.build(DualState{t.chosen.x, d.Q, AuxWeight::ones(g.k_size()), theta});
   t.audit = builder.audit();
   t.nodes = builder.count();
   t.epsilon_total = t.chosen.mesh_term + t.root->epsilon;
   return t;
}

/// t(l, h_m) = row l of tau at the node reached by h_m. Stages below a leaf play uniformly.
inline BehaviorStrategy as_behavior_strategy(const PolicyTree& t, std::size_t history_cap = kDefaultHistoryCap)
{
   BehaviorStrategy s(t.l_size, t.j_size, t.i_size, t.j_size, t.horizon, history_cap);
   const HistoryIndex hx{t.i_size, t.j_size};
   auto walk = [&](auto&& self, const PolicyNode& n, std::size_t m, std::size_t h) -> void {
      if(m >= t.horizon)
         return;
      for(std::size_t l = 0; l < t.l_size; ++l)
         s.set(l, m, h, n.tau.row(l));
      if(n.leaf()) {
         if(n.degenerate)  // uniform stays uniform further down
            for(std::size_t i = 0; i < t.i_size; ++i)
               for(std::size_t j = 0; j < t.j_size; ++j)
                  self(self, n, m + 1, hx.child(h, i, j));
         return;
      }
      for(std::size_t i = 0; i < t.i_size; ++i)
         for(std::size_t j = 0; j < t.j_size; ++j)
            self(self, *n.children[i * t.j_size + j], m + 1, hx.child(h, i, j));
   };
   walk(walk, *t.root, 0, 0);
   s.validate();
   return s;
}

struct Certification {
   double exploitability;   ///< best response value minus the game value
   double best_response;
   double value;
   double tolerance;        ///< LP tolerance on the two oracle values
   double epsilon_total = std::numeric_limits<double>::quiet_NaN();
   double guarantee_bound = std::numeric_limits<double>::quiet_NaN();
   bool within = true;      ///< exploitability <= epsilon_total + tolerance, when a tree is given
};

inline Certification certify(const GameSpec& g, const JointBelief& pi, const Evaluation& theta,
                             const BehaviorStrategy& t2, const OracleOptions& opt = {})
{
   const BestResponse br = best_response_value(g, pi, theta, t2, opt);
   const double v = primal_value_only(g, pi, theta, AuxWeight::ones(g.k_size()), opt);
   return Certification{br.value - v, br.value, v, 1e-7 * (1.0 + g.payoff_bound())};
}

inline Certification certify(const GameSpec& g, const JointBelief& pi, const Evaluation& theta,
                             const PolicyTree& t, const OracleOptions& opt = {})
{
   Certification c = certify(g, pi, theta, as_behavior_strategy(t, opt.history_cap), opt);
   c.epsilon_total = t.epsilon_total;
   c.guarantee_bound = t.guarantee_bound();
   c.within = c.exploitability <= c.epsilon_total + c.tolerance
              && c.exploitability <= c.guarantee_bound + c.tolerance && c.exploitability >= -c.tolerance;
   return c;
}

/// zeta_m^k = sum_l Q(l|k) prod_n tau_n^l(j_n) along `path`, against the stored zeta_m.
inline bool zeta_trace_check(const PolicyTree& t, const std::vector<std::pair<std::size_t, std::size_t>>& path)
{
   const PolicyNode* n = t.root.get();
   const std::size_t K = t.Q.rows(), L = t.l_size;
   Vector prod(L, 1.0);
   auto matches = [&](const PolicyNode& node) {
      for(std::size_t k = 0; k < K; ++k) {
         double z = 0.0;
         for(std::size_t l = 0; l < L; ++l)
            z += t.Q(k, l) * prod[l];
         if(std::abs(z - node.state.zeta[k]) > 1e-12)
            return false;
      }
      return true;
   };
   if(!matches(*n))
      return false;
   for(const auto& [i, j] : path) {
      if(i >= t.i_size || j >= t.j_size)
         throw DomainError("zeta_trace_check: action out of range");
      if(n->leaf())
         throw DomainError("zeta_trace_check: path is longer than the tree");
      for(std::size_t l = 0; l < L; ++l)
         prod[l] *= n->tau(l, j);
      n = n->children[i * t.j_size + j].get();
      if(!matches(*n))
         return false;
   }
   return true;
}

/// Largest gap between the stored Q_m and P(l | k, h_m) recomputed from the behavior strategy,
/// over nodes where the conditional is defined.
inline double q_consistency_gap(const PolicyTree& t, const BehaviorStrategy& s)
{
   const HistoryIndex hx{t.i_size, t.j_size};
   double gap = 0.0;
   auto walk = [&](auto&& self, const PolicyNode& n, const Matrix& Q, const std::vector<bool>& defined,
                   std::size_t m, std::size_t h) -> void {
      for(std::size_t k = 0; k < Q.rows(); ++k)
         if(defined[k])
            for(std::size_t l = 0; l < Q.cols(); ++l)
               gap = std::max(gap, std::abs(Q(k, l) - n.state.Q(k, l)));
      if(n.leaf())
         return;
      Matrix tau(t.l_size, t.j_size);
      for(std::size_t l = 0; l < t.l_size; ++l)
         for(std::size_t j = 0; j < t.j_size; ++j)
            tau(l, j) = s.at(l, m, h)[j];
      for(std::size_t j = 0; j < t.j_size; ++j) {
         QUpdate u = update_conditional(Q, tau, j);
         std::vector<bool> d(defined);
         for(std::size_t k = 0; k < d.size(); ++k)
            d[k] = d[k] && !u.kept_prior[k];
         for(std::size_t i = 0; i < t.i_size; ++i)
            self(self, *n.children[i * t.j_size + j], u.Q, d, m + 1, hx.child(h, i, j));
      }
   };
   walk(walk, *t.root, t.Q, std::vector<bool>(t.Q.rows(), true), 0, 0);
   return gap;
}

/// The game seen from player 2: K <-> L, I <-> J, payoffs negated, prior transposed.
inline std::pair<GameSpec, JointBelief> swap_roles(const GameSpec& g, const JointBelief& pi)
{
   const std::size_t K = g.k_size(), L = g.l_size(), I = g.i_size(), J = g.j_size();
   std::vector<double> t(K * L * I * J);
   for(std::size_t l = 0; l < L; ++l)
      for(std::size_t k = 0; k < K; ++k)
         for(std::size_t j = 0; j < J; ++j)
            for(std::size_t i = 0; i < I; ++i)
               t[((l * K + k) * J + j) * I + i] = g(k, l, i, j) == 0.0 ? 0.0 : -g(k, l, i, j);
   Matrix p(L, K);
   for(std::size_t k = 0; k < K; ++k)
      for(std::size_t l = 0; l < L; ++l)
         p(l, k) = pi(k, l);
   return {GameSpec(L, K, J, I, std::move(t)), JointBelief(std::move(p))};
}

}  // namespace dualgame

#endif  // DUALGAME_STRATEGY_SYNTH_HPP
