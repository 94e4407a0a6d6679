#ifndef DUALGAME_ORACLE_HPP
#define DUALGAME_ORACLE_HPP

// Ground truth at desk scale. Values come from the sequence-form linear program of the whole
// repeated game (no recursion involved), best responses from backward induction over one
// player's decision tree, and direct dual values from conjugating sampled primal values.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "dualgame/convex_tools.hpp"
#include "dualgame/errors.hpp"
#include "dualgame/game_core.hpp"
#include "dualgame/numeric.hpp"
#include "dualgame/parallel.hpp"
#include "dualgame/sequence_form.hpp"
#include "dualgame/simplex_grid.hpp"

namespace dualgame {

struct OracleOptions {
   /// Largest sequence count per player in any sequence-form program.
   std::size_t sequence_cap = 4096;
   std::size_t history_cap = kDefaultHistoryCap;
   /// Subdivisions of the strategy grids used by the recursion check.
   std::size_t strategy_grid = 8;
   std::size_t node_cap = 10'000'000;
   std::size_t threads = 1;
};

namespace detail {

// Sequence numbering of the repeated game. Player 1's information sets are (k, m, h) and its
// sequences (k, m, h, i); player 2's are (l, m, h) and (l, m, h, j). With a root choice, player 1
// first picks k (sequences 1..K) and type k's tree hangs below sequence k + 1.
struct Layout {
   std::size_t K, L, I, J, n;
   HistoryIndex hx;
   std::vector<std::size_t> offset;  // first history id of each stage
   std::size_t histories = 0;
   bool root_choice = false;

   Layout(const GameSpec& g, std::size_t horizon, bool root, const OracleOptions& opt)
       : K(g.k_size()), L(g.l_size()), I(g.i_size()), J(g.j_size()), n(horizon),
         hx{g.i_size(), g.j_size()}, root_choice(root)
   {
      histories = hx.total(n, opt.history_cap);
      offset.resize(n);
      std::size_t acc = 0;
      for(std::size_t m = 0; m < n; ++m) {
         offset[m] = acc;
         acc += hx.count(m);
      }
      const std::size_t s1 = 1 + (root ? K : 0) + K * histories * I;
      const std::size_t s2 = 1 + L * histories * J;
      if(s1 > opt.sequence_cap)
         throw ResourceError("sequence-form program of player 1 too large", s1, opt.sequence_cap);
      if(s2 > opt.sequence_cap)
         throw ResourceError("sequence-form program of player 2 too large", s2, opt.sequence_cap);
   }

   [[nodiscard]] std::size_t node(std::size_t type, std::size_t m, std::size_t h) const
   {
      return type * histories + offset[m] + h;
   }
   [[nodiscard]] std::size_t infoset1(std::size_t k, std::size_t m, std::size_t h) const
   {
      return (root_choice ? 1 : 0) + node(k, m, h);
   }
   [[nodiscard]] std::size_t seq1(std::size_t k, std::size_t m, std::size_t h, std::size_t i) const
   {
      return 1 + (root_choice ? K : 0) + node(k, m, h) * I + i;
   }
   [[nodiscard]] std::size_t infoset2(std::size_t l, std::size_t m, std::size_t h) const { return node(l, m, h); }
   [[nodiscard]] std::size_t seq2(std::size_t l, std::size_t m, std::size_t h, std::size_t j) const
   {
      return 1 + node(l, m, h) * J + j;
   }
};

template <typename Fn>
void for_each_node(const Layout& lay, std::size_t types, Fn&& fn)
{
   for(std::size_t t = 0; t < types; ++t)
      for(std::size_t m = 0; m < lay.n; ++m)
         for(std::size_t h = 0; h < lay.hx.count(m); ++h)
            fn(t, m, h);
}

/// Payoff sum_m theta_m zeta^k weight(k, l) G^{kl}; with `x_root`, player 1 first picks k and
/// pays x^k.
inline sf::Game build_game(const GameSpec& g, const Layout& lay, const Matrix& weight,
                           const Evaluation& theta, const AuxWeight& zeta, const Vector* x_root)
{
   sf::Game sg;
   if(x_root) {
      sg.p1.add_infoset(0, lay.K);
      for(std::size_t k = 0; k < lay.K; ++k)
         sg.payoff.push_back(sf::Entry{1 + k, 0, -(*x_root)[k]});
   }
   for_each_node(lay, lay.K, [&](std::size_t k, std::size_t m, std::size_t h) {
      std::size_t parent = x_root ? 1 + k : 0;
      if(m > 0) {
         const std::size_t pairs = lay.hx.pairs();
         const std::size_t prev = h / pairs, a = h % pairs;
         parent = lay.seq1(k, m - 1, prev, a / lay.J);
      }
      sg.p1.add_infoset(parent, lay.I);
   });
   for_each_node(lay, lay.L, [&](std::size_t l, std::size_t m, std::size_t h) {
      std::size_t parent = 0;
      if(m > 0) {
         const std::size_t pairs = lay.hx.pairs();
         const std::size_t prev = h / pairs, a = h % pairs;
         parent = lay.seq2(l, m - 1, prev, a % lay.J);
      }
      sg.p2.add_infoset(parent, lay.J);
   });
   for(std::size_t k = 0; k < lay.K; ++k) {
      if(zeta[k] == 0.0)
         continue;
      for(std::size_t l = 0; l < lay.L; ++l) {
         const double w = weight(k, l) * zeta[k];
         if(w == 0.0)
            continue;
         for(std::size_t m = 0; m < lay.n; ++m) {
            if(theta[m] == 0.0)
               continue;
            for(std::size_t h = 0; h < lay.hx.count(m); ++h)
               for(std::size_t i = 0; i < lay.I; ++i)
                  for(std::size_t j = 0; j < lay.J; ++j) {
                     const double v = w * theta[m] * g(k, l, i, j);
                     if(v != 0.0)
                        sg.payoff.push_back(sf::Entry{lay.seq1(k, m, h, i), lay.seq2(l, m, h, j), v});
                  }
         }
      }
   }
   return sg;
}

inline BehaviorStrategy extract(const Layout& lay, const sf::Treeplex& t, const Vector& plan,
                                bool first_player, const OracleOptions& opt)
{
   const std::size_t types = first_player ? lay.K : lay.L;
   BehaviorStrategy s(types, first_player ? lay.I : lay.J, lay.I, lay.J, lay.n, opt.history_cap);
   for_each_node(lay, types, [&](std::size_t t2, std::size_t m, std::size_t h) {
      const std::size_t is = first_player ? lay.infoset1(t2, m, h) : lay.infoset2(t2, m, h);
      s.set(t2, m, h, t.behavior(plan, is));
   });
   return s;
}

inline void check_game_inputs(const GameSpec& g, const Matrix& weight, const AuxWeight& zeta)
{
   if(weight.rows() != g.k_size() || weight.cols() != g.l_size())
      throw DomainError("oracle: belief does not match the game's type sets");
   if(zeta.size() != g.k_size())
      throw DomainError("oracle: auxiliary weight has the wrong size");
}

}  // namespace detail

struct PrimalSolution {
   double value;           ///< from player 1's program
   double value_player2;   ///< from player 2's program; equal up to LP tolerance
   BehaviorStrategy s1;
   BehaviorStrategy s2;
};

/// v_theta(pi; zeta) with optimal behavior strategies of both players.
inline PrimalSolution primal_value(const GameSpec& g, const JointBelief& pi, const Evaluation& theta,
                                   const AuxWeight& zeta, const OracleOptions& opt = {})
{
   detail::check_game_inputs(g, pi.matrix(), zeta);
   const detail::Layout lay(g, theta.horizon(), false, opt);
   const sf::Game sg = detail::build_game(g, lay, pi.matrix(), theta, zeta, nullptr);
   const sf::Solution a = sf::solve_max(sg);
   const sf::Solution b = sf::solve_min(sg);
   const double scale = 1.0 + g.payoff_bound() * zeta.max_abs();
   if(std::abs(a.value - b.value) > 1e-7 * scale)
      throw InvariantError("primal_value: the two programs disagree (" + std::to_string(a.value)
                           + " vs " + std::to_string(b.value) + ")");
   return PrimalSolution{a.value, b.value, detail::extract(lay, sg.p1, a.plan, true, opt),
                         detail::extract(lay, sg.p2, b.plan, false, opt)};
}

inline PrimalSolution primal_value(const GameSpec& g, const JointBelief& pi, const Evaluation& theta,
                                   const OracleOptions& opt = {})
{
   return primal_value(g, pi, theta, AuxWeight::ones(g.k_size()), opt);
}

/// The value alone, from player 1's program.
inline double primal_value_only(const GameSpec& g, const JointBelief& pi, const Evaluation& theta,
                                const AuxWeight& zeta, const OracleOptions& opt = {})
{
   detail::check_game_inputs(g, pi.matrix(), zeta);
   const detail::Layout lay(g, theta.horizon(), false, opt);
   return sf::solve_max(detail::build_game(g, lay, pi.matrix(), theta, zeta, nullptr)).value;
}

struct ExactDual {
   double value;
   Vector p;            ///< player 1's optimal choice of the K-marginal
   BehaviorStrategy s2; ///< optimal strategy of player 2 in the dual game
};

/// w_theta(x, Q; zeta) exactly: the dual game where player 1 first picks k at cost x^k, then l
/// is drawn from Q(. | k).
inline ExactDual dual_value_exact(const GameSpec& g, std::span<const double> x, const Matrix& Q,
                                  const AuxWeight& zeta, const Evaluation& theta,
                                  const OracleOptions& opt = {})
{
   detail::check_game_inputs(g, Q, zeta);
   if(x.size() != g.k_size())
      throw DomainError("dual_value_exact: x has the wrong size");
   validate_row_stochastic(Q, "Q", 1e-9);
   const detail::Layout lay(g, theta.horizon(), true, opt);
   const Vector xr(x.begin(), x.end());
   const sf::Game sg = detail::build_game(g, lay, Q, theta, zeta, &xr);
   const sf::Solution a = sf::solve_max(sg);
   const sf::Solution b = sf::solve_min(sg);
   ExactDual out{a.value, Vector(g.k_size()), detail::extract(lay, sg.p2, b.plan, false, opt)};
   double total = 0.0;
   for(std::size_t k = 0; k < g.k_size(); ++k)
      total += out.p[k] = std::max(0.0, a.plan[1 + k]);
   for(double& v : out.p)
      v /= total;
   return out;
}

struct BestResponse {
   double value;
   BehaviorStrategy reply;  ///< pure at every history
};

/// sup over player 1's strategies of gamma_theta(pi, ., t2; zeta), by backward induction per type.
inline BestResponse best_response_value(const GameSpec& g, const JointBelief& pi, const Evaluation& theta,
                                        const BehaviorStrategy& t2, const AuxWeight& zeta,
                                        const OracleOptions& opt = {})
{
   detail::check_game_inputs(g, pi.matrix(), zeta);
   const std::size_t K = g.k_size(), L = g.l_size(), I = g.i_size(), J = g.j_size();
   const std::size_t n = theta.horizon();
   if(t2.types() != L || t2.actions() != J || !(t2.index() == HistoryIndex{I, J}) || t2.horizon() < n)
      throw DomainError("best_response_value: strategy shape does not match the game");
   const HistoryIndex hx{I, J};
   BehaviorStrategy reply(K, I, I, J, n, opt.history_cap);

   std::vector<double> per_type(K, 0.0);
   parallel_for(K, opt.threads, [&](std::size_t k) {
      // w[l] = pi(k, l) times player 2's probability of its own actions along h
      auto rec = [&](auto&& self, std::size_t m, std::size_t h, const Vector& w) -> double {
         double best = -std::numeric_limits<double>::infinity();
         std::size_t arg = 0;
         Vector wj(L);
         for(std::size_t i = 0; i < I; ++i) {
            double val = 0.0;
            for(std::size_t j = 0; j < J; ++j) {
               double mass = 0.0;
               for(std::size_t l = 0; l < L; ++l) {
                  wj[l] = w[l] * t2.at(l, m, h)[j];
                  mass += wj[l];
                  val += wj[l] * theta[m] * zeta[k] * g(k, l, i, j);
               }
               if(m + 1 < n && mass > 0.0)
                  val += self(self, m + 1, hx.child(h, i, j), wj);
            }
            if(val > best) {
               best = val;
               arg = i;
            }
         }
         Vector pure(I, 0.0);
         pure[arg] = 1.0;
         reply.set(k, m, h, pure);
         return best;
      };
      per_type[k] = rec(rec, 0, 0, pi.matrix().row_vector(k));
   });
   double total = 0.0;
   for(double v : per_type)
      total += v;
   return BestResponse{total, std::move(reply)};
}

inline BestResponse best_response_value(const GameSpec& g, const JointBelief& pi, const Evaluation& theta,
                                        const BehaviorStrategy& t2, const OracleOptions& opt = {})
{
   return best_response_value(g, pi, theta, t2, AuxWeight::ones(g.k_size()), opt);
}

/// Samples p -> v_theta(p (x) Q; zeta) on the barycentric grid with `resolution` subdivisions.
/// The Lipschitz constant in l1 is ||G|| max|zeta|.
inline ConcaveModel primal_value_model(const GameSpec& g, const Matrix& Q, const AuxWeight& zeta,
                                       const Evaluation& theta, std::size_t resolution,
                                       const OracleOptions& opt = {})
{
   validate_row_stochastic(Q, "Q", 1e-9);
   std::vector<Vector> grid = simplex_grid(g.k_size(), resolution, opt.node_cap);
   std::vector<double> values(grid.size());
   parallel_for(grid.size(), opt.threads, [&](std::size_t s) {
      values[s] = primal_value_only(g, Disintegration::product(grid[s], Q), theta, zeta, opt);
   });
   std::vector<Sample> samples;
   samples.reserve(grid.size());
   for(std::size_t s = 0; s < grid.size(); ++s)
      samples.push_back(Sample{std::move(grid[s]), values[s]});
   return ConcaveModel(std::move(samples), g.payoff_bound() * zeta.max_abs(),
                       simplex_grid_mesh(g.k_size(), resolution));
}

struct DirectDual {
   double value;        ///< model value; the true w lies in [value, value + error_bound]
   double error_bound;
   UpperConjugate conjugate;
};

/// w_theta(x, Q; zeta) as the upper conjugate of the sampled primal value, no recursion.
inline DirectDual dual_value_direct(const GameSpec& g, std::span<const double> x, const Matrix& Q,
                                    const AuxWeight& zeta, const Evaluation& theta, std::size_t resolution,
                                    const OracleOptions& opt = {})
{
   if(x.size() != g.k_size())
      throw DomainError("dual_value_direct: x has the wrong size");
   UpperConjugate w = upper_conjugate(primal_value_model(g, Q, zeta, theta, resolution, opt));
   return DirectDual{w(x), w.error_bound(x), std::move(w)};
}

struct RecursionCheck {
   double oracle_value;
   double maxmin;   ///< grid sup-inf of the right-hand side
   double minmax;   ///< grid inf-sup
   double bound;    ///< each grid value is within this of the exact right-hand side
   std::size_t nodes;
   bool holds;
};

/// Evaluates the first-stage decomposition of v_theta(pi) on a product grid over
/// Delta(I)^K x Delta(J)^L, with continuation values from the oracle.
inline RecursionCheck primal_recursion_check(const GameSpec& g, const JointBelief& pi, const Evaluation& theta,
                                             const OracleOptions& opt = {})
{
   const double v = primal_value_only(g, pi, theta, AuxWeight::ones(g.k_size()), opt);
   if(theta.single_stage()) {
      // theta_1 = 1: the right-hand side is the one-stage game itself, solved exactly
      return RecursionCheck{v, v, v, 0.0, 1, true};
   }
   const std::size_t K = g.k_size(), L = g.l_size(), I = g.i_size(), J = g.j_size();
   const std::size_t r = opt.strategy_grid;
   const std::vector<Vector> gi = simplex_grid(I, r, opt.node_cap);
   const std::vector<Vector> gj = simplex_grid(J, r, opt.node_cap);
   double ns = 1.0, nt = 1.0;
   for(std::size_t k = 0; k < K; ++k)
      ns *= static_cast<double>(gi.size());
   for(std::size_t l = 0; l < L; ++l)
      nt *= static_cast<double>(gj.size());
   if(ns * nt > static_cast<double>(opt.node_cap))
      throw ResourceError("strategy grid of the recursion check too large",
                          static_cast<std::size_t>(std::min(ns * nt, 1e18)), opt.node_cap);
   const std::size_t NS = static_cast<std::size_t>(ns), NT = static_cast<std::size_t>(nt);

   auto decode = [](std::size_t idx, std::size_t types, const std::vector<Vector>& grid) {
      Matrix s(types, grid.front().size());
      for(std::size_t t = types; t-- > 0;) {
         const Vector& row = grid[idx % grid.size()];
         idx /= grid.size();
         for(std::size_t a = 0; a < row.size(); ++a)
            s(t, a) = row[a];
      }
      return s;
   };

   const Evaluation tail = theta.tail();
   const double t1 = theta.head();
   std::vector<double> phi(NS * NT);
   parallel_for(NS, opt.threads, [&](std::size_t a) {
      StageStrategy st{decode(a, K, gi), Matrix()};
      for(std::size_t b = 0; b < NT; ++b) {
         st.tau = decode(b, L, gj);
         const Disintegration d = Disintegration::of(pi);
         double val = t1 * stage_payoff_vectors(g, d, st).expected;
         for(std::size_t i = 0; i < I; ++i)
            for(std::size_t j = 0; j < J; ++j) {
               const Posterior post = posterior(pi, st, i, j);
               if(post.degenerate)
                  continue;
               val += (1.0 - t1) * post.probability
                      * primal_value_only(g, post.belief, tail, AuxWeight::ones(K), opt);
            }
         phi[a * NT + b] = val;
      }
   });

   double maxmin = -std::numeric_limits<double>::infinity();
   for(std::size_t a = 0; a < NS; ++a) {
      double m = std::numeric_limits<double>::infinity();
      for(std::size_t b = 0; b < NT; ++b)
         m = std::min(m, phi[a * NT + b]);
      maxmin = std::max(maxmin, m);
   }
   double minmax = std::numeric_limits<double>::infinity();
   for(std::size_t b = 0; b < NT; ++b) {
      double m = -std::numeric_limits<double>::infinity();
      for(std::size_t a = 0; a < NS; ++a)
         m = std::max(m, phi[a * NT + b]);
      minmax = std::min(minmax, m);
   }
   // the right-hand side is ||G||-Lipschitz in sigma and in tau (max over types of l1 distance)
   const double bound = g.payoff_bound() * (simplex_grid_mesh(I, r) + simplex_grid_mesh(J, r));
   const double slack = 1e-9 * (1.0 + g.payoff_bound());
   const bool holds = std::abs(maxmin - v) <= bound + slack && std::abs(minmax - v) <= bound + slack;
   return RecursionCheck{v, maxmin, minmax, bound, NS * NT, holds};
}

}  // namespace dualgame

#endif  // DUALGAME_ORACLE_HPP
