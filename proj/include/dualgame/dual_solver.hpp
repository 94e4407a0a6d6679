#ifndef DUALGAME_DUAL_SOLVER_HPP
#define DUALGAME_DUAL_SOLVER_HPP

// The dual recursion
//
//    w_theta(x, Q; zeta) = (1 - theta_1) min_tau min_{sum_j x_ij = z_i} max_i sum_j w_theta+(x_ij, Q_j; zeta_j)
//    z_i = (x - theta_1 zeta.G^Q_{i tau}) / (1 - theta_1),   zeta_j^k = zeta^k P(j | k)
//
// solved on a grid over player 2's first-stage strategy tau. For a fixed tau and action i the
// inner problem is one linear program. When theta+ has a single stage the children enter that
// program exactly, through the epigraph of
//    w_1(y, Q; zeta) = min_tau' max_{k,i'} zeta^k G^{k,Q}_{i' tau'} - y^k.
// Deeper children are replaced by convex piecewise-linear models built from recursive values
// sampled on an x-grid, with two-sided error bounds.
//
// Every value comes with `value - error_below <= w <= value + error_above`.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dualgame/convex_tools.hpp"
#include "dualgame/errors.hpp"
#include "dualgame/game_core.hpp"
#include "dualgame/lp.hpp"
#include "dualgame/numeric.hpp"
#include "dualgame/oracle.hpp"
#include "dualgame/parallel.hpp"
#include "dualgame/simplex_grid.hpp"

namespace dualgame {

struct DualConfig {
   /// Subdivisions of the p-grid on Delta(K) used by sampled conjugates; 0 picks 16, 8 or 4
   /// for K = 2, 3 and larger.
   std::size_t p_grid = 0;
   /// Subdivisions of the grid on each row of tau.
   std::size_t tau_grid = 8;
   /// Subdivisions per coordinate of the x-grid used to sample deeper children.
   std::size_t x_grid = 16;
   bool refine = true;
   std::size_t refine_factor = 4;
   /// Random candidates tried around the incumbent after refinement.
   std::size_t jitter = 8;
   std::uint64_t seed = 0;
   std::size_t threads = 1;
   /// Largest number of tau candidates on the coarse grid.
   std::size_t tau_cap = 1'000'000;
   OracleOptions oracle;

   [[nodiscard]] std::size_t p_resolution(std::size_t K) const
   {
      if(p_grid > 0)
         return p_grid;
      return K <= 2 ? 16 : K == 3 ? 8 : 4;
   }
};

/// (x, Q, zeta, theta): the parameters of the auxiliary dual game.
struct DualState {
   Vector x;
   Matrix Q;
   AuxWeight zeta;
   Evaluation theta;

   void validate(const GameSpec& g) const
   {
      if(x.size() != g.k_size() || zeta.size() != g.k_size())
         throw DomainError("DualState: x and zeta must have one entry per type k");
      if(Q.rows() != g.k_size() || Q.cols() != g.l_size())
         throw DomainError("DualState: Q must be K x L");
      validate_row_stochastic(Q, "DualState Q", 1e-9);
      for(double v : x)
         if(!std::isfinite(v))
            throw DomainError("DualState: x must be finite");
   }
};

struct DualSolution {
   double value = 0.0;
   double error_below = 0.0;  ///< w >= value - error_below
   double error_above = 0.0;  ///< w <= value + error_above
   double tau_term = 0.0;     ///< grid gap of the outer minimum over tau
   double conj_term = 0.0;    ///< p-grid error of sampled child conjugates
   double xgrid_term = 0.0;   ///< x-grid error of sampled child conjugates
   double child_term = 0.0;   ///< errors inherited from recursive child values

   Matrix tau;                             ///< first-stage strategy of player 2 (L x J)
   std::vector<std::vector<Vector>> splits;  ///< [i][j]
   Vector weights;                         ///< empty, or tau-bar when splits carry weights
   std::vector<Matrix> child_Q;            ///< [j]
   std::vector<AuxWeight> child_zeta;      ///< [j]
   /// Per (i, j): bound on w_child(split) - model(split), used when certifying strategies.
   std::vector<std::vector<double>> child_above;
   std::size_t candidates = 0;

   [[nodiscard]] double error_bound() const { return error_below + error_above; }
};

struct OneStageDual {
   double value;
   Matrix tau;
};

/// w_1(x, Q; zeta) exactly: min over tau of max over (k, i) of zeta^k G^{k,Q}_{i tau} - x^k.
inline OneStageDual one_stage_dual(const GameSpec& g, std::span<const double> x, const Matrix& Q,
                                   const AuxWeight& zeta)
{
   const std::size_t K = g.k_size(), L = g.l_size(), I = g.i_size(), J = g.j_size();
   if(zeta.is_zero()) {
      Matrix tau(L, J, 1.0 / static_cast<double>(J));
      return OneStageDual{-*std::min_element(x.begin(), x.end()), std::move(tau)};
   }
   lp::Problem prob(lp::Sense::kMinimize);
   const std::size_t t = prob.add_variable(1.0, true);
   std::vector<std::size_t> tv(L * J);
   for(auto& v : tv)
      v = prob.add_variable(0.0);
   for(std::size_t l = 0; l < L; ++l) {
      std::vector<lp::Term> row;
      for(std::size_t j = 0; j < J; ++j)
         row.push_back({tv[l * J + j], 1.0});
      prob.add_constraint(std::move(row), lp::Relation::kEqual, 1.0);
   }
   for(std::size_t k = 0; k < K; ++k)
      for(std::size_t i = 0; i < I; ++i) {
         std::vector<lp::Term> row{{t, 1.0}};
         for(std::size_t l = 0; l < L; ++l)
            for(std::size_t j = 0; j < J; ++j) {
               const double c = zeta[k] * Q(k, l) * g(k, l, i, j);
               if(c != 0.0)
                  row.push_back({tv[l * J + j], -c});
            }
         prob.add_constraint(std::move(row), lp::Relation::kGreaterEqual, -x[k]);
      }
   const lp::Solution s = lp::solve_or_throw(prob, "one_stage_dual");
   OneStageDual out{s.objective, Matrix(L, J)};
   for(std::size_t l = 0; l < L; ++l) {
      double total = 0.0;
      for(std::size_t j = 0; j < J; ++j)
         total += out.tau(l, j) = std::max(0.0, s.x[tv[l * J + j]]);
      for(std::size_t j = 0; j < J; ++j)
         out.tau(l, j) /= total;
   }
   return out;
}

/// theta = (1): the upper conjugate of the sampled one-stage value p -> v_1(p (x) Q; zeta).
inline DualSolution dual_base(const GameSpec& g, const DualState& s, const DualConfig& cfg = {})
{
   s.validate(g);
   if(!s.theta.single_stage())
      throw DomainError("dual_base: the evaluation must have a single stage");
   DualSolution out;
   out.tau = one_stage_dual(g, s.x, s.Q, s.zeta).tau;
   if(s.zeta.is_zero() || g.payoff_bound() == 0.0) {
      // v is identically 0 and its conjugate is exact
      out.value = zero_conjugate(g.k_size())(s.x);
      return out;
   }
   const UpperConjugate w = upper_conjugate(
       primal_value_model(g, s.Q, s.zeta, Evaluation::uniform(1), cfg.p_resolution(g.k_size()), cfg.oracle));
   out.value = w(s.x);
   out.error_above = out.conj_term = w.error_bound(s.x);
   return out;
}

namespace detail {

/// Convex model of a child's dual value: model - below <= w <= model + above(y).
struct ChildModel {
   ConvexModel model;
   double below = 0.0;
   double xgrid_part = 0.0;   // part of `below` due to the x-grid
   double sample_above = 0.0;
   double lipschitz = 0.0;
   double mesh = 0.0;

   [[nodiscard]] double conj_above(std::span<const double> y) const
   {
      return (lipschitz + centered_norm(y)) * mesh;
   }
   [[nodiscard]] double above(std::span<const double> y) const { return sample_above + conj_above(y); }
};

struct Child {
   Matrix Q;
   AuxWeight zeta;
   double weight = 1.0;
   std::shared_ptr<const ChildModel> model;  // null: exact one-stage child
};

struct Candidate {
   double value = std::numeric_limits<double>::infinity();
   double below = 0.0;        // (1 - theta_1) sum_j weight_j below_j
   double xgrid = 0.0;
   std::vector<Child> children;
   std::vector<std::vector<Vector>> y;  // [i][j]
   std::vector<std::vector<double>> above;
   std::vector<std::vector<double>> conj;
};

}  // namespace detail

/// Memoizes child models across calls. Safe for concurrent use; values are deterministic, so
/// a racing double insert stores equal models.
class DualCache {
  public:
   std::shared_ptr<const detail::ChildModel> find(const std::vector<double>& key) const
   {
      std::lock_guard lock(m_mutex);
      auto it = m_map.find(key);
      return it == m_map.end() ? nullptr : it->second;
   }
   void insert(std::vector<double> key, std::shared_ptr<const detail::ChildModel> m)
   {
      std::lock_guard lock(m_mutex);
      m_map[std::move(key)] = std::move(m);
   }
   [[nodiscard]] std::size_t size() const
   {
      std::lock_guard lock(m_mutex);
      return m_map.size();
   }

  private:
   mutable std::mutex m_mutex;
   std::map<std::vector<double>, std::shared_ptr<const detail::ChildModel>> m_map;
};

struct NonRevealing {
   double rhs;               ///< (1 - theta_1) min_taubar max_i w_theta+(z_i, Q)
   double rhs_below;         ///< true rhs >= rhs - rhs_below
   double rhs_above;         ///< true rhs <= rhs + rhs_above
   Vector tau_bar;
   DualSolution recursive;
   double slack;             ///< rhs - recursive.value
   bool holds;               ///< w <= rhs is consistent with both certificates
   bool equality;            ///< equal within the certificates: tau_bar is a certified optimal first move
};

class DualSolver {
  public:
   explicit DualSolver(GameSpec g, DualConfig cfg = {}) : m_g(std::move(g)), m_cfg(cfg) {}

   [[nodiscard]] const GameSpec& game() const noexcept { return m_g; }
   [[nodiscard]] const DualConfig& config() const noexcept { return m_cfg; }
   [[nodiscard]] std::size_t cache_size() const { return m_cache.size(); }

   /// Any horizon: exact one-stage value when theta_1 = 1, the recursion otherwise.
   [[nodiscard]] DualSolution solve(const DualState& s) const
   {
      s.validate(m_g);
      if(s.theta.single_stage()) {
         DualSolution out;
         OneStageDual d = one_stage_dual(m_g, s.x, s.Q, s.zeta);
         out.value = d.value;
         out.tau = std::move(d.tau);
         return out;
      }
      return recursive(s, false);
   }

   [[nodiscard]] DualSolution dual_recursive(const DualState& s) const
   {
      s.validate(m_g);
      if(s.theta.single_stage())
         throw DomainError("dual_recursive: theta_1 must be below 1");
      return recursive(s, false);
   }

   /// The independent-prior formula: weighted splits sum_j taubar(j) y_ij = z_i, children
   /// w_theta+(y, q_j) without auxiliary weight.
   [[nodiscard]] DualSolution independent_recursive(std::span<const double> x, std::span<const double> q,
                                                    const Evaluation& theta) const
   {
      const std::size_t K = m_g.k_size(), L = m_g.l_size();
      if(q.size() != L || !is_probability(q, 1e-9))
         throw DomainError("independent_recursive: q must be a probability on L");
      Matrix Q(K, L);
      for(std::size_t k = 0; k < K; ++k)
         for(std::size_t l = 0; l < L; ++l)
            Q(k, l) = q[l];
      DualState s{Vector(x.begin(), x.end()), Q, AuxWeight::ones(K), theta};
      s.validate(m_g);
      if(theta.single_stage())
         throw DomainError("independent_recursive: theta_1 must be below 1");
      return recursive(s, true);
   }

   [[nodiscard]] DualSolution independent_recursive(std::span<const double> x, const Matrix& Q,
                                                    const Evaluation& theta) const
   {
      for(std::size_t k = 1; k < Q.rows(); ++k)
         for(std::size_t l = 0; l < Q.cols(); ++l)
            if(std::abs(Q(k, l) - Q(0, l)) > 1e-12)
               throw DomainError("independent_recursive: the prior is not independent (rows of Q differ)");
      return independent_recursive(x, Q.row(0), theta);
   }

   /// Right-hand side of the non-revealing bound over a grid on Delta(J), compared with the
   /// recursive value.
   [[nodiscard]] NonRevealing nonrevealing_bound(std::span<const double> x, const Matrix& Q,
                                                 const Evaluation& theta) const
   {
      const std::size_t K = m_g.k_size(), L = m_g.l_size(), I = m_g.i_size(), J = m_g.j_size();
      DualState s{Vector(x.begin(), x.end()), Q, AuxWeight::ones(K), theta};
      s.validate(m_g);
      if(theta.single_stage())
         throw DomainError("nonrevealing_bound: theta_1 must be below 1");
      const double t1 = theta.head();
      const Evaluation tail = theta.tail();
      const std::size_t r = m_cfg.tau_grid * (m_cfg.refine ? m_cfg.refine_factor : 1);
      const std::vector<Vector> grid = simplex_grid(J, r, m_cfg.tau_cap);

      struct Eval {
         double value, below, above;
      };
      std::vector<Eval> evals(grid.size());
      parallel_for(grid.size(), m_cfg.threads, [&](std::size_t a) {
         Matrix tau(L, J);
         for(std::size_t l = 0; l < L; ++l)
            for(std::size_t j = 0; j < J; ++j)
               tau(l, j) = grid[a][j];
         Eval e{-std::numeric_limits<double>::infinity(), 0.0, 0.0};
         for(std::size_t i = 0; i < I; ++i) {
            const Vector G = conditional_payoff_vector(m_g, Q, tau, i);
            Vector z(K);
            for(std::size_t k = 0; k < K; ++k)
               z[k] = (s.x[k] - t1 * G[k]) / (1.0 - t1);
            const DualSolution child = solve(DualState{z, Q, AuxWeight::ones(K), tail});
            e.value = std::max(e.value, (1.0 - t1) * child.value);
            e.below = std::max(e.below, (1.0 - t1) * child.error_below);
            e.above = std::max(e.above, (1.0 - t1) * child.error_above);
         }
         evals[a] = e;
      });
      std::size_t best = 0;
      double below_all = 0.0;
      for(std::size_t a = 0; a < grid.size(); ++a) {
         if(evals[a].value < evals[best].value)
            best = a;
         below_all = std::max(below_all, evals[a].below);
      }
      NonRevealing out;
      out.rhs = evals[best].value;
      out.tau_bar = grid[best];
      // Lipschitz constant ||G|| in tau-bar (l1), as for the full recursion
      out.rhs_below = m_g.payoff_bound() * simplex_grid_mesh(J, r) + below_all;
      out.rhs_above = evals[best].above;
      out.recursive = recursive(s, false);
      out.slack = out.rhs - out.recursive.value;
      const double tol = 1e-9 * (1.0 + m_g.payoff_bound());
      out.holds = out.recursive.value - out.recursive.error_below <= out.rhs + out.rhs_above + tol;
      out.equality = std::abs(out.slack) <= out.recursive.error_bound() + out.rhs_below + out.rhs_above + tol;
      return out;
   }

  private:
   [[nodiscard]] DualSolution recursive(const DualState& s, bool independent) const;

   [[nodiscard]] detail::Candidate evaluate(const DualState& s, const Matrix& tau, bool independent) const;

   [[nodiscard]] std::shared_ptr<const detail::ChildModel> child_model(const Matrix& Q, const AuxWeight& zeta,
                                                                       const Evaluation& theta) const;

   struct Inner {
      double value;
      std::vector<Vector> y;
   };
   [[nodiscard]] Inner solve_inner(const std::vector<detail::Child>& children, std::span<const double> z) const;

   GameSpec m_g;
   DualConfig m_cfg;
   mutable DualCache m_cache;
};

inline DualSolver::Inner DualSolver::solve_inner(const std::vector<detail::Child>& children,
                                                 std::span<const double> z) const
{
   const std::size_t K = m_g.k_size(), L = m_g.l_size(), I = m_g.i_size(), J = m_g.j_size();
   const std::size_t n = children.size();
   lp::Problem prob(lp::Sense::kMinimize);
   std::vector<std::size_t> tv(n), yv(n * K);
   std::vector<bool> active(n, false);
   for(std::size_t c = 0; c < n; ++c) {
      active[c] = children[c].weight > 0.0;
      if(!active[c])
         continue;
      tv[c] = prob.add_variable(children[c].weight, true);
      for(std::size_t k = 0; k < K; ++k)
         yv[c * K + k] = prob.add_variable(0.0, true);
   }
   for(std::size_t c = 0; c < n; ++c) {
      if(!active[c])
         continue;
      const detail::Child& ch = children[c];
      if(ch.model) {
         // t >= c_g + <s_g, y>
         for(const AffinePiece& piece : ch.model->model.pieces()) {
            std::vector<lp::Term> row{{tv[c], 1.0}};
            for(std::size_t k = 0; k < K; ++k)
               if(piece.slope[k] != 0.0)
                  row.push_back({yv[c * K + k], -piece.slope[k]});
            prob.add_constraint(std::move(row), lp::Relation::kGreaterEqual, piece.intercept);
         }
         continue;
      }
      // exact one-stage child: t >= zeta^k G^{k,Q}_{i' tau'} - y^k with tau' a variable
      std::vector<std::size_t> sv;
      if(!ch.zeta.is_zero()) {
         sv.resize(L * J);
         for(auto& v : sv)
            v = prob.add_variable(0.0);
         for(std::size_t l = 0; l < L; ++l) {
            std::vector<lp::Term> row;
            for(std::size_t j = 0; j < J; ++j)
               row.push_back({sv[l * J + j], 1.0});
            prob.add_constraint(std::move(row), lp::Relation::kEqual, 1.0);
         }
      }
      for(std::size_t k = 0; k < K; ++k) {
         const std::size_t rows = ch.zeta[k] == 0.0 ? 1 : I;
         for(std::size_t i = 0; i < rows; ++i) {
            std::vector<lp::Term> row{{tv[c], 1.0}, {yv[c * K + k], 1.0}};
            if(ch.zeta[k] != 0.0)
               for(std::size_t l = 0; l < L; ++l)
                  for(std::size_t j = 0; j < J; ++j) {
                     const double coef = ch.zeta[k] * ch.Q(k, l) * m_g(k, l, i, j);
                     if(coef != 0.0)
                        row.push_back({sv[l * J + j], -coef});
                  }
            prob.add_constraint(std::move(row), lp::Relation::kGreaterEqual, 0.0);
         }
      }
   }
   for(std::size_t k = 0; k < K; ++k) {
      std::vector<lp::Term> row;
      for(std::size_t c = 0; c < n; ++c)
         if(active[c])
            row.push_back({yv[c * K + k], children[c].weight});
      prob.add_constraint(std::move(row), lp::Relation::kEqual, z[k]);
   }
   const lp::Solution sol = lp::solve_or_throw(prob, "dual recursion inner problem");
   Inner out{0.0, std::vector<Vector>(n, Vector(K, 0.0))};
   for(std::size_t c = 0; c < n; ++c) {
      if(!active[c])
         continue;
      for(std::size_t k = 0; k < K; ++k)
         out.y[c][k] = sol.x[yv[c * K + k]];
      // models are evaluated at the split; exact children contribute their epigraph value
      out.value += children[c].weight
                   * (children[c].model ? children[c].model->model(out.y[c]) : sol.x[tv[c]]);
   }
   return out;
}

inline detail::Candidate DualSolver::evaluate(const DualState& s, const Matrix& tau, bool independent) const
{
   const std::size_t K = m_g.k_size(), L = m_g.l_size(), I = m_g.i_size(), J = m_g.j_size();
   const double t1 = s.theta.head();
   const Evaluation tail = s.theta.tail();
   const bool leaf = tail.single_stage();

   detail::Candidate c;
   c.children.resize(J);
   for(std::size_t j = 0; j < J; ++j) {
      detail::Child& ch = c.children[j];
      if(independent) {
         // taubar(j) = sum_l q^l tau^l(j) and q_j = q tau(j) / taubar(j)
         double tb = 0.0;
         for(std::size_t l = 0; l < L; ++l)
            tb += s.Q(0, l) * tau(l, j);
         ch.weight = tb;
         ch.Q = Matrix(K, L);
         for(std::size_t k = 0; k < K; ++k)
            for(std::size_t l = 0; l < L; ++l)
               ch.Q(k, l) = tb > 0.0 ? s.Q(0, l) * tau(l, j) / tb : s.Q(0, l);
         if(tb > 0.0)  // exact renormalization
            for(std::size_t k = 0; k < K; ++k) {
               const double rs = sum(ch.Q.row(k));
               for(std::size_t l = 0; l < L; ++l)
                  ch.Q(k, l) /= rs;
            }
         ch.zeta = s.zeta;
      } else {
         ch.Q = update_conditional(s.Q, tau, j).Q;
         ch.zeta = zeta_update(s.zeta, s.Q, tau, j);
      }
      if(!leaf && ch.weight > 0.0)
         ch.model = child_model(ch.Q, ch.zeta, tail);
   }

   c.y.resize(I);
   c.above.assign(I, std::vector<double>(J, 0.0));
   c.conj.assign(I, std::vector<double>(J, 0.0));
   double best = -std::numeric_limits<double>::infinity();
   for(std::size_t i = 0; i < I; ++i) {
      const Vector G = conditional_payoff_vector(m_g, s.Q, tau, i);
      Vector z(K);
      for(std::size_t k = 0; k < K; ++k)
         z[k] = (s.x[k] - t1 * s.zeta[k] * G[k]) / (1.0 - t1);
      Inner in = solve_inner(c.children, z);
      best = std::max(best, in.value);
      for(std::size_t j = 0; j < J; ++j) {
         const auto& m = c.children[j].model;
         if(m) {
            c.above[i][j] = m->above(in.y[j]);
            c.conj[i][j] = m->conj_above(in.y[j]);
         }
      }
      c.y[i] = std::move(in.y);
   }
   c.value = (1.0 - t1) * best;
   for(const auto& ch : c.children)
      if(ch.model) {
         c.below += (1.0 - t1) * ch.weight * ch.model->below;
         c.xgrid += (1.0 - t1) * ch.weight * ch.model->xgrid_part;
      }
   return c;
}

inline std::shared_ptr<const detail::ChildModel> DualSolver::child_model(const Matrix& Q, const AuxWeight& zeta,
                                                                         const Evaluation& theta) const
{
   const std::size_t K = m_g.k_size();
   std::vector<double> key(Q.data());
   key.insert(key.end(), zeta.zeta.begin(), zeta.zeta.end());
   key.push_back(-1.0);  // separator
   key.insert(key.end(), theta.weights().begin(), theta.weights().end());
   if(auto hit = m_cache.find(key))
      return hit;

   auto out = std::make_shared<detail::ChildModel>();
   const double M = m_g.payoff_bound() * zeta.max_abs();
   if(M == 0.0) {
      // the child's value function is identically zero
      out->model = zero_conjugate(K);
      m_cache.insert(std::move(key), out);
      return out;
   }

   // Sample R(x_s) = w(x_s) on the grid x^K = 0, x^k in [-2M, 2M]: a supergradient of the
   // M-Lipschitz concave v with centered norm at most M always lies in that box (up to a shift).
   const std::size_t sres = m_cfg.x_grid;
   std::vector<std::size_t> radices(K - 1, sres + 1);
   std::vector<Vector> xs;
   for_each_product(radices, [&](const std::vector<std::size_t>& idx) {
      Vector x(K, 0.0);
      for(std::size_t k = 0; k + 1 < K; ++k)
         x[k] = -2.0 * M + 4.0 * M * static_cast<double>(idx[k]) / static_cast<double>(sres);
      xs.push_back(std::move(x));
   });
   if(K == 1)
      xs = {Vector{0.0}};
   std::vector<double> R(xs.size()), below(xs.size()), above(xs.size());
   for(std::size_t a = 0; a < xs.size(); ++a) {
      const DualSolution d = solve(DualState{xs[a], Q, zeta, theta});
      R[a] = d.value;
      below[a] = d.error_below;
      above[a] = d.error_above;
   }
   const double A = *std::max_element(above.begin(), above.end());
   const double B = *std::max_element(below.begin(), below.end());

   // v(p_g) ~ min_s R(x_s) + <x_s, p_g>, then the conjugate of those samples
   const std::size_t pres = m_cfg.p_resolution(K);
   std::vector<AffinePiece> pieces;
   for(Vector& p : simplex_grid(K, pres, m_cfg.oracle.node_cap)) {
      double v = std::numeric_limits<double>::infinity();
      for(std::size_t a = 0; a < xs.size(); ++a)
         v = std::min(v, R[a] + dot(xs[a], p));
      Vector slope(K);
      for(std::size_t k = 0; k < K; ++k)
         slope[k] = -p[k];
      pieces.push_back(AffinePiece{std::move(slope), v});
   }
   out->model = ConvexModel(std::move(pieces));
   const double h = K == 1 ? 0.0 : 4.0 * M / static_cast<double>(sres);
   out->xgrid_part = h;
   out->below = h + B;
   out->sample_above = A;
   out->lipschitz = M;
   out->mesh = simplex_grid_mesh(K, pres);
   m_cache.insert(std::move(key), out);
   return out;
}

inline DualSolution DualSolver::recursive(const DualState& s, bool independent) const
{
   const std::size_t L = m_g.l_size(), I = m_g.i_size(), J = m_g.j_size();
   const double t1 = s.theta.head();
   const std::size_t r = m_cfg.tau_grid;
   const std::vector<Vector> rows = simplex_grid(J, r, m_cfg.tau_cap);
   double count = 1.0;
   for(std::size_t l = 0; l < L; ++l)
      count *= static_cast<double>(rows.size());
   if(count > static_cast<double>(m_cfg.tau_cap))
      throw ResourceError("tau grid of the dual recursion too large",
                          static_cast<std::size_t>(std::min(count, 1e18)), m_cfg.tau_cap);
   const std::size_t N = static_cast<std::size_t>(count);

   auto make_tau = [&](std::size_t idx) {
      Matrix tau(L, J);
      for(std::size_t l = L; l-- > 0;) {
         const Vector& row = rows[idx % rows.size()];
         idx /= rows.size();
         for(std::size_t j = 0; j < J; ++j)
            tau(l, j) = row[j];
      }
      return tau;
   };

   std::vector<double> values(N), belows(N);
   std::vector<std::unique_ptr<detail::Candidate>> kept(N);
   parallel_for(N, m_cfg.threads, [&](std::size_t a) {
      auto c = std::make_unique<detail::Candidate>(evaluate(s, make_tau(a), independent));
      values[a] = c->value;
      belows[a] = c->below;
      kept[a] = std::move(c);
   });
   // ties, up to LP round-off, keep the smallest grid index
   const double lowest = *std::min_element(values.begin(), values.end());
   std::size_t best = 0;
   while(values[best] > lowest + 1e-12 * (1.0 + std::abs(lowest)))
      ++best;
   const double tie_slack = values[best] - lowest;
   Matrix tau = make_tau(best);
   detail::Candidate inc = std::move(*kept[best]);
   double max_below = 0.0, max_xgrid = 0.0;
   for(std::size_t a = 0; a < N; ++a) {
      max_below = std::max(max_below, belows[a]);
      max_xgrid = std::max(max_xgrid, kept[a]->xgrid);
   }
   kept.clear();
   std::size_t evaluated = N;

   const double improve = 1e-12 * (1.0 + std::abs(inc.value));
   auto consider = [&](const Matrix& cand) {
      detail::Candidate c = evaluate(s, cand, independent);
      ++evaluated;
      if(c.value < inc.value - improve) {
         inc = std::move(c);
         tau = cand;
      }
   };

   if(m_cfg.refine && m_cfg.refine_factor > 1) {
      // one coordinate pass: each row of tau over the finer grid near the incumbent row
      const std::size_t rf = r * m_cfg.refine_factor;
      const std::vector<Vector> fine = simplex_grid(J, rf, m_cfg.tau_cap);
      const double radius = 2.0 / static_cast<double>(r) + 1e-12;
      for(std::size_t l = 0; l < L; ++l) {
         const Vector center = tau.row_vector(l);
         for(const Vector& row : fine) {
            if(l1_distance(row, center) > radius || l1_distance(row, center) < 1e-15)
               continue;
            Matrix cand = tau;
            for(std::size_t j = 0; j < J; ++j)
               cand(l, j) = row[j];
            consider(cand);
         }
      }
      // seeded jitter around the incumbent
      std::mt19937_64 rng(m_cfg.seed);
      std::normal_distribution<double> noise(0.0, 1.0 / static_cast<double>(rf));
      for(std::size_t t = 0; t < m_cfg.jitter; ++t) {
         Matrix cand = tau;
         for(std::size_t l = 0; l < L; ++l) {
            double total = 0.0;
            for(std::size_t j = 0; j < J; ++j)
               total += cand(l, j) = std::max(0.0, cand(l, j) + noise(rng));
            if(!(total > 0.0))
               for(std::size_t j = 0; j < J; ++j)
                  cand(l, j) = tau(l, j);
            else
               for(std::size_t j = 0; j < J; ++j)
                  cand(l, j) /= total;
         }
         consider(cand);
      }
   }

   DualSolution out;
   out.value = inc.value;
   out.tau = tau;
   out.candidates = evaluated;
   // w(tau) is M-Lipschitz in tau for the max over l of the l1 distance, M = ||G|| max|zeta|
   const double M = m_g.payoff_bound() * s.zeta.max_abs();
   out.tau_term = M * simplex_grid_mesh(J, r);
   out.xgrid_term = max_xgrid;
   out.error_below = out.tau_term + max_below + tie_slack;
   double above = 0.0, conj = 0.0;
   for(std::size_t i = 0; i < I; ++i) {
      double a = 0.0, c = 0.0;
      for(std::size_t j = 0; j < J; ++j) {
         a += inc.children[j].weight * inc.above[i][j];
         c += inc.children[j].weight * inc.conj[i][j];
      }
      above = std::max(above, (1.0 - t1) * a);
      conj = std::max(conj, (1.0 - t1) * c);
   }
   out.error_above = above;
   out.conj_term = conj;
   out.child_term = (max_below - max_xgrid) + (above - conj);
   out.splits = std::move(inc.y);
   out.child_above = std::move(inc.above);
   for(std::size_t j = 0; j < J; ++j) {
      out.child_Q.push_back(inc.children[j].Q);
      out.child_zeta.push_back(inc.children[j].zeta);
   }
   if(independent) {
      out.weights.resize(J);
      for(std::size_t j = 0; j < J; ++j)
         out.weights[j] = inc.children[j].weight;
   }
   return out;
}

// Free-function forms.

inline DualSolution dual_recursive(const GameSpec& g, const DualState& s, const DualConfig& cfg = {})
{
   return DualSolver(g, cfg).dual_recursive(s);
}

inline DualSolution independent_recursive(const GameSpec& g, std::span<const double> x,
                                          std::span<const double> q, const Evaluation& theta,
                                          const DualConfig& cfg = {})
{
   return DualSolver(g, cfg).independent_recursive(x, q, theta);
}

inline NonRevealing nonrevealing_bound(const GameSpec& g, std::span<const double> x, const Matrix& Q,
                                       const Evaluation& theta, const DualConfig& cfg = {})
{
   return DualSolver(g, cfg).nonrevealing_bound(x, Q, theta);
}

}  // namespace dualgame

#endif  // DUALGAME_DUAL_SOLVER_HPP
