#ifndef DUALGAME_LP_HPP
#define DUALGAME_LP_HPP

// Dense two-phase tableau simplex. Small and reentrant: no global state, every solve owns its
// tableau. Entering columns follow Dantzig's rule and leaving rows Harris' two-pass ratio test.
// A long run of degenerate pivots triggers a small seeded perturbation of the right-hand side;
// the basis is periodically reinverted from the original data, which also removes the
// perturbation, and dual pivots then restore exact feasibility.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dualgame/errors.hpp"
#include "dualgame/numeric.hpp"

namespace dualgame::lp {

enum class Sense { kMinimize, kMaximize };
enum class Relation { kLessEqual, kEqual, kGreaterEqual };
enum class Status { kOptimal, kInfeasible, kUnbounded };

struct Term {
   std::size_t var;
   double coef;
};

struct Options {
   double tolerance = kLpTol;
   /// Consecutive degenerate pivots tolerated before the right-hand side is perturbed.
   std::size_t degenerate_run = 32;
   /// Relative size of the perturbation.
   double perturbation = 1e-6;
   std::size_t max_pivots = 200000;
   /// Pivots between two reinversions of the basis (at least the row count is used).
   std::size_t refactor_every = 100;
   /// Seed of the perturbation; fixed so every solve is reproducible.
   std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

struct Solution {
   Status status = Status::kInfeasible;
   double objective = 0.0;
   Vector x;
   std::size_t pivots = 0;

   [[nodiscard]] bool optimal() const noexcept { return status == Status::kOptimal; }
};

/// A linear program over variables that are either nonnegative or free.
class Problem {
  public:
   explicit Problem(Sense sense = Sense::kMinimize) : m_sense(sense) {}

   std::size_t add_variable(double cost = 0.0, bool free = false)
   {
      m_cost.push_back(cost);
      m_free.push_back(free);
      return m_cost.size() - 1;
   }

   void set_cost(std::size_t var, double cost) { m_cost.at(var) = cost; }

   void add_constraint(std::vector<Term> terms, Relation rel, double rhs)
   {
      for(const auto& t : terms)
         if(t.var >= m_cost.size())
            throw DomainError("lp: constraint references unknown variable");
      m_rows.push_back(Row{std::move(terms), rel, rhs});
   }

   [[nodiscard]] std::size_t num_variables() const noexcept { return m_cost.size(); }
   [[nodiscard]] std::size_t num_constraints() const noexcept { return m_rows.size(); }

   [[nodiscard]] Solution solve(const Options& opt = {}) const;

   /// Largest constraint or sign violation of `x`.
   [[nodiscard]] double max_violation(const Vector& x) const
   {
      double worst = 0.0;
      for(std::size_t v = 0; v < m_cost.size(); ++v)
         if(!m_free[v])
            worst = std::max(worst, -x[v]);
      for(const Row& r : m_rows) {
         double lhs = 0.0;
         for(const Term& t : r.terms)
            lhs += t.coef * x[t.var];
         const double d = lhs - r.rhs;
         if(r.rel == Relation::kLessEqual)
            worst = std::max(worst, d);
         else if(r.rel == Relation::kGreaterEqual)
            worst = std::max(worst, -d);
         else
            worst = std::max(worst, std::abs(d));
      }
      return worst;
   }

  private:
   struct Row {
      std::vector<Term> terms;
      Relation rel;
      double rhs;
   };

   Sense m_sense;
   std::vector<double> m_cost;
   std::vector<bool> m_free;
   std::vector<Row> m_rows;
};

namespace detail {

class Tableau {
  public:
   Tableau(std::size_t rows, std::size_t cols)
       : t(rows, cols + 1), basis(rows, 0), obj(cols + 1, 0.0), cost(cols, 0.0), row_alive(rows, true)
   {
   }

   Matrix t;   // B^-1 [A | b]; last column is the right-hand side
   Matrix a0;  // the original [A | b]
   std::vector<std::size_t> basis;
   std::vector<double> obj;   // reduced costs, last entry = -objective
   std::vector<double> cost;  // cost of the current phase
   std::vector<bool> row_alive;

   [[nodiscard]] std::size_t cols() const { return obj.size() - 1; }
   [[nodiscard]] std::size_t rhs() const { return obj.size() - 1; }

   void pivot(std::size_t pr, std::size_t pc)
   {
      const std::size_t n = obj.size();
      auto prow = t.row(pr);
      const double inv = 1.0 / prow[pc];
      for(std::size_t j = 0; j < n; ++j)
         prow[j] *= inv;
      prow[pc] = 1.0;
      for(std::size_t r = 0; r < t.rows(); ++r) {
         if(r == pr)
            continue;
         auto row = t.row(r);
         const double f = row[pc];
         if(f == 0.0)
            continue;
         for(std::size_t j = 0; j < n; ++j)
            row[j] -= f * prow[j];
         row[pc] = 0.0;
      }
      const double f = obj[pc];
      if(f != 0.0) {
         for(std::size_t j = 0; j < n; ++j)
            obj[j] -= f * prow[j];
         obj[pc] = 0.0;
      }
      basis[pr] = pc;
   }

   /// obj = cost - cost_B B^-1 [A | b].
   void refresh_objective()
   {
      const std::size_t n = obj.size();
      for(std::size_t j = 0; j + 1 < n; ++j)
         obj[j] = cost[j];
      obj[n - 1] = 0.0;
      for(std::size_t r = 0; r < t.rows(); ++r) {
         const double cb = cost[basis[r]];
         if(cb == 0.0)
            continue;
         auto row = t.row(r);
         for(std::size_t j = 0; j < n; ++j)
            obj[j] -= cb * row[j];
      }
      for(std::size_t r = 0; r < t.rows(); ++r)
         obj[basis[r]] = 0.0;
   }

   /// Recomputes B^-1 [A | b] from the original data by LU with partial pivoting, discarding
   /// the rounding accumulated by pivoting. Leaves the tableau alone if B looks singular.
   void reinvert()
   {
      const std::size_t m = t.rows(), n = obj.size();
      if(m == 0)
         return;
      Matrix lu(m, m);
      for(std::size_t r = 0; r < m; ++r)
         for(std::size_t c = 0; c < m; ++c)
            lu(r, c) = a0(r, basis[c]);
      std::vector<std::size_t> perm(m);
      for(std::size_t r = 0; r < m; ++r)
         perm[r] = r;
      for(std::size_t c = 0; c < m; ++c) {
         std::size_t piv = c;
         for(std::size_t r = c + 1; r < m; ++r)
            if(std::abs(lu(r, c)) > std::abs(lu(piv, c)))
               piv = r;
         if(std::abs(lu(piv, c)) < 1e-13)
            return;
         if(piv != c) {
            for(std::size_t k = 0; k < m; ++k)
               std::swap(lu(c, k), lu(piv, k));
            std::swap(perm[c], perm[piv]);
         }
         for(std::size_t r = c + 1; r < m; ++r) {
            const double f = lu(r, c) /= lu(c, c);
            if(f == 0.0)
               continue;
            for(std::size_t k = c + 1; k < m; ++k)
               lu(r, k) -= f * lu(c, k);
         }
      }
      // solve B X = A0 column by column; row r of X belongs to basis[r]
      Vector y(m);
      for(std::size_t j = 0; j < n; ++j) {
         for(std::size_t r = 0; r < m; ++r)
            y[r] = a0(perm[r], j);
         for(std::size_t r = 0; r < m; ++r)
            for(std::size_t k = 0; k < r; ++k)
               y[r] -= lu(r, k) * y[k];
         for(std::size_t r = m; r-- > 0;) {
            for(std::size_t k = r + 1; k < m; ++k)
               y[r] -= lu(r, k) * y[k];
            y[r] /= lu(r, r);
         }
         for(std::size_t r = 0; r < m; ++r)
            t(r, j) = y[r];
      }
      for(std::size_t r = 0; r < m; ++r)
         for(std::size_t c = 0; c < m; ++c)
            t(r, basis[c]) = r == c ? 1.0 : 0.0;
      refresh_objective();
   }

   /// Dual simplex pivots until the basic solution is nonnegative; the reduced costs stay
   /// nonnegative throughout. Returns false if some row admits no pivot.
   bool restore_feasibility(const std::vector<bool>& allowed, const Options& opt, std::size_t& pivots)
   {
      const std::size_t n = cols();
      while(true) {
         std::size_t r = t.rows();
         double worst = -opt.tolerance;
         for(std::size_t i = 0; i < t.rows(); ++i)
            if(row_alive[i] && t(i, rhs()) < worst) {
               worst = t(i, rhs());
               r = i;
            }
         if(r == t.rows())
            return true;
         std::size_t enter = n;
         double best = std::numeric_limits<double>::infinity();
         for(std::size_t j = 0; j < n; ++j) {
            const double a = t(r, j);
            if(!allowed[j] || a >= -opt.tolerance)
               continue;
            const double q = std::max(0.0, obj[j]) / -a;
            if(q < best) {
               best = q;
               enter = j;
            }
         }
         if(enter == n)
            return false;
         pivot(r, enter);
         if(++pivots > opt.max_pivots)
            throw LpError("lp: pivot budget exhausted");
      }
   }

   /// Minimizes the objective row over columns flagged in `allowed`.
   Status optimize(const std::vector<bool>& allowed, const Options& opt, std::size_t& pivots)
   {
      const std::size_t n = cols();
      const std::size_t refactor = std::max(opt.refactor_every, t.rows());
      std::size_t degenerate = 0, since_refactor = 1;
      bool perturbed = false;
      std::mt19937_64 rng(opt.seed);
      std::uniform_real_distribution<double> unit(1.0, 2.0);
      // Fresh inverse of the original data; this drops any perturbation, after which dual
      // pivots repair the (slightly) infeasible basic solution.
      auto refresh = [&] {
         reinvert();
         perturbed = false;
         const std::size_t before = pivots;
         if(!restore_feasibility(allowed, opt, pivots))
            throw LpError("lp: numerical breakdown while restoring feasibility");
         if(pivots != before)
            reinvert();
         since_refactor = 0;
      };
      while(true) {
         std::size_t enter = n;
         double best = -opt.tolerance;
         for(std::size_t j = 0; j < n; ++j)
            if(allowed[j] && obj[j] < best) {
               best = obj[j];
               enter = j;
            }
         if(enter == n) {
            if(since_refactor == 0 && !perturbed)
               return Status::kOptimal;
            refresh();
            continue;
         }

         // Harris: bound the step with relaxed bounds, then take the largest pivot element among
         // the rows that fit under it, ties to the smallest basic index. A strict minimum-ratio
         // test would accept pivots near the tolerance on degenerate rows.
         double bound = std::numeric_limits<double>::infinity();
         for(std::size_t r = 0; r < t.rows(); ++r) {
            const double a = t(r, enter);
            if(row_alive[r] && a > opt.tolerance)
               bound = std::min(bound, (std::max(0.0, t(r, rhs())) + opt.tolerance) / a);
         }
         std::size_t leave = t.rows();
         double ratio = 0.0, best_a = 0.0;
         for(std::size_t r = 0; r < t.rows(); ++r) {
            const double a = t(r, enter);
            if(!row_alive[r] || a <= opt.tolerance)
               continue;
            const double q = std::max(0.0, t(r, rhs())) / a;
            if(q > bound)
               continue;
            const bool larger = a > best_a * (1.0 + 1e-12);
            const bool tie = a >= best_a * (1.0 - 1e-12) && leave < t.rows() && basis[r] < basis[leave];
            if(larger || tie) {
               best_a = a;
               leave = r;
               ratio = q;
            }
         }
         if(leave == t.rows()) {
            if(since_refactor == 0 && !perturbed)
               return Status::kUnbounded;
            refresh();
            continue;
         }
         if(ratio <= 1e-12) {
            if(++degenerate > opt.degenerate_run && !perturbed) {
               // stalling on a degenerate vertex: spread the right-hand side apart
               for(std::size_t r = 0; r < t.rows(); ++r)
                  if(row_alive[r])
                     t(r, rhs()) = std::max(0.0, t(r, rhs()))
                                   + opt.perturbation * unit(rng) * (1.0 + std::abs(t(r, rhs())));
               perturbed = true;
               degenerate = 0;
               continue;
            }
         } else {
            degenerate = 0;
         }
         pivot(leave, enter);
         if(++since_refactor >= refactor)
            refresh();
         if(++pivots > opt.max_pivots)
            throw LpError("lp: pivot budget exhausted");
      }
   }
};

}  // namespace detail

inline Solution Problem::solve(const Options& opt) const
{
   const std::size_t nvar = m_cost.size();
   const std::size_t m = m_rows.size();

   // Column layout: structural columns (free variables split in two), then one slack or
   // surplus per inequality, then one artificial per row that needs it.
   std::vector<std::size_t> pos_col(nvar), neg_col(nvar, static_cast<std::size_t>(-1));
   std::size_t ncols = 0;
   for(std::size_t v = 0; v < nvar; ++v) {
      pos_col[v] = ncols++;
      if(m_free[v])
         neg_col[v] = ncols++;
   }

   std::vector<double> sign(m, 1.0);
   std::vector<std::size_t> slack_col(m, static_cast<std::size_t>(-1));
   std::vector<bool> needs_art(m, false);
   for(std::size_t r = 0; r < m; ++r) {
      Relation rel = m_rows[r].rel;
      if(m_rows[r].rhs < 0.0) {
         sign[r] = -1.0;
         if(rel == Relation::kLessEqual)
            rel = Relation::kGreaterEqual;
         else if(rel == Relation::kGreaterEqual)
            rel = Relation::kLessEqual;
      }
      if(rel != Relation::kEqual)
         slack_col[r] = ncols++;
      needs_art[r] = rel != Relation::kLessEqual;
   }
   const std::size_t first_art = ncols;
   std::vector<std::size_t> art_col(m, static_cast<std::size_t>(-1));
   for(std::size_t r = 0; r < m; ++r)
      if(needs_art[r])
         art_col[r] = ncols++;

   detail::Tableau tab(m, ncols);
   tab.row_alive.assign(m, true);
   for(std::size_t r = 0; r < m; ++r) {
      const Row& row = m_rows[r];
      const double s = sign[r];
      for(const Term& term : row.terms) {
         tab.t(r, pos_col[term.var]) += s * term.coef;
         if(m_free[term.var])
            tab.t(r, neg_col[term.var]) -= s * term.coef;
      }
      Relation rel = row.rel;
      if(s < 0 && rel != Relation::kEqual)
         rel = rel == Relation::kLessEqual ? Relation::kGreaterEqual : Relation::kLessEqual;
      if(rel == Relation::kLessEqual)
         tab.t(r, slack_col[r]) = 1.0;
      else if(rel == Relation::kGreaterEqual)
         tab.t(r, slack_col[r]) = -1.0;
      tab.t(r, tab.rhs()) = s * row.rhs;
      if(needs_art[r]) {
         tab.t(r, art_col[r]) = 1.0;
         tab.basis[r] = art_col[r];
      } else {
         tab.basis[r] = slack_col[r];
      }
   }

   tab.a0 = tab.t;
   Solution sol;
   std::vector<bool> allowed(ncols, true);

   // Phase 1: minimize the sum of artificials.
   if(first_art < ncols) {
      for(std::size_t j = first_art; j < ncols; ++j)
         tab.cost[j] = 1.0;
      tab.refresh_objective();
      if(tab.optimize(allowed, opt, sol.pivots) != Status::kOptimal)
         throw LpError("lp: numerical breakdown in phase 1");
      double scale = 1.0;
      for(const auto& row : m_rows)
         scale = std::max(scale, std::abs(row.rhs));
      if(-tab.obj[tab.rhs()] > opt.tolerance * scale) {
         sol.status = Status::kInfeasible;
         return sol;
      }
      // Drive artificials out of the basis; rows where that fails are redundant.
      for(std::size_t r = 0; r < m; ++r) {
         if(tab.basis[r] < first_art)
            continue;
         std::size_t pc = first_art;
         double best = opt.tolerance;
         for(std::size_t j = 0; j < first_art; ++j) {
            if(std::abs(tab.t(r, j)) > best) {
               best = std::abs(tab.t(r, j));
               pc = j;
            }
         }
         if(pc < first_art)
            tab.pivot(r, pc);
         else
            tab.row_alive[r] = false;
      }
      for(std::size_t j = first_art; j < ncols; ++j)
         allowed[j] = false;
   }

   // Phase 2.
   std::vector<double> c(ncols, 0.0);
   const double dir = m_sense == Sense::kMaximize ? -1.0 : 1.0;
   for(std::size_t v = 0; v < nvar; ++v) {
      c[pos_col[v]] = dir * m_cost[v];
      if(m_free[v])
         c[neg_col[v]] = -dir * m_cost[v];
   }
   tab.cost = c;
   tab.refresh_objective();

   const Status st = tab.optimize(allowed, opt, sol.pivots);
   if(st == Status::kUnbounded) {
      sol.status = Status::kUnbounded;
      return sol;
   }

   std::vector<double> colval(ncols, 0.0);
   for(std::size_t r = 0; r < m; ++r)
      if(tab.row_alive[r])
         colval[tab.basis[r]] = tab.t(r, tab.rhs());
   sol.x.assign(nvar, 0.0);
   double objective = 0.0;
   for(std::size_t v = 0; v < nvar; ++v) {
      double val = colval[pos_col[v]];
      if(m_free[v])
         val -= colval[neg_col[v]];
      sol.x[v] = val;
      objective += m_cost[v] * val;
   }
   sol.objective = objective;
   sol.status = Status::kOptimal;
   double scale = 1.0;
   for(double v : sol.x)
      scale = std::max(scale, std::abs(v));
   for(const auto& row : m_rows)
      scale = std::max(scale, std::abs(row.rhs));
   if(max_violation(sol.x) > 1e-6 * scale)
      throw LpError("lp: numerical breakdown, optimal basis violates the constraints");
   return sol;
}

/// Solves and throws `LpError` unless the program has an optimal solution.
inline Solution solve_or_throw(const Problem& p, const std::string& what, const Options& opt = {})
{
   Solution s = p.solve(opt);
   if(s.status == Status::kInfeasible)
      throw LpError(what + ": linear program infeasible");
   if(s.status == Status::kUnbounded)
      throw LpError(what + ": linear program unbounded");
   return s;
}

}  // namespace dualgame::lp

#endif  // DUALGAME_LP_HPP
