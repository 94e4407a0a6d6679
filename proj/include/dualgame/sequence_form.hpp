#ifndef DUALGAME_SEQUENCE_FORM_HPP
#define DUALGAME_SEQUENCE_FORM_HPP

// Two-player zero-sum games in sequence form. Each player's decision problem is a treeplex:
// sequence 0 is the empty sequence, and every information set owns a contiguous block of
// sequences (one per action) and hangs below a parent sequence. The value is one linear program
// per player.

#include <cstddef>
#include <string>
#include <vector>

#include "dualgame/errors.hpp"
#include "dualgame/lp.hpp"
#include "dualgame/numeric.hpp"

namespace dualgame::sf {

struct Infoset {
   std::size_t parent;   ///< parent sequence
   std::size_t first;    ///< first own sequence
   std::size_t actions;
};

class Treeplex {
  public:
   std::size_t add_infoset(std::size_t parent, std::size_t actions)
   {
      if(parent >= m_sequences || actions == 0)
         throw DomainError("Treeplex: bad parent sequence or empty action set");
      m_infosets.push_back(Infoset{parent, m_sequences, actions});
      m_sequences += actions;
      return m_infosets.size() - 1;
   }

   [[nodiscard]] std::size_t sequences() const noexcept { return m_sequences; }
   [[nodiscard]] const std::vector<Infoset>& infosets() const noexcept { return m_infosets; }

   /// Behavioral probabilities at infoset `s` from a realization plan; uniform where the
   /// parent sequence is (numerically) never played.
   [[nodiscard]] Vector behavior(const Vector& plan, std::size_t s) const
   {
      const Infoset& is = m_infosets[s];
      Vector out(is.actions, 1.0 / static_cast<double>(is.actions));
      const double reach = plan[is.parent];
      if(reach <= 1e-12)
         return out;
      double total = 0.0;
      for(std::size_t a = 0; a < is.actions; ++a)
         total += out[a] = std::max(0.0, plan[is.first + a]);
      if(!(total > 0.0))
         return Vector(is.actions, 1.0 / static_cast<double>(is.actions));
      for(double& v : out)
         v /= total;
      return out;
   }

  private:
   std::size_t m_sequences = 1;
   std::vector<Infoset> m_infosets;
};

struct Entry {
   std::size_t s1;
   std::size_t s2;
   double value;
};

/// Payoff to player 1 (the maximizer) is sum over entries of x[s1] y[s2] value.
struct Game {
   Treeplex p1;
   Treeplex p2;
   std::vector<Entry> payoff;
};

struct Solution {
   double value;
   Vector plan;  ///< realization plan of the solving player
};

namespace detail {

// Rows of the constraint F' q <= (or >=) payoff for the opponent's sequences: for sequence s,
// q_root if s is empty, else q of its infoset, minus q of every infoset hanging below s.
inline std::vector<std::vector<lp::Term>> dual_rows(const Treeplex& t, const std::vector<std::size_t>& qvar,
                                                    std::size_t qroot)
{
   std::vector<std::vector<lp::Term>> rows(t.sequences());
   rows[0].push_back({qroot, 1.0});
   for(std::size_t s = 0; s < t.infosets().size(); ++s) {
      const Infoset& is = t.infosets()[s];
      for(std::size_t a = 0; a < is.actions; ++a)
         rows[is.first + a].push_back({qvar[s], 1.0});
      rows[is.parent].push_back({qvar[s], -1.0});
   }
   return rows;
}

inline void add_plan_constraints(lp::Problem& prob, const Treeplex& t, const std::vector<std::size_t>& xv)
{
   prob.add_constraint({{xv[0], 1.0}}, lp::Relation::kEqual, 1.0);
   for(const Infoset& is : t.infosets()) {
      std::vector<lp::Term> terms{{xv[is.parent], -1.0}};
      for(std::size_t a = 0; a < is.actions; ++a)
         terms.push_back({xv[is.first + a], 1.0});
      prob.add_constraint(std::move(terms), lp::Relation::kEqual, 0.0);
   }
}

}  // namespace detail

/// max_x min_y x'Ay: the value and an optimal plan of player 1.
inline Solution solve_max(const Game& g)
{
   lp::Problem prob(lp::Sense::kMaximize);
   std::vector<std::size_t> xv(g.p1.sequences());
   for(auto& v : xv)
      v = prob.add_variable(0.0);
   std::vector<std::size_t> qv(g.p2.infosets().size());
   for(auto& v : qv)
      v = prob.add_variable(0.0, true);
   const std::size_t qroot = prob.add_variable(1.0, true);

   detail::add_plan_constraints(prob, g.p1, xv);
   auto rows = detail::dual_rows(g.p2, qv, qroot);
   for(const Entry& e : g.payoff)
      rows[e.s2].push_back({xv[e.s1], -e.value});
   for(auto& r : rows)
      prob.add_constraint(std::move(r), lp::Relation::kLessEqual, 0.0);

   lp::Solution s = lp::solve_or_throw(prob, "sequence-form (player 1)");
   Solution out{s.objective, Vector(xv.size())};
   for(std::size_t i = 0; i < xv.size(); ++i)
      out.plan[i] = s.x[xv[i]];
   return out;
}

/// min_y max_x x'Ay: the value and an optimal plan of player 2.
inline Solution solve_min(const Game& g)
{
   lp::Problem prob(lp::Sense::kMinimize);
   std::vector<std::size_t> yv(g.p2.sequences());
   for(auto& v : yv)
      v = prob.add_variable(0.0);
   std::vector<std::size_t> pv(g.p1.infosets().size());
   for(auto& v : pv)
      v = prob.add_variable(0.0, true);
   const std::size_t proot = prob.add_variable(1.0, true);

   detail::add_plan_constraints(prob, g.p2, yv);
   auto rows = detail::dual_rows(g.p1, pv, proot);
   for(const Entry& e : g.payoff)
      rows[e.s1].push_back({yv[e.s2], -e.value});
   for(auto& r : rows)
      prob.add_constraint(std::move(r), lp::Relation::kGreaterEqual, 0.0);

   lp::Solution s = lp::solve_or_throw(prob, "sequence-form (player 2)");
   Solution out{s.objective, Vector(yv.size())};
   for(std::size_t i = 0; i < yv.size(); ++i)
      out.plan[i] = s.x[yv[i]];
   return out;
}

inline double evaluate(const Game& g, const Vector& x, const Vector& y)
{
   double v = 0.0;
   for(const Entry& e : g.payoff)
      v += x[e.s1] * y[e.s2] * e.value;
   return v;
}

}  // namespace dualgame::sf

#endif  // DUALGAME_SEQUENCE_FORM_HPP
