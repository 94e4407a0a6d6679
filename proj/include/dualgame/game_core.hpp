#ifndef DUALGAME_GAME_CORE_HPP
#define DUALGAME_GAME_CORE_HPP

// Data model of a repeated zero-sum game with incomplete information on both sides, the
// Bayesian bookkeeping of one stage of play, and exact payoff evaluation by enumerating
// type pairs and public histories.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dualgame/errors.hpp"
#include "dualgame/numeric.hpp"

namespace dualgame {

/// Default budget on the number of public histories any enumeration may visit.
inline constexpr std::size_t kDefaultHistoryCap = 1'000'000;

/// The family of I x J matrix games G^{kl}, indexed by the type pair (k, l).
class GameSpec {
  public:
   GameSpec() = default;

   /// `payoff` is laid out row-major over (k, l, i, j).
   GameSpec(std::size_t k_size, std::size_t l_size, std::size_t i_size, std::size_t j_size,
            std::vector<double> payoff)
       : m_k(k_size), m_l(l_size), m_i(i_size), m_j(j_size), m_payoff(std::move(payoff))
   {
      if(m_k == 0 || m_l == 0 || m_i == 0 || m_j == 0)
         throw InvariantError("GameSpec: all set sizes must be positive");
      if(m_payoff.size() != m_k * m_l * m_i * m_j)
         throw InvariantError("GameSpec: payoff tensor has " + std::to_string(m_payoff.size())
                              + " entries, expected " + std::to_string(m_k * m_l * m_i * m_j));
      for(double v : m_payoff) {
         if(!std::isfinite(v))
            throw InvariantError("GameSpec: payoff entries must be finite");
         m_bound = std::max(m_bound, std::abs(v));
      }
   }

   /// Builds from matrices indexed [k][l], each I x J.
   static GameSpec from_matrices(const std::vector<std::vector<Matrix>>& g)
   {
      if(g.empty() || g.front().empty())
         throw InvariantError("GameSpec: empty payoff family");
      const std::size_t K = g.size(), L = g.front().size();
      const std::size_t I = g[0][0].rows(), J = g[0][0].cols();
      std::vector<double> t;
      t.reserve(K * L * I * J);
      for(const auto& row : g) {
         if(row.size() != L)
            throw InvariantError("GameSpec: ragged payoff family");
         for(const Matrix& m : row) {
            if(m.rows() != I || m.cols() != J)
               throw InvariantError("GameSpec: payoff matrices must share one shape");
            t.insert(t.end(), m.data().begin(), m.data().end());
         }
      }
      return GameSpec(K, L, I, J, std::move(t));
   }

   [[nodiscard]] std::size_t k_size() const noexcept { return m_k; }
   [[nodiscard]] std::size_t l_size() const noexcept { return m_l; }
   [[nodiscard]] std::size_t i_size() const noexcept { return m_i; }
   [[nodiscard]] std::size_t j_size() const noexcept { return m_j; }

   [[nodiscard]] double operator()(std::size_t k, std::size_t l, std::size_t i, std::size_t j) const
   {
      return m_payoff[((k * m_l + l) * m_i + i) * m_j + j];
   }

   /// max |G^{kl}(i, j)| over all indices.
   [[nodiscard]] double payoff_bound() const noexcept { return m_bound; }

   [[nodiscard]] const std::vector<double>& tensor() const noexcept { return m_payoff; }

   friend bool operator==(const GameSpec&, const GameSpec&) = default;

  private:
   std::size_t m_k = 0, m_l = 0, m_i = 0, m_j = 0;
   std::vector<double> m_payoff;
   double m_bound = 0.0;
};

/// A probability pi on K x L.
class JointBelief {
  public:
   JointBelief() = default;
   explicit JointBelief(Matrix pi) : m_pi(std::move(pi))
   {
      if(m_pi.rows() == 0 || m_pi.cols() == 0)
         throw InvariantError("JointBelief: empty matrix");
      double total = 0.0;
      for(double v : m_pi.data()) {
         if(!(v >= 0.0) || !std::isfinite(v))
            throw InvariantError("JointBelief: entries must be finite and nonnegative");
         total += v;
      }
      if(std::abs(total - 1.0) > kProbTol)
         throw InvariantError("JointBelief: entries sum to " + std::to_string(total)
                              + ", expected 1");
   }

   [[nodiscard]] std::size_t k_size() const noexcept { return m_pi.rows(); }
   [[nodiscard]] std::size_t l_size() const noexcept { return m_pi.cols(); }
   [[nodiscard]] double operator()(std::size_t k, std::size_t l) const { return m_pi(k, l); }
   [[nodiscard]] const Matrix& matrix() const noexcept { return m_pi; }

   [[nodiscard]] Vector marginal_k() const
   {
      Vector p(k_size(), 0.0);
      for(std::size_t k = 0; k < k_size(); ++k)
         p[k] = sum(m_pi.row(k));
      return p;
   }

   [[nodiscard]] Vector marginal_l() const
   {
      Vector q(l_size(), 0.0);
      for(std::size_t k = 0; k < k_size(); ++k)
         for(std::size_t l = 0; l < l_size(); ++l)
            q[l] += m_pi(k, l);
      return q;
   }

   friend bool operator==(const JointBelief&, const JointBelief&) = default;

  private:
   Matrix m_pi;
};

/// Checks that every row of `q` is a probability vector.
inline void validate_row_stochastic(const Matrix& q, const char* what, double tol = kProbTol)
{
   for(std::size_t r = 0; r < q.rows(); ++r)
      if(!is_probability(q.row(r), tol))
         throw InvariantError(std::string(what) + ": row " + std::to_string(r + 1)
                              + " is not a probability vector (sums to "
                              + std::to_string(sum(q.row(r))) + ")");
}

/// pi = p (x) Q: the K-marginal and the conditional law of l given k.
struct Disintegration {
   Vector p;
   Matrix Q;

   /// Rows of Q where p^k = 0 are set to the uniform distribution.
   static Disintegration of(const JointBelief& pi)
   {
      Disintegration d;
      d.p = pi.marginal_k();
      d.Q = Matrix(pi.k_size(), pi.l_size());
      for(std::size_t k = 0; k < pi.k_size(); ++k) {
         for(std::size_t l = 0; l < pi.l_size(); ++l)
            d.Q(k, l) = d.p[k] > 0.0 ? pi(k, l) / d.p[k] : 1.0 / static_cast<double>(pi.l_size());
      }
      return d;
   }

   [[nodiscard]] JointBelief product() const { return product(p, Q); }

   static JointBelief product(std::span<const double> p, const Matrix& Q)
   {
      Matrix pi(Q.rows(), Q.cols());
      double total = 0.0;
      for(std::size_t k = 0; k < Q.rows(); ++k)
         for(std::size_t l = 0; l < Q.cols(); ++l)
            total += pi(k, l) = p[k] * Q(k, l);
      // absorb rounding so the product always validates
      if(total > 0.0 && std::abs(total - 1.0) <= 1e-9)
         for(std::size_t k = 0; k < Q.rows(); ++k)
            for(std::size_t l = 0; l < Q.cols(); ++l)
               pi(k, l) /= total;
      return JointBelief(std::move(pi));
   }
};

/// Stage weights theta_1..theta_n of the payoff evaluation.
class Evaluation {
  public:
   Evaluation() = default;
   explicit Evaluation(Vector weights) : m_w(std::move(weights))
   {
      if(m_w.empty())
         throw InvariantError("Evaluation: at least one stage weight is required");
      if(!is_probability(m_w))
         throw InvariantError("Evaluation: weights must be nonnegative and sum to 1 (sum is "
                              + std::to_string(sum(m_w)) + ")");
   }

   static Evaluation uniform(std::size_t horizon) { return Evaluation(dualgame::uniform(horizon)); }

   [[nodiscard]] std::size_t horizon() const noexcept { return m_w.size(); }
   [[nodiscard]] double head() const { return m_w.front(); }
   [[nodiscard]] double operator[](std::size_t m) const { return m_w[m]; }
   [[nodiscard]] const Vector& weights() const noexcept { return m_w; }
   [[nodiscard]] bool single_stage() const { return m_w.size() == 1 || m_w.front() >= 1.0; }

   /// The renormalized continuation theta^+_m = theta_{m+1} / (1 - theta_1).
   [[nodiscard]] Evaluation tail() const
   {
      const double rest = 1.0 - m_w.front();
      if(m_w.size() < 2 || !(rest > 0.0))
         throw DomainError("Evaluation::tail: no weight after the first stage");
      Vector t(m_w.begin() + 1, m_w.end());
      double s = 0.0;
      for(double& v : t)
         s += (v /= rest);
      for(double& v : t)  // exact renormalization against rounding
         v /= s;
      return Evaluation(std::move(t));
   }

   friend bool operator==(const Evaluation&, const Evaluation&) = default;

  private:
   Vector m_w;
};

/// A finite prefix of an evaluation with infinite support.
struct Truncation {
   Evaluation normalized;  ///< the kept weights, renormalized
   double dropped_mass;    ///< total weight beyond the kept horizon

   /// The unnormalized truncated game has value (1 - dropped_mass) * v(normalized), and
   /// differs from the full game by at most payoff_bound * dropped_mass.
   [[nodiscard]] double scale() const { return 1.0 - dropped_mass; }
   [[nodiscard]] double error_bound(const GameSpec& g) const
   {
      return g.payoff_bound() * dropped_mass;
   }
};

/// Keeps the first `horizon` weights of `weights` (which may be any finite prefix of a longer
/// evaluation whose total mass is 1).
inline Truncation truncate(std::span<const double> weights, std::size_t horizon,
                           double total_mass = 1.0)
{
   if(horizon == 0 || horizon > weights.size())
      throw DomainError("truncate: horizon out of range");
   Vector kept(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(horizon));
   const double mass = sum(kept);
   if(!(mass > 0.0))
      throw DomainError("truncate: kept weights carry no mass");
   for(double& v : kept)
      v /= mass;
   return Truncation{Evaluation(std::move(kept)), std::max(0.0, total_mass - mass)};
}

/// lambda-discounted evaluation theta_m = lambda (1 - lambda)^{m-1}, cut after `horizon` stages.
inline Truncation discounted(double lambda, std::size_t horizon)
{
   if(!(lambda > 0.0 && lambda <= 1.0))
      throw DomainError("discounted: lambda must lie in (0, 1]");
   Vector w(horizon);
   for(std::size_t m = 0; m < horizon; ++m)
      w[m] = lambda * std::pow(1.0 - lambda, static_cast<double>(m));
   return truncate(w, horizon);
}

/// Per-type payoff multiplier zeta; the all-ones vector recovers the original game.
struct AuxWeight {
   Vector zeta;

   static AuxWeight ones(std::size_t k) { return AuxWeight{dualgame::ones(k)}; }

   [[nodiscard]] std::size_t size() const noexcept { return zeta.size(); }
   [[nodiscard]] double operator[](std::size_t k) const { return zeta[k]; }
   [[nodiscard]] double max_abs() const { return inf_norm(zeta); }
   [[nodiscard]] bool is_zero() const
   {
      for(double v : zeta)
         if(v != 0.0)
            return false;
      return true;
   }

   friend bool operator==(const AuxWeight&, const AuxWeight&) = default;
};

/// First-stage strategies: sigma (K x I) for player 1, tau (L x J) for player 2.
struct StageStrategy {
   Matrix sigma;
   Matrix tau;

   void validate() const
   {
      validate_row_stochastic(sigma, "StageStrategy sigma", 1e-9);
      validate_row_stochastic(tau, "StageStrategy tau", 1e-9);
   }
};

/// Public histories h_m = (i_1, j_1, ..., i_{m-1}, j_{m-1}) at stage m (0-based here) are
/// numbered 0 .. (I J)^m - 1 with the earliest pair most significant.
struct HistoryIndex {
   std::size_t i_size;
   std::size_t j_size;

   [[nodiscard]] std::size_t pairs() const { return i_size * j_size; }

   friend bool operator==(const HistoryIndex&, const HistoryIndex&) = default;

   [[nodiscard]] std::size_t count(std::size_t stage) const
   {
      std::size_t n = 1;
      for(std::size_t m = 0; m < stage; ++m)
         n *= pairs();
      return n;
   }

   [[nodiscard]] std::size_t child(std::size_t h, std::size_t i, std::size_t j) const
   {
      return h * pairs() + i * j_size + j;
   }

   /// Total number of histories at stages 0 .. horizon-1; throws past `cap`.
   [[nodiscard]] std::size_t total(std::size_t horizon, std::size_t cap) const
   {
      std::size_t n = 0, level = 1;
      for(std::size_t m = 0; m < horizon; ++m) {
         n += level;
         if(n > cap)
            throw ResourceError("public history enumeration too large", n, cap);
         if(m + 1 < horizon) {
            if(level > cap / std::max<std::size_t>(1, pairs()))
               throw ResourceError("public history enumeration too large", cap + 1, cap);
            level *= pairs();
         }
      }
      return n;
   }

   /// Decodes history `h` at `stage` into its action pairs.
   [[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> decode(std::size_t stage,
                                                                       std::size_t h) const
   {
      std::vector<std::pair<std::size_t, std::size_t>> out(stage);
      for(std::size_t m = stage; m-- > 0;) {
         const std::size_t a = h % pairs();
         h /= pairs();
         out[m] = {a / j_size, a % j_size};
      }
      return out;
   }
};

/// A behavior strategy of one player: a distribution over own actions for every own type and
/// every public history up to the horizon.
class BehaviorStrategy {
  public:
   BehaviorStrategy() = default;

   BehaviorStrategy(std::size_t types, std::size_t actions, std::size_t i_size, std::size_t j_size,
                    std::size_t horizon, std::size_t history_cap = kDefaultHistoryCap)
       : m_types(types), m_actions(actions), m_index{i_size, j_size}
   {
      if(types == 0 || actions == 0 || horizon == 0)
         throw DomainError("BehaviorStrategy: sizes and horizon must be positive");
      (void)m_index.total(horizon, history_cap / std::max<std::size_t>(1, types));
      m_table.resize(horizon);
      const double u = 1.0 / static_cast<double>(actions);
      for(std::size_t m = 0; m < horizon; ++m)
         m_table[m].assign(types * m_index.count(m) * actions, u);
   }

   [[nodiscard]] std::size_t types() const noexcept { return m_types; }
   [[nodiscard]] std::size_t actions() const noexcept { return m_actions; }
   [[nodiscard]] std::size_t horizon() const noexcept { return m_table.size(); }
   [[nodiscard]] const HistoryIndex& index() const noexcept { return m_index; }

   [[nodiscard]] std::span<const double> at(std::size_t type, std::size_t stage,
                                            std::size_t history) const
   {
      return {m_table[stage].data() + offset(type, stage, history), m_actions};
   }

   /// Stores a distribution; rejects anything that is not a probability vector (tolerance 1e-9)
   /// and renormalizes away rounding.
   void set(std::size_t type, std::size_t stage, std::size_t history, std::span<const double> dist)
   {
      if(dist.size() != m_actions)
         throw DomainError("BehaviorStrategy::set: wrong number of actions");
      if(!is_probability(dist, 1e-9))
         throw InvariantError("BehaviorStrategy::set: not a probability vector");
      double s = 0.0;
      for(double v : dist)
         s += std::max(0.0, v);
      double* out = m_table[stage].data() + offset(type, stage, history);
      for(std::size_t a = 0; a < m_actions; ++a)
         out[a] = std::max(0.0, dist[a]) / s;
   }

   /// The first-stage strategy as a (types x actions) matrix.
   [[nodiscard]] Matrix stage_strategy() const
   {
      Matrix m(m_types, m_actions);
      for(std::size_t t = 0; t < m_types; ++t)
         for(std::size_t a = 0; a < m_actions; ++a)
            m(t, a) = at(t, 0, 0)[a];
      return m;
   }

   /// Same strategy at every history: the first stage repeated.
   static BehaviorStrategy stationary(const Matrix& stage, std::size_t i_size, std::size_t j_size,
                                      std::size_t horizon, std::size_t history_cap = kDefaultHistoryCap)
   {
      BehaviorStrategy s(stage.rows(), stage.cols(), i_size, j_size, horizon, history_cap);
      for(std::size_t m = 0; m < horizon; ++m)
         for(std::size_t h = 0; h < s.m_index.count(m); ++h)
            for(std::size_t t = 0; t < stage.rows(); ++t)
               s.set(t, m, h, stage.row(t));
      return s;
   }

   /// The continuation strategy after the first-stage action pair (i, j).
   [[nodiscard]] BehaviorStrategy continuation(std::size_t i, std::size_t j) const
   {
      if(horizon() < 2)
         throw DomainError("BehaviorStrategy::continuation: horizon is 1");
      BehaviorStrategy c;
      c.m_types = m_types;
      c.m_actions = m_actions;
      c.m_index = m_index;
      c.m_table.resize(horizon() - 1);
      const std::size_t first = i * m_index.j_size + j;
      for(std::size_t m = 1; m < horizon(); ++m) {
         const std::size_t n = m_index.count(m - 1);
         auto& dst = c.m_table[m - 1];
         dst.resize(m_types * n * m_actions);
         for(std::size_t t = 0; t < m_types; ++t)
            for(std::size_t h = 0; h < n; ++h) {
               auto src = at(t, m, first * n + h);
               std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>((t * n + h) * m_actions));
            }
      }
      return c;
   }

   void validate() const
   {
      for(std::size_t m = 0; m < horizon(); ++m)
         for(std::size_t t = 0; t < m_types; ++t)
            for(std::size_t h = 0; h < m_index.count(m); ++h)
               if(!is_probability(at(t, m, h), 1e-9))
                  throw InvariantError("BehaviorStrategy: stored row is not a probability vector");
   }

   friend bool operator==(const BehaviorStrategy&, const BehaviorStrategy&) = default;

  private:
   [[nodiscard]] std::size_t offset(std::size_t type, std::size_t stage, std::size_t history) const
   {
      return (type * m_index.count(stage) + history) * m_actions;
   }

   std::size_t m_types = 0;
   std::size_t m_actions = 0;
   HistoryIndex m_index{1, 1};
   std::vector<std::vector<double>> m_table;  // [stage][(type, history, action)]
};

// ---------------------------------------------------------------------------------------------
// One stage of play

/// P(k, l, i, j) = pi^{kl} sigma^k(i) tau^l(j).
class StageLaw {
  public:
   StageLaw(const JointBelief& pi, const StageStrategy& s)
       : m_k(pi.k_size()), m_l(pi.l_size()), m_i(s.sigma.cols()), m_j(s.tau.cols()),
         m_p(m_k * m_l * m_i * m_j, 0.0)
   {
      if(s.sigma.rows() != m_k || s.tau.rows() != m_l)
         throw DomainError("StageLaw: strategy shapes do not match the belief");
      for(std::size_t k = 0; k < m_k; ++k)
         for(std::size_t l = 0; l < m_l; ++l)
            for(std::size_t i = 0; i < m_i; ++i)
               for(std::size_t j = 0; j < m_j; ++j)
                  m_p[idx(k, l, i, j)] = pi(k, l) * s.sigma(k, i) * s.tau(l, j);
   }

   [[nodiscard]] double operator()(std::size_t k, std::size_t l, std::size_t i, std::size_t j) const
   {
      return m_p[idx(k, l, i, j)];
   }

   [[nodiscard]] double action_prob(std::size_t i, std::size_t j) const
   {
      double s = 0.0;
      for(std::size_t k = 0; k < m_k; ++k)
         for(std::size_t l = 0; l < m_l; ++l)
            s += m_p[idx(k, l, i, j)];
      return s;
   }

   [[nodiscard]] const std::vector<double>& tensor() const noexcept { return m_p; }

  private:
   [[nodiscard]] std::size_t idx(std::size_t k, std::size_t l, std::size_t i, std::size_t j) const
   {
      return ((k * m_l + l) * m_i + i) * m_j + j;
   }

   std::size_t m_k, m_l, m_i, m_j;
   std::vector<double> m_p;
};

inline StageLaw stage_joint_law(const JointBelief& pi, const StageStrategy& s) { return {pi, s}; }

struct Posterior {
   JointBelief belief;
   double probability;  ///< P(i, j)
   bool degenerate;     ///< P(i, j) = 0 and `belief` is the prior
};

/// pi_ij by Bayes' rule; the prior itself when (i, j) has probability zero.
inline Posterior posterior(const JointBelief& pi, const StageStrategy& s, std::size_t i,
                           std::size_t j)
{
   const std::size_t K = pi.k_size(), L = pi.l_size();
   Matrix post(K, L);
   double total = 0.0;
   for(std::size_t k = 0; k < K; ++k)
      for(std::size_t l = 0; l < L; ++l)
         total += post(k, l) = pi(k, l) * s.sigma(k, i) * s.tau(l, j);
   if(!(total > 0.0))
      return Posterior{pi, 0.0, true};
   for(std::size_t k = 0; k < K; ++k)
      for(std::size_t l = 0; l < L; ++l)
         post(k, l) /= total;
   // exact renormalization
   double s2 = sum(post.data());
   for(std::size_t k = 0; k < K; ++k)
      for(std::size_t l = 0; l < L; ++l)
         post(k, l) /= s2;
   return Posterior{JointBelief(std::move(post)), total, false};
}

/// P(j | k) = sum_l Q(l|k) tau^l(j).
inline double prob_j_given_k(const Matrix& Q, const Matrix& tau, std::size_t k, std::size_t j)
{
   double s = 0.0;
   for(std::size_t l = 0; l < Q.cols(); ++l)
      s += Q(k, l) * tau(l, j);
   return s;
}

/// p_i^k = P(k | i); throws when P(i) = 0.
inline Vector posterior_on_k(const Disintegration& d, const StageStrategy& s, std::size_t i)
{
   Vector pi_k(d.p.size());
   double total = 0.0;
   for(std::size_t k = 0; k < d.p.size(); ++k)
      total += pi_k[k] = d.p[k] * s.sigma(k, i);
   if(!(total > 0.0))
      throw DomainError("posterior_on_k: action i has probability zero");
   for(double& v : pi_k)
      v /= total;
   return pi_k;
}

struct QUpdate {
   Matrix Q;
   /// Rows whose normalizer P(j|k) vanished; they keep the prior row Q(.|k).
   std::vector<bool> kept_prior;
   [[nodiscard]] bool any_kept() const
   {
      for(bool b : kept_prior)
         if(b)
            return true;
      return false;
   }
};

/// Q_j(l|k) = Q(l|k) tau^l(j) / sum_l' Q(l'|k) tau^l'(j).
inline QUpdate update_conditional(const Matrix& Q, const Matrix& tau, std::size_t j)
{
   QUpdate u{Matrix(Q.rows(), Q.cols()), std::vector<bool>(Q.rows(), false)};
   for(std::size_t k = 0; k < Q.rows(); ++k) {
      const double denom = prob_j_given_k(Q, tau, k, j);
      if(!(denom > 0.0)) {
         u.kept_prior[k] = true;
         for(std::size_t l = 0; l < Q.cols(); ++l)
            u.Q(k, l) = Q(k, l);
         continue;
      }
      double s = 0.0;
      for(std::size_t l = 0; l < Q.cols(); ++l)
         s += u.Q(k, l) = Q(k, l) * tau(l, j) / denom;
      for(std::size_t l = 0; l < Q.cols(); ++l)
         u.Q(k, l) /= s;
   }
   return u;
}

struct DecomposedPosterior {
   Vector p_ij;
   Matrix Q_j;
   bool flagged;  ///< some row of Q_j fell back to Q(.|k)
};

/// pi_ij = p_ij (x) Q_j with p_ij^k = p_i^k P(j|k) / P(j|i).
inline DecomposedPosterior decompose_posterior(const Disintegration& d, const StageStrategy& s,
                                               std::size_t i, std::size_t j)
{
   const std::size_t K = d.p.size();
   double p_i_total = 0.0;
   for(std::size_t k = 0; k < K; ++k)
      p_i_total += d.p[k] * s.sigma(k, i);
   if(!(p_i_total > 0.0))
      throw DomainError("decompose_posterior: action pair has probability zero");
   const Vector p_i = posterior_on_k(d, s, i);
   double p_j_given_i = 0.0;
   for(std::size_t k = 0; k < K; ++k)
      p_j_given_i += p_i[k] * prob_j_given_k(d.Q, s.tau, k, j);
   if(!(p_j_given_i > 0.0))
      throw DomainError("decompose_posterior: action pair has probability zero");

   DecomposedPosterior out;
   out.p_ij.resize(K);
   double t = 0.0;
   for(std::size_t k = 0; k < K; ++k)
      t += out.p_ij[k] = p_i[k] * prob_j_given_k(d.Q, s.tau, k, j) / p_j_given_i;
   for(double& v : out.p_ij)
      v /= t;
   QUpdate qu = update_conditional(d.Q, s.tau, j);
   out.Q_j = std::move(qu.Q);
   out.flagged = false;
   for(std::size_t k = 0; k < K; ++k)
      if(qu.kept_prior[k] && d.p[k] > 0.0)
         out.flagged = true;
   return out;
}

/// zeta_j^k = zeta^k P(j | k).
inline AuxWeight zeta_update(const AuxWeight& z, const Matrix& Q, const Matrix& tau, std::size_t j)
{
   AuxWeight out{Vector(z.size())};
   for(std::size_t k = 0; k < z.size(); ++k)
      out.zeta[k] = z[k] * prob_j_given_k(Q, tau, k, j);
   return out;
}

/// G^{k,Q}_{i tau} = sum_{l,j} Q(l|k) tau^l(j) G^{kl}(i, j), as a vector on K.
inline Vector conditional_payoff_vector(const GameSpec& g, const Matrix& Q, const Matrix& tau,
                                        std::size_t i)
{
   Vector out(g.k_size(), 0.0);
   for(std::size_t k = 0; k < g.k_size(); ++k)
      for(std::size_t l = 0; l < g.l_size(); ++l) {
         double s = 0.0;
         for(std::size_t j = 0; j < g.j_size(); ++j)
            s += tau(l, j) * g(k, l, i, j);
         out[k] += Q(k, l) * s;
      }
   return out;
}

struct StagePayoffs {
   double expected;        ///< G^pi_{sigma tau}
   std::vector<Vector> by_action;  ///< [i] -> G^{., Q}_{i tau}
};

inline StagePayoffs stage_payoff_vectors(const GameSpec& g, const Disintegration& d,
                                         const StageStrategy& s)
{
   StagePayoffs out{0.0, {}};
   for(std::size_t i = 0; i < g.i_size(); ++i) {
      out.by_action.push_back(conditional_payoff_vector(g, d.Q, s.tau, i));
      for(std::size_t k = 0; k < g.k_size(); ++k)
         out.expected += d.p[k] * s.sigma(k, i) * out.by_action.back()[k];
   }
   return out;
}

// ---------------------------------------------------------------------------------------------
// Exact payoff evaluation

namespace detail {

inline void check_payoff_inputs(const GameSpec& g, const JointBelief& pi,
                                const BehaviorStrategy& s1, const BehaviorStrategy& s2,
                                const Evaluation& theta, std::size_t zeta_size)
{
   if(pi.k_size() != g.k_size() || pi.l_size() != g.l_size())
      throw DomainError("payoff: belief does not match the game's type sets");
   if(s1.types() != g.k_size() || s1.actions() != g.i_size() || s2.types() != g.l_size()
      || s2.actions() != g.j_size())
      throw DomainError("payoff: strategy shapes do not match the game");
   if(!(s1.index() == HistoryIndex{g.i_size(), g.j_size()})
      || !(s2.index() == HistoryIndex{g.i_size(), g.j_size()}))
      throw DomainError("payoff: strategy history encoding does not match the game");
   if(s1.horizon() < theta.horizon() || s2.horizon() < theta.horizon())
      throw DomainError("payoff: strategy horizon is shorter than the evaluation");
   if(zeta_size != g.k_size())
      throw DomainError("payoff: auxiliary weight has the wrong size");
}

}  // namespace detail

/// E[ sum_m theta_m zeta^k G^{kl}(i_m, j_m) ] by exhaustive enumeration.
inline double payoff_aux(const GameSpec& g, const JointBelief& pi, const BehaviorStrategy& s1,
                         const BehaviorStrategy& s2, const Evaluation& theta, const AuxWeight& z,
                         std::size_t history_cap = kDefaultHistoryCap)
{
   detail::check_payoff_inputs(g, pi, s1, s2, theta, z.size());
   const HistoryIndex hx{g.i_size(), g.j_size()};
   (void)hx.total(theta.horizon(), history_cap);
   const std::size_t n = theta.horizon();

   double total = 0.0;
   for(std::size_t k = 0; k < g.k_size(); ++k) {
      if(z[k] == 0.0)
         continue;
      for(std::size_t l = 0; l < g.l_size(); ++l) {
         if(pi(k, l) == 0.0)
            continue;
         double acc = 0.0;
         auto walk = [&](auto&& self, std::size_t m, std::size_t h, double reach) -> void {
            auto a = s1.at(k, m, h);
            auto b = s2.at(l, m, h);
            for(std::size_t i = 0; i < g.i_size(); ++i) {
               if(a[i] == 0.0)
                  continue;
               for(std::size_t j = 0; j < g.j_size(); ++j) {
                  const double r = reach * a[i] * b[j];
                  if(r == 0.0)
                     continue;
                  acc += r * theta[m] * g(k, l, i, j);
                  if(m + 1 < n)
                     self(self, m + 1, hx.child(h, i, j), r);
               }
            }
         };
         walk(walk, 0, 0, 1.0);
         total += pi(k, l) * z[k] * acc;
      }
   }
   return total;
}

/// gamma_theta(pi, s1, s2).
inline double payoff_primal(const GameSpec& g, const JointBelief& pi, const BehaviorStrategy& s1,
                            const BehaviorStrategy& s2, const Evaluation& theta,
                            std::size_t history_cap = kDefaultHistoryCap)
{
   return payoff_aux(g, pi, s1, s2, theta, AuxWeight::ones(g.k_size()), history_cap);
}

/// h_theta[x, Q](p, s1, s2) = gamma_theta(p (x) Q, s1, s2) - <p, x>.
inline double payoff_dual(const GameSpec& g, std::span<const double> x, const Matrix& Q,
                          std::span<const double> p, const BehaviorStrategy& s1,
                          const BehaviorStrategy& s2, const Evaluation& theta,
                          std::size_t history_cap = kDefaultHistoryCap)
{
   if(!is_probability(p, 1e-9))
      throw DomainError("payoff_dual: p must lie in the simplex");
   if(x.size() != g.k_size())
      throw DomainError("payoff_dual: x has the wrong size");
   const JointBelief pi = Disintegration::product(p, Q);
   return payoff_primal(g, pi, s1, s2, theta, history_cap) - dot(p, x);
}

}  // namespace dualgame

#endif  // DUALGAME_GAME_CORE_HPP
