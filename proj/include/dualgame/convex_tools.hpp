#ifndef DUALGAME_CONVEX_TOOLS_HPP
#define DUALGAME_CONVEX_TOOLS_HPP

// Piecewise-linear convex analysis on the simplex Delta(K).
//
// A concave function on Delta(K) is known through samples; its upper conjugate
//    f#(x) = sup_p f(p) - <p, x>
// is then the max of one affine piece per sample, with slope -p_g. Every piece of such a model
// has slope summing to -1, which gives the translation rule f#(x + c 1) = f#(x) - c.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dualgame/errors.hpp"
#include "dualgame/lp.hpp"
#include "dualgame/numeric.hpp"
#include "dualgame/simplex_grid.hpp"

namespace dualgame {

struct Sample {
   Vector point;
   double value;
};

/// Samples of a concave function on Delta(K) with its l1-Lipschitz constant and the l1
/// covering radius of the sample points.
class ConcaveModel {
  public:
   ConcaveModel() = default;

   ConcaveModel(std::vector<Sample> samples, double lipschitz, double mesh)
       : m_samples(std::move(samples)), m_lipschitz(lipschitz), m_mesh(mesh)
   {
      if(m_samples.empty())
         throw DomainError("ConcaveModel: at least one sample is required");
      if(!(lipschitz >= 0.0) || !(mesh >= 0.0))
         throw InvariantError("ConcaveModel: lipschitz and mesh must be nonnegative");
      const std::size_t dim = m_samples.front().point.size();
      for(const Sample& s : m_samples) {
         if(s.point.size() != dim)
            throw InvariantError("ConcaveModel: sample points differ in dimension");
         if(!is_probability(s.point, 1e-9))
            throw InvariantError("ConcaveModel: sample point outside the simplex");
         if(!std::isfinite(s.value))
            throw InvariantError("ConcaveModel: sample value is not finite");
      }
      for(std::size_t a = 0; a < m_samples.size(); ++a)
         for(std::size_t b = a + 1; b < m_samples.size(); ++b) {
            const double d = l1_distance(m_samples[a].point, m_samples[b].point);
            const double gap = std::abs(m_samples[a].value - m_samples[b].value);
            const double slack = 1e-7 * (1.0 + std::abs(m_samples[a].value) + std::abs(m_samples[b].value));
            if(gap > lipschitz * d + slack)
               throw InvariantError("ConcaveModel: declared Lipschitz constant "
                                    + std::to_string(lipschitz) + " is violated by a sample pair");
         }
   }

   /// Samples `fn` on the barycentric grid with `resolution` subdivisions.
   static ConcaveModel on_grid(std::size_t dim, std::size_t resolution,
                               const std::function<double(const Vector&)>& fn, double lipschitz)
   {
      std::vector<Sample> s;
      for(Vector& p : simplex_grid(dim, resolution)) {
         const double v = fn(p);
         s.push_back(Sample{std::move(p), v});
      }
      return ConcaveModel(std::move(s), lipschitz, simplex_grid_mesh(dim, resolution));
   }

   [[nodiscard]] const std::vector<Sample>& samples() const noexcept { return m_samples; }
   [[nodiscard]] std::size_t dim() const { return m_samples.front().point.size(); }
   [[nodiscard]] double lipschitz() const noexcept { return m_lipschitz; }
   [[nodiscard]] double mesh() const noexcept { return m_mesh; }

   [[nodiscard]] ConcaveModel scaled(double alpha) const
   {
      std::vector<Sample> s = m_samples;
      for(Sample& x : s)
         x.value *= alpha;
      return ConcaveModel(std::move(s), std::abs(alpha) * m_lipschitz, m_mesh);
   }

  private:
   std::vector<Sample> m_samples;
   double m_lipschitz = 0.0;
   double m_mesh = 0.0;
};

struct AffinePiece {
   Vector slope;
   double intercept;

   [[nodiscard]] double operator()(std::span<const double> x) const
   {
      return intercept + dot(slope, x);
   }
};

/// Max of finitely many affine functions on R^K.
class ConvexModel {
  public:
   ConvexModel() = default;
   explicit ConvexModel(std::vector<AffinePiece> pieces) : m_pieces(std::move(pieces))
   {
      if(m_pieces.empty())
         throw DomainError("ConvexModel: at least one piece is required");
      const std::size_t dim = m_pieces.front().slope.size();
      for(const auto& p : m_pieces)
         if(p.slope.size() != dim)
            throw InvariantError("ConvexModel: pieces differ in dimension");
   }

   [[nodiscard]] const std::vector<AffinePiece>& pieces() const noexcept { return m_pieces; }
   [[nodiscard]] std::size_t dim() const { return m_pieces.front().slope.size(); }

   [[nodiscard]] double operator()(std::span<const double> x) const
   {
      double best = -std::numeric_limits<double>::infinity();
      for(const auto& p : m_pieces)
         best = std::max(best, p(x));
      return best;
   }

   /// Index of the first piece attaining the max at x.
   [[nodiscard]] std::size_t active_piece(std::span<const double> x) const
   {
      std::size_t arg = 0;
      double best = -std::numeric_limits<double>::infinity();
      for(std::size_t g = 0; g < m_pieces.size(); ++g) {
         const double v = m_pieces[g](x);
         if(v > best) {
            best = v;
            arg = g;
         }
      }
      return arg;
   }

   /// True when every slope is the negative of a point of the simplex.
   [[nodiscard]] bool simplex_slopes(double tol = 1e-9) const
   {
      for(const auto& p : m_pieces) {
         for(double s : p.slope)
            if(s > tol)
               return false;
         if(std::abs(sum(p.slope) + 1.0) > tol)
            return false;
      }
      return true;
   }

   /// Model of alpha * w(x / alpha): intercepts scale, slopes stay.
   [[nodiscard]] ConvexModel rescaled(double alpha) const
   {
      std::vector<AffinePiece> p = m_pieces;
      for(auto& piece : p)
         piece.intercept *= alpha;
      return ConvexModel(std::move(p));
   }

  private:
   std::vector<AffinePiece> m_pieces;
};

/// Upper conjugate of the sample interpolant of a concave model, with its approximation
/// certificate: for every x, 0 <= (true f)#(x) - model(x) <= error_bound(x).
struct UpperConjugate {
   ConvexModel model;
   double lipschitz;
   double mesh;

   [[nodiscard]] double operator()(std::span<const double> x) const { return model(x); }

   [[nodiscard]] double error_bound(std::span<const double> x) const
   {
      return (lipschitz + centered_norm(x)) * mesh;
   }
};

inline UpperConjugate upper_conjugate(const ConcaveModel& f)
{
   if(f.samples().empty())
      throw DomainError("upper_conjugate: empty model");
   std::vector<AffinePiece> pieces;
   pieces.reserve(f.samples().size());
   for(const Sample& s : f.samples()) {
      Vector slope(s.point.size());
      for(std::size_t k = 0; k < slope.size(); ++k)
         slope[k] = -s.point[k];
      pieces.push_back(AffinePiece{std::move(slope), s.value});
   }
   return UpperConjugate{ConvexModel(std::move(pieces)), f.lipschitz(), f.mesh()};
}

/// Conjugate of the zero function on Delta(K): x -> -min_k x^k. Exact.
inline ConvexModel zero_conjugate(std::size_t dim)
{
   std::vector<AffinePiece> pieces;
   for(std::size_t k = 0; k < dim; ++k) {
      Vector s(dim, 0.0);
      s[k] = -1.0;
      pieces.push_back(AffinePiece{std::move(s), 0.0});
   }
   return ConvexModel(std::move(pieces));
}

struct LowerConjugate {
   double value;
   Vector argmin;  ///< a minimizing x, shifted so its coordinates are centered on zero
};

namespace detail {

inline LowerConjugate lower_conjugate_lp(const ConvexModel& w, std::span<const double> p)
{
   const std::size_t K = w.dim();
   lp::Problem prob(lp::Sense::kMinimize);
   std::vector<std::size_t> xv(K);
   for(std::size_t k = 0; k < K; ++k)
      xv[k] = prob.add_variable(p[k], true);
   const std::size_t t = prob.add_variable(1.0, true);
   for(const auto& piece : w.pieces()) {
      // t >= c + <s, x>
      std::vector<lp::Term> terms{{t, 1.0}};
      for(std::size_t k = 0; k < K; ++k)
         if(piece.slope[k] != 0.0)
            terms.push_back({xv[k], -piece.slope[k]});
      prob.add_constraint(std::move(terms), lp::Relation::kGreaterEqual, piece.intercept);
   }
   lp::Solution sol = prob.solve();
   if(sol.status == lp::Status::kUnbounded)
      throw DomainError("lower_conjugate: unbounded below (p is outside the hull of the slopes)");
   if(!sol.optimal())
      throw LpError("lower_conjugate: linear program failed");
   Vector x(K);
   for(std::size_t k = 0; k < K; ++k)
      x[k] = sol.x[xv[k]];
   if(K > 0) {
      const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
      const double mid = 0.5 * (*lo + *hi);
      for(double& v : x)
         v -= mid;
   }
   return LowerConjugate{sol.objective, std::move(x)};
}

}  // namespace detail

/// w-flat(p) = inf_x w(x) + <x, p>, by one linear program over the epigraph of w.
inline double lower_conjugate(const ConvexModel& w, std::span<const double> p)
{
   if(p.size() != w.dim() || !is_probability(p, 1e-9))
      throw DomainError("lower_conjugate: p must lie in the simplex");
   return detail::lower_conjugate_lp(w, p).value;
}

/// Value at p of the least concave majorant of the samples of f.
inline double concave_hull_value(const ConcaveModel& f, std::span<const double> p)
{
   return lower_conjugate(upper_conjugate(f).model, p);
}

/// A supporting slope of the sample interpolant of f at p, of minimal l2 norm. The interpolant
/// is invariant along 1 in slope space, so the minimal-norm representative has zero sum.
inline Vector supergradient(const ConcaveModel& f, std::span<const double> p)
{
   const std::size_t K = f.dim();
   if(p.size() != K || !is_probability(p, 1e-9))
      throw DomainError("supergradient: p must lie in the simplex");
   if(K == 1)
      return Vector{0.0};

   const UpperConjugate w = upper_conjugate(f);
   const LowerConjugate hull = detail::lower_conjugate_lp(w.model, p);
   const auto& samples = f.samples();
   const std::size_t N = samples.size();

   // constraint g: <x, p_g - p> >= f_g - hull(p)
   Matrix A(N, K);
   Vector b(N);
   double scale = 1.0;
   for(std::size_t g = 0; g < N; ++g) {
      for(std::size_t k = 0; k < K; ++k)
         A(g, k) = samples[g].point[k] - p[k];
      b[g] = samples[g].value - hull.value;
      scale = std::max(scale, std::abs(samples[g].value));
   }
   const double feas_tol = 1e-9 * scale;
   auto feasible = [&](const Vector& x) {
      for(std::size_t g = 0; g < N; ++g)
         if(dot(A.row(g), x) < b[g] - feas_tol)
            return false;
      return true;
   };

   // Minimal-norm point of {x : 1'x = 0, A x >= b} is the projection of 0 onto the affine set
   // cut out by some active subset of at most K-1 constraints. Enumerate the subsets.
   Vector best;
   double best_norm = std::numeric_limits<double>::infinity();
   auto consider = [&](const std::vector<std::size_t>& active) {
      // rows: all-ones, then the active constraints; solve (E E') y = rhs, x = E' y
      const std::size_t m = active.size() + 1;
      Matrix E(m, K);
      Vector rhs(m, 0.0);
      for(std::size_t k = 0; k < K; ++k)
         E(0, k) = 1.0;
      for(std::size_t a = 0; a < active.size(); ++a) {
         for(std::size_t k = 0; k < K; ++k)
            E(a + 1, k) = A(active[a], k);
         rhs[a + 1] = b[active[a]];
      }
      Matrix G(m, m + 1);
      for(std::size_t r = 0; r < m; ++r) {
         for(std::size_t c = 0; c < m; ++c)
            G(r, c) = dot(E.row(r), E.row(c));
         G(r, m) = rhs[r];
      }
      // Gaussian elimination with partial pivoting
      for(std::size_t c = 0; c < m; ++c) {
         std::size_t piv = c;
         for(std::size_t r = c + 1; r < m; ++r)
            if(std::abs(G(r, c)) > std::abs(G(piv, c)))
               piv = r;
         if(std::abs(G(piv, c)) < 1e-12)
            return;  // dependent active set
         if(piv != c)
            for(std::size_t k = 0; k <= m; ++k)
               std::swap(G(c, k), G(piv, k));
         for(std::size_t r = 0; r < m; ++r) {
            if(r == c)
               continue;
            const double fct = G(r, c) / G(c, c);
            if(fct == 0.0)
               continue;
            for(std::size_t k = c; k <= m; ++k)
               G(r, k) -= fct * G(c, k);
         }
      }
      Vector x(K, 0.0);
      for(std::size_t r = 0; r < m; ++r) {
         const double y = G(r, m) / G(r, r);
         for(std::size_t k = 0; k < K; ++k)
            x[k] += E(r, k) * y;
      }
      const double nrm = dot(x, x);
      if(nrm < best_norm - 1e-15 && feasible(x)) {
         best_norm = nrm;
         best = std::move(x);
      }
   };

   std::size_t budget = 2'000'000;
   std::vector<std::size_t> active;
   auto enumerate = [&](auto&& self, std::size_t start, std::size_t depth) -> void {
      if(budget == 0)
         return;
      --budget;
      consider(active);
      if(depth == K - 1)
         return;
      for(std::size_t g = start; g < N; ++g) {
         active.push_back(g);
         self(self, g + 1, depth + 1);
         active.pop_back();
      }
   };
   enumerate(enumerate, 0, 0);

   if(best.empty()) {
      // enumeration exhausted or numerically empty: the epigraph LP minimizer is itself a
      // supporting slope
      Vector x = hull.argmin;
      const double mean = sum(x) / static_cast<double>(K);
      for(double& v : x)
         v -= mean;
      return x;
   }
   return best;
}

/// Checks the supporting-plane inequality f(p) + <x, p' - p> >= f(p') against every sample,
/// using the interpolant's value at p.
inline bool is_supergradient(const ConcaveModel& f, std::span<const double> p,
                             std::span<const double> x, double tol = 1e-8)
{
   const double fp = concave_hull_value(f, p);
   for(const Sample& s : f.samples()) {
      double lin = fp;
      for(std::size_t k = 0; k < p.size(); ++k)
         lin += x[k] * (s.point[k] - p[k]);
      if(lin < s.value - tol)
         return false;
   }
   return true;
}

struct InfConvolution {
   double value;
   std::vector<Vector> splits;  ///< one x_j per model, with sum_j weight_j x_j = z
};

/// min over sum_j weight_j x_j = z of sum_j weight_j w_j(x_j), as one linear program. With
/// unit weights this is the infimal convolution of the models, which for conjugates of
/// concave f_j equals (sum_j f_j)#(z).
inline InfConvolution inf_convolution(const std::vector<const ConvexModel*>& models,
                                      std::span<const double> z, std::span<const double> weights = {})
{
   if(models.empty())
      throw DomainError("inf_convolution: at least one model is required");
   const std::size_t K = z.size();
   for(const ConvexModel* m : models) {
      if(m->dim() != K)
         throw DomainError("inf_convolution: model dimension does not match z");
      if(!m->simplex_slopes())
         throw DomainError("inf_convolution: model slopes must be negated simplex points");
   }
   if(!weights.empty() && weights.size() != models.size())
      throw DomainError("inf_convolution: one weight per model is required");
   auto weight = [&](std::size_t j) { return weights.empty() ? 1.0 : weights[j]; };
   for(std::size_t j = 0; j < models.size(); ++j)
      if(!(weight(j) > 0.0))
         throw DomainError("inf_convolution: weights must be positive");

   if(models.size() == 1) {
      Vector x(z.begin(), z.end());
      for(double& v : x)
         v /= weight(0);
      const double val = weight(0) * (*models[0])(x);
      return InfConvolution{val, {std::move(x)}};
   }

   lp::Problem prob(lp::Sense::kMinimize);
   const std::size_t J = models.size();
   std::vector<std::vector<std::size_t>> xv(J, std::vector<std::size_t>(K));
   std::vector<std::size_t> tv(J);
   for(std::size_t j = 0; j < J; ++j) {
      for(std::size_t k = 0; k < K; ++k)
         xv[j][k] = prob.add_variable(0.0, true);
      tv[j] = prob.add_variable(weight(j), true);
   }
   for(std::size_t j = 0; j < J; ++j)
      for(const auto& piece : models[j]->pieces()) {
         std::vector<lp::Term> terms{{tv[j], 1.0}};
         for(std::size_t k = 0; k < K; ++k)
            if(piece.slope[k] != 0.0)
               terms.push_back({xv[j][k], -piece.slope[k]});
         prob.add_constraint(std::move(terms), lp::Relation::kGreaterEqual, piece.intercept);
      }
   for(std::size_t k = 0; k < K; ++k) {
      std::vector<lp::Term> terms;
      for(std::size_t j = 0; j < J; ++j)
         terms.push_back({xv[j][k], weight(j)});
      prob.add_constraint(std::move(terms), lp::Relation::kEqual, z[k]);
   }
   lp::Solution sol = prob.solve();
   if(!sol.optimal())
      throw LpError("inf_convolution: linear program is "
                    + std::string(sol.status == lp::Status::kUnbounded ? "unbounded" : "infeasible"));

   InfConvolution out{0.0, std::vector<Vector>(J, Vector(K))};
   for(std::size_t j = 0; j < J; ++j) {
      for(std::size_t k = 0; k < K; ++k)
         out.splits[j][k] = sol.x[xv[j][k]];
      // report the models' own values at the split rather than the LP epigraph variables
      out.value += weight(j) * (*models[j])(out.splits[j]);
   }
   return out;
}

inline InfConvolution inf_convolution(const std::vector<ConvexModel>& models, std::span<const double> z,
                                      std::span<const double> weights = {})
{
   std::vector<const ConvexModel*> ptrs;
   for(const auto& m : models)
      ptrs.push_back(&m);
   return inf_convolution(ptrs, z, weights);
}

/// Checks (alpha f)#(x) = alpha f#(x / alpha) on the sample models, within 1e-9.
inline bool scale_check(const ConcaveModel& f, double alpha, std::span<const double> x)
{
   if(!(alpha > 0.0))
      throw DomainError("scale_check: alpha must be positive");
   const double lhs = upper_conjugate(f.scaled(alpha))(x);
   Vector xs(x.begin(), x.end());
   for(double& v : xs)
      v /= alpha;
   const double rhs = alpha * upper_conjugate(f)(xs);
   return std::abs(lhs - rhs) <= 1e-9 * (1.0 + std::abs(lhs));
}

}  // namespace dualgame

#endif  // DUALGAME_CONVEX_TOOLS_HPP
