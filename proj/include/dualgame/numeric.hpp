#ifndef DUALGAME_NUMERIC_HPP
#define DUALGAME_NUMERIC_HPP

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace dualgame {

using Vector = std::vector<double>;

/// Absolute tolerance for probability bookkeeping.
inline constexpr double kProbTol = 1e-12;
/// Absolute tolerance for payoff identities.
inline constexpr double kPayoffTol = 1e-10;
/// Pivot and feasibility tolerance of the simplex routine.
inline constexpr double kLpTol = 1e-9;

/// Dense row-major matrix of doubles.
class Matrix {
  public:
   Matrix() = default;
   Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
       : m_rows(rows), m_cols(cols), m_data(rows * cols, fill)
   {
   }

   [[nodiscard]] std::size_t rows() const noexcept { return m_rows; }
   [[nodiscard]] std::size_t cols() const noexcept { return m_cols; }

   double& operator()(std::size_t r, std::size_t c)
   {
      assert(r < m_rows && c < m_cols);
      return m_data[r * m_cols + c];
   }
   double operator()(std::size_t r, std::size_t c) const
   {
      assert(r < m_rows && c < m_cols);
      return m_data[r * m_cols + c];
   }

   [[nodiscard]] std::span<double> row(std::size_t r)
   {
      return {m_data.data() + r * m_cols, m_cols};
   }
   [[nodiscard]] std::span<const double> row(std::size_t r) const
   {
      return {m_data.data() + r * m_cols, m_cols};
   }

   [[nodiscard]] Vector row_vector(std::size_t r) const
   {
      auto s = row(r);
      return {s.begin(), s.end()};
   }

   [[nodiscard]] const std::vector<double>& data() const noexcept { return m_data; }

   friend bool operator==(const Matrix&, const Matrix&) = default;

  private:
   std::size_t m_rows = 0;
   std::size_t m_cols = 0;
   std::vector<double> m_data;
};

inline double dot(std::span<const double> a, std::span<const double> b)
{
   assert(a.size() == b.size());
   return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double sum(std::span<const double> a) { return std::accumulate(a.begin(), a.end(), 0.0); }

inline double inf_norm(std::span<const double> a)
{
   double m = 0.0;
   for(double v : a)
      m = std::max(m, std::abs(v));
   return m;
}

/// Half the range of the coordinates: the sup-norm of `a` after the best shift along the
/// all-ones direction. Pairs with the l1 norm on the tangent space of the simplex.
inline double centered_norm(std::span<const double> a)
{
   if(a.empty())
      return 0.0;
   auto [lo, hi] = std::minmax_element(a.begin(), a.end());
   return 0.5 * (*hi - *lo);
}

inline double l1_distance(std::span<const double> a, std::span<const double> b)
{
   assert(a.size() == b.size());
   double d = 0.0;
   for(std::size_t i = 0; i < a.size(); ++i)
      d += std::abs(a[i] - b[i]);
   return d;
}

inline bool is_probability(std::span<const double> a, double tol = kProbTol)
{
   if(a.empty())
      return false;
   for(double v : a)
      if(!(v >= -tol) || !std::isfinite(v))
         return false;
   return std::abs(sum(a) - 1.0) <= tol;
}

inline Vector uniform(std::size_t n) { return Vector(n, 1.0 / static_cast<double>(n)); }

inline Vector ones(std::size_t n) { return Vector(n, 1.0); }

}  // namespace dualgame

#endif  // DUALGAME_NUMERIC_HPP
