#ifndef DUALGAME_SIMPLEX_GRID_HPP
#define DUALGAME_SIMPLEX_GRID_HPP

#include <cstddef>
#include <vector>

#include "dualgame/errors.hpp"
#include "dualgame/numeric.hpp"

namespace dualgame {

/// Number of points of the uniform barycentric grid with `resolution` subdivisions on a
/// simplex with `dim` vertices: C(resolution + dim - 1, dim - 1).
inline std::size_t simplex_grid_size(std::size_t dim, std::size_t resolution)
{
   if(dim == 0)
      return 0;
   // multiplicative binomial, exact while it fits
   std::size_t k = dim - 1;
   std::size_t n = resolution + dim - 1;
   double acc = 1.0;
   for(std::size_t i = 1; i <= k; ++i)
      acc = acc * static_cast<double>(n - k + i) / static_cast<double>(i);
   return static_cast<std::size_t>(acc + 0.5);
}

/// All points {a / resolution : a in N^dim, sum a = resolution}, in lexicographic order of `a`
/// (first coordinate largest first).
inline std::vector<Vector> simplex_grid(std::size_t dim, std::size_t resolution,
                                        std::size_t cap = 10'000'000)
{
   if(dim == 0)
      throw DomainError("simplex_grid: dimension must be positive");
   if(resolution == 0) {
      if(dim != 1)
         throw DomainError("simplex_grid: resolution must be positive");
      return {Vector{1.0}};
   }
   const std::size_t count = simplex_grid_size(dim, resolution);
   if(count > cap)
      throw ResourceError("simplex grid too large", count, cap);

   std::vector<Vector> out;
   out.reserve(count);
   std::vector<std::size_t> a(dim, 0);
   const double r = static_cast<double>(resolution);
   auto emit = [&] {
      Vector p(dim);
      for(std::size_t k = 0; k < dim; ++k)
         p[k] = static_cast<double>(a[k]) / r;
      out.push_back(std::move(p));
   };
   // recursive fill, coordinate `k` takes values from the remaining budget downwards
   auto fill = [&](auto&& self, std::size_t k, std::size_t remaining) -> void {
      if(k + 1 == dim) {
         a[k] = remaining;
         emit();
         return;
      }
      for(std::size_t v = remaining + 1; v-- > 0;) {
         a[k] = v;
         self(self, k + 1, remaining - v);
      }
   };
   fill(fill, 0, resolution);
   return out;
}

/// l1 covering radius of the grid: every point of the simplex is within this l1 distance of
/// some grid point. Largest-remainder rounding achieves 2*d*(dim-d)/(dim*resolution) with at
/// most d coordinates rounded up; maximized at d = dim/2.
inline double simplex_grid_mesh(std::size_t dim, std::size_t resolution)
{
   if(dim <= 1)
      return 0.0;
   const double lo = static_cast<double>(dim / 2);
   const double hi = static_cast<double>(dim - dim / 2);
   return 2.0 * lo * hi / (static_cast<double>(dim) * static_cast<double>(resolution));
}

/// Nearest grid point by largest-remainder rounding.
inline Vector round_to_grid(std::span<const double> p, std::size_t resolution)
{
   const std::size_t dim = p.size();
   const double r = static_cast<double>(resolution);
   std::vector<std::size_t> a(dim);
   std::vector<std::pair<double, std::size_t>> rem(dim);
   std::size_t used = 0;
   for(std::size_t k = 0; k < dim; ++k) {
      const double s = std::max(0.0, p[k]) * r;
      a[k] = static_cast<std::size_t>(std::floor(s));
      rem[k] = {s - std::floor(s), k};
      used += a[k];
   }
   std::sort(rem.begin(), rem.end(), [](auto x, auto y) { return x.first > y.first; });
   for(std::size_t i = 0; used < resolution && i < dim; ++i, ++used)
      ++a[rem[i].second];
   Vector q(dim);
   for(std::size_t k = 0; k < dim; ++k)
      q[k] = static_cast<double>(a[k]) / r;
   return q;
}

/// Iterates the mixed-radix product of `radices`, calling `fn(index_vector)` in lexicographic
/// order (last digit fastest).
template <typename Fn>
void for_each_product(const std::vector<std::size_t>& radices, Fn&& fn)
{
   for(std::size_t r : radices)
      if(r == 0)
         return;
   std::vector<std::size_t> idx(radices.size(), 0);
   while(true) {
      fn(static_cast<const std::vector<std::size_t>&>(idx));
      std::size_t d = radices.size();
      while(d > 0) {
         --d;
         if(++idx[d] < radices[d])
            break;
         idx[d] = 0;
         if(d == 0)
            return;
      }
      if(radices.empty())
         return;
   }
}

}  // namespace dualgame

#endif  // DUALGAME_SIMPLEX_GRID_HPP
