#ifndef DUALGAME_TESTS_FIXTURES_HPP
#define DUALGAME_TESTS_FIXTURES_HPP

// Small games shared by the unit and acceptance tests.

#include <random>

#include "dualgame/game_core.hpp"

namespace fixtures {

using namespace dualgame;

inline GameSpec matching_pennies() { return GameSpec(1, 1, 2, 2, {1, -1, -1, 1}); }

/// K = 2, L = 1: G1 = [[1,0],[0,0]], G2 = [[0,0],[0,1]]. One-stage value at p = (1/2, 1/2) is 1/2.
inline GameSpec half_game() { return GameSpec(2, 1, 2, 2, {1, 0, 0, 0, 0, 0, 0, 1}); }

/// Every G^{kl} equal to A.
inline GameSpec type_free(std::size_t K, std::size_t L, const Matrix& A)
{
   std::vector<double> t;
   for(std::size_t k = 0; k < K * L; ++k)
      t.insert(t.end(), A.data().begin(), A.data().end());
   return GameSpec(K, L, A.rows(), A.cols(), t);
}

inline GameSpec constant_game(double c, std::size_t K = 2, std::size_t L = 2)
{
   return type_free(K, L, Matrix(2, 2, c));
}

inline GameSpec random_game(std::mt19937_64& rng, std::size_t K, std::size_t L, std::size_t I, std::size_t J)
{
   std::uniform_real_distribution<double> u(-1.0, 1.0);
   std::vector<double> t(K * L * I * J);
   for(double& v : t)
      v = std::round(u(rng) * 8.0) / 8.0;
   return GameSpec(K, L, I, J, t);
}

inline Vector random_simplex(std::mt19937_64& rng, std::size_t n, double floor = 0.0)
{
   std::exponential_distribution<double> e(1.0);
   Vector p(n);
   double s = 0.0;
   for(double& v : p)
      s += v = floor + e(rng);
   for(double& v : p)
      v /= s;
   return p;
}

inline Matrix random_stochastic(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double floor = 0.0)
{
   Matrix m(rows, cols);
   for(std::size_t r = 0; r < rows; ++r) {
      Vector p = random_simplex(rng, cols, floor);
      for(std::size_t c = 0; c < cols; ++c)
         m(r, c) = p[c];
   }
   return m;
}

inline JointBelief random_belief(std::mt19937_64& rng, std::size_t K, std::size_t L, double floor = 0.0)
{
   Vector flat = random_simplex(rng, K * L, floor);
   Matrix pi(K, L);
   for(std::size_t k = 0; k < K; ++k)
      for(std::size_t l = 0; l < L; ++l)
         pi(k, l) = flat[k * L + l];
   return JointBelief(pi);
}

inline BehaviorStrategy random_behavior(std::mt19937_64& rng, std::size_t types, std::size_t actions,
                                        std::size_t I, std::size_t J, std::size_t horizon)
{
   BehaviorStrategy s(types, actions, I, J, horizon);
   HistoryIndex hx{I, J};
   for(std::size_t m = 0; m < horizon; ++m)
      for(std::size_t h = 0; h < hx.count(m); ++h)
         for(std::size_t t = 0; t < types; ++t)
            s.set(t, m, h, random_simplex(rng, actions));
   return s;
}

}  // namespace fixtures

#endif  // DUALGAME_TESTS_FIXTURES_HPP
