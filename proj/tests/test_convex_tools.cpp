#include <gtest/gtest.h>

#include "dualgame/convex_tools.hpp"

using namespace dualgame;

namespace {

// concave, l1-Lipschitz with constant 1 on Delta(2) and Delta(3)
double entropy_like(const Vector& p)
{
   double v = 0.0;
   for(std::size_t k = 0; k < p.size(); ++k)
      v += p[k] * (1.0 - p[k]);
   return v;
}

double tent(const Vector& p) { return std::min(p[0], 1.0 - p[0]) + 0.25 * p[0]; }

// sup over a fine grid, a lower estimate of the true conjugate
double fine_conjugate(std::size_t dim, const std::function<double(const Vector&)>& f, const Vector& x)
{
   double best = -1e300;
   for(const auto& p : simplex_grid(dim, dim == 2 ? 4000 : 300))
      best = std::max(best, f(p) - dot(p, x));
   return best;
}

}  // namespace

TEST(ConvexTools, UpperConjugateWithinCertificate)
{
   for(std::size_t dim : {2u, 3u}) {
      auto f = ConcaveModel::on_grid(dim, 6, entropy_like, 1.0);
      auto w = upper_conjugate(f);
      EXPECT_TRUE(w.model.simplex_slopes());
      for(double a : {-1.0, -0.3, 0.0, 0.4, 2.0}) {
         Vector x(dim, 0.0);
         x[0] = a;
         x[dim - 1] = -0.5 * a;
         const double truth = fine_conjugate(dim, entropy_like, x);
         EXPECT_LE(w(x), truth + 1e-12);
         EXPECT_LE(truth - w(x), w.error_bound(x) + 1e-9);
      }
   }
}

TEST(ConvexTools, TranslationRule)
{
   auto w = upper_conjugate(ConcaveModel::on_grid(3, 5, entropy_like, 1.0));
   Vector x{0.2, -0.4, 0.1};
   Vector y = x;
   for(double& v : y)
      v += 0.7;
   EXPECT_NEAR(w(y), w(x) - 0.7, 1e-12);
}

TEST(ConvexTools, LowerConjugateRecoversConcaveHull)
{
   auto f = ConcaveModel::on_grid(2, 8, tent, 1.25);
   auto w = upper_conjugate(f);
   for(const auto& s : f.samples())
      EXPECT_NEAR(lower_conjugate(w.model, s.point), s.value, 1e-9);
   // between grid points the hull interpolates linearly
   EXPECT_NEAR(lower_conjugate(w.model, Vector{0.0625, 0.9375}), tent({0.0625, 0.9375}), 1e-9);
   EXPECT_THROW(lower_conjugate(w.model, Vector{0.5, 0.6}), DomainError);
}

TEST(ConvexTools, LowerConjugateUnboundedOutsideHull)
{
   // slopes only cover the vertex e_1, so p = e_2 is outside their hull
   ConvexModel w({AffinePiece{{-1.0, 0.0}, 0.0}});
   EXPECT_THROW(lower_conjugate(w, Vector{0.0, 1.0}), DomainError);
}

TEST(ConvexTools, SupergradientSupportsAndIsMinimal)
{
   auto f = ConcaveModel::on_grid(2, 8, tent, 1.25);
   // at the kink p = (1/2, 1/2) every slope between the two sides supports; the tangent-space
   // slopes are x = (a, -a) with a in [-3/8, 5/8], minimal norm at a = 0
   Vector p{0.5, 0.5};
   auto x = supergradient(f, p);
   EXPECT_NEAR(sum(x), 0.0, 1e-12);
   EXPECT_TRUE(is_supergradient(f, p, x));
   EXPECT_NEAR(x[0], 0.0, 1e-9);

   // off the kink the slope is unique
   Vector q{0.25, 0.75};
   auto y = supergradient(f, q);
   EXPECT_TRUE(is_supergradient(f, q, y));
   EXPECT_NEAR(y[0] - y[1], 1.25, 1e-9);

   auto g = ConcaveModel::on_grid(3, 6, entropy_like, 1.0);
   for(const auto& s : g.samples()) {
      auto z = supergradient(g, s.point);
      EXPECT_TRUE(is_supergradient(g, s.point, z));
   }
}

TEST(ConvexTools, InfConvolutionIsConjugateOfSum)
{
   auto f1 = ConcaveModel::on_grid(3, 4, entropy_like, 1.0);
   auto f2 = ConcaveModel::on_grid(3, 4, [](const Vector& p) { return 0.5 * p[0] - p[2]; }, 1.0);
   std::vector<Sample> sum_samples;
   for(std::size_t g = 0; g < f1.samples().size(); ++g)
      sum_samples.push_back(
          Sample{f1.samples()[g].point, f1.samples()[g].value + f2.samples()[g].value});
   auto fs = ConcaveModel(sum_samples, 2.0, f1.mesh());
   std::vector<ConvexModel> parts{upper_conjugate(f1).model, upper_conjugate(f2).model};
   for(const Vector& z : {Vector{0, 0, 0}, Vector{0.3, -0.1, 0.5}, Vector{-1, 2, 0}}) {
      auto r = inf_convolution(parts, z);
      EXPECT_NEAR(r.value, upper_conjugate(fs)(z), 1e-9);
      for(std::size_t k = 0; k < 3; ++k)
         EXPECT_NEAR(r.splits[0][k] + r.splits[1][k], z[k], 1e-9);
   }
}

TEST(ConvexTools, WeightedInfConvolution)
{
   auto w = upper_conjugate(ConcaveModel::on_grid(2, 8, tent, 1.25)).model;
   std::vector<ConvexModel> parts{w, w};
   Vector weights{0.25, 0.75};
   Vector z{0.3, -0.2};
   auto r = inf_convolution(parts, z, weights);
   // identical models: the optimum is no worse than the even split y_j = z
   EXPECT_LE(r.value, w(z) + 1e-9);
   double chk = 0.0;
   for(std::size_t j = 0; j < 2; ++j)
      chk += weights[j] * w(r.splits[j]);
   EXPECT_NEAR(r.value, chk, 1e-12);
   EXPECT_THROW(inf_convolution(parts, z, Vector{0.0, 1.0}), DomainError);
   ConvexModel bad({AffinePiece{{1.0, 0.0}, 0.0}});
   EXPECT_THROW(inf_convolution(std::vector<ConvexModel>{bad, bad}, z), DomainError);
}

TEST(ConvexTools, ScaleCheck)
{
   auto f = ConcaveModel::on_grid(3, 5, entropy_like, 1.0);
   for(double a : {0.25, 1.0, 3.0})
      EXPECT_TRUE(scale_check(f, a, Vector{0.1, -0.3, 0.2}));
   EXPECT_THROW(scale_check(f, 0.0, Vector{0, 0, 0}), DomainError);
}

TEST(ConvexTools, LipschitzIsChecked)
{
   EXPECT_THROW(ConcaveModel::on_grid(2, 4, tent, 0.5), InvariantError);
}
