#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fors/metrics.hpp"
#include "fors/scores.hpp"
#include "oracles.hpp"

namespace fors {
namespace {

GaussianMixture bimodal_1d() {
  GaussianMixture m;
  m.weights = {0.5, 0.5};
  m.means = {Vector::Constant(1, -2.0), Vector::Constant(1, 2.0)};
  m.variances = {0.25, 0.25};
  return m;
}

GaussianMixture standard_normal(Eigen::Index d) {
  GaussianMixture m;
  m.weights = {1.0};
  m.means = {Vector::Zero(d)};
  m.variances = {1.0};
  return m;
}

GaussianMixture random_mixture(Rng& rng) {
  const auto k = 1 + static_cast<std::size_t>(rng.uniform() * 4);
  const auto d = 1 + static_cast<Eigen::Index>(rng.uniform() * 3);
  GaussianMixture m;
  double total = 0.0;
  for (std::size_t h = 0; h < k; ++h) {
    m.weights.push_back(0.2 + rng.uniform());
    total += m.weights.back();
    Vector mu(d);
    for (Eigen::Index i = 0; i < d; ++i) mu[i] = 2.0 * rng.normal();
    m.means.push_back(mu);
    m.variances.push_back(0.1 + 1.9 * rng.uniform());
  }
  for (double& w : m.weights) w /= total;
  // Renormalizing can leave the sum off by an ulp; fold the residue into w_0.
  double s = 0.0;
  for (double w : m.weights) s += w;
  m.weights[0] += 1.0 - s;
  return m;
}

TEST(GaussianMixture, Validation) {
  GaussianMixture m = bimodal_1d();
  EXPECT_NO_THROW(m.validate());
  m.weights = {0.5, 0.6};
  EXPECT_THROW(m.validate(), InvalidArgument);
  m = bimodal_1d();
  m.means[1] = Vector::Zero(2);
  EXPECT_THROW(m.validate(), InvalidArgument);
  m = bimodal_1d();
  m.variances[0] = -1.0;
  EXPECT_THROW(m.validate(), InvalidArgument);
}

TEST(MarginalOf, IdentityAtZeroNoise) {
  const GaussianMixture m = bimodal_1d();
  const GaussianMixture out = marginal_of(m, 1.0, 0.0);
  for (std::size_t h = 0; h < 2; ++h) {
    EXPECT_EQ(out.means[h], m.means[h]);
    EXPECT_EQ(out.variances[h], m.variances[h]);
  }
}

TEST(MarginalOf, StandardGaussianIsVpFixedPoint) {
  for (double s2 : {0.01, 0.3, 0.99}) {
    const GaussianMixture out = marginal_of(standard_normal(3), std::sqrt(1 - s2), s2);
    EXPECT_NEAR(out.variances[0], 1.0, 1e-15);
    EXPECT_EQ(out.means[0], Vector::Zero(3));
  }
}

TEST(MarginalOf, BimodalExample) {
  const GaussianMixture out = marginal_of(bimodal_1d(), 0.8, 0.36);
  EXPECT_NEAR(out.means[0][0], -1.6, 1e-15);
  EXPECT_NEAR(out.means[1][0], 1.6, 1e-15);
  EXPECT_NEAR(out.variances[0], 0.52, 1e-15);
  EXPECT_NEAR(out.variances[1], 0.52, 1e-15);
}

TEST(MarginalOf, MatchesSimulatedForwardKernel) {
  const GaussianMixture data = bimodal_1d();
  const GaussianMixture out = marginal_of(data, 0.8, 0.36);
  Rng rng(1);
  std::vector<double> xs;
  for (int i = 0; i < 20000; ++i) xs.push_back(0.8 * data.sample(rng)[0] + 0.6 * rng.normal());
  EXPECT_LT(ks_1d(xs, [&](double x) { return out.coordinate_cdf(x); }).value, 1.63 / std::sqrt(20000.0));
}

TEST(MarginalOf, CompositionEqualsOneStep) {
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const GaussianMixture m = random_mixture(rng);
    const double a1 = 0.3 + 0.7 * rng.uniform(), a2 = 0.3 + 0.7 * rng.uniform();
    const double s1 = rng.uniform(), s2 = rng.uniform();
    const GaussianMixture two = marginal_of(marginal_of(m, a1, s1), a2, s2);
    const GaussianMixture one = marginal_of(m, a1 * a2, a2 * a2 * s1 + s2);
    for (std::size_t h = 0; h < m.components(); ++h) {
      EXPECT_LT((two.means[h] - one.means[h]).norm(), 1e-14 * (1 + one.means[h].norm()));
      EXPECT_NEAR(two.variances[h], one.variances[h], 1e-14 * one.variances[h]);
    }
  }
}

TEST(MarginalOf, Errors) {
  GaussianMixture point;
  point.weights = {1.0};
  point.means = {Vector::Zero(1)};
  point.variances = {0.0};
  EXPECT_THROW(marginal_of(point, 1.0, 0.0), DomainError);
  EXPECT_NO_THROW(marginal_of(point, 1.0, 0.1));
  EXPECT_THROW(marginal_of(bimodal_1d(), 0.0, 0.5), InvalidArgument);
  EXPECT_THROW(marginal_of(bimodal_1d(), 1.2, 0.5), InvalidArgument);
  EXPECT_THROW(marginal_of(bimodal_1d(), 0.5, -0.1), InvalidArgument);
}

TEST(ExactScore, SingleGaussian) {
  GaussianMixture m;
  m.weights = {1.0};
  m.means = {(Vector(2) << 1.0, -2.0).finished()};
  m.variances = {0.7};
  const Vector x = (Vector(2) << 0.3, 0.4).finished();
  EXPECT_LT((exact_score(m, x) + (x - m.means[0]) / 0.7).norm(), 1e-15);
}

TEST(ExactScore, MatchesFiniteDifferences) {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const GaussianMixture m = random_mixture(rng);
    const auto d = static_cast<Eigen::Index>(m.dim());
    Vector x(d);
    for (Eigen::Index i = 0; i < d; ++i) x[i] = 3.0 * rng.normal();
    const double h = 1e-5 * (1 + x.norm());
    Vector fd(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      fd[i] = (m.log_density(xp) - m.log_density(xm)) / (2 * h);
    }
    const Vector s = exact_score(m, x);
    EXPECT_LT((s - fd).norm() / s.norm(), 1e-5) << "case " << k;
  }
}

TEST(ExactScore, SymmetricMixtureVanishesAtOrigin) {
  EXPECT_EQ(exact_score(bimodal_1d(), Vector::Zero(1))[0], 0.0);
}

TEST(ExactScore, StandardGaussianIsMinusXAtEveryNoiseLevel) {
  Rng rng(4);
  for (double s2 : {1e-4, 0.1, 0.5, 0.9999}) {
    const GaussianMixture mt = marginal_of(standard_normal(2), std::sqrt(1 - s2), s2);
    for (int k = 0; k < 20; ++k) {
      const Vector x = (Vector(2) << 3 * rng.normal(), 3 * rng.normal()).finished();
      EXPECT_LT((exact_score(mt, x) + x).norm(), 1e-14 * (1 + x.norm()));
    }
  }
}

TEST(ExactScore, FiniteFarFromModes) {
  const Vector far = Vector::Constant(1, 1e4);
  const Vector s = exact_score(bimodal_1d(), far);
  EXPECT_TRUE(s.allFinite());
  EXPECT_NEAR(s[0], -(1e4 - 2.0) / 0.25, 1e-6 * 4e4);
}

TEST(TweedieMc, SingleGaussian) {
  GaussianMixture data;
  data.weights = {1.0};
  data.means = {Vector::Constant(1, 0.5)};
  data.variances = {0.4};
  const double abar = 0.8, s2 = 0.36;
  const GaussianMixture mt = marginal_of(data, abar, s2);
  const Vector x = Vector::Constant(1, 0.9);
  Rng rng(5);
  const TweedieEstimate est = tweedie_mc_check(data, abar, s2, x, 100'000, rng);
  const double exact = -(0.9 - mt.means[0][0]) / mt.variances[0];
  EXPECT_NEAR(est.score[0], exact, 5 * est.standard_error[0]);
}

TEST(TweedieMc, BimodalBetweenModes) {
  const GaussianMixture data = bimodal_1d();
  const double abar = 0.9, s2 = 0.19;
  Rng rng(6);
  for (double xv : {-0.7, 0.4, 1.1}) {
    const Vector x = Vector::Constant(1, xv);
    const TweedieEstimate est = tweedie_mc_check(data, abar, s2, x, 100'000, rng);
    const Vector exact = exact_score(marginal_of(data, abar, s2), x);
    EXPECT_NEAR(est.score[0], exact[0], 5 * est.standard_error[0]) << "x=" << xv;
  }
}

TEST(TweedieMc, LargeNoiseLimit) {
  const GaussianMixture data = bimodal_1d();
  Rng rng(7);
  const double s2 = 1e4;
  for (double xv : {-3.0, 0.5, 2.0}) {
    const TweedieEstimate est = tweedie_mc_check(data, 1.0, s2, Vector::Constant(1, xv), 10'000, rng);
    EXPECT_NEAR(est.score[0], -xv / s2, 3e-4);
  }
}

TEST(TweedieMc, Errors) {
  Rng rng(8);
  EXPECT_THROW(tweedie_mc_check(bimodal_1d(), 1.0, 0.1, Vector::Zero(1), 100, rng), InvalidArgument);
  // Tiny noise far from both modes: almost all weight on one draw.
  EXPECT_THROW(tweedie_mc_check(bimodal_1d(), 1.0, 1e-6, Vector::Constant(1, 0.0), 10'000, rng),
               DomainError);
}

TEST(ScoreOracle, CounterCountsEveryCallAndIsShared) {
  const ScoreOracle s = exact_oracle(bimodal_1d(), 0.9, 0.19);
  const ScoreOracle copy = s;
  for (int i = 0; i < 37; ++i) s(Vector::Zero(1));
  for (int i = 0; i < 5; ++i) copy(Vector::Zero(1));
  EXPECT_EQ(s.queries(), 42u);
  EXPECT_EQ(copy.queries(), 42u);
  s.reset_queries();
  EXPECT_EQ(copy.queries(), 0u);
  EXPECT_EQ(*s.score_error(), 0.0);
}

TEST(PerturbedOracle, ZeroEpsIsBase) {
  const ScoreOracle base = exact_oracle(bimodal_1d(), 0.9, 0.19);
  const ScoreOracle p = perturbed_oracle(base, 0.0, PerturbationMode::ConstantBias);
  const Vector x = Vector::Constant(1, 0.37);
  EXPECT_EQ(p(x), base(x));
  EXPECT_EQ(*p.score_error(), 0.0);
}

TEST(PerturbedOracle, ConstantBiasHasExactNorm) {
  for (Eigen::Index d : {1, 3}) {
    const ScoreOracle base = exact_oracle(standard_normal(d), 0.6, 0.64);
    const ScoreOracle p = perturbed_oracle(base, 0.1, PerturbationMode::ConstantBias);
    Rng rng(9);
    for (int k = 0; k < 10; ++k) {
      Vector x(d);
      for (Eigen::Index i = 0; i < d; ++i) x[i] = rng.normal();
      EXPECT_NEAR((p(x) - base(x)).norm(), 0.1, 1e-15);
    }
    EXPECT_EQ(*p.score_error(), 0.1);
  }
}

TEST(PerturbedOracle, SmoothFieldNormByGaussHermite) {
  const ScoreOracle base = exact_oracle(standard_normal(1), 0.6, 0.64);  // p_t = N(0, 1)
  const ScoreOracle p = perturbed_oracle(base, 0.1, PerturbationMode::SmoothField);
  auto err_sq = [&](double u) {
    const Vector x = Vector::Constant(1, u);
    return (p(x) - base(x)).squaredNorm();
  };
  EXPECT_NEAR(testing::gaussian_expectation(err_sq, 0.0, 1.0), 0.01, 1e-4);
  EXPECT_EQ(*p.score_error(), 0.1);
}

TEST(PerturbedOracle, SmoothFieldNormOnBimodal2d) {
  GaussianMixture data;
  data.weights = {0.3, 0.7};
  data.means = {(Vector(2) << -1.0, 2.0).finished(), (Vector(2) << 1.5, 0.0).finished()};
  data.variances = {0.2, 0.5};
  const double abar = 0.9, s2 = 0.19;
  const ScoreOracle base = exact_oracle(data, abar, s2);
  const ScoreOracle p = perturbed_oracle(base, 0.05, PerturbationMode::SmoothField);
  const GaussianMixture mt = *base.marginal();
  // The field is separable, so E|g|^2 is a sum of 1D Gaussian expectations.
  double total = 0.0;
  for (std::size_t h = 0; h < 2; ++h) {
    for (Eigen::Index i = 0; i < 2; ++i) {
      auto g2 = [&](double u) {
        Vector x = mt.means[h];
        x[i] = u;
        const Vector diff = p(x) - base(x);
        return diff[i] * diff[i];
      };
      total += mt.weights[h] * testing::gaussian_expectation(g2, mt.means[h][i], mt.variances[h]);
    }
  }
  EXPECT_NEAR(total, 0.05 * 0.05, 1e-4 * 0.05 * 0.05);
}

TEST(PerturbedOracle, SmoothFieldRejectsHighDimension) {
  const ScoreOracle base = exact_oracle(standard_normal(3), 0.6, 0.64);
  EXPECT_THROW(perturbed_oracle(base, 0.1, PerturbationMode::SmoothField), DomainError);
  EXPECT_THROW(perturbed_oracle(base, -0.1, PerturbationMode::ConstantBias), InvalidArgument);
  const ScoreOracle no_marginal([](const Vector& x) { return Vector(-x); }, 1.0, 1.0);
  EXPECT_THROW(perturbed_oracle(no_marginal, 0.1, PerturbationMode::SmoothField), DomainError);
}

}  // namespace
}  // namespace fors
