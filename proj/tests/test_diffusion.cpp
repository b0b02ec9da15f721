#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "fors/diffusion.hpp"
#include "fors/metrics.hpp"
#include "fors/parallel.hpp"
#include "oracles.hpp"

namespace fors {
namespace {

// Independent T oracle: step the odds forward one at a time.
std::size_t count_steps_by_iteration(double sigma1_sq, double bar_delta, double g) {
  double rho = sigma1_sq / (1 - sigma1_sq);
  std::size_t t = 1;
  while (1.0 / (1.0 + rho) > bar_delta) {
    rho *= 1.0 + 1.0 / g;
    ++t;
  }
  return t;
}

GaussianMixture point_mass(Eigen::Index d) {
  GaussianMixture m;
  m.weights = {1.0};
  m.means = {Vector::Zero(d)};
  m.variances = {0.0};
  return m;
}

GaussianMixture bimodal_1d() {
  GaussianMixture m;
  m.weights = {0.5, 0.5};
  m.means = {Vector::Constant(1, -2.0), Vector::Constant(1, 2.0)};
  m.variances = {0.25, 0.25};
  return m;
}

TEST(Schedule, ExampleStepCount) {
  const Schedule s = build_vp_schedule(1e-4, 1e-3, 100.0);
  EXPECT_EQ(s.steps(), count_steps_by_iteration(1e-4, 1e-3, 100.0));
  const double rho1 = 1e-4 / (1 - 1e-4);
  EXPECT_EQ(s.steps(), static_cast<std::size_t>(std::ceil(std::log(999.0 / rho1) / std::log(1.01))) + 1);
  EXPECT_EQ(s.steps(), 1621u);
}

TEST(Schedule, InvariantsHoldOnParameterGrid) {
  for (double s1 : {1e-6, 1e-4, 0.01, 0.3}) {
    for (double bd : {1e-4, 1e-2, 0.2}) {
      for (double g : {1.0, 7.5, 100.0, 2000.0}) {
        const Schedule s = build_vp_schedule(s1, bd, g);
        ASSERT_EQ(s.steps(), count_steps_by_iteration(s1, bd, g)) << s1 << " " << bd << " " << g;
        const std::size_t t_count = s.steps();
        EXPECT_LE(1.0 - s.sigma_sq(t_count), bd * (1 + 1e-12));
        if (t_count > 1) EXPECT_GT(1.0 - s.sigma_sq(t_count - 1), bd);
        EXPECT_NEAR(s.sigma_sq(1), s1, 1e-15);
        for (std::size_t t = 1; t <= t_count; ++t) {
          const double ab = s.bar_alpha(t);
          EXPECT_NEAR(ab * ab + s.sigma_sq(t), 1.0, 1e-12);
          if (t > 1) EXPECT_GT(s.sigma_sq(t), s.sigma_sq(t - 1));
        }
        for (std::size_t t = 1; t < t_count; ++t) {
          EXPECT_GT(s.eta(t), 0.0);
          EXPECT_LE(s.eta(t), s.sigma_sq(t) / g);
          // Definitional form sigma_{t+1}^2 / alpha_t^2 - sigma_t^2.
          const double def = s.sigma_sq(t + 1) / (s.alpha(t) * s.alpha(t)) - s.sigma_sq(t);
          EXPECT_NEAR(s.eta(t), def, 1e-9 * s.eta(t) + 1e-15);
          EXPECT_NEAR(s.alpha(t), s.bar_alpha(t + 1) / s.bar_alpha(t), 1e-15);
        }
        const double bound = std::ceil(g * std::log((1.0 / bd) / (s1 / (1 - s1))) * (1 + 1 / g)) + 1;
        EXPECT_LE(static_cast<double>(t_count), bound);
      }
    }
  }
}

TEST(Schedule, Errors) {
  EXPECT_THROW(build_vp_schedule(0.0, 0.1, 10), InvalidArgument);
  EXPECT_THROW(build_vp_schedule(1.0, 0.1, 10), InvalidArgument);
  EXPECT_THROW(build_vp_schedule(0.1, 0.0, 10), InvalidArgument);
  EXPECT_THROW(build_vp_schedule(0.1, 0.1, 0.5), InvalidArgument);
  EXPECT_THROW(build_vp_schedule(1e-12, 1e-12, 1e9), DomainError);
}

TEST(Schedule, DegenerateSingleStep) {
  const Schedule s = build_vp_schedule(0.99, 0.05, 10.0);
  EXPECT_EQ(s.steps(), 1u);
}

TEST(GForMethod, Values) {
  const double l10 = std::log(10.0);
  EXPECT_NEAR(g_for_method(MethodKind::Simple, 10, 0.1, 1, 1, 1), 10 * l10 + l10 * l10, 1e-12);
  EXPECT_NEAR(g_for_method(MethodKind::Simple, 10, 0.1, 1, 1, 1), 28.33, 0.005);
  const double l1000 = std::log(1000.0);
  EXPECT_NEAR(g_for_method(MethodKind::DdpmLike, 100, 0.1, 1, 1, 1), std::sqrt(100 * l1000) + l1000, 1e-12);
  EXPECT_NEAR(g_for_method(MethodKind::DdpmLike, 100, 0.1, 1, 1, 1), 33.19, 0.005);
  // Adaptive with d_star = d: Simple's expression with log(d/delta).
  const double l = std::log(10 / 0.1);
  EXPECT_NEAR(g_for_method(MethodKind::Adaptive, 10, 0.1, 1, 10, 3), 3 * (10 * l + l * l), 1e-12);
  EXPECT_THROW(g_for_method(MethodKind::DdpmLike, 10, 0.1, 0.5, 1, 1), InvalidArgument);
  EXPECT_THROW(g_for_method(MethodKind::Adaptive, 10, 0.1, 1, 0.5, 1), InvalidArgument);
  EXPECT_THROW(g_for_method(MethodKind::Simple, 10, 1.5, 1, 1, 1), InvalidArgument);
}

struct StepFixture {
  Schedule sched = build_vp_schedule(1e-3, 1e-3, 20.0);
  std::size_t t = 0;
  StepFixture() { t = sched.steps() / 2; }
};

// Data = point mass at 0: p_t = N(0, sigma_t^2), and the backward kernel is
// the Gaussian posterior N(v xbar / eta, v) with v = (1/eta + 1/sigma^2)^-1.
class PointMassStep : public ::testing::TestWithParam<MethodKind> {};

TEST_P(PointMassStep, MatchesGaussianPosterior) {
  StepFixture f;
  const ScoreOracle score = exact_oracle(point_mass(1), f.sched.bar_alpha(f.t), f.sched.sigma_sq(f.t));
  const double eta = f.sched.eta(f.t), s2 = f.sched.sigma_sq(f.t);
  const Vector x_next = Vector::Constant(1, 1.3 * f.sched.sigma(f.t + 1));
  const double xbar = x_next[0] / f.sched.alpha(f.t);
  const double v = 1.0 / (1.0 / eta + 1.0 / s2);
  const double m = v * xbar / eta;

  constexpr int n = 10'000;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(11, static_cast<std::uint64_t>(i));
    xs[i] = backward_step(x_next, f.t, GetParam(), score, f.sched, ForsParams{}, rng).fors.point[0];
  }
  EXPECT_LT(ks_1d(xs, [&](double x) { return testing::normal_cdf(x, m, v); }).value, 0.015);
}

INSTANTIATE_TEST_SUITE_P(AllMethods, PointMassStep,
                         ::testing::Values(MethodKind::Simple, MethodKind::DdpmLike, MethodKind::Adaptive),
                         [](const auto& info) {
                           std::string s = to_string(info.param);
                           std::erase(s, '-');
                           return s;
                         });

ScoreOracle zero_score() {
  return ScoreOracle([](const Vector& x) -> Vector { return Vector::Zero(x.size()); }, 1.0, 1.0);
}

TEST(BackwardStep, ZeroScoreGivesProposalForSimpleAndDdpmLike) {
  StepFixture f;
  const double eta = f.sched.eta(f.t);
  const Vector x_next = Vector::Constant(1, 0.4);
  const double xbar = 0.4 / f.sched.alpha(f.t);
  for (MethodKind method : {MethodKind::Simple, MethodKind::DdpmLike}) {
    std::vector<double> xs;
    Rng rng(12);
    for (int i = 0; i < 10'000; ++i)
      xs.push_back(backward_step(x_next, f.t, method, zero_score(), f.sched, ForsParams{}, rng).fors.point[0]);
    EXPECT_LT(ks_1d(xs, [&](double x) { return testing::normal_cdf(x, xbar, eta); }).value,
              1.63 / std::sqrt(10'000.0))
        << to_string(method);
  }
}

TEST(BackwardStep, DdpmLikeEstimatorWithLinearScore) {
  // s(x) = -x: s(gamma) - s(xbar) = xbar - gamma.
  const ScoreOracle score([](const Vector& x) -> Vector { return -x; }, 1.0, 1.0);
  const Vector x = (Vector(2) << 0.3, -1.1).finished();
  const Vector xbar = (Vector(2) << -0.2, 0.5).finished();
  const Vector z = (Vector(2) << 0.05, 0.7).finished();
  const double r = 0.61;
  const double a = std::sin(std::numbers::pi * r / 2), b = std::cos(std::numbers::pi * r / 2);
  double expected = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double gamma = a * x[i] + (1 - a) * xbar[i] + b * z[i];
    const double gamma_dot = std::numbers::pi / 2 * (b * (x[i] - xbar[i]) - a * z[i]);
    expected += gamma_dot * (xbar[i] - gamma);
  }
  EXPECT_NEAR(path_estimate(x, xbar, z, r, score, -xbar, 0.0), expected, 1e-12);

  // With lambda the drift gains lambda (gamma - xbar); for s = -x and
  // lambda = 1 the two terms cancel exactly.
  EXPECT_NEAR(path_estimate(x, xbar, z, r, score, -xbar, 1.0), 0.0, 1e-15);
}

TEST(BackwardStep, SimpleEstimatorByHand) {
  const ScoreOracle score([](const Vector& x) -> Vector { return x.array().sin().matrix(); }, 1.0, 1.0);
  const Vector x = Vector::Constant(1, 0.9), xbar = Vector::Constant(1, 0.1);
  const double r = 0.25;
  EXPECT_NEAR(simple_estimate(x, xbar, r, score), 0.8 * std::sin(0.25 * 0.9 + 0.75 * 0.1), 1e-15);
}

TEST(BackwardStep, QueryAccountingMatchesCounter) {
  StepFixture f;
  const ScoreOracle score = exact_oracle(bimodal_1d(), f.sched.bar_alpha(f.t), f.sched.sigma_sq(f.t));
  Rng rng(13);
  for (MethodKind method : {MethodKind::Simple, MethodKind::DdpmLike, MethodKind::Adaptive}) {
    for (int i = 0; i < 200; ++i) {
      score.reset_queries();
      const StepResult r =
          backward_step(Vector::Constant(1, 0.7), f.t, method, score, f.sched, ForsParams{}, rng);
      EXPECT_EQ(r.score_queries, score.queries());
      const std::uint64_t cached = method == MethodKind::Simple ? 0 : 1;
      EXPECT_EQ(r.score_queries, r.fors.estimator_draws + cached);
    }
  }
}

TEST(BackwardStep, FailuresCarryStepIndex) {
  StepFixture f;
  const ScoreOracle bad([](const Vector& x) -> Vector { return Vector::Constant(x.size(), NAN); }, 1.0, 1.0);
  Rng rng(14);
  // Simple only queries inside estimator draws, which need J >= 1; retry until one happens.
  bool saw_failure = false;
  for (int i = 0; i < 50 && !saw_failure; ++i) {
    try {
      backward_step(Vector::Zero(1), f.t, MethodKind::Simple, bad, f.sched, ForsParams{}, rng);
    } catch (const StepFailure& e) {
      EXPECT_EQ(e.step, f.t);
      saw_failure = true;
    }
  }
  EXPECT_TRUE(saw_failure);
  try {
    backward_step(Vector::Zero(1), f.t, MethodKind::DdpmLike, bad, f.sched, ForsParams{}, rng);
    FAIL() << "expected StepFailure";
  } catch (const StepFailure& e) {
    EXPECT_EQ(e.step, f.t);
  }
  EXPECT_THROW(backward_step(Vector::Zero(1), 0, MethodKind::Simple, zero_score(), f.sched, ForsParams{}, rng),
               InvalidArgument);
  EXPECT_THROW(backward_step(Vector::Zero(1), f.sched.steps(), MethodKind::Simple, zero_score(), f.sched,
                             ForsParams{}, rng),
               InvalidArgument);
}

TEST(SampleChain, SingleStepScheduleReturnsInitialization) {
  const Schedule s = build_vp_schedule(0.99, 0.05, 10.0);
  ASSERT_EQ(s.steps(), 1u);
  const ScoreBank bank = exact_score_bank(bimodal_1d(), s);
  for (std::uint64_t k = 0; k < 10; ++k) {
    Rng a(5, k), b(5, k);
    const ChainRun run = sample_chain(MethodKind::Simple, bank, s, 3, ForsParams{}, a);
    Vector expected(3);
    for (int i = 0; i < 3; ++i) expected[i] = s.sigma(1) * b.normal();
    EXPECT_EQ(run.x1, expected);
    EXPECT_EQ(run.score_queries, 0u);
  }
}

TEST(SampleChain, CountsAreSumsOfSteps) {
  const Schedule s = build_vp_schedule(0.01, 0.05, 10.0);
  const ScoreBank bank = exact_score_bank(bimodal_1d(), s);
  Rng rng(15);
  ChainOptions opts;
  opts.record_steps = true;
  opts.record_trajectory = true;
  for (MethodKind method : {MethodKind::Simple, MethodKind::Adaptive}) {
    for (const auto& sc : bank) sc.reset_queries();
    const ChainRun run = sample_chain(method, bank, s, 1, ForsParams{}, rng, opts);
    std::uint64_t q = 0, draws = 0, outer = 0, counted = 0;
    for (const auto& st : run.per_step_stats) {
      q += st.score_queries;
      draws += st.estimator_draws;
      outer += st.outer_iterations;
    }
    for (const auto& sc : bank) counted += sc.queries();
    EXPECT_EQ(run.per_step_stats.size(), s.steps() - 1);
    EXPECT_EQ(run.trajectory.size(), s.steps());
    EXPECT_EQ(run.trajectory.back(), run.x1);
    EXPECT_EQ(q, run.score_queries);
    EXPECT_EQ(counted, run.score_queries);
    EXPECT_EQ(draws, run.estimator_draws);
    EXPECT_EQ(outer, run.outer_iterations);
  }
}

TEST(SampleChain, StandardGaussianIsFixedPoint) {
  GaussianMixture data;
  data.weights = {1.0};
  data.means = {Vector::Zero(2)};
  data.variances = {1.0};
  const double floor = default_noise_floor(0.1, 2, data.second_moment());
  const Schedule s = build_vp_schedule(floor, floor, g_for_method(MethodKind::Simple, 2, 0.1, 1, 2, 8));
  const ScoreBank bank = exact_score_bank(data, s);
  constexpr std::size_t n = 2000;
  std::vector<Vector> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(16, i);
    xs[i] = sample_chain(MethodKind::Simple, bank, s, 2, ForsParams{}, rng).x1;
  }
  const MomentSummary m = moments(xs);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(m.mean[i], 0.0, 4 * m.mean_se[i]);
    EXPECT_NEAR(m.cov(i, i), 1.0, 4 * m.variance_se[i]);
  }
}

TEST(SampleChain, ResultsDoNotDependOnWorkerCount) {
  const Schedule s = build_vp_schedule(0.01, 0.01, 10.0);
  const ScoreBank bank = exact_score_bank(bimodal_1d(), s);
  auto run_all = [&](std::size_t workers) {
    std::vector<double> out(64);
    parallel_for(out.size(), workers, [&](std::size_t i) {
      Rng rng(17, i);
      out[i] = sample_chain(MethodKind::DdpmLike, bank, s, 1, ForsParams{}, rng).x1[0];
    });
    return out;
  };
  EXPECT_EQ(run_all(1), run_all(4));
}

TEST(ForwardProcess, SimulatedMarginalsMatchAnalytic) {
  const GaussianMixture data = bimodal_1d();
  const Schedule s = build_vp_schedule(0.01, 0.05, 5.0);
  const std::size_t checkpoints[] = {1, s.steps() / 3, s.steps()};
  constexpr int n = 20'000;
  std::vector<std::vector<Vector>> at(3);
  for (int i = 0; i < n; ++i) {
    Rng rng(18, static_cast<std::uint64_t>(i));
    Vector x = forward_from_data(data.sample(rng), s, rng);
    for (std::size_t t = 1;; ++t) {
      for (int c = 0; c < 3; ++c)
        if (checkpoints[c] == t) at[c].push_back(x);
      if (t == s.steps()) break;
      x = forward_step(x, t, s, rng);
    }
  }
  for (int c = 0; c < 3; ++c) {
    const std::size_t t = checkpoints[c];
    const GaussianMixture mt = marginal_of(data, s.bar_alpha(t), s.sigma_sq(t));
    double mean = 0.0, second = 0.0;
    for (std::size_t h = 0; h < 2; ++h) {
      mean += mt.weights[h] * mt.means[h][0];
      second += mt.weights[h] * (mt.means[h][0] * mt.means[h][0] + mt.variances[h]);
    }
    const MomentSummary m = moments(at[c]);
    EXPECT_NEAR(m.mean[0], mean, 4 * m.mean_se[0]) << "t=" << t;
    EXPECT_NEAR(m.cov(0, 0), second - mean * mean, 4 * m.variance_se[0]) << "t=" << t;
    EXPECT_LT(ks_1d(std::vector<double>([&] {
                      std::vector<double> v;
                      for (const auto& x : at[c]) v.push_back(x[0]);
                      return v;
                    }()),
                    [&](double x) { return mt.coordinate_cdf(x); })
                  .value,
              1.63 / std::sqrt(double(n)))
        << "t=" << t;
  }
}

TEST(DdpmBaseline, ZeroScoreMatchesForsSimpleInLaw) {
  const Schedule s = build_vp_schedule(0.05, 0.05, 4.0);
  const ScoreBank bank(s.steps(), zero_score());
  constexpr std::size_t n = 5000;
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng r1(19, i), r2(20, i);
    a[i] = sample_chain_ddpm(bank, s, 1, r1).x1[0];
    b[i] = sample_chain(MethodKind::Simple, bank, s, 1, ForsParams{}, r2).x1[0];
  }
  // Zero score: X_1 = X_T / prod alpha + Gaussian noise, so both laws are
  // N(0, v) with v computed from the schedule.
  double v = s.sigma_sq(s.steps());
  for (std::size_t t = s.steps() - 1; t >= 1; --t) v = v / (s.alpha(t) * s.alpha(t)) + s.eta(t);
  const double crit = 1.63 / std::sqrt(double(n));
  EXPECT_LT(ks_1d(a, [&](double x) { return testing::normal_cdf(x, 0, v); }).value, crit);
  EXPECT_LT(ks_1d(b, [&](double x) { return testing::normal_cdf(x, 0, v); }).value, crit);
}

}  // namespace
}  // namespace fors
