#pragma once

// Variance-preserving DDPM schedules and FORS-based backward samplers.
//
// Forward process: X_1 ~ N(abar_1 X_0, sigma_1^2 I) and
// X_{t+1} ~ N(alpha_t X_t, alpha_t^2 eta_t I). The backward kernel is the
// Gaussian tilt
//
//   rho_t(x | x') ∝ p_t(x) exp(-|x - xbar_t|^2 / (2 eta_t)),  xbar_t = x' / alpha_t,
//
// which each backward step samples with fors_sample.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fors/core.hpp"
#include "fors/errors.hpp"
#include "fors/rng.hpp"
#include "fors/scores.hpp"
#include "fors/types.hpp"

namespace fors {

/// Noise schedule indexed t = 1..T. Accessors take 1-based t.
class Schedule {
 public:
  Schedule() = default;

  /// Builds from odds rho_t = sigma_t^2 / (1 - sigma_t^2). eta_t is set to
  /// its maximal admissible value sigma_t^2 / G.
  static Schedule from_odds(const std::vector<double>& odds, double g) {
    Schedule s;
    s.g_ = g;
    const std::size_t n = odds.size();
    s.bar_alpha_.resize(n);
    s.sigma_sq_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      s.sigma_sq_[i] = odds[i] / (1.0 + odds[i]);
      s.bar_alpha_[i] = std::sqrt(1.0 / (1.0 + odds[i]));
    }
    s.alpha_.resize(n ? n - 1 : 0);
    s.eta_.resize(n ? n - 1 : 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      s.alpha_[i] = s.bar_alpha_[i + 1] / s.bar_alpha_[i];
      s.eta_[i] = s.sigma_sq_[i] / g;
    }
    return s;
  }

  std::size_t steps() const { return bar_alpha_.size(); }  // T
  double g() const { return g_; }

  double bar_alpha(std::size_t t) const { return bar_alpha_.at(t - 1); }
  double sigma_sq(std::size_t t) const { return sigma_sq_.at(t - 1); }
  double sigma(std::size_t t) const { return std::sqrt(sigma_sq(t)); }
  /// alpha_t = abar_{t+1} / abar_t, t = 1..T-1.
  double alpha(std::size_t t) const { return alpha_.at(t - 1); }
  /// eta_t = sigma_{t+1}^2 / alpha_t^2 - sigma_t^2, t = 1..T-1.
  double eta(std::size_t t) const { return eta_.at(t - 1); }

 private:
  std::vector<double> bar_alpha_;
  std::vector<double> sigma_sq_;
  std::vector<double> alpha_;
  std::vector<double> eta_;
  double g_ = 1.0;
};

/// Variance-preserving schedule with the fewest steps such that
/// eta_t <= sigma_t^2 / G: the odds grow geometrically,
/// rho_t = rho_1 (1 + 1/G)^{t-1}, until 1 - sigma_T^2 <= bar_delta.
inline Schedule build_vp_schedule(double sigma1_sq, double bar_delta, double g,
                                  std::size_t max_steps = 100'000'000) {
  if (!(sigma1_sq > 0.0 && sigma1_sq < 1.0))
    throw InvalidArgument("build_vp_schedule: sigma1_sq must lie in (0,1)");
  if (!(bar_delta > 0.0 && bar_delta < 1.0))
    throw InvalidArgument("build_vp_schedule: bar_delta must lie in (0,1)");
  if (!(g >= 1.0) || !std::isfinite(g)) throw InvalidArgument("build_vp_schedule: G must be >= 1");

  const double rho1 = sigma1_sq / (1.0 - sigma1_sq);
  const double growth = 1.0 + 1.0 / g;
  auto odds = [&](std::size_t t) { return rho1 * std::pow(growth, static_cast<double>(t - 1)); };
  auto reached = [&](std::size_t t) { return 1.0 / (1.0 + odds(t)) <= bar_delta; };

  const double target = (1.0 - bar_delta) / bar_delta;
  double steps_needed = 0.0;
  if (rho1 < target) steps_needed = std::ceil(std::log(target / rho1) / std::log1p(1.0 / g));
  if (!(steps_needed + 1.0 <= static_cast<double>(max_steps)))
    throw DomainError("build_vp_schedule: parameters require more than " +
                      std::to_string(max_steps) + " steps");
  auto t_count = static_cast<std::size_t>(steps_needed) + 1;
  // Guard the closed-form count against rounding at the boundary.
  while (!reached(t_count)) ++t_count;
  while (t_count > 1 && reached(t_count - 1)) --t_count;

  std::vector<double> rho(t_count);
  for (std::size_t t = 1; t <= t_count; ++t) rho[t - 1] = odds(t);
  return Schedule::from_odds(rho, g);
}

/// sigma_1^2 = bar_delta = delta^2 / (d + M_2^2): the early-stopping scale
/// that keeps W_2(p_data, p_1) at order delta.
inline double default_noise_floor(double delta, std::size_t d, double second_moment) {
  return delta * delta / (static_cast<double>(d) + second_moment);
}

enum class MethodKind { Simple, DdpmLike, Adaptive };

inline const char* to_string(MethodKind m) {
  switch (m) {
    case MethodKind::Simple: return "simple";
    case MethodKind::DdpmLike: return "ddpm-like";
    case MethodKind::Adaptive: return "adaptive";
  }
  return "?";
}

/// Step-size budget G = C * (method's sigma_t^2 / eta_t requirement).
///   Simple:   d log(1/delta) + log^2(1/delta)
///   DdpmLike: sqrt(d L log(d/delta)) + L log(d/delta)
///   Adaptive: d_star log(d/delta) + log^2(d/delta)
inline double g_for_method(MethodKind method, std::size_t d, double delta, double l_delta,
                           double d_star, double c) {
  if (d < 1) throw InvalidArgument("g_for_method: d must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("g_for_method: delta must lie in (0,1)");
  if (!(c > 0.0)) throw InvalidArgument("g_for_method: C must be > 0");
  const double dd = static_cast<double>(d);
  switch (method) {
    case MethodKind::Simple: {
      const double l = std::log(1.0 / delta);
      return c * (dd * l + l * l);
    }
    case MethodKind::DdpmLike: {
      if (!(l_delta >= 1.0)) throw InvalidArgument("g_for_method: L_delta must be >= 1");
      const double l = std::log(dd / delta);
      return c * (std::sqrt(dd * l_delta * l) + l_delta * l);
    }
    case MethodKind::Adaptive: {
      if (!(d_star >= 1.0)) throw InvalidArgument("g_for_method: d_star must be >= 1");
      const double l = std::log(dd / delta);
      return c * (d_star * l + l * l);
    }
  }
  throw InvalidArgument("g_for_method: unknown method");
}

namespace detail {

inline Vector checked(Vector v) {
  if (!v.allFinite()) throw NumericalFailure("score oracle returned a non-finite value");
  return v;
}

}  // namespace detail

/// Simple-method estimator for explicit r:
///   <x - xbar, s(r x + (1 - r) xbar)>   (unclipped).
inline double simple_estimate(const Vector& x, const Vector& xbar, double r,
                              const ScoreOracle& score) {
  const Vector y = r * x + (1.0 - r) * xbar;
  return (x - xbar).dot(detail::checked(score(y)));
}

/// DdpmLike / Adaptive estimator for explicit (z, r), path anchored at xbar:
///   <gamma_dot, s(gamma) - s(xbar) + lambda (gamma - xbar)>   (unclipped).
inline double path_estimate(const Vector& x, const Vector& xbar, const Vector& z, double r,
                            const ScoreOracle& score, const Vector& score_at_xbar,
                            double lambda) {
  constexpr double half_pi = std::numbers::pi / 2.0;
  const double a = std::sin(half_pi * r);
  const double b = std::cos(half_pi * r);
  const Vector gamma = a * x + (1.0 - a) * xbar + b * z;
  const Vector gamma_dot = (half_pi * b) * (x - xbar) - (half_pi * a) * z;
  Vector drift = detail::checked(score(gamma)) - score_at_xbar;
  if (lambda != 0.0) drift += lambda * (gamma - xbar);
  return gamma_dot.dot(drift);
}

struct StepResult {
  ForsOutcome<Vector> fors;
  std::uint64_t score_queries = 0;
};

/// One backward step t: draws X_t given X_{t+1} = x_next.
inline StepResult backward_step(const Vector& x_next, std::size_t t, MethodKind method,
                                const ScoreOracle& score, const Schedule& sched,
                                const ForsParams& params, Rng& rng) {
  if (t < 1 || t >= sched.steps())
    throw InvalidArgument("backward_step: t must lie in [1, T-1], got " + std::to_string(t));
  if (!x_next.allFinite()) throw InvalidArgument("backward_step: x_next is not finite");

  const double eta = sched.eta(t);
  const double bound = params.clip_bound;
  const Vector xbar = x_next / sched.alpha(t);
  const auto d = xbar.size();
  StepResult res;

  auto gaussian = [d](const Vector& center, double var) {
    const double sd = std::sqrt(var);
    return [center, sd, d](Rng& g) {
      Vector x(d);
      for (Eigen::Index i = 0; i < d; ++i) x[i] = center[i] + sd * g.normal();
      return x;
    };
  };

  try {
    if (method == MethodKind::Simple) {
      auto family = [&](const Vector& x, Rng& g) {
        return clip_to(simple_estimate(x, xbar, g.uniform(), score), bound);
      };
      res.fors = fors_sample(gaussian(xbar, eta), family, params, rng);
      res.score_queries = res.fors.estimator_draws;
      return res;
    }

    // s_t(xbar) is fixed for the whole step, so it is queried once and cached.
    const Vector s_bar = detail::checked(score(xbar));
    const double lambda = method == MethodKind::Adaptive ? 1.0 / sched.sigma_sq(t) : 0.0;
    const double prop_var = method == MethodKind::Adaptive ? 1.0 / (1.0 / eta + lambda) : eta;
    const double z_sd = std::sqrt(eta);
    Vector z(d);
    auto family = [&](const Vector& x, Rng& g) {
      const double r = g.uniform();
      for (Eigen::Index i = 0; i < d; ++i) z[i] = z_sd * g.normal();
      return clip_to(path_estimate(x, xbar, z, r, score, s_bar, lambda), bound);
    };
    res.fors = fors_sample(gaussian(xbar + prop_var * s_bar, prop_var), family, params, rng);
    res.score_queries = res.fors.estimator_draws + 1;
    return res;
  } catch (const IterationBudgetExceeded& e) {
    throw StepFailure(t, e.what());
  } catch (const NumericalFailure& e) {
    throw StepFailure(t, e.what());
  } catch (const ContractViolation& e) {
    throw StepFailure(t, e.what());
  }
}

/// Scores s_1..s_T, stored at index t-1.
using ScoreBank = std::vector<ScoreOracle>;

inline ScoreBank exact_score_bank(const GaussianMixture& data, const Schedule& sched) {
  ScoreBank bank;
  bank.reserve(sched.steps());
  for (std::size_t t = 1; t <= sched.steps(); ++t)
    bank.push_back(exact_oracle(data, sched.bar_alpha(t), sched.sigma_sq(t)));
  return bank;
}

inline ScoreBank perturbed_score_bank(const ScoreBank& base, double eps, PerturbationMode mode) {
  ScoreBank bank;
  bank.reserve(base.size());
  for (const auto& s : base) bank.push_back(perturbed_oracle(s, eps, mode));
  return bank;
}

struct StepSummary {
  std::size_t t = 0;
  std::uint64_t outer_iterations = 0;
  std::uint64_t estimator_draws = 0;
  std::uint64_t score_queries = 0;
  std::uint64_t clipped_draws = 0;
};

struct ChainOptions {
  bool record_trajectory = false;
  bool record_steps = false;
};

struct ChainRun {
  Vector x1;
  std::vector<Vector> trajectory;  // X_T, X_{T-1}, ..., X_1 when recorded
  std::uint64_t score_queries = 0;
  std::uint64_t estimator_draws = 0;
  std::uint64_t outer_iterations = 0;
  std::uint64_t clipped_draws = 0;
  std::vector<StepSummary> per_step_stats;  // in execution order t = T-1..1
};

/// Backward sampling from X_T ~ N(0, sigma_T^2 I) down to X_1.
inline ChainRun sample_chain(MethodKind method, const ScoreBank& bank, const Schedule& sched,
                             std::size_t d, const ForsParams& params, Rng& rng,
                             const ChainOptions& opts = {}) {
  const std::size_t steps = sched.steps();
  if (steps < 1) throw InvalidArgument("sample_chain: empty schedule");
  if (bank.size() < steps) throw InvalidArgument("sample_chain: score bank does not cover t = 1..T");
  ChainRun run;
  Vector x(static_cast<Eigen::Index>(d));
  const double sd = sched.sigma(steps);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = sd * rng.normal();
  if (opts.record_trajectory) run.trajectory.push_back(x);

  for (std::size_t t = steps - 1; t >= 1; --t) {
    StepResult step = backward_step(x, t, method, bank[t - 1], sched, params, rng);
    x = std::move(step.fors.point);
    run.score_queries += step.score_queries;
    run.estimator_draws += step.fors.estimator_draws;
    run.outer_iterations += step.fors.outer_iterations;
    run.clipped_draws += step.fors.clipped_draws;
    if (opts.record_steps)
      run.per_step_stats.push_back({t, step.fors.outer_iterations, step.fors.estimator_draws,
                                    step.score_queries, step.fors.clipped_draws});
    if (opts.record_trajectory) run.trajectory.push_back(x);
  }
  run.x1 = std::move(x);
  return run;
}

/// DDPM baseline: X_t ~ N(x'/alpha_t + eta_t s_t(x'), eta_t I), one score
/// query per step. Used only as a comparison sampler.
inline ChainRun sample_chain_ddpm(const ScoreBank& bank, const Schedule& sched, std::size_t d,
                                  Rng& rng) {
  const std::size_t steps = sched.steps();
  if (bank.size() < steps) throw InvalidArgument("sample_chain_ddpm: score bank too short");
  ChainRun run;
  Vector x(static_cast<Eigen::Index>(d));
  const double sd_t = sched.sigma(steps);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = sd_t * rng.normal();
  for (std::size_t t = steps - 1; t >= 1; --t) {
    const Vector s = detail::checked(bank[t - 1](x));
    const double eta = sched.eta(t);
    const double sd = std::sqrt(eta);
    Vector next = x / sched.alpha(t) + eta * s;
    for (Eigen::Index i = 0; i < next.size(); ++i) next[i] += sd * rng.normal();
    x = std::move(next);
    ++run.score_queries;
  }
  run.x1 = std::move(x);
  return run;
}

/// X_1 ~ N(abar_1 x0, sigma_1^2 I).
inline Vector forward_from_data(const Vector& x0, const Schedule& sched, Rng& rng) {
  Vector x = sched.bar_alpha(1) * x0;
  const double sd = sched.sigma(1);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += sd * rng.normal();
  return x;
}

/// X_{t+1} ~ N(alpha_t x_t, alpha_t^2 eta_t I).
inline Vector forward_step(const Vector& x_t, std::size_t t, const Schedule& sched, Rng& rng) {
  const double a = sched.alpha(t);
  const double sd = a * std::sqrt(sched.eta(t));
  Vector x = a * x_t;
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += sd * rng.normal();
  return x;
}

}  // namespace fors
