#pragma once

// Proximal sampler for mu ∝ exp(-f): alternate
//   Y_n ~ N(X_n, eta I)   and   X_{n+1} ~ RGO(x) ∝ exp(-f(x) - |x - Y_n|^2 / (2 eta)),
// with the RGO drawn by sample_tilt (gradient queries of f only).

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fors/core.hpp"
#include "fors/errors.hpp"
#include "fors/gaussian_tilt.hpp"
#include "fors/rng.hpp"
#include "fors/types.hpp"

namespace fors {

using ProxMap = std::function<Vector(const Vector& x0, double eta)>;

struct LogConcaveTarget {
  std::string name;
  std::size_t dim = 1;
  VectorField grad_f;
  HolderSpec holder;
  /// f itself; never used by the samplers, only by diagnostics and oracles.
  std::function<double(const Vector&)> potential;
  /// Closed-form prox_{eta f}(x0), when available.
  ProxMap exact_prox;
};

/// Spot-checks |grad f(x) - grad f(y)| <= slack * beta_s |x - y|^s on random
/// pairs drawn from N(0, scale^2 I).
inline bool check_holder(const LogConcaveTarget& target, Rng& rng, int pairs = 100,
                         double slack = 1.01, double scale = 3.0) {
  const auto d = static_cast<Eigen::Index>(target.dim);
  for (int k = 0; k < pairs; ++k) {
    Vector x(d), y(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      x[i] = scale * rng.normal();
      y[i] = scale * rng.normal();
    }
    const double lhs = (target.grad_f(x) - target.grad_f(y)).norm();
    const double rhs = target.holder.beta_s * std::pow((x - y).norm(), target.holder.s);
    if (lhs > slack * rhs + 1e-12) return false;
  }
  return true;
}

struct ProxResult {
  Vector x_plus;
  double residual = 0.0;  // |x0 - eta grad f(x_plus) - x_plus|, recomputed at x_plus
  std::uint64_t iterations = 0;  // gradient queries spent
  bool converged = false;
};

inline double default_prox_tolerance(std::size_t d, double eta) {
  return 0.5 * std::sqrt(static_cast<double>(d) * eta);
}

/// Fixed-point iteration x <- x0 - eta grad f(x). Contracts when
/// eta * beta_2 < 1. Returns the best iterate seen; `converged` is false when
/// max_iters ran out first.
inline ProxResult prox_solve(const LogConcaveTarget& target, const Vector& x0, double eta,
                             double tol, std::uint64_t max_iters = 1000) {
  if (!(eta > 0.0)) throw InvalidArgument("prox_solve: eta must be > 0");
  if (!(tol > 0.0)) throw InvalidArgument("prox_solve: tol must be > 0");
  if (max_iters < 1) throw InvalidArgument("prox_solve: max_iters must be >= 1");

  constexpr std::size_t kWindow = 50;
  std::vector<double> history;
  ProxResult best;
  best.residual = std::numeric_limits<double>::infinity();
  Vector x = x0;
  for (std::uint64_t k = 1; k <= max_iters; ++k) {
    const Vector g = target.grad_f(x);
    if (!g.allFinite()) throw OptimizationFailure("prox_solve: non-finite gradient");
    Vector next = x0 - eta * g;
    const double res = (next - x).norm();
    if (res < best.residual) {
      best.x_plus = x;
      best.residual = res;
    }
    best.iterations = k;
    if (res <= tol) {
      best.converged = true;
      return best;
    }
    history.push_back(res);
    if (history.size() > kWindow && res > 10.0 * history[history.size() - 1 - kWindow])
      throw OptimizationFailure("prox_solve: residual grew 10x over " + std::to_string(kWindow) +
                                " iterations (eta too large for a contraction?)");
    x = std::move(next);
  }
  return best;
}

struct RgoOptions {
  double delta = 0.1;   // accuracy level used only for the eta_max warning
  double c = 64.0;      // eta_max constant
  AnchorPolicy anchor = AnchorPolicy::Warn;
  double prox_tol = 0.0;  // 0 selects default_prox_tolerance
  std::uint64_t max_prox_iters = 1000;
};

struct RgoOutcome {
  TiltOutcome tilt;
  ProxResult prox;
  std::uint64_t gradient_queries = 0;  // prox iterations + tilt queries
  bool eta_exceeds_max = false;
};

/// One draw from RGO_{f,eta,y} ∝ exp(-f(x) - |x - y|^2 / (2 eta)).
inline RgoOutcome rgo_sample(const LogConcaveTarget& target, const Vector& y, double eta,
                             const ForsParams& params, Rng& rng, const RgoOptions& opts = {}) {
  RgoOutcome out;
  out.eta_exceeds_max = eta > eta_max(target.holder, target.dim, opts.delta, opts.c);
  if (target.exact_prox) {
    out.prox.x_plus = target.exact_prox(y, eta);
    out.prox.converged = true;
  } else {
    const double tol = opts.prox_tol > 0.0 ? opts.prox_tol : default_prox_tolerance(target.dim, eta);
    out.prox = prox_solve(target, y, eta, tol, opts.max_prox_iters);
  }
  TiltProblem problem{target.grad_f, y, eta, out.prox.x_plus, opts.anchor};
  out.tilt = sample_tilt(problem, params, rng);
  out.prox.residual = out.tilt.anchor_residual;
  out.gradient_queries = out.prox.iterations + out.tilt.gradient_queries;
  return out;
}

struct ProximalOptions {
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  RgoOptions rgo;
  bool record_queries = false;  // cumulative gradient queries after each iteration
};

struct ProximalReport {
  std::size_t iterations = 0;
  std::uint64_t gradient_queries = 0;
  std::uint64_t prox_queries = 0;
  std::uint64_t estimator_draws = 0;
  std::uint64_t outer_iterations = 0;
  std::uint64_t clipped_draws = 0;
  std::uint64_t anchor_warnings = 0;
  std::uint64_t unconverged_prox = 0;
  bool eta_exceeds_max = false;
  std::vector<std::uint64_t> cumulative_queries;
};

struct ProximalChain {
  std::vector<Vector> samples;  // X_1..X_N after burn-in and thinning
  ProximalReport report;
};

/// Runs N iterations of the proximal sampler from x_init.
inline ProximalChain proximal_sampler(const LogConcaveTarget& target, double eta, std::size_t n,
                                      const Vector& x_init, const ForsParams& params, Rng& rng,
                                      const ProximalOptions& opts = {}) {
  if (n < 1) throw InvalidArgument("proximal_sampler: N must be >= 1");
  if (opts.thin < 1) throw InvalidArgument("proximal_sampler: thin must be >= 1");
  if (static_cast<std::size_t>(x_init.size()) != target.dim)
    throw InvalidArgument("proximal_sampler: x_init has the wrong dimension");

  ProximalChain chain;
  auto& rep = chain.report;
  const double sd = std::sqrt(eta);
  Vector x = x_init;
  Vector y(x.size());
  for (std::size_t it = 1; it <= n; ++it) {
    for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = x[i] + sd * rng.normal();
    RgoOutcome rgo;
    try {
      rgo = rgo_sample(target, y, eta, params, rng, opts.rgo);
    } catch (const std::exception& e) {
      throw DomainError("proximal_sampler iteration " + std::to_string(it) + ": " + e.what());
    }
    x = std::move(rgo.tilt.fors.point);
    rep.gradient_queries += rgo.gradient_queries;
    rep.prox_queries += rgo.prox.iterations;
    rep.estimator_draws += rgo.tilt.fors.estimator_draws;
    rep.outer_iterations += rgo.tilt.fors.outer_iterations;
    rep.clipped_draws += rgo.tilt.fors.clipped_draws;
    rep.anchor_warnings += rgo.tilt.anchor_ok ? 0 : 1;
    rep.unconverged_prox += rgo.prox.converged ? 0 : 1;
    rep.eta_exceeds_max = rep.eta_exceeds_max || rgo.eta_exceeds_max;
    if (opts.record_queries) rep.cumulative_queries.push_back(rep.gradient_queries);
    if (it > opts.burn_in && (it - opts.burn_in) % opts.thin == 0) chain.samples.push_back(x);
  }
  rep.iterations = n;
  return chain;
}

// ---------------------------------------------------------------------------
// Built-in potentials.

/// f(x) = lambda/2 |x|^2 (lambda = 0 gives the flat potential).
inline LogConcaveTarget quadratic_target(std::size_t d, double lambda = 1.0) {
  if (!(lambda >= 0.0)) throw InvalidArgument("quadratic_target: lambda must be >= 0");
  LogConcaveTarget t;
  t.name = "quadratic";
  t.dim = d;
  t.grad_f = [lambda](const Vector& x) -> Vector { return lambda * x; };
  t.potential = [lambda](const Vector& x) { return 0.5 * lambda * x.squaredNorm(); };
  t.holder = {1.0, lambda};
  t.exact_prox = [lambda](const Vector& x0, double eta) -> Vector { return x0 / (1.0 + eta * lambda); };
  return t;
}

/// Separable f(x) = sum_i [ a log cosh(x_i) + b/2 x_i^2 + c x_i ], convex for
/// a, b >= 0; gradient Lipschitz with constant a + b.
inline LogConcaveTarget separable_target(std::size_t d, double logcosh_coef, double quad_coef,
                                         double linear_coef = 0.0) {
  if (!(logcosh_coef >= 0.0) || !(quad_coef >= 0.0))
    throw InvalidArgument("separable_target: coefficients must be >= 0 for convexity");
  LogConcaveTarget t;
  t.name = "custom";
  t.dim = d;
  const double a = logcosh_coef, b = quad_coef, c = linear_coef;
  t.grad_f = [a, b, c](const Vector& x) -> Vector {
    return (a * x.array().tanh() + b * x.array() + c).matrix();
  };
  t.potential = [a, b, c](const Vector& x) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x[i];
      // log cosh(v) = |v| + log1p(exp(-2|v|)) - log 2, stable for large |v|
      const double lc = std::abs(v) + std::log1p(std::exp(-2.0 * std::abs(v))) - std::log(2.0);
      f += a * lc + 0.5 * b * v * v + c * v;
    }
    return f;
  };
  t.holder = {1.0, a + b};
  if (a == 0.0) {
    t.exact_prox = [b, c](const Vector& x0, double eta) -> Vector {
      return ((x0.array() - eta * c) / (1.0 + eta * b)).matrix();
    };
  }
  return t;
}

/// f(x) = sum_i log cosh(x_i) + lambda/2 |x|^2.
inline LogConcaveTarget logcosh_quadratic_target(std::size_t d, double lambda = 1.0) {
  LogConcaveTarget t = separable_target(d, 1.0, lambda);
  t.name = "logcosh-quadratic";
  return t;
}

}  // namespace fors
