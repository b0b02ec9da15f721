#pragma once

// First-order rejection sampling.
//
// Given a proposal q and, for every point x, a way to draw i.i.d. bounded
// estimators W of a log-tilt w(x) (with E[W | x] = w(x) and |W| <= B),
// fors_sample returns a point with density proportional to q(x) * exp(w(x)).
// The value w(x) itself is never evaluated: the acceptance coin
// Ber(exp(w(x) - B)) is synthesized from J ~ Poisson(2B) estimator draws via
//
//   P(accept | x) = E[ prod_{j<=J} (B + W_j) / (2B) ] = exp(E[W | x] - B).

#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>

#include "fors/errors.hpp"
#include "fors/rng.hpp"

namespace fors {

struct ForsParams {
  double clip_bound = 1.0;                     // B
  std::uint64_t max_outer_iters = 1'000'000;   // safety cap on proposals
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(clip_bound > 0.0) || !std::isfinite(clip_bound))
      throw InvalidArgument("clip_bound must be a positive finite number");
    if (max_outer_iters < 1) throw InvalidArgument("max_outer_iters must be >= 1");
  }
};

/// One estimator draw. `clipped` marks draws that hit the clip boundary so
/// callers can monitor how often truncation is active.
struct Estimate {
  double value = 0.0;
  bool clipped = false;
};

/// Clip_B(w) = max(-B, min(B, w)).
inline Estimate clip_to(double w, double bound) {
  if (w > bound) return {bound, true};
  if (w < -bound) return {-bound, true};
  return {w, false};
}

template <class Point>
struct ForsOutcome {
  Point point{};
  std::uint64_t outer_iterations = 0;  // proposals examined, including the accepted one
  std::uint64_t estimator_draws = 0;   // total W draws across all iterations
  std::uint64_t proposal_draws = 0;
  std::uint64_t clipped_draws = 0;
};

/// Proposal: callable `Point(Rng&)`.
template <class P>
concept Proposal = requires(P p, Rng& rng) {
  { p(rng) };
};

/// Estimator family: callable `(const Point&, Rng&)` returning either a plain
/// double or an Estimate.
template <class F, class Point>
concept EstimatorFamily = requires(F f, const Point& x, Rng& rng) {
  { f(x, rng) };
} && (std::convertible_to<std::invoke_result_t<F&, const Point&, Rng&>, double> ||
      std::same_as<std::invoke_result_t<F&, const Point&, Rng&>, Estimate>);

namespace detail {

template <class R>
Estimate as_estimate(R&& r) {
  if constexpr (std::is_same_v<std::decay_t<R>, Estimate>) {
    return r;
  } else {
    return Estimate{static_cast<double>(r), false};
  }
}

// Knuth's multiplication method. Exact in distribution; only used with
// rate <= kPoissonChunk so exp(-rate) stays far from underflow.
inline std::uint64_t poisson_small(double rate, Rng& rng) {
  const double limit = std::exp(-rate);
  std::uint64_t k = 0;
  double prod = 1.0 - rng.uniform();  // (0, 1]
  while (prod > limit) {
    ++k;
    prod *= 1.0 - rng.uniform();
  }
  return k;
}

inline constexpr double kPoissonChunk = 30.0;

}  // namespace detail

/// Exact Poisson(rate) variate. Rates above 30 are split into chunks and the
/// independent chunk draws summed (Poisson is closed under convolution), so
/// no normal approximation is ever used.
inline std::uint64_t poisson_draw(double rate, Rng& rng) {
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw InvalidArgument("poisson_draw: rate must be finite and nonnegative, got " +
                          std::to_string(rate));
  if (rate == 0.0) return 0;
  std::uint64_t total = 0;
  double remaining = rate;
  while (remaining > detail::kPoissonChunk) {
    total += detail::poisson_small(detail::kPoissonChunk, rng);
    remaining -= detail::kPoissonChunk;
  }
  return total + detail::poisson_small(remaining, rng);
}

struct FactoryResult {
  bool accepted = false;
  std::uint64_t draws = 0;
  std::uint64_t clipped = 0;
};

/// Bernoulli factory for exp(E[W | x] - B).
///
/// Draws J ~ Poisson(2B) and then evaluates the product coin
/// prod_j Ber((B + W_j) / 2B) factor by factor, stopping at the first failed
/// factor. The product of independent coins is a coin with the product
/// probability, so stopping early leaves the law unchanged.
template <class Point, class Family>
  requires EstimatorFamily<std::remove_reference_t<Family>, Point>
FactoryResult factory_accept(const Point& x, Family&& family, double bound, Rng& rng) {
  FactoryResult res;
  const std::uint64_t j = poisson_draw(2.0 * bound, rng);
  for (std::uint64_t i = 0; i < j; ++i) {
    const Estimate w = detail::as_estimate(family(x, rng));
    ++res.draws;
    if (w.clipped) ++res.clipped;
    if (!(w.value >= -bound && w.value <= bound))
      throw ContractViolation("estimator draw " + std::to_string(w.value) +
                              " outside [-B, B] with B=" + std::to_string(bound));
    if (rng.uniform() >= (bound + w.value) / (2.0 * bound)) return res;
  }
  res.accepted = true;
  return res;
}

/// Rejection sampling with Bernoulli-factory acceptance. The returned point
/// has density proportional to q(x) exp(E[W | x]).
template <class Prop, class Family>
  requires Proposal<std::remove_reference_t<Prop>>
auto fors_sample(Prop&& proposal, Family&& family, const ForsParams& params, Rng& rng)
    -> ForsOutcome<std::decay_t<std::invoke_result_t<Prop&, Rng&>>> {
  using Point = std::decay_t<std::invoke_result_t<Prop&, Rng&>>;
  static_assert(EstimatorFamily<std::remove_reference_t<Family>, Point>,
                "family must accept (const Point&, Rng&)");
  params.validate();

  ForsOutcome<Point> out;
  while (out.outer_iterations < params.max_outer_iters) {
    Point x = proposal(rng);
    ++out.proposal_draws;
    ++out.outer_iterations;
    const FactoryResult coin = factory_accept(x, family, params.clip_bound, rng);
    out.estimator_draws += coin.draws;
    out.clipped_draws += coin.clipped;
    if (coin.accepted) {
      out.point = std::move(x);
      return out;
    }
  }
  throw IterationBudgetExceeded(out.outer_iterations, out.estimator_draws, out.proposal_draws);
}

/// High-probability cap on estimator draws for one FORS call:
/// P(draws > 3 B e^{2B} log(2/delta)) <= delta.
inline double draw_tail_bound(double bound, double delta) {
  return 3.0 * bound * std::exp(2.0 * bound) * std::log(2.0 / delta);
}

}  // namespace fors
