#pragma once

// Sampling from Gaussian tilts  nu(x) ∝ exp(-f(x) - |x - x0|^2 / (2 eta))
// with gradient queries of f only.
//
// Proposal: q = N(xhat, eta I) with xhat = x0 - eta grad f(x_plus), where
// x_plus is (close to) prox_{eta f}(x0). The log-ratio log nu - log q equals,
// up to a constant, h(x) = <grad f(x_plus), x> - f(x), which is estimated
// without bias along the trigonometric path
//
//   gamma_r   = a_r x + (1 - a_r) xhat + b_r z,   a_r = sin(pi r / 2), b_r = cos(pi r / 2)
//   W_{r,z,x} = < d/dr gamma_r , grad f(x_plus) - grad f(gamma_r) >
//
// with r ~ Unif[0,1], z ~ N(0, eta I). Clipped draws feed fors_sample.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "fors/core.hpp"
#include "fors/errors.hpp"
#include "fors/rng.hpp"
#include "fors/types.hpp"

namespace fors {

/// Hölder continuity of the gradient: |grad f(x) - grad f(y)| <= beta_s |x-y|^s.
struct HolderSpec {
  double s = 1.0;
  double beta_s = 1.0;

  void validate() const {
    if (!(s >= 0.0 && s <= 1.0)) throw InvalidArgument("Hölder exponent s must lie in [0,1]");
    if (!(beta_s >= 0.0)) throw InvalidArgument("Hölder constant beta_s must be >= 0");
  }
};

enum class AnchorPolicy { Warn, Strict };

struct TiltProblem {
  VectorField grad_f;
  Vector x0;
  double eta = 0.0;
  Vector x_plus;
  AnchorPolicy anchor_policy = AnchorPolicy::Warn;

  std::size_t dim() const { return static_cast<std::size_t>(x0.size()); }

  void validate() const {
    if (!grad_f) throw InvalidArgument("TiltProblem: grad_f is empty");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidArgument("TiltProblem: eta must be > 0");
    if (x0.size() == 0) throw InvalidArgument("TiltProblem: dimension must be >= 1");
    if (x_plus.size() != x0.size())
      throw InvalidArgument("TiltProblem: x_plus and x0 dimensions differ");
  }
};

struct PathPoint {
  Vector gamma;
  Vector gamma_dot;
};

/// gamma_r and its r-derivative for the trigonometric path anchored at xhat.
inline PathPoint path_eval(const Vector& x, const Vector& xhat, const Vector& z, double r) {
  if (!(r >= 0.0 && r <= 1.0))
    throw InvalidArgument("path_eval: r must lie in [0,1], got " + std::to_string(r));
  if (xhat.size() != x.size() || z.size() != x.size())
    throw InvalidArgument("path_eval: dimension mismatch");
  constexpr double half_pi = std::numbers::pi / 2.0;
  const double a = std::sin(half_pi * r);
  const double b = std::cos(half_pi * r);
  PathPoint p;
  p.gamma = a * x + (1.0 - a) * xhat + b * z;
  p.gamma_dot = (half_pi * b) * (x - xhat) - (half_pi * a) * z;
  return p;
}

namespace detail {

inline void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw NumericalFailure(std::string(what) + " returned a non-finite value");
}

}  // namespace detail

/// Estimator family for one tilt problem. Caches grad f(x_plus) and xhat on
/// construction; every draw then costs exactly one gradient query.
class TiltEstimator {
 public:
  TiltEstimator(const TiltProblem& problem, double clip_bound)
      : problem_(problem), bound_(clip_bound), sqrt_eta_(std::sqrt(problem.eta)) {
    problem_.validate();
    grad_plus_ = problem_.grad_f(problem_.x_plus);
    detail::require_finite(grad_plus_, "grad_f(x_plus)");
    xhat_ = problem_.x0 - problem_.eta * grad_plus_;
    z_.resize(static_cast<Eigen::Index>(problem_.dim()));
  }

  /// Unclipped W for explicit (z, r).
  double raw(const Vector& x, const Vector& z, double r) const {
    const PathPoint p = path_eval(x, xhat_, z, r);
    const Vector g = problem_.grad_f(p.gamma);
    detail::require_finite(g, "grad_f");
    return p.gamma_dot.dot(grad_plus_ - g);
  }

  Estimate operator()(const Vector& x, Rng& rng) {
    const double r = rng.uniform();
    for (Eigen::Index i = 0; i < z_.size(); ++i) z_[i] = sqrt_eta_ * rng.normal();
    ++gradient_queries_;
    return clip_to(raw(x, z_, r), bound_);
  }

  const Vector& xhat() const { return xhat_; }
  const Vector& grad_at_anchor() const { return grad_plus_; }
  std::uint64_t gradient_queries() const { return gradient_queries_; }

 private:
  TiltProblem problem_;
  double bound_;
  double sqrt_eta_;
  Vector grad_plus_;
  Vector xhat_;
  Vector z_;
  std::uint64_t gradient_queries_ = 0;
};

/// One clipped estimator draw for `problem`. Recomputes grad f(x_plus); use
/// TiltEstimator directly when drawing repeatedly.
inline Estimate tilt_estimator(const Vector& x, const TiltProblem& problem, double clip_bound,
                               Rng& rng) {
  TiltEstimator est(problem, clip_bound);
  return est(x, rng);
}

/// |x0 - eta grad f(x_plus) - x_plus|.
inline double anchor_residual(const TiltProblem& problem) {
  return (problem.x0 - problem.eta * problem.grad_f(problem.x_plus) - problem.x_plus).norm();
}

struct TiltOutcome {
  ForsOutcome<Vector> fors;
  std::uint64_t gradient_queries = 0;  // estimator draws + 1 for grad f(x_plus)
  double anchor_residual = 0.0;
  bool anchor_ok = true;               // residual <= sqrt(d eta)
};

/// Draws one point from (the clipped approximation of) the Gaussian tilt.
inline TiltOutcome sample_tilt(const TiltProblem& problem, const ForsParams& params, Rng& rng) {
  problem.validate();
  params.validate();
  TiltEstimator family(problem, params.clip_bound);

  TiltOutcome out;
  out.anchor_residual = (problem.x0 - problem.eta * family.grad_at_anchor() - problem.x_plus).norm();
  out.anchor_ok = out.anchor_residual <= std::sqrt(static_cast<double>(problem.dim()) * problem.eta);
  if (!out.anchor_ok && problem.anchor_policy == AnchorPolicy::Strict)
    throw DomainError("prox anchor residual " + std::to_string(out.anchor_residual) +
                      " exceeds sqrt(d*eta)");

  const Vector& center = family.xhat();
  const double sd = std::sqrt(problem.eta);
  auto proposal = [&center, sd](Rng& g) {
    Vector x(center.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = center[i] + sd * g.normal();
    return x;
  };
  out.fors = fors_sample(proposal, family, params, rng);
  out.gradient_queries = out.fors.estimator_draws + 1;
  return out;
}

/// Largest step size allowed by the tilt step-size rule,
///   1/eta = C (beta_s^2 d^s log(1/delta) + s beta_s^2 d^{s-1} log^2(1/delta))^{1/(1+s)}.
/// Returns +inf when beta_s = 0 (any step works; the caller must cap it).
inline double eta_max(const HolderSpec& spec, std::size_t d, double delta, double c = 64.0) {
  spec.validate();
  if (d < 1) throw InvalidArgument("eta_max: d must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("eta_max: delta must lie in (0,1)");
  if (!(c > 0.0)) throw InvalidArgument("eta_max: C must be > 0");
  if (spec.beta_s == 0.0) return std::numeric_limits<double>::infinity();
  const double dd = static_cast<double>(d);
  const double l = std::log(1.0 / delta);
  const double b2 = spec.beta_s * spec.beta_s;
  const double inner = b2 * std::pow(dd, spec.s) * l + spec.s * b2 * std::pow(dd, spec.s - 1.0) * l * l;
  return 1.0 / (c * std::pow(inner, 1.0 / (1.0 + spec.s)));
}

}  // namespace fors
