#pragma once

// Analytic score oracles for Gaussian-mixture data under the forward process
// X_t | X_0 ~ N(abar X_0, sigma^2 I).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fors/errors.hpp"
#include "fors/quadrature.hpp"
#include "fors/rng.hpp"
#include "fors/types.hpp"

namespace fors {

/// Mixture of isotropic Gaussians  sum_h w_h N(mu_h, tau_h^2 I).
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<double> variances;

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.empty() ? 0 : static_cast<std::size_t>(means.front().size()); }

  void validate() const {
    if (weights.empty()) throw InvalidArgument("mixture: need at least one component");
    if (means.size() != weights.size() || variances.size() != weights.size())
      throw InvalidArgument("mixture: weights, means and variances must have equal length");
    double total = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw InvalidArgument("mixture: weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("mixture: weights must sum to 1");
    const auto d = means.front().size();
    if (d == 0) throw InvalidArgument("mixture: dimension must be >= 1");
    for (const auto& m : means)
      if (m.size() != d) throw InvalidArgument("mixture: means have inconsistent dimension");
    for (double v : variances)
      if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("mixture: variances must be >= 0");
  }

  /// E|X|^2 = sum_h w_h (|mu_h|^2 + d tau_h^2).
  double second_moment() const {
    double m2 = 0.0;
    for (std::size_t h = 0; h < components(); ++h)
      m2 += weights[h] * (means[h].squaredNorm() + static_cast<double>(dim()) * variances[h]);
    return m2;
  }

  double log_density(const Vector& x) const {
    const double d = static_cast<double>(dim());
    double hi = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(components());
    for (std::size_t h = 0; h < components(); ++h) {
      const double v = variances[h];
      terms[h] = std::log(weights[h]) - 0.5 * (x - means[h]).squaredNorm() / v -
                 0.5 * d * std::log(2.0 * std::numbers::pi * v);
      hi = std::max(hi, terms[h]);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - hi);
    return hi + std::log(s);
  }

  /// CDF of coordinate `coord` (each coordinate marginal is a 1D mixture).
  double coordinate_cdf(double x, std::size_t coord = 0) const {
    double c = 0.0;
    for (std::size_t h = 0; h < components(); ++h) {
      const double sd = std::sqrt(variances[h]);
      c += weights[h] * 0.5 * std::erfc(-(x - means[h][static_cast<Eigen::Index>(coord)]) /
                                        (sd * std::numbers::sqrt2));
    }
    return c;
  }

  Vector sample(Rng& rng) const {
    double u = rng.uniform();
    std::size_t h = 0;
    while (h + 1 < components() && u >= weights[h]) u -= weights[h++];
    Vector x(means[h].size());
    const double sd = std::sqrt(variances[h]);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = means[h][i] + sd * rng.normal();
    return x;
  }
};

/// Law of abar X_0 + sigma xi for X_0 ~ mix: means abar mu_h, variances
/// abar^2 tau_h^2 + sigma^2.
inline GaussianMixture marginal_of(const GaussianMixture& mix, double bar_alpha, double sigma_sq) {
  mix.validate();
  if (!(bar_alpha > 0.0 && bar_alpha <= 1.0))
    throw InvalidArgument("marginal_of: bar_alpha must lie in (0,1]");
  if (!(sigma_sq >= 0.0)) throw InvalidArgument("marginal_of: sigma_sq must be >= 0");
  GaussianMixture out = mix;
  bool any_positive = false;
  for (std::size_t h = 0; h < mix.components(); ++h) {
    out.means[h] = bar_alpha * mix.means[h];
    out.variances[h] = bar_alpha * bar_alpha * mix.variances[h] + sigma_sq;
    any_positive = any_positive || out.variances[h] > 0.0;
  }
  if (!any_positive) throw DomainError("marginal_of: all component variances are zero");
  return out;
}

/// grad log p(x) for an isotropic mixture, via softmax responsibilities.
inline Vector exact_score(const GaussianMixture& mix_t, const Vector& x) {
  const std::size_t k = mix_t.components();
  const double d = static_cast<double>(x.size());
  if (k == 1) {
    if (!(mix_t.variances[0] > 0.0)) throw DomainError("exact_score: zero-variance component");
    return (mix_t.means[0] - x) / mix_t.variances[0];
  }
  double logits_max = -std::numeric_limits<double>::infinity();
  double buf[16];
  std::vector<double> heap;
  double* logit = buf;
  if (k > 16) {
    heap.resize(k);
    logit = heap.data();
  }
  for (std::size_t h = 0; h < k; ++h) {
    const double v = mix_t.variances[h];
    if (!(v > 0.0)) throw DomainError("exact_score: zero-variance component");
    logit[h] = std::log(mix_t.weights[h]) - 0.5 * (x - mix_t.means[h]).squaredNorm() / v -
               0.5 * d * std::log(v);
    logits_max = std::max(logits_max, logit[h]);
  }
  double norm = 0.0;
  for (std::size_t h = 0; h < k; ++h) {
    logit[h] = std::exp(logit[h] - logits_max);
    norm += logit[h];
  }
  Vector s = Vector::Zero(x.size());
  for (std::size_t h = 0; h < k; ++h)
    s.noalias() += (logit[h] / norm / mix_t.variances[h]) * (mix_t.means[h] - x);
  return s;
}

struct TweedieEstimate {
  Vector score;
  Vector standard_error;
  double effective_sample_size = 0.0;
};

/// Monte Carlo posterior-mean score: (1/sigma^2) E[abar X_0 - X_t | X_t = x],
/// by self-normalized importance sampling with X_0 ~ p_data. Independent of
/// exact_score; used to cross-check it.
inline TweedieEstimate tweedie_mc_check(const GaussianMixture& data, double bar_alpha,
                                        double sigma_sq, const Vector& x, std::size_t n_mc,
                                        Rng& rng) {
  data.validate();
  if (n_mc < 10'000) throw InvalidArgument("tweedie_mc_check: n_mc must be >= 1e4");
  if (!(sigma_sq > 0.0)) throw InvalidArgument("tweedie_mc_check: sigma_sq must be > 0");
  const auto d = x.size();
  std::vector<Vector> f(n_mc);
  std::vector<double> logw(n_mc);
  double max_logw = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_mc; ++i) {
    const Vector mean = bar_alpha * data.sample(rng);
    logw[i] = -0.5 * (x - mean).squaredNorm() / sigma_sq;
    max_logw = std::max(max_logw, logw[i]);
    f[i] = (mean - x) / sigma_sq;
  }
  double sw = 0.0, sw2 = 0.0;
  Vector acc = Vector::Zero(d);
  for (std::size_t i = 0; i < n_mc; ++i) {
    logw[i] = std::exp(logw[i] - max_logw);
    sw += logw[i];
    sw2 += logw[i] * logw[i];
    acc += logw[i] * f[i];
  }
  TweedieEstimate est;
  est.effective_sample_size = sw * sw / sw2;
  if (est.effective_sample_size < 100.0)
    throw DomainError("tweedie_mc_check: effective sample size " +
                      std::to_string(est.effective_sample_size) + " < 100, estimate unreliable");
  est.score = acc / sw;
  Vector var = Vector::Zero(d);
  for (std::size_t i = 0; i < n_mc; ++i) {
    const Vector dev = f[i] - est.score;
    var += (logw[i] * logw[i]) * dev.cwiseProduct(dev);
  }
  est.standard_error = (var / (sw * sw)).cwiseSqrt();
  return est;
}

/// A score function s_t with a shared, thread-safe query counter. Copies
/// share the counter.
class ScoreOracle {
 public:
  ScoreOracle() = default;
  ScoreOracle(VectorField fn, double bar_alpha, double sigma_sq,
              std::optional<GaussianMixture> marginal = std::nullopt,
              std::optional<double> score_error = std::nullopt)
      : fn_(std::make_shared<VectorField>(std::move(fn))),
        counter_(std::make_shared<std::atomic<std::uint64_t>>(0)),
        bar_alpha_(bar_alpha),
        sigma_sq_(sigma_sq),
        marginal_(std::move(marginal)),
        score_error_(score_error) {}

  Vector operator()(const Vector& x) const {
    counter_->fetch_add(1, std::memory_order_relaxed);
    return (*fn_)(x);
  }

  std::uint64_t queries() const { return counter_ ? counter_->load() : 0; }
  void reset_queries() const { counter_->store(0); }

  double bar_alpha() const { return bar_alpha_; }
  double sigma_sq() const { return sigma_sq_; }
  /// The marginal p_t this oracle is the score of, when known analytically.
  const std::optional<GaussianMixture>& marginal() const { return marginal_; }
  /// L2(p_t) distance to the true score, when known exactly.
  const std::optional<double>& score_error() const { return score_error_; }
  explicit operator bool() const { return static_cast<bool>(fn_); }

 private:
  std::shared_ptr<VectorField> fn_;
  std::shared_ptr<std::atomic<std::uint64_t>> counter_;
  double bar_alpha_ = 1.0;
  double sigma_sq_ = 0.0;
  std::optional<GaussianMixture> marginal_;
  std::optional<double> score_error_;
};

/// Exact score of p_t for data `data` at noise level (bar_alpha, sigma_sq).
inline ScoreOracle exact_oracle(const GaussianMixture& data, double bar_alpha, double sigma_sq) {
  GaussianMixture m = marginal_of(data, bar_alpha, sigma_sq);
  for (double v : m.variances)
    if (!(v > 0.0)) throw DomainError("exact_oracle: marginal has a zero-variance component");
  auto fn = [m](const Vector& x) { return exact_score(m, x); };
  return ScoreOracle(fn, bar_alpha, sigma_sq, m, 0.0);
}

enum class PerturbationMode { ConstantBias, SmoothField };

namespace detail {
inline constexpr double kSmoothFieldPhase = 0.3;
}

/// Deterministic score error of L2(p_t) size eps.
///
/// ConstantBias: s(x) = s_base(x) + eps u with u = (1,...,1)/sqrt(d).
/// SmoothField:  s(x) = s_base(x) + eps c (sin(x_1 + phi), ..., sin(x_d + phi)),
///               c normalizing the field to unit L2(p_t) norm by quadrature
///               over the oracle's marginal (d <= 2 only).
inline ScoreOracle perturbed_oracle(const ScoreOracle& base, double eps, PerturbationMode mode) {
  if (!(eps >= 0.0)) throw InvalidArgument("perturbed_oracle: eps must be >= 0");
  if (eps == 0.0) return base;
  // The error is exactly eps only when the base oracle is itself exact.
  const std::optional<double> error =
      (base.score_error() && *base.score_error() == 0.0) ? std::optional<double>(eps) : std::nullopt;
  if (mode == PerturbationMode::ConstantBias) {
    auto fn = [base, eps](const Vector& x) {
      Vector s = base(x);
      s.array() += eps / std::sqrt(static_cast<double>(x.size()));
      return s;
    };
    return ScoreOracle(fn, base.bar_alpha(), base.sigma_sq(), base.marginal(), error);
  }

  if (!base.marginal()) throw DomainError("SmoothField perturbation needs a known marginal p_t");
  const GaussianMixture& m = *base.marginal();
  const std::size_t d = m.dim();
  if (d > 2) throw DomainError("SmoothField perturbation supports d <= 2 only, got d=" + std::to_string(d));

  // E_p |g|^2 = sum_i E_p sin^2(x_i + phi), one 1D quadrature per coordinate.
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t h = 0; h < m.components(); ++h) {
      const double mu = m.means[h][static_cast<Eigen::Index>(i)];
      const double sd = std::sqrt(m.variances[h]);
      if (!(sd > 0.0)) throw DomainError("SmoothField: zero-variance marginal component");
      auto integrand = [mu, sd](double u) {
        const double s = std::sin(u + detail::kSmoothFieldPhase);
        const double z = (u - mu) / sd;
        return s * s * std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
      };
      norm_sq += m.weights[h] * integrate(integrand, mu - 12.0 * sd, mu + 12.0 * sd, 1e-11);
    }
  }
  const double scale = eps / std::sqrt(norm_sq);
  auto fn = [base, scale](const Vector& x) {
    Vector s = base(x);
    s.array() += scale * (x.array() + detail::kSmoothFieldPhase).sin();
    return s;
  };
  return ScoreOracle(fn, base.bar_alpha(), base.sigma_sq(), base.marginal(), error);
}

}  // namespace fors
