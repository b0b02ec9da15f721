#pragma once

// Empirical discrepancy measures used to verify samplers against known laws.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "fors/errors.hpp"
#include "fors/types.hpp"

namespace fors {

struct MetricReport {
  std::string name;
  double value = 0.0;
  std::size_t n_samples = 0;
  double standard_error = 0.0;
  double critical_value = 0.0;
  double p_value = std::numeric_limits<double>::quiet_NaN();
  std::size_t dof = 0;
};

/// 95% asymptotic Kolmogorov critical value.
inline double ks_critical_95(std::size_t n) { return 1.358 / std::sqrt(static_cast<double>(n)); }

/// Kolmogorov-Smirnov distance sup_x |F_n(x) - F(x)|.
template <class Cdf>
MetricReport ks_1d(std::span<const double> samples, Cdf&& cdf) {
  const std::size_t n = samples.size();
  if (n < 100) throw InvalidArgument("ks_1d: need at least 100 samples");
  std::vector<double> xs(samples.begin(), samples.end());
  std::sort(xs.begin(), xs.end());
  double sup = 0.0;
  double prev = 0.0;
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(xs[i]);
    if (!(f >= 0.0 && f <= 1.0) || f < prev - 1e-12)
      throw InvalidArgument("ks_1d: invalid cdf (not monotone or outside [0,1]) at x=" +
                            std::to_string(xs[i]));
    prev = f;
    sup = std::max({sup, static_cast<double>(i + 1) / nd - f, f - static_cast<double>(i) / nd});
  }
  MetricReport r;
  r.name = "ks";
  r.value = sup;
  r.n_samples = n;
  r.critical_value = ks_critical_95(n);
  return r;
}

/// Wasserstein-1 distance between two empirical laws on the line. Equal sizes
/// use the sorted (comonotone) coupling; unequal sizes integrate |F_a - F_b|.
inline MetricReport w1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("w1_1d: empty sample");
  std::vector<double> xa(a.begin(), a.end()), xb(b.begin(), b.end());
  std::sort(xa.begin(), xa.end());
  std::sort(xb.begin(), xb.end());
  MetricReport r;
  r.name = "w1";
  r.n_samples = std::min(xa.size(), xb.size());
  if (xa.size() == xb.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < xa.size(); ++i) s += std::abs(xa[i] - xb[i]);
    r.value = s / static_cast<double>(xa.size());
    return r;
  }
  // Sweep the merged support, accumulating |F_a - F_b| dx.
  std::size_t i = 0, j = 0;
  const double na = static_cast<double>(xa.size()), nb = static_cast<double>(xb.size());
  double x = std::min(xa[0], xb[0]);
  double total = 0.0;
  while (i < xa.size() || j < xb.size()) {
    const double next = (j >= xb.size() || (i < xa.size() && xa[i] <= xb[j])) ? xa[i] : xb[j];
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - x);
    x = next;
    while (i < xa.size() && xa[i] == x) ++i;
    while (j < xb.size() && xb[j] == x) ++j;
  }
  r.value = total;
  return r;
}

struct MomentSummary {
  std::size_t n = 0;
  Vector mean;
  Matrix cov;          // unbiased
  Vector mean_se;      // sqrt(var_i / n)
  Vector variance_se;  // sqrt((m4_i - var_i^2) / n)
};

inline MomentSummary moments(std::span<const Vector> samples) {
  if (samples.size() < 2) throw InvalidArgument("moments: need at least 2 samples for a covariance");
  const auto d = samples.front().size();
  MomentSummary m;
  m.n = samples.size();
  const double n = static_cast<double>(m.n);
  m.mean = Vector::Zero(d);
  for (const auto& x : samples) m.mean += x;
  m.mean /= n;
  m.cov = Matrix::Zero(d, d);
  Vector m4 = Vector::Zero(d);
  for (const auto& x : samples) {
    const Vector c = x - m.mean;
    m.cov.noalias() += c * c.transpose();
    m4 += c.array().pow(4).matrix();
  }
  m4 /= n;
  const Vector biased_var = m.cov.diagonal() / n;
  m.cov /= (n - 1.0);
  m.mean_se = (m.cov.diagonal() / n).cwiseSqrt();
  m.variance_se = ((m4 - biased_var.cwiseProduct(biased_var)) / n).cwiseMax(0.0).cwiseSqrt();
  return m;
}

struct BatchMeans {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t batches = 0;
};

/// Mean of a correlated series with a non-overlapping batch-means standard
/// error. Trailing samples that do not fill a batch are dropped.
inline BatchMeans batch_means(std::span<const double> series, std::size_t n_batches = 50) {
  if (n_batches < 2 || series.size() < n_batches)
    throw InvalidArgument("batch_means: need at least n_batches >= 2 samples");
  const std::size_t len = series.size() / n_batches;
  std::vector<double> means(n_batches, 0.0);
  for (std::size_t b = 0; b < n_batches; ++b) {
    for (std::size_t i = 0; i < len; ++i) means[b] += series[b * len + i];
    means[b] /= static_cast<double>(len);
  }
  BatchMeans out;
  out.batches = n_batches;
  for (double m : means) out.mean += m;
  out.mean /= static_cast<double>(n_batches);
  double ss = 0.0;
  for (double m : means) ss += (m - out.mean) * (m - out.mean);
  out.standard_error = std::sqrt(ss / static_cast<double>(n_batches - 1) / static_cast<double>(n_batches));
  return out;
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
inline double chi2_survival(double stat, std::size_t dof) {
  if (dof == 0) return 1.0;
  return boost::math::gamma_q(0.5 * static_cast<double>(dof), 0.5 * stat);
}

/// Pearson goodness-of-fit of observed counts to a pmf. Cells whose expected
/// count is below 5 are pooled into one cell when `merge_small` is set,
/// otherwise rejected.
template <class Key>
MetricReport discrete_chi2(const std::map<Key, std::uint64_t>& counts,
                           const std::map<Key, double>& pmf, bool merge_small = true) {
  double total_p = 0.0;
  for (const auto& [k, p] : pmf) {
    if (!(p >= 0.0)) throw InvalidArgument("discrete_chi2: negative probability");
    total_p += p;
  }
  if (std::abs(total_p - 1.0) > 1e-10) throw InvalidArgument("discrete_chi2: pmf must sum to 1");
  std::uint64_t n = 0;
  for (const auto& [k, c] : counts) {
    if (c > 0 && (!pmf.contains(k) || pmf.at(k) == 0.0))
      throw InvalidArgument("discrete_chi2: observed count in a zero-probability cell");
    n += c;
  }
  if (n == 0) throw InvalidArgument("discrete_chi2: no observations");
  const double nd = static_cast<double>(n);

  double stat = 0.0;
  std::size_t cells = 0;
  double pooled_expected = 0.0, pooled_observed = 0.0;
  for (const auto& [k, p] : pmf) {
    if (p == 0.0) continue;
    const double expected = nd * p;
    const auto it = counts.find(k);
    const double observed = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    if (expected < 5.0) {
      if (!merge_small) throw InvalidArgument("discrete_chi2: expected count below 5 in a cell");
      pooled_expected += expected;
      pooled_observed += observed;
      continue;
    }
    stat += (observed - expected) * (observed - expected) / expected;
    ++cells;
  }
  if (pooled_expected > 0.0) {
    stat += (pooled_observed - pooled_expected) * (pooled_observed - pooled_expected) / pooled_expected;
    ++cells;
  }
  MetricReport r;
  r.name = "chi2";
  r.value = stat;
  r.n_samples = n;
  r.dof = cells > 0 ? cells - 1 : 0;
  r.p_value = chi2_survival(stat, r.dof);
  return r;
}

/// sum_k |count_k / n - pmf_k|.
template <class Key>
double l1_distance(const std::map<Key, std::uint64_t>& counts, const std::map<Key, double>& pmf) {
  std::uint64_t n = 0;
  for (const auto& [k, c] : counts) n += c;
  double l1 = 0.0;
  for (const auto& [k, p] : pmf) {
    const auto it = counts.find(k);
    const double f = it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(n);
    l1 += std::abs(f - p);
  }
  for (const auto& [k, c] : counts)
    if (!pmf.contains(k)) l1 += static_cast<double>(c) / static_cast<double>(n);
  return l1;
}

}  // namespace fors
