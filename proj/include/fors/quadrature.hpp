#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "fors/errors.hpp"

namespace fors {

namespace detail {

template <class F>
double simpson_recurse(const F& f, double a, double b, double fa, double fm, double fb,
                       double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance `tol`.
/// The interval is pre-split into `pieces` panels so narrow peaks are not
/// missed by the first coarse estimate.
template <class F>
double integrate(const F& f, double a, double b, double tol = 1e-9, int pieces = 64,
                 int max_depth = 40) {
  if (!(b > a)) throw InvalidArgument("integrate: need a < b");
  const double h = (b - a) / pieces;
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + i * h;
    const double hi = (i + 1 == pieces) ? b : lo + h;
    const double flo = f(lo), fhi = f(hi), fmid = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += detail::simpson_recurse(f, lo, hi, flo, fmid, fhi, whole, tol / pieces, max_depth);
  }
  return total;
}

/// CDF of an unnormalized 1D density on [lo, hi], tabulated by adaptive
/// Simpson on `cells` equal cells and interpolated linearly between nodes
/// (so the result is monotone by construction). Mass outside [lo, hi] is
/// treated as zero.
class TabulatedCdf {
 public:
  TabulatedCdf(const std::function<double(double)>& density, double lo, double hi, int cells = 20000,
               double tol = 1e-9)
      : lo_(lo), h_((hi - lo) / cells), cum_(static_cast<std::size_t>(cells) + 1, 0.0) {
    if (!(hi > lo) || cells < 1) throw InvalidArgument("TabulatedCdf: need lo < hi and cells >= 1");
    for (int i = 0; i < cells; ++i) {
      const double a = lo + i * h_;
      const double piece = integrate(density, a, a + h_, tol / cells, 1);
      if (!(piece >= 0.0)) throw InvalidArgument("TabulatedCdf: density must be nonnegative and finite");
      cum_[i + 1] = cum_[i] + piece;
    }
    mass_ = cum_.back();
    if (!(mass_ > 0.0) || !std::isfinite(mass_)) throw InvalidArgument("TabulatedCdf: zero or infinite mass");
    for (double& c : cum_) c /= mass_;
  }

  double operator()(double x) const {
    const double u = (x - lo_) / h_;
    if (!(u > 0.0)) return 0.0;
    const auto i = static_cast<std::size_t>(u);
    if (i + 1 >= cum_.size()) return 1.0;
    const double frac = u - static_cast<double>(i);
    return cum_[i] + frac * (cum_[i + 1] - cum_[i]);
  }

  /// Integral of the unnormalized density over [lo, hi].
  double mass() const { return mass_; }

 private:
  double lo_;
  double h_;
  std::vector<double> cum_;
  double mass_ = 0.0;
};

}  // namespace fors
