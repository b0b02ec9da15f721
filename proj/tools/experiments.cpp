#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "fors/fors.hpp"
#include "harness.hpp"

namespace fors::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}
std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

MetricReport metric(const std::string& name, double value, std::size_t n, double se = kNaN,
                    double critical = kNaN) {
  MetricReport m;
  m.name = name;
  m.value = value;
  m.n_samples = n;
  m.standard_error = se;
  m.critical_value = critical;
  return m;
}

void add(RunReport& r, MetricReport m) {
  const std::string key = m.name;
  r.metrics[key] = std::move(m);
}

/// Shared state for one run: counters that survive a failure.
struct Context {
  const ExperimentConfig& cfg;
  const RunOptions& opts;
  RunReport report;
  std::atomic<std::uint64_t> completed{0};

  ForsParams params() const {
    ForsParams p;
    p.clip_bound = cfg.clip_bound;
    p.max_outer_iters = cfg.max_outer_iters;
    p.rng_seed = cfg.seed;
    return p;
  }
  Rng rng(std::uint64_t stream) const { return Rng(cfg.seed, stream); }
};

CsvTable coordinates(const std::vector<Vector>& xs, std::size_t d) {
  CsvTable t;
  for (std::size_t i = 0; i < d; ++i) t.header.push_back("x" + std::to_string(i + 1));
  t.rows.reserve(xs.size());
  for (const auto& x : xs) t.add_numbers(to_std(x));
  return t;
}

std::vector<double> column(const std::vector<Vector>& xs, std::size_t i) {
  std::vector<double> c(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) c[k] = xs[k][static_cast<Eigen::Index>(i)];
  return c;
}

// ---------------------------------------------------------------------------
// fors-oracle: FORS on a finite state space with a known tilted law.

RunOutput run_oracle(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& o = cfg.oracle;
  const std::size_t k = o.tilt.size();
  std::vector<double> q = o.proposal.empty() ? std::vector<double>(k, 1.0 / static_cast<double>(k)) : o.proposal;
  std::vector<double> cum(k);
  std::partial_sum(q.begin(), q.end(), cum.begin());

  auto proposal = [&](Rng& g) {
    const double u = g.uniform() * cum.back();
    return static_cast<int>(std::min<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(), k - 1));
  };
  auto family = [&](const int& x, Rng& g) {
    const double w = o.tilt[static_cast<std::size_t>(x)];
    return o.noise > 0.0 ? w + o.noise * (2.0 * g.uniform() - 1.0) : w;
  };

  const std::size_t n = cfg.n_samples;
  std::vector<int> state(n);
  std::vector<std::uint64_t> outer(n), draws(n), clipped(n);
  const ForsParams params = ctx.params();
  parallel_for(n, ctx.opts.workers, [&](std::size_t i) {
    Rng rng = ctx.rng(i);
    const auto out = fors_sample(proposal, family, params, rng);
    state[i] = out.point;
    outer[i] = out.outer_iterations;
    draws[i] = out.estimator_draws;
    clipped[i] = out.clipped_draws;
    ++ctx.completed;
  });

  RunOutput res;
  RunReport& rep = ctx.report;
  const std::uint64_t total_outer = std::accumulate(outer.begin(), outer.end(), std::uint64_t{0});
  const std::uint64_t total_draws = std::accumulate(draws.begin(), draws.end(), std::uint64_t{0});
  rep.counts = {{"runs", n},
                {"outer_iterations", total_outer},
                {"proposal_draws", total_outer},
                {"estimator_draws", total_draws},
                {"clipped_draws", std::accumulate(clipped.begin(), clipped.end(), std::uint64_t{0})}};

  // Target law q(x) e^{w(x)} / Z; the estimator noise is mean zero.
  std::map<int, double> pmf;
  double z = 0.0, expected_accept = 0.0;
  for (std::size_t x = 0; x < k; ++x) {
    z += pmf[static_cast<int>(x)] = q[x] * std::exp(o.tilt[x]);
    expected_accept += q[x] * std::exp(o.tilt[x] - cfg.clip_bound);
  }
  for (auto& [x, p] : pmf) p /= z;
  std::map<int, std::uint64_t> counts;
  for (int s : state) ++counts[s];

  MetricReport chi2 = discrete_chi2(counts, pmf);
  chi2.name = "chi2";
  add(rep, chi2);
  add(rep, metric("l1", l1_distance(counts, pmf), n));

  const double acc = static_cast<double>(n) / static_cast<double>(total_outer);
  add(rep, metric("acceptance_rate", acc, total_outer, std::sqrt(acc * (1.0 - acc) / static_cast<double>(total_outer))));

  const double bound = draw_tail_bound(cfg.clip_bound, o.delta);
  const auto exceed = std::count_if(draws.begin(), draws.end(), [&](std::uint64_t d) { return static_cast<double>(d) > bound; });
  add(rep, metric("tail_exceedance", static_cast<double>(exceed) / static_cast<double>(n), n, kNaN, o.delta));

  std::vector<double> p_vec, f_vec;
  for (std::size_t x = 0; x < k; ++x) {
    p_vec.push_back(pmf[static_cast<int>(x)]);
    f_vec.push_back(static_cast<double>(counts[static_cast<int>(x)]) / static_cast<double>(n));
  }
  rep.values["target_pmf"] = nums(p_vec);
  rep.values["empirical_pmf"] = nums(f_vec);
  rep.values["expected_acceptance_rate"] = num(expected_accept);
  rep.values["tail_bound"] = num(bound);
  rep.values["mean_draws"] = num(static_cast<double>(total_draws) / static_cast<double>(n));
  rep.values["max_draws"] = num(static_cast<double>(*std::max_element(draws.begin(), draws.end())));

  CsvTable t;
  t.header = {"state"};
  for (int s : state) t.add_numbers({static_cast<double>(s)});
  res.files[cfg.output.samples] = std::move(t);
  rep.files["samples"] = cfg.output.samples;
  return res;
}

// ---------------------------------------------------------------------------
// Targets shared by tilt and prox.

LogConcaveTarget make_target(const TargetSection& t) {
  if (t.name == "quadratic") return quadratic_target(t.dim, t.lambda);
  if (t.name == "logcosh-quadratic") return logcosh_quadratic_target(t.dim, t.lambda);
  return separable_target(t.dim, t.logcosh, t.quadratic, t.linear);
}

/// Conjugate Gaussian law when f is quadratic plus linear: b/2 x^2 + c x.
struct GaussianPart {
  bool exact = false;
  double b = 0.0;
  double c = 0.0;
};

GaussianPart gaussian_part(const TargetSection& t) {
  if (t.name == "quadratic") return {true, t.lambda, 0.0};
  if (t.name == "custom" && t.logcosh == 0.0) return {true, t.quadratic, t.linear};
  return {};
}

/// Resolves eta ("auto" = eta_max) and applies the strict-mode bound.
double resolve_eta(Context& ctx, const Auto& eta, const LogConcaveTarget& target, double delta, double c,
                   const std::string& field, double& eta_max_out) {
  eta_max_out = eta_max(target.holder, target.dim, delta, c);
  if (!eta) {
    if (!std::isfinite(eta_max_out))
      throw ConfigError(field, 0, 0, "auto needs a target with nonzero smoothness constant");
    return eta_max_out;
  }
  if (*eta > eta_max_out) {
    const std::string msg = "eta=" + brief(*eta) + " exceeds eta_max=" + brief(eta_max_out) +
                            " for this target (delta=" + brief(delta) + ", C=" + brief(c) + ")";
    if (ctx.opts.strict) throw ConfigError(field, 0, 0, msg + "; rejected in strict mode");
    ctx.report.warnings.push_back(field + ": " + msg);
  }
  return *eta;
}

/// Mean and second moment of coordinate 1 of a separable target by quadrature.
/// NaN when the law is improper.
std::pair<double, double> coordinate_truth(const LogConcaveTarget& target) {
  Vector e = Vector::Zero(static_cast<Eigen::Index>(target.dim));
  auto phi = [&](double x) {
    e[0] = x;
    return target.potential(e);
  };
  auto slope = [&](double x) {
    e[0] = x;
    return target.grad_f(e)[0];
  };
  double lo = -1.0, hi = 1.0;
  while (slope(lo) >= 0.0 && lo > -1e6) lo *= 2.0;
  while (slope(hi) <= 0.0 && hi < 1e6) hi *= 2.0;
  if (slope(lo) >= 0.0 || slope(hi) <= 0.0) return {kNaN, kNaN};
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) < 0.0 ? lo : hi) = mid;
  }
  const double mode = 0.5 * (lo + hi), f0 = phi(mode);
  double left = 1.0, right = 1.0;
  while (phi(mode - left) - f0 < 60.0) left *= 2.0;
  while (phi(mode + right) - f0 < 60.0) right *= 2.0;
  const double a = mode - left, b = mode + right;
  auto moment = [&](int p) {
    return integrate([&](double x) { return std::pow(x, p) * std::exp(f0 - phi(x)); }, a, b, 1e-13, 256);
  };
  const double z = moment(0);
  return {moment(1) / z, moment(2) / z};
}

// ---------------------------------------------------------------------------
// tilt: Gaussian-tilt sampler for exp(-f(x) - |x - x0|^2 / (2 eta)).

RunOutput run_tilt(Context& ctx) {
  const auto& cfg = ctx.cfg;
  RunReport& rep = ctx.report;
  const LogConcaveTarget target = make_target(cfg.target);
  const std::size_t d = target.dim;
  double emax = 0.0;
  const double eta = resolve_eta(ctx, cfg.tilt.eta, target, cfg.tilt.delta, cfg.tilt.c, "tilt.eta", emax);
  const Vector x0 = Eigen::Map<const Vector>(cfg.tilt.x0.data(), static_cast<Eigen::Index>(d));

  Vector x_plus;
  double prox_residual = 0.0;
  if (target.exact_prox) {
    x_plus = target.exact_prox(x0, eta);
  } else {
    const ProxResult pr = prox_solve(target, x0, eta, 1e-12, 100'000);
    if (!pr.converged) {
      const std::string msg = "prox solve did not converge (residual " + brief(pr.residual) + ")";
      if (ctx.opts.strict) throw DomainError(msg);
      rep.warnings.push_back(msg);
    }
    x_plus = pr.x_plus;
  }
  prox_residual = (x0 - eta * target.grad_f(x_plus) - x_plus).norm();
  const AnchorPolicy anchor = ctx.opts.strict ? AnchorPolicy::Strict : cfg.tilt.anchor;
  const TiltProblem problem{target.grad_f, x0, eta, x_plus, anchor};

  const std::size_t n = cfg.n_samples;
  std::vector<Vector> xs(n);
  std::vector<std::uint64_t> queries(n), draws(n), outer(n), clipped(n);
  std::atomic<std::uint64_t> anchor_failures{0};
  const ForsParams params = ctx.params();
  parallel_for(n, ctx.opts.workers, [&](std::size_t i) {
    Rng rng = ctx.rng(i);
    TiltOutcome out = sample_tilt(problem, params, rng);
    xs[i] = std::move(out.fors.point);
    queries[i] = out.gradient_queries;
    draws[i] = out.fors.estimator_draws;
    outer[i] = out.fors.outer_iterations;
    clipped[i] = out.fors.clipped_draws;
    if (!out.anchor_ok) ++anchor_failures;
    ++ctx.completed;
  });
  if (anchor_failures > 0) rep.warnings.push_back("anchor condition failed; x_plus is not an approximate prox point");

  auto total = [](const std::vector<std::uint64_t>& v) { return std::accumulate(v.begin(), v.end(), std::uint64_t{0}); };
  const std::uint64_t total_draws = total(draws), total_clipped = total(clipped);
  rep.counts = {{"samples", n},
                {"gradient_queries", total(queries)},
                {"estimator_draws", total_draws},
                {"outer_iterations", total(outer)},
                {"clipped_draws", total_clipped}};

  const MomentSummary m = moments(xs);
  const Vector var = m.cov.diagonal();
  rep.values["mean"] = nums(to_std(m.mean));
  rep.values["variance"] = nums(to_std(var));
  rep.values["eta"] = num(eta);
  rep.values["eta_max"] = num(emax);
  rep.values["prox_residual"] = num(prox_residual);
  rep.values["queries_per_sample"] = num(static_cast<double>(total(queries)) / static_cast<double>(n));
  add(rep, metric("clip_rate", total_draws ? static_cast<double>(total_clipped) / static_cast<double>(total_draws) : 0.0,
                  total_draws, kNaN, 0.01));

  const GaussianPart g = gaussian_part(cfg.target);
  if (g.exact) {
    // exp(-b/2 x^2 - c x - (x - x0)^2 / (2 eta)) = N((x0 - eta c) / (1 + eta b), eta / (1 + eta b)).
    const double v = eta / (1.0 + eta * g.b);
    const Vector mu = (x0.array() - eta * g.c).matrix() / (1.0 + eta * g.b);
    double mean_z = 0.0, var_z = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      mean_z = std::max(mean_z, std::abs(m.mean[ii] - mu[ii]) / m.mean_se[ii]);
      var_z = std::max(var_z, std::abs(var[ii] - v) / m.variance_se[ii]);
    }
    rep.values["target_mean"] = nums(to_std(mu));
    rep.values["target_variance"] = nums(std::vector<double>(d, v));
    add(rep, metric("mean_z", mean_z, n, kNaN, 4.0));
    add(rep, metric("variance_z", var_z, n, kNaN, 4.0));
  }
  if (d == 1) {
    const double xp = x_plus[0], f0 = target.potential(x_plus), r0 = (xp - x0[0]) * (xp - x0[0]);
    Vector e(1);
    const TabulatedCdf cdf(
        [&](double x) {
          e[0] = x;
          return std::exp(f0 - target.potential(e) + (r0 - (x - x0[0]) * (x - x0[0])) / (2.0 * eta));
        },
        xp - 12.0 * std::sqrt(eta), xp + 12.0 * std::sqrt(eta));
    MetricReport ks = ks_1d(column(xs, 0), cdf);
    add(rep, ks);
  }

  RunOutput res;
  res.files[cfg.output.samples] = coordinates(xs, d);
  rep.files["samples"] = cfg.output.samples;
  return res;
}

// ---------------------------------------------------------------------------
// Diffusion: schedule, scores and per-chain summaries.

GaussianMixture mixture(const DataSection& s) {
  GaussianMixture m;
  m.weights = s.weights;
  m.variances = s.variances;
  for (const auto& mu : s.means) m.means.push_back(Vector(Eigen::Map<const Vector>(mu.data(), static_cast<Eigen::Index>(mu.size()))));
  m.validate();
  return m;
}

struct DiffusionSetup {
  GaussianMixture data;
  std::size_t d = 0;
  double g = 0.0, l_delta = 0.0, d_star = 0.0, sigma1_sq = 0.0, bar_delta = 0.0;
  Schedule sched;
  GaussianMixture p1;  // law of X_1, the sampler's target
};

DiffusionSetup diffusion_setup(const ExperimentConfig& cfg, MethodKind schedule_method) {
  DiffusionSetup s;
  const auto& c = cfg.diffusion;
  s.data = mixture(cfg.data);
  s.d = s.data.dim();
  const double dd = static_cast<double>(s.d), h = static_cast<double>(s.data.components());
  s.l_delta = c.l_delta.value_or(std::max(1.0, std::log(dd * h / c.delta)));
  s.d_star = c.d_star.value_or(dd);
  s.g = c.g.value_or(g_for_method(schedule_method, s.d, c.delta, s.l_delta, s.d_star, c.c));
  const double floor = default_noise_floor(c.delta, s.d, s.data.second_moment());
  s.sigma1_sq = c.sigma1_sq.value_or(floor);
  s.bar_delta = c.bar_delta.value_or(floor);
  s.sched = build_vp_schedule(s.sigma1_sq, s.bar_delta, s.g, c.max_steps);
  s.p1 = marginal_of(s.data, s.sched.bar_alpha(1), s.sched.sigma_sq(1));
  return s;
}

void describe_setup(RunReport& rep, const DiffusionSetup& s) {
  const std::size_t t = s.sched.steps();
  rep.values["G"] = num(s.g);
  rep.values["T"] = num(static_cast<double>(t));
  rep.values["l_delta"] = num(s.l_delta);
  rep.values["d_star"] = num(s.d_star);
  rep.values["sigma1_sq"] = num(s.sigma1_sq);
  rep.values["bar_delta"] = num(s.bar_delta);
  rep.values["bar_alpha_T_sq"] = num(s.sched.bar_alpha(t) * s.sched.bar_alpha(t));
}

struct ChainStats {
  std::vector<Vector> x1;
  std::vector<std::uint64_t> queries, draws, outer, clipped;
  explicit ChainStats(std::size_t n) : x1(n), queries(n), draws(n), outer(n), clipped(n) {}
  std::uint64_t sum(const std::vector<std::uint64_t>& v) const {
    return std::accumulate(v.begin(), v.end(), std::uint64_t{0});
  }
};

/// "ddpm" runs the baseline sampler, anything else a FORS method.
ChainStats run_chains(Context& ctx, const std::string& method, const ScoreBank& bank, const DiffusionSetup& s) {
  const std::size_t n = ctx.cfg.n_samples;
  ChainStats st(n);
  const ForsParams params = ctx.params();
  const bool baseline = method == "ddpm";
  MethodKind kind = MethodKind::Simple;
  for (MethodKind k : {MethodKind::Simple, MethodKind::DdpmLike, MethodKind::Adaptive})
    if (method == to_string(k)) kind = k;
  parallel_for(n, ctx.opts.workers, [&](std::size_t i) {
    Rng rng = ctx.rng(i);
    ChainRun run = baseline ? sample_chain_ddpm(bank, s.sched, s.d, rng)
                            : sample_chain(kind, bank, s.sched, s.d, params, rng);
    st.x1[i] = std::move(run.x1);
    st.queries[i] = run.score_queries;
    st.draws[i] = run.estimator_draws;
    st.outer[i] = run.outer_iterations;
    st.clipped[i] = run.clipped_draws;
    ++ctx.completed;
  });
  return st;
}

struct Accuracy {
  double ks = 0.0;
  std::vector<double> ks_per_coordinate;
  Vector mean, variance, target_mean, target_variance;
  double mean_error = 0.0, mean_se = 0.0, variance_error = 0.0, variance_se = 0.0;
};

Accuracy accuracy(const std::vector<Vector>& xs, const GaussianMixture& p1) {
  Accuracy a;
  const std::size_t d = p1.dim();
  const MomentSummary m = moments(xs);
  a.mean = m.mean;
  a.variance = m.cov.diagonal();
  a.target_mean = Vector::Zero(static_cast<Eigen::Index>(d));
  a.target_variance = Vector::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t h = 0; h < p1.components(); ++h) {
    a.target_mean += p1.weights[h] * p1.means[h];
    a.target_variance += p1.weights[h] * (p1.means[h].array().square() + p1.variances[h]).matrix();
  }
  a.target_variance -= a.target_mean.cwiseProduct(a.target_mean);
  for (std::size_t i = 0; i < d; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double ks = ks_1d(column(xs, i), [&](double x) { return p1.coordinate_cdf(x, i); }).value;
    a.ks_per_coordinate.push_back(ks);
    a.ks = std::max(a.ks, ks);
    a.mean_error = std::max(a.mean_error, std::abs(a.mean[ii] - a.target_mean[ii]));
    a.mean_se = std::max(a.mean_se, m.mean_se[ii]);
    a.variance_error = std::max(a.variance_error, std::abs(a.variance[ii] - a.target_variance[ii]));
    a.variance_se = std::max(a.variance_se, m.variance_se[ii]);
  }
  return a;
}

ScoreBank score_bank(const DiffusionSetup& s, double eps, PerturbationMode mode) {
  ScoreBank bank = exact_score_bank(s.data, s.sched);
  return eps > 0.0 ? perturbed_score_bank(bank, eps, mode) : bank;
}

RunOutput run_diffuse(Context& ctx) {
  const auto& cfg = ctx.cfg;
  RunReport& rep = ctx.report;
  const DiffusionSetup s = diffusion_setup(cfg, cfg.diffusion.method);
  const ScoreBank bank = score_bank(s, cfg.score.eps, cfg.score.perturbation);
  const ChainStats st = run_chains(ctx, to_string(cfg.diffusion.method), bank, s);

  const std::size_t n = cfg.n_samples, t = s.sched.steps();
  rep.counts = {{"chains", n},
                {"T", t},
                {"score_queries", st.sum(st.queries)},
                {"estimator_draws", st.sum(st.draws)},
                {"outer_iterations", st.sum(st.outer)},
                {"clipped_draws", st.sum(st.clipped)}};
  describe_setup(rep, s);

  const Accuracy a = accuracy(st.x1, s.p1);
  MetricReport ks = metric("ks", a.ks, n, kNaN, ks_critical_95(n));
  add(rep, ks);
  add(rep, metric("mean_error", a.mean_error, n, a.mean_se));
  add(rep, metric("variance_error", a.variance_error, n, a.variance_se));
  add(rep, metric("mean_norm", a.mean.norm(), n));
  const std::uint64_t draws = st.sum(st.draws);
  add(rep, metric("clip_rate", draws ? static_cast<double>(st.sum(st.clipped)) / static_cast<double>(draws) : 0.0, draws,
                  kNaN, 0.01));
  rep.values["ks_per_coordinate"] = nums(a.ks_per_coordinate);
  rep.values["mean"] = nums(to_std(a.mean));
  rep.values["variance"] = nums(to_std(a.variance));
  rep.values["target_mean"] = nums(to_std(a.target_mean));
  rep.values["target_variance"] = nums(to_std(a.target_variance));
  const double td = static_cast<double>(t);
  rep.values["queries_per_T"] = num(static_cast<double>(st.sum(st.queries)) / static_cast<double>(n) / td);
  rep.values["max_queries_per_T"] = num(static_cast<double>(*std::max_element(st.queries.begin(), st.queries.end())) / td);
  // eps_t is exact for perturbations of exact scores; the smoothed sup eps_bar
  // is only available in closed form for a constant bias.
  rep.values["score_error"] = num(cfg.score.eps);
  rep.values["score_error_bar"] =
      num(cfg.score.eps == 0.0 || cfg.score.perturbation == PerturbationMode::ConstantBias ? cfg.score.eps : kNaN);

  RunOutput res;
  res.files[cfg.output.samples] = coordinates(st.x1, s.d);
  rep.files["samples"] = cfg.output.samples;
  return res;
}

std::string variant_file(const std::string& samples, const std::string& method, double eps) {
  const std::filesystem::path p(samples);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return p.stem().string() + "_" + method + "_eps" + buf + p.extension().string();
}

RunOutput run_bench(Context& ctx) {
  const auto& cfg = ctx.cfg;
  RunReport& rep = ctx.report;
  const DiffusionSetup s = diffusion_setup(cfg, cfg.bench.schedule_method);
  describe_setup(rep, s);
  const std::size_t n = cfg.n_samples, t = s.sched.steps();

  RunOutput res;
  CsvTable table;
  table.header = {"method", "eps", "T", "total_score_queries", "queries_per_chain", "ks", "ks_critical",
                  "mean_error", "variance_error"};
  std::uint64_t all_queries = 0;
  for (double eps : cfg.bench.eps) {
    const ScoreBank bank = score_bank(s, eps, cfg.score.perturbation);
    for (const std::string& method : cfg.bench.methods) {
      // Every variant reuses chain streams 0..n-1 (common random numbers).
      const ChainStats st = run_chains(ctx, method, bank, s);
      const Accuracy a = accuracy(st.x1, s.p1);
      const std::uint64_t q = st.sum(st.queries);
      all_queries += q;
      const double qpc = static_cast<double>(q) / static_cast<double>(n);
      const std::string file = variant_file(cfg.output.samples, method, eps);
      res.files[file] = coordinates(st.x1, s.d);
      rep.files["samples:" + method + ":" + brief(eps)] = file;
      rep.table.push_back({{"method", method},
                           {"eps", eps},
                           {"T", t},
                           {"total_score_queries", q},
                           {"queries_per_chain", num(qpc)},
                           {"ks", num(a.ks)},
                           {"ks_critical", num(ks_critical_95(n))},
                           {"mean_error", num(a.mean_error)},
                           {"variance_error", num(a.variance_error)},
                           {"samples", file}});
      table.rows.push_back({method, format_double(eps), std::to_string(t), std::to_string(q), format_double(qpc),
                            format_double(a.ks), format_double(ks_critical_95(n)), format_double(a.mean_error),
                            format_double(a.variance_error)});
      add(rep, metric("ks:" + method + ":" + brief(eps), a.ks, n, kNaN, ks_critical_95(n)));
    }
  }
  rep.counts = {{"chains_per_variant", n},
                {"variants", cfg.bench.eps.size() * cfg.bench.methods.size()},
                {"T", t},
                {"score_queries", all_queries}};
  const std::string table_file = "bench.csv";
  res.files[table_file] = std::move(table);
  rep.files["table"] = table_file;
  return res;
}

// ---------------------------------------------------------------------------
// prox: proximal sampler chains with FORS-implemented RGO.

RunOutput run_prox(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& p = cfg.prox;
  RunReport& rep = ctx.report;
  const LogConcaveTarget target = make_target(cfg.target);
  const std::size_t d = target.dim;
  double emax = 0.0;
  const double eta = resolve_eta(ctx, p.eta, target, p.delta, p.c, "prox.eta", emax);
  const Vector x_init = Eigen::Map<const Vector>(p.x_init.data(), static_cast<Eigen::Index>(d));

  ProximalOptions opts;
  opts.burn_in = p.burn_in;
  opts.thin = p.thin;
  opts.rgo.delta = p.delta;
  opts.rgo.c = p.c;
  opts.rgo.anchor = ctx.opts.strict ? AnchorPolicy::Strict : p.anchor;
  opts.rgo.prox_tol = p.prox_tol.value_or(0.0);
  opts.rgo.max_prox_iters = p.max_prox_iters;

  std::vector<ProximalChain> chains(p.n_chains);
  const ForsParams params = ctx.params();
  parallel_for(p.n_chains, ctx.opts.workers, [&](std::size_t c) {
    Rng rng = ctx.rng(c);
    chains[c] = proximal_sampler(target, eta, p.n_iterations, x_init, params, rng, opts);
    ++ctx.completed;
  });

  ProximalReport tot;
  std::vector<Vector> all;
  for (const auto& ch : chains) {
    const auto& r = ch.report;
    tot.iterations += r.iterations;
    tot.gradient_queries += r.gradient_queries;
    tot.prox_queries += r.prox_queries;
    tot.estimator_draws += r.estimator_draws;
    tot.outer_iterations += r.outer_iterations;
    tot.clipped_draws += r.clipped_draws;
    tot.anchor_warnings += r.anchor_warnings;
    tot.unconverged_prox += r.unconverged_prox;
    all.insert(all.end(), ch.samples.begin(), ch.samples.end());
  }
  rep.counts = {{"chains", p.n_chains},
                {"iterations", tot.iterations},
                {"samples", all.size()},
                {"gradient_queries", tot.gradient_queries},
                {"prox_queries", tot.prox_queries},
                {"estimator_draws", tot.estimator_draws},
                {"outer_iterations", tot.outer_iterations},
                {"clipped_draws", tot.clipped_draws},
                {"anchor_warnings", tot.anchor_warnings},
                {"unconverged_prox", tot.unconverged_prox}};
  if (tot.unconverged_prox > 0) {
    const std::string msg = std::to_string(tot.unconverged_prox) + " prox solves hit max_prox_iters";
    if (ctx.opts.strict) throw DomainError(msg + " (strict mode)");
    rep.warnings.push_back(msg);
  }
  if (tot.anchor_warnings > 0)
    rep.warnings.push_back(std::to_string(tot.anchor_warnings) + " RGO calls violated the anchor condition");

  // Per coordinate: batch means within each chain, pooled across chains.
  const auto [truth_mean, truth_m2] = coordinate_truth(target);
  const double k = static_cast<double>(p.n_chains);
  std::vector<double> mean(d), mean_se(d), m2(d), m2_se(d), variance(d);
  double mean_z = 0.0, m2_z = 0.0, mean_err = 0.0, var_err = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double s1 = 0.0, v1 = 0.0, s2 = 0.0, v2 = 0.0;
    for (const auto& ch : chains) {
      std::vector<double> xi = column(ch.samples, i), sq(xi.size());
      std::transform(xi.begin(), xi.end(), sq.begin(), [](double x) { return x * x; });
      const BatchMeans b1 = batch_means(xi), b2 = batch_means(sq);
      s1 += b1.mean;
      v1 += b1.standard_error * b1.standard_error;
      s2 += b2.mean;
      v2 += b2.standard_error * b2.standard_error;
    }
    mean[i] = s1 / k;
    mean_se[i] = std::sqrt(v1) / k;
    m2[i] = s2 / k;
    m2_se[i] = std::sqrt(v2) / k;
    std::vector<double> col = column(all, i);
    const double mu = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
    double ss = 0.0;
    for (double x : col) ss += (x - mu) * (x - mu);
    variance[i] = ss / static_cast<double>(col.size() - 1);
    mean_z = std::max(mean_z, std::abs(mean[i] - truth_mean) / mean_se[i]);
    m2_z = std::max(m2_z, std::abs(m2[i] - truth_m2) / m2_se[i]);
    mean_err = std::max(mean_err, std::abs(mu - truth_mean));
    var_err = std::max(var_err, std::abs(variance[i] - (truth_m2 - truth_mean * truth_mean)));
  }
  const std::size_t n = all.size();
  add(rep, metric("mean_z", mean_z, n));
  add(rep, metric("second_moment_z", m2_z, n));
  add(rep, metric("mean_error", mean_err, n));
  add(rep, metric("variance_error", var_err, n));
  add(rep, metric("clip_rate",
                  tot.estimator_draws ? static_cast<double>(tot.clipped_draws) / static_cast<double>(tot.estimator_draws) : 0.0,
                  tot.estimator_draws, kNaN, 0.01));
  rep.values["mean"] = nums(mean);
  rep.values["mean_se"] = nums(mean_se);
  rep.values["second_moment"] = nums(m2);
  rep.values["second_moment_se"] = nums(m2_se);
  rep.values["variance"] = nums(variance);
  rep.values["target_mean"] = num(truth_mean);
  rep.values["target_second_moment"] = num(truth_m2);
  rep.values["target_variance"] = num(truth_m2 - truth_mean * truth_mean);
  rep.values["eta"] = num(eta);
  rep.values["eta_max"] = num(emax);
  rep.values["queries_per_iteration"] =
      num(static_cast<double>(tot.gradient_queries) / static_cast<double>(tot.iterations));

  RunOutput res;
  res.files[cfg.output.samples] = coordinates(all, d);
  rep.files["samples"] = cfg.output.samples;
  return res;
}

}  // namespace

RunOutput run_experiment(const ExperimentConfig& cfg, const RunOptions& opts, RunReport* partial) {
  Context ctx{cfg, opts};
  ctx.report.experiment = to_string(cfg.experiment);
  ctx.report.seed = cfg.seed;
  ctx.report.config = config_to_json(cfg);
  try {
    RunOutput out;
    switch (cfg.experiment) {
      case ExperimentKind::ForsOracle: out = run_oracle(ctx); break;
      case ExperimentKind::Tilt: out = run_tilt(ctx); break;
      case ExperimentKind::Diffuse: out = run_diffuse(ctx); break;
      case ExperimentKind::Prox: out = run_prox(ctx); break;
      case ExperimentKind::Bench: out = run_bench(ctx); break;
    }
    out.report = std::move(ctx.report);
    return out;
  } catch (const std::exception& e) {
    if (partial) {
      *partial = ctx.report;
      partial->counts["completed_units"] = ctx.completed.load();
      if (const auto* b = dynamic_cast<const IterationBudgetExceeded*>(&e)) {
        partial->counts["failed_outer_iterations"] = b->outer_iterations;
        partial->counts["failed_estimator_draws"] = b->estimator_draws;
      }
    }
    throw;
  }
}

}  // namespace fors::harness
