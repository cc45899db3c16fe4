#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bosonmeter/cv_apps.hpp"
#include "bosonmeter/experiments.hpp"

using namespace bosonmeter;

namespace {

double norm_cdf(double t) { return 0.5 * (1.0 + std::erf(t / std::sqrt(2.0))); }
double norm_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); }

// E[x^e 1(|x| <= B)] for x ~ N(mu, sigma^2), e in {0, 1, 2}, via the standard
// truncated-normal identities.
double truncated_moment_1d(int e, double mu, double sigma, double bound) {
  const double a = (-bound - mu) / sigma, b = (bound - mu) / sigma;
  const double z0 = norm_cdf(b) - norm_cdf(a);
  const double z1 = norm_pdf(a) - norm_pdf(b);
  if (e == 0) return z0;
  if (e == 1) return mu * z0 + sigma * z1;
  const double z2 = z0 + a * norm_pdf(a) - b * norm_pdf(b);
  return mu * mu * z0 + 2.0 * mu * sigma * z1 + sigma * sigma * z2;
}

Observable single_px_term(int n, const std::vector<PXExp>& px, double coeff) {
  Observable o;
  o.basis = Basis::px;
  o.n = n;
  o.d = 0;
  Term t;
  t.px = px;
  t.coeff = coeff;
  o.terms.push_back(t);
  return o;
}

}  // namespace

TEST_CASE("truncated term moments match one-dimensional closed forms") {
  GaussianState s = vacuum_state(1);
  s.mean[0] = 0.4;
  s.cov(0, 0) = 1.7;
  ProjectionSpec spec;
  spec.bound = 2.0;
  const double sigma = std::sqrt(1.7);
  for (int e = 0; e <= 2; ++e) {
    Term t;
    t.px = {PXExp{e, 0}};
    const double want = e == 0 ? 1.0 : truncated_moment_1d(e, 0.4, sigma, 2.0);
    REQUIRE(truncated_term_moment(s, t, spec) == Catch::Approx(want).margin(1e-10));
  }
  // Momentum quadrature picks up the p marginal (mean 0, var 1 here).
  Term tp;
  tp.px = {PXExp{0, 2}};
  REQUIRE(truncated_term_moment(s, tp, spec) == Catch::Approx(truncated_moment_1d(2, 0.0, 1.0, 2.0)).margin(1e-10));
}

TEST_CASE("truncated term moments match a two-dimensional Simpson oracle") {
  GaussianState s = vacuum_state(2);
  s.mean[0] = 0.3;
  s.cov(0, 0) = 1.4;
  s.cov(2, 2) = 0.9;
  s.cov(0, 2) = s.cov(2, 0) = 0.5;
  ProjectionSpec spec;
  spec.bound = 1.8;

  Term t;
  t.px = {PXExp{1, 0}, PXExp{2, 0}};  // x1 x2^2

  // Simpson integration of the bivariate normal marginal over the box.
  const double det = 1.4 * 0.9 - 0.25;
  const int m = 400;
  const double h = 2.0 * spec.bound / m;
  double acc = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double x = -spec.bound + i * h;
    const double wi = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    for (int j = 0; j <= m; ++j) {
      const double y = -spec.bound + j * h;
      const double wj = (j == 0 || j == m) ? 1.0 : (j % 2 ? 4.0 : 2.0);
      const double dx = x - 0.3, dy = y;
      const double q = (0.9 * dx * dx - 2 * 0.5 * dx * dy + 1.4 * dy * dy) / det;
      acc += wi * wj * x * y * y * std::exp(-0.5 * q) / (2.0 * M_PI * std::sqrt(det));
    }
  }
  acc *= h * h / 9.0;
  REQUIRE(truncated_term_moment(s, t, spec) == Catch::Approx(acc).margin(1e-8));
}

TEST_CASE("truncated moments converge to the full Wick moments for wide boxes") {
  const GaussianState s = tmsv_state(0.45);
  ProjectionSpec wide;
  wide.bound = 40.0;
  Term t;
  t.px = {PXExp{1, 0}, PXExp{1, 0}};
  REQUIRE(truncated_term_moment(s, t, wide) == Catch::Approx(wick_moment(s, t.px)).margin(1e-10));
  Term t2;
  t2.px = {PXExp{2, 0}, PXExp{0, 2}};
  REQUIRE(truncated_term_moment(s, t2, wide) == Catch::Approx(wick_moment(s, t2.px)).margin(1e-9));

  Term heavy;
  heavy.px = {PXExp{1, 0}, PXExp{1, 0}, PXExp{1, 0}, PXExp{1, 0}};
  const GaussianState v4 = vacuum_state(4);
  REQUIRE_THROWS_AS(truncated_term_moment(v4, heavy, wide), std::invalid_argument);
}

TEST_CASE("projection bias shrinks as the box grows and brackets the target") {
  const GaussianState s = equal_squeezed_state(2, 0.5);
  Observable o = single_px_term(2, {PXExp{2, 0}, PXExp{0, 0}}, 0.7);
  Term extra;
  extra.px = {PXExp{0, 1}, PXExp{0, 1}};
  extra.coeff = -0.4;
  o.terms.push_back(extra);
  canonicalize(o);

  ProjectionSpec narrow, wider;
  narrow.bound = 1.5;
  wider.bound = 3.0;
  const double bias_narrow = projection_bias(s, o, narrow);
  const double bias_wide = projection_bias(s, o, wider);
  REQUIRE(bias_narrow > bias_wide);
  REQUIRE(bias_wide > 0.0);

  // Identity terms pass through projected_expectation unchanged.
  Observable with_id = o;
  Term id;
  id.px.assign(2, PXExp{0, 0});
  id.coeff = 2.0;
  with_id.terms.push_back(id);
  REQUIRE(projected_expectation(s, with_id, narrow) ==
          Catch::Approx(projected_expectation(s, o, narrow) + 2.0).margin(1e-12));
  // Bias bound: |exact - projected target| <= sum_j |a_j| * per-term bias.
  const double exact = expectation(s, o);
  const double proj = projected_expectation(s, o, wider);
  double cap = 0.0;
  for (const auto& t : o.terms)
    cap += std::abs(t.coeff) * std::abs(wick_moment(s, t.px) - truncated_term_moment(s, t, wider));
  REQUIRE(std::abs(exact - proj) <= cap + 1e-12);
}

TEST_CASE("sample budget follows the Chebyshev sizing rule") {
  const Observable o = single_px_term(1, {PXExp{1, 0}}, 1.0);
  ProjectionSpec spec;
  spec.bound = 3.0;
  const SampleBudget b = sample_budget(o, spec, 0.1, 0.1);
  REQUIRE(b.variance_cap == Catch::Approx(27.0));  // 3^1 * 1 * 3^2
  REQUIRE(b.shots == 27000);

  ProjectionSpec off;
  REQUIRE_THROWS_AS(sample_budget(o, off, 0.1, 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(sample_budget(o, spec, 0.0, 0.1), std::invalid_argument);
  Observable g;
  g.basis = Basis::ggb;
  g.n = 1;
  g.d = 3;
  REQUIRE_THROWS_AS(sample_budget(g, spec, 0.1, 0.1), std::invalid_argument);

  // Coverage check: at the budget, the estimate hits the projected target
  // within epsilon_o at well over the promised rate. Scaled-down instance.
  const GaussianState state = vacuum_state(1);
  const SampleBudget small = sample_budget(o, spec, 0.5, 0.2);
  const MeasurementScheme scheme = make_scheme(o, SchemeKind::cs_uniform);
  const double target = projected_expectation(state, o, spec);
  int misses = 0;
  const int trials = 60;
  for (int trial = 0; trial < trials; ++trial) {
    EstimateOptions opts;
    opts.shots = small.shots;
    opts.repetitions = 1;
    opts.seed = 9000 + trial;
    opts.projection = spec;
    QuadratureSampler sampler(state);
    const EstimationReport rep = estimate(o, scheme, sampler, opts);
    if (std::abs(rep.mean - target) > small.epsilon_o) ++misses;
  }
  REQUIRE(misses <= static_cast<int>(small.delta * trials));  // Chebyshev is loose
}

TEST_CASE("truncated noise moments match their limits and a numeric oracle") {
  namespace bd = bosonmeter::detail;
  // Wide bound: plain Gaussian moments sigma^2 and 3 sigma^4.
  REQUIRE(bd::truncated_noise_moment(2, 0.5, 10.0) == Catch::Approx(0.25).margin(1e-12));
  REQUIRE(bd::truncated_noise_moment(4, 0.5, 10.0) == Catch::Approx(3 * 0.0625).margin(1e-12));
  REQUIRE(bd::truncated_noise_moment(1, 0.5, 1.0) == 0.0);
  REQUIRE(bd::truncated_noise_moment(0, 0.5, 1.0) == 1.0);

  // Moderate bound: Simpson over the renormalized truncated density.
  const double sigma = 0.8, bound = 1.0;
  for (int r : {2, 4}) {
    const int m = 2000;
    const double h = 2.0 * bound / m;
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= m; ++i) {
      const double x = -bound + i * h;
      const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const double dens = std::exp(-0.5 * x * x / (sigma * sigma));
      num += w * std::pow(x, r) * dens;
      den += w * dens;
    }
    REQUIRE(bd::truncated_noise_moment(r, sigma, bound) == Catch::Approx(num / den).margin(1e-9));
  }

  // Empirical: sampler variance matches the analytic truncated variance.
  Rng rng(777);
  double acc = 0.0;
  const int draws = 200000;
  for (int t = 0; t < draws; ++t) {
    const double e = rng.truncated_normal(sigma, bound);
    acc += e * e;
  }
  NoiseModel noise;
  noise.sigma = sigma;
  noise.bound = bound;
  REQUIRE(acc / draws == Catch::Approx(noise_outcome_variance(noise)).epsilon(0.02));
}

TEST_CASE("noise extra variance: closed form, hand check, and empirical total") {
  // Hand check: O = x1 on vacuum under the uniform scheme. f = 2, g = 2,
  // exponent factors 1, residual moment E[x^0] = 1, so V_e = 2 var_e.
  const Observable o1 = single_px_term(1, {PXExp{1, 0}}, 1.0);
  const GaussianState vac = vacuum_state(1);
  const MeasurementScheme s1 = make_scheme(o1, SchemeKind::cs_uniform);
  NoiseModel noise;
  noise.sigma = 0.4;
  const double var_e = noise_outcome_variance(noise);
  REQUIRE(noise_extra_variance(o1, s1, vac, noise) == Catch::Approx(2.0 * var_e).margin(1e-12));

  // Multilinear two-mode instance: empirical single-shot variance of the
  // noisy estimator should match V_o + V_e.
  Rng gen(404);
  const Observable o = random_px_observable(2, 3, 2, 2, gen, true);
  const GaussianState state = tmsv_state(0.3);
  const MeasurementScheme scheme = make_scheme(o, SchemeKind::cs_uniform);
  const double vo = exact_variance_px(o, scheme, state);
  const double ve = noise_extra_variance(o, scheme, state, noise);
  REQUIRE(ve > 0.0);

  EstimateOptions opts;
  opts.shots = 40000;
  opts.repetitions = 8;
  opts.seed = 2024;
  opts.noise = noise;
  QuadratureSampler sampler(state);
  const EstimationReport rep = estimate(o, scheme, sampler, opts);
  REQUIRE(expectation(state, o) ==
          Catch::Approx(rep.mean).margin(5.0 * std::sqrt((vo + ve) / (8.0 * 40000))));
  // Sample variance of the variance ~ sqrt(2/N) relative; allow 4 sigma plus
  // the O(sigma^4) remainder.
  REQUIRE(rep.shot_variance == Catch::Approx(vo + ve).epsilon(0.08));

  // Closed-form cap dominates the noise part.
  const double bound_b = 4.0;
  REQUIRE(ve <= noise_variance_bound(o, bound_b, noise.effective_bound()) + 1e-12);
}

TEST_CASE("separable two-setting estimator is unbiased with capped variance") {
  // O = p^2/2 + x^2/2 on vacuum: mean 1 (harmonic energy in these units).
  const int n = 1;
  SeparableSpec spec;
  spec.u = single_px_term(n, {PXExp{0, 2}}, 0.5);
  spec.v = single_px_term(n, {PXExp{2, 0}}, 0.5);
  spec.box_bound = 4.0;
  spec.norm_u = box_sup_norm(spec.u, spec.box_bound);
  spec.norm_v = box_sup_norm(spec.v, spec.box_bound);
  REQUIRE(spec.norm_u == Catch::Approx(8.0));
  REQUIRE(separable_variance_bound(spec) == Catch::Approx(256.0));

  const GaussianState vac = vacuum_state(n);
  const EstimationReport rep = separable_estimate(spec, vac, 40000, 10, 31);
  const double se = rep.std_across_reps / std::sqrt(10.0);
  // Box rejection bias at B=4 is ~1e-3; stay within 5 SE plus that allowance.
  REQUIRE(std::abs(rep.mean - 1.0) <= 5.0 * se + 5e-3);
  REQUIRE(rep.shot_variance <= separable_variance_bound(spec));

  SeparableSpec bad = spec;
  bad.u = single_px_term(n, {PXExp{1, 1}}, 0.5);
  REQUIRE_THROWS_AS(separable_estimate(bad, vac, 10, 1, 1), std::invalid_argument);
  SeparableSpec swapped = spec;
  std::swap(swapped.u, swapped.v);
  REQUIRE_THROWS_AS(separable_estimate(swapped, vac, 10, 1, 1), std::invalid_argument);
}

TEST_CASE("purity estimation: exact symbol is unbiased, truncation bias is reported") {
  const GaussianState vac = vacuum_state(1);

  PurityOptions exact_opt;
  exact_opt.exact_symbol = true;
  exact_opt.shots = 20000;
  exact_opt.repetitions = 8;
  exact_opt.seed = 5;
  const PurityReport pe = estimate_purity(vac, vac, exact_opt);
  REQUIRE(pe.overlap_exact == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(pe.ref_purity == Catch::Approx(1.0).margin(1e-12));
  const double se = pe.overlap_std / std::sqrt(8.0);
  REQUIRE(std::abs(pe.overlap_mean - 1.0) <= 5.0 * se);
  REQUIRE(pe.purity_from_exact == Catch::Approx(1.0).margin(1e-12));

  // Degree-4 truncation on vacuum/vacuum converges to 2 (documented bias of
  // the truncated polynomial), and the sampler agrees with that target.
  PurityOptions trunc_opt = exact_opt;
  trunc_opt.exact_symbol = false;
  trunc_opt.degree = 4;
  const PurityReport pt = estimate_purity(vac, vac, trunc_opt);
  REQUIRE(pt.overlap_truncated == Catch::Approx(2.0).margin(1e-12));
  const double se_t = pt.overlap_std / std::sqrt(8.0);
  REQUIRE(std::abs(pt.overlap_mean - 2.0) <= 5.0 * se_t);

  // Degree 0 keeps only the prefactor.
  PurityOptions d0 = trunc_opt;
  d0.degree = 0;
  d0.shots = 10;
  REQUIRE(estimate_purity(vac, vac, d0).overlap_truncated == Catch::Approx(2.0).margin(1e-12));
  PurityOptions badopt = trunc_opt;
  badopt.degree = 3;
  REQUIRE_THROWS_AS(estimate_purity(vac, vac, badopt), std::invalid_argument);

  // Mixed state: thermal-like cov 2I has purity 1/2; with itself as the
  // reference the plug-in formula returns its purity exactly.
  GaussianState th = vacuum_state(1);
  th.cov *= 2.0;
  PurityOptions self = exact_opt;
  const PurityReport ps = estimate_purity(th, th, self);
  REQUIRE(ps.overlap_exact == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(ps.purity_from_exact == Catch::Approx(0.5).margin(1e-12));
  const double se_s = ps.overlap_std / std::sqrt(8.0);
  REQUIRE(std::abs(ps.purity - 0.5) <= 5.0 * se_s + 1e-3);

  // Two-mode displaced case against the closed-form overlap.
  GaussianState ref2 = tmsv_state(0.4);
  GaussianState st2 = tmsv_state(0.4);
  st2.mean[0] = 0.6;
  PurityOptions two = exact_opt;
  two.shots = 30000;
  const PurityReport p2 = estimate_purity(ref2, st2, two);
  const double se2 = p2.overlap_std / std::sqrt(8.0);
  REQUIRE(std::abs(p2.overlap_mean - p2.overlap_exact) <= 5.0 * se2);
  REQUIRE(p2.overlap_exact == Catch::Approx(gaussian_overlap(ref2, st2)).margin(1e-12));
}

TEST_CASE("shift moment recovery returns the injected mean and variance") {
  const GaussianState ref = vacuum_state(1);

  GaussianState fixed = ref;
  apply_shift_channel(fixed, 0, 1.5, 0.0);
  const ShiftReport a = estimate_shift_moments(ref, fixed, 0, 2, 400000, 11);
  REQUIRE(std::abs(a.mean_shift - 1.5) < 0.02);
  REQUIRE(std::abs(a.var_shift) < 0.05);

  GaussianState spread = ref;
  apply_shift_channel(spread, 0, 0.5, 0.7);
  const ShiftReport b = estimate_shift_moments(ref, spread, 0, 4, 400000, 12);
  REQUIRE(std::abs(b.mean_shift - 0.5) < 0.02);
  REQUIRE(std::abs(b.var_shift - 0.49) < 0.05);
  // Gaussian shift: E[a^3] = mu^3 + 3 mu s^2, E[a^4] = mu^4 + 6 mu^2 s^2 + 3 s^4.
  const double mu = 0.5, s2 = 0.49;
  REQUIRE(b.shift_moments[3] == Catch::Approx(mu * mu * mu + 3 * mu * s2).margin(0.15));
  REQUIRE(b.shift_moments[4] == Catch::Approx(mu * mu * mu * mu + 6 * mu * mu * s2 + 3 * s2 * s2).margin(0.4));

  REQUIRE_THROWS_AS(estimate_shift_moments(ref, fixed, 1, 2, 10, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(estimate_shift_moments(ref, fixed, 0, 5, 10, 1), std::invalid_argument);
}

TEST_CASE("mixed-register bounds evaluate their closed forms") {
  REQUIRE(mixed_variance_bound(1, 1, 3, 2.0, 1.0) == Catch::Approx(44.0));
  REQUIRE(mixed_variance_bound(2, 1, 2, 1.0, 2.0) == Catch::Approx(6.0 * 6.0 * 4.0 * 2.0));
  REQUIRE(mixed_variance_bound_split(1, 1, 3, 1.0, 2.0, 1.0) == Catch::Approx(27.0 + 12.0));
  REQUIRE_THROWS_AS(mixed_variance_bound(1, 1, 1, 2.0, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(mixed_variance_bound_split(1, 1, 3, 1.0, 0.0, 1.0), std::invalid_argument);
}
