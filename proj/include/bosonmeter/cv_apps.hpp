#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "bosonmeter/gaussian.hpp"
#include "bosonmeter/qudit_state.hpp"
#include "bosonmeter/scheme.hpp"

namespace bosonmeter {

inline double exact_variance_px(const Observable& o, const MeasurementScheme& s, const GaussianState& state) {
  return exact_variance(
      o, s, [&](const Term& a, const Term& b) { return pair_wick_moment(state, a, b); },
      expectation(state, o));
}

inline double exact_variance_qudit(const Observable& o, const MeasurementScheme& s, const QuditState& state) {
  return exact_variance(
      o, s, [&](const Term& a, const Term& b) { return pair_term_expectation(state, o, a, b); },
      exact_expectation(state, o));
}

// ---------------------------------------------------------------------------
// Truncated Gaussian moments (detector-range bias oracle)

namespace detail {

struct GaussNodes {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

// Gauss-Legendre nodes by Newton iteration on the Legendre polynomial.
inline const GaussNodes& gauss_legendre(int m) {
  static std::map<int, GaussNodes> cache;
  auto it = cache.find(m);
  if (it != cache.end()) return it->second;
  GaussNodes g;
  g.x.resize(m);
  g.w.resize(m);
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= m; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    g.x[i] = -x;
    g.x[m - 1 - i] = x;
    g.w[i] = g.w[m - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(m, std::move(g)).first->second;
}

}  // namespace detail

// E[prod_i q_i^{e_i} * 1(|q_i| <= B_i)] over the Gaussian marginal of the
// term's quadratures, by tensor-grid Gauss-Legendre quadrature. Supports
// string weight <= 3 (the quadrature grid grows exponentially).
inline double truncated_term_moment(const GaussianState& state, const Term& t, const ProjectionSpec& spec) {
  std::vector<int> modes, exps, quads;
  for (int i = 0; i < static_cast<int>(t.px.size()); ++i) {
    const int e = t.px[i].l + t.px[i].m;
    if (e == 0) continue;
    modes.push_back(i);
    exps.push_back(e);
    quads.push_back(quad_index(i, t.px[i].m > 0));
  }
  const int w = static_cast<int>(modes.size());
  if (w == 0) return 1.0;
  if (w > 3) throw std::invalid_argument("truncated_term_moment: weight > 3 unsupported");

  VectorXd mean(w);
  MatrixXd cov(w, w);
  for (int i = 0; i < w; ++i) {
    mean[i] = state.mean[quads[i]];
    for (int j = 0; j < w; ++j) cov(i, j) = state.cov(quads[i], quads[j]);
  }
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw std::runtime_error("truncated_term_moment: singular marginal");
  double logdet = 0.0;
  for (int i = 0; i < w; ++i) logdet += std::log(llt.matrixL()(i, i));
  const double lognorm = -0.5 * w * std::log(2.0 * M_PI) - logdet;

  // Clip each axis to the 10-sigma support: mass outside is below double
  // precision and Gauss-Legendre accuracy collapses when most nodes land in
  // the flat tail of a box much wider than the distribution.
  std::vector<double> lo(w), hi(w);
  for (int i = 0; i < w; ++i) {
    const double b = spec.mode_bound(modes[i]);
    const double sd = std::sqrt(cov(i, i));
    lo[i] = std::max(-b, mean[i] - 10.0 * sd);
    hi[i] = std::min(b, mean[i] + 10.0 * sd);
    if (lo[i] >= hi[i]) return 0.0;
  }

  const int m = w <= 2 ? 96 : 48;
  const detail::GaussNodes& g = detail::gauss_legendre(m);
  std::vector<int> idx(w, 0);
  VectorXd z(w);
  double acc = 0.0;
  for (;;) {
    double wt = 1.0;
    double poly = 1.0;
    for (int i = 0; i < w; ++i) {
      const double mid = 0.5 * (hi[i] + lo[i]), half = 0.5 * (hi[i] - lo[i]);
      const double v = mid + half * g.x[idx[i]];
      z[i] = v;
      wt *= half * g.w[idx[i]];
      double pw = 1.0;
      for (int e = 0; e < exps[i]; ++e) pw *= v;
      poly *= pw;
    }
    const VectorXd dlt = z - mean;
    const double quad = dlt.dot(llt.solve(dlt));
    acc += wt * poly * std::exp(lognorm - 0.5 * quad);
    int pos = w - 1;
    while (pos >= 0 && ++idx[pos] == m) idx[pos--] = 0;
    if (pos < 0) break;
  }
  return acc;
}

// Largest per-term projection bias |E[mu] - E[mu within range]| over the
// non-identity terms: the epsilon_B of the coverage guarantee.
inline double projection_bias(const GaussianState& state, const Observable& o, const ProjectionSpec& spec) {
  double worst = 0.0;
  for (const auto& t : o.terms) {
    if (term_degree(t) == 0) continue;
    const double full = wick_moment(state, t.px);
    const double trunc = truncated_term_moment(state, t, spec);
    worst = std::max(worst, std::abs(full - trunc));
  }
  return worst;
}

// Expectation the projected estimator actually targets: identity constants
// plus per-term range-truncated moments.
inline double projected_expectation(const GaussianState& state, const Observable& o, const ProjectionSpec& spec) {
  double acc = 0.0;
  for (const auto& t : o.terms)
    acc += t.coeff * (term_degree(t) == 0 ? 1.0 : truncated_term_moment(state, t, spec));
  return acc;
}

// ---------------------------------------------------------------------------
// Sample budget (uniform px scheme with detector range B)

struct SampleBudget {
  double epsilon_o = 0.0;
  double delta = 0.0;
  double variance_cap = 0.0;  // 3^k sum_j a_j^2 prod_i B_i^{2 e_ij}
  long long shots = 0;
};

// Number of shots after which |estimate - projected target| <= epsilon_o with
// probability >= 1 - delta (Chebyshev on the variance cap). Identity terms
// carry no variance and are excluded from the cap.
inline SampleBudget sample_budget(const Observable& o, const ProjectionSpec& spec, double epsilon_o, double delta) {
  if (o.basis != Basis::px) throw std::invalid_argument("sample_budget: px observables only");
  if (epsilon_o <= 0.0 || delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("sample_budget: bad (epsilon, delta)");
  if (!spec.enabled()) throw std::invalid_argument("sample_budget: projection bound required");
  SampleBudget b;
  b.epsilon_o = epsilon_o;
  b.delta = delta;
  b.variance_cap = px_cs_variance_bound_per_term(o, spec);
  b.shots = static_cast<long long>(std::ceil(b.variance_cap / (epsilon_o * epsilon_o * delta)));
  return b;
}

// ---------------------------------------------------------------------------
// Measurement noise (zero-mean truncated Gaussian per measured mode)

namespace detail {

// Even moments E[e^r] of a zero-mean Gaussian truncated to [-bound, bound].
inline double truncated_noise_moment(int r, double sigma, double bound) {
  if (r % 2 == 1) return 0.0;
  if (r == 0) return 1.0;
  if (sigma <= 0.0) return 0.0;
  const double beta = bound / sigma;
  const double z = std::erf(beta / std::sqrt(2.0));
  const double phi = std::exp(-0.5 * beta * beta) / std::sqrt(2.0 * M_PI);
  double prev = 1.0;  // m_0
  double cur = 0.0;
  double bpow = bound;  // B^{r-1} built incrementally
  for (int k = 2; k <= r; k += 2) {
    cur = sigma * sigma * (k - 1) * prev - 2.0 * sigma * bpow * phi / z;
    prev = cur;
    bpow *= bound * bound;
  }
  return cur;
}

}  // namespace detail

// Noise variance of the truncated-Gaussian error actually injected.
inline double noise_outcome_variance(const NoiseModel& noise) {
  if (!noise.enabled()) return 0.0;
  return detail::truncated_noise_moment(2, noise.sigma, noise.effective_bound());
}

// Extra estimator variance from detector noise, to second order in the noise:
// V_e = sum_{pq} a_p a_q g(Q_p, Q_q) sum_{i in common supp}
//       e_i^(p) e_i^(q) tr(rho Q_p Q_q / P_i^2) Var(e_i).
// The exponent factors come from d/dP_i of each monomial; for multilinear
// strings they are 1 and the expression is exact to O(sigma^4).
inline double noise_extra_variance(const Observable& o, const MeasurementScheme& s,
                                   const GaussianState& state, const NoiseModel& noise) {
  if (!noise.enabled()) return 0.0;
  const double var_e = noise_outcome_variance(noise);
  const int m = static_cast<int>(o.terms.size());
  double acc = 0.0;
  for (int p = 0; p < m; ++p) {
    for (int q = p; q < m; ++q) {
      if (o.terms[p].coeff == 0.0 || o.terms[q].coeff == 0.0) continue;
      const double g = g_factor(s, o, p, q);
      if (g == 0.0) continue;
      const Term& tp = o.terms[p];
      const Term& tq = o.terms[q];
      double inner = 0.0;
      for (int i = 0; i < o.n; ++i) {
        const int ep = tp.px[i].l + tp.px[i].m;
        const int eq = tq.px[i].l + tq.px[i].m;
        if (ep == 0 || eq == 0) continue;
        std::vector<int> exps(2 * o.n, 0);
        for (int j = 0; j < o.n; ++j) {
          exps[2 * j] = tp.px[j].l + tq.px[j].l;
          exps[2 * j + 1] = tp.px[j].m + tq.px[j].m;
        }
        const int qi = quad_index(i, tp.px[i].m > 0);
        exps[qi] -= 2;
        inner += ep * eq * gaussian_moment(state, exps);
      }
      if (inner == 0.0) continue;
      acc += (p == q ? 1.0 : 2.0) * o.terms[p].coeff * o.terms[q].coeff * g * inner * var_e;
    }
  }
  return acc;
}

// n B^{2k-2} B_e^2 sum a^2: the closed-form cap on the noise-induced variance.
inline double noise_variance_bound(const Observable& o, double bound_b, double bound_e) {
  const int k = locality(o);
  double sq = 0.0;
  for (const auto& t : o.terms)
    if (term_degree(t) > 0) sq += t.coeff * t.coeff;
  return o.n * std::pow(bound_b, 2 * k - 2) * bound_e * bound_e * sq;
}

// ---------------------------------------------------------------------------
// Separable observables: U(p) + V(x) measured with two settings

struct SeparableSpec {
  Observable u;        // px observable with only p exponents (plus constants)
  Observable v;        // px observable with only x exponents (plus constants)
  double norm_u = 0.0; // clipped sup bound of |U| over the detection box
  double norm_v = 0.0;
  double box_bound = 0.0;  // detection range; outcomes beyond it void the shot's polynomial
};

// Triangle-inequality sup bound over the box [-B, B]^n: sum |a_j| B^{deg_j}.
// Exact for single-term polynomials, an upper bound otherwise.
inline double box_sup_norm(const Observable& o, double bound) {
  double acc = 0.0;
  for (const auto& t : o.terms) acc += std::abs(t.coeff) * std::pow(bound, term_degree(t));
  return acc;
}

namespace detail {

inline double eval_px_polynomial(const Observable& o, const std::vector<double>& outcomes) {
  double acc = 0.0;
  for (const auto& t : o.terms) {
    double mu = 1.0;
    for (int i = 0; i < o.n; ++i) {
      const int e = t.px[i].l + t.px[i].m;
      for (int r = 0; r < e; ++r) mu *= outcomes[i];
    }
    acc += t.coeff * mu;
  }
  return acc;
}

}  // namespace detail

// Two-setting scheme for O = U(p) + V(x): measure all momenta with
// probability lambda = |U| / (|U| + |V|), else all positions, and weight the
// evaluated polynomial by the inverse probability. Outcomes outside the box
// zero the shot's polynomial and the evaluation is clamped to +-norm, which
// caps the variance at (|U| + |V|)^2.
inline EstimationReport separable_estimate(const SeparableSpec& spec, const GaussianState& state,
                                           long long shots, int repetitions, std::uint64_t seed) {
  if (spec.u.n != state.n || spec.v.n != state.n) throw std::invalid_argument("separable_estimate: mode count mismatch");
  if (spec.norm_u < 0.0 || spec.norm_v < 0.0 || spec.norm_u + spec.norm_v <= 0.0)
    throw std::invalid_argument("separable_estimate: sup bounds required");
  validate(spec.u);
  validate(spec.v);
  for (const auto& t : spec.u.terms)
    for (const auto& e : t.px)
      if (e.l > 0) throw std::invalid_argument("separable_estimate: U must contain momentum powers only");
  for (const auto& t : spec.v.terms)
    for (const auto& e : t.px)
      if (e.m > 0) throw std::invalid_argument("separable_estimate: V must contain position powers only");

  const double lambda = spec.norm_u / (spec.norm_u + spec.norm_v);
  const std::vector<int> labels_p(state.n, 2), labels_x(state.n, 1);
  QuadratureSampler sampler(state);
  Rng base(seed);

  EstimationReport report;
  report.repetitions = repetitions;
  report.shots_per_rep = shots;
  report.rep_means.resize(repetitions);
  std::vector<double> outcomes;
  double grand = 0.0;
  double pooled = 0.0;
  for (int r = 0; r < repetitions; ++r) {
    Rng rng = base.derive(static_cast<std::uint64_t>(r));
    double sum = 0.0, sumsq = 0.0;
    for (long long shot = 0; shot < shots; ++shot) {
      const bool momenta = rng.uniform01() < lambda;
      sampler.sample(momenta ? labels_p : labels_x, rng, outcomes);
      bool in_box = true;
      if (spec.box_bound > 0.0)
        for (double v : outcomes)
          if (std::abs(v) > spec.box_bound) {
            in_box = false;
            break;
          }
      double value = 0.0;
      if (in_box) {
        if (momenta) {
          value = detail::eval_px_polynomial(spec.u, outcomes);
          value = std::clamp(value, -spec.norm_u, spec.norm_u) / lambda;
        } else {
          value = detail::eval_px_polynomial(spec.v, outcomes);
          value = std::clamp(value, -spec.norm_v, spec.norm_v) / (1.0 - lambda);
        }
      }
      sum += value;
      sumsq += value * value;
    }
    report.rep_means[r] = sum / static_cast<double>(shots);
    grand += report.rep_means[r];
    if (shots > 1) pooled += (sumsq - sum * sum / static_cast<double>(shots)) / static_cast<double>(shots - 1);
  }
  report.mean = grand / repetitions;
  if (repetitions > 1) {
    double ss = 0.0;
    for (double v : report.rep_means) ss += (v - report.mean) * (v - report.mean);
    report.std_across_reps = std::sqrt(ss / (repetitions - 1));
  }
  report.shot_variance = pooled / repetitions;
  return report;
}

inline double separable_variance_bound(const SeparableSpec& spec) {
  return (spec.norm_u + spec.norm_v) * (spec.norm_u + spec.norm_v);
}

// ---------------------------------------------------------------------------
// Purity via a reference state: tr(rho^2) ~ [tr(rho0 rho)]^2 / tr(rho0^2)

struct PurityOptions {
  int degree = 4;            // truncation degree of the reference-operator polynomial (0, 2, or 4)
  bool exact_symbol = false; // evaluate the full Gaussian symbol instead (unbiased)
  long long shots = 100000;
  int repetitions = 1;
  std::uint64_t seed = 1;
};

struct PurityReport {
  double overlap_mean = 0.0;       // sampled tr(rho0 rho)
  double overlap_std = 0.0;        // std of the repetition means
  double purity = 0.0;             // plug-in [overlap_mean]^2 / tr(rho0^2)
  double ref_purity = 0.0;         // tr(rho0^2) = 1/sqrt(det V0)
  double overlap_exact = 0.0;      // closed-form tr(rho0 rho) (oracle)
  double overlap_truncated = 0.0;  // expectation the truncated polynomial converges to
  double purity_from_exact = 0.0;  // plug-in formula fed with the closed-form overlap
  std::vector<double> rep_means;
};

// Estimates tr(rho0 rho) by sampling phase-space points from rho's Wigner
// distribution (a joint sample of all 2n quadratures; a simulation-side
// stand-in for the per-term string measurements, which share the same
// expectations) and evaluating the reference state's Gaussian phase-space
// symbol 2^n exp(-(xi-mu0)' V0^-1 (xi-mu0) / 2) / sqrt(det V0), either in
// full (unbiased) or Taylor-truncated at `degree` (degree 4 keeps the
// through-order-4 polynomial; its bias is reported via overlap_truncated).
inline PurityReport estimate_purity(const GaussianState& reference, const GaussianState& state,
                                    const PurityOptions& opt) {
  if (reference.n != state.n) throw std::invalid_argument("estimate_purity: mode count mismatch");
  if (!opt.exact_symbol && opt.degree != 0 && opt.degree != 2 && opt.degree != 4)
    throw std::invalid_argument("estimate_purity: truncation degree must be 0, 2, or 4");
  const int n2 = 2 * state.n;

  Eigen::LLT<MatrixXd> ref_llt(reference.cov);
  if (ref_llt.info() != Eigen::Success) throw std::runtime_error("estimate_purity: reference covariance not positive definite");
  double ref_logdet = 0.0;
  for (int i = 0; i < n2; ++i) ref_logdet += std::log(ref_llt.matrixL()(i, i));
  const double prefactor = std::exp(state.n * std::log(2.0) - ref_logdet);

  PurityReport report;
  report.ref_purity = gaussian_purity(reference);
  report.overlap_exact = gaussian_overlap(reference, state);
  report.purity_from_exact = report.overlap_exact * report.overlap_exact / report.ref_purity;

  // Moments of q = (xi-mu0)' V0^-1 (xi-mu0) for xi ~ N(mu, V): the truncated
  // polynomial's exact expectation.
  const MatrixXd a = reference.cov.llt().solve(MatrixXd::Identity(n2, n2));
  const VectorXd dm = state.mean - reference.mean;
  const MatrixXd av = a * state.cov;
  const double eq1 = av.trace() + dm.dot(a * dm);
  const double eq2 = eq1 * eq1 + 2.0 * (av * av).trace() + 4.0 * dm.dot(a * state.cov * a * dm);
  if (opt.exact_symbol) {
    report.overlap_truncated = report.overlap_exact;
  } else {
    double taylor = 1.0;
    if (opt.degree >= 2) taylor += -0.5 * eq1;
    if (opt.degree >= 4) taylor += 0.125 * eq2;
    report.overlap_truncated = prefactor * taylor;
  }

  const MatrixXd chol = cholesky_with_jitter(state.cov);
  Rng base(opt.seed);
  VectorXd z(n2), xi(n2);
  double grand = 0.0;
  report.rep_means.resize(opt.repetitions);
  for (int r = 0; r < opt.repetitions; ++r) {
    Rng rng = base.derive(static_cast<std::uint64_t>(r));
    double sum = 0.0;
    for (long long shot = 0; shot < opt.shots; ++shot) {
      for (int i = 0; i < n2; ++i) z[i] = rng.normal();
      xi = state.mean + chol * z;
      const VectorXd dlt = xi - reference.mean;
      const double q = dlt.dot(a * dlt);
      double value;
      if (opt.exact_symbol) {
        value = prefactor * std::exp(-0.5 * q);
      } else {
        double taylor = 1.0;
        if (opt.degree >= 2) taylor += -0.5 * q;
        if (opt.degree >= 4) taylor += 0.125 * q * q;
        value = prefactor * taylor;
      }
      sum += value;
    }
    report.rep_means[r] = sum / static_cast<double>(opt.shots);
    grand += report.rep_means[r];
  }
  report.overlap_mean = grand / opt.repetitions;
  if (opt.repetitions > 1) {
    double ss = 0.0;
    for (double v : report.rep_means) ss += (v - report.overlap_mean) * (v - report.overlap_mean);
    report.overlap_std = std::sqrt(ss / (opt.repetitions - 1));
  }
  report.purity = report.overlap_mean * report.overlap_mean / report.ref_purity;
  return report;
}

// ---------------------------------------------------------------------------
// Shift-error moment recovery

struct ShiftReport {
  std::vector<double> raw_moments;    // sampled E[x^k], k = 0..k_max
  std::vector<double> shift_moments;  // recovered E[a^k]
  double mean_shift = 0.0;
  double var_shift = 0.0;
  long long shots = 0;
};

// Recovers moments of an unknown position shift a on one mode: measured
// moments mix reference moments with shift moments through the binomial
// expansion of (x + a)^k, so the k-th equation introduces E[a^k] linearly and
// forward substitution solves the triangular system.
inline ShiftReport estimate_shift_moments(const GaussianState& reference, const GaussianState& shifted,
                                          int mode, int k_max, long long shots, std::uint64_t seed) {
  if (mode < 0 || mode >= reference.n) throw std::invalid_argument("estimate_shift_moments: mode out of range");
  if (k_max < 1 || k_max > 4) throw std::invalid_argument("estimate_shift_moments: k_max must be in 1..4");
  if (reference.n != shifted.n) throw std::invalid_argument("estimate_shift_moments: mode count mismatch");

  std::vector<double> ref(k_max + 1);
  for (int k = 0; k <= k_max; ++k) {
    std::vector<int> exps(2 * reference.n, 0);
    exps[2 * mode] = k;
    ref[k] = gaussian_moment(reference, exps);
  }

  std::vector<int> labels(shifted.n, 0);
  labels[mode] = 1;
  QuadratureSampler sampler(shifted);
  Rng rng(seed);
  std::vector<double> outcomes;
  ShiftReport report;
  report.shots = shots;
  report.raw_moments.assign(k_max + 1, 0.0);
  report.raw_moments[0] = 1.0;
  for (long long shot = 0; shot < shots; ++shot) {
    sampler.sample(labels, rng, outcomes);
    const double v = outcomes[mode];
    double pw = 1.0;
    for (int k = 1; k <= k_max; ++k) {
      pw *= v;
      report.raw_moments[k] += pw;
    }
  }
  for (int k = 1; k <= k_max; ++k) report.raw_moments[k] /= static_cast<double>(shots);

  report.shift_moments.assign(k_max + 1, 0.0);
  report.shift_moments[0] = 1.0;
  for (int k = 1; k <= k_max; ++k) {
    double acc = report.raw_moments[k];
    double binom = 1.0;
    for (int j = 0; j < k; ++j) {
      // binom = C(k, j)
      acc -= binom * report.shift_moments[j] * ref[k - j];
      binom = binom * (k - j) / (j + 1);
    }
    report.shift_moments[k] = acc;
  }
  report.mean_shift = report.shift_moments[1];
  if (k_max >= 2) report.var_shift = report.shift_moments[2] - report.shift_moments[1] * report.shift_moments[1];
  return report;
}

// ---------------------------------------------------------------------------
// Mixed discrete/continuous string bounds (bound evaluation only)

inline double mixed_variance_bound(int k, int deg, int d, double bound, double sum_alpha_sq) {
  if (k < 0 || deg < 0 || d < 2 || bound <= 0.0 || sum_alpha_sq < 0.0)
    throw std::invalid_argument("mixed_variance_bound: bad parameters");
  const double dd = static_cast<double>(d) * d + 2.0;
  return std::pow(dd, k) * std::max(std::pow(2.0, k), std::pow(bound, 2 * deg)) * sum_alpha_sq;
}

inline double mixed_variance_bound_split(int k, int deg, int d, double norm_inf_discrete, double bound,
                                         double sum_alpha_sq_continuous) {
  if (k < 0 || deg < 0 || d < 2 || bound <= 0.0) throw std::invalid_argument("mixed_variance_bound_split: bad parameters");
  return std::pow(static_cast<double>(d), 3 * k) * norm_inf_discrete * norm_inf_discrete +
         std::pow(3.0, k) * std::pow(bound, 2 * deg) * sum_alpha_sq_continuous;
}

}  // namespace bosonmeter
