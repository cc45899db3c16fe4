#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bosonmeter/cv_apps.hpp"
#include "bosonmeter/gaussian.hpp"
#include "bosonmeter/qudit_state.hpp"
#include "bosonmeter/scheme.hpp"

namespace bosonmeter {

// Random quadrature-polynomial observable: each term touches `weight`
// distinct modes with one quadrature per mode and exponents of total degree
// exactly `degree` (each touched mode gets at least one power). Coefficients
// are standard normal, rescaled to sum alpha^2 = 1.
inline Observable random_px_observable(int n, int num_terms, int weight, int degree, Rng& rng,
                                       bool multilinear = false) {
  if (weight < 1 || weight > n) throw std::invalid_argument("random_px_observable: bad weight");
  if (multilinear) degree = weight;
  if (degree < weight) throw std::invalid_argument("random_px_observable: degree < weight");
  Observable o;
  o.basis = Basis::px;
  o.n = n;
  o.d = 0;
  double sq = 0.0;
  for (int t = 0; t < num_terms; ++t) {
    Term term;
    term.px.assign(n, PXExp{0, 0});
    std::vector<int> modes(n);
    for (int i = 0; i < n; ++i) modes[i] = i;
    for (int i = 0; i < weight; ++i) std::swap(modes[i], modes[rng.uniform_int(i, n - 1)]);
    modes.resize(weight);
    std::vector<bool> momentum(weight);
    for (int i = 0; i < weight; ++i) momentum[i] = rng.uniform_int(0, 1) == 1;
    std::vector<int> exps(weight, 1);
    for (int extra = 0; extra < degree - weight; ++extra) ++exps[rng.uniform_int(0, weight - 1)];
    for (int i = 0; i < weight; ++i) {
      if (momentum[i])
        term.px[modes[i]].m = exps[i];
      else
        term.px[modes[i]].l = exps[i];
    }
    term.coeff = rng.normal();
    sq += term.coeff * term.coeff;
    o.terms.push_back(std::move(term));
  }
  const double scale = sq > 0.0 ? 1.0 / std::sqrt(sq) : 1.0;
  for (auto& t : o.terms) t.coeff *= scale;
  o = canonicalize(o, 0.0);
  validate(o);
  return o;
}

// Random generalized-basis observable: `weight` distinct modes per term with
// uniform non-identity labels, standard-normal coefficients rescaled to
// sum alpha^2 = 1. Real coefficients keep the operator Hermitian.
inline Observable random_ggb_observable(int n, int d, int num_terms, int weight, Rng& rng) {
  if (weight < 1 || weight > n) throw std::invalid_argument("random_ggb_observable: bad weight");
  Observable o;
  o.basis = Basis::ggb;
  o.n = n;
  o.d = d;
  const int labels = d * d - 1;
  double sq = 0.0;
  for (int t = 0; t < num_terms; ++t) {
    Term term;
    term.ggb.assign(n, 0);
    std::vector<int> modes(n);
    for (int i = 0; i < n; ++i) modes[i] = i;
    for (int i = 0; i < weight; ++i) std::swap(modes[i], modes[rng.uniform_int(i, n - 1)]);
    for (int i = 0; i < weight; ++i) term.ggb[modes[i]] = rng.uniform_int(1, labels);
    term.coeff = rng.normal();
    sq += term.coeff * term.coeff;
    o.terms.push_back(std::move(term));
  }
  const double scale = sq > 0.0 ? 1.0 / std::sqrt(sq) : 1.0;
  for (auto& t : o.terms) t.coeff *= scale;
  o = canonicalize(o, 0.0);
  validate(o);
  return o;
}

// Haar-like random pure state: i.i.d. complex normal amplitudes, normalized.
inline QuditState random_qudit_state(int n, int d, Rng& rng) {
  QuditState s = make_qudit_state(n, d);
  for (Eigen::Index i = 0; i < s.amp.size(); ++i) s.amp[i] = cxd(rng.normal(), rng.normal());
  s.amp /= s.amp.norm();
  return s;
}

// One scheme run bundled with its oracles.
struct SchemeRun {
  EstimationReport report;
  double exact = 0.0;           // true expectation
  double exact_variance = 0.0;  // single-shot estimator variance (when computed)
  double variance_bound = 0.0;  // closed-form cap (when available)
};

struct RunFlags {
  bool with_exact_variance = false;
  bool with_bound = false;
};

inline SchemeRun run_px_scheme(const Observable& o, const GaussianState& state, SchemeKind kind,
                               const EstimateOptions& opts, const RunFlags& flags = {}) {
  const MeasurementScheme scheme = make_scheme(o, kind);
  QuadratureSampler sampler(state);
  SchemeRun run;
  run.report = estimate(o, scheme, sampler, opts);
  run.exact = expectation(state, o);
  if (flags.with_exact_variance) run.exact_variance = exact_variance_px(o, scheme, state);
  if (flags.with_bound && kind == SchemeKind::cs_uniform) {
    run.variance_bound = opts.projection.enabled() ? px_cs_variance_bound_per_term(o, opts.projection)
                                                   : px_cs_variance_bound(o, 0.0);
  }
  return run;
}

inline SchemeRun run_qudit_scheme(const Observable& o, const QuditState& state, SchemeKind kind,
                                  const EstimateOptions& opts, const RunFlags& flags = {}) {
  const MeasurementScheme scheme = make_scheme(o, kind);
  QuditMeasurementSampler sampler(state);
  SchemeRun run;
  run.report = estimate(o, scheme, sampler, opts);
  run.exact = exact_expectation(state, o);
  if (flags.with_exact_variance) run.exact_variance = exact_variance_qudit(o, scheme, state);
  if (flags.with_bound && kind == SchemeKind::cs_uniform)
    run.variance_bound = ggb_cs_variance_bound(o, operator_norm_inf(o));
  return run;
}

// Error metric used by the scaling and comparison experiments: spread of the
// per-repetition means around the truth.
inline double rms_error(const EstimationReport& r, double exact) {
  double acc = 0.0;
  for (double m : r.rep_means) acc += (m - exact) * (m - exact);
  return std::sqrt(acc / r.rep_means.size());
}

}  // namespace bosonmeter
