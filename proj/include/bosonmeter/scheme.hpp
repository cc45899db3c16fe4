#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "bosonmeter/gaussian.hpp"
#include "bosonmeter/grouping.hpp"
#include "bosonmeter/observable.hpp"
#include "bosonmeter/rng.hpp"

namespace bosonmeter {

enum class SchemeKind { cs_uniform, importance_l1, ogm };

inline const char* scheme_name(SchemeKind k) {
  switch (k) {
    case SchemeKind::cs_uniform: return "cs";
    case SchemeKind::importance_l1: return "l1";
    case SchemeKind::ogm: return "ogm";
  }
  return "?";
}

// A concrete measurement setting: one local basis label per mode, 0 = skip.
// GGB labels are basis indices 1..d^2-1; px labels are 1 = x, 2 = p.
struct MeasurementString {
  Basis basis = Basis::ggb;
  std::vector<int> labels;
};

// A randomized measurement scheme: either i.i.d. uniform local labels
// (cs_uniform, no explicit setting list) or a finite distribution over
// settings (importance_l1 over canonical strings, ogm over group
// representatives). term_cover_weight[j] is the probability that a sampled
// setting determines term j, so 1/term_cover_weight is the estimator's
// inverse-probability factor; the estimator is unbiased by construction.
struct MeasurementScheme {
  SchemeKind kind = SchemeKind::cs_uniform;
  Basis basis = Basis::ggb;
  int n = 0;
  int d = 0;           // qudit dimension, 0 for px
  int num_labels = 0;  // non-skip labels per mode: d^2-1 (ggb) or 2 (px)

  std::vector<MeasurementString> settings;
  std::vector<double> probs;
  std::vector<double> cum_probs;
  // Per setting: the terms it determines, paired with their factor f.
  std::vector<std::vector<std::pair<int, double>>> covered;

  std::vector<double> term_cover_weight;      // identity terms: 1
  std::vector<int> term_setting;              // importance_l1 canonical index, else -1
  std::vector<std::vector<int>> term_groups;  // ogm: settings covering each term
};

namespace detail {

inline void init_scheme_shell(MeasurementScheme& s, const Observable& o, SchemeKind kind) {
  validate(o);
  s.kind = kind;
  s.basis = o.basis;
  s.n = o.n;
  s.d = o.d;
  s.num_labels = o.basis == Basis::ggb ? o.d * o.d - 1 : 2;
  s.term_cover_weight.assign(o.terms.size(), 1.0);
  s.term_setting.assign(o.terms.size(), -1);
  s.term_groups.assign(o.terms.size(), {});
}

inline void finalize_distribution(MeasurementScheme& s) {
  s.cum_probs.resize(s.probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < s.probs.size(); ++i) {
    acc += s.probs[i];
    s.cum_probs[i] = acc;
  }
  if (!s.probs.empty()) {
    if (std::abs(acc - 1.0) > 1e-9) throw std::logic_error("measurement scheme: distribution does not sum to 1");
    s.cum_probs.back() = 1.0;
  }
}

}  // namespace detail

// Uniform local randomization: every mode gets an i.i.d. uniform non-skip
// label; a weight-w term is determined with probability num_labels^-w.
inline MeasurementScheme make_cs_uniform(const Observable& o) {
  MeasurementScheme s;
  detail::init_scheme_shell(s, o, SchemeKind::cs_uniform);
  for (std::size_t j = 0; j < o.terms.size(); ++j) {
    const int w = term_weight(o, o.terms[j]);
    s.term_cover_weight[j] = std::pow(static_cast<double>(s.num_labels), -w);
  }
  return s;
}

// Importance sampling over the canonical settings (each term measured exactly
// on its own support), with probability proportional to the summed |coeff| of
// the terms sharing a canonical string. A term is estimated only when its own
// setting is drawn.
inline MeasurementScheme make_importance_l1(const Observable& o) {
  MeasurementScheme s;
  detail::init_scheme_shell(s, o, SchemeKind::importance_l1);
  std::map<std::vector<int>, int> index_of;
  std::vector<double> weight;
  for (std::size_t j = 0; j < o.terms.size(); ++j) {
    if (term_is_identity(o, o.terms[j]) || o.terms[j].coeff == 0.0) continue;
    std::vector<int> labels = term_labels(o, o.terms[j]);
    auto it = index_of.find(labels);
    int idx;
    if (it == index_of.end()) {
      idx = static_cast<int>(s.settings.size());
      index_of.emplace(labels, idx);
      s.settings.push_back(MeasurementString{o.basis, std::move(labels)});
      weight.push_back(0.0);
      s.covered.emplace_back();
    } else {
      idx = it->second;
    }
    weight[idx] += std::abs(o.terms[j].coeff);
    s.term_setting[j] = idx;
  }
  double total = 0.0;
  for (double w : weight) total += w;
  s.probs.resize(weight.size());
  for (std::size_t i = 0; i < weight.size(); ++i) s.probs[i] = weight[i] / total;
  for (std::size_t j = 0; j < o.terms.size(); ++j) {
    if (s.term_setting[j] < 0) continue;
    const int idx = s.term_setting[j];
    s.term_cover_weight[j] = s.probs[idx];
    s.covered[idx].emplace_back(static_cast<int>(j), 1.0 / s.probs[idx]);
  }
  detail::finalize_distribution(s);
  return s;
}

// Overlapped grouping: greedy groups become the settings; the distribution
// over groups minimizes the diagonal cost sum_j coeff_j^2 / c_j (or stays
// uniform when optimize = false). c_j sums the probability of every setting
// that covers term j, overlapped groups included.
inline MeasurementScheme make_ogm(const Observable& o, bool optimize = true) {
  MeasurementScheme s;
  detail::init_scheme_shell(s, o, SchemeKind::ogm);
  const std::vector<Group> groups = greedy_group(o);
  const int ng = static_cast<int>(groups.size());
  for (const auto& g : groups) s.settings.push_back(MeasurementString{o.basis, g.labels});
  s.covered.assign(ng, {});
  if (ng == 0) {
    detail::finalize_distribution(s);
    return s;
  }

  std::vector<double> weights_sq(o.terms.size(), 0.0);
  for (std::size_t j = 0; j < o.terms.size(); ++j) {
    if (term_is_identity(o, o.terms[j])) continue;
    const std::vector<int> labels = term_labels(o, o.terms[j]);
    for (int g = 0; g < ng; ++g)
      if (labels_cover(labels, groups[g].labels)) s.term_groups[j].push_back(g);
    weights_sq[j] = o.terms[j].coeff * o.terms[j].coeff;
  }

  if (optimize) {
    s.probs = optimize_distribution(weights_sq, s.term_groups, ng).probs;
  } else {
    s.probs.assign(ng, 1.0 / ng);
  }

  for (std::size_t j = 0; j < o.terms.size(); ++j) {
    if (term_is_identity(o, o.terms[j])) continue;
    double c = 0.0;
    for (int g : s.term_groups[j]) c += s.probs[g];
    s.term_cover_weight[j] = c;
    if (o.terms[j].coeff == 0.0) continue;
    if (c <= 0.0) throw std::logic_error("make_ogm: term with zero coverage probability");
    for (int g : s.term_groups[j]) s.covered[g].emplace_back(static_cast<int>(j), 1.0 / c);
  }
  detail::finalize_distribution(s);
  return s;
}

inline MeasurementScheme make_scheme(const Observable& o, SchemeKind kind) {
  switch (kind) {
    case SchemeKind::cs_uniform: return make_cs_uniform(o);
    case SchemeKind::importance_l1: return make_importance_l1(o);
    case SchemeKind::ogm: return make_ogm(o);
  }
  throw std::invalid_argument("make_scheme: unknown kind");
}

// Draws one measurement setting; returns its index (-1 for cs_uniform, whose
// settings are implicit) and fills the per-mode labels.
inline int sample_setting(const MeasurementScheme& s, Rng& rng, std::vector<int>& labels) {
  if (s.kind == SchemeKind::cs_uniform) {
    labels.resize(s.n);
    for (int i = 0; i < s.n; ++i) labels[i] = rng.uniform_int(1, s.num_labels);
    return -1;
  }
  if (s.settings.empty()) throw std::logic_error("sample_setting: scheme has no settings");
  const int idx = static_cast<int>(rng.sample_cumulative(s.cum_probs));
  labels = s.settings[idx].labels;
  return idx;
}

// f(P, Q, K): the inverse coverage probability, nonzero only when P
// determines Q. E[f * 1(covered)] = 1 for every scheme kind.
inline double f_factor(const MeasurementScheme& s, const Observable& o, int term_index,
                       const std::vector<int>& setting_labels) {
  const Term& t = o.terms[term_index];
  if (term_is_identity(o, t)) return 1.0;
  if (!labels_cover(term_labels(o, t), setting_labels)) return 0.0;
  if (s.kind == SchemeKind::importance_l1) {
    // importance sampling demands the exact canonical setting, not mere coverage
    if (s.term_setting[term_index] < 0 ||
        s.settings[s.term_setting[term_index]].labels != setting_labels)
      return 0.0;
  }
  return 1.0 / s.term_cover_weight[term_index];
}

// g(Q_j, Q_k) = E_P[f(P,Q_j) f(P,Q_k)]: the pair weight in the exact variance.
inline double g_factor(const MeasurementScheme& s, const Observable& o, int j, int k) {
  const Term& tj = o.terms[j];
  const Term& tk = o.terms[k];
  const bool id_j = term_is_identity(o, tj);
  const bool id_k = term_is_identity(o, tk);
  if (id_j && id_k) return 1.0;
  if (id_j) return 1.0;  // f_identity = 1 always; E[f_k 1(covered)] = 1
  if (id_k) return 1.0;
  switch (s.kind) {
    case SchemeKind::cs_uniform: {
      const std::vector<int> lj = term_labels(o, tj);
      const std::vector<int> lk = term_labels(o, tk);
      int common = 0;
      for (int i = 0; i < s.n; ++i) {
        if (lj[i] != 0 && lk[i] != 0) {
          if (lj[i] != lk[i]) return 0.0;
          ++common;
        }
      }
      return std::pow(static_cast<double>(s.num_labels), common);
    }
    case SchemeKind::importance_l1: {
      if (s.term_setting[j] < 0 || s.term_setting[j] != s.term_setting[k]) return 0.0;
      return 1.0 / s.probs[s.term_setting[j]];
    }
    case SchemeKind::ogm: {
      double shared = 0.0;
      const auto& gj = s.term_groups[j];
      const auto& gk = s.term_groups[k];
      std::size_t a = 0, b = 0;
      while (a < gj.size() && b < gk.size()) {
        if (gj[a] == gk[b]) {
          shared += s.probs[gj[a]];
          ++a;
          ++b;
        } else if (gj[a] < gk[b]) {
          ++a;
        } else {
          ++b;
        }
      }
      if (shared == 0.0) return 0.0;
      return shared / (s.term_cover_weight[j] * s.term_cover_weight[k]);
    }
  }
  return 0.0;
}

struct EstimateOptions {
  long long shots = 1000;
  int repetitions = 1;
  std::uint64_t seed = 1;
  ProjectionSpec projection;  // px basis only
  NoiseModel noise;           // px basis only
  int threads = 1;
};

struct EstimationReport {
  std::vector<double> rep_means;
  double mean = 0.0;
  double std_across_reps = 0.0;  // sample std of the repetition means
  double shot_variance = 0.0;    // pooled single-shot sample variance
  long long shots_per_rep = 0;
  int repetitions = 0;
};

namespace detail {

// Per-term data laid out for the shot loop.
struct TermPlan {
  std::vector<int> modes;
  std::vector<int> labels;     // label per supported mode
  std::vector<int> exps;       // outcome exponent per supported mode
  double coeff = 0.0;
  double f = 0.0;              // cs_uniform factor (distribution-kind f is in covered lists)
};

inline std::vector<TermPlan> build_term_plans(const Observable& o, const MeasurementScheme& s) {
  std::vector<TermPlan> plans(o.terms.size());
  for (std::size_t j = 0; j < o.terms.size(); ++j) {
    const Term& t = o.terms[j];
    TermPlan& p = plans[j];
    p.coeff = t.coeff;
    const std::vector<int> labels = term_labels(o, t);
    for (int i = 0; i < o.n; ++i) {
      if (labels[i] == 0) continue;
      p.modes.push_back(i);
      p.labels.push_back(labels[i]);
      p.exps.push_back(term_exponent(o, t, i));
    }
    p.f = 1.0 / s.term_cover_weight[j];
  }
  return plans;
}

inline double term_outcome_product(const TermPlan& p, const std::vector<double>& outcomes,
                                   const ProjectionSpec& projection, bool use_projection) {
  double mu = 1.0;
  for (std::size_t a = 0; a < p.modes.size(); ++a) {
    const double v = outcomes[p.modes[a]];
    if (use_projection && std::abs(v) > projection.mode_bound(p.modes[a])) return 0.0;
    double pw = v;
    for (int e = 1; e < p.exps[a]; ++e) pw *= v;
    mu *= pw;
  }
  return mu;
}

template <typename Sampler>
void run_repetition(const Observable& o, const MeasurementScheme& s,
                    const std::vector<TermPlan>& plans, double identity_sum, Sampler& sampler,
                    const EstimateOptions& opt, Rng rng, double& out_sum, double& out_sumsq) {
  const bool px = s.basis == Basis::px;
  const bool use_projection = px && opt.projection.enabled();
  const bool use_noise = px && opt.noise.enabled();
  std::vector<int> labels;
  std::vector<double> outcomes;
  double sum = 0.0, sumsq = 0.0;
  for (long long shot = 0; shot < opt.shots; ++shot) {
    const int setting = sample_setting(s, rng, labels);
    sampler.sample(labels, rng, outcomes);
    if (use_noise) add_noise(outcomes, labels, opt.noise, rng);
    double value = identity_sum;
    if (s.kind == SchemeKind::cs_uniform) {
      for (const TermPlan& p : plans) {
        if (p.modes.empty() || p.coeff == 0.0) continue;
        bool hit = true;
        for (std::size_t a = 0; a < p.modes.size() && hit; ++a)
          if (labels[p.modes[a]] != p.labels[a]) hit = false;
        if (!hit) continue;
        value += p.coeff * p.f * term_outcome_product(p, outcomes, opt.projection, use_projection);
      }
    } else {
      for (const auto& [j, f] : s.covered[setting]) {
        const TermPlan& p = plans[j];
        value += p.coeff * f * term_outcome_product(p, outcomes, opt.projection, use_projection);
      }
    }
    sum += value;
    sumsq += value * value;
  }
  out_sum = sum;
  out_sumsq = sumsq;
}

}  // namespace detail

// Monte-Carlo estimation of tr(rho O): R independent repetitions of T shots.
// Each shot draws a setting from the scheme, measures through the sampler,
// and evaluates sum_j coeff_j f_j mu_j. Repetition r uses an RNG stream
// derived from (seed, r), so results are independent of thread count.
template <typename Sampler>
EstimationReport estimate(const Observable& o, const MeasurementScheme& s, Sampler& sampler,
                          const EstimateOptions& opt) {
  validate(o);
  if (o.basis != s.basis || o.n != s.n) throw std::invalid_argument("estimate: scheme/observable mismatch");
  if (opt.shots <= 0 || opt.repetitions <= 0) throw std::invalid_argument("estimate: shots and repetitions must be positive");
  const std::vector<detail::TermPlan> plans = detail::build_term_plans(o, s);
  double identity_sum = 0.0;
  bool has_sampled_term = false;
  for (std::size_t j = 0; j < o.terms.size(); ++j) {
    if (term_is_identity(o, o.terms[j]))
      identity_sum += o.terms[j].coeff;
    else if (o.terms[j].coeff != 0.0)
      has_sampled_term = true;
  }
  if (has_sampled_term && s.kind != SchemeKind::cs_uniform && s.settings.empty())
    throw std::logic_error("estimate: scheme has no settings for its terms");

  const int R = opt.repetitions;
  std::vector<double> sums(R, 0.0), sumsqs(R, 0.0);
  Rng base(opt.seed);
  const bool trivial = !has_sampled_term && s.kind != SchemeKind::cs_uniform && s.settings.empty();
  auto work = [&](int r, Sampler& smp) {
    if (trivial) {
      sums[r] = identity_sum * static_cast<double>(opt.shots);
      sumsqs[r] = identity_sum * identity_sum * static_cast<double>(opt.shots);
      return;
    }
    detail::run_repetition(o, s, plans, identity_sum, smp, opt, base.derive(static_cast<std::uint64_t>(r)),
                           sums[r], sumsqs[r]);
  };
  const int threads = std::max(1, std::min<int>(opt.threads, R));
  if (threads == 1) {
    for (int r = 0; r < R; ++r) work(r, sampler);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        Sampler local(sampler);
        for (int r = t; r < R; r += threads) work(r, local);
      });
    }
    for (auto& th : pool) th.join();
  }

  EstimationReport report;
  report.repetitions = R;
  report.shots_per_rep = opt.shots;
  report.rep_means.resize(R);
  double grand = 0.0;
  for (int r = 0; r < R; ++r) {
    report.rep_means[r] = sums[r] / static_cast<double>(opt.shots);
    grand += report.rep_means[r];
  }
  report.mean = grand / R;
  if (R > 1) {
    double ss = 0.0;
    for (int r = 0; r < R; ++r) {
      const double dlt = report.rep_means[r] - report.mean;
      ss += dlt * dlt;
    }
    report.std_across_reps = std::sqrt(ss / (R - 1));
  }
  if (opt.shots > 1) {
    double pooled = 0.0;
    for (int r = 0; r < R; ++r)
      pooled += (sumsqs[r] - sums[r] * sums[r] / static_cast<double>(opt.shots)) /
                static_cast<double>(opt.shots - 1);
    report.shot_variance = pooled / R;
  }
  return report;
}

// Exact estimator variance: sum_{jk} a_j a_k g(Q_j,Q_k) tr(rho Q_j Q_k) minus
// the squared target. pair_trace(tj, tk) must return tr(rho Q_j Q_k); it is
// only consulted for pairs with nonzero g, whose labels agree wherever the
// supports overlap.
inline double exact_variance(const Observable& o, const MeasurementScheme& s,
                             const std::function<double(const Term&, const Term&)>& pair_trace,
                             double exact_value) {
  const int m = static_cast<int>(o.terms.size());
  double acc = 0.0;
  for (int j = 0; j < m; ++j) {
    for (int k = j; k < m; ++k) {
      if (o.terms[j].coeff == 0.0 || o.terms[k].coeff == 0.0) continue;
      const double g = g_factor(s, o, j, k);
      if (g == 0.0) continue;
      const double w = (j == k ? 1.0 : 2.0) * o.terms[j].coeff * o.terms[k].coeff * g;
      acc += w * pair_trace(o.terms[j], o.terms[k]);
    }
  }
  return acc - exact_value * exact_value;
}

// Spectral norm of a GGB observable via dense reconstruction (desk scale).
inline double operator_norm_inf(const Observable& o) {
  const MatrixXcd m = reconstruct(o);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(m);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

// Variance bound for uniform local GGB randomization: d^{2k} (d-1)^k |O|_inf^2.
inline double ggb_cs_variance_bound(const Observable& o, double norm_inf) {
  const int k = locality(o);
  return std::pow(static_cast<double>(o.d), 2 * k) * std::pow(static_cast<double>(o.d - 1), k) *
         norm_inf * norm_inf;
}

// Shared-bound variance bound for uniform px randomization: 3^k B^{2K} sum a^2
// over non-identity terms (K = max degree).
inline double px_cs_variance_bound(const Observable& o, double bound) {
  const int k = locality(o);
  const int deg = max_degree(o);
  double sq = 0.0;
  for (const auto& t : o.terms)
    if (!term_is_identity(o, t)) sq += t.coeff * t.coeff;
  return std::pow(3.0, k) * std::pow(bound, 2 * deg) * sq;
}

// Per-term refinement: 3^k sum_j a_j^2 prod_i B_i^{2 e_ij}.
inline double px_cs_variance_bound_per_term(const Observable& o, const ProjectionSpec& spec) {
  const int k = locality(o);
  double acc = 0.0;
  for (const auto& t : o.terms) {
    double prod = 1.0;
    bool identity = true;
    for (int i = 0; i < o.n; ++i) {
      const int e = t.px[i].l + t.px[i].m;
      if (e == 0) continue;
      identity = false;
      prod *= std::pow(spec.mode_bound(i), 2 * e);
    }
    if (!identity) acc += t.coeff * t.coeff * prod;
  }
  return std::pow(3.0, k) * acc;
}

}  // namespace bosonmeter
