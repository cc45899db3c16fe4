#include <catch2/catch_amalgamated.hpp>

#include "bosonmeter/cv_apps.hpp"
#include "bosonmeter/experiments.hpp"
#include "bosonmeter/scheme.hpp"

using namespace bosonmeter;

namespace {

// Every explicit setting of a scheme with its probability; cs_uniform gets
// the full label-string product space.
std::vector<std::pair<double, std::vector<int>>> all_settings(const MeasurementScheme& s) {
  std::vector<std::pair<double, std::vector<int>>> out;
  if (s.kind == SchemeKind::cs_uniform) {
    long long total = 1;
    for (int i = 0; i < s.n; ++i) total *= s.num_labels;
    for (long long idx = 0; idx < total; ++idx) {
      std::vector<int> labels(s.n);
      long long v = idx;
      for (int i = s.n - 1; i >= 0; --i) {
        labels[i] = 1 + static_cast<int>(v % s.num_labels);
        v /= s.num_labels;
      }
      out.emplace_back(1.0 / static_cast<double>(total), std::move(labels));
    }
  } else {
    for (std::size_t i = 0; i < s.settings.size(); ++i) out.emplace_back(s.probs[i], s.settings[i].labels);
  }
  return out;
}

// Exact mean and second moment of the estimator by enumerating settings and
// joint measurement outcomes on a dense qudit state.
std::pair<double, double> enumerate_estimator(const Observable& o, const MeasurementScheme& s,
                                              const QuditState& psi) {
  double identity_sum = 0.0;
  for (const auto& t : o.terms)
    if (term_is_identity(o, t)) identity_sum += t.coeff;
  double mean = 0.0, second = 0.0;
  for (const auto& [prob, labels] : all_settings(s)) {
    VectorXcd v = psi.amp;
    for (int i = 0; i < o.n; ++i)
      if (labels[i] != 0)
        apply_local_matrix(v, psi.n, psi.d, i, MatrixXcd(ggb_eigensystem(psi.d, labels[i]).vectors.adjoint()));
    for (Eigen::Index idx = 0; idx < v.size(); ++idx) {
      const double p_out = std::norm(v[idx]);
      if (p_out == 0.0) continue;
      std::vector<int> digits(o.n);
      Eigen::Index rest = idx;
      for (int i = o.n - 1; i >= 0; --i) {
        digits[i] = static_cast<int>(rest % psi.d);
        rest /= psi.d;
      }
      double value = identity_sum;
      for (std::size_t j = 0; j < o.terms.size(); ++j) {
        if (term_is_identity(o, o.terms[j])) continue;
        const double f = f_factor(s, o, static_cast<int>(j), labels);
        if (f == 0.0) continue;
        double mu = 1.0;
        for (int i = 0; i < o.n; ++i)
          if (o.terms[j].ggb[i] != 0) mu *= ggb_eigensystem(psi.d, labels[i]).values[digits[i]];
        value += o.terms[j].coeff * f * mu;
      }
      mean += prob * p_out * value;
      second += prob * p_out * value * value;
    }
  }
  return {mean, second};
}

Observable with_identity(Observable o, double c) {
  Term id;
  if (o.basis == Basis::ggb)
    id.ggb.assign(o.n, 0);
  else
    id.px.assign(o.n, PXExp{});
  id.coeff = c;
  o.terms.push_back(id);
  return o;
}

}  // namespace

TEST_CASE("inverse-probability factors satisfy the unbiasedness identity") {
  Rng rng(501);
  // Sum over settings of prob * f equals 1 per term, and prob * f_j * f_k
  // equals the pair factor g: checked for all three kinds on both bases.
  auto check = [&](const Observable& o) {
    for (SchemeKind kind : {SchemeKind::cs_uniform, SchemeKind::importance_l1, SchemeKind::ogm}) {
      const MeasurementScheme s = make_scheme(o, kind);
      const auto settings = all_settings(s);
      for (std::size_t j = 0; j < o.terms.size(); ++j) {
        if (term_is_identity(o, o.terms[j]) || o.terms[j].coeff == 0.0) continue;
        double one = 0.0;
        for (const auto& [p, labels] : settings) one += p * f_factor(s, o, static_cast<int>(j), labels);
        REQUIRE(one == Catch::Approx(1.0).margin(1e-10));
        for (std::size_t k = 0; k < o.terms.size(); ++k) {
          if (term_is_identity(o, o.terms[k]) || o.terms[k].coeff == 0.0) continue;
          double pair = 0.0;
          for (const auto& [p, labels] : settings)
            pair += p * f_factor(s, o, static_cast<int>(j), labels) * f_factor(s, o, static_cast<int>(k), labels);
          REQUIRE(pair == Catch::Approx(g_factor(s, o, static_cast<int>(j), static_cast<int>(k))).margin(1e-10));
        }
      }
      // covered lists agree with f_factor
      for (std::size_t i = 0; i < s.settings.size(); ++i) {
        for (const auto& [j, f] : s.covered[i])
          REQUIRE(f == Catch::Approx(f_factor(s, o, j, s.settings[i].labels)));
        int nonzero = 0;
        for (std::size_t j = 0; j < o.terms.size(); ++j)
          if (!term_is_identity(o, o.terms[j]) && o.terms[j].coeff != 0.0 &&
              f_factor(s, o, static_cast<int>(j), s.settings[i].labels) > 0.0)
            ++nonzero;
        REQUIRE(static_cast<int>(s.covered[i].size()) == nonzero);
      }
    }
  };
  check(with_identity(random_ggb_observable(2, 2, 5, 2, rng), 0.4));
  check(with_identity(random_px_observable(3, 6, 2, 3, rng), -0.2));
  check(random_px_observable(2, 4, 1, 2, rng));
}

TEST_CASE("estimator mean and variance match full enumeration on qudits") {
  Rng rng(502);
  for (int rep = 0; rep < 5; ++rep) {
    const Observable o = with_identity(random_ggb_observable(2, 2, 4, 2, rng), 0.3);
    const QuditState psi = random_qudit_state(2, 2, rng);
    const double exact = exact_expectation(psi, o);
    for (SchemeKind kind : {SchemeKind::cs_uniform, SchemeKind::importance_l1, SchemeKind::ogm}) {
      const MeasurementScheme s = make_scheme(o, kind);
      const auto [mean, second] = enumerate_estimator(o, s, psi);
      REQUIRE(mean == Catch::Approx(exact).margin(1e-10));
      const double var = second - mean * mean;
      const double formula = exact_variance_qudit(o, s, psi);
      REQUIRE(var == Catch::Approx(formula).margin(1e-9));
    }
  }
}

TEST_CASE("sampled estimates are unbiased across schemes (qudit)") {
  Rng rng(503);
  const Observable o = with_identity(random_ggb_observable(2, 3, 6, 2, rng), 0.2);
  const QuditState psi = random_qudit_state(2, 3, rng);
  const double exact = exact_expectation(psi, o);
  for (SchemeKind kind : {SchemeKind::cs_uniform, SchemeKind::importance_l1, SchemeKind::ogm}) {
    const MeasurementScheme s = make_scheme(o, kind);
    QuditMeasurementSampler sampler(psi);
    EstimateOptions opt;
    opt.shots = 20000;
    opt.repetitions = 8;
    opt.seed = 77 + static_cast<int>(kind);
    const EstimationReport rep = estimate(o, s, sampler, opt);
    REQUIRE(std::abs(rep.mean - exact) < 5.0 * rep.std_across_reps / std::sqrt(8.0) + 1e-12);
    // Pooled single-shot variance agrees with the closed form.
    const double formula = exact_variance_qudit(o, s, psi);
    REQUIRE(rep.shot_variance == Catch::Approx(formula).epsilon(0.10));
  }
}

TEST_CASE("sampled estimates are unbiased across schemes (quadratures)") {
  const Observable photon = mean_photon_observable(2);
  const GaussianState state = tmsv_state(0.5);
  const double exact = std::sinh(0.5) * std::sinh(0.5);
  REQUIRE(expectation(state, photon) == Catch::Approx(exact).margin(1e-12));
  for (SchemeKind kind : {SchemeKind::cs_uniform, SchemeKind::importance_l1, SchemeKind::ogm}) {
    const MeasurementScheme s = make_scheme(photon, kind);
    QuadratureSampler sampler(state);
    EstimateOptions opt;
    opt.shots = 40000;
    opt.repetitions = 6;
    opt.seed = 11 + static_cast<int>(kind);
    const EstimationReport rep = estimate(photon, s, sampler, opt);
    REQUIRE(std::abs(rep.mean - exact) < 5.0 * rep.std_across_reps / std::sqrt(6.0) + 1e-12);
    const double formula = exact_variance_px(photon, s, state);
    REQUIRE(rep.shot_variance == Catch::Approx(formula).epsilon(0.10));
  }
}

TEST_CASE("closed-form variance cap holds for uniform qudit randomization") {
  Rng rng(504);
  for (int d : {2, 3}) {
    for (int rep = 0; rep < 10; ++rep) {
      const Observable o = random_ggb_observable(2, d, 5, 2, rng);
      const QuditState psi = random_qudit_state(2, d, rng);
      const MeasurementScheme s = make_cs_uniform(o);
      const double var = exact_variance_qudit(o, s, psi);
      const double bound = ggb_cs_variance_bound(o, operator_norm_inf(o));
      REQUIRE(var <= bound * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("projection voids out-of-range terms") {
  Observable o;
  o.basis = Basis::px;
  o.n = 1;
  o.terms.push_back({{}, {PXExp{2, 0}}, 1.0});
  o = with_identity(o, 2.5);
  const GaussianState vac = vacuum_state(1);
  QuadratureSampler sampler(vac);
  const MeasurementScheme s = make_cs_uniform(o);
  EstimateOptions opt;
  opt.shots = 500;
  opt.projection.bound = 1e-9;  // everything lands outside
  const EstimationReport rep = estimate(o, s, sampler, opt);
  REQUIRE(rep.mean == Catch::Approx(2.5));
  REQUIRE(rep.shot_variance == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("estimates are deterministic in the seed and thread count") {
  Rng rng(505);
  const Observable o = random_ggb_observable(2, 3, 5, 2, rng);
  const QuditState psi = random_qudit_state(2, 3, rng);
  const MeasurementScheme s = make_ogm(o);
  QuditMeasurementSampler sampler(psi);
  EstimateOptions opt;
  opt.shots = 2000;
  opt.repetitions = 4;
  opt.seed = 99;
  const EstimationReport a = estimate(o, s, sampler, opt);
  const EstimationReport b = estimate(o, s, sampler, opt);
  opt.threads = 2;
  const EstimationReport c = estimate(o, s, sampler, opt);
  for (int r = 0; r < 4; ++r) {
    REQUIRE(a.rep_means[r] == b.rep_means[r]);
    REQUIRE(a.rep_means[r] == c.rep_means[r]);
  }
}

TEST_CASE("identity-only observables short-circuit") {
  Observable o;
  o.basis = Basis::px;
  o.n = 2;
  o.terms.push_back({{}, {PXExp{}, PXExp{}}, 1.25});
  validate(o);
  const GaussianState vac = vacuum_state(2);
  for (SchemeKind kind : {SchemeKind::importance_l1, SchemeKind::ogm}) {
    const MeasurementScheme s = make_scheme(o, kind);
    REQUIRE(s.settings.empty());
    QuadratureSampler sampler(vac);
    EstimateOptions opt;
    opt.shots = 100;
    opt.repetitions = 2;
    const EstimationReport rep = estimate(o, s, sampler, opt);
    REQUIRE(rep.mean == Catch::Approx(1.25));
    REQUIRE(rep.std_across_reps == 0.0);
  }
}

TEST_CASE("scheme construction rejects mismatched estimation inputs") {
  Rng rng(506);
  const Observable o = random_ggb_observable(2, 3, 4, 2, rng);
  const MeasurementScheme s = make_cs_uniform(o);
  const QuditState psi = random_qudit_state(2, 3, rng);
  QuditMeasurementSampler sampler(psi);
  EstimateOptions opt;
  opt.shots = 0;
  REQUIRE_THROWS_AS(estimate(o, s, sampler, opt), std::invalid_argument);
  opt.shots = 10;
  Observable other = random_px_observable(2, 3, 1, 1, rng);
  REQUIRE_THROWS_AS(estimate(other, s, sampler, opt), std::invalid_argument);
}

TEST_CASE("label sampling stays in range and importance excludes zero terms") {
  Rng rng(507);
  Observable o = random_px_observable(2, 4, 1, 2, rng);
  o.terms[1].coeff = 0.0;
  const MeasurementScheme s = make_importance_l1(o);
  for (std::size_t i = 0; i < s.settings.size(); ++i)
    for (const auto& [j, f] : s.covered[i]) REQUIRE(o.terms[j].coeff != 0.0);
  const MeasurementScheme cs = make_cs_uniform(o);
  std::vector<int> labels;
  for (int t = 0; t < 200; ++t) {
    REQUIRE(sample_setting(cs, rng, labels) == -1);
    for (int l : labels) {
      REQUIRE(l >= 1);
      REQUIRE(l <= 2);
    }
  }
}
