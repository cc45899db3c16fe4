#include <catch2/catch_amalgamated.hpp>

#include "bosonmeter/experiments.hpp"
#include "bosonmeter/shadow.hpp"

using namespace bosonmeter;

TEST_CASE("observable trace reads the identity coefficient") {
  Observable o;
  o.basis = Basis::ggb;
  o.n = 2;
  o.d = 3;
  o.terms.push_back({{0, 0}, {}, 0.25});
  o.terms.push_back({{1, 2}, {}, 1.5});
  REQUIRE(observable_trace(o) == Catch::Approx(0.25 * 9.0));
  o.terms.erase(o.terms.begin());
  REQUIRE(observable_trace(o) == 0.0);
}

TEST_CASE("average shadow state converges to the density matrix") {
  Rng rng(301);
  const QuditState psi = random_qudit_state(1, 3, rng);
  const MatrixXcd rho = psi.amp * psi.amp.adjoint();
  const MatrixXcd avg = average_shadow_state(psi, 20000, rng);
  REQUIRE((avg - rho).cwiseAbs().maxCoeff() < 0.06);
  REQUIRE(std::abs(avg.trace() - cxd(1, 0)) < 1e-9);  // every shadow has unit trace
}

TEST_CASE("shadow estimates are unbiased on random observables") {
  Rng rng(302);
  auto check = [&](int n, int d, std::size_t samples) {
    const QuditState psi = random_qudit_state(n, d, rng);
    const Observable o = random_ggb_observable(n, d, 4, std::min(n, 2), rng);
    const double exact = exact_expectation(psi, o);
    const ShadowReport rep = shadow_estimate(o, psi, samples, rng);
    const double se = std::sqrt(rep.variance / static_cast<double>(samples));
    REQUIRE(std::abs(rep.mean - exact) < 5.0 * se + 1e-9);
  };
  check(1, 3, 20000);
  check(2, 3, 8000);
  check(1, 5, 8000);
}

TEST_CASE("shadow of a stabilizer state reproduces exact expectations fast") {
  // GHZ diagonal observable: tr(O rho) known in closed form.
  Rng rng(303);
  const QuditState ghz = ghz_state(2, 3);
  Observable o;
  o.basis = Basis::ggb;
  o.n = 2;
  o.d = 3;
  o.terms.push_back({{7, 7}, {}, 1.0});  // first diagonal on both modes
  o.terms.push_back({{0, 0}, {}, 0.5});
  const double exact = exact_expectation(ghz, o);
  // <d1 x d1> on GHZ: (1/3)(1 + 1 + 0) = 2/3.
  REQUIRE(exact == Catch::Approx(2.0 / 3.0 + 0.5));
  const ShadowReport rep = shadow_estimate(o, ghz, 20000, rng);
  REQUIRE(std::abs(rep.mean - exact) < 5.0 * std::sqrt(rep.variance / 20000.0));
}
