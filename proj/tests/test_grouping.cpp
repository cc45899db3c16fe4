#include <catch2/catch_amalgamated.hpp>

#include "bosonmeter/experiments.hpp"
#include "bosonmeter/grouping.hpp"
#include "bosonmeter/scheme.hpp"

using namespace bosonmeter;

namespace {

Observable px_obs(int n, std::vector<std::pair<std::vector<PXExp>, double>> terms) {
  Observable o;
  o.basis = Basis::px;
  o.n = n;
  for (auto& [px, c] : terms) o.terms.push_back({{}, px, c});
  validate(o);
  return o;
}

}  // namespace

TEST_CASE("greedy grouping joins all compatible groups and widens labels") {
  // x0 x1 (|c|=1) opens group A; p0 (0.9) conflicts on mode 0, opens B;
  // x1 (0.1) fits both, widening B's representative to (p, x).
  const Observable o = px_obs(2, {{{PXExp{1, 0}, PXExp{1, 0}}, 1.0},
                                  {{PXExp{0, 1}, PXExp{0, 0}}, 0.9},
                                  {{PXExp{0, 0}, PXExp{2, 0}}, 0.1}});
  const std::vector<Group> groups = greedy_group(o);
  REQUIRE(groups.size() == 2);
  REQUIRE(groups[0].labels == std::vector<int>{1, 1});
  REQUIRE(groups[1].labels == std::vector<int>{2, 1});
  REQUIRE(groups[0].members == std::vector<int>{0, 2});
  REQUIRE(groups[1].members == std::vector<int>{1, 2});

  const MeasurementScheme s = make_ogm(o);
  REQUIRE(s.term_groups[0] == std::vector<int>{0});
  REQUIRE(s.term_groups[1] == std::vector<int>{1});
  REQUIRE(s.term_groups[2] == std::vector<int>{0, 1});
  REQUIRE(s.term_cover_weight[2] == Catch::Approx(1.0));  // covered by every setting
}

TEST_CASE("identity terms take no group") {
  Observable o = px_obs(2, {{{PXExp{0, 0}, PXExp{0, 0}}, 2.0}, {{PXExp{1, 0}, PXExp{0, 0}}, 1.0}});
  const std::vector<Group> groups = greedy_group(o);
  REQUIRE(groups.size() == 1);
  REQUIRE(groups[0].members == std::vector<int>{1});
}

TEST_CASE("simplex projection handles interior, vertex, and negative inputs") {
  REQUIRE(project_simplex({0.5, 0.5}) == std::vector<double>{0.5, 0.5});
  const auto v = project_simplex({2.0, 0.0});
  REQUIRE(v[0] == Catch::Approx(1.0));
  REQUIRE(v[1] == Catch::Approx(0.0));
  const auto w = project_simplex({0.3, -0.1});
  REQUIRE(w[0] == Catch::Approx(0.7));
  REQUIRE(w[1] == Catch::Approx(0.3));
  const auto u = project_simplex({-5.0, -5.0, -5.0});
  for (double x : u) REQUIRE(x == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("disjoint two-group distribution lands on the closed-form optimum") {
  // l(K) = 1/K1 + 4/K2 is minimized on the simplex at K = (1/3, 2/3).
  const std::vector<double> weights = {1.0, 4.0};
  const std::vector<std::vector<int>> cover = {{0}, {1}};
  const DistributionResult res = optimize_distribution(weights, cover, 2);
  REQUIRE(res.probs[0] == Catch::Approx(1.0 / 3.0).margin(1e-6));
  REQUIRE(res.probs[1] == Catch::Approx(2.0 / 3.0).margin(1e-6));
  REQUIRE(res.objective == Catch::Approx(9.0).margin(1e-8));
  REQUIRE(res.kkt_residual < 1e-5);
}

TEST_CASE("optimizer never loses to the uniform distribution") {
  Rng rng(401);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 4;
    const Observable o = random_px_observable(n, 12, 2, 2, rng);
    const std::vector<Group> groups = greedy_group(o);
    const int ng = static_cast<int>(groups.size());
    std::vector<double> weights(o.terms.size());
    std::vector<std::vector<int>> cover(o.terms.size());
    for (std::size_t j = 0; j < o.terms.size(); ++j) {
      weights[j] = o.terms[j].coeff * o.terms[j].coeff;
      const auto labels = term_labels(o, o.terms[j]);
      for (int g = 0; g < ng; ++g)
        if (labels_cover(labels, groups[g].labels)) cover[j].push_back(g);
    }
    const DistributionResult res = optimize_distribution(weights, cover, ng);
    double uniform = 0.0;
    for (std::size_t j = 0; j < o.terms.size(); ++j) {
      double c = 0.0;
      for (int g : cover[j]) c += 1.0 / ng;
      if (weights[j] > 0.0) uniform += weights[j] / c;
    }
    REQUIRE(res.objective <= uniform + 1e-9);
    REQUIRE(res.kkt_residual < 1e-3);
    double total = 0.0;
    for (double p : res.probs) {
      REQUIRE(p >= -1e-12);
      total += p;
    }
    REQUIRE(total == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("weighted term without coverage is rejected") {
  REQUIRE_THROWS_AS(optimize_distribution({1.0}, {{}}, 2), std::invalid_argument);
}
