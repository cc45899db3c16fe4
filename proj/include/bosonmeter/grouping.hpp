#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bosonmeter/observable.hpp"

namespace bosonmeter {

struct Group {
  std::vector<int> labels;   // per-mode label of the representative measurement (0 = skip)
  std::vector<int> members;  // term indices absorbed during the greedy pass
};

// Overlapped greedy grouping: terms visited in descending |coeff| (ties by
// input order) join every group whose labels are consistent with theirs on
// their support; each join widens the group's representative to the union
// support. A term compatible with nothing opens a new group. Identity terms
// are constants and take no group.
inline std::vector<Group> greedy_group(const Observable& o) {
  std::vector<int> order;
  for (int j = 0; j < static_cast<int>(o.terms.size()); ++j)
    if (!term_is_identity(o, o.terms[j])) order.push_back(j);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(o.terms[a].coeff) > std::abs(o.terms[b].coeff);
  });

  std::vector<Group> groups;
  for (int j : order) {
    const std::vector<int> labels = term_labels(o, o.terms[j]);
    bool joined = false;
    for (auto& g : groups) {
      bool ok = true;
      for (int i = 0; i < o.n && ok; ++i)
        if (labels[i] != 0 && g.labels[i] != 0 && g.labels[i] != labels[i]) ok = false;
      if (!ok) continue;
      for (int i = 0; i < o.n; ++i)
        if (labels[i] != 0) g.labels[i] = labels[i];
      g.members.push_back(j);
      joined = true;
    }
    if (!joined) {
      Group g;
      g.labels = labels;
      g.members.push_back(j);
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

// Euclidean projection onto the probability simplex (sort-based).
inline std::vector<double> project_simplex(std::vector<double> v) {
  const int m = static_cast<int>(v.size());
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  int rho = 0;
  for (int i = 0; i < m; ++i) {
    css += u[i];
    const double t = (css - 1.0) / (i + 1);
    if (u[i] - t > 0.0) {
      rho = i + 1;
      theta = t;
    }
  }
  (void)rho;
  for (double& x : v) x = std::max(0.0, x - theta);
  return v;
}

struct DistributionResult {
  std::vector<double> probs;   // K over groups
  double objective = 0.0;      // l(K) at the returned point
  double kkt_residual = 0.0;   // first-order optimality gap
  int iterations = 0;
};

// Minimizes l(K) = sum_j w_j / c_j(K) with c_j = sum_{g covering j} K_g over
// the simplex: projected gradient with step halving on non-decrease. Convex,
// so the first-order conditions certify the optimum; iteration stops once the
// KKT residual falls below tol (or the line search hits float resolution).
inline DistributionResult optimize_distribution(const std::vector<double>& weights_sq,
                                                const std::vector<std::vector<int>>& term_groups,
                                                int num_groups, int max_iters = 100000,
                                                double tol = 1e-8) {
  if (num_groups <= 0) throw std::invalid_argument("optimize_distribution: no groups");
  const int m = static_cast<int>(weights_sq.size());
  for (int j = 0; j < m; ++j)
    if (weights_sq[j] > 0.0 && term_groups[j].empty())
      throw std::invalid_argument("optimize_distribution: term covered by no group");

  auto objective = [&](const std::vector<double>& k) {
    double l = 0.0;
    for (int j = 0; j < m; ++j) {
      if (weights_sq[j] == 0.0) continue;
      double c = 0.0;
      for (int g : term_groups[j]) c += k[g];
      if (c <= 0.0) return std::numeric_limits<double>::infinity();
      l += weights_sq[j] / c;
    }
    return l;
  };
  auto gradient = [&](const std::vector<double>& k, std::vector<double>& grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int j = 0; j < m; ++j) {
      if (weights_sq[j] == 0.0) continue;
      double c = 0.0;
      for (int g : term_groups[j]) c += k[g];
      const double pull = -weights_sq[j] / (c * c);
      for (int g : term_groups[j]) grad[g] += pull;
    }
  };

  // KKT residual: on the simplex the optimum has grad_g = lambda on the
  // support of K and grad_g >= lambda off it.
  auto kkt_residual = [&](const std::vector<double>& k, const std::vector<double>& grad) {
    double lambda = 0.0;
    double active_mass = 0.0;
    for (int g = 0; g < num_groups; ++g)
      if (k[g] > 1e-12) {
        lambda += grad[g] * k[g];
        active_mass += k[g];
      }
    lambda /= std::max(active_mass, 1e-300);
    double viol = 0.0;
    const double scale = std::max(std::abs(lambda), 1.0);
    for (int g = 0; g < num_groups; ++g) {
      if (k[g] > 1e-12)
        viol = std::max(viol, std::abs(grad[g] - lambda) / scale);
      else
        viol = std::max(viol, std::max(0.0, lambda - grad[g]) / scale);
    }
    return viol;
  };

  DistributionResult res;
  res.probs.assign(num_groups, 1.0 / num_groups);
  double l = objective(res.probs);
  std::vector<double> grad(num_groups), trial(num_groups);
  double step = 1.0;
  int it = 0;
  for (; it < max_iters; ++it) {
    gradient(res.probs, grad);
    if (kkt_residual(res.probs, grad) <= tol) break;
    bool moved = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (int g = 0; g < num_groups; ++g) trial[g] = res.probs[g] - step * grad[g];
      trial = project_simplex(std::move(trial));
      const double lt = objective(trial);
      if (lt < l) {
        res.probs = trial;
        l = lt;
        step *= 2.0;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  res.objective = l;
  res.iterations = it;
  gradient(res.probs, grad);
  res.kkt_residual = kkt_residual(res.probs, grad);
  return res;
}

}  // namespace bosonmeter
