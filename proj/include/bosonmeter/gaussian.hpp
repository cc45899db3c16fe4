#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "bosonmeter/observable.hpp"
#include "bosonmeter/rng.hpp"

namespace bosonmeter {

using MatrixXd = Eigen::MatrixXd;
using VectorXd = Eigen::VectorXd;

// Gaussian state over n modes, quadrature order (x1, p1, ..., xn, pn) with
// x = b + b^dag, so the vacuum has mean 0 and covariance I.
struct GaussianState {
  int n = 0;
  VectorXd mean;
  MatrixXd cov;
};

inline int quad_index(int mode, bool momentum) { return 2 * mode + (momentum ? 1 : 0); }

inline GaussianState vacuum_state(int n) {
  GaussianState s;
  s.n = n;
  s.mean = VectorXd::Zero(2 * n);
  s.cov = MatrixXd::Identity(2 * n, 2 * n);
  return s;
}

// Two-mode squeezed vacuum: diag blocks nu*I, off blocks sqrt(nu^2-1)*diag(1,-1)
// with nu = cosh(2r); per-mode photon number sinh(r)^2.
inline GaussianState tmsv_state(double r) {
  GaussianState s = vacuum_state(2);
  const double nu = std::cosh(2.0 * r);
  const double c = std::sqrt(nu * nu - 1.0);
  s.cov(0, 0) = s.cov(1, 1) = s.cov(2, 2) = s.cov(3, 3) = nu;
  s.cov(0, 2) = s.cov(2, 0) = c;
  s.cov(1, 3) = s.cov(3, 1) = -c;
  return s;
}

// n independently squeezed modes: <x^2> = exp(-2r), <p^2> = exp(2r).
inline GaussianState equal_squeezed_state(int n, double r) {
  GaussianState s = vacuum_state(n);
  for (int i = 0; i < n; ++i) {
    s.cov(2 * i, 2 * i) = std::exp(-2.0 * r);
    s.cov(2 * i + 1, 2 * i + 1) = std::exp(2.0 * r);
  }
  return s;
}

// Symplectic spectrum: moduli of the eigenvalues of Omega V (pure state: all 1).
inline VectorXd symplectic_eigenvalues(const MatrixXd& cov) {
  const int dim = static_cast<int>(cov.rows());
  MatrixXd omega = MatrixXd::Zero(dim, dim);
  for (int i = 0; i + 1 < dim; i += 2) {
    omega(i, i + 1) = 1.0;
    omega(i + 1, i) = -1.0;
  }
  Eigen::EigenSolver<MatrixXd> solver(omega * cov);
  std::vector<double> nus;
  for (int i = 0; i < dim; ++i) {
    const double v = std::abs(solver.eigenvalues()[i].imag());
    nus.push_back(v);
  }
  std::sort(nus.begin(), nus.end());
  VectorXd out(dim / 2);
  for (int i = 0; i < dim / 2; ++i) out[i] = nus[dim / 2 + i];  // each nu appears twice
  return out;
}

// Random covariance A A^T rescaled to the requested trace; zero mean. With
// enforce_physical the matrix is scaled up (if needed) until the smallest
// symplectic eigenvalue reaches 1, which overrides the trace normalization.
inline GaussianState random_gaussian_state(int n, std::uint64_t seed, double trace_norm, bool enforce_physical = false) {
  if (trace_norm <= 0.0) throw std::invalid_argument("random_gaussian_state: trace must be positive");
  GaussianState s = vacuum_state(n);
  Rng rng(seed);
  MatrixXd a(2 * n, 2 * n);
  for (int i = 0; i < 2 * n; ++i)
    for (int j = 0; j < 2 * n; ++j) a(i, j) = rng.normal();
  s.cov = a * a.transpose();
  s.cov *= trace_norm / s.cov.trace();
  if (enforce_physical) {
    const double nu_min = symplectic_eigenvalues(s.cov).minCoeff();
    if (nu_min < 1.0) s.cov *= 1.0 / nu_min;
  }
  return s;
}

// Classical Gaussian displacement channel on one mode's x quadrature:
// shifts the mean by a0 and widens <x^2> by s^2.
inline void apply_shift_channel(GaussianState& s, int mode, double a0, double sigma) {
  if (mode < 0 || mode >= s.n) throw std::invalid_argument("apply_shift_channel: mode out of range");
  s.mean[2 * mode] += a0;
  s.cov(2 * mode, 2 * mode) += sigma * sigma;
}

// Quadrature selection labels per mode: 0 skip, 1 x, 2 p.
inline std::vector<int> selected_quadratures(const std::vector<int>& labels) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    if (labels[i] == 0) continue;
    if (labels[i] != 1 && labels[i] != 2) throw std::invalid_argument("quadrature labels must be 0, 1, or 2");
    idx.push_back(quad_index(i, labels[i] == 2));
  }
  return idx;
}

// Cholesky with diagonal jitter escalation 1e-12 .. 1e-8 for marginals that
// are only numerically semidefinite.
inline MatrixXd cholesky_with_jitter(const MatrixXd& m) {
  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    MatrixXd trial = m;
    if (jitter > 0.0) trial += jitter * MatrixXd::Identity(m.rows(), m.cols());
    Eigen::LLT<MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter = jitter == 0.0 ? 1e-12 : jitter * 10.0;
    if (jitter > 1e-8 * 1.5) break;
  }
  throw std::runtime_error("cholesky_with_jitter: covariance not positive semidefinite");
}

// Joint sampler for one quadrature per selected mode; the commuting set's
// outcome law is the Gaussian marginal of (mean, cov) on the selected rows.
// Factors are cached per measurement string.
class QuadratureSampler {
 public:
  explicit QuadratureSampler(const GaussianState& state, std::size_t cache_cap = 4096)
      : state_(state), cache_cap_(cache_cap) {}

  const GaussianState& state() const { return state_; }

  // outcomes[i] is the measured value on mode i (0.0 on skipped modes).
  void sample(const std::vector<int>& labels, Rng& rng, std::vector<double>& outcomes) {
    const Prepared& prep = prepare(labels);
    outcomes.assign(state_.n, 0.0);
    const int m = static_cast<int>(prep.modes.size());
    scratch_.resize(m);
    for (int i = 0; i < m; ++i) scratch_[i] = rng.normal();
    for (int i = 0; i < m; ++i) {
      double v = prep.mean[i];
      for (int j = 0; j <= i; ++j) v += prep.chol(i, j) * scratch_[j];
      outcomes[prep.modes[i]] = v;
    }
  }

 private:
  struct Prepared {
    std::vector<int> modes;
    VectorXd mean;
    MatrixXd chol;
  };

  const Prepared& prepare(const std::vector<int>& labels) {
    std::string key;
    key.reserve(labels.size());
    for (int l : labels) key += static_cast<char>('0' + l);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    if (cache_.size() >= cache_cap_) cache_.clear();
    const std::vector<int> idx = selected_quadratures(labels);
    Prepared prep;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i)
      if (labels[i] != 0) prep.modes.push_back(i);
    const int m = static_cast<int>(idx.size());
    prep.mean.resize(m);
    MatrixXd sub(m, m);
    for (int i = 0; i < m; ++i) {
      prep.mean[i] = state_.mean[idx[i]];
      for (int j = 0; j < m; ++j) sub(i, j) = state_.cov(idx[i], idx[j]);
    }
    prep.chol = m > 0 ? cholesky_with_jitter(sub) : MatrixXd::Zero(0, 0);
    return cache_.emplace(std::move(key), std::move(prep)).first->second;
  }

  const GaussianState& state_;
  std::size_t cache_cap_;
  std::unordered_map<std::string, Prepared> cache_;
  std::vector<double> scratch_;
};

inline std::vector<double> sample_quadratures(const GaussianState& state, const std::vector<int>& labels, Rng& rng) {
  if (static_cast<int>(labels.size()) != state.n) throw std::invalid_argument("sample_quadratures: label length mismatch");
  QuadratureSampler sampler(state, 1);
  std::vector<double> out;
  sampler.sample(labels, rng, out);
  return out;
}

namespace detail {

// E[prod z_i^{e_i}] for jointly Gaussian z with mean mu and covariance sigma,
// by the moment recursion E[z_i g] = mu_i E[g] + sum_k sigma_ik E[dg/dz_k].
class GaussianMoments {
 public:
  GaussianMoments(const VectorXd& mean, const MatrixXd& cov) : mean_(mean), cov_(cov) {}

  double moment(std::vector<int> exps) {
    return moment_rec(exps);
  }

 private:
  double moment_rec(std::vector<int>& exps) {
    int pivot = -1;
    for (int i = 0; i < static_cast<int>(exps.size()); ++i)
      if (exps[i] > 0) {
        pivot = i;
        break;
      }
    if (pivot < 0) return 1.0;
    const std::string key = key_of(exps);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    exps[pivot] -= 1;
    double acc = mean_[pivot] != 0.0 ? mean_[pivot] * moment_rec(exps) : 0.0;
    for (int k = 0; k < static_cast<int>(exps.size()); ++k) {
      if (exps[k] == 0 || cov_(pivot, k) == 0.0) continue;
      const int mult = exps[k];
      exps[k] -= 1;
      acc += cov_(pivot, k) * mult * moment_rec(exps);
      exps[k] += 1;
    }
    exps[pivot] += 1;
    memo_.emplace(key, acc);
    return acc;
  }

  static std::string key_of(const std::vector<int>& exps) {
    std::string k;
    k.reserve(exps.size() * 2);
    for (int e : exps) {
      k += static_cast<char>('0' + e);
      k += ',';
    }
    return k;
  }

  const VectorXd& mean_;
  const MatrixXd& cov_;
  std::unordered_map<std::string, double> memo_;
};

}  // namespace detail

// Moment of a quadrature monomial given per-quadrature exponents (length 2n).
inline double gaussian_moment(const GaussianState& s, const std::vector<int>& quad_exponents) {
  if (static_cast<int>(quad_exponents.size()) != 2 * s.n) throw std::invalid_argument("gaussian_moment: exponent length mismatch");
  detail::GaussianMoments gm(s.mean, s.cov);
  return gm.moment(quad_exponents);
}

// tr(rho Q) for a p-x string with one quadrature per mode: the operator
// product of commuting quadratures, so the Wick/Isserlis value applies.
inline double wick_moment(const GaussianState& s, const std::vector<PXExp>& px) {
  if (static_cast<int>(px.size()) != s.n) throw std::invalid_argument("wick_moment: string length mismatch");
  std::vector<int> exps(2 * s.n, 0);
  for (int i = 0; i < s.n; ++i) {
    if (px[i].l > 0 && px[i].m > 0) throw std::invalid_argument("wick_moment: mixed x and p powers on one mode");
    if (px[i].l > 0) exps[2 * i] = px[i].l;
    if (px[i].m > 0) exps[2 * i + 1] = px[i].m;
  }
  return gaussian_moment(s, exps);
}

// tr(rho Q_a Q_b) for two pure strings whose quadrature choices agree on the
// shared support (exponents add there). Conflicting quadratures would make
// the product non-commuting; the framework never pairs such terms (g = 0).
inline double pair_wick_moment(const GaussianState& s, const Term& a, const Term& b) {
  std::vector<int> exps(2 * s.n, 0);
  for (int i = 0; i < s.n; ++i) {
    const PXExp ea = a.px[i];
    const PXExp eb = b.px[i];
    if ((ea.l > 0 && eb.m > 0) || (ea.m > 0 && eb.l > 0))
      throw std::invalid_argument("pair_wick_moment: conflicting quadratures on one mode");
    exps[2 * i] = ea.l + eb.l;
    exps[2 * i + 1] = ea.m + eb.m;
  }
  return gaussian_moment(s, exps);
}

inline double expectation(const GaussianState& s, const Observable& o) {
  if (o.basis != Basis::px) throw std::invalid_argument("expectation: px observables only");
  if (o.n != s.n) throw std::invalid_argument("expectation: mode count mismatch");
  double acc = 0.0;
  for (const auto& t : o.terms) acc += t.coeff * wick_moment(s, t.px);
  return acc;
}

// O = (1/n) sum_i (x_i^2 + p_i^2 - 2)/4: the mean photon number per mode.
inline Observable mean_photon_observable(int n) {
  Observable o;
  o.basis = Basis::px;
  o.n = n;
  const double w = 1.0 / (4.0 * n);
  for (int i = 0; i < n; ++i) {
    Term tx;
    tx.px.assign(n, PXExp{});
    tx.px[i].l = 2;
    tx.coeff = w;
    o.terms.push_back(tx);
    Term tp;
    tp.px.assign(n, PXExp{});
    tp.px[i].m = 2;
    tp.coeff = w;
    o.terms.push_back(tp);
  }
  Term id;
  id.px.assign(n, PXExp{});
  id.coeff = -0.5;
  o.terms.push_back(id);
  return o;
}

// Detector-range model: outcomes beyond the bound void a term's contribution
// for the shot (the estimator then targets tr(Q P rho P) instead of tr(Q rho)).
struct ProjectionSpec {
  double bound = 0.0;                 // shared bound B (<= 0 disables)
  std::vector<double> per_mode;       // optional per-mode override, length n

  bool enabled() const { return bound > 0.0 || !per_mode.empty(); }

  double mode_bound(int i) const {
    if (!per_mode.empty()) return per_mode.at(i);
    return bound;
  }
};

// Independent zero-mean truncated Gaussian detector noise per measured mode.
// bound <= 0 defaults to 5 sigma, where the truncation correction to the
// variance is negligible.
struct NoiseModel {
  double sigma = 0.0;
  double bound = 0.0;

  double effective_bound() const { return bound > 0.0 ? bound : 5.0 * sigma; }
  bool enabled() const { return sigma > 0.0; }
};

inline void add_noise(std::vector<double>& outcomes, const std::vector<int>& labels, const NoiseModel& noise, Rng& rng) {
  if (!noise.enabled()) return;
  const double b = noise.effective_bound();
  for (std::size_t i = 0; i < outcomes.size(); ++i)
    if (labels[i] != 0) outcomes[i] += rng.truncated_normal(noise.sigma, b);
}

// tr(rho0 rho1) of two Gaussian states (phase-space overlap).
inline double gaussian_overlap(const GaussianState& a, const GaussianState& b) {
  if (a.n != b.n) throw std::invalid_argument("gaussian_overlap: mode count mismatch");
  const MatrixXd sum = a.cov + b.cov;
  const VectorXd delta = a.mean - b.mean;
  Eigen::LLT<MatrixXd> llt(sum);
  if (llt.info() != Eigen::Success) throw std::runtime_error("gaussian_overlap: singular covariance sum");
  const double quad = delta.dot(llt.solve(delta));
  double logdet = 0.0;
  for (int i = 0; i < sum.rows(); ++i) logdet += std::log(llt.matrixL()(i, i));
  // det(sum) = prod L_ii^2; overlap = 2^n exp(-quad/2)/sqrt(det).
  return std::exp(a.n * std::log(2.0) - 0.5 * quad - logdet);
}

inline double gaussian_purity(const GaussianState& s) {
  Eigen::LLT<MatrixXd> llt(s.cov);
  if (llt.info() != Eigen::Success) throw std::runtime_error("gaussian_purity: covariance not positive definite");
  double logdet = 0.0;
  for (int i = 0; i < s.cov.rows(); ++i) logdet += std::log(llt.matrixL()(i, i));
  return std::exp(-logdet);
}

}  // namespace bosonmeter
