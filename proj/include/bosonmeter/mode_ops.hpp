#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bosonmeter/ggb.hpp"

namespace bosonmeter {

// Truncated mode operators in the d lowest Fock levels, convention x = b + b†
// (vacuum variance <x^2> = 1, so [x, p] = 2i away from the truncation edge).

inline MatrixXcd annihilation_op(int d) {
  MatrixXcd a = MatrixXcd::Zero(d, d);
  for (int s = 1; s < d; ++s) a(s - 1, s) = std::sqrt(static_cast<double>(s));
  return a;
}

inline MatrixXcd position_op(int d) {
  const MatrixXcd a = annihilation_op(d);
  return a + a.adjoint();
}

inline MatrixXcd momentum_op(int d) {
  const MatrixXcd a = annihilation_op(d);
  return cxd(0.0, -1.0) * (a - a.adjoint());
}

inline MatrixXcd number_op(int d) {
  MatrixXcd m = MatrixXcd::Zero(d, d);
  for (int s = 0; s < d; ++s) m(s, s) = static_cast<double>(s);
  return m;
}

// Vibrational Hamiltonian description: harmonic frequencies per mode plus
// anharmonic couplings, each a product of displacement operators. Repeated
// mode indices in a coupling encode powers ([0,0,1] means q0^2 q1).
struct VibrationalCoupling {
  std::vector<int> modes;
  double coefficient = 0.0;
};

enum class QuadratureConvention { x_over_sqrt2, x_plain };

struct VibrationalConfig {
  std::vector<double> frequencies;
  std::vector<VibrationalCoupling> couplings;
  QuadratureConvention quadrature = QuadratureConvention::x_over_sqrt2;
};

inline Eigen::Index hilbert_dim(int n, int d) {
  double dim = std::pow(static_cast<double>(d), n);
  if (dim > 4096.0 + 0.5) throw std::invalid_argument("hilbert_dim: d^n exceeds 4096");
  return static_cast<Eigen::Index>(std::llround(dim));
}

// H = sum_i w_i N_i + sum_c k_c * prod q_i, with q = x/sqrt(2) or q = x.
inline MatrixXcd build_vibrational_hamiltonian(const VibrationalConfig& cfg, int d) {
  const int n = static_cast<int>(cfg.frequencies.size());
  if (n <= 0) throw std::invalid_argument("vibrational hamiltonian: no modes");
  if (d < 2) throw std::invalid_argument("vibrational hamiltonian: d must be >= 2");
  const Eigen::Index dim = hilbert_dim(n, d);

  const double qscale = cfg.quadrature == QuadratureConvention::x_over_sqrt2 ? 1.0 / std::sqrt(2.0) : 1.0;
  const MatrixXcd q1 = qscale * position_op(d);
  const MatrixXcd num = number_op(d);
  const MatrixXcd eye = MatrixXcd::Identity(d, d);

  auto embed = [&](const std::map<int, MatrixXcd>& locals) {
    MatrixXcd acc = MatrixXcd::Identity(1, 1);
    for (int i = 0; i < n; ++i) {
      auto it = locals.find(i);
      acc = kron(acc, it == locals.end() ? eye : it->second).eval();
    }
    return acc;
  };

  MatrixXcd h = MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < n; ++i) {
    if (cfg.frequencies[i] != 0.0) h += cfg.frequencies[i] * embed({{i, num}});
  }
  for (const auto& c : cfg.couplings) {
    if (c.modes.empty()) throw std::invalid_argument("vibrational hamiltonian: empty coupling");
    std::map<int, int> powers;
    for (int m : c.modes) {
      if (m < 0 || m >= n) throw std::invalid_argument("vibrational hamiltonian: coupling mode out of range");
      ++powers[m];
    }
    std::map<int, MatrixXcd> locals;
    for (const auto& [mode, p] : powers) {
      MatrixXcd qp = MatrixXcd::Identity(d, d);
      for (int t = 0; t < p; ++t) qp = (qp * q1).eval();
      locals.emplace(mode, std::move(qp));
    }
    h += c.coefficient * embed(locals);
  }
  return h;
}

}  // namespace bosonmeter
