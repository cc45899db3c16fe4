#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "bosonmeter/ggb.hpp"
#include "bosonmeter/mode_ops.hpp"
#include "bosonmeter/observable.hpp"
#include "bosonmeter/pauli.hpp"
#include "bosonmeter/rng.hpp"

namespace bosonmeter {

// Dense pure-state simulator for n qudits of dimension d. Mode 0 is the most
// significant digit of the amplitude index.
struct QuditState {
  int d = 0;
  int n = 0;
  VectorXcd amp;
};

inline QuditState make_qudit_state(int n, int d) {
  QuditState s;
  s.d = d;
  s.n = n;
  s.amp = VectorXcd::Zero(hilbert_dim(n, d));
  return s;
}

inline QuditState basis_state(int n, int d, Eigen::Index index) {
  QuditState s = make_qudit_state(n, d);
  s.amp[index] = 1.0;
  return s;
}

inline QuditState ghz_state(int n, int d) {
  QuditState s = make_qudit_state(n, d);
  Eigen::Index stride = 0;
  for (int i = 0; i < n; ++i) stride = stride * d + 1;
  const double a = 1.0 / std::sqrt(static_cast<double>(d));
  for (int v = 0; v < d; ++v) s.amp[stride * v] = a;
  return s;
}

// Lowest eigenvector of a Hermitian matrix; ties resolve to the solver's
// first column, which is deterministic for a fixed input.
inline QuditState ground_state(const MatrixXcd& h, int n, int d) {
  if (h.rows() != hilbert_dim(n, d)) throw std::invalid_argument("ground_state: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(h);
  if (solver.info() != Eigen::Success) throw std::runtime_error("ground_state: eigensolver failed");
  QuditState s;
  s.d = d;
  s.n = n;
  s.amp = solver.eigenvectors().col(0);
  return s;
}

// Applies a d x d matrix to one mode of the amplitude vector.
inline void apply_local_matrix(VectorXcd& amp, int n, int d, int mode, const MatrixXcd& u) {
  Eigen::Index inner = 1;
  for (int i = mode + 1; i < n; ++i) inner *= d;
  const Eigen::Index outer = amp.size() / (inner * d);
  VectorXcd scratch(d);
  for (Eigen::Index o = 0; o < outer; ++o) {
    for (Eigen::Index in = 0; in < inner; ++in) {
      const Eigen::Index base = o * inner * d + in;
      for (int a = 0; a < d; ++a) scratch[a] = amp[base + inner * a];
      for (int a = 0; a < d; ++a) {
        cxd acc = 0.0;
        for (int b = 0; b < d; ++b) acc += u(a, b) * scratch[b];
        amp[base + inner * a] = acc;
      }
    }
  }
}

inline cxd root_of_unity(int d, long long exponent) {
  const double theta = 2.0 * M_PI * static_cast<double>(((exponent % d) + d) % d) / d;
  return cxd(std::cos(theta), std::sin(theta));
}

// Dense single-gate application; `inverse` applies the Hermitian conjugate.
inline void apply_gate_dense(QuditState& s, const Gate& g, bool inverse = false) {
  const int d = s.d;
  const int n = s.n;
  switch (g.type) {
    case GateType::F: {
      MatrixXcd f(d, d);
      const double norm = 1.0 / std::sqrt(static_cast<double>(d));
      for (int t = 0; t < d; ++t)
        for (int u = 0; u < d; ++u) f(t, u) = norm * root_of_unity(d, inverse ? -static_cast<long long>(t) * u : static_cast<long long>(t) * u);
      apply_local_matrix(s.amp, n, d, g.a, f);
      break;
    }
    case GateType::P: {
      MatrixXcd p = MatrixXcd::Zero(d, d);
      for (int v = 0; v < d; ++v) {
        long long e = static_cast<long long>(v) * (v + 1) / 2;
        p(v, v) = root_of_unity(d, inverse ? -e : e);
      }
      apply_local_matrix(s.amp, n, d, g.a, p);
      break;
    }
    case GateType::X: {
      MatrixXcd x = MatrixXcd::Zero(d, d);
      for (int v = 0; v < d; ++v) x((v + (inverse ? d - 1 : 1)) % d, v) = 1.0;
      apply_local_matrix(s.amp, n, d, g.a, x);
      break;
    }
    case GateType::Z: {
      MatrixXcd z = MatrixXcd::Zero(d, d);
      for (int v = 0; v < d; ++v) z(v, v) = root_of_unity(d, inverse ? -v : v);
      apply_local_matrix(s.amp, n, d, g.a, z);
      break;
    }
    case GateType::CNOT: {
      // |s,t> -> |s, t +- s>; permutation applied in place per control digit.
      Eigen::Index inner_c = 1, inner_t = 1;
      for (int i = g.a + 1; i < n; ++i) inner_c *= d;
      for (int i = g.b + 1; i < n; ++i) inner_t *= d;
      VectorXcd next = VectorXcd::Zero(s.amp.size());
      for (Eigen::Index idx = 0; idx < s.amp.size(); ++idx) {
        const int cv = static_cast<int>(idx / inner_c) % d;
        const int tv = static_cast<int>(idx / inner_t) % d;
        const int nt = inverse ? ((tv - cv) % d + d) % d : (tv + cv) % d;
        next[idx + static_cast<Eigen::Index>(nt - tv) * inner_t] = s.amp[idx];
      }
      s.amp.swap(next);
      break;
    }
  }
}

inline void apply_circuit(QuditState& s, const CliffordCircuit& c) {
  if (c.d != s.d || c.n != s.n) throw std::invalid_argument("apply_circuit: shape mismatch");
  for (const auto& g : c.gates) apply_gate_dense(s, g);
}

inline void apply_circuit_inverse(QuditState& s, const CliffordCircuit& c) {
  if (c.d != s.d || c.n != s.n) throw std::invalid_argument("apply_circuit: shape mismatch");
  for (auto it = c.gates.rbegin(); it != c.gates.rend(); ++it) apply_gate_dense(s, *it, true);
}

inline Eigen::Index sample_basis_index(const VectorXcd& amp, Rng& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < amp.size(); ++i) {
    acc += std::norm(amp[i]);
    if (u < acc) return i;
  }
  return amp.size() - 1;
}

inline double exact_expectation(const QuditState& s, const MatrixXcd& op) {
  return (s.amp.adjoint() * (op * s.amp))(0).real();
}

// <psi| Q |psi> for one GGB string, applied mode by mode.
inline double term_expectation(const QuditState& s, const Observable& o, const Term& t) {
  VectorXcd v = s.amp;
  for (int i = 0; i < o.n; ++i)
    if (t.ggb[i] != 0) apply_local_matrix(v, s.n, s.d, i, ggb_matrix(s.d, t.ggb[i]));
  return (s.amp.adjoint() * v)(0).real();
}

// <psi| Q_a Q_b |psi> for two GGB strings (the pair oracle behind the exact
// variance). Modes in both supports get the matrix product of their elements.
inline double pair_term_expectation(const QuditState& s, const Observable& o, const Term& a, const Term& b) {
  VectorXcd v = s.amp;
  for (int i = 0; i < o.n; ++i) {
    const int ga = a.ggb[i];
    const int gb = b.ggb[i];
    if (ga == 0 && gb == 0) continue;
    if (ga != 0 && gb != 0) {
      apply_local_matrix(v, s.n, s.d, i, MatrixXcd(ggb_matrix(s.d, ga) * ggb_matrix(s.d, gb)));
    } else {
      apply_local_matrix(v, s.n, s.d, i, ggb_matrix(s.d, ga != 0 ? ga : gb));
    }
  }
  return (s.amp.adjoint() * v)(0).real();
}

inline double exact_expectation(const QuditState& s, const Observable& o) {
  if (o.basis != Basis::ggb) throw std::invalid_argument("exact_expectation: GGB observables only");
  if (o.n != s.n || o.d != s.d) throw std::invalid_argument("exact_expectation: shape mismatch");
  double acc = 0.0;
  for (const auto& t : o.terms) acc += t.coeff * term_expectation(s, o, t);
  return acc;
}

// Product measurement of one GGB element per selected mode (label 0 = skip).
// Rotating into the product eigenbasis once yields the joint outcome
// distribution; outcomes report each measured mode's eigenvalue.
class QuditMeasurementSampler {
 public:
  QuditMeasurementSampler(const QuditState& state, std::size_t cache_cap = 4096)
      : state_(state), cache_cap_(cache_cap) {}

  const QuditState& state() const { return state_; }

  // outcomes[i] is the eigenvalue observed on mode i (0.0 on skipped modes).
  void sample(const std::vector<int>& labels, Rng& rng, std::vector<double>& outcomes) {
    const Prepared& prep = prepare(labels);
    Eigen::Index idx = [&] {
      const double u = rng.uniform01();
      double acc = 0.0;
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(prep.probs.size()); ++i) {
        acc += prep.probs[i];
        if (u < acc) return i;
      }
      return static_cast<Eigen::Index>(prep.probs.size()) - 1;
    }();
    outcomes.assign(state_.n, 0.0);
    for (int i = state_.n - 1; i >= 0; --i) {
      const int digit = static_cast<int>(idx % state_.d);
      idx /= state_.d;
      if (labels[i] != 0) outcomes[i] = ggb_eigensystem(state_.d, labels[i]).values[digit];
    }
  }

 private:
  struct Prepared {
    std::vector<double> probs;
  };

  const Prepared& prepare(const std::vector<int>& labels) {
    std::string key;
    key.reserve(labels.size() * 3);
    for (int l : labels) {
      key += std::to_string(l);
      key += ',';
    }
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    if (cache_.size() >= cache_cap_) cache_.clear();
    VectorXcd v = state_.amp;
    for (int i = 0; i < state_.n; ++i) {
      if (labels[i] == 0) continue;
      const GGBEigensystem& eig = ggb_eigensystem(state_.d, labels[i]);
      apply_local_matrix(v, state_.n, state_.d, i, eig.vectors.adjoint());
    }
    Prepared prep;
    prep.probs.resize(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) prep.probs[i] = std::norm(v[i]);
    return cache_.emplace(std::move(key), std::move(prep)).first->second;
  }

  const QuditState& state_;
  std::size_t cache_cap_;
  std::unordered_map<std::string, Prepared> cache_;
};

inline std::vector<double> measure_ggb(const QuditState& state, const std::vector<int>& labels, Rng& rng) {
  if (static_cast<int>(labels.size()) != state.n) throw std::invalid_argument("measure_ggb: label length mismatch");
  QuditMeasurementSampler sampler(state, 1);
  std::vector<double> out;
  sampler.sample(labels, rng, out);
  return out;
}

}  // namespace bosonmeter
