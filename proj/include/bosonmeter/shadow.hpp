#pragma once

#include <cmath>
#include <cstddef>

#include "bosonmeter/clifford_sampling.hpp"
#include "bosonmeter/observable.hpp"
#include "bosonmeter/qudit_state.hpp"
#include "bosonmeter/rng.hpp"

namespace bosonmeter {

// Global Clifford shadows for odd prime d: measuring C rho C^dag in the
// computational basis gives the shadow (D+1) C^dag|b><b|C - I with D = d^n,
// which inverts the depolarizing-like channel M(rho) = (rho + I)/(D + 1).

struct ShadowReport {
  double mean = 0.0;
  double variance = 0.0;  // single-sample variance
  std::size_t count = 0;
};

inline double observable_trace(const Observable& o) {
  double dim = std::pow(static_cast<double>(o.d), o.n);
  for (const auto& t : o.terms)
    if (term_is_identity(o, t)) return t.coeff * dim;
  return 0.0;
}

// One shadow sample of tr(rho O): (D+1) <chi| O |chi> - tr(O), chi = C^dag|b>.
inline double shadow_sample(const MatrixXcd& o_dense, double trace_o, const QuditState& psi, Rng& rng) {
  const double dim = static_cast<double>(psi.amp.size());
  const CliffordSample cs = sample_clifford(psi.n, psi.d, rng);
  QuditState phi = psi;
  apply_circuit(phi, cs.circuit);
  const Eigen::Index b = sample_basis_index(phi.amp, rng);
  QuditState chi = basis_state(psi.n, psi.d, b);
  apply_circuit_inverse(chi, cs.circuit);
  return (dim + 1.0) * (chi.amp.adjoint() * (o_dense * chi.amp))(0).real() - trace_o;
}

inline ShadowReport shadow_estimate(const Observable& o, const QuditState& psi, std::size_t samples, Rng& rng) {
  if (o.n != psi.n || o.d != psi.d) throw std::invalid_argument("shadow_estimate: shape mismatch");
  const MatrixXcd o_dense = reconstruct(o);
  const double trace_o = observable_trace(o);
  ShadowReport rep;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t t = 0; t < samples; ++t) {
    const double v = shadow_sample(o_dense, trace_o, psi, rng);
    const double delta = v - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (v - mean);
  }
  rep.mean = mean;
  rep.variance = samples > 1 ? m2 / static_cast<double>(samples - 1) : 0.0;
  rep.count = samples;
  return rep;
}

// Mean of the reconstructed shadow states; converges to rho entrywise.
inline MatrixXcd average_shadow_state(const QuditState& psi, std::size_t samples, Rng& rng) {
  const Eigen::Index dim = psi.amp.size();
  MatrixXcd acc = MatrixXcd::Zero(dim, dim);
  for (std::size_t t = 0; t < samples; ++t) {
    const CliffordSample cs = sample_clifford(psi.n, psi.d, rng);
    QuditState phi = psi;
    apply_circuit(phi, cs.circuit);
    const Eigen::Index b = sample_basis_index(phi.amp, rng);
    QuditState chi = basis_state(psi.n, psi.d, b);
    apply_circuit_inverse(chi, cs.circuit);
    acc.noalias() += (static_cast<double>(dim) + 1.0) * (chi.amp * chi.amp.adjoint());
    acc -= MatrixXcd::Identity(dim, dim);
  }
  return acc / static_cast<double>(samples);
}

}  // namespace bosonmeter
