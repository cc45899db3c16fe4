#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include "bosonmeter/pauli.hpp"
#include "bosonmeter/rng.hpp"

namespace bosonmeter {

// Stabilizer tableau over odd prime d: rows 0..n-1 are destabilizers, rows
// n..2n-1 stabilizers. Invariants: stabilizers commute pairwise, destabilizer
// i commutes with every stabilizer except its partner n+i, and the pairing
// symp(row_i, row_{n+i}) stays invertible mod d.
class StabilizerTableau {
 public:
  StabilizerTableau(int n, int d) : d_(d), n_(n) {
    if (!is_odd_prime(d)) throw std::invalid_argument("stabilizer tableau: d must be an odd prime");
    if (n < 1) throw std::invalid_argument("stabilizer tableau: need at least one qudit");
    rows_.reserve(2 * n);
    for (int i = 0; i < n; ++i) rows_.push_back(PauliWord::x_word(n, d, i));
    for (int i = 0; i < n; ++i) rows_.push_back(PauliWord::z_word(n, d, i));
  }

  int d() const { return d_; }
  int n() const { return n_; }
  const PauliWord& row(int i) const { return rows_[i]; }
  const PauliWord& destabilizer(int i) const { return rows_[i]; }
  const PauliWord& stabilizer(int i) const { return rows_[n_ + i]; }

  void apply(const Gate& g) {
    check_gate(g);
    for (auto& r : rows_) conjugate_word(r, g);
  }

  void apply(const CliffordCircuit& c) {
    if (c.d != d_ || c.n != n_) throw std::invalid_argument("stabilizer tableau: circuit shape mismatch");
    for (const auto& g : c.gates) apply(g);
  }

  // Computational measurement of qudit k; collapses the tableau and returns
  // the outcome digit.
  int measure(int k, Rng& rng) {
    check_mode(k);
    int p = -1;
    for (int i = n_; i < 2 * n_; ++i)
      if (rows_[i].x[k] != 0) {
        p = i;
        break;
      }
    if (p >= 0) {
      // Outcome is uniform. Eliminate X_k from every other row with row p,
      // demote row p to the destabilizer slot, and install w^{-m} Z_k.
      const int apk = rows_[p].x[k];
      for (int i = 0; i < 2 * n_; ++i) {
        if (i == p || i == p - n_) continue;
        const int aik = rows_[i].x[k];
        if (aik == 0) continue;
        rows_[i] = multiply(power(rows_[p], mod_d(-aik, d_)), power(rows_[i], apk));
      }
      const int outcome = static_cast<int>(rng.uniform_int(0, d_ - 1));
      rows_[p - n_] = rows_[p];
      PauliWord zk = PauliWord::z_word(n_, d_, k);
      zk.phase = mod_d(-outcome, d_);
      rows_[p] = zk;
      return outcome;
    }
    // Deterministic: w^g Z_k is a stabilizer-group element; reconstruct it
    // from the destabilizer pairings and read the outcome off its phase.
    const PauliWord w = stabilizer_combination(PauliWord::z_word(n_, d_, k));
    return mod_d(-w.phase, d_);
  }

  // <w> on the stabilizer state: 0 unless w is proportional to a stabilizer
  // group element, else the d-th root of unity w^{phase difference}.
  std::complex<double> pauli_expectation(const PauliWord& w) const {
    if (w.d != d_ || w.n() != n_) throw std::invalid_argument("pauli_expectation: word shape mismatch");
    for (int i = n_; i < 2 * n_; ++i)
      if (symp(rows_[i], w) != 0) return 0.0;
    const PauliWord member = stabilizer_combination(w);
    if (!member.same_letters(w)) return 0.0;
    const double theta = 2.0 * M_PI * mod_d(w.phase - member.phase, d_) / d_;
    return std::complex<double>(std::cos(theta), std::sin(theta));
  }

  void check_invariants() const {
    for (int i = n_; i < 2 * n_; ++i)
      for (int j = n_; j < 2 * n_; ++j)
        if (symp(rows_[i], rows_[j]) != 0) throw std::runtime_error("tableau invariant: stabilizers must commute");
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        const int s = symp(rows_[i], rows_[n_ + j]);
        if (i == j && s == 0) throw std::runtime_error("tableau invariant: pairing not invertible");
        if (i != j && s != 0) throw std::runtime_error("tableau invariant: destabilizer hits foreign stabilizer");
      }
  }

 private:
  // Solves for the stabilizer product with the same destabilizer pairings as
  // target, i.e. the group element matching target's letters when one exists.
  PauliWord stabilizer_combination(const PauliWord& target) const {
    PauliWord acc = PauliWord::identity(n_, d_);
    for (int i = 0; i < n_; ++i) {
      const int alpha = symp(rows_[i], rows_[n_ + i]);
      const int beta = symp(rows_[i], target);
      const int gamma = mod_d(static_cast<long long>(inv_mod(alpha, d_)) * beta, d_);
      if (gamma != 0) acc = multiply(acc, power(rows_[n_ + i], gamma));
    }
    return acc;
  }

  void check_gate(const Gate& g) const {
    if (g.a < 0 || g.a >= n_) throw std::invalid_argument("stabilizer tableau: gate mode out of range");
    if (g.type == GateType::CNOT && (g.b < 0 || g.b >= n_ || g.b == g.a))
      throw std::invalid_argument("stabilizer tableau: bad CNOT target");
  }

  void check_mode(int k) const {
    if (k < 0 || k >= n_) throw std::invalid_argument("stabilizer tableau: mode out of range");
  }

  int d_;
  int n_;
  std::vector<PauliWord> rows_;
};

}  // namespace bosonmeter
