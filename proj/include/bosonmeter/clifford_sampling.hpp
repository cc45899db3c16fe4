#pragma once

#include <cassert>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bosonmeter/pauli.hpp"
#include "bosonmeter/rng.hpp"

namespace bosonmeter {

// Uniformly sampled n-qudit Clifford (odd prime d), as the circuit C plus the
// Pauli images it produces: images[i] = C X_i C^dag, images[n+i] = C Z_i C^dag.
struct CliffordSample {
  CliffordCircuit circuit;
  std::vector<PauliWord> images;
};

namespace detail {

inline void emit_gate(PauliWord& wx, PauliWord& wz, std::vector<Gate>& gates, const Gate& g, int reps = 1) {
  for (int t = 0; t < reps; ++t) {
    conjugate_word(wx, g);
    conjugate_word(wz, g);
    gates.push_back(g);
  }
}

// Clears every Z letter of `w` on modes [q, n): P when the mode also has an X
// letter, F when it is Z-only. The partner word tags along.
inline void clear_z_letters(PauliWord& w, PauliWord& other, int q, std::vector<Gate>& gates) {
  const int d = w.d;
  for (int j = q; j < w.n(); ++j) {
    if (w.z[j] == 0) continue;
    if (w.x[j] != 0) {
      const int t = mod_d(static_cast<long long>(inv_mod(w.x[j], d)) * (d - w.z[j]), d);
      emit_gate(w, other, gates, Gate{GateType::P, j}, t);
    } else {
      emit_gate(w, other, gates, Gate{GateType::F, j});
    }
  }
}

// Collapses the X letters of `w` (pure X form) onto mode q by pairwise CNOT
// elimination; each round halves the support, so CNOT depth is O(log2 n).
inline void gather_x_letters(PauliWord& w, PauliWord& other, int q, std::vector<Gate>& gates) {
  const int d = w.d;
  std::vector<int> live;
  for (int j = q; j < w.n(); ++j)
    if (w.x[j] != 0) live.push_back(j);
  while (live.size() > 1) {
    std::vector<int> next;
    for (std::size_t i = 0; i < live.size(); i += 2) {
      if (i + 1 == live.size()) {
        next.push_back(live[i]);
        break;
      }
      const int c = live[i], t = live[i + 1];
      const int reps = mod_d(static_cast<long long>(inv_mod(w.x[c], d)) * (d - w.x[t]), d);
      emit_gate(w, other, gates, Gate{GateType::CNOT, c, t}, reps);
      next.push_back(c);
    }
    live.swap(next);
  }
  const int u = live.at(0);
  if (u != q) {
    emit_gate(w, other, gates, Gate{GateType::CNOT, u, q});
    emit_gate(w, other, gates, Gate{GateType::CNOT, q, u}, d - 1);
  }
}

// Reduces the sampled pair to exactly (X_q, Z_q), phases included, recording
// the gate sequence that does it.
inline void reduce_pair(PauliWord& wx, PauliWord& wz, int q, std::vector<Gate>& gates) {
  const int d = wx.d;
  clear_z_letters(wx, wz, q, gates);
  gather_x_letters(wx, wz, q, gates);

  bool wz_ready = wz.x == std::vector<int>(wz.x.size(), 0);
  if (wz_ready)
    for (int j = q; j < wz.n(); ++j)
      if (j != q && wz.z[j] != 0) wz_ready = false;
  if (!wz_ready) {
    // F on q turns wx into a Z-type word, which P gates and CNOTs controlled
    // on q leave untouched while wz is reduced; mode q keeps an X letter in
    // wz throughout (forced by the symplectic pairing), so it stays the
    // control and survives the gather.
    emit_gate(wz, wx, gates, Gate{GateType::F, q});
    clear_z_letters(wz, wx, q, gates);
    gather_x_letters(wz, wx, q, gates);
    emit_gate(wz, wx, gates, Gate{GateType::F, q});
  }

  const int a = wx.x[q];
  const int b = wz.z[q];
  if (mod_d(static_cast<long long>(a) * b, d) != 1)
    throw std::runtime_error("clifford sampling: symplectic pairing lost");
  if (a != 1 || b != 1) {
    // Letter normalization (a,0)->(1,0), (0,b)->(0,1): the F/P word below
    // acts on (x,z) exponent pairs as the matrix diag(b, a) in SL(2, Z_d).
    const int k = inv_mod(b, d);
    emit_gate(wx, wz, gates, Gate{GateType::F, q});
    emit_gate(wx, wz, gates, Gate{GateType::P, q}, k);
    emit_gate(wx, wz, gates, Gate{GateType::F, q});
    emit_gate(wx, wz, gates, Gate{GateType::P, q}, b);
    emit_gate(wx, wz, gates, Gate{GateType::F, q});
    emit_gate(wx, wz, gates, Gate{GateType::P, q}, a);
  }
  emit_gate(wx, wz, gates, Gate{GateType::Z, q}, mod_d(-wx.phase, d));
  emit_gate(wx, wz, gates, Gate{GateType::X, q}, wz.phase);
}

inline PauliWord random_word(int n, int d, int q, Rng& rng, bool require_letters) {
  PauliWord w = PauliWord::identity(n, d);
  do {
    for (int i = q; i < n; ++i) {
      w.x[i] = static_cast<int>(rng.uniform_int(0, d - 1));
      w.z[i] = static_cast<int>(rng.uniform_int(0, d - 1));
    }
  } while (require_letters && w.is_identity_letters());
  w.phase = static_cast<int>(rng.uniform_int(0, d - 1));
  return w;
}

// Adjusts the partner word at the first mode carrying wx letters so that
// symp(wx, wz) = -1. The d^2 letter pairs at that mode split into d fibers of
// d solutions each; mapping the sampled pair to the same-rank solution of the
// target fiber keeps the conditional distribution uniform.
inline void rebalance(const PauliWord& wx, PauliWord& wz, int q) {
  const int d = wx.d;
  int j = -1;
  for (int i = q; i < wx.n(); ++i)
    if (wx.x[i] != 0 || wx.z[i] != 0) {
      j = i;
      break;
    }
  if (j < 0) throw std::runtime_error("clifford sampling: empty image word");
  const int s_total = symp(wx, wz);
  const int s_mode = mod_d(static_cast<long long>(wx.z[j]) * wz.x[j] - static_cast<long long>(wx.x[j]) * wz.z[j], d);
  const int target = mod_d(-1LL - (s_total - s_mode), d);
  std::vector<int> fiber_old, fiber_new;
  for (int v = 0; v < d * d; ++v) {
    const int a = v / d, b = v % d;
    const int s = mod_d(static_cast<long long>(wx.z[j]) * a - static_cast<long long>(wx.x[j]) * b, d);
    if (s == s_mode) fiber_old.push_back(v);
    if (s == target) fiber_new.push_back(v);
  }
  const int cur = wz.x[j] * d + wz.z[j];
  std::size_t rank = 0;
  while (fiber_old[rank] != cur) ++rank;
  wz.x[j] = fiber_new[rank] / d;
  wz.z[j] = fiber_new[rank] % d;
}

}  // namespace detail

// Draws a Clifford uniformly at random by sampling the images of X_q, Z_q on
// the not-yet-fixed modes (uniform letters and phases subject to the
// symplectic constraint), reducing each pair to (X_q, Z_q) with elementary
// gates, and returning the inverted gate sequence.
inline CliffordSample sample_clifford(int n, int d, Rng& rng) {
  if (!is_odd_prime(d)) throw std::invalid_argument("sample_clifford: d must be an odd prime");
  if (n < 1) throw std::invalid_argument("sample_clifford: need at least one qudit");
  std::vector<Gate> gates;
  std::vector<std::pair<PauliWord, PauliWord>> sampled(n);
  std::vector<std::size_t> step_start(n);
  for (int q = 0; q < n; ++q) {
    step_start[q] = gates.size();
    PauliWord wx = detail::random_word(n, d, q, rng, true);
    PauliWord wz = detail::random_word(n, d, q, rng, false);
    detail::rebalance(wx, wz, q);
    sampled[q] = {wx, wz};
    detail::reduce_pair(wx, wz, q, gates);
    if (!(wx == PauliWord::x_word(n, d, q)) || !(wz == PauliWord::z_word(n, d, q)))
      throw std::runtime_error("clifford sampling: reduction failed");
  }

  CliffordSample out;
  CliffordCircuit forward;
  forward.d = d;
  forward.n = n;
  forward.gates = gates;
  out.circuit = invert_circuit(forward);

  // The words sampled at step q live in the frame already reduced by the
  // earlier gates; conjugating back through them yields the global images.
  out.images.resize(2 * n, PauliWord::identity(n, d));
  for (int q = 0; q < n; ++q) {
    PauliWord ix = sampled[q].first;
    PauliWord iz = sampled[q].second;
    for (std::size_t idx = step_start[q]; idx-- > 0;) {
      conjugate_word_inverse(ix, gates[idx]);
      conjugate_word_inverse(iz, gates[idx]);
    }
    out.images[q] = ix;
    out.images[n + q] = iz;
  }
  return out;
}

}  // namespace bosonmeter
