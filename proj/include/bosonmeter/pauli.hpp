#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bosonmeter/ggb.hpp"

namespace bosonmeter {

inline bool is_odd_prime(int d) {
  if (d < 3 || d % 2 == 0) return false;
  for (int f = 3; f * f <= d; f += 2)
    if (d % f == 0) return false;
  return true;
}

inline int mod_d(long long v, int d) { return static_cast<int>(((v % d) + d) % d); }

inline int inv_mod(int a, int d) {
  a = mod_d(a, d);
  if (a == 0) throw std::invalid_argument("inv_mod: zero has no inverse");
  for (int x = 1; x < d; ++x)
    if (a * x % d == 1) return x;
  throw std::invalid_argument("inv_mod: not invertible");
}

// w^phase * prod_i X_i^{x[i]} Z_i^{z[i]} with w = exp(2 pi i / d), exponents
// mod d. X|s> = |s+1 mod d>, Z|s> = w^s |s>.
struct PauliWord {
  int d = 0;
  std::vector<int> x;
  std::vector<int> z;
  int phase = 0;

  static PauliWord identity(int n, int d) {
    PauliWord w;
    w.d = d;
    w.x.assign(n, 0);
    w.z.assign(n, 0);
    return w;
  }

  static PauliWord x_word(int n, int d, int mode, int power = 1) {
    PauliWord w = identity(n, d);
    w.x[mode] = mod_d(power, d);
    return w;
  }

  static PauliWord z_word(int n, int d, int mode, int power = 1) {
    PauliWord w = identity(n, d);
    w.z[mode] = mod_d(power, d);
    return w;
  }

  int n() const { return static_cast<int>(x.size()); }

  bool same_letters(const PauliWord& o) const { return x == o.x && z == o.z; }

  bool is_identity_letters() const {
    for (int v : x)
      if (v) return false;
    for (int v : z)
      if (v) return false;
    return true;
  }
};

inline bool operator==(const PauliWord& a, const PauliWord& b) {
  return a.d == b.d && a.x == b.x && a.z == b.z && a.phase == b.phase;
}

// a * b; per mode X^ax Z^az X^bx Z^bz = w^{az*bx} X^{ax+bx} Z^{az+bz}.
inline PauliWord multiply(const PauliWord& a, const PauliWord& b) {
  PauliWord out = a;
  long long ph = a.phase + b.phase;
  for (int i = 0; i < a.n(); ++i) {
    ph += static_cast<long long>(a.z[i]) * b.x[i];
    out.x[i] = mod_d(a.x[i] + b.x[i], a.d);
    out.z[i] = mod_d(a.z[i] + b.z[i], a.d);
  }
  out.phase = mod_d(ph, a.d);
  return out;
}

// w^m: phase exponent m*c + sum_i x_i z_i m(m-1)/2 (the reordering phases of
// m interleaved copies), letters scaled by m.
inline PauliWord power(const PauliWord& w, int m) {
  PauliWord out = w;
  m = mod_d(m, w.d);
  long long ph = static_cast<long long>(m) * w.phase;
  const long long pair = static_cast<long long>(m) * (m - 1) / 2;
  for (int i = 0; i < w.n(); ++i) {
    ph += static_cast<long long>(w.x[i]) * w.z[i] % w.d * pair;
    out.x[i] = mod_d(static_cast<long long>(w.x[i]) * m, w.d);
    out.z[i] = mod_d(static_cast<long long>(w.z[i]) * m, w.d);
  }
  out.phase = mod_d(ph, w.d);
  return out;
}

// Symplectic product: a b = w^{symp(a,b)} b a.
inline int symp(const PauliWord& a, const PauliWord& b) {
  long long s = 0;
  for (int i = 0; i < a.n(); ++i) s += static_cast<long long>(a.z[i]) * b.x[i] - static_cast<long long>(a.x[i]) * b.z[i];
  return mod_d(s, a.d);
}

inline MatrixXcd pauli_matrix(const PauliWord& w) {
  const int d = w.d;
  MatrixXcd acc = MatrixXcd::Identity(1, 1);
  for (int i = 0; i < w.n(); ++i) {
    MatrixXcd local = MatrixXcd::Zero(d, d);
    for (int s = 0; s < d; ++s) {
      const double theta = 2.0 * M_PI * mod_d(static_cast<long long>(w.z[i]) * s, d) / d;
      local((s + w.x[i]) % d, s) = cxd(std::cos(theta), std::sin(theta));
    }
    acc = kron(acc, local).eval();
  }
  const double theta = 2.0 * M_PI * w.phase / d;
  return cxd(std::cos(theta), std::sin(theta)) * acc;
}

// Clifford gate set: Fourier gate F, phase gate P, CNOT, and the Pauli
// corrections X and Z. Single-mode gates use `a`; CNOT maps control a to
// target b.
enum class GateType { F, P, CNOT, X, Z };

struct Gate {
  GateType type;
  int a = 0;
  int b = -1;
};

struct CliffordCircuit {
  int d = 0;
  int n = 0;
  std::vector<Gate> gates;
};

// Conjugation action g W g^dagger, phase tracked exactly:
//   F: w^c X^a Z^b -> w^{c-ab} X^{-b} Z^a
//   P: w^c X^a Z^b -> w^{c+a(a+1)/2} X^a Z^{a+b}        (odd d)
//   CNOT(k->l):     x_l += x_k, z_k -= z_l
//   X: c -= z_k     Z: c += x_k
inline void conjugate_word(PauliWord& w, const Gate& g) {
  const int d = w.d;
  switch (g.type) {
    case GateType::F: {
      w.phase = mod_d(w.phase - static_cast<long long>(w.x[g.a]) * w.z[g.a], d);
      const int nx = mod_d(-w.z[g.a], d);
      w.z[g.a] = w.x[g.a];
      w.x[g.a] = nx;
      break;
    }
    case GateType::P: {
      const long long a = w.x[g.a];
      w.phase = mod_d(w.phase + a * (a + 1) / 2, d);
      w.z[g.a] = mod_d(w.z[g.a] + a, d);
      break;
    }
    case GateType::CNOT:
      w.x[g.b] = mod_d(w.x[g.b] + w.x[g.a], d);
      w.z[g.a] = mod_d(w.z[g.a] - w.z[g.b], d);
      break;
    case GateType::X:
      w.phase = mod_d(w.phase - w.z[g.a], d);
      break;
    case GateType::Z:
      w.phase = mod_d(w.phase + w.x[g.a], d);
      break;
  }
}

// Inverse conjugation g^dagger W g, via the gate orders F^4 = CNOT^d = P^d = I.
inline void conjugate_word_inverse(PauliWord& w, const Gate& g) {
  int reps = 0;
  switch (g.type) {
    case GateType::F:
      reps = 3;
      break;
    default:
      reps = w.d - 1;
      break;
  }
  for (int t = 0; t < reps; ++t) conjugate_word(w, g);
}

// Gate-by-gate inverse as a circuit over the same primitive set.
inline CliffordCircuit invert_circuit(const CliffordCircuit& c) {
  CliffordCircuit out;
  out.d = c.d;
  out.n = c.n;
  for (auto it = c.gates.rbegin(); it != c.gates.rend(); ++it) {
    const int reps = it->type == GateType::F ? 3 : c.d - 1;
    for (int t = 0; t < reps; ++t) out.gates.push_back(*it);
  }
  return out;
}

inline std::string gate_name(GateType t) {
  switch (t) {
    case GateType::F: return "F";
    case GateType::P: return "P";
    case GateType::CNOT: return "CNOT";
    case GateType::X: return "X";
    case GateType::Z: return "Z";
  }
  return "?";
}

// Line format: header "d n", then one gate per line ("F 0", "CNOT 0 2", ...),
// modes 0-based.
inline std::string serialize_circuit(const CliffordCircuit& c) {
  std::ostringstream out;
  out << c.d << " " << c.n << "\n";
  for (const auto& g : c.gates) {
    out << gate_name(g.type) << " " << g.a;
    if (g.type == GateType::CNOT) out << " " << g.b;
    out << "\n";
  }
  return out.str();
}

inline CliffordCircuit parse_circuit(const std::string& text) {
  std::istringstream in(text);
  CliffordCircuit c;
  if (!(in >> c.d >> c.n)) throw std::invalid_argument("parse_circuit: missing header");
  if (c.d < 2 || c.n < 1) throw std::invalid_argument("parse_circuit: bad header");
  std::string name;
  while (in >> name) {
    Gate g;
    if (name == "F")
      g.type = GateType::F;
    else if (name == "P")
      g.type = GateType::P;
    else if (name == "CNOT")
      g.type = GateType::CNOT;
    else if (name == "X")
      g.type = GateType::X;
    else if (name == "Z")
      g.type = GateType::Z;
    else
      throw std::invalid_argument("parse_circuit: unknown gate " + name);
    if (!(in >> g.a)) throw std::invalid_argument("parse_circuit: missing mode");
    if (g.type == GateType::CNOT) {
      if (!(in >> g.b)) throw std::invalid_argument("parse_circuit: missing target");
      if (g.b == g.a) throw std::invalid_argument("parse_circuit: CNOT needs distinct modes");
    }
    if (g.a < 0 || g.a >= c.n || (g.type == GateType::CNOT && (g.b < 0 || g.b >= c.n)))
      throw std::invalid_argument("parse_circuit: mode out of range");
    c.gates.push_back(g);
  }
  return c;
}

}  // namespace bosonmeter
