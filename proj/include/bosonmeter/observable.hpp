#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bosonmeter/ggb.hpp"

namespace bosonmeter {

enum class Basis { ggb, px };

// Per-mode exponents of a position/momentum monomial. A mode may carry either
// x powers or p powers, never both: products of x and p on one mode are not
// jointly measurable with a single quadrature setting.
struct PXExp {
  int l = 0;  // x exponent
  int m = 0;  // p exponent
};

inline bool operator==(const PXExp& a, const PXExp& b) { return a.l == b.l && a.m == b.m; }

struct Term {
  std::vector<int> ggb;    // per-mode GGB index, used when basis == ggb
  std::vector<PXExp> px;   // per-mode exponents, used when basis == px
  double coeff = 0.0;
};

// A linear combination of tensor-product strings over n modes, in either the
// d-dimensional GGB basis or the position/momentum monomial basis.
struct Observable {
  Basis basis = Basis::ggb;
  int n = 0;
  int d = 0;  // qudit dimension; unused (0) for px observables
  std::vector<Term> terms;
};

inline bool term_mode_active(const Observable& o, const Term& t, int mode) {
  return o.basis == Basis::ggb ? t.ggb[mode] != 0 : (t.px[mode].l > 0 || t.px[mode].m > 0);
}

inline std::vector<int> term_support(const Observable& o, const Term& t) {
  std::vector<int> s;
  for (int i = 0; i < o.n; ++i)
    if (term_mode_active(o, t, i)) s.push_back(i);
  return s;
}

inline int term_weight(const Observable& o, const Term& t) {
  int w = 0;
  for (int i = 0; i < o.n; ++i)
    if (term_mode_active(o, t, i)) ++w;
  return w;
}

inline int term_degree(const Term& t) {
  int deg = 0;
  for (const auto& e : t.px) deg += e.l + e.m;
  return deg;
}

inline bool term_is_identity(const Observable& o, const Term& t) { return term_weight(o, t) == 0; }

// Largest string support size over non-identity terms.
inline int locality(const Observable& o) {
  int k = 0;
  for (const auto& t : o.terms) k = std::max(k, term_weight(o, t));
  return k;
}

// Largest monomial degree over terms (px observables).
inline int max_degree(const Observable& o) {
  int deg = 0;
  for (const auto& t : o.terms) deg = std::max(deg, term_degree(t));
  return deg;
}

inline double coeff_sq_sum(const Observable& o) {
  double s = 0.0;
  for (const auto& t : o.terms) s += t.coeff * t.coeff;
  return s;
}

inline double coeff_l1_sum(const Observable& o) {
  double s = 0.0;
  for (const auto& t : o.terms) s += std::abs(t.coeff);
  return s;
}

inline void validate(const Observable& o) {
  if (o.n <= 0) throw std::invalid_argument("observable: mode count must be positive");
  if (o.basis == Basis::ggb && o.d < 2) throw std::invalid_argument("observable: qudit dimension must be >= 2");
  for (const auto& t : o.terms) {
    if (o.basis == Basis::ggb) {
      if (static_cast<int>(t.ggb.size()) != o.n) throw std::invalid_argument("observable: string length mismatch");
      for (int g : t.ggb)
        if (g < 0 || g >= o.d * o.d) throw std::invalid_argument("observable: GGB index out of range");
    } else {
      if (static_cast<int>(t.px.size()) != o.n) throw std::invalid_argument("observable: string length mismatch");
      for (const auto& e : t.px) {
        if (e.l < 0 || e.m < 0) throw std::invalid_argument("observable: negative exponent");
        if (e.l > 0 && e.m > 0) throw std::invalid_argument("observable: mixed x and p powers on one mode");
      }
    }
  }
}

// Measurement label a term demands on each mode: 0 = no constraint, GGB index
// for ggb terms, 1 = x / 2 = p for px terms. These labels are the currency of
// compatibility: exponents do not matter, only which local basis is touched.
inline std::vector<int> term_labels(const Observable& o, const Term& t) {
  std::vector<int> labels(o.n, 0);
  for (int i = 0; i < o.n; ++i) {
    if (o.basis == Basis::ggb) {
      labels[i] = t.ggb[i];
    } else {
      if (t.px[i].l > 0) labels[i] = 1;
      else if (t.px[i].m > 0) labels[i] = 2;
    }
  }
  return labels;
}

// Per-mode exponent of the term's monomial (1 on active modes of GGB terms).
inline int term_exponent(const Observable& o, const Term& t, int mode) {
  if (o.basis == Basis::ggb) return t.ggb[mode] != 0 ? 1 : 0;
  return t.px[mode].l + t.px[mode].m;
}

// Q > P: the measurement labels P pin down Q's basis element on every mode of
// Q's support, so Q's value is a deterministic function of P's outcomes.
inline bool labels_cover(const std::vector<int>& q, const std::vector<int>& p) {
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] != 0 && p[i] != q[i]) return false;
  return true;
}

inline std::string term_key(const Observable& o, const Term& t) {
  std::string k;
  if (o.basis == Basis::ggb) {
    for (int g : t.ggb) k += std::to_string(g) + ",";
  } else {
    for (const auto& e : t.px) k += std::to_string(e.l) + ":" + std::to_string(e.m) + ",";
  }
  return k;
}

// Merges duplicate strings (coefficients added) and drops terms below tol.
inline Observable canonicalize(const Observable& o, double tol = 0.0) {
  Observable out = o;
  out.terms.clear();
  std::map<std::string, std::size_t> seen;
  for (const auto& t : o.terms) {
    const std::string key = term_key(o, t);
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, out.terms.size());
      out.terms.push_back(t);
    } else {
      out.terms[it->second].coeff += t.coeff;
    }
  }
  if (tol > 0.0) {
    std::vector<Term> kept;
    for (auto& t : out.terms)
      if (std::abs(t.coeff) > tol) kept.push_back(std::move(t));
    out.terms = std::move(kept);
  }
  return out;
}

// Dense matrix of a GGB observable (tensor products accumulated mode by mode).
inline MatrixXcd reconstruct(const Observable& o) {
  if (o.basis != Basis::ggb) throw std::invalid_argument("reconstruct: GGB observables only");
  validate(o);
  double dim_check = std::pow(static_cast<double>(o.d), o.n);
  if (dim_check > 4096.0 + 0.5) throw std::invalid_argument("reconstruct: d^n exceeds 4096");
  const Eigen::Index dim = static_cast<Eigen::Index>(std::llround(dim_check));
  MatrixXcd acc = MatrixXcd::Zero(dim, dim);
  for (const auto& t : o.terms) {
    MatrixXcd q = MatrixXcd::Identity(1, 1);
    for (int i = 0; i < o.n; ++i) q = kron(q, ggb_matrix(o.d, t.ggb[i])).eval();
    acc += t.coeff * q;
  }
  return acc;
}

namespace detail {

inline void ggb_contract_rec(const MatrixXcd& m, int modes_left, int d, std::vector<int>& digits,
                             std::vector<Term>& out, double tol, int n) {
  if (modes_left == 0) {
    const cxd tr = m(0, 0);
    if (std::abs(tr.imag()) > 1e-9) throw std::invalid_argument("decompose_ggb: non-Hermitian input");
    int k = 0;
    for (int g : digits)
      if (g != 0) ++k;
    const double norm = std::pow(2.0, k) * std::pow(static_cast<double>(d), n - k);
    const double coeff = tr.real() / norm;
    if (std::abs(coeff) > tol) {
      Term t;
      t.ggb = digits;
      t.coeff = coeff;
      out.push_back(std::move(t));
    }
    return;
  }
  const Eigen::Index sub = m.rows() / d;
  for (int g = 0; g < d * d; ++g) {
    const MatrixXcd lam = ggb_matrix(d, g);
    MatrixXcd s = MatrixXcd::Zero(sub, sub);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        const cxd w = lam(b, a);
        if (w != 0.0) s.noalias() += w * m.block(a * sub, b * sub, sub, sub);
      }
    digits.push_back(g);
    ggb_contract_rec(s, modes_left - 1, d, digits, out, tol, n);
    digits.pop_back();
  }
}

}  // namespace detail

// Expands a Hermitian matrix over n modes of dimension d in the GGB string
// basis. Coefficients are tr(M Q) / (2^k d^(n-k)) with k the string weight;
// strings with |coeff| <= tol are dropped (the basis is orthogonal, so the
// reconstruction error from dropping is below tol * sqrt(#strings * 2^k d^n).
inline Observable decompose_ggb(const MatrixXcd& m, int n, int d, double tol = 1e-12) {
  if (n <= 0 || d < 2) throw std::invalid_argument("decompose_ggb: bad shape");
  double dim_check = std::pow(static_cast<double>(d), n);
  if (dim_check > 4096.0 + 0.5) throw std::invalid_argument("decompose_ggb: d^n exceeds 4096");
  const Eigen::Index dim = static_cast<Eigen::Index>(std::llround(dim_check));
  if (m.rows() != dim || m.cols() != dim) throw std::invalid_argument("decompose_ggb: dimension mismatch");
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-10) throw std::invalid_argument("decompose_ggb: non-Hermitian input");
  Observable o;
  o.basis = Basis::ggb;
  o.n = n;
  o.d = d;
  std::vector<int> digits;
  digits.reserve(n);
  detail::ggb_contract_rec(m, n, d, digits, o.terms, tol, n);
  return o;
}

}  // namespace bosonmeter
