#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace bosonmeter {

using cxd = std::complex<double>;
using MatrixXcd = Eigen::MatrixXcd;
using VectorXcd = Eigen::VectorXcd;

// Hermitian orthogonal basis of d x d matrices: index 0 is the identity,
// followed by the symmetric pair matrices |j><k|+|k><j| (j<k, lexicographic),
// the antisymmetric ones -i|j><k|+i|k><j| (same order), and the d-1 diagonal
// matrices sqrt(2/(l(l+1))) (sum_{j<l} |j><j| - l|l><l|), l = 1..d-1.
// Every non-identity element E satisfies tr(E^2) = 2 and tr(E) = 0.

enum class GGBKind { identity, symmetric, antisymmetric, diagonal };

struct GGBIndex {
  GGBKind kind;
  int j = 0;  // first basis ket (symmetric/antisymmetric)
  int k = 0;  // second basis ket
  int l = 0;  // diagonal rank
};

inline int ggb_basis_size(int d) { return d * d; }

inline GGBIndex ggb_decode(int d, int index) {
  if (d < 2) throw std::invalid_argument("ggb_decode: dimension must be >= 2");
  if (index < 0 || index >= d * d) throw std::invalid_argument("ggb_decode: index out of range");
  if (index == 0) return {GGBKind::identity, 0, 0, 0};
  const int pairs = d * (d - 1) / 2;
  int r = index - 1;
  GGBKind kind;
  if (r < pairs) {
    kind = GGBKind::symmetric;
  } else if (r < 2 * pairs) {
    kind = GGBKind::antisymmetric;
    r -= pairs;
  } else {
    return {GGBKind::diagonal, 0, 0, r - 2 * pairs + 1};
  }
  // r-th (j,k) pair with j<k in lexicographic order.
  int j = 0;
  int row = d - 1;
  while (r >= row) {
    r -= row;
    --row;
    ++j;
  }
  return {kind, j, j + 1 + r, 0};
}

inline MatrixXcd ggb_matrix(int d, int index) {
  const GGBIndex g = ggb_decode(d, index);
  MatrixXcd m = MatrixXcd::Zero(d, d);
  switch (g.kind) {
    case GGBKind::identity:
      m.setIdentity();
      break;
    case GGBKind::symmetric:
      m(g.j, g.k) = 1.0;
      m(g.k, g.j) = 1.0;
      break;
    case GGBKind::antisymmetric:
      m(g.j, g.k) = cxd(0.0, -1.0);
      m(g.k, g.j) = cxd(0.0, 1.0);
      break;
    case GGBKind::diagonal: {
      const double norm = std::sqrt(2.0 / (static_cast<double>(g.l) * (g.l + 1)));
      for (int j = 0; j < g.l; ++j) m(j, j) = norm;
      m(g.l, g.l) = -norm * g.l;
      break;
    }
  }
  return m;
}

// Eigenbasis with a deterministic completion: columns of `vectors` are an
// orthonormal eigenbasis, vectors.col(c) has eigenvalue values[c].
struct GGBEigensystem {
  MatrixXcd vectors;
  Eigen::VectorXd values;
};

inline GGBEigensystem make_ggb_eigensystem(int d, int index) {
  const GGBIndex g = ggb_decode(d, index);
  GGBEigensystem e;
  e.vectors = MatrixXcd::Identity(d, d);
  e.values = Eigen::VectorXd::Zero(d);
  const double s = 1.0 / std::sqrt(2.0);
  switch (g.kind) {
    case GGBKind::identity:
      e.values.setOnes();
      break;
    case GGBKind::symmetric:
      e.vectors(g.j, g.j) = s;
      e.vectors(g.k, g.j) = s;
      e.vectors(g.j, g.k) = s;
      e.vectors(g.k, g.k) = -s;
      e.values[g.j] = 1.0;
      e.values[g.k] = -1.0;
      break;
    case GGBKind::antisymmetric:
      e.vectors(g.j, g.j) = s;
      e.vectors(g.k, g.j) = cxd(0.0, s);
      e.vectors(g.j, g.k) = s;
      e.vectors(g.k, g.k) = cxd(0.0, -s);
      e.values[g.j] = 1.0;
      e.values[g.k] = -1.0;
      break;
    case GGBKind::diagonal: {
      const double norm = std::sqrt(2.0 / (static_cast<double>(g.l) * (g.l + 1)));
      for (int j = 0; j < g.l; ++j) e.values[j] = norm;
      e.values[g.l] = -norm * g.l;
      break;
    }
  }
  return e;
}

// Process-wide cache; eigensystems are immutable once built.
inline const GGBEigensystem& ggb_eigensystem(int d, int index) {
  static std::map<std::pair<int, int>, GGBEigensystem> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(d, index);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, make_ggb_eigensystem(d, index)).first;
  return it->second;
}

inline MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace bosonmeter
