#pragma once

// Dense complex linear algebra for the 2x2 operators and 4x4 superoperators
// of a single qubit. Fixed-size, value-semantic, allocation-free.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <string>

#include "epmft/errors.hpp"

namespace epmft {

using cplx = std::complex<double>;

inline constexpr double kDefaultRankTol = 1e-10;

template <std::size_t N>
struct Vector {
  std::array<cplx, N> data{};

  cplx& operator[](std::size_t i) { return data[i]; }
  const cplx& operator[](std::size_t i) const { return data[i]; }

  double norm() const {
    double s = 0.0;
    for (const auto& x : data) s += std::norm(x);
    return std::sqrt(s);
  }
};

// Row-major N x N complex matrix.
template <std::size_t N>
struct Matrix {
  std::array<cplx, N * N> data{};

  static constexpr std::size_t dim = N;

  static Matrix zero() { return Matrix{}; }

  static Matrix identity() {
    Matrix m;
    for (std::size_t i = 0; i < N; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(const std::array<cplx, N>& d) {
    Matrix m;
    for (std::size_t i = 0; i < N; ++i) m(i, i) = d[i];
    return m;
  }

  cplx& operator()(std::size_t r, std::size_t c) { return data[r * N + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data[r * N + c]; }

  Matrix& operator+=(const Matrix& o) {
    for (std::size_t i = 0; i < N * N; ++i) data[i] += o.data[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    for (std::size_t i = 0; i < N * N; ++i) data[i] -= o.data[i];
    return *this;
  }
  Matrix& operator*=(cplx s) {
    for (auto& x : data) x *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, cplx s) { return a *= s; }
  friend Matrix operator*(cplx s, Matrix a) { return a *= s; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    Matrix out;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t k = 0; k < N; ++k) {
        const cplx ark = a(r, k);
        if (ark == cplx{}) continue;
        for (std::size_t c = 0; c < N; ++c) out(r, c) += ark * b(k, c);
      }
    return out;
  }

  friend Vector<N> operator*(const Matrix& a, const Vector<N>& v) {
    Vector<N> out;
    for (std::size_t r = 0; r < N; ++r) {
      cplx s{};
      for (std::size_t c = 0; c < N; ++c) s += a(r, c) * v[c];
      out[r] = s;
    }
    return out;
  }

  Matrix adjoint() const {
    Matrix out;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t c = 0; c < N; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
  }

  Matrix transpose() const {
    Matrix out;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t c = 0; c < N; ++c) out(c, r) = (*this)(r, c);
    return out;
  }

  Matrix conj() const {
    Matrix out;
    for (std::size_t i = 0; i < N * N; ++i) out.data[i] = std::conj(data[i]);
    return out;
  }

  cplx trace() const {
    cplx t{};
    for (std::size_t i = 0; i < N; ++i) t += (*this)(i, i);
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& x : data) s += std::norm(x);
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& x : data) m = std::max(m, std::abs(x));
    return m;
  }

  bool all_finite() const {
    return std::all_of(data.begin(), data.end(),
                       [](const cplx& x) { return std::isfinite(x.real()) && std::isfinite(x.imag()); });
  }

  // Largest elementwise deviation from M = M^dagger.
  double hermiticity_defect() const {
    double m = 0.0;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t c = r; c < N; ++c)
        m = std::max(m, std::abs((*this)(r, c) - std::conj((*this)(c, r))));
    return m;
  }

  Matrix hermitian_part() const { return (*this + adjoint()) * 0.5; }
};

using Matrix2 = Matrix<2>;
using Matrix4 = Matrix<4>;
using Vector4 = Vector<4>;

template <std::size_t N>
double distance(const Matrix<N>& a, const Matrix<N>& b) {
  return (a - b).frobenius_norm();
}

// Column stacking: col[rho] = (rho00, rho10, rho01, rho11). Under this ordering
// vec(A rho B) = (B^T kron A) vec(rho).
inline Vector4 vectorize(const Matrix2& m) {
  return Vector4{{m(0, 0), m(1, 0), m(0, 1), m(1, 1)}};
}

inline Matrix2 unvectorize(const Vector4& v) {
  Matrix2 m;
  m(0, 0) = v[0];
  m(1, 0) = v[1];
  m(0, 1) = v[2];
  m(1, 1) = v[3];
  return m;
}

inline Matrix4 kron(const Matrix2& a, const Matrix2& b) {
  Matrix4 out;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t l = 0; l < 2; ++l) out(2 * i + k, 2 * j + l) = a(i, j) * b(k, l);
  return out;
}

template <std::size_t N>
Matrix<N> power(Matrix<N> base, unsigned exponent) {
  Matrix<N> acc = Matrix<N>::identity();
  while (exponent > 0) {
    if (exponent & 1u) acc = acc * base;
    exponent >>= 1u;
    if (exponent > 0) base = base * base;
  }
  return acc;
}

// Solves A x = b by Gaussian elimination with partial pivoting. Throws
// InvariantViolation when a pivot falls below `pivot_tol` times the largest
// entry of A.
template <std::size_t N>
Vector<N> solve(Matrix<N> a, Vector<N> b, double pivot_tol = 1e-12) {
  const double scale = std::max(a.max_abs(), 1e-300);
  for (std::size_t col = 0; col < N; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < N; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (std::abs(a(piv, col)) <= pivot_tol * scale)
      raise(Errc::InvariantViolation, "singular linear system");
    if (piv != col) {
      for (std::size_t c = 0; c < N; ++c) std::swap(a(col, c), a(piv, c));
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < N; ++r) {
      const cplx f = a(r, col) / a(col, col);
      if (f == cplx{}) continue;
      for (std::size_t c = col; c < N; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  Vector<N> x;
  for (std::size_t i = N; i-- > 0;) {
    cplx s = b[i];
    for (std::size_t c = i + 1; c < N; ++c) s -= a(i, c) * x[c];
    x[i] = s / a(i, i);
  }
  return x;
}

template <std::size_t N>
Matrix<N> inverse(const Matrix<N>& a) {
  Matrix<N> out;
  for (std::size_t c = 0; c < N; ++c) {
    Vector<N> e;
    e[c] = 1.0;
    const Vector<N> x = solve(a, e);
    for (std::size_t r = 0; r < N; ++r) out(r, c) = x[r];
  }
  return out;
}

template <std::size_t N>
struct HermitianEigen {
  std::array<double, N> values{};  // descending
  Matrix<N> vectors;               // column k pairs with values[k]

  Vector<N> column(std::size_t k) const {
    Vector<N> v;
    for (std::size_t r = 0; r < N; ++r) v[r] = vectors(r, k);
    return v;
  }

  Matrix<N> reconstruct() const {
    std::array<cplx, N> d{};
    for (std::size_t k = 0; k < N; ++k) d[k] = values[k];
    return vectors * Matrix<N>::diagonal(d) * vectors.adjoint();
  }
};

// Cyclic complex Jacobi. Each rotation first removes the phase of the pivot
// element, then applies the real symmetric Jacobi rotation.
template <std::size_t N>
HermitianEigen<N> hermitian_eig(const Matrix<N>& m, double herm_tol = kDefaultRankTol) {
  if (!m.all_finite()) raise(Errc::InvariantViolation, "non-finite matrix entry");
  if (m.hermiticity_defect() > herm_tol)
    raise(Errc::InvariantViolation, "matrix is not Hermitian within tolerance");

  Matrix<N> a = m.hermitian_part();
  Matrix<N> v = Matrix<N>::identity();
  const double scale = std::max(1.0, a.frobenius_norm());

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t c = 0; c < N; ++c)
        if (r != c) off += std::norm(a(r, c));
    if (std::sqrt(off) < 1e-14 * scale) break;

    for (std::size_t p = 0; p + 1 < N; ++p) {
      for (std::size_t q = p + 1; q < N; ++q) {
        const cplx apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag < 1e-300) continue;
        const cplx phase = apq / mag;
        const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const cplx ph_conj = std::conj(phase);

        // A <- A G with G = [[c, s], [-s e^{-i phi}, c e^{-i phi}]] on (p, q).
        for (std::size_t r = 0; r < N; ++r) {
          const cplx arp = a(r, p), arq = a(r, q);
          a(r, p) = c * arp - s * ph_conj * arq;
          a(r, q) = s * arp + c * ph_conj * arq;
        }
        // A <- G^dagger A
        for (std::size_t col = 0; col < N; ++col) {
          const cplx apc = a(p, col), aqc = a(q, col);
          a(p, col) = c * apc - s * phase * aqc;
          a(q, col) = s * apc + c * phase * aqc;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (std::size_t r = 0; r < N; ++r) {
          const cplx vrp = v(r, p), vrq = v(r, q);
          v(r, p) = c * vrp - s * ph_conj * vrq;
          v(r, q) = s * vrp + c * ph_conj * vrq;
        }
      }
    }
  }

  std::array<std::size_t, N> order;
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i).real() > a(j, j).real(); });
  HermitianEigen<N> out;
  for (std::size_t k = 0; k < N; ++k) {
    out.values[k] = a(order[k], order[k]).real();
    for (std::size_t r = 0; r < N; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

// Eigenvalues of a general complex matrix via shifted QR iteration on the
// full active block (Wilkinson shift, deflation on the last row). Deflated
// rows leave the matrix block upper triangular, so the off-block entries are
// never updated. Meant for N <= 4; there is no Hessenberg reduction.
template <std::size_t N>
std::array<cplx, N> eigenvalues(const Matrix<N>& m) {
  if (!m.all_finite()) raise(Errc::InvariantViolation, "non-finite matrix entry");
  std::array<cplx, N> out{};
  Matrix<N> a = m;
  std::size_t n = N;
  const double eps = 1e-15 * std::max(1.0, m.frobenius_norm());
  int stall = 0;

  while (n > 1) {
    double tail = 0.0;
    for (std::size_t c = 0; c + 1 < n; ++c) tail = std::max(tail, std::abs(a(n - 1, c)));
    if (tail <= eps) {
      out[n - 1] = a(n - 1, n - 1);
      --n;
      stall = 0;
      continue;
    }
    if (++stall > 500) raise(Errc::InvariantViolation, "QR eigenvalue iteration did not converge");

    // Wilkinson shift from the trailing 2x2 block.
    const cplx w = a(n - 2, n - 2), x = a(n - 2, n - 1), y = a(n - 1, n - 2), z = a(n - 1, n - 1);
    const cplx half_tr = 0.5 * (w + z);
    const cplx disc = std::sqrt(0.25 * (w - z) * (w - z) + x * y);
    cplx mu = (std::abs(half_tr + disc - z) < std::abs(half_tr - disc - z)) ? half_tr + disc : half_tr - disc;
    if (stall % 11 == 10) mu += cplx(0.75 * tail, 0.25 * tail);  // exceptional shift

    // QR of the active block via Gram-Schmidt with reorthogonalization.
    Matrix<N> q, r;
    for (std::size_t j = 0; j < n; ++j) {
      std::array<cplx, N> col{};
      for (std::size_t i = 0; i < n; ++i) col[i] = a(i, j) - (i == j ? mu : cplx{});
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < j; ++k) {
          cplx dot{};
          for (std::size_t i = 0; i < n; ++i) dot += std::conj(q(i, k)) * col[i];
          r(k, j) += dot;
          for (std::size_t i = 0; i < n; ++i) col[i] -= dot * q(i, k);
        }
      }
      double nrm = 0.0;
      for (std::size_t i = 0; i < n; ++i) nrm += std::norm(col[i]);
      nrm = std::sqrt(nrm);
      r(j, j) = nrm;
      if (nrm > 1e-300) {
        for (std::size_t i = 0; i < n; ++i) q(i, j) = col[i] / nrm;
      } else {
        // Rank-deficient column: complete the basis with a unit vector orthogonal to the rest.
        for (std::size_t e = 0; e < n; ++e) {
          std::array<cplx, N> cand{};
          cand[e] = 1.0;
          for (std::size_t k = 0; k < j; ++k) {
            cplx dot{};
            for (std::size_t i = 0; i < n; ++i) dot += std::conj(q(i, k)) * cand[i];
            for (std::size_t i = 0; i < n; ++i) cand[i] -= dot * q(i, k);
          }
          double cn = 0.0;
          for (std::size_t i = 0; i < n; ++i) cn += std::norm(cand[i]);
          cn = std::sqrt(cn);
          if (cn > 0.5) {
            for (std::size_t i = 0; i < n; ++i) q(i, j) = cand[i] / cn;
            break;
          }
        }
      }
    }
    // a <- r q + mu I on the active block.
    Matrix<N> next = a;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        cplx s{};
        for (std::size_t k = i; k < n; ++k) s += r(i, k) * q(k, j);
        next(i, j) = s + (i == j ? mu : cplx{});
      }
    a = next;
  }
  out[0] = a(0, 0);
  return out;
}

struct PsdRoots {
  Matrix2 sqrt;
  Matrix2 inv_sqrt;
};

// Principal square root of a PSD 2x2 matrix. Eigenvalues in (-rank_tol, 0)
// are clamped to zero.
inline Matrix2 psd_sqrt(const Matrix2& m, double rank_tol = kDefaultRankTol) {
  const auto eig = hermitian_eig(m);
  if (eig.values[1] < -rank_tol) raise(Errc::InvariantViolation, "matrix is not positive semidefinite");
  std::array<cplx, 2> d{std::sqrt(std::max(eig.values[0], 0.0)), std::sqrt(std::max(eig.values[1], 0.0))};
  return eig.vectors * Matrix2::diagonal(d) * eig.vectors.adjoint();
}

inline PsdRoots psd_sqrt_and_invsqrt(const Matrix2& m, double rank_tol = kDefaultRankTol) {
  const auto eig = hermitian_eig(m);
  if (eig.values[1] < -rank_tol) raise(Errc::InvariantViolation, "matrix is not positive semidefinite");
  if (eig.values[1] <= rank_tol)
    raise(Errc::SingularFixedPoint, "smallest eigenvalue " + std::to_string(eig.values[1]) +
                                        " is not above the rank tolerance");
  std::array<cplx, 2> root{std::sqrt(eig.values[0]), std::sqrt(eig.values[1])};
  std::array<cplx, 2> inv_root{1.0 / root[0], 1.0 / root[1]};
  return {eig.vectors * Matrix2::diagonal(root) * eig.vectors.adjoint(),
          eig.vectors * Matrix2::diagonal(inv_root) * eig.vectors.adjoint()};
}

}  // namespace epmft
