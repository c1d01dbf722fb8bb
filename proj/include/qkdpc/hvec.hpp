#pragma once

// Real coordinates for Hermitian matrices.
//
// A d x d Hermitian matrix is stored as d*d reals in an orthonormal basis of
// the real vector space H^d with inner product Re Tr(A^dagger B): diagonal
// entries first, then for each pair i < j the values sqrt(2) Re X_ij and
// sqrt(2) Im X_ij. Linear maps between Hermitian spaces become real matrices
// and Tr(A X) for Hermitian A, X is the dot product of the packed vectors.

#include <cmath>
#include <functional>

#include "qkdpc/hermitian.hpp"

namespace qkdpc::hvec {

inline constexpr double kSqrt2 = 1.41421356237309504880;

inline int size(int d) { return d * d; }

inline RVec pack(const Mat& x) {
  const int d = static_cast<int>(x.rows());
  RVec v(size(d));
  int k = 0;
  for (int i = 0; i < d; ++i) v(k++) = x(i, i).real();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const cplx z = 0.5 * (x(i, j) + std::conj(x(j, i)));
      v(k++) = kSqrt2 * z.real();
      v(k++) = kSqrt2 * z.imag();
    }
  return v;
}

template <typename Derived>
Mat unpack(const Eigen::MatrixBase<Derived>& v, int d) {
  Mat x(d, d);
  int k = 0;
  for (int i = 0; i < d; ++i) x(i, i) = v(k++);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const double re = v(k++) / kSqrt2;
      const double im = v(k++) / kSqrt2;
      x(i, j) = cplx(re, im);
      x(j, i) = cplx(re, -im);
    }
  return x;
}

/// k-th orthonormal basis element of H^d.
inline Mat basis(int d, int k) {
  RVec e = RVec::Zero(size(d));
  e(k) = 1.0;
  return unpack(e, d);
}

/// Real matrix of a linear map H^{d_in} -> H^{d_out}.
inline RMat superop(const std::function<Mat(const Mat&)>& f, int d_in, int d_out) {
  RMat m(size(d_out), size(d_in));
  for (int k = 0; k < size(d_in); ++k) m.col(k) = pack(f(basis(d_in, k)));
  return m;
}

inline RMat map_matrix(const CPMap& map) {
  return superop([&](const Mat& x) { return map.apply(x); }, map.in_dim(), map.out_dim());
}

/// Hessian of -log det at Y in packed coordinates: E -> Y^{-1} E Y^{-1}.
inline RMat logdet_hessian(const Mat& y_inv) {
  const int d = static_cast<int>(y_inv.rows());
  return superop([&](const Mat& e) { return Mat(y_inv * e * y_inv); }, d, d);
}

/// Log-divided differences of a positive spectrum (first divided differences of ln).
inline RMat log_divided_differences(const RVec& lambda) {
  const auto n = lambda.size();
  RMat g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = lambda(i), b = lambda(j);
      if (a == b)
        g(i, j) = 1.0 / a;
      else  // log1p keeps full relative accuracy when a and b nearly coincide
        g(i, j) = std::log1p((a - b) / b) / (a - b);
    }
  return g;
}

/// Frechet derivative of the natural matrix logarithm at X = U diag(lambda) U^dagger,
/// as a real matrix in packed coordinates.
inline RMat dlog_matrix(const EigenDecomposition& ed) {
  const RMat gamma = log_divided_differences(ed.values);
  const int d = static_cast<int>(ed.values.size());
  const Mat& u = ed.vectors;
  return superop(
      [&](const Mat& e) {
        Mat t = u.adjoint() * e * u;
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) t(i, j) *= gamma(i, j);
        return Mat(u * t * u.adjoint());
      },
      d, d);
}

/// Natural matrix logarithm from an eigendecomposition with positive spectrum.
inline Mat log_from_eig(const EigenDecomposition& ed) {
  return ed.vectors * ed.values.array().log().matrix().asDiagonal() * ed.vectors.adjoint();
}

}  // namespace qkdpc::hvec
