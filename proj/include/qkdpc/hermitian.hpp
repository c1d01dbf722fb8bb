#pragma once

// Dense complex Hermitian linear algebra and the entropy calculus used by the
// rest of the library. All logarithms are base 2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qkdpc/errors.hpp"

namespace qkdpc {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double kLn2 = 0.69314718055994530942;
/// Eigenvalues above -kPsdTol count as non-negative.
inline constexpr double kPsdTol = 1e-9;
inline constexpr double kHermTol = 1e-12;

namespace detail {

inline bool all_finite(const Mat& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
  return true;
}

inline double hermiticity_defect(const Mat& m) {
  if (m.rows() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.adjoint()); }

inline int product(const std::vector<int>& dims) {
  return std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<>());
}

}  // namespace detail

/// Dense Hermitian matrix with optional tensor-factor structure.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  explicit HermitianMatrix(Mat entries, std::vector<int> factor_dims = {})
      : m_(std::move(entries)), factor_dims_(std::move(factor_dims)) {
    if (m_.rows() != m_.cols()) throw DimensionMismatch("HermitianMatrix: matrix is not square");
    if (m_.rows() == 0) throw InvalidInput("HermitianMatrix: dimension must be positive");
    if (!detail::all_finite(m_)) throw InvalidInput("HermitianMatrix: non-finite entry");
    const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
    if (detail::hermiticity_defect(m_) > kHermTol * scale)
      throw InvalidInput("HermitianMatrix: matrix is not Hermitian");
    m_ = detail::symmetrize(m_);
    if (!factor_dims_.empty()) {
      for (int d : factor_dims_)
        if (d <= 0) throw StructureError("HermitianMatrix: factor dimensions must be positive");
      if (detail::product(factor_dims_) != dim())
        throw StructureError("HermitianMatrix: factor dimensions do not multiply to dim");
    }
  }

  static HermitianMatrix identity(int d, std::vector<int> factor_dims = {}) {
    return HermitianMatrix(Mat::Identity(d, d), std::move(factor_dims));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Mat& matrix() const { return m_; }
  const std::vector<int>& factor_dims() const { return factor_dims_; }
  bool has_factors() const { return !factor_dims_.empty(); }
  cplx operator()(int i, int j) const { return m_(i, j); }
  double trace() const { return m_.trace().real(); }

  HermitianMatrix with_factors(std::vector<int> dims) const { return HermitianMatrix(m_, std::move(dims)); }

 private:
  Mat m_;
  std::vector<int> factor_dims_;
};

/// State vector. Unit norm unless constructed as subnormalized.
class Ket {
 public:
  Ket() = default;
  explicit Ket(CVec amplitudes, bool subnormalized = false)
      : v_(std::move(amplitudes)), subnormalized_(subnormalized) {
    if (v_.size() == 0) throw InvalidInput("Ket: dimension must be positive");
    if (!subnormalized_ && std::abs(v_.norm() - 1.0) > kHermTol)
      throw InvalidInput("Ket: amplitudes are not normalized");
  }

  static Ket basis(int dim, int index) {
    CVec v = CVec::Zero(dim);
    v(index) = 1.0;
    return Ket(std::move(v));
  }

  int dim() const { return static_cast<int>(v_.size()); }
  const CVec& amplitudes() const { return v_; }
  bool subnormalized() const { return subnormalized_; }
  cplx inner(const Ket& other) const { return v_.dot(other.v_); }  // <this|other>
  HermitianMatrix projector() const { return HermitianMatrix(v_ * v_.adjoint()); }

 private:
  CVec v_;
  bool subnormalized_ = false;
};

/// Completely positive map given by Kraus operators: X -> sum_k K_k X K_k^dagger.
class CPMap {
 public:
  CPMap() = default;
  CPMap(std::vector<Mat> kraus, std::string label = {}) : kraus_(std::move(kraus)), label_(std::move(label)) {
    if (kraus_.empty()) throw InvalidInput("CPMap: at least one Kraus operator required");
    const auto rows = kraus_.front().rows();
    const auto cols = kraus_.front().cols();
    for (const auto& k : kraus_)
      if (k.rows() != rows || k.cols() != cols)
        throw DimensionMismatch("CPMap: Kraus operators must share input and output dimensions");
  }

  int in_dim() const { return static_cast<int>(kraus_.front().cols()); }
  int out_dim() const { return static_cast<int>(kraus_.front().rows()); }
  const std::vector<Mat>& kraus() const { return kraus_; }
  const std::string& label() const { return label_; }

  Mat apply(const Mat& x) const {
    if (x.rows() != in_dim() || x.cols() != in_dim()) throw DimensionMismatch("CPMap: input dimension mismatch");
    Mat out = Mat::Zero(out_dim(), out_dim());
    for (const auto& k : kraus_) out.noalias() += k * x * k.adjoint();
    return detail::symmetrize(out);
  }

  /// Hilbert-Schmidt adjoint: Y -> sum_k K_k^dagger Y K_k.
  Mat apply_adjoint(const Mat& y) const {
    if (y.rows() != out_dim() || y.cols() != out_dim()) throw DimensionMismatch("CPMap: output dimension mismatch");
    Mat out = Mat::Zero(in_dim(), in_dim());
    for (const auto& k : kraus_) out.noalias() += k.adjoint() * y * k;
    return detail::symmetrize(out);
  }

  /// sum_k K_k^dagger K_k
  Mat kraus_sum() const { return apply_adjoint(Mat::Identity(out_dim(), out_dim())); }

  bool is_trace_nonincreasing(double tol = 1e-10) const {
    Eigen::SelfAdjointEigenSolver<Mat> es(kraus_sum(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff() <= 1.0 + tol;
  }

  /// this o inner: first `inner`, then this map.
  CPMap compose(const CPMap& inner) const {
    if (inner.out_dim() != in_dim()) throw DimensionMismatch("CPMap: composition dimension mismatch");
    std::vector<Mat> ks;
    ks.reserve(kraus_.size() * inner.kraus_.size());
    for (const auto& a : kraus_)
      for (const auto& b : inner.kraus_) ks.push_back(a * b);
    return CPMap(std::move(ks), label_ + "*" + inner.label_);
  }

  /// X -> L^dagger Phi(R X R^dagger) L for rectangular maps L (out side) and R (in side).
  CPMap sandwich(const Mat& left_adj, const Mat& right) const {
    std::vector<Mat> ks;
    ks.reserve(kraus_.size());
    for (const auto& k : kraus_) ks.push_back(left_adj * k * right);
    return CPMap(std::move(ks), label_);
  }

 private:
  std::vector<Mat> kraus_;
  std::string label_;
};

struct EigenDecomposition {
  RVec values;  // descending
  Mat vectors;  // unitary, columns match `values`
};

/// Eigendecomposition with eigenvalues sorted in descending order.
inline EigenDecomposition eig_herm(const Mat& m) {
  if (!detail::all_finite(m)) throw InvalidInput("eig_herm: non-finite entries");
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) throw InvalidInput("eig_herm: eigensolver failed");
  const auto n = m.rows();
  EigenDecomposition out{RVec(n), Mat(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = es.eigenvalues()(n - 1 - k);
    out.vectors.col(k) = es.eigenvectors().col(n - 1 - k);
  }
  return out;
}

inline EigenDecomposition eig_herm(const HermitianMatrix& m) { return eig_herm(m.matrix()); }

inline double min_eigenvalue(const Mat& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// -sum lambda log2 lambda over the positive eigenvalues (no normalization).
inline double entropy_of_spectrum(const RVec& lambda) {
  double h = 0.0;
  for (double l : lambda)
    if (l > 0.0) h -= l * std::log2(l);
  return h;
}

inline double von_neumann_entropy(const Mat& rho) {
  const auto ed = eig_herm(rho);
  if (ed.values.size() > 0 && ed.values.minCoeff() < -kPsdTol)
    throw NegativityError("von_neumann_entropy: eigenvalue below -1e-9");
  return entropy_of_spectrum(ed.values);
}

inline double von_neumann_entropy(const HermitianMatrix& rho) { return von_neumann_entropy(rho.matrix()); }

/// D(rho||sigma) = Tr rho (log2 rho - log2 sigma).
inline double relative_entropy(const Mat& rho, const Mat& sigma) {
  if (rho.rows() != sigma.rows()) throw DimensionMismatch("relative_entropy: dimension mismatch");
  const auto er = eig_herm(rho);
  const auto es = eig_herm(sigma);
  if (er.values.minCoeff() < -kPsdTol || es.values.minCoeff() < -kPsdTol)
    throw NegativityError("relative_entropy: argument has eigenvalue below -1e-9");
  double cross = 0.0;
  for (Eigen::Index k = 0; k < es.values.size(); ++k) {
    const CVec v = es.vectors.col(k);
    const double weight = v.dot(rho * v).real();
    if (es.values(k) <= kPsdTol) {
      if (weight > kPsdTol) throw InfiniteDivergence("relative_entropy: support of rho not contained in support of sigma");
      continue;
    }
    cross += weight * std::log2(es.values(k));
  }
  return -entropy_of_spectrum(er.values) - cross;
}

inline double relative_entropy(const HermitianMatrix& rho, const HermitianMatrix& sigma) {
  return relative_entropy(rho.matrix(), sigma.matrix());
}

/// Trace out every tensor factor not listed in `keep`.
inline HermitianMatrix partial_trace(const HermitianMatrix& m, std::vector<int> keep) {
  const auto& dims = m.factor_dims();
  if (dims.empty()) throw StructureError("partial_trace: matrix has no tensor-factor structure");
  if (keep.empty()) throw StructureError("partial_trace: keep set is empty");
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  const int nf = static_cast<int>(dims.size());
  for (int k : keep)
    if (k < 0 || k >= nf) throw StructureError("partial_trace: factor index out of range");

  std::vector<int> traced;
  for (int f = 0; f < nf; ++f)
    if (!std::binary_search(keep.begin(), keep.end(), f)) traced.push_back(f);
  std::vector<int> kept_dims;
  for (int k : keep) kept_dims.push_back(dims[k]);
  std::vector<int> traced_dims;
  for (int k : traced) traced_dims.push_back(dims[k]);
  const int dk = detail::product(kept_dims);
  const int dt = detail::product(traced_dims);

  // Row-major strides of the full index.
  std::vector<int> stride(nf, 1);
  for (int f = nf - 2; f >= 0; --f) stride[f] = stride[f + 1] * dims[f + 1];
  auto compose = [&](int kept_index, int traced_index) {
    int full = 0;
    for (int p = static_cast<int>(keep.size()) - 1; p >= 0; --p) {
      full += (kept_index % kept_dims[p]) * stride[keep[p]];
      kept_index /= kept_dims[p];
    }
    for (int p = static_cast<int>(traced.size()) - 1; p >= 0; --p) {
      full += (traced_index % traced_dims[p]) * stride[traced[p]];
      traced_index /= traced_dims[p];
    }
    return full;
  };

  Mat out = Mat::Zero(dk, dk);
  const Mat& a = m.matrix();
  for (int i = 0; i < dk; ++i)
    for (int j = 0; j < dk; ++j) {
      cplx s = 0.0;
      for (int t = 0; t < dt; ++t) s += a(compose(i, t), compose(j, t));
      out(i, j) = s;
    }
  return HermitianMatrix(detail::symmetrize(out), kept_dims.size() > 1 ? kept_dims : std::vector<int>{});
}

inline HermitianMatrix apply_cp_map(const CPMap& map, const HermitianMatrix& rho) {
  return HermitianMatrix(map.apply(rho.matrix()));
}

struct GramFactorization {
  std::vector<Ket> vectors;  // vectors[i] has dimension `rank`
  int rank = 0;
  Mat factor;                // rank x n, columns are the vectors
};

/// Factor a PSD Gram matrix as W^dagger W with W = sum_{lambda_j > tol} sqrt(lambda_j) |j><v_j|.
inline GramFactorization gram_factorize(const Mat& g, double tol = 1e-10) {
  const auto ed = eig_herm(detail::symmetrize(g));
  if (ed.values.size() > 0 && ed.values.minCoeff() < -tol) throw NotPsdError("gram_factorize: matrix is not PSD");
  int rank = 0;
  while (rank < ed.values.size() && ed.values(rank) > tol) ++rank;
  const auto n = g.rows();
  Mat w(rank, n);
  for (int j = 0; j < rank; ++j) w.row(j) = std::sqrt(ed.values(j)) * ed.vectors.col(j).adjoint();
  GramFactorization out;
  out.rank = rank;
  out.factor = w;
  out.vectors.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) out.vectors.emplace_back(CVec(w.col(i)), true);
  return out;
}

inline GramFactorization gram_factorize(const HermitianMatrix& g, double tol = 1e-10) {
  return gram_factorize(g.matrix(), tol);
}

/// <a|b> for coherent states with complex amplitudes a and b.
inline cplx coherent_overlap(cplx a, cplx b) {
  return std::exp(-0.5 * std::norm(a) - 0.5 * std::norm(b) + std::conj(a) * b);
}

/// h(x) = -x log2 x - (1-x) log2 (1-x), with h(0) = h(1) = 0.
inline double binary_entropy(double x) {
  if (x < 0.0 || x > 1.0) throw InvalidInput("binary_entropy: argument outside [0,1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Mat projector(int dim, std::initializer_list<int> indices) {
  Mat p = Mat::Zero(dim, dim);
  for (int i : indices) p(i, i) = 1.0;
  return p;
}

/// Orthonormal basis (as columns) of the range of a PSD matrix.
inline Mat range_basis(const Mat& psd, double rel_tol = 1e-12) {
  const auto ed = eig_herm(detail::symmetrize(psd));
  const double top = ed.values.size() ? std::max(ed.values(0), 0.0) : 0.0;
  int r = 0;
  while (r < ed.values.size() && ed.values(r) > rel_tol * std::max(top, 1e-300)) ++r;
  return ed.vectors.leftCols(r);
}

/// Orthonormal basis (as columns) of the kernel of a PSD matrix.
inline Mat kernel_basis(const Mat& psd, double rel_tol = 1e-12) {
  const auto ed = eig_herm(detail::symmetrize(psd));
  const double top = ed.values.size() ? std::max(ed.values(0), 0.0) : 0.0;
  int r = 0;
  while (r < ed.values.size() && ed.values(r) > rel_tol * std::max(top, 1e-300)) ++r;
  return ed.vectors.rightCols(ed.values.size() - r);
}

}  // namespace qkdpc
