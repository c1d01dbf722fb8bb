#pragma once

// Independent constructions used as oracles and as a post-solve audit:
// the purification embedding of a partially characterized state into the
// sqrt(1-eps)|phi> + sqrt(eps)|phi_perp> form, and the reconstruction of
// vectors (and per-announcement operators) from a Gram matrix.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "qkdpc/solver.hpp"

namespace qkdpc {

struct EmbeddingResult {
  Ket psi;                    // on a (x) S (x) F, dims {d, d, 2}
  double eps_prime = 0.0;     // 1 - <phi|rho|phi>
  double phase = 0.0;         // global phase removed from the maximal-overlap purification
  double reduced_check = 0.0; // max |Tr_SF |psi><psi| - rho|
  int dim = 0;
};

namespace detail {

/// Unitary whose first column is the unit vector a.
inline Mat unitary_with_first_column(const CVec& a) {
  const int d = static_cast<int>(a.size());
  Mat m(d, d + 1);
  m.col(0) = a;
  m.rightCols(d) = Mat::Identity(d, d);
  Eigen::HouseholderQR<Mat> qr(m);
  Mat q = qr.householderQ() * Mat::Identity(d, d);
  const cplx overlap = q.col(0).dot(a);
  q.col(0) *= overlap / std::abs(overlap);
  return q;
}

}  // namespace detail

/// Maximal-overlap purification of rho aligned with |phi>|0>_S, then the fictitious F qubit.
inline EmbeddingResult lemma1_embed(const HermitianMatrix& rho, const Ket& phi, double eps) {
  const int d = rho.dim();
  if (phi.dim() != d) throw DimensionMismatch("lemma1_embed: reference and state dimensions differ");
  if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidInput("lemma1_embed: eps must lie in [0,1]");
  const Mat& r = rho.matrix();
  const CVec& f = phi.amplitudes();
  const double fid = f.dot(r * f).real();
  if (fid < 1.0 - eps - 1e-10) throw PreconditionViolation("lemma1_embed: fidelity with the reference is below 1 - eps");

  // Canonical purification sum_k sqrt(l_k) |e_k>|k>_S, then (I (x) U) to align with |phi>|0>.
  const auto ed = eig_herm(r);
  // Eigenvalues at roundoff level are zero; their square roots would otherwise leak ~1e-8 amplitudes.
  const double floor = 1e-14 * std::max(1.0, ed.values(0));
  auto root = [&](int k) { return ed.values(k) > floor ? std::sqrt(ed.values(k)) : 0.0; };
  CVec v(d);  // v_k = sqrt(l_k) <phi|e_k>
  for (int k = 0; k < d; ++k) v(k) = root(k) * f.dot(ed.vectors.col(k));
  const double vn = v.norm();
  // <0|U|k> = conj(v_k)/|v| makes <phi,0|psi''> = |v| = sqrt(<phi|rho|phi>).
  Mat u;
  if (vn > 0.0) {
    const Mat q = detail::unitary_with_first_column(v / vn);
    u = q.adjoint();
  } else {
    u = Mat::Identity(d, d);
  }
  CVec psi_as = CVec::Zero(d * d);  // index a * d + s
  for (int k = 0; k < d; ++k) {
    const double sl = root(k);
    for (int a = 0; a < d; ++a)
      for (int s = 0; s < d; ++s) psi_as(a * d + s) += sl * ed.vectors(a, k) * u(s, k);
  }
  CVec ref_as = CVec::Zero(d * d);
  for (int a = 0; a < d; ++a) ref_as(a * d) = f(a);
  const cplx ov = ref_as.dot(psi_as);
  const double phase = std::abs(ov) > 0.0 ? std::arg(ov) : 0.0;
  psi_as *= std::exp(cplx(0.0, -phase));

  EmbeddingResult out;
  out.dim = d;
  out.phase = phase;
  out.eps_prime = std::clamp(1.0 - std::abs(ov) * std::abs(ov), 0.0, 1.0);
  // eps' = eps up to roundoff leaves F in |0>.
  if (std::abs(out.eps_prime - eps) <= 1e-12) out.eps_prime = eps;
  double c0 = 0.0, c1 = 1.0;
  if (out.eps_prime < 1.0) {
    c0 = std::sqrt(std::clamp((1.0 - eps) / (1.0 - out.eps_prime), 0.0, 1.0));
    c1 = std::sqrt(std::clamp((eps - out.eps_prime) / (1.0 - out.eps_prime), 0.0, 1.0));
  }
  CVec psi(2 * d * d);
  for (int i = 0; i < d * d; ++i) {
    psi(2 * i) = c0 * psi_as(i);
    psi(2 * i + 1) = c1 * psi_as(i);
  }
  psi.normalize();
  out.psi = Ket(psi);
  const HermitianMatrix reduced = partial_trace(out.psi.projector().with_factors({d, d, 2}), {0});
  out.reduced_check = (reduced.matrix() - r).cwiseAbs().maxCoeff();
  return out;
}

struct ReconstructionResult {
  std::vector<Ket> vectors;    // reconstructed family, dimension rank
  std::vector<Mat> operators;  // M_gamma, one per announcement block
  double inner_product_residual = 0.0;
  double operator_residual = 0.0;  // max |M_gamma W - V_gamma|
  double right_inverse_residual = 0.0;
  int rank = 0;

  double residual() const { return std::max({inner_product_residual, operator_residual, right_inverse_residual}); }
};

/// Factor G into vectors reproducing its entries. With announcement blocks (index lists of
/// equal length into G), also build g = sum_gamma g_gamma, W, W^R and M_gamma = V_gamma W^R.
inline ReconstructionResult reconstruct_from_gram(const Mat& gram,
                                                  const std::optional<std::vector<std::vector<int>>>& blocks = {},
                                                  double tol = 1e-10) {
  if (gram.rows() != gram.cols()) throw DimensionMismatch("reconstruct_from_gram: G must be square");
  const Mat g = detail::symmetrize(gram);
  if (min_eigenvalue(g) < -1e-9) throw NotPsdError("reconstruct_from_gram: G is not PSD");
  // Flooring at zero loses at most the -1e-9 slack; residuals report the difference.
  const auto ed = eig_herm(g);
  int rank = 0;
  for (Eigen::Index k = 0; k < ed.values.size(); ++k)
    if (ed.values(k) > tol * std::max(1.0, ed.values.maxCoeff())) ++rank;
  Mat v(rank, g.cols());
  for (int j = 0; j < rank; ++j) v.row(j) = std::sqrt(ed.values(j)) * ed.vectors.col(j).adjoint();

  ReconstructionResult out;
  if (!blocks) {
    out.rank = rank;
    for (Eigen::Index i = 0; i < g.cols(); ++i) out.vectors.emplace_back(CVec(v.col(i)), true);
    out.inner_product_residual = (v.adjoint() * v - g).cwiseAbs().maxCoeff();
    return out;
  }

  const auto& bl = *blocks;
  if (bl.empty()) throw InvalidInput("reconstruct_from_gram: empty announcement partition");
  const int k = static_cast<int>(bl[0].size());
  for (const auto& b : bl) {
    if (static_cast<int>(b.size()) != k) throw DimensionMismatch("reconstruct_from_gram: announcement blocks differ in size");
    for (int idx : b)
      if (idx < 0 || idx >= g.rows()) throw InvalidInput("reconstruct_from_gram: block index outside G");
  }
  Mat small = Mat::Zero(k, k);
  auto sub = [&](const std::vector<int>& b) {
    Mat s(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) s(i, j) = g(b[i], b[j]);
    return s;
  };
  for (const auto& b : bl) small += sub(b);
  const auto eg = eig_herm(small);
  int r = 0;
  for (Eigen::Index j = 0; j < eg.values.size(); ++j)
    if (eg.values(j) > tol * std::max(1.0, eg.values.maxCoeff())) ++r;
  Mat w(r, k), wr(k, r);
  for (int j = 0; j < r; ++j) {
    const double s = std::sqrt(eg.values(j));
    w.row(j) = s * eg.vectors.col(j).adjoint();
    wr.col(j) = eg.vectors.col(j) / s;
  }
  out.rank = r;
  for (int i = 0; i < k; ++i) out.vectors.emplace_back(CVec(w.col(i)), true);
  out.right_inverse_residual = r ? (w * wr - Mat::Identity(r, r)).cwiseAbs().maxCoeff() : 0.0;
  Mat summed = Mat::Zero(k, k);
  for (const auto& b : bl) {
    Mat vg(v.rows(), k);
    for (int i = 0; i < k; ++i) vg.col(i) = v.col(b[i]);
    Mat m = vg * wr;
    const Mat mw = m * w;
    out.operator_residual = std::max(out.operator_residual, k ? (mw - vg).cwiseAbs().maxCoeff() : 0.0);
    summed += mw.adjoint() * mw;
    out.operators.push_back(std::move(m));
  }
  out.inner_product_residual =
      std::max((w.adjoint() * w - small).cwiseAbs().maxCoeff(), (summed - small).cwiseAbs().maxCoeff());
  if (out.operator_residual > 1e-8)
    throw RankInconsistency("reconstruct_from_gram: announcement columns are not spanned by the summed Gram");
  return out;
}

struct AuditReport {
  bool pass = false;
  double certificate = 0.0;       // worst failing certificate check value (0 when all pass)
  double factorization = 0.0;     // max |V^dagger V - G_family|
  double norms = 0.0;             // max | |v|^2 - 1 |
  double orthogonality = 0.0;     // max |<phi_j^perp|phi_j>|
  double references = 0.0;        // max |<phi_i|phi_j> - reference|
};

/// Post-solve audit: certificate checks and, when a Gram block exists, a reconstruction of the
/// vector family {phi_j, phi_j^perp} from the optimal Gram matrix.
inline AuditReport audit_solution(const ConicProblem& pr, const SolveResult& res, double tol = 1e-8) {
  AuditReport a;
  const auto cert = certify(pr, res);
  bool ok = cert.all_pass();
  for (const auto& c : cert.checks)
    if (!c.pass) a.certificate = std::max(a.certificate, std::abs(c.value));
  if (pr.gram_block >= 0 && pr.layout && static_cast<int>(res.blocks.size()) > pr.gram_block) {
    const auto& lay = *pr.layout;
    const Mat fam = family_gram(lay, res.block(pr.gram_block));
    const Mat fam_psd = [&] {
      const auto ed = eig_herm(detail::symmetrize(fam));
      return Mat(ed.vectors * ed.values.cwiseMax(0.0).asDiagonal() * ed.vectors.adjoint());
    }();
    const auto rec = reconstruct_from_gram(fam_psd);
    Mat vv(rec.rank, fam.cols());
    for (Eigen::Index i = 0; i < fam.cols(); ++i) vv.col(i) = rec.vectors[i].amplitudes();
    a.factorization = (vv.adjoint() * vv - fam).cwiseAbs().maxCoeff();
    for (int j = 0; j < 2 * lay.n; ++j) a.norms = std::max(a.norms, std::abs(vv.col(j).squaredNorm() - 1.0));
    for (int j = 0; j < lay.n; ++j)
      a.orthogonality = std::max(a.orthogonality, std::abs(vv.col(lay.n + j).dot(vv.col(j))));
    for (int i = 0; i < lay.n; ++i)
      for (int j = 0; j < lay.n; ++j)
        a.references = std::max(a.references, std::abs(vv.col(i).dot(vv.col(j)) - lay.reference(i, j)));
    // The reduced layout reproduces the references only up to its truncation.
    const double slack = tol + lay.truncation + pr.blocks[pr.gram_block].shift;
    ok = ok && a.factorization <= slack && a.norms <= slack && a.orthogonality <= slack && a.references <= slack;
  }
  a.pass = ok;
  return a;
}

}  // namespace qkdpc
