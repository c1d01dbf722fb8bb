#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace qkdpc;
using namespace qkdpc::testing;

namespace {

// Random rho with <phi|rho|phi> = fid exactly: mix |phi><phi| with a state supported on phi's complement.
Mat state_with_fidelity(const CVec& phi, double fid, std::mt19937_64& rng, int rank_perp = 1) {
  const int d = static_cast<int>(phi.size());
  const Mat proj = Mat::Identity(d, d) - phi * phi.adjoint();
  Mat a = proj * random_matrix(d, rank_perp, rng);
  Mat sigma = a * a.adjoint();
  sigma /= sigma.trace().real();
  return fid * phi * phi.adjoint() + (1 - fid) * sigma;
}

}  // namespace

TEST(Embed, PureInput) {
  std::mt19937_64 rng(61);
  const CVec phi = random_unit(3, rng);
  const double eps = 0.07;
  const auto e = lemma1_embed(Ket(phi).projector(), Ket(phi), eps);
  EXPECT_NEAR(e.eps_prime, 0.0, 1e-14);
  // psi = |phi>|0>_S (sqrt(1-eps)|0>_F + sqrt(eps)|1>_F), index (a * d + s) * 2 + f.
  CVec want = CVec::Zero(18);
  for (int a = 0; a < 3; ++a) {
    want((a * 3) * 2) = phi(a) * std::sqrt(1 - eps);
    want((a * 3) * 2 + 1) = phi(a) * std::sqrt(eps);
  }
  EXPECT_LE((e.psi.amplitudes() - want).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(e.reduced_check, 1e-12);
}

TEST(Embed, BoundaryFidelity) {
  std::mt19937_64 rng(67);
  const CVec phi = random_unit(2, rng);
  const double eps = 0.2;
  const Mat rho = state_with_fidelity(phi, 1 - eps, rng);
  const auto e = lemma1_embed(HermitianMatrix(rho), Ket(phi), eps);
  EXPECT_NEAR(e.eps_prime, eps, 1e-12);
  // F qubit is |0>: every odd amplitude vanishes.
  for (int i = 0; i < e.psi.dim(); i += 2) EXPECT_NEAR(std::abs(e.psi.amplitudes()(i + 1)), 0.0, 1e-12);
  EXPECT_LE(e.reduced_check, 1e-10);
}

TEST(Embed, RankTwoAmplitudePattern) {
  std::mt19937_64 rng(71);
  const CVec phi = random_unit(4, rng);
  const double eps = 0.05;
  const Mat rho = state_with_fidelity(phi, 0.98, rng);
  const auto e = lemma1_embed(HermitianMatrix(rho), Ket(phi), eps);
  EXPECT_LE(e.reduced_check, 1e-10);
  EXPECT_GE(e.eps_prime, 0.0);
  EXPECT_LE(e.eps_prime, eps);
  // Overlap with |phi>|0>_S|0>_F equals sqrt(1 - eps) and is real.
  cplx ov = 0.0;
  for (int a = 0; a < 4; ++a) ov += std::conj(phi(a)) * e.psi.amplitudes()((a * 4) * 2);
  EXPECT_NEAR(ov.real(), std::sqrt(1 - eps), 1e-10);
  EXPECT_NEAR(ov.imag(), 0.0, 1e-10);
}

TEST(Embed, LowFidelityRejected) {
  std::mt19937_64 rng(73);
  const CVec phi = random_unit(2, rng);
  const Mat rho = state_with_fidelity(phi, 0.8, rng);
  EXPECT_THROW(lemma1_embed(HermitianMatrix(rho), Ket(phi), 0.1), PreconditionViolation);
}

TEST(Embed, RandomRoundTrip) {
  std::mt19937_64 rng(79);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const int d = 2 + t % 4;
    const CVec phi = random_unit(d, rng);
    const double eps = 0.3 * u(rng);
    const double fid = 1 - eps * u(rng);
    const Mat rho = state_with_fidelity(phi, fid, rng, 1 + t % (d - 1));
    const auto e = lemma1_embed(HermitianMatrix(rho), Ket(phi), eps);
    ASSERT_LE(e.reduced_check, 1e-10) << "trial " << t;
    EXPECT_NEAR(e.psi.amplitudes().norm(), 1.0, 1e-12);
  }
}

TEST(Reconstruct, IdentityWithSingletonBlocks) {
  const auto r = reconstruct_from_gram(Mat::Identity(2, 2), std::vector<std::vector<int>>{{0}, {1}});
  ASSERT_EQ(r.operators.size(), 2u);
  EXPECT_EQ(r.rank, 1);
  EXPECT_LE(r.operator_residual, 1e-15);
  EXPECT_LE(r.right_inverse_residual, 1e-15);
  // The stacked M_gamma form an isometry.
  Mat s = Mat::Zero(r.rank, r.rank);
  for (const auto& m : r.operators) s += m.adjoint() * m;
  EXPECT_LE(max_abs(s - Mat::Identity(r.rank, r.rank)), 1e-15);
}

TEST(Reconstruct, SyntheticOperators) {
  std::mt19937_64 rng(83);
  // Vectors v_j in C^3 and three operators with sum M^dagger M = I give a blocked Gram G.
  const int k = 4, dim = 3, gammas = 3;
  Mat v(dim, k);
  for (int j = 0; j < k; ++j) v.col(j) = random_unit(dim, rng);
  const Mat q = Eigen::HouseholderQR<Mat>(random_matrix(dim * gammas, dim, rng)).householderQ() *
                Mat::Identity(dim * gammas, dim);
  Mat stacked(dim * gammas, k);
  for (int g = 0; g < gammas; ++g) stacked.middleRows(g * dim, dim) = q.middleRows(g * dim, dim) * v;
  const Mat gram = stacked.adjoint() * stacked;
  std::vector<std::vector<int>> blocks;
  Mat g_full = Mat::Zero(k * gammas, k * gammas);
  for (int g = 0; g < gammas; ++g) {
    std::vector<int> b;
    for (int j = 0; j < k; ++j) b.push_back(g * k + j);
    blocks.push_back(b);
  }
  for (int g = 0; g < gammas; ++g)
    for (int h = 0; h < gammas; ++h) {
      const Mat vg = q.middleRows(g * dim, dim) * v, vh = q.middleRows(h * dim, dim) * v;
      g_full.block(g * k, h * k, k, k) = vg.adjoint() * vh;
    }
  const auto r = reconstruct_from_gram(g_full, blocks);
  EXPECT_LE(r.inner_product_residual, 1e-10);
  EXPECT_LE(r.operator_residual, 1e-10);
  EXPECT_LE(r.right_inverse_residual, 1e-10);
  EXPECT_EQ(r.rank, dim);
  // Reconstructed vectors reproduce the summed Gram g = V^dagger V.
  Mat w(r.rank, k);
  for (int j = 0; j < k; ++j) w.col(j) = r.vectors[j].amplitudes();
  EXPECT_LE(max_abs(w.adjoint() * w - gram), 1e-10);
  // sum_gamma <M phi_j|M phi_i> = <phi_j|phi_i>.
  Mat summed = Mat::Zero(k, k);
  for (const auto& m : r.operators) summed += (m * w).adjoint() * (m * w);
  EXPECT_LE(max_abs(summed - gram), 1e-9);
}

TEST(Reconstruct, UnblockedRoundTrip) {
  std::mt19937_64 rng(89);
  Mat v(4, 6);
  for (int j = 0; j < 6; ++j) v.col(j) = random_unit(4, rng);
  const auto r = reconstruct_from_gram(v.adjoint() * v);
  EXPECT_EQ(r.rank, 4);
  EXPECT_LE(r.inner_product_residual, 1e-10);
}

TEST(Reconstruct, Errors) {
  Mat g = Mat::Identity(2, 2);
  g(1, 1) = -0.1;
  EXPECT_THROW(reconstruct_from_gram(g), NotPsdError);
  // Ten blocks push the top of g = sum g_gamma to 10, so a 1e-9 direction of g_0 falls below the rank
  // cut of g while the factorization of G (top 1) keeps it.
  Mat h = Mat::Zero(20, 20);
  std::vector<std::vector<int>> ten;
  for (int b = 0; b < 10; ++b) {
    h(2 * b, 2 * b) = 1.0;
    ten.push_back({2 * b, 2 * b + 1});
  }
  h(1, 1) = 1e-9;
  EXPECT_THROW(reconstruct_from_gram(h, ten), RankInconsistency);
  EXPECT_THROW(reconstruct_from_gram(Mat::Identity(3, 3), std::vector<std::vector<int>>{{0}, {1, 2}}),
               DimensionMismatch);
}

TEST(Audit, SolverGramReconstructs) {
  const auto spec = build_bb84(0.14, 1e-4, Bb84Weights::asymptotic());
  ObservedStats st;
  st.yields = bb84_yields(channel(30.0), 0.14, 1.0, 1.0);
  st.physical = false;
  const auto pr = assemble_problem(spec, st);
  const auto r = solve(pr);
  ASSERT_EQ(r.status, SolveStatus::Optimal) << r.message;
  const auto a = audit_solution(pr, r);
  EXPECT_TRUE(a.pass);
  EXPECT_LE(a.norms, 1e-8);
  EXPECT_LE(a.orthogonality, 1e-8);
  EXPECT_LE(a.references, 1e-8);
  EXPECT_LE(a.factorization, 1e-8);
  const Mat fam = family_gram(*pr.layout, r.block(pr.gram_block));
  const auto theta = bb84_angles(0.14);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(fam(i, j) - std::cos(theta[i] - theta[j])), 0.0, 1e-8);
}
