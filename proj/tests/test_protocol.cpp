#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"

using namespace qkdpc;
using namespace qkdpc::testing;
using std::numbers::pi;

TEST(Bb84Spec, IdealGeometry) {
  const auto s = build_bb84(0.0, 0.0, 0.5, 0.5);
  EXPECT_NEAR(s.reference_inner_products(0, 1).real(), 0.0, 1e-15);
  EXPECT_NEAR(s.reference_inner_products(0, 2).real(), std::sqrt(2.0) / 2, 1e-15);
}

TEST(Bb84Spec, FlawedGeometry) {
  const auto s = build_bb84(0.14, 0.0, 0.5, 0.5);
  EXPECT_NEAR(s.reference_inner_products(0, 1).real(), std::cos((1 + 0.14 / pi) * pi / 2), 1e-15);
}

TEST(Bb84Spec, PovmCompleteness) {
  for (double delta : {0.0, 0.14, 1.0})
    for (double pz : {0.1, 0.5, 0.9}) {
      const auto s = build_bb84(delta, 0.0, pz, pz);
      Mat sum = Mat::Zero(3, 3);
      for (const auto& g : s.bob_povm) sum += g;
      EXPECT_LE(max_abs(sum - Mat::Identity(3, 3)), 1e-15);
    }
}

TEST(Bb84Spec, ReferencesPsdUnitDiagonalRankTwo) {
  for (double delta : {0.0, 0.14, 2.0}) {
    const auto s = build_bb84(delta, 0.01, Bb84Weights::asymptotic());
    const auto ed = eig_herm(s.reference_inner_products);
    EXPECT_GE(ed.values.minCoeff(), -1e-12);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(s.reference_inner_products(j, j).real(), 1.0, 1e-15);
    int rank = 0;
    for (Eigen::Index k = 0; k < 4; ++k) rank += ed.values(k) > 1e-9 * ed.values(0);
    EXPECT_EQ(rank, 2);
  }
}

TEST(Bb84Spec, RejectsBadInputs) {
  EXPECT_THROW(build_bb84(pi, 0.0, 0.5, 0.5), InvalidInput);
  EXPECT_THROW(build_bb84(-0.1, 0.0, 0.5, 0.5), InvalidInput);
  EXPECT_THROW(build_bb84(0.1, 1.5, 0.5, 0.5), InvalidInput);
  EXPECT_THROW(build_bb84(0.1, 0.0, 0.0, 0.5), InvalidInput);
}

TEST(Bb84Spec, ReducedMapsAreQubitPairs) {
  const auto s = build_bb84(0.14, 0.0, Bb84Weights::asymptotic());
  EXPECT_EQ(s.reduction.ghat.out_dim(), 4);
  EXPECT_EQ(s.reduction.zhat.out_dim(), 4);
  EXPECT_TRUE(s.reduction.strictly_positive);
  EXPECT_LE(s.reduction.reconstruction_residual, 1e-10);
}

TEST(Bb84Spec, PinchingIdempotent) {
  std::mt19937_64 rng(41);
  const auto s = build_bb84(0.14, 0.0, 0.5, 0.5);
  const Mat rho = s.key_map_g.apply(random_density(12, rng));
  const Mat once = s.key_map_z.apply(rho);
  EXPECT_LE(max_abs(s.key_map_z.apply(once) - once), 1e-12);
}

TEST(MdiSpec, SingleUserOverlaps) {
  const auto s = build_mdi_coherent(0.3, 0.0, 0.0, 2.0 / 3.0);
  // Joint index i * 3 + j; with the second user fixed in setting 2 (vacuum) the joint overlap is the single-user one.
  auto single = [&](int i, int i2) { return s.reference_inner_products(i * 3 + 2, i2 * 3 + 2); };
  EXPECT_NEAR(std::abs(single(0, 1) - std::exp(-0.18)), 0.0, 1e-15);
  for (double a : {0.05, 0.3, 0.7}) {
    const auto t = build_mdi_coherent(a, 0.14, 0.0, 2.0 / 3.0);
    EXPECT_NEAR(std::abs(t.reference_inner_products(8, 8) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(t.reference_inner_products(0 * 3 + 2, 2 * 3 + 2) - std::exp(-a * a / 2)), 0.0, 1e-15);
  }
}

TEST(MdiSpec, JointEpsilons) {
  const auto s0 = build_mdi_coherent(0.2, 0.1, 0.0, 2.0 / 3.0);
  for (double e : s0.epsilons) EXPECT_EQ(e, 0.0);
  const auto s1 = build_mdi_coherent(0.2, 0.1, 0.01, 2.0 / 3.0);
  for (double e : s1.epsilons) EXPECT_NEAR(1.0 - e, 0.99 * 0.99, 1e-15);
}

TEST(MdiSpec, ProductStructure) {
  const double pc = 2.0 / 3.0;
  const auto s = build_mdi_coherent(0.25, 0.14, 0.0, pc);
  const double p[3] = {pc / 2, pc / 2, 1 - pc};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(s.probabilities[i * 3 + j], p[i] * p[j], 1e-16);
  const auto amp = mdi_amplitudes(0.25, 0.14);
  for (int a = 0; a < 9; ++a)
    for (int b = 0; b < 9; ++b) {
      const cplx want = coherent_overlap(amp[a / 3], amp[b / 3]) * coherent_overlap(amp[a % 3], amp[b % 3]);
      EXPECT_NEAR(std::abs(s.reference_inner_products(a, b) - want), 0.0, 1e-15);
    }
}

TEST(MdiSpec, ReducedMapsAreQubitPairs) {
  const auto s = build_mdi_coherent(0.2, 0.14, 0.0, 2.0 / 3.0);
  EXPECT_EQ(s.reduction.ghat.out_dim(), 4);
  EXPECT_TRUE(s.reduction.strictly_positive);
}

TEST(MdiSpec, RejectsBadInputs) {
  EXPECT_THROW(build_mdi_coherent(0.0, 0.0, 0.0, 0.5), InvalidInput);
  EXPECT_THROW(build_mdi_coherent(0.2, 4.0, 0.0, 0.5), InvalidInput);
}

TEST(MdiSpec, AnnouncementDecomposition) {
  // Block-diagonal rho on AB (x) C: the unsplit maps act block by block on the key announcements.
  std::mt19937_64 rng(43);
  const auto s = build_mdi_coherent(0.2, 0.14, 0.0, 2.0 / 3.0);
  const auto full = mdi_full_key_maps(3);
  std::vector<Mat> blocks;
  Mat rho = Mat::Zero(27, 27);
  for (int c = 0; c < 3; ++c) {
    blocks.push_back(random_density(9, rng) / 3.0);
    Mat e = Mat::Zero(3, 3);
    e(c, c) = 1.0;
    rho += kron(blocks.back(), e);
  }
  const Mat g_full = full.g.apply(rho);
  const Mat z_full = full.z.apply(g_full);
  Mat g_split = Mat::Zero(27, 27), z_split = Mat::Zero(27, 27);
  for (int c : s.key_announcements) {
    Mat e = Mat::Zero(3, 3);
    e(c, c) = 1.0;
    const Mat g = s.key_map_g.apply(blocks[c]);
    g_split += kron(g, e);
    z_split += kron(s.key_map_z.apply(g), e);
  }
  EXPECT_LE(max_abs(g_full - g_split), 1e-12);
  EXPECT_LE(max_abs(z_full - z_split), 1e-12);
}

TEST(FacialReduce, IdentityIsometryLeavesMapsAlone) {
  std::mt19937_64 rng(47);
  const CPMap g({Mat::Identity(2, 2)});
  const CPMap z({projector(2, {0}), projector(2, {1})});
  const auto fr = facial_reduce(g, z, Mat::Identity(2, 2));
  for (int t = 0; t < 3; ++t) {
    const Mat rho = random_density(2, rng);
    EXPECT_LE(max_abs(fr.ghat.apply(rho) - g.apply(rho)), 1e-15);
    EXPECT_LE(max_abs(fr.zhat.apply(rho) - z.apply(rho)), 1e-15);
  }
  EXPECT_TRUE(fr.strictly_positive);
}

TEST(FacialReduce, WrongIsometryRejected) {
  const auto s = build_bb84(0.0, 0.0, 0.5, 0.5);
  Mat v = Mat::Zero(12, 1);
  v(0, 0) = 1.0;
  EXPECT_THROW(facial_reduce(s.key_map_g, s.key_map_z, v), InvalidIsometry);
}
