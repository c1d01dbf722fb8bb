#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace qkdpc;
using namespace qkdpc::testing;

namespace {

ObservedStats bb84_stats(const ChannelParams& c, double delta) {
  ObservedStats st;
  st.kind = ProtocolKind::PrepareMeasure;
  st.yields = bb84_yields(c, delta, 1.0, 1.0);
  st.physical = false;
  return st;
}

ConicProblem bb84_problem(double distance, double delta, double eps, bool partial, double eta_d = 0.73,
                          double p_d = 1e-6) {
  const auto spec = build_bb84(delta, eps, Bb84Weights::asymptotic());
  AssemblyOptions ao;
  ao.partial = partial;
  return assemble_problem(spec, bb84_stats(channel(distance, eta_d, p_d), delta), ao);
}

std::vector<Mat> with_gram_placeholder(const ConicProblem& pr, const Mat& rho) {
  std::vector<Mat> x;
  for (const auto& b : pr.blocks) x.push_back(Mat::Zero(b.dim, b.dim));
  x[pr.rho_blocks[0]] = rho;
  return x;
}

}  // namespace

TEST(Objective, ClassicalUncorrelatedIsZero) {
  std::mt19937_64 rng(51);
  const auto pr = bb84_problem(10.0, 0.0, 0.0, true);
  Mat a = Mat::Zero(4, 4);
  a(0, 0) = 0.6;
  a(1, 1) = 0.4;
  const Mat rho = kron(a, random_density(3, rng));
  EXPECT_NEAR(objective_value(pr, with_gram_placeholder(pr, rho)), 0.0, 1e-12);
}

TEST(Objective, FilteredBellStateIsOneBit) {
  const auto pr = bb84_problem(10.0, 0.0, 0.0, true);
  CVec phi = CVec::Zero(12);
  phi(0 * 3 + 0) = phi(1 * 3 + 1) = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(objective_value(pr, with_gram_placeholder(pr, phi * phi.adjoint())), 1.0, 1e-12);
}

TEST(Objective, NonNegativeAndEqualsDivergence) {
  std::mt19937_64 rng(53);
  const auto pr = bb84_problem(10.0, 0.14, 0.0, true);
  for (int t = 0; t < 20; ++t) {
    const auto x = with_gram_placeholder(pr, random_density(12, rng, 1 + t % 12));
    const double f = objective_value(pr, x);
    EXPECT_GE(f, -1e-12);
    EXPECT_NEAR(f, objective_divergence(pr, x), 1e-9);
  }
}

TEST(Solve, IdealBb84IsOneBit) {
  const auto pr = bb84_problem(0.0, 0.0, 0.0, true, 1.0, 0.0);
  const auto r = solve(pr);
  ASSERT_EQ(r.status, SolveStatus::Optimal) << r.message;
  EXPECT_NEAR(r.h_certified_lower, 1.0, 1e-4);
  EXPECT_GE(r.gap, -1e-9);
}

TEST(Solve, PartialMatchesExactAtZeroEpsilon) {
  for (double l : {0.0, 40.0}) {
    const auto a = solve(bb84_problem(l, 0.14, 0.0, true));
    const auto b = solve(bb84_problem(l, 0.14, 0.0, false));
    ASSERT_EQ(a.status, SolveStatus::Optimal) << a.message;
    ASSERT_EQ(b.status, SolveStatus::Optimal) << b.message;
    EXPECT_LE(std::abs(a.h_certified_lower - b.h_certified_lower), 1e-6) << "l=" << l;
  }
}

TEST(Solve, ImpossibleMassIsInfeasible) {
  const auto spec = build_bb84(0.0, 0.0, Bb84Weights::asymptotic());
  auto st = bb84_stats(channel(10.0), 0.0);
  st.yields[0][4] += 0.5;  // sum_k Y_{k|0} > 1
  const auto r = solve(assemble_problem(spec, st));
  EXPECT_EQ(r.status, SolveStatus::Infeasible);
}

TEST(Solve, ResidualsPopulated) {
  const auto r = solve(bb84_problem(30.0, 0.14, 1e-4, true));
  ASSERT_EQ(r.status, SolveStatus::Optimal) << r.message;
  EXPECT_LE(r.residuals.max_equality, 1e-8);
  EXPECT_GE(r.residuals.min_eig_rho, -1e-8);
  EXPECT_GE(r.residuals.min_eig_gram, -1e-8);
  EXPECT_LE(r.gap, 1e-6 + 1e-12);
  EXPECT_LE(r.h_certified_lower, r.h_primal + 1e-9);
}

TEST(Solve, FrankWolfeFallbackAgrees) {
  const auto pr = bb84_problem(20.0, 0.14, 0.0, false);
  SolverOptions fw;
  fw.kind = SolverKind::FrankWolfe;
  fw.max_iter = 2000;
  fw.tol_gap = 1e-4;
  const auto a = solve(pr, fw);
  const auto b = solve(pr);
  ASSERT_TRUE(std::isfinite(a.h_certified_lower)) << a.message;
  ASSERT_EQ(b.status, SolveStatus::Optimal);
  // Both bounds are valid, so neither can exceed the other's primal value.
  EXPECT_LE(a.h_certified_lower, b.h_primal + 1e-9);
  EXPECT_LE(b.h_certified_lower, a.h_primal + 1e-9);
  EXPECT_TRUE(certify(pr, a).find("lower bound recompute")->pass);
}

TEST(Certify, OptimalPassesEveryCheck) {
  const auto pr = bb84_problem(50.0, 0.14, 1e-6, true);
  const auto r = solve(pr);
  ASSERT_EQ(r.status, SolveStatus::Optimal) << r.message;
  const auto rep = certify(pr, r);
  for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
}

TEST(Certify, PerturbedStateFlagged) {
  std::mt19937_64 rng(57);
  const auto pr = bb84_problem(50.0, 0.14, 1e-6, true);
  auto r = solve(pr);
  ASSERT_EQ(r.status, SolveStatus::Optimal);
  r.blocks[pr.rho_blocks[0]] += 1e-3 * random_hermitian(12, rng);
  const auto rep = certify(pr, r);
  EXPECT_FALSE(rep.find("objective recompute")->pass);
  EXPECT_FALSE(rep.all_pass());
}

TEST(Certify, MissingSolution) {
  const auto pr = bb84_problem(50.0, 0.14, 0.0, true);
  SolveResult empty;
  EXPECT_FALSE(certify(pr, empty).all_pass());
}

TEST(Certify, BoundRecomputedFromCertificateAlone) {
  const auto pr = bb84_problem(25.0, 0.14, 1e-4, true);
  const auto r = solve(pr);
  ASSERT_EQ(r.status, SolveStatus::Optimal);
  EXPECT_NEAR(certified_bound(pr, r.certificate), r.h_certified_lower, 1e-9);
  auto bad = r.certificate;
  bad.dual(0) += 1.0;
  EXPECT_LT(certified_bound(pr, bad), r.h_certified_lower + 1e-12);
}
