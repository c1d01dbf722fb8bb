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

ConicProblem bb84_problem(double distance, double delta, double eps, const AssemblyOptions& ao = {}) {
  return assemble_problem(build_bb84(delta, eps, Bb84Weights::asymptotic()), bb84_stats(channel(distance), delta), ao);
}

std::vector<Mat> rho_only(const ConicProblem& pr, const Mat& rho) {
  std::vector<Mat> x;
  for (const auto& b : pr.blocks) x.push_back(Mat::Zero(b.dim, b.dim));
  x[pr.rho_blocks[0]] = rho;
  return x;
}

solver_detail::Cone single_cone(const EntropyCone& k) {
  solver_detail::Cone c;
  c.blocks = {0};
  c.lg = hvec::map_matrix(k.ghat[0]);
  c.lz = hvec::map_matrix(k.zhat[0]);
  c.mg = k.ghat[0].out_dim();
  c.mz = k.zhat[0].out_dim();
  c.size = static_cast<int>(c.lg.cols());
  return c;
}

}  // namespace

TEST(Objective, ConvexAlongSegments) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto pr = bb84_problem(20.0, 0.14, 0.0);
  for (int t = 0; t < 30; ++t) {
    const Mat a = random_density(12, rng, 1 + t % 6), b = random_density(12, rng, 1 + (t * 5) % 12);
    const double s = u(rng);
    const double mid = objective_value(pr, rho_only(pr, s * a + (1 - s) * b));
    const double chord = s * objective_value(pr, rho_only(pr, a)) + (1 - s) * objective_value(pr, rho_only(pr, b));
    EXPECT_LE(mid, chord + 1e-9) << "trial " << t;
  }
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(103);
  const auto pr = bb84_problem(20.0, 0.14, 0.0);
  const auto cone = single_cone(pr.cones[0]);
  for (int t = 0; t < 3; ++t) {
    const Mat rho = 0.5 * random_density(12, rng) + 0.5 * Mat::Identity(12, 12) / 12.0;
    const RVec x = hvec::pack(rho);
    const auto e = solver_detail::eval_cone(cone, x, false);
    ASSERT_TRUE(e.ok);
    EXPECT_NEAR(e.f, objective_value(pr, rho_only(pr, rho)), 1e-10);
    const double step = 1e-6;
    for (Eigen::Index k = 0; k < x.size(); k += 7) {
      RVec xp = x, xm = x;
      xp(k) += step;
      xm(k) -= step;
      const double fd = (solver_detail::eval_cone(cone, xp, false).f - solver_detail::eval_cone(cone, xm, false).f) /
                        (2 * step);
      EXPECT_LE(std::abs(fd - e.grad(k)), 1e-5 * std::max(1.0, std::abs(fd))) << "coordinate " << k;
    }
  }
}

TEST(Solve, DroppingYieldRowsCannotRaiseTheBound) {
  for (double l : {10.0, 50.0}) {
    const auto full = bb84_problem(l, 0.14, 1e-4);
    auto relaxed = full;
    // keep only the Z-basis settings' statistics
    std::erase_if(relaxed.constraints, [](const LinearConstraint& c) {
      return c.label.starts_with("Y(") && (c.label.ends_with("|2)") || c.label.ends_with("|3)"));
    });
    ASSERT_LT(relaxed.constraints.size(), full.constraints.size());
    const auto a = solve(full), b = solve(relaxed);
    ASSERT_EQ(a.status, SolveStatus::Optimal) << a.message;
    ASSERT_EQ(b.status, SolveStatus::Optimal) << b.message;
    EXPECT_LE(b.h_certified_lower, a.h_certified_lower + 1e-6) << "l=" << l;
    EXPECT_LE(b.h_certified_lower, a.h_primal + 1e-9) << "l=" << l;
  }
}

TEST(Solve, MdiSplitMatchesJointCone) {
  const auto in = make_point_input(ProtocolName::MdiCoherent, channel(10.0), 0.14, 1e-4, 0.3);
  AssemblyOptions split, joint;
  joint.split_announcements = false;
  const auto a = solve(assemble_problem(in.spec, in.stats, split));
  const auto b = solve(assemble_problem(in.spec, in.stats, joint));
  ASSERT_EQ(a.status, SolveStatus::Optimal) << a.message;
  ASSERT_EQ(b.status, SolveStatus::Optimal) << b.message;
  EXPECT_NEAR(a.h_certified_lower, b.h_certified_lower, 1e-7);
}

TEST(Solve, ReducedAndFullGramAgree) {
  std::mt19937_64 rng(107);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 3; ++t) {
    const double l = 80.0 * u(rng), delta = 0.3 * u(rng), eps = std::pow(10.0, -6.0 + 4.0 * u(rng));
    double h[2];
    int k = 0;
    for (auto mode : {GramMode::Reduced, GramMode::Full}) {
      AssemblyOptions ao;
      ao.force_mode = mode;
      ao.gram_shift = 1e-14;
      const auto pr = bb84_problem(l, delta, eps, ao);
      ASSERT_EQ(pr.blocks[pr.gram_block].dim, mode == GramMode::Reduced ? 6 : 8);
      const auto r = solve(pr);
      ASSERT_EQ(r.status, SolveStatus::Optimal) << r.message;
      h[k++] = r.h_certified_lower;
    }
    EXPECT_NEAR(h[0], h[1], 1e-6) << "l=" << l << " delta=" << delta << " eps=" << eps;
  }
}

TEST(Channel, PhysicalRowsAreComplete) {
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    ChannelParams c;
    c.distance_km = 200.0 * u(rng);
    c.eta_d = 0.05 + 0.95 * u(rng);
    c.p_d = 1e-3 * u(rng);
    const double delta = 3.0 * u(rng), p_z = u(rng), alpha = u(rng);
    for (const auto& row : bb84_yields(c, delta, p_z)) {
      double s = 0.0;
      for (double y : row) {
        EXPECT_GE(y, 0.0);
        s += y;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    for (const auto& row : mdi_yields(c, alpha, delta)) {
      double s = 0.0;
      for (double y : row) {
        EXPECT_GE(y, 0.0);
        s += y;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Sweep, ZeroEpsilonGramEqualsExact) {
  RunConfig cfg;
  cfg.delta = 0.14;
  cfg.distances = {0.0, 60.0, 20.0};
  cfg.pipeline = Pipeline::Gram;
  const auto g = sweep_distance(cfg);
  cfg.pipeline = Pipeline::Exact;
  const auto x = sweep_distance(cfg);
  ASSERT_EQ(g.size(), x.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_EQ(g[k].status, "optimal");
    EXPECT_NEAR(g[k].h_bits, x[k].h_bits, 1e-6) << g[k].distance_km;
    EXPECT_EQ(g[k].p_pass, x[k].p_pass);
  }
}
