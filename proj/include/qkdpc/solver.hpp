#pragma once

// Minimization of sum_c f_c(X) = sum_c [H(Zhat_c X) - H(Ghat_c X)] over
// PSD blocks subject to linear equalities, with a certified lower bound.
//
// Preprocessing restricts each block to the face implied by zero-mass data
// (X = U Y U^dagger), drops empty output directions of the cone maps, row
// scales the equalities and removes dependent rows. Blocks that are not
// coupled to any entropy cone are split off and only need a feasible point.
//
// Two strategies:
//  ipm  primal path following on t h + F, F = -log(h - f) - sum log det Y,
//       feasible-start Newton steps in the null space of the equalities;
//  fw   Frank-Wolfe on f with a linear SDP oracle solved by the same
//       barrier machinery.
//
// Certificate. f is convex and positively homogeneous, so f(X) >= <grad f(S), X>
// for every X and every interior S. For any multiplier y and Z_b = grad_b f(S) - A_b^T y,
//   f(X) >= b^T y + sum_b <Z_b, Y_b> >= b^T y + sum_b min(0, lambda_min(Z_b)) T_b
// on the feasible set, where T_b bounds Tr Y_b. The bound only uses the kept
// rows, a subset of the original equalities, so dropping rows never makes it
// invalid.

#include <chrono>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "qkdpc/hvec.hpp"
#include "qkdpc/problem.hpp"

namespace qkdpc {

enum class SolverKind { Ipm, FrankWolfe };
enum class SolveStatus { Optimal, MaxIterations, Infeasible, NumericalFailure };

inline const char* to_string(SolverKind k) { return k == SolverKind::Ipm ? "ipm" : "fw"; }

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

struct SolverOptions {
  double tol_gap = 1e-6;
  double tol_feas = 1e-8;
  int max_iter = 500;
  SolverKind kind = SolverKind::Ipm;
};

struct Residuals {
  double max_equality = std::numeric_limits<double>::quiet_NaN();
  double min_eig_rho = std::numeric_limits<double>::quiet_NaN();
  double min_eig_gram = std::numeric_limits<double>::quiet_NaN();
};

/// Data from which the lower bound is rebuilt: the linearization point in face
/// coordinates (one matrix per problem block) and the multipliers of the kept rows.
struct Certificate {
  std::vector<Mat> point;
  RVec dual;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  double h_primal = std::numeric_limits<double>::quiet_NaN();
  double h_certified_lower = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  std::vector<Mat> blocks;
  Residuals residuals;
  Certificate certificate;
  int iterations = 0;
  int outer_iterations = 0;
  double wall_seconds = 0.0;
  std::string message;

  const Mat& block(int b) const { return blocks.at(b); }
};

namespace solver_detail {

struct RealRow {
  std::vector<std::pair<int, Mat>> parts;
  double rhs = 0.0;
};

inline std::vector<RealRow> realify(const ConicProblem& pr) {
  std::vector<RealRow> rows;
  for (const auto& c : pr.constraints) {
    std::vector<std::pair<int, Mat>> m;
    for (const auto& t : c.terms) {
      auto it = std::find_if(m.begin(), m.end(), [&](const auto& p) { return p.first == t.block; });
      if (it == m.end()) {
        const int d = pr.blocks[t.block].dim;
        m.emplace_back(t.block, Mat::Zero(d, d));
        it = std::prev(m.end());
      }
      it->second(t.col, t.row) += t.coeff;  // Tr(|c><r| X) = X(r, c)
    }
    RealRow re, im;
    for (const auto& [b, mb] : m) {
      re.parts.emplace_back(b, 0.5 * (mb + mb.adjoint()));
      const Mat mi = cplx(0.0, -1.0) * mb;
      im.parts.emplace_back(b, 0.5 * (mi + mi.adjoint()));
    }
    re.rhs = c.rhs.real();
    im.rhs = c.rhs.imag();
    rows.push_back(std::move(re));
    if (!c.self_conjugate) rows.push_back(std::move(im));
  }
  return rows;
}

struct Block {
  int dim_full = 0;
  int dim = 0;  // face dimension
  Mat u;        // dim_full x dim
  double shift = 0.0;
  double trace_bound = 0.0;  // bound on Tr Y
  int system = -1;           // 0 = main, k > 0 = aux system k - 1
  int offset = 0;            // offset in the system's block coordinates
  int cone = -1;
};

struct Cone {
  std::vector<int> blocks;
  RMat lg, lz;  // packed maps from the concatenated cone-block coordinates
  int mg = 0, mz = 0;
  int offset = 0, size = 0;  // contiguous coordinate range of the cone blocks
};

struct System {
  std::vector<int> blocks;
  std::vector<int> cones;
  int n = 0;  // block coordinates
  RMat a;
  RVec b;
  bool consistent = true;
  double inconsistency = 0.0;
};

struct Reduction {
  std::vector<Block> blocks;
  std::vector<Cone> cones;
  std::vector<System> systems;  // systems[0] is the main one
};

inline bool definite_sign(const Mat& a, int& sign) {
  const auto ed = eig_herm(a);
  const double top = ed.values.cwiseAbs().maxCoeff();
  if (top == 0.0) {
    sign = 0;
    return true;
  }
  if (ed.values.minCoeff() >= -1e-12 * top) {
    sign = 1;
    return true;
  }
  if (ed.values.maxCoeff() <= 1e-12 * top) {
    sign = -1;
    return true;
  }
  return false;
}

inline Mat normalized(const Mat& p) {
  const double s = p.cwiseAbs().maxCoeff();
  return s > 0.0 ? Mat(p / s) : p;
}

inline Reduction reduce(const ConicProblem& pr) {
  pr.validate();
  const int nb = static_cast<int>(pr.blocks.size());
  const auto rows = realify(pr);
  constexpr double kZeroRhs = 1e-15;

  // Faces: zero-mass data and rows forcing Tr(P X) = 0 with P of one sign.
  std::vector<Mat> u(nb);
  for (int b = 0; b < nb; ++b) u[b] = Mat::Identity(pr.blocks[b].dim, pr.blocks[b].dim);
  std::vector<Mat> mass(nb);
  for (int b = 0; b < nb; ++b) {
    mass[b] = Mat::Zero(pr.blocks[b].dim, pr.blocks[b].dim);
    for (const auto& p : pr.blocks[b].zero_mass) mass[b] += normalized(p);
  }
  std::vector<char> used(rows.size(), 0);
  for (int round = 0; round < 3; ++round) {
    bool changed = false;
    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
      const auto& r = rows[ri];
      if (used[ri] || std::abs(r.rhs) > kZeroRhs || r.parts.empty()) continue;
      int common = 0;
      bool ok = true;
      std::vector<Mat> restricted;
      for (const auto& [b, a] : r.parts) {
        restricted.push_back(u[b].adjoint() * a * u[b]);
        const double scale = a.cwiseAbs().maxCoeff();
        if (restricted.back().size() && restricted.back().cwiseAbs().maxCoeff() <= 1e-12 * scale)
          restricted.back().setZero();
        int s = 0;
        if (restricted.back().size() && !definite_sign(restricted.back(), s)) ok = false;
        if (s != 0 && common != 0 && s != common) ok = false;
        if (s != 0) common = s;
      }
      if (!ok || common == 0) continue;
      used[ri] = 1;
      for (std::size_t k = 0; k < r.parts.size(); ++k) {
        const int b = r.parts[k].first;
        if (restricted[k].size() == 0 || restricted[k].cwiseAbs().maxCoeff() == 0.0) continue;
        mass[b] += normalized(double(common) * u[b] * restricted[k] * u[b].adjoint());
        changed = true;
      }
    }
    for (int b = 0; b < nb; ++b) {
      if (mass[b].cwiseAbs().maxCoeff() == 0.0) continue;
      u[b] = kernel_basis(mass[b], 1e-10);
    }
    if (!changed) break;
  }

  Reduction red;
  red.blocks.resize(nb);
  for (int b = 0; b < nb; ++b) {
    auto& blk = red.blocks[b];
    blk.dim_full = pr.blocks[b].dim;
    blk.u = u[b];
    blk.dim = static_cast<int>(u[b].cols());
    blk.shift = pr.blocks[b].shift;
    if (blk.shift != 0.0 && blk.dim != blk.dim_full)
      throw StructureError("solver: eigenvalue flooring is not supported on a face-restricted block");
    blk.trace_bound = pr.blocks[b].trace_bound + blk.shift * blk.dim_full;
  }

  // Cones on face coordinates, with the unused output directions removed.
  for (const auto& c : pr.cones) {
    Cone k;
    std::vector<std::vector<Mat>> kg, kz;
    Mat sg = Mat::Zero(c.ghat[0].out_dim(), c.ghat[0].out_dim());
    Mat sz = Mat::Zero(c.zhat[0].out_dim(), c.zhat[0].out_dim());
    for (std::size_t i = 0; i < c.blocks.size(); ++i) {
      const Mat& ub = u[c.blocks[i]];
      if (ub.cols() == 0) continue;
      k.blocks.push_back(c.blocks[i]);
      kg.emplace_back();
      kz.emplace_back();
      for (const auto& m : c.ghat[i].kraus()) {
        kg.back().push_back(m * ub);
        sg += kg.back().back() * kg.back().back().adjoint();
      }
      for (const auto& m : c.zhat[i].kraus()) {
        kz.back().push_back(m * ub);
        sz += kz.back().back() * kz.back().back().adjoint();
      }
    }
    if (k.blocks.empty()) continue;
    const Mat vg = range_basis(sg, 1e-12), vz = range_basis(sz, 1e-12);
    if (vg.cols() == 0 || vz.cols() == 0) continue;
    k.mg = static_cast<int>(vg.cols());
    k.mz = static_cast<int>(vz.cols());
    int cols = 0;
    for (int b : k.blocks) cols += hvec::size(red.blocks[b].dim);
    k.lg = RMat(hvec::size(k.mg), cols);
    k.lz = RMat(hvec::size(k.mz), cols);
    int off = 0;
    for (std::size_t i = 0; i < k.blocks.size(); ++i) {
      std::vector<Mat> g, z;
      for (const auto& m : kg[i]) g.push_back(vg.adjoint() * m);
      for (const auto& m : kz[i]) z.push_back(vz.adjoint() * m);
      const int n = hvec::size(red.blocks[k.blocks[i]].dim);
      k.lg.middleCols(off, n) = hvec::map_matrix(CPMap(g));
      k.lz.middleCols(off, n) = hvec::map_matrix(CPMap(z));
      off += n;
    }
    for (int b : k.blocks) {
      if (red.blocks[b].cone >= 0) throw StructureError("solver: a block belongs to two entropy cones");
      red.blocks[b].cone = static_cast<int>(red.cones.size());
    }
    red.cones.push_back(std::move(k));
  }

  // Components of the block/row incidence graph; cone components form the main system.
  std::vector<int> parent(nb);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite = [&](int a, int b) { parent[find(a)] = find(b); };
  for (const auto& r : rows) {
    int first = -1;
    for (const auto& [b, a] : r.parts)
      if (red.blocks[b].dim > 0) {
        if (first < 0) first = b;
        else unite(first, b);
      }
  }
  for (const auto& k : red.cones)
    for (int b : k.blocks) unite(k.blocks[0], b);
  std::vector<int> root_system(nb, -1);
  red.systems.emplace_back();
  for (const auto& k : red.cones) root_system[find(k.blocks[0])] = 0;
  for (int b = 0; b < nb; ++b) {
    if (red.blocks[b].dim == 0) continue;
    const int r = find(b);
    if (root_system[r] < 0) {
      root_system[r] = static_cast<int>(red.systems.size());
      red.systems.emplace_back();
    }
    red.blocks[b].system = root_system[r];
  }
  // Block order: cone blocks (cone by cone), then the rest.
  for (int c = 0; c < static_cast<int>(red.cones.size()); ++c) {
    auto& sys = red.systems[0];
    sys.cones.push_back(c);
    red.cones[c].offset = sys.n;
    for (int b : red.cones[c].blocks) {
      red.blocks[b].offset = sys.n;
      sys.blocks.push_back(b);
      sys.n += hvec::size(red.blocks[b].dim);
    }
    red.cones[c].size = sys.n - red.cones[c].offset;
  }
  for (int b = 0; b < nb; ++b) {
    auto& blk = red.blocks[b];
    if (blk.dim == 0 || blk.cone >= 0) continue;
    auto& sys = red.systems[blk.system];
    blk.offset = sys.n;
    sys.blocks.push_back(b);
    sys.n += hvec::size(blk.dim);
  }

  // Rows per system, scaled; empty rows must be consistent.
  std::vector<std::vector<RVec>> arows(red.systems.size());
  std::vector<std::vector<double>> brows(red.systems.size());
  double orphan = 0.0;
  for (const auto& r : rows) {
    int s = -1;
    double rhs = r.rhs;
    for (const auto& [b, a] : r.parts) {
      rhs += red.blocks[b].shift * a.trace().real();
      if (red.blocks[b].dim > 0) s = red.blocks[b].system;
    }
    if (s < 0) {
      orphan = std::max(orphan, std::abs(rhs));
      continue;
    }
    RVec row = RVec::Zero(red.systems[s].n);
    for (const auto& [b, a] : r.parts) {
      const auto& blk = red.blocks[b];
      if (blk.dim == 0) continue;
      row.segment(blk.offset, hvec::size(blk.dim)) = hvec::pack(blk.u.adjoint() * a * blk.u);
    }
    const double norm = row.norm();
    if (norm <= 1e-13) {
      orphan = std::max(orphan, std::abs(rhs));
      continue;
    }
    arows[s].push_back(row / norm);
    brows[s].push_back(rhs / norm);
  }

  for (std::size_t s = 0; s < red.systems.size(); ++s) {
    auto& sys = red.systems[s];
    const int m = static_cast<int>(arows[s].size());
    RMat a(m, sys.n);
    RVec b(m);
    for (int i = 0; i < m; ++i) {
      a.row(i) = arows[s][i].transpose();
      b(i) = brows[s][i];
    }
    if (m == 0) {
      sys.a = RMat(0, sys.n);
      sys.b = RVec(0);
      continue;
    }
    Eigen::ColPivHouseholderQR<RMat> qr(a.transpose());
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    std::vector<int> keep(rank);
    for (int i = 0; i < rank; ++i) keep[i] = qr.colsPermutation().indices()(i);
    std::sort(keep.begin(), keep.end());
    sys.a = RMat(rank, sys.n);
    sys.b = RVec(rank);
    for (int i = 0; i < rank; ++i) {
      sys.a.row(i) = a.row(keep[i]);
      sys.b(i) = b(keep[i]);
    }
    // Minimum-norm solution of the kept rows, checked against every row.
    const RMat gram = sys.a * sys.a.transpose();
    const RVec x = sys.a.transpose() * gram.ldlt().solve(sys.b);
    sys.inconsistency = (a * x - b).cwiseAbs().maxCoeff();
    sys.consistent = sys.inconsistency <= 1e-7;
  }
  if (orphan > 1e-9) {
    red.systems[0].consistent = false;
    red.systems[0].inconsistency = std::max(red.systems[0].inconsistency, orphan);
  }
  return red;
}

// ---------------------------------------------------------------------------
// Barrier evaluation.

struct ConeEval {
  bool ok = false;
  double f = 0.0;
  RVec grad;
  RMat hess;
};

inline ConeEval eval_cone(const Cone& c, const RVec& xc, bool want_hess) {
  ConeEval e;
  const auto ga = eig_herm(hvec::unpack(c.lg * xc, c.mg));
  const auto za = eig_herm(hvec::unpack(c.lz * xc, c.mz));
  if (ga.values.minCoeff() <= 0.0 || za.values.minCoeff() <= 0.0) return e;
  auto xlogx = [](const RVec& l) { return (l.array() * l.array().log()).sum(); };
  e.f = (xlogx(ga.values) - xlogx(za.values)) / kLn2;
  const Mat dg = hvec::log_from_eig(ga) + Mat::Identity(c.mg, c.mg);
  const Mat dz = hvec::log_from_eig(za) + Mat::Identity(c.mz, c.mz);
  e.grad = (c.lg.transpose() * hvec::pack(dg) - c.lz.transpose() * hvec::pack(dz)) / kLn2;
  if (want_hess)
    e.hess = (c.lg.transpose() * hvec::dlog_matrix(ga) * c.lg - c.lz.transpose() * hvec::dlog_matrix(za) * c.lz) / kLn2;
  e.ok = true;
  return e;
}

struct BlockEval {
  bool ok = false;
  double logdet = 0.0;
  Mat inv;
};

inline BlockEval eval_block(const RVec& xb, int d) {
  BlockEval e;
  const Mat y = hvec::unpack(xb, d);
  Eigen::LLT<Mat> llt(y);
  if (llt.info() != Eigen::Success) return e;
  const CVec diag = llt.matrixLLT().diagonal();
  for (int i = 0; i < d; ++i) {
    const double v = diag(i).real();
    if (!(v > 0.0) || !std::isfinite(v)) return e;
    e.logdet += 2.0 * std::log(v);
  }
  e.inv = llt.solve(Mat::Identity(d, d));
  e.inv = detail::symmetrize(e.inv);
  e.ok = true;
  return e;
}

/// Null-space basis of A and least-squares machinery for A^T y = r.
struct AffineFrame {
  RMat null;  // n x (n - rank)
  Eigen::ColPivHouseholderQR<RMat> qr_at;
  RMat a;
  RVec b;

  explicit AffineFrame(const RMat& a_in, const RVec& b_in) : a(a_in), b(b_in) {
    const int n = static_cast<int>(a.cols());
    if (a.rows() == 0) {
      null = RMat::Identity(n, n);
      return;
    }
    qr_at.compute(a.transpose());
    const int r = static_cast<int>(qr_at.rank());
    const RMat q = qr_at.householderQ() * RMat::Identity(n, n);
    null = q.rightCols(n - r);
  }

  /// argmin_y |A^T y - r|
  RVec multipliers(const RVec& r) const {
    if (a.rows() == 0) return RVec();
    return qr_at.solve(r);
  }

  /// Closest point of {A x = b} to x.
  RVec project(const RVec& x) const {
    if (a.rows() == 0) return x;
    return x - min_norm(a * x - b);
  }

  /// Minimum-norm solution of A d = res.
  RVec min_norm(const RVec& res) const {
    const int r = static_cast<int>(qr_at.rank());
    const int n = static_cast<int>(a.cols());
    // A^T P = Q R  =>  A = P R^T Q^T; solve for d = Q [z; 0] with (P R^T)[:, :r] z = res
    const RMat rt = qr_at.matrixR().topLeftCorner(r, r).template triangularView<Eigen::Upper>().transpose();
    RVec pres = qr_at.colsPermutation().transpose() * res;
    RVec z = RVec::Zero(n);
    z.head(r) = rt.template triangularView<Eigen::Lower>().solve(pres.head(r));
    return qr_at.householderQ() * z;
  }
};

/// Newton groups: each cone (its blocks plus its epigraph variable) or a lone block.
struct Group {
  int offset = 0;  // block-coordinate range
  int size = 0;
  int cone = -1;   // cone index, or -1
  int h = -1;      // position of the epigraph variable in x, or -1
  std::vector<int> blocks;
};

/// Barrier problem on one system: minimize t <c, x> + F(x) subject to A x_block = b.
/// In cone mode x = [block coordinates; h per cone] and c selects the h entries.
class Barrier {
 public:
  Barrier(const Reduction& red, const System& sys, bool cone_mode)
      : red_(red), sys_(sys), cone_mode_(cone_mode), frame_(sys.a, sys.b) {
    nb_ = sys.n;
    nx_ = nb_ + (cone_mode ? static_cast<int>(sys.cones.size()) : 0);
    c_ = RVec::Zero(nx_);
    if (cone_mode) {
      int k = 0;
      for (int ci : sys.cones) {
        const auto& cone = red.cones[ci];
        groups_.push_back({cone.offset, cone.size, ci, nb_ + k, cone.blocks});
        c_(nb_ + k) = 1.0;
        ++k;
      }
    }
    for (int b : sys.blocks) {
      const auto& blk = red.blocks[b];
      if (cone_mode && blk.cone >= 0) continue;
      groups_.push_back({blk.offset, hvec::size(blk.dim), -1, -1, {b}});
    }
    nu_par_ = 0.0;
    for (int b : sys.blocks) nu_par_ += red.blocks[b].dim;
    if (cone_mode) nu_par_ += sys.cones.size();
  }

  int nx() const { return nx_; }
  int nb() const { return nb_; }
  double barrier_parameter() const { return nu_par_; }
  void set_linear_objective(const RVec& c) { c_.head(nb_) = c; }

  RVec initial_point(const RVec* blocks = nullptr) const {
    RVec x = RVec::Zero(nx_);
    if (blocks) {
      x.head(nb_) = *blocks;
    } else {
      for (int b : sys_.blocks) {
        const auto& blk = red_.blocks[b];
        const double v = std::max(blk.trace_bound, 1.0) / blk.dim;
        for (int i = 0; i < blk.dim; ++i) x(blk.offset + i) = v;
      }
    }
    if (cone_mode_)
      for (const auto& g : groups_)
        if (g.cone >= 0) {
          const auto e = eval_cone(red_.cones[g.cone], x.segment(g.offset, g.size), false);
          x(g.h) = (e.ok ? e.f : 0.0) + 1.0;
        }
    return x;
  }

  struct Eval {
    bool ok = false;
    double phi = 0.0;
    RVec grad;
    std::vector<RMat> hess;  // per group, group ordering [block coords, h]
  };

  bool evaluate(const RVec& x, double t, Eval& e, bool want_hess) const {
    e.ok = false;
    e.phi = t * c_.dot(x);
    e.grad = t * c_;
    if (want_hess) e.hess.assign(groups_.size(), RMat());
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      const auto& g = groups_[gi];
      const int n = g.size + (g.h >= 0 ? 1 : 0);
      RMat hess;
      if (want_hess) hess = RMat::Zero(n, n);
      for (int b : g.blocks) {
        const auto& blk = red_.blocks[b];
        const int nbk = hvec::size(blk.dim);
        const auto be = eval_block(x.segment(blk.offset, nbk), blk.dim);
        if (!be.ok) return false;
        e.phi -= be.logdet;
        e.grad.segment(blk.offset, nbk) -= hvec::pack(be.inv);
        if (want_hess) hess.block(blk.offset - g.offset, blk.offset - g.offset, nbk, nbk) = hvec::logdet_hessian(be.inv);
      }
      if (g.h >= 0) {
        const auto ce = eval_cone(red_.cones[g.cone], x.segment(g.offset, g.size), want_hess);
        if (!ce.ok) return false;
        const double s = x(g.h) - ce.f;
        if (!(s > 0.0)) return false;
        e.phi -= std::log(s);
        e.grad.segment(g.offset, g.size) += ce.grad / s;
        e.grad(g.h) -= 1.0 / s;
        if (want_hess) {
          RVec v(n);
          v.head(g.size) = ce.grad;
          v(g.size) = -1.0;
          hess += v * v.transpose() / (s * s);
          hess.topLeftCorner(g.size, g.size) += ce.hess / s;
        }
      }
      if (want_hess) e.hess[gi] = std::move(hess);
    }
    if (!std::isfinite(e.phi)) return false;
    e.ok = true;
    return true;
  }

  bool newton(const Eval& e, RVec& dx, RVec& nu, double& decrement) const { return newton_null(e, dx, nu, decrement); }

  /// Newton direction restricted to the null space of A; nu solves A^T nu ~ -(g + H dx) on the blocks.
  bool newton_null(const Eval& e, RVec& dx, RVec& nu, double& decrement) const {
    const RMat& nb = frame_.null;
    const int kb = static_cast<int>(nb.cols());
    const int nh = nx_ - nb_;
    const int k = kb + nh;
    // Rows of the full null basis [N 0; 0 I] touched by each group.
    RMat hn = RMat::Zero(nx_, k);
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      const auto& g = groups_[gi];
      const RMat& h = e.hess[gi];
      hn.middleRows(g.offset, g.size).leftCols(kb).noalias() = h.topLeftCorner(g.size, g.size) * nb.middleRows(g.offset, g.size);
      if (g.h >= 0) {
        const int hc = kb + (g.h - nb_);
        hn.middleRows(g.offset, g.size).col(hc) = h.topRightCorner(g.size, 1);
        hn.row(g.h).head(kb).noalias() = h.bottomLeftCorner(1, g.size) * nb.middleRows(g.offset, g.size);
        hn(g.h, hc) = h(g.size, g.size);
      }
    }
    RMat hr(k, k);
    hr.topRows(kb).noalias() = nb.transpose() * hn.topRows(nb_);
    if (nh) hr.bottomRows(nh) = hn.bottomRows(nh);
    hr = 0.5 * (hr + hr.transpose()).eval();
    RVec gr(k);
    gr.head(kb).noalias() = nb.transpose() * e.grad.head(nb_);
    if (nh) gr.tail(nh) = e.grad.tail(nh);
    Eigen::LLT<RMat> llt(hr);
    const double scale = std::max(1.0, hr.diagonal().cwiseAbs().maxCoeff());
    double reg = 1e-15 * scale;
    while (llt.info() != Eigen::Success) {
      if (reg > 1e-6 * scale) return false;
      llt.compute(hr + reg * RMat::Identity(k, k));
      reg *= 100.0;
    }
    const RVec dz = -llt.solve(gr);
    if (!dz.allFinite()) return false;
    decrement = -gr.dot(dz);
    dx = RVec::Zero(nx_);
    dx.head(nb_).noalias() = nb * dz.head(kb);
    if (nh) dx.tail(nh) = dz.tail(nh);
    const RVec hdx = hn * dz;
    nu = frame_.multipliers(-(e.grad.head(nb_) + hdx.head(nb_)));
    return dx.allFinite();
  }

  RVec primal_residual(const RVec& x) const { return sys_.a * x.head(nb_) - sys_.b; }

  RVec project(const RVec& x) const {
    RVec out = x;
    out.head(nb_) = frame_.project(x.head(nb_));
    return out;
  }

  /// Centering at fixed t from a feasible x. Returns the number of Newton steps, or -1 on breakdown.
  int center(RVec& x, RVec& nu, double t, int max_steps, double tol, std::string& msg) const {
    Eval e, trial;
    if (!evaluate(x, t, e, true)) {
      msg = "starting point outside the barrier domain";
      return -1;
    }
    for (int step = 0; step < max_steps; ++step) {
      RVec dx;
      double dec = 0.0;
      if (!newton(e, dx, nu, dec)) {
        msg = "Newton system breakdown";
        return -1;
      }
      if (dec / 2.0 <= tol) return step;
      // Damped step inside the Dikin ellipsoid, then backtracking.
      double alpha = dec > 0.25 ? 1.0 / (1.0 + std::sqrt(dec)) : 1.0;
      const double slope = e.grad.dot(dx);
      bool accepted = false;
      while (alpha >= 1e-12) {
        if (evaluate(x + alpha * dx, t, trial, false) && trial.phi <= e.phi + 0.25 * alpha * slope) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) return step;  // attainable precision reached
      // Near the center the barrier value is only known to rounding; stop once it stops improving.
      if (dec < 1e-4 && trial.phi >= e.phi - 1e-14 * std::max(1.0, std::abs(e.phi))) return step;
      RVec xn = project(x + alpha * dx);
      if (!evaluate(xn, t, e, true)) {
        xn = x + alpha * dx;
        if (!evaluate(xn, t, e, true)) {
          msg = "iterate left the barrier domain";
          return -1;
        }
      }
      x = std::move(xn);
    }
    return max_steps;
  }

  /// Gradient of sum_c f_c at x (block coordinates), zero outside cone blocks.
  RVec objective_gradient(const RVec& x, double& fval, bool& ok) const {
    RVec g = RVec::Zero(nb_);
    fval = 0.0;
    ok = true;
    for (int ci : sys_.cones) {
      const auto& cone = red_.cones[ci];
      const auto ce = eval_cone(cone, x.segment(cone.offset, cone.size), false);
      if (!ce.ok) {
        ok = false;
        return g;
      }
      fval += ce.f;
      g.segment(cone.offset, cone.size) = ce.grad;
    }
    return g;
  }

  /// b^T y + sum_b min(0, lambda_min(C_b - A_b^T y)) T_b.
  double dual_bound(const RVec& cvec, const RVec& y) const {
    RVec z = cvec;
    double bound = 0.0;
    if (y.size()) {
      z -= sys_.a.transpose() * y;
      bound = sys_.b.dot(y);
    }
    for (int b : sys_.blocks) {
      const auto& blk = red_.blocks[b];
      const double lmin = min_eigenvalue(hvec::unpack(z.segment(blk.offset, hvec::size(blk.dim)), blk.dim));
      bound += std::min(0.0, lmin) * blk.trace_bound;
    }
    return bound;
  }

 private:
  const Reduction& red_;
  const System& sys_;
  bool cone_mode_;
  int nb_ = 0, nx_ = 0;
  double nu_par_ = 0.0;
  RVec c_;
  std::vector<Group> groups_;
  AffineFrame frame_;
};

/// Phase I: find a strictly feasible point of A x = b, Y_b > 0 by minimizing a common
/// shift s subject to Y_b + s I > 0 over the affine set.
/// Returns 1 on success, 0 when no strictly feasible point exists, -1 on breakdown.
inline int phase_one(const Reduction& red, const System& sys, RVec& x_out, int& iters, std::string& msg) {
  const int n = sys.n;
  const AffineFrame frame(sys.a, sys.b);
  // Projection of a scaled identity onto the affine set.
  RVec x = RVec::Zero(n);
  double scale = 0.0;
  for (int b : sys.blocks) {
    const auto& blk = red.blocks[b];
    const double v = std::max(blk.trace_bound, 1.0) / blk.dim;
    scale = std::max(scale, v);
    for (int i = 0; i < blk.dim; ++i) x(blk.offset + i) = v;
  }
  x = frame.project(x);
  auto shift_needed = [&](const RVec& xx) {
    double s = -std::numeric_limits<double>::infinity();
    for (int b : sys.blocks) {
      const auto& blk = red.blocks[b];
      s = std::max(s, -min_eigenvalue(hvec::unpack(xx.segment(blk.offset, hvec::size(blk.dim)), blk.dim)));
    }
    return s;
  };
  if (shift_needed(x) < -1e-3 * scale) {
    x_out = x;
    return 1;
  }
  const double s_start = shift_needed(x) + scale;
  // Lower barrier on the shift keeps the Hessian definite; it never binds before s < 0.
  const double floor = s_start;
  double s = s_start;

  // phi = t s - sum_b logdet(Y_b + s I) - log(s + floor)
  auto value = [&](const RVec& xx, double ss, double t, double& phi) {
    if (!(ss + floor > 0.0)) return false;
    phi = t * ss - std::log(ss + floor);
    for (int b : sys.blocks) {
      const auto& blk = red.blocks[b];
      RVec w = xx.segment(blk.offset, hvec::size(blk.dim));
      w.head(blk.dim).array() += ss;
      const auto be = eval_block(w, blk.dim);
      if (!be.ok) return false;
      phi -= be.logdet;
    }
    return std::isfinite(phi);
  };

  const RMat& nb = frame.null;
  const int kb = static_cast<int>(nb.cols());
  double t = 1.0 / scale;
  double nu_par = 1.0;
  for (int b : sys.blocks) nu_par += red.blocks[b].dim;
  double best_need = std::numeric_limits<double>::infinity();
  RVec best = x;
  int rounds_inside = 0;
  for (int outer = 0; outer < 40; ++outer) {
    for (int step = 0; step < 200; ++step) {
      RVec grad = RVec::Zero(n + 1);
      RMat hn = RMat::Zero(n + 1, kb + 1);  // H [N 0; 0 1]
      double phi = t * s - std::log(s + floor);
      grad(n) = t - 1.0 / (s + floor);
      hn(n, kb) = 1.0 / ((s + floor) * (s + floor));
      bool ok = true;
      for (int b : sys.blocks) {
        const auto& blk = red.blocks[b];
        const int nbk = hvec::size(blk.dim);
        RVec w = x.segment(blk.offset, nbk);
        w.head(blk.dim).array() += s;
        const auto be = eval_block(w, blk.dim);
        if (!be.ok) {
          ok = false;
          break;
        }
        phi -= be.logdet;
        const RVec gi = hvec::pack(be.inv);
        grad.segment(blk.offset, nbk) -= gi;
        grad(n) -= gi.head(blk.dim).sum();
        const RMat h = hvec::logdet_hessian(be.inv);
        const RVec hp = h.leftCols(blk.dim).rowwise().sum();  // H p with p = pack(I)
        const RMat nbr = nb.middleRows(blk.offset, nbk);
        hn.middleRows(blk.offset, nbk).leftCols(kb).noalias() += h * nbr;
        hn.middleRows(blk.offset, nbk).col(kb) += hp;
        hn.row(n).head(kb).noalias() += hp.transpose() * nbr;
        hn(n, kb) += hp.head(blk.dim).sum();
      }
      if (!ok) {
        msg = "phase I left the domain";
        return -1;
      }
      RMat hr(kb + 1, kb + 1);
      hr.topRows(kb).noalias() = nb.transpose() * hn.topRows(n);
      hr.row(kb) = hn.row(n);
      hr = 0.5 * (hr + hr.transpose()).eval();
      RVec gr(kb + 1);
      gr.head(kb).noalias() = nb.transpose() * grad.head(n);
      gr(kb) = grad(n);
      Eigen::LLT<RMat> llt(hr);
      const double hscale = std::max(1.0, hr.diagonal().cwiseAbs().maxCoeff());
      double reg = 1e-15 * hscale;
      while (llt.info() != Eigen::Success) {
        if (reg > 1e-6 * hscale) {
          msg = "phase I Hessian not positive definite";
          return -1;
        }
        llt.compute(hr + reg * RMat::Identity(kb + 1, kb + 1));
        reg *= 100.0;
      }
      const RVec dz = -llt.solve(gr);
      const double dec = -gr.dot(dz);
      ++iters;
      if (dec / 2.0 <= 1e-3) break;
      const RVec dx = nb * dz.head(kb);
      const double ds = dz(kb);
      double alpha = dec > 0.25 ? 1.0 / (1.0 + std::sqrt(dec)) : 1.0, trial = 0.0;
      bool accepted = false;
      while (alpha >= 1e-12) {
        if (value(x + alpha * dx, s + alpha * ds, t, trial) && trial <= phi - 0.25 * alpha * dec) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;
      x += alpha * dx;
      s += alpha * ds;
      if (s < -0.5 * scale) break;
    }
    x = frame.project(x);
    const double need = shift_needed(x);
    if (need < best_need) {
      best_need = need;
      best = x;
    }
    // Once inside, one further round pushes the start away from the boundary.
    if (best_need < -1e-3 * scale || (best_need < 0.0 && ++rounds_inside >= 2)) {
      x_out = best;
      return 1;
    }
    if (nu_par / t < 1e-14 * scale) break;
    t *= 30.0;
  }
  if (best_need < 0.0) {
    x_out = best;
    return 1;
  }
  msg = "no strictly feasible point (minimal shift " + std::to_string(best_need) + ")";
  return 0;
}

struct SystemSolution {
  RVec x;   // block coordinates
  RVec cx;  // linearization point of the certificate (empty: same as x)
  RVec y;   // multipliers of the kept rows
  double f = 0.0;
  double bound = 0.0;
  int iterations = 0;
  int outer = 0;
  SolveStatus status = SolveStatus::NumericalFailure;
  std::string message;
};

/// min <c, x> over the system with a barrier path; bound from the SDP dual.
inline SystemSolution solve_linear(const Reduction& red, const System& sys, const RVec& c, double tol, int max_iter,
                                   const RVec* start = nullptr) {
  Barrier bar(red, sys, false);
  bar.set_linear_objective(c);
  SystemSolution out;
  RVec x;
  if (start) {
    x = *start;
  } else {
    RVec x0;
    std::string why;
    const int ph = phase_one(red, sys, x0, out.iterations, why);
    if (ph == 0) {
      out.status = SolveStatus::Infeasible;
      out.message = why;
      return out;
    }
    x = ph > 0 ? bar.initial_point(&x0) : bar.initial_point();
  }
  RVec nu;
  const bool zero_objective = c.cwiseAbs().maxCoeff() == 0.0;
  double t = zero_objective ? 1.0 : 1.0 / std::max(1e-300, c.cwiseAbs().maxCoeff());
  std::string msg;
  for (int outer = 0; outer < 60; ++outer) {
    const int steps = bar.center(x, nu, t, std::max(1, max_iter - out.iterations), 1e-10, msg);
    if (steps < 0) {
      out.message = msg;
      out.status = SolveStatus::NumericalFailure;
      break;
    }
    out.iterations += steps + 1;
    out.outer = outer + 1;
    out.x = x.head(bar.nb());
    out.y = -nu / t;
    out.f = c.dot(out.x);
    out.bound = bar.dual_bound(c, out.y);
    if (zero_objective || out.f - out.bound <= tol) {
      out.status = SolveStatus::Optimal;
      break;
    }
    if (out.iterations >= max_iter) {
      out.status = SolveStatus::MaxIterations;
      break;
    }
    t *= 10.0;
  }
  return out;
}

inline SystemSolution solve_ipm(const Reduction& red, const System& sys, const SolverOptions& opts) {
  Barrier bar(red, sys, true);
  SystemSolution out;
  RVec x;
  {
    RVec x0;
    std::string why;
    const int ph = phase_one(red, sys, x0, out.iterations, why);
    if (ph == 0) {
      out.status = SolveStatus::Infeasible;
      out.message = why;
      return out;
    }
    x = ph > 0 ? bar.initial_point(&x0) : bar.initial_point();
  }
  RVec nu;
  double t = 1.0;
  std::string msg;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < 80; ++outer) {
    const int steps = bar.center(x, nu, t, std::max(1, opts.max_iter - out.iterations), 1e-9, msg);
    if (steps < 0) {
      out.message = msg + " at t=" + std::to_string(t);
      if (out.x.size() == 0 || !std::isfinite(best_gap)) out.status = SolveStatus::NumericalFailure;
      break;
    }
    out.iterations += steps + 1;
    out.outer = outer + 1;
    bool ok = false;
    double f = 0.0;
    const RVec xb = x.head(bar.nb());
    const RVec grad = bar.objective_gradient(xb, f, ok);
    if (!ok) {
      out.message = "objective undefined at iterate";
      break;
    }
    const RVec y = -nu / t;
    const double bound = bar.dual_bound(grad, y);
    const double gap = f - bound;
    if (gap < best_gap || !std::isfinite(best_gap)) {
      best_gap = gap;
      out.x = xb;
      out.y = y;
      out.f = f;
      out.bound = bound;
    }
    if (gap <= opts.tol_gap) {
      out.status = SolveStatus::Optimal;
      return out;
    }
    if (out.iterations >= opts.max_iter) {
      out.status = SolveStatus::MaxIterations;
      return out;
    }
    t *= 10.0;
  }
  // Broke down or ran out of path: keep the best certified iterate if any.
  if (std::isfinite(best_gap)) {
    out.status = best_gap <= opts.tol_gap ? SolveStatus::Optimal : SolveStatus::NumericalFailure;
  }
  return out;
}

inline double cone_objective(const Reduction& red, const System& sys, const RVec& x, bool& ok) {
  double f = 0.0;
  ok = true;
  for (int ci : sys.cones) {
    const auto& cone = red.cones[ci];
    const auto ce = eval_cone(cone, x.segment(cone.offset, cone.size), false);
    if (!ce.ok) {
      ok = false;
      return 0.0;
    }
    f += ce.f;
  }
  return f;
}

inline SystemSolution solve_fw(const Reduction& red, const System& sys, const SolverOptions& opts) {
  Barrier bar(red, sys, false);
  SystemSolution out;
  auto center = solve_linear(red, sys, RVec::Zero(sys.n), 0.0, 200);
  if (center.status != SolveStatus::Optimal) {
    out.message = "no strictly feasible starting point: " + center.message;
    return out;
  }
  RVec x = center.x;
  out.iterations = center.iterations;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < opts.max_iter; ++k) {
    bool ok = false;
    double f = 0.0;
    const RVec grad = bar.objective_gradient(x, f, ok);
    if (!ok) {
      out.message = "objective undefined at iterate";
      return out;
    }
    const auto lmo = solve_linear(red, sys, grad, 1e-3 * opts.tol_gap, 400);
    out.iterations += lmo.iterations;
    out.outer = k + 1;
    if (lmo.status != SolveStatus::Optimal && lmo.status != SolveStatus::MaxIterations) {
      out.message = "linear oracle failed: " + lmo.message;
      break;
    }
    if (lmo.bound > best) {
      best = lmo.bound;
      out.y = lmo.y;
      out.cx = x;
      out.bound = best;
    }
    out.f = f;
    out.x = x;
    if (f - best <= opts.tol_gap) {
      out.status = SolveStatus::Optimal;
      return out;
    }
    // Exact line search along the segment (f is convex on it).
    const RVec d = lmo.x - x;
    auto phi = [&](double tau) {
      bool okk = false;
      const double v = cone_objective(red, sys, x + tau * d, okk);
      return okk ? v : std::numeric_limits<double>::infinity();
    };
    double lo = 0.0, hi = 1.0;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
    double f1 = phi(m1), f2 = phi(m2);
    for (int it = 0; it < 50; ++it) {
      if (f1 <= f2) {
        hi = m2;
        m2 = m1;
        f2 = f1;
        m1 = hi - gr * (hi - lo);
        f1 = phi(m1);
      } else {
        lo = m1;
        m1 = m2;
        f1 = f2;
        m2 = lo + gr * (hi - lo);
        f2 = phi(m2);
      }
    }
    double tau = 0.5 * (lo + hi);
    if (phi(1.0) <= phi(tau)) tau = 1.0;
    x += tau * d;
  }
  bool ok = false;
  out.f = cone_objective(red, sys, x, ok);
  out.x = x;
  out.status = SolveStatus::MaxIterations;
  return out;
}

}  // namespace solver_detail

namespace detail {

inline void fill_residuals(const ConicProblem& pr, SolveResult& res) {
  double eq = 0.0;
  for (const auto& c : pr.constraints) eq = std::max(eq, std::abs(constraint_value(c, res.blocks) - c.rhs));
  res.residuals.max_equality = eq;
  double rmin = std::numeric_limits<double>::infinity();
  for (int b : pr.rho_blocks) rmin = std::min(rmin, min_eigenvalue(res.blocks[b]));
  res.residuals.min_eig_rho = rmin;
  res.residuals.min_eig_gram = pr.gram_block >= 0 ? min_eigenvalue(res.blocks[pr.gram_block])
                                                  : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

inline SolveResult solve(const ConicProblem& pr, const SolverOptions& opts = {}) {
  using namespace solver_detail;
  const auto t0 = std::chrono::steady_clock::now();
  SolveResult res;
  const Reduction red = reduce(pr);
  for (const auto& sys : red.systems)
    if (!sys.consistent) {
      res.status = SolveStatus::Infeasible;
      res.message = "linear constraints are inconsistent (residual " + std::to_string(sys.inconsistency) + ")";
      res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return res;
    }

  std::vector<RVec> xs(red.systems.size());
  SystemSolution main;
  if (!red.systems[0].cones.empty()) {
    main = opts.kind == SolverKind::Ipm ? solve_ipm(red, red.systems[0], opts) : solve_fw(red, red.systems[0], opts);
  } else {
    main = solve_linear(red, red.systems[0], RVec::Zero(red.systems[0].n), 0.0, opts.max_iter);
    main.f = 0.0;
    main.bound = 0.0;
    main.y = RVec::Zero(red.systems[0].a.rows());
  }
  res.iterations = main.iterations;
  res.outer_iterations = main.outer;
  res.message = main.message;
  if (main.x.size() != red.systems[0].n) {
    res.status = main.status == SolveStatus::Infeasible ? SolveStatus::Infeasible : SolveStatus::NumericalFailure;
    if (res.message.empty()) res.message = "no iterate produced";
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  }
  xs[0] = main.x;
  SolveStatus status = main.status;
  for (std::size_t s = 1; s < red.systems.size(); ++s) {
    auto aux = solve_linear(red, red.systems[s], RVec::Zero(red.systems[s].n), 0.0, opts.max_iter);
    res.iterations += aux.iterations;
    if (aux.status != SolveStatus::Optimal) {
      status = SolveStatus::NumericalFailure;
      res.message += (res.message.empty() ? "" : "; ") + std::string("auxiliary block: ") + aux.message;
    }
    xs[s] = aux.x.size() ? aux.x : RVec::Zero(red.systems[s].n);
  }

  // Lift to the original coordinates.
  res.blocks.resize(pr.blocks.size());
  res.certificate.point.resize(pr.blocks.size());
  for (std::size_t b = 0; b < pr.blocks.size(); ++b) {
    const auto& blk = red.blocks[b];
    const int d = blk.dim_full;
    Mat y = Mat::Zero(blk.dim, blk.dim);
    Mat yc = y;
    if (blk.dim > 0) {
      y = hvec::unpack(xs[blk.system].segment(blk.offset, hvec::size(blk.dim)), blk.dim);
      yc = y;
      if (blk.system == 0 && main.cx.size() == main.x.size())
        yc = hvec::unpack(main.cx.segment(blk.offset, hvec::size(blk.dim)), blk.dim);
    }
    res.certificate.point[b] = yc;
    res.blocks[b] = detail::symmetrize(blk.u * y * blk.u.adjoint()) - blk.shift * Mat::Identity(d, d);
  }
  res.certificate.dual = main.y;
  res.h_primal = objective_value(pr, res.blocks);
  res.h_certified_lower = main.bound;
  res.gap = res.h_primal - res.h_certified_lower;
  detail::fill_residuals(pr, res);

  if (status == SolveStatus::Optimal) {
    const bool feasible = res.residuals.max_equality <= opts.tol_feas &&
                          !(res.residuals.min_eig_rho < -opts.tol_feas) && !(res.residuals.min_eig_gram < -opts.tol_feas);
    if (!(res.gap <= opts.tol_gap) || !feasible) {
      status = SolveStatus::NumericalFailure;
      if (res.message.empty())
        res.message = feasible ? "gap above tolerance after lifting" : "equality residual above tolerance";
    }
  }
  res.status = status;
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// ---------------------------------------------------------------------------
// Independent audit of a solve.

struct CertCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct CertReport {
  std::vector<CertCheck> checks;
  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CertCheck& c) { return c.pass; });
  }
  const CertCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// Recompute the lower bound from the certificate alone.
inline double certified_bound(const ConicProblem& pr, const Certificate& cert) {
  using namespace solver_detail;
  const Reduction red = reduce(pr);
  const auto& sys = red.systems[0];
  if (cert.point.size() != pr.blocks.size()) throw DimensionMismatch("certificate does not match the problem blocks");
  if (cert.dual.size() != sys.a.rows()) throw DimensionMismatch("certificate multipliers do not match the kept rows");
  RVec x = RVec::Zero(sys.n);
  for (int b : sys.blocks) {
    const auto& blk = red.blocks[b];
    if (cert.point[b].rows() != blk.dim) throw DimensionMismatch("certificate point has the wrong face dimension");
    x.segment(blk.offset, hvec::size(blk.dim)) = hvec::pack(cert.point[b]);
  }
  if (sys.cones.empty()) return 0.0;
  Barrier bar(red, sys, false);
  bool ok = false;
  double f = 0.0;
  const RVec grad = bar.objective_gradient(x, f, ok);
  if (!ok) throw NumericalError("certificate point is outside the objective domain");
  return bar.dual_bound(grad, cert.dual);
}

inline CertReport certify(const ConicProblem& pr, const SolveResult& res, double tol_feas = 1e-8) {
  CertReport rep;
  auto add = [&](std::string name, double value, double threshold, bool pass) {
    rep.checks.push_back({std::move(name), value, threshold, pass});
  };
  if (res.blocks.size() != pr.blocks.size()) {
    add("solution present", 0.0, 0.0, false);
    return rep;
  }
  double eq = 0.0;
  for (const auto& c : pr.constraints) eq = std::max(eq, std::abs(constraint_value(c, res.blocks) - c.rhs));
  add("equality residual", eq, tol_feas, eq <= tol_feas);
  for (int b : pr.rho_blocks) {
    const double m = min_eigenvalue(res.blocks[b]);
    add("psd margin " + pr.blocks[b].name, m, -tol_feas, m >= -tol_feas);
  }
  if (pr.gram_block >= 0) {
    const double m = min_eigenvalue(res.blocks[pr.gram_block]);
    add("psd margin G", m, -tol_feas, m >= -tol_feas);
  }
  double obj = std::numeric_limits<double>::quiet_NaN();
  try {
    obj = objective_value(pr, res.blocks);
  } catch (const Error&) {
  }
  const double dobj = std::abs(obj - res.h_primal);
  add("objective recompute", dobj, 1e-7, dobj <= 1e-7);
  double bound = std::numeric_limits<double>::quiet_NaN();
  try {
    bound = certified_bound(pr, res.certificate);
  } catch (const Error&) {
  }
  const double dbound = std::abs(bound - res.h_certified_lower);
  const double bt = 1e-9 * std::max(1.0, std::abs(res.h_certified_lower));
  add("lower bound recompute", dbound, bt, dbound <= bt);
  const double ordering = res.h_primal - res.h_certified_lower;
  add("gap non-negative", ordering, -1e-9, ordering >= -1e-9);
  return rep;
}

}  // namespace qkdpc
