#pragma once

// Conic problem assembly: variable blocks (rho or rho^(gamma), and G),
// entropy cones with their reduced maps, and the linear equalities.

#include <optional>
#include <string>
#include <vector>

#include "qkdpc/gram.hpp"

namespace qkdpc {

struct VariableBlock {
  std::string name;
  int dim = 0;
  std::vector<int> factor_dims;
  double trace_bound = 0.0;    // Tr X <= trace_bound on the feasible set
  double shift = 0.0;          // constraint is X + shift I >= 0 (eigenvalue flooring)
  std::vector<Mat> zero_mass;  // PSD operators with Tr(P X) = 0 on the feasible set
};

/// h >= H(sum_b Zhat_b(X_b)) - H(sum_b Ghat_b(X_b)) over the listed blocks.
struct EntropyCone {
  std::vector<int> blocks;
  std::vector<CPMap> ghat;
  std::vector<CPMap> zhat;
};

struct ConicProblem {
  std::string label;
  ProtocolKind kind = ProtocolKind::PrepareMeasure;
  double normalization = 1.0;
  std::vector<VariableBlock> blocks;
  std::vector<EntropyCone> cones;
  std::vector<LinearConstraint> constraints;
  std::vector<int> rho_blocks;
  int gram_block = -1;
  std::optional<GramLayout> layout;

  void validate() const {
    for (const auto& c : constraints)
      for (const auto& t : c.terms) {
        if (t.block < 0 || t.block >= static_cast<int>(blocks.size()))
          throw StructureError("constraint '" + c.label + "' references a missing block");
        const int d = blocks[t.block].dim;
        if (t.row < 0 || t.row >= d || t.col < 0 || t.col >= d)
          throw StructureError("constraint '" + c.label + "' references an entry outside its block");
      }
    for (const auto& k : cones) {
      if (k.blocks.size() != k.ghat.size() || k.blocks.size() != k.zhat.size())
        throw StructureError("entropy cone with mismatched map lists");
      for (std::size_t i = 0; i < k.blocks.size(); ++i) {
        const int d = blocks.at(k.blocks[i]).dim;
        if (k.ghat[i].in_dim() != d || k.zhat[i].in_dim() != d)
          throw DimensionMismatch("entropy cone maps do not act on the declared block dimension");
        if (k.ghat[i].out_dim() != k.ghat[0].out_dim() || k.zhat[i].out_dim() != k.zhat[0].out_dim())
          throw DimensionMismatch("entropy cone maps disagree on output dimension");
      }
    }
  }
};

struct AssemblyOptions {
  bool partial = true;                   // false: no Gram block, references taken as exact
  std::optional<GramMode> force_mode;
  double rank_tol = 1e-9;
  double gram_shift = 0.0;
  bool split_announcements = true;       // MDI: one cone per key announcement
};

namespace detail {

/// Stack per-block Kraus operators into the output slot `slot` of `slots` copies.
inline CPMap embed_output(const CPMap& m, int slot, int slots) {
  std::vector<Mat> ks;
  for (const auto& k : m.kraus()) {
    Mat e = Mat::Zero(k.rows() * slots, k.cols());
    e.middleRows(slot * k.rows(), k.rows()) = k;
    ks.push_back(std::move(e));
  }
  return CPMap(std::move(ks), m.label());
}

}  // namespace detail

inline ConicProblem assemble_problem(const ProtocolSpec& spec, const ObservedStats& stats,
                                     const AssemblyOptions& opts = {}) {
  if ((spec.kind == ProtocolKind::Mdi) != (stats.kind == ProtocolKind::Mdi))
    throw InvalidInput("assemble_problem: statistics do not match the protocol kind");
  ConicProblem pr;
  pr.label = spec.label;
  pr.kind = spec.kind;
  pr.normalization = spec.normalization;

  const double total = spec.total_probability();
  ProtocolSpec exact = spec;
  if (!opts.partial) exact.epsilons.assign(spec.epsilons.size(), 0.0);
  const Mat kernel = rho_a_kernel(exact, opts.rank_tol);
  const int n_rho = spec.kind == ProtocolKind::Mdi ? spec.n_announcements : 1;
  for (int g = 0; g < n_rho; ++g) {
    VariableBlock b;
    b.name = n_rho == 1 ? "rho" : "rho[" + std::to_string(g) + "]";
    b.dim = spec.rho_dim();
    b.factor_dims = spec.register_dims;
    b.trace_bound = total;
    for (Eigen::Index c = 0; c < kernel.cols(); ++c) {
      const Mat pc = kernel.col(c) * kernel.col(c).adjoint();
      b.zero_mass.push_back(spec.kind == ProtocolKind::Mdi ? pc
                                                           : kron(pc, Mat::Identity(spec.register_dims[1],
                                                                                    spec.register_dims[1])));
    }
    pr.rho_blocks.push_back(static_cast<int>(pr.blocks.size()));
    pr.blocks.push_back(std::move(b));
  }

  const auto& red = spec.reduction;
  if (spec.kind == ProtocolKind::Mdi) {
    const int nk = static_cast<int>(spec.key_announcements.size());
    if (opts.split_announcements) {
      for (int g : spec.key_announcements) pr.cones.push_back({{pr.rho_blocks[g]}, {red.ghat}, {red.zhat}});
    } else {
      EntropyCone c;
      for (int s = 0; s < nk; ++s) {
        c.blocks.push_back(pr.rho_blocks[spec.key_announcements[s]]);
        c.ghat.push_back(detail::embed_output(red.ghat, s, nk));
        c.zhat.push_back(detail::embed_output(red.zhat, s, nk));
      }
      pr.cones.push_back(std::move(c));
    }
  } else {
    pr.cones.push_back({{pr.rho_blocks[0]}, {red.ghat}, {red.zhat}});
  }

  if (opts.partial) {
    const GramLayout lay = layout_gram(spec, opts.rank_tol, opts.force_mode);
    VariableBlock g;
    g.name = "G";
    g.dim = lay.size;
    g.trace_bound = lay.size;
    g.shift = opts.gram_shift;
    pr.gram_block = static_cast<int>(pr.blocks.size());
    pr.blocks.push_back(std::move(g));
    auto link = rho_link_constraints(spec, lay, pr.rho_blocks, pr.gram_block);
    auto known = known_entry_constraints(lay, pr.gram_block);
    pr.constraints.insert(pr.constraints.end(), link.begin(), link.end());
    pr.constraints.insert(pr.constraints.end(), known.begin(), known.end());
    pr.layout = lay;
  } else {
    auto link = reference_link_constraints(spec, pr.rho_blocks);
    pr.constraints.insert(pr.constraints.end(), link.begin(), link.end());
  }
  auto yields = yield_constraints(spec, stats, pr.rho_blocks);
  pr.constraints.insert(pr.constraints.end(), yields.begin(), yields.end());
  pr.validate();
  return pr;
}

/// Value of a linear constraint's functional at the given blocks.
inline cplx constraint_value(const LinearConstraint& c, const std::vector<Mat>& x) {
  cplx v = 0.0;
  for (const auto& t : c.terms) v += t.coeff * x.at(t.block)(t.row, t.col);
  return v;
}

/// sum over cones of H(Zhat(X)) - H(Ghat(X)), in bits.
inline double objective_value(const ConicProblem& pr, const std::vector<Mat>& x) {
  double h = 0.0;
  for (const auto& c : pr.cones) {
    const int m_g = c.ghat[0].out_dim(), m_z = c.zhat[0].out_dim();
    Mat g = Mat::Zero(m_g, m_g), z = Mat::Zero(m_z, m_z);
    for (std::size_t i = 0; i < c.blocks.size(); ++i) {
      g += c.ghat[i].apply(x.at(c.blocks[i]));
      z += c.zhat[i].apply(x.at(c.blocks[i]));
    }
    h += von_neumann_entropy(detail::symmetrize(z)) - von_neumann_entropy(detail::symmetrize(g));
  }
  return h;
}

/// sum over cones of D(Ghat(X) || Zhat(X)); equals objective_value under the pinching identity.
inline double objective_divergence(const ConicProblem& pr, const std::vector<Mat>& x) {
  double h = 0.0;
  for (const auto& c : pr.cones) {
    const int m_g = c.ghat[0].out_dim(), m_z = c.zhat[0].out_dim();
    Mat g = Mat::Zero(m_g, m_g), z = Mat::Zero(m_z, m_z);
    for (std::size_t i = 0; i < c.blocks.size(); ++i) {
      g += c.ghat[i].apply(x.at(c.blocks[i]));
      z += c.zhat[i].apply(x.at(c.blocks[i]));
    }
    h += relative_entropy(detail::symmetrize(g), detail::symmetrize(z));
  }
  return h;
}

}  // namespace qkdpc
