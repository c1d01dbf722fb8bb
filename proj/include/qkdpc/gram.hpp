#pragma once

// Gram-matrix variable layout and the linear constraints that tie the
// source-replacement marginal, the Gram entries and the observed yields.
//
// G collects the inner products of the reference states and of the unknown
// orthogonal components. G(r, c) = <v_r|v_c> for the generating family v,
// so a state u = sum_r x_u[r] v_r has <u|w> = sum conj(x_u[r]) x_w[c] G(r, c).

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qkdpc/channel.hpp"
#include "qkdpc/protocol.hpp"

namespace qkdpc {

enum class GramMode { Full, Reduced, MdiFull };

inline const char* to_string(GramMode m) {
  switch (m) {
    case GramMode::Full: return "full";
    case GramMode::Reduced: return "reduced";
    case GramMode::MdiFull: return "mdi-full";
  }
  return "?";
}

struct GramLayout {
  GramMode mode = GramMode::Full;
  int n = 0;
  int n_dim = 0;
  int size = 0;
  Mat coefficients;  // n_dim x n, column j = c^{(j)} (reduced mode)
  Mat reference;     // <phi_i|phi_j>
  double truncation = 0.0;  // max |sum_l conj(c_l^(i)) c_l^(j) - <phi_i|phi_j>|

  bool reduced() const { return mode == GramMode::Reduced; }
  int perp_index(int j) const { return (reduced() ? n_dim : n) + j; }

  using Expansion = std::vector<std::pair<int, cplx>>;

  Expansion reference_expansion(int j) const {
    if (!reduced()) return {{j, 1.0}};
    Expansion e;
    for (int l = 0; l < n_dim; ++l)
      if (coefficients(l, j) != cplx(0.0)) e.emplace_back(l, coefficients(l, j));
    return e;
  }
  Expansion perp_expansion(int j) const { return {{perp_index(j), 1.0}}; }
};

struct Term {
  int block = 0;
  int row = 0;
  int col = 0;
  cplx coeff = 1.0;
};

/// sum_k coeff_k X_{block_k}(row_k, col_k) = rhs over Hermitian blocks.
/// A self-conjugate functional is real on Hermitian inputs and yields one real row;
/// otherwise the real and imaginary parts give two.
struct LinearConstraint {
  std::vector<Term> terms;
  cplx rhs = 0.0;
  bool self_conjugate = false;
  std::string label;
};

/// Gram layout for a spec. Reduced when the reference Gram is rank deficient at
/// `rank_tol` relative to its largest eigenvalue; `force` overrides the choice.
inline GramLayout layout_gram(const ProtocolSpec& spec, double rank_tol = 1e-9,
                              std::optional<GramMode> force = std::nullopt) {
  GramLayout lay;
  lay.n = spec.n_settings;
  lay.reference = spec.reference_inner_products;
  const auto ed = eig_herm(detail::symmetrize(lay.reference));
  const double top = std::max(ed.values(0), 0.0);
  int rank = 0;
  while (rank < lay.n && ed.values(rank) > rank_tol * top) ++rank;

  const GramMode natural = spec.kind == ProtocolKind::Mdi ? GramMode::MdiFull : GramMode::Full;
  lay.mode = rank < lay.n ? GramMode::Reduced : natural;
  if (force) lay.mode = *force == GramMode::Reduced ? GramMode::Reduced : natural;

  if (lay.reduced()) {
    lay.n_dim = rank;
    lay.coefficients = Mat(rank, lay.n);
    for (int l = 0; l < rank; ++l)
      lay.coefficients.row(l) = std::sqrt(ed.values(l)) * ed.vectors.col(l).adjoint();
    lay.truncation = (lay.coefficients.adjoint() * lay.coefficients - lay.reference).cwiseAbs().maxCoeff();
    lay.size = rank + lay.n;
  } else {
    lay.n_dim = rank;
    lay.size = 2 * lay.n;
  }
  return lay;
}

/// Entries of G fixed by the layout: reference block, unit norms, orthogonality of each perp component.
inline std::vector<LinearConstraint> known_entry_constraints(const GramLayout& lay, int gblock) {
  std::vector<LinearConstraint> out;
  for (int m = 0; m < lay.size; ++m)
    out.push_back({{{gblock, m, m, 1.0}}, 1.0, true, "G(" + std::to_string(m) + "," + std::to_string(m) + ")=1"});
  if (lay.reduced()) {
    for (int l = 0; l < lay.n_dim; ++l)
      for (int k = l + 1; k < lay.n_dim; ++k)
        out.push_back({{{gblock, l, k, 1.0}}, 0.0, false, "G(" + std::to_string(l) + "," + std::to_string(k) + ")=0"});
    for (int j = 0; j < lay.n; ++j) {
      LinearConstraint c{{}, 0.0, false, "perp" + std::to_string(j)};
      for (int l = 0; l < lay.n_dim; ++l)
        if (lay.coefficients(l, j) != cplx(0.0)) c.terms.push_back({gblock, lay.perp_index(j), l, lay.coefficients(l, j)});
      out.push_back(std::move(c));
    }
  } else {
    for (int i = 0; i < lay.n; ++i)
      for (int j = i + 1; j < lay.n; ++j)
        out.push_back({{{gblock, i, j, 1.0}}, lay.reference(i, j), false,
                       "G(" + std::to_string(i) + "," + std::to_string(j) + ")=ref"});
    for (int j = 0; j < lay.n; ++j) out.push_back({{{gblock, lay.perp_index(j), j, 1.0}}, 0.0, false, "perp" + std::to_string(j)});
  }
  return out;
}

namespace detail {

/// Terms of <i|rho_A|j> over the rho blocks of a spec.
inline std::vector<Term> rho_a_entry(const ProtocolSpec& spec, const std::vector<int>& rho_blocks, int i, int j) {
  std::vector<Term> t;
  if (spec.kind == ProtocolKind::Mdi) {
    for (int b : rho_blocks) t.push_back({b, i, j, 1.0});
  } else {
    const int db = spec.register_dims[1];
    for (int b = 0; b < db; ++b) t.push_back({rho_blocks.at(0), i * db + b, j * db + b, 1.0});
  }
  return t;
}

inline void check_epsilons(const ProtocolSpec& spec) {
  for (double e : spec.epsilons)
    if (!(e >= 0.0 && e <= 1.0)) throw InvalidInput("epsilon outside [0,1]");
}

}  // namespace detail

/// <i|rho_A|j> = sqrt(p_i p_j) <psi_j|psi_i>, psi_j = sqrt(1-eps_j) phi_j + sqrt(eps_j) phi_j^perp,
/// one constraint per unordered pair i <= j.
inline std::vector<LinearConstraint> rho_link_constraints(const ProtocolSpec& spec, const GramLayout& lay,
                                                          const std::vector<int>& rho_blocks, int gblock) {
  detail::check_epsilons(spec);
  if (lay.n != spec.n_settings) throw DimensionMismatch("rho_link_constraints: layout does not match spec");
  const bool mdi_layout = lay.mode == GramMode::MdiFull;
  if (mdi_layout != (spec.kind == ProtocolKind::Mdi) && !lay.reduced())
    throw InvalidInput("rho_link_constraints: layout mode does not match protocol kind");

  std::vector<LinearConstraint> out;
  const auto& p = spec.probabilities;
  for (int i = 0; i < lay.n; ++i)
    for (int j = i; j < lay.n; ++j) {
      LinearConstraint c;
      c.self_conjugate = i == j;
      c.label = "link(" + std::to_string(i) + "," + std::to_string(j) + ")";
      c.terms = detail::rho_a_entry(spec, rho_blocks, i, j);
      const double w = std::sqrt(p[i] * p[j]);
      const double s_i[2] = {std::sqrt(1 - spec.epsilons[i]), std::sqrt(spec.epsilons[i])};
      const double s_j[2] = {std::sqrt(1 - spec.epsilons[j]), std::sqrt(spec.epsilons[j])};
      // <u_{j,a}|u_{i,b}> with u_{.,0} = phi, u_{.,1} = phi^perp
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const double k = w * s_j[a] * s_i[b];
          if (k == 0.0) continue;
          if (a == 0 && b == 0 && lay.reduced()) {
            c.rhs += k * lay.reference(j, i);
            continue;
          }
          const auto xu = a == 0 ? lay.reference_expansion(j) : lay.perp_expansion(j);
          const auto xv = b == 0 ? lay.reference_expansion(i) : lay.perp_expansion(i);
          for (const auto& [r, cu] : xu)
            for (const auto& [col, cv] : xv) c.terms.push_back({gblock, r, col, -k * std::conj(cu) * cv});
        }
      out.push_back(std::move(c));
    }
  return out;
}

/// Fully characterized link: <i|rho_A|j> = sqrt(p_i p_j) <phi_j|phi_i>.
inline std::vector<LinearConstraint> reference_link_constraints(const ProtocolSpec& spec,
                                                                const std::vector<int>& rho_blocks) {
  std::vector<LinearConstraint> out;
  const auto& p = spec.probabilities;
  for (int i = 0; i < spec.n_settings; ++i)
    for (int j = i; j < spec.n_settings; ++j)
      out.push_back({detail::rho_a_entry(spec, rho_blocks, i, j),
                     std::sqrt(p[i] * p[j]) * spec.reference_inner_products(j, i), i == j,
                     "ref(" + std::to_string(i) + "," + std::to_string(j) + ")"});
  return out;
}

/// Tr[(|j><j| (x) Gamma_k) rho] = p_j Y_{k|j}, or Tr[|ij><ij| rho^(gamma)] = p_ij Y_{gamma|ij}.
inline std::vector<LinearConstraint> yield_constraints(const ProtocolSpec& spec, const ObservedStats& stats,
                                                       const std::vector<int>& rho_blocks) {
  std::vector<LinearConstraint> out;
  if (static_cast<int>(stats.yields.size()) != spec.n_settings)
    throw InvalidStatistics("yield_constraints: statistics do not cover every setting");
  const auto& p = spec.probabilities;
  for (int j = 0; j < spec.n_settings; ++j) {
    const auto& row = stats.yields[j];
    const std::size_t outcomes = spec.kind == ProtocolKind::Mdi ? rho_blocks.size() : spec.bob_povm.size();
    if (row.size() != outcomes) throw InvalidStatistics("yield_constraints: missing outcomes");
    for (std::size_t k = 0; k < outcomes; ++k) {
      if (!(row[k] >= 0.0) || !std::isfinite(row[k])) throw InvalidStatistics("yield_constraints: negative yield");
      LinearConstraint c{{}, p[j] * row[k], true, "Y(" + std::to_string(k) + "|" + std::to_string(j) + ")"};
      if (spec.kind == ProtocolKind::Mdi) {
        c.terms.push_back({rho_blocks[k], j, j, 1.0});
      } else {
        const Mat& gamma = spec.bob_povm[k];
        const int db = spec.register_dims[1];
        for (int b = 0; b < db; ++b)
          for (int b2 = 0; b2 < db; ++b2)
            if (gamma(b, b2) != cplx(0.0)) c.terms.push_back({rho_blocks[0], j * db + b2, j * db + b, gamma(b, b2)});
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

/// Gram matrix of {phi_j} u {phi_j^perp} (2n x 2n) implied by a layout variable G.
inline Mat family_gram(const GramLayout& lay, const Mat& g) {
  std::vector<GramLayout::Expansion> x;
  for (int j = 0; j < lay.n; ++j) x.push_back(lay.reference_expansion(j));
  for (int j = 0; j < lay.n; ++j) x.push_back(lay.perp_expansion(j));
  Mat out = Mat::Zero(2 * lay.n, 2 * lay.n);
  for (int u = 0; u < 2 * lay.n; ++u)
    for (int v = 0; v < 2 * lay.n; ++v)
      for (const auto& [r, cu] : x[u])
        for (const auto& [c, cv] : x[v]) out(u, v) += std::conj(cu) * cv * g(r, c);
  return out;
}

/// Directions c with c^dagger rho_A c = 0 on every feasible point: combinations of
/// exactly characterized settings (eps_j = 0) whose reference states are linearly dependent.
/// Columns are orthonormal vectors in the setting index space.
inline Mat rho_a_kernel(const ProtocolSpec& spec, double rank_tol = 1e-9) {
  std::vector<int> exact;
  for (int j = 0; j < spec.n_settings; ++j)
    if (spec.epsilons[j] == 0.0 && spec.probabilities[j] > 0.0) exact.push_back(j);
  const int m = static_cast<int>(exact.size());
  if (m == 0) return Mat(spec.n_settings, 0);
  Mat sub(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      const int i = exact[a], j = exact[b];
      sub(a, b) = std::sqrt(spec.probabilities[i] * spec.probabilities[j]) * spec.reference_inner_products(j, i);
    }
  const Mat ker = kernel_basis(sub, rank_tol);
  Mat out = Mat::Zero(spec.n_settings, ker.cols());
  for (int a = 0; a < m; ++a) out.row(exact[a]) = ker.row(a);
  return out;
}

}  // namespace qkdpc
