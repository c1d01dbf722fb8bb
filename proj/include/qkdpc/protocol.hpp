#pragma once

// Protocol instances: settings, probabilities, reference-state inner products,
// fidelity deviation bounds, Bob's POVM, key maps and their facially reduced
// versions. Reference states are stored only through their Gram matrix.

#include <array>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "qkdpc/hermitian.hpp"

namespace qkdpc {

enum class ProtocolKind { PrepareMeasure, Mdi };

/// Reduced key maps G_hat(rho) = V^dagger G(rho) V and Z_hat(rho) = W^dagger Z(G(rho)) W.
struct FacialReduction {
  Mat v;  // full_dim x reduced_dim isometry for G
  Mat w;  // isometry for Z o G
  CPMap ghat;
  CPMap zhat;
  bool strictly_positive = false;
  double reconstruction_residual = 0.0;
};

namespace detail {

inline Mat random_density(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = cplx(n01(rng), n01(rng));
  Mat rho = a * a.adjoint();
  return rho / rho.trace().real();
}

inline double isometry_defect(const Mat& v) {
  return (v.adjoint() * v - Mat::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Restrict the key maps to the support captured by V (and W, defaulting to V).
inline FacialReduction facial_reduce(const CPMap& gmap, const CPMap& zmap, const Mat& v, const Mat& w_in = Mat()) {
  const Mat w = w_in.size() ? w_in : v;
  if (v.rows() != gmap.out_dim() || w.rows() != zmap.out_dim())
    throw DimensionMismatch("facial_reduce: isometry does not match the map output dimension");
  if (detail::isometry_defect(v) > kHermTol * 10 || detail::isometry_defect(w) > kHermTol * 10)
    throw InvalidIsometry("facial_reduce: V is not an isometry");

  const CPMap zg = zmap.compose(gmap);
  FacialReduction fr;
  fr.v = v;
  fr.w = w;
  fr.ghat = gmap.sandwich(v.adjoint(), Mat::Identity(gmap.in_dim(), gmap.in_dim()));
  fr.zhat = zg.sandwich(w.adjoint(), Mat::Identity(zg.in_dim(), zg.in_dim()));

  std::mt19937_64 rng(0x5eed);
  double residual = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const Mat rho = detail::random_density(gmap.in_dim(), rng);
    residual = std::max(residual, (gmap.apply(rho) - v * fr.ghat.apply(rho) * v.adjoint()).cwiseAbs().maxCoeff());
    residual = std::max(residual, (zg.apply(rho) - w * fr.zhat.apply(rho) * w.adjoint()).cwiseAbs().maxCoeff());
  }
  fr.reconstruction_residual = residual;
  if (residual > 1e-8) throw InvalidIsometry("facial_reduce: isometry does not capture the support of the key maps");

  const Mat id = Mat::Identity(gmap.in_dim(), gmap.in_dim());
  fr.strictly_positive = min_eigenvalue(fr.ghat.apply(id)) > 1e-12 && min_eigenvalue(fr.zhat.apply(id)) > 1e-12;
  return fr;
}

struct ProtocolSpec {
  ProtocolKind kind = ProtocolKind::PrepareMeasure;
  std::string label;

  int n_settings = 0;  // n (PM) or n_A * n_B joint settings (MDI, index i * n_B + j)
  int n_a = 0;
  int n_b = 0;
  std::vector<double> probabilities;
  Mat reference_inner_products;  // (i, j) -> <phi_i|phi_j>
  std::vector<double> epsilons;

  // Dimensions of the tensor factors of each rho block: {n, d_B} (PM) or {n_A, n_B} (MDI).
  std::vector<int> register_dims;

  // Prepare-and-measure only.
  std::vector<Mat> bob_povm;
  std::vector<std::string> outcome_labels;

  // MDI only.
  int n_announcements = 0;
  std::vector<int> key_announcements;

  // Key maps on one rho block (for MDI: the per-announcement maps).
  CPMap key_map_g;
  CPMap key_map_z;
  FacialReduction reduction;

  bool physical = true;  // false under the asymptotic normalization conventions
  double normalization = 1.0;

  int rho_dim() const { return register_dims[0] * register_dims[1]; }
  double total_probability() const {
    double s = 0.0;
    for (double p : probabilities) s += p;
    return s;
  }
};

/// Basis weights of BB84. The asymptotic convention sets all four to one (Tr rho_AB = 2).
struct Bb84Weights {
  double p_za = 1.0, p_xa = 0.0, p_zb = 1.0, p_xb = 0.0;
  bool physical = true;

  static Bb84Weights physical_choice(double p_za, double p_zb) { return {p_za, 1.0 - p_za, p_zb, 1.0 - p_zb, true}; }
  static Bb84Weights asymptotic() { return {1.0, 1.0, 1.0, 1.0, false}; }
};

inline std::array<double, 4> bb84_angles(double delta) {
  using std::numbers::pi;
  const std::array<double, 4> phis{0.0, pi, pi / 2, 3 * pi / 2};
  std::array<double, 4> theta{};
  for (int j = 0; j < 4; ++j) theta[j] = (1.0 + delta / pi) * phis[j] / 2.0;
  return theta;
}

namespace detail {

inline void check_epsilon(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidInput("epsilon must lie in [0,1]");
}

inline Mat ket_bra(int dim, int i, int j) {
  Mat m = Mat::Zero(dim, dim);
  m(i, j) = 1.0;
  return m;
}

/// Columns |a>_A |b>_B for a, b in {0,1}, embedded in a dA x dB register.
inline Mat qubit_pair_isometry(int da, int db) {
  Mat v = Mat::Zero(da * db, 4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) v(a * db + b, a * 2 + b) = 1.0;
  return v;
}

}  // namespace detail

inline ProtocolSpec build_bb84(double delta, double eps, const Bb84Weights& w) {
  using std::numbers::pi;
  if (!(delta >= 0.0 && delta < pi)) throw InvalidInput("build_bb84: delta must lie in [0, pi)");
  detail::check_epsilon(eps);
  for (double p : {w.p_za, w.p_zb})
    if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("build_bb84: basis probabilities must lie in (0,1]");
  if (w.p_xa < 0.0 || w.p_xb < 0.0) throw InvalidInput("build_bb84: negative basis probability");

  ProtocolSpec s;
  s.kind = ProtocolKind::PrepareMeasure;
  s.label = "bb84";
  s.n_settings = 4;
  s.n_a = 4;
  s.probabilities = {w.p_za / 2, w.p_za / 2, w.p_xa / 2, w.p_xa / 2};
  s.epsilons.assign(4, eps);
  s.register_dims = {4, 3};
  s.physical = w.physical;

  const auto theta = bb84_angles(delta);
  s.reference_inner_products = Mat(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) s.reference_inner_products(i, j) = std::cos(theta[i] - theta[j]);

  // Squashed receiver on span{|0>, |1>, |2> = vacuum}.
  CVec plus = CVec::Zero(3), minus = CVec::Zero(3);
  plus << 1, 1, 0;
  minus << 1, -1, 0;
  plus /= std::sqrt(2.0);
  minus /= std::sqrt(2.0);
  s.bob_povm = {w.p_zb * detail::ket_bra(3, 0, 0), w.p_zb * detail::ket_bra(3, 1, 1), w.p_xb * plus * plus.adjoint(),
                w.p_xb * minus * minus.adjoint(), detail::ket_bra(3, 2, 2)};
  s.outcome_labels = {"Z0", "Z1", "X0", "X1", "inconclusive"};
  if (s.physical) {
    Mat sum = Mat::Zero(3, 3);
    for (const auto& g : s.bob_povm) sum += g;
    if ((sum - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() > 1e-10)
      throw InvalidInput("build_bb84: POVM does not sum to identity");
  }

  const Mat pa = projector(4, {0, 1});
  const Mat pb = projector(3, {0, 1});
  const Mat g = std::sqrt(w.p_zb) * kron(pa, pb);
  s.key_map_g = CPMap({g}, "G");
  s.key_map_z = CPMap({kron(projector(4, {0}), pb), kron(projector(4, {1}), pb)}, "Z");
  s.reduction = facial_reduce(s.key_map_g, s.key_map_z, detail::qubit_pair_isometry(4, 3));
  s.normalization = 1.0;
  return s;
}

/// Physical BB84 with p_XA = 1 - p_ZA and p_XB = 1 - p_ZB.
inline ProtocolSpec build_bb84(double delta, double eps, double p_za, double p_zb) {
  return build_bb84(delta, eps, Bb84Weights::physical_choice(p_za, p_zb));
}

/// Coherent amplitudes of the three MDI settings: alpha, -alpha e^{i delta}, vacuum.
inline std::array<cplx, 3> mdi_amplitudes(double alpha, double delta) {
  return {cplx(alpha, 0.0), -alpha * std::exp(cplx(0.0, delta)), cplx(0.0, 0.0)};
}

/// Joint error bound from per-user bounds: 1 - eps_ij = (1 - eps)^2.
inline double mdi_joint_epsilon(double eps) { return 1.0 - (1.0 - eps) * (1.0 - eps); }

inline ProtocolSpec build_mdi_coherent(double alpha, double delta, double eps, double p_c) {
  using std::numbers::pi;
  if (!(alpha > 0.0)) throw InvalidInput("build_mdi_coherent: alpha must be positive");
  if (!(delta >= 0.0 && delta < pi)) throw InvalidInput("build_mdi_coherent: delta must lie in [0, pi)");
  if (!(p_c > 0.0 && p_c < 1.0)) throw InvalidInput("build_mdi_coherent: p_c must lie in (0,1)");
  detail::check_epsilon(eps);

  ProtocolSpec s;
  s.kind = ProtocolKind::Mdi;
  s.label = "mdi-coherent";
  s.n_a = 3;
  s.n_b = 3;
  s.n_settings = 9;
  s.register_dims = {3, 3};
  s.n_announcements = 3;
  s.key_announcements = {0, 1};

  const std::array<double, 3> p{p_c / 2, p_c / 2, 1.0 - p_c};
  const auto amp = mdi_amplitudes(alpha, delta);
  Mat single(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) single(i, j) = coherent_overlap(amp[i], amp[j]);
  s.reference_inner_products = kron(single, single);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s.probabilities.push_back(p[i] * p[j]);
  s.epsilons.assign(9, mdi_joint_epsilon(eps));

  const Mat pb = projector(3, {0, 1});
  s.key_map_g = CPMap({kron(projector(3, {0, 1}), pb)}, "G'");
  s.key_map_z = CPMap({kron(projector(3, {0}), pb), kron(projector(3, {1}), pb)}, "Z'");
  s.reduction = facial_reduce(s.key_map_g, s.key_map_z, detail::qubit_pair_isometry(3, 3));
  s.physical = true;
  s.normalization = 1.0;
  return s;
}

/// The unsplit announcement-register form of the MDI key maps on AB (x) C.
struct MdiFullMaps {
  CPMap g;  // G on ABC
  CPMap z;  // Z on ABC
};

inline MdiFullMaps mdi_full_key_maps(int n_announcements = 3) {
  const Mat pb = projector(3, {0, 1});
  Mat pc = Mat::Zero(n_announcements, n_announcements);
  pc(0, 0) = pc(1, 1) = 1.0;
  const Mat g = kron(kron(projector(3, {0, 1}), pb), pc);
  return {CPMap({g}, "G"),
          CPMap({kron(kron(projector(3, {0}), pb), pc), kron(kron(projector(3, {1}), pb), pc)}, "Z")};
}

}  // namespace qkdpc
