#pragma once

#include <random>

#include "qkdpc/qkdpc.hpp"

namespace qkdpc::testing {

inline Mat random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = cplx(n(rng), n(rng));
  return m;
}

inline Mat random_hermitian(int d, std::mt19937_64& rng) {
  const Mat a = random_matrix(d, d, rng);
  return 0.5 * (a + a.adjoint());
}

inline Mat random_density(int d, std::mt19937_64& rng, int rank = -1) {
  const Mat a = random_matrix(d, rank < 0 ? d : rank, rng);
  Mat rho = a * a.adjoint();
  return rho / rho.trace().real();
}

inline CVec random_unit(int d, std::mt19937_64& rng) {
  CVec v = random_matrix(d, 1, rng).col(0);
  return v / v.norm();
}

inline double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// Channel point used across tests: default detector and EC parameters with overrides.
inline ChannelParams channel(double distance, double eta_d = 0.73, double p_d = 1e-6, double f = 1.16) {
  ChannelParams c;
  c.distance_km = distance;
  c.eta_d = eta_d;
  c.p_d = p_d;
  c.f = f;
  return c;
}

}  // namespace qkdpc::testing
