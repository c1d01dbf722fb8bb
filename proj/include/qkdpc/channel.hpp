#pragma once

// Channel models that produce the statistics an experiment would observe:
// a lossy channel with an active-basis BB84 receiver, and two lossy links into
// an interference measurement for the coherent-light MDI protocol.

#include <array>
#include <cmath>
#include <vector>

#include "qkdpc/protocol.hpp"

namespace qkdpc {

struct ChannelParams {
  double distance_km = 0.0;
  double eta_d = 0.73;  // detector efficiency
  double p_d = 1e-6;    // dark-count probability
  double f = 1.16;      // error-correction inefficiency

  /// eta = eta_d * 10^(-0.02 l)
  double eta() const { return eta_d * std::pow(10.0, -0.02 * distance_km); }

  void validate() const {
    if (!(distance_km >= 0.0)) throw InvalidInput("ChannelParams: distance must be non-negative");
    const double e = eta();
    if (!(e > 0.0 && e <= 1.0)) throw InvalidInput("ChannelParams: transmission must lie in (0,1]");
    if (!(p_d >= 0.0 && p_d < 1.0)) throw InvalidInput("ChannelParams: p_d must lie in [0,1)");
    if (!(f >= 1.0)) throw InvalidInput("ChannelParams: f must be at least 1");
  }
};

/// Observed statistics. PM: yields[j][k] = Y_{k|j}. MDI: yields[i * 3 + j][gamma] = Y_{gamma|ij}.
struct ObservedStats {
  ProtocolKind kind = ProtocolKind::PrepareMeasure;
  std::vector<std::vector<double>> yields;
  double bit_error = 0.0;
  double p_pass = 0.0;
  double lambda_ec = 0.0;
  bool physical = true;
};

/// BB84 yields to first order in p_d. Outcome order: Z0, Z1, X0, X1, inconclusive.
/// The inconclusive yield is the no-click probability, 1 - sum_{B,beta} Y_{B beta|j} / (p_ZB + p_XB),
/// which reduces to 1 - sum_{B,beta} Y_{B beta|j} for a physical basis choice.
inline std::vector<std::vector<double>> bb84_yields(const ChannelParams& params, double delta, double p_zb,
                                                    double p_xb) {
  const double eta = params.eta();
  const double pd = params.p_d;
  const auto theta = bb84_angles(delta);
  std::vector<std::vector<double>> y(4, std::vector<double>(5));
  for (int j = 0; j < 4; ++j) {
    const double c = std::cos(2 * theta[j]);
    const double s = std::sin(2 * theta[j]);
    const double base = (1 - eta) * pd;
    y[j][0] = p_zb * (base + eta / 2 * (1 + (1 - pd) * c));
    y[j][1] = p_zb * (base + eta / 2 * (1 - (1 - pd) * c));
    y[j][2] = p_xb * (base + eta / 2 * (1 + (1 - pd) * s));
    y[j][3] = p_xb * (base + eta / 2 * (1 - (1 - pd) * s));
    y[j][4] = 1.0 - (y[j][0] + y[j][1] + y[j][2] + y[j][3]) / (p_zb + p_xb);
  }
  return y;
}

inline std::vector<std::vector<double>> bb84_yields(const ChannelParams& params, double delta, double p_zb) {
  return bb84_yields(params, delta, p_zb, 1.0 - p_zb);
}

struct ErrorAndPass {
  double error = 0.0;
  double p_pass = 0.0;
};

inline ErrorAndPass bb84_error_and_pass(const std::vector<std::vector<double>>& y, double p_za) {
  if (y.size() < 2 || y[0].size() < 2 || y[1].size() < 2) throw InvalidStatistics("bb84_error_and_pass: incomplete yields");
  const double clicks = y[0][0] + y[0][1] + y[1][0] + y[1][1];
  if (!(clicks > 0.0)) throw DegenerateStatistics("bb84_error_and_pass: no Z-basis clicks");
  return {(y[0][1] + y[1][0]) / clicks, p_za / 2 * clicks};
}

inline std::vector<std::vector<double>> mdi_yields(const ChannelParams& params, double alpha, double delta) {
  const double eta = params.eta();
  const double pd = params.p_d;
  const auto amp = mdi_amplitudes(alpha, delta);
  std::vector<std::vector<double>> y(9, std::vector<double>(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double sum2 = std::norm(amp[i] + amp[j]);
      const double diff2 = std::norm(amp[i] - amp[j]);
      const double no_click_c = std::exp(-eta / 2 * sum2) * (1 - pd);
      const double no_click_d = std::exp(-eta / 2 * diff2) * (1 - pd);
      auto& row = y[i * 3 + j];
      row[0] = (1 - no_click_c) * no_click_d;
      row[1] = (1 - no_click_d) * no_click_c;
      row[2] = 1 - row[0] - row[1];
    }
  return y;
}

/// Bit-error rate over the key settings (a gamma = 1 announcement flips Bob's bit) and sifting probability.
inline ErrorAndPass mdi_error_and_pass(const std::vector<std::vector<double>>& y, const std::vector<double>& p) {
  if (y.size() < 9 || p.size() < 9) throw InvalidStatistics("mdi_error_and_pass: incomplete yields");
  auto at = [&](int i, int j) -> const std::vector<double>& { return y[i * 3 + j]; };
  const double errors = at(0, 1)[0] + at(1, 0)[0] + at(0, 0)[1] + at(1, 1)[1];
  double clicks = 0.0, pass = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      clicks += at(i, j)[0] + at(i, j)[1];
      pass += p[i * 3 + j] * (at(i, j)[0] + at(i, j)[1]);
    }
  if (!(clicks > 0.0)) throw DegenerateStatistics("mdi_error_and_pass: no key-announcement events");
  return {errors / clicks, pass};
}

/// lambda_EC = f h(e)
inline double ec_cost(double e, double f) {
  if (!(e >= 0.0 && e <= 1.0)) throw InvalidInput("ec_cost: error rate outside [0,1]");
  return f * binary_entropy(e);
}

}  // namespace qkdpc
