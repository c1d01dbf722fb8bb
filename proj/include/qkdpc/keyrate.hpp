#pragma once

// End-to-end rates: statistics from the channel model, one conic solve per
// point, R = h - p_pass * lambda_EC, distance sweeps, alpha search for MDI,
// CSV output and JSON configuration.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qkdpc/channel.hpp"
#include "qkdpc/problem.hpp"
#include "qkdpc/solver.hpp"
#include "qkdpc/verify.hpp"

namespace qkdpc {

enum class ProtocolName { Bb84, MdiCoherent };
enum class Pipeline { Auto, Gram, Exact };

inline const char* to_string(ProtocolName p) { return p == ProtocolName::Bb84 ? "bb84" : "mdi-coherent"; }

inline ProtocolName parse_protocol(const std::string& s) {
  if (s == "bb84") return ProtocolName::Bb84;
  if (s == "mdi-coherent") return ProtocolName::MdiCoherent;
  throw InvalidInput("unknown protocol '" + s + "' (expected bb84 or mdi-coherent)");
}

inline Pipeline parse_pipeline(const std::string& s) {
  if (s == "auto") return Pipeline::Auto;
  if (s == "gram") return Pipeline::Gram;
  if (s == "exact") return Pipeline::Exact;
  throw InvalidInput("unknown pipeline '" + s + "' (expected auto, gram or exact)");
}

inline SolverKind parse_solver(const std::string& s) {
  if (s == "ipm") return SolverKind::Ipm;
  if (s == "fw") return SolverKind::FrankWolfe;
  throw InvalidInput("unknown solver '" + s + "' (expected ipm or fw)");
}

struct DistanceRange {
  double start = 0.0;
  double stop = 100.0;
  double step = 5.0;

  std::vector<double> values() const {
    std::vector<double> out;
    if (stop < start) return out;
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long k = 0; k <= n; ++k) out.push_back(start + k * step);
    return out;
  }
};

struct AlphaSearch {
  double min = 0.03;
  double max = 0.5;
  int grid = 12;
  std::optional<double> fixed;  // skip the search and use this amplitude
};

struct RunConfig {
  ProtocolName protocol = ProtocolName::Bb84;
  double delta = 0.0;
  std::vector<double> epsilons{0.0};
  ChannelParams channel;
  DistanceRange distances;
  AlphaSearch alpha;
  SolverOptions solver;
  Pipeline pipeline = Pipeline::Auto;
  bool until_cutoff = false;  // stop the sweep after the first zero-rate distance
  int workers = 1;
  bool audit = false;
  std::string out;

  void validate() const {
    if (!(delta >= 0.0 && delta < std::numbers::pi)) throw InvalidInput("config: delta must lie in [0, pi)");
    if (epsilons.empty()) throw InvalidInput("config: epsilon list is empty");
    for (double e : epsilons)
      if (!(e >= 0.0 && e <= 1.0)) throw InvalidInput("config: epsilon outside [0,1]");
    if (!(channel.eta_d > 0.0 && channel.eta_d <= 1.0)) throw InvalidInput("config: eta_d must lie in (0,1]");
    if (!(channel.p_d >= 0.0 && channel.p_d < 1.0)) throw InvalidInput("config: p_d must lie in [0,1)");
    if (!(channel.f >= 1.0)) throw InvalidInput("config: f must be at least 1");
    if (!(distances.start >= 0.0)) throw InvalidInput("config: distances.start must be non-negative");
    if (!(distances.step > 0.0)) throw InvalidInput("config: distances.step must be positive");
    if (!(alpha.min > 0.0 && alpha.max <= 1.0 && alpha.min <= alpha.max))
      throw InvalidInput("config: alpha window must satisfy 0 < min <= max <= 1");
    if (alpha.grid < 2) throw InvalidInput("config: alpha.grid must be at least 2");
    if (alpha.fixed && !(*alpha.fixed > 0.0 && *alpha.fixed <= 1.0))
      throw InvalidInput("config: alpha.fixed must lie in (0,1]");
    if (workers < 1) throw InvalidInput("config: workers must be at least 1");
    if (solver.max_iter < 1 || !(solver.tol_gap > 0.0) || !(solver.tol_feas > 0.0))
      throw InvalidInput("config: solver tolerances must be positive");
  }
};

struct KeyRatePoint {
  double distance_km = 0.0;
  std::optional<double> alpha;
  double epsilon = 0.0;
  double delta = 0.0;
  double h_bits = 0.0;     // certified lower bound, normalization applied
  double h_primal = 0.0;
  double p_pass = 0.0;
  double lambda_ec = 0.0;
  double key_rate = 0.0;   // max(0, h - p_pass * lambda_ec), computed from the rounded columns
  double gap = 0.0;
  std::string status;
  int iterations = 0;
  double wall_seconds = 0.0;
  bool flagged = false;    // alpha search found no positive rate
  std::optional<bool> audit_pass;
};

/// Value as written with 12 significant digits.
inline double round12(double x) {
  if (!std::isfinite(x)) return x;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

inline std::string format12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline double reported_rate(double h, double p_pass, double lambda_ec) {
  return round12(std::max(0.0, round12(h) - round12(p_pass) * round12(lambda_ec)));
}

/// Protocol description and statistics for one point, with the asymptotic conventions:
/// BB84 with all basis weights one (Tr rho = 2); MDI solved at p_c = 2/3 with h scaled by 9/4
/// and p_pass taken in the p_c -> 1 limit.
struct PointInput {
  ProtocolSpec spec;
  ObservedStats stats;
};

inline PointInput make_point_input(ProtocolName protocol, const ChannelParams& channel, double delta, double eps,
                                   double alpha = 0.0) {
  channel.validate();
  PointInput in;
  if (protocol == ProtocolName::Bb84) {
    in.spec = build_bb84(delta, eps, Bb84Weights::asymptotic());
    in.stats.kind = ProtocolKind::PrepareMeasure;
    in.stats.yields = bb84_yields(channel, delta, 1.0, 1.0);
    in.stats.physical = false;
    const auto ep = bb84_error_and_pass(in.stats.yields, 1.0);
    in.stats.bit_error = ep.error;
    in.stats.p_pass = ep.p_pass;
  } else {
    in.spec = build_mdi_coherent(alpha, delta, eps, 2.0 / 3.0);
    in.spec.normalization = 9.0 / 4.0;
    in.stats.kind = ProtocolKind::Mdi;
    in.stats.yields = mdi_yields(channel, alpha, delta);
    std::vector<double> p_limit(9, 0.0);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) p_limit[i * 3 + j] = 0.25;
    const auto ep = mdi_error_and_pass(in.stats.yields, p_limit);
    in.stats.bit_error = ep.error;
    in.stats.p_pass = ep.p_pass;
  }
  in.stats.lambda_ec = ec_cost(in.stats.bit_error, channel.f);
  return in;
}

struct PointOptions {
  SolverOptions solver;
  Pipeline pipeline = Pipeline::Auto;
  bool audit = false;
  std::function<void(const std::string&)> log;  // receives one JSON line per solve
};

inline bool uses_gram(const ProtocolSpec& spec, Pipeline p) {
  if (p == Pipeline::Gram) return true;
  if (p == Pipeline::Exact) return false;
  return std::any_of(spec.epsilons.begin(), spec.epsilons.end(), [](double e) { return e > 0.0; });
}

inline KeyRatePoint key_rate_point(const ProtocolSpec& spec, const ObservedStats& stats, const PointOptions& opts = {}) {
  KeyRatePoint pt;
  AssemblyOptions ao;
  ao.partial = uses_gram(spec, opts.pipeline);
  if (!ao.partial && std::any_of(spec.epsilons.begin(), spec.epsilons.end(), [](double e) { return e > 0.0; }))
    throw InvalidInput("key_rate_point: the exact-reference pipeline requires epsilon = 0");
  const ConicProblem pr = assemble_problem(spec, stats, ao);
  const SolveResult res = solve(pr, opts.solver);
  const double norm = spec.normalization;
  pt.status = to_string(res.status);
  pt.iterations = res.iterations;
  pt.wall_seconds = res.wall_seconds;
  pt.p_pass = stats.p_pass;
  pt.lambda_ec = stats.lambda_ec;
  pt.h_primal = norm * res.h_primal;
  // The certified bound is valid whenever it is finite, converged or not.
  pt.h_bits = std::isfinite(res.h_certified_lower) ? norm * res.h_certified_lower : 0.0;
  pt.gap = norm * res.gap;
  pt.h_bits = round12(pt.h_bits);
  pt.p_pass = round12(pt.p_pass);
  pt.lambda_ec = round12(pt.lambda_ec);
  pt.gap = round12(pt.gap);
  pt.key_rate = reported_rate(pt.h_bits, pt.p_pass, pt.lambda_ec);
  if (opts.audit) pt.audit_pass = audit_solution(pr, res).pass;
  if (opts.log) {
    nlohmann::json j{{"event", "solve"},
                     {"protocol", spec.label},
                     {"pipeline", ao.partial ? "gram" : "exact"},
                     {"status", pt.status},
                     {"iterations", res.iterations},
                     {"outer_iterations", res.outer_iterations},
                     {"equality_residual", res.residuals.max_equality},
                     {"min_eig_rho", res.residuals.min_eig_rho},
                     {"gap", res.gap},
                     {"h_certified", res.h_certified_lower},
                     {"wall_seconds", res.wall_seconds}};
    if (!res.message.empty()) j["message"] = res.message;
    if (std::isnan(res.residuals.min_eig_gram)) j["min_eig_gram"] = nullptr;
    else j["min_eig_gram"] = res.residuals.min_eig_gram;
    opts.log(j.dump());
  }
  return pt;
}

inline PointOptions point_options(const RunConfig& cfg, std::function<void(const std::string&)> log = {}) {
  return {cfg.solver, cfg.pipeline, cfg.audit, std::move(log)};
}

inline KeyRatePoint evaluate_point(const RunConfig& cfg, double distance, double eps, double alpha,
                                   const PointOptions& po) {
  ChannelParams ch = cfg.channel;
  ch.distance_km = distance;
  KeyRatePoint pt;
  if (cfg.protocol == ProtocolName::MdiCoherent && !(alpha > 0.0)) {
    // Every setting is the vacuum: nothing to solve, h = 0 is exact.
    ch.validate();
    std::vector<double> p_limit(9, 0.0);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) p_limit[i * 3 + j] = 0.25;
    const auto y = mdi_yields(ch, 0.0, cfg.delta);
    double clicks = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) clicks += y[i * 3 + j][0] + y[i * 3 + j][1];
    if (clicks > 0.0) {
      const auto ep = mdi_error_and_pass(y, p_limit);
      pt.p_pass = round12(ep.p_pass);
      pt.lambda_ec = round12(ec_cost(ep.error, ch.f));
    }
    pt.status = to_string(SolveStatus::Optimal);
    pt.key_rate = reported_rate(0.0, pt.p_pass, pt.lambda_ec);
  } else {
    const auto in = make_point_input(cfg.protocol, ch, cfg.delta, eps, alpha);
    pt = key_rate_point(in.spec, in.stats, po);
  }
  pt.distance_km = distance;
  pt.epsilon = eps;
  pt.delta = cfg.delta;
  if (cfg.protocol == ProtocolName::MdiCoherent) pt.alpha = alpha;
  return pt;
}

struct AlphaResult {
  double alpha = 0.0;
  KeyRatePoint point;
  double best_grid_rate = 0.0;
};

/// Log-spaced grid, then golden-section refinement inside the best bracket.
inline AlphaResult optimize_alpha(const RunConfig& cfg, double distance, double eps, const PointOptions& po) {
  if (cfg.protocol != ProtocolName::MdiCoherent) throw InvalidInput("optimize_alpha: only the MDI protocol has an amplitude");
  if (cfg.alpha.fixed) {
    AlphaResult r;
    r.alpha = *cfg.alpha.fixed;
    r.point = evaluate_point(cfg, distance, eps, r.alpha, po);
    r.best_grid_rate = r.point.key_rate;
    return r;
  }
  const int n = cfg.alpha.grid;
  const double lo = std::log(cfg.alpha.min), hi = std::log(cfg.alpha.max);
  std::vector<double> grid(n);
  std::vector<KeyRatePoint> pts;
  for (int k = 0; k < n; ++k) grid[k] = n == 1 ? cfg.alpha.min : std::exp(lo + (hi - lo) * k / (n - 1));
  int best = 0;
  for (int k = 0; k < n; ++k) {
    pts.push_back(evaluate_point(cfg, distance, eps, grid[k], po));
    if (pts[k].key_rate > pts[best].key_rate) best = k;  // strict: ties keep the smaller alpha
  }
  AlphaResult r;
  r.best_grid_rate = pts[best].key_rate;
  if (!(pts[best].key_rate > 0.0)) {
    r.alpha = grid[0];
    r.point = pts[0];
    r.point.flagged = true;
    return r;
  }
  r.alpha = grid[best];
  r.point = pts[best];
  double a = std::log(grid[std::max(0, best - 1)]), b = std::log(grid[std::min(n - 1, best + 1)]);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto eval = [&](double la) {
    KeyRatePoint p = evaluate_point(cfg, distance, eps, std::exp(la), po);
    if (p.key_rate > r.point.key_rate) {
      r.point = p;
      r.alpha = std::exp(la);
    }
    return p.key_rate;
  };
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = eval(c), fd = eval(d);
  for (int it = 0; it < 12 && (b - a) > 1e-3; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = eval(d);
    }
  }
  return r;
}

/// One row per (epsilon, distance). Rows are sorted by epsilon, then distance.
inline std::vector<KeyRatePoint> sweep_distance(const RunConfig& cfg, std::function<void(const std::string&)> log = {}) {
  cfg.validate();
  const auto ds = cfg.distances.values();
  std::vector<KeyRatePoint> rows;
  std::mutex log_mutex;
  auto locked_log = [&](const std::string& line) {
    if (!log) return;
    std::lock_guard<std::mutex> lk(log_mutex);
    log(line);
  };
  const PointOptions po = point_options(cfg, log ? std::function<void(const std::string&)>(locked_log) : nullptr);
  for (double eps : cfg.epsilons) {
    std::vector<KeyRatePoint> part(ds.size());
    std::vector<char> done(ds.size(), 0);
    std::size_t limit = ds.size();
    // Points are independent; with a cutoff they are processed in ascending batches.
    const std::size_t batch = cfg.until_cutoff ? static_cast<std::size_t>(cfg.workers) : ds.size();
    for (std::size_t first = 0; first < limit; first += batch) {
      const std::size_t last = std::min(limit, first + batch);
      std::atomic<std::size_t> next{first};
      auto work = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < last;) {
          KeyRatePoint p;
          try {
            p = cfg.protocol == ProtocolName::MdiCoherent ? optimize_alpha(cfg, ds[k], eps, po).point
                                                          : evaluate_point(cfg, ds[k], eps, 0.0, po);
          } catch (const Error& e) {
            p.distance_km = ds[k];
            p.epsilon = eps;
            p.delta = cfg.delta;
            p.status = std::string("error: ") + e.what();
            p.h_bits = p.p_pass = p.lambda_ec = p.gap = std::numeric_limits<double>::quiet_NaN();
          }
          part[k] = std::move(p);
          done[k] = 1;
        }
      };
      const int nt = std::min<int>(cfg.workers, static_cast<int>(last - first));
      std::vector<std::thread> threads;
      for (int t = 1; t < nt; ++t) threads.emplace_back(work);
      work();
      for (auto& th : threads) th.join();
      if (cfg.until_cutoff)
        for (std::size_t k = first; k < last; ++k)
          if (!(part[k].key_rate > 0.0)) {
            limit = k + 1;
            break;
          }
    }
    for (std::size_t k = 0; k < limit; ++k)
      if (done[k]) rows.push_back(part[k]);
  }
  return rows;
}

inline std::string csv_header(bool audit) {
  std::string h = "distance_km,alpha,epsilon,delta,h_bits,p_pass,lambda_ec,key_rate,gap,status";
  if (audit) h += ",audit_pass";
  return h;
}

inline void write_csv(std::ostream& os, const std::vector<KeyRatePoint>& rows, bool audit) {
  os << csv_header(audit) << '\n';
  for (const auto& r : rows) {
    std::string status = r.status;
    if (r.flagged) status += ";zero-rate";
    std::replace(status.begin(), status.end(), ',', ';');
    os << format12(r.distance_km) << ',' << (r.alpha ? format12(*r.alpha) : "") << ',' << format12(r.epsilon) << ','
       << format12(r.delta) << ',' << format12(r.h_bits) << ',' << format12(r.p_pass) << ','
       << format12(r.lambda_ec) << ',' << format12(r.key_rate) << ',' << format12(r.gap) << ',' << status;
    if (audit) os << ',' << (r.audit_pass ? (*r.audit_pass ? "1" : "0") : "");
    os << '\n';
  }
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidInput("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw InvalidInput("config: unknown key '" + it.key() + "' in " + where);
}

inline double number(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) throw InvalidInput("config: '" + key + "' must be a number");
  return j.get<double>();
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::number;
  detail::reject_unknown(j,
                         {"protocol", "delta", "epsilon", "eta_d", "p_d", "f", "distances", "alpha", "solver",
                          "pipeline", "until_cutoff", "workers", "out", "audit"},
                         "top level");
  RunConfig c;
  if (j.contains("protocol")) c.protocol = parse_protocol(j.at("protocol").get<std::string>());
  if (j.contains("delta")) c.delta = number(j.at("delta"), "delta");
  if (j.contains("epsilon")) {
    const auto& e = j.at("epsilon");
    c.epsilons.clear();
    if (e.is_array()) {
      for (const auto& x : e) c.epsilons.push_back(number(x, "epsilon"));
    } else {
      c.epsilons.push_back(number(e, "epsilon"));
    }
  }
  if (j.contains("eta_d")) c.channel.eta_d = number(j.at("eta_d"), "eta_d");
  if (j.contains("p_d")) c.channel.p_d = number(j.at("p_d"), "p_d");
  if (j.contains("f")) c.channel.f = number(j.at("f"), "f");
  if (j.contains("distances")) {
    const auto& d = j.at("distances");
    detail::reject_unknown(d, {"start", "stop", "step"}, "distances");
    if (d.contains("start")) c.distances.start = number(d.at("start"), "distances.start");
    if (d.contains("stop")) c.distances.stop = number(d.at("stop"), "distances.stop");
    if (d.contains("step")) c.distances.step = number(d.at("step"), "distances.step");
  }
  if (j.contains("alpha")) {
    const auto& a = j.at("alpha");
    detail::reject_unknown(a, {"min", "max", "grid", "fixed", "mode"}, "alpha");
    if (a.contains("min")) c.alpha.min = number(a.at("min"), "alpha.min");
    if (a.contains("max")) c.alpha.max = number(a.at("max"), "alpha.max");
    if (a.contains("grid")) c.alpha.grid = a.at("grid").get<int>();
    if (a.contains("fixed")) c.alpha.fixed = number(a.at("fixed"), "alpha.fixed");
    // mode "search" (default) or "fixed", which needs the fixed value
    const std::string mode = a.contains("mode") ? a.at("mode").get<std::string>() : (c.alpha.fixed ? "fixed" : "search");
    if (mode == "search") c.alpha.fixed.reset();
    else if (mode != "fixed") throw InvalidInput("config: alpha.mode must be 'search' or 'fixed'");
    else if (!c.alpha.fixed) throw InvalidInput("config: alpha.mode 'fixed' needs alpha.fixed");
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    detail::reject_unknown(s, {"tol_gap", "tol_feas", "max_iter", "kind"}, "solver");
    if (s.contains("tol_gap")) c.solver.tol_gap = number(s.at("tol_gap"), "solver.tol_gap");
    if (s.contains("tol_feas")) c.solver.tol_feas = number(s.at("tol_feas"), "solver.tol_feas");
    if (s.contains("max_iter")) c.solver.max_iter = s.at("max_iter").get<int>();
    if (s.contains("kind")) c.solver.kind = parse_solver(s.at("kind").get<std::string>());
  }
  if (j.contains("pipeline")) c.pipeline = parse_pipeline(j.at("pipeline").get<std::string>());
  if (j.contains("until_cutoff")) c.until_cutoff = j.at("until_cutoff").get<bool>();
  if (j.contains("workers")) c.workers = j.at("workers").get<int>();
  if (j.contains("out")) c.out = j.at("out").get<std::string>();
  if (j.contains("audit")) c.audit = j.at("audit").get<bool>();
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  try {
    return parse_config(j);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
}

}  // namespace qkdpc
