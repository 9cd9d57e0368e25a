#ifndef ALOHANUM_HARNESS_HPP_
#define ALOHANUM_HARNESS_HPP_

#include <algorithm>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "alohanum/aloha_sim.hpp"
#include "alohanum/crosslayer_opt.hpp"
#include "alohanum/csv.hpp"
#include "alohanum/delay_model.hpp"
#include "alohanum/errors.hpp"
#include "alohanum/mac_opt.hpp"
#include "alohanum/net_model.hpp"

// Experiment drivers behind the command line front end. Each returns a
// CsvTable with a canonical row order so repeated runs produce identical
// files.

namespace alohanum {

/// "linear:N", "star:N", "sample10" or a network file path.
inline Network resolve_network(const std::string& spec) {
  auto parse_size = [&](const std::string& s) {
    try {
      const int n = std::stoi(s);
      if (n < 2) throw ValidationError("network size must be >= 2, got " + s);
      return n;
    } catch (const std::invalid_argument&) {
      throw ValidationError("bad network size '" + s + "'");
    }
  };
  if (spec == "sample10") return build_sample10();
  if (spec.rfind("linear:", 0) == 0)
    return Network{build_linear(parse_size(spec.substr(7))), {}};
  if (spec.rfind("star:", 0) == 0)
    return Network{build_star(parse_size(spec.substr(5))), {}};
  return load_network(spec);
}

// ---------------------------------------------------------------------------
// Feasibility threshold sweeps
// ---------------------------------------------------------------------------

inline CsvTable run_min_dc(const std::string& family, const std::vector<int>& sizes) {
  CsvTable table;
  table.header = {"family", "n", "min_dc"};
  if (family == "linear" || family == "star") {
    if (sizes.empty()) throw ValidationError("min-dc: need --sizes with a generator family");
    for (int n : sizes) {
      Topology topo = family == "linear" ? build_linear(n) : build_star(n);
      table.add(family, n, min_dc(topo).min_dc);
    }
    return table;
  }
  Network net = resolve_network(family);
  table.add(family, net.topology.node_count(), min_dc(net.topology).min_dc);
  return table;
}

// ---------------------------------------------------------------------------
// Energy / rate-utility tradeoff sweeps
// ---------------------------------------------------------------------------

struct TradeoffRow {
  double bound = 0.0, lambda1 = 0.0, lambda2 = 0.0;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double utility = std::numeric_limits<double>::quiet_NaN();
  double cost = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double kkt = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

namespace harness_detail {

template <typename Point, typename Solver>
std::vector<TradeoffRow> sweep(const std::vector<Point>& points, const Solver& solve_point) {
  std::vector<std::future<TradeoffRow>> futures;
  futures.reserve(points.size());
  for (const Point& pt : points)
    futures.push_back(std::async(std::launch::async, [&solve_point, pt] { return solve_point(pt); }));
  std::vector<TradeoffRow> rows;
  rows.reserve(points.size());
  for (auto& f : futures) rows.push_back(f.get());
  return rows;
}

struct GridPoint {
  double bound, lambda1, lambda2;
};

inline std::vector<GridPoint> grid(const std::vector<double>& bounds,
                                   const std::vector<double>& l1s,
                                   const std::vector<double>& l2s) {
  if (bounds.empty() || l1s.empty() || l2s.empty())
    throw ValidationError("tradeoff: bound and weight lists must be non-empty");
  std::vector<GridPoint> points;
  for (double b : bounds)
    for (double l1 : l1s)
      for (double l2 : l2s) points.push_back({b, l1, l2});
  std::sort(points.begin(), points.end(), [](const GridPoint& a, const GridPoint& b) {
    if (a.bound != b.bound) return a.bound < b.bound;
    if (a.lambda1 != b.lambda1) return a.lambda1 < b.lambda1;
    return a.lambda2 < b.lambda2;
  });
  return points;
}

inline CsvTable tradeoff_table(const std::vector<TradeoffRow>& rows) {
  CsvTable table;
  table.header = {"delay_bound", "lambda1",    "lambda2", "energy", "rate_utility",
                  "cost",        "iterations", "kkt",     "status"};
  for (const TradeoffRow& r : rows)
    table.add(r.bound, r.lambda1, r.lambda2, r.energy, r.utility, r.cost, r.iterations, r.kkt,
              r.status);
  return table;
}

}  // namespace harness_detail

inline CsvTable run_mac_tradeoff(const Topology& topo, const std::vector<double>& l1s,
                                 const std::vector<double>& l2s,
                                 const std::vector<double>& bounds) {
  auto points = harness_detail::grid(bounds, l1s, l2s);
  auto rows = harness_detail::sweep(points, [&](const harness_detail::GridPoint& pt) {
    TradeoffRow row;
    row.bound = pt.bound;
    row.lambda1 = pt.lambda1;
    row.lambda2 = pt.lambda2;
    try {
      MacSolution sol = solve_mac_centralized(topo, Weights{pt.lambda1, pt.lambda2, pt.bound});
      row.energy = total_energy(topo, sol.mac);
      row.utility = rate_utility(sol.rates.rate);
      row.cost = sol.cost;
      row.iterations = sol.report.iterations;
      row.kkt = sol.report.kkt_residual;
    } catch (const InfeasibleError&) {
      row.status = "infeasible";
    }
    return row;
  });
  return harness_detail::tradeoff_table(rows);
}

inline CsvTable run_xlayer_tradeoff(const Network& net, const std::vector<double>& l1s,
                                    const std::vector<double>& l2s,
                                    const std::vector<double>& bounds) {
  if (net.sessions.empty())
    throw ValidationError("tradeoff: cross-layer problem needs a network with sessions");
  auto points = harness_detail::grid(bounds, l1s, l2s);
  auto rows = harness_detail::sweep(points, [&](const harness_detail::GridPoint& pt) {
    TradeoffRow row;
    row.bound = pt.bound;
    row.lambda1 = pt.lambda1;
    row.lambda2 = pt.lambda2;
    std::vector<Session> sessions = net.sessions;
    for (Session& s : sessions) s.delay_bound = pt.bound;
    try {
      auto sol = solve_xlayer_centralized(net.topology, sessions,
                                          Weights{pt.lambda1, pt.lambda2, 0.0});
      row.energy = total_energy(net.topology, sol.mac);
      row.utility = sol.utility;
      row.cost = sol.cost;
      row.iterations = sol.report.iterations;
      row.kkt = sol.report.kkt_residual;
    } catch (const InfeasibleError&) {
      row.status = "infeasible";
    }
    return row;
  });
  return harness_detail::tradeoff_table(rows);
}

// ---------------------------------------------------------------------------
// Convergence traces
// ---------------------------------------------------------------------------

enum class ConvergeAlgo { kMacDistributed, kXlayerGradient, kXlayerNewton };

inline ConvergeAlgo parse_converge_algo(const std::string& name) {
  if (name == "mac-dist") return ConvergeAlgo::kMacDistributed;
  if (name == "xlayer-grad") return ConvergeAlgo::kXlayerGradient;
  if (name == "xlayer-newton") return ConvergeAlgo::kXlayerNewton;
  throw ValidationError("unknown algorithm '" + name +
                        "' (expected mac-dist | xlayer-grad | xlayer-newton)");
}

struct ConvergeResult {
  CsvTable table;
  int iters_to_target = -1;  // first trace row under the target error
  double final_error = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
};

inline ConvergeResult run_converge(const Network& net, ConvergeAlgo algo, double lambda1,
                                   double lambda2, double bound, const StepSchedule& schedule,
                                   int iters, double target = 0.01) {
  ConvergeResult out;
  out.table.header = {"iter", "err_cost_pct", "err_prob_pct", "err_rate_pct", "status"};

  if (algo == ConvergeAlgo::kMacDistributed) {
    Weights w{lambda1, lambda2, bound};
    MacSolution ref = solve_mac_centralized(net.topology, w);
    MacDistOptions opts;
    opts.max_iters = iters;
    opts.reference = &ref;
    opts.target_error = target;
    if (iters <= 0) {
      // No budget: report the error of the starting state only.
      MacState mac = MacState::uniform(net.topology, opts.initial_prob);
      MacRates rates;
      rates.rate.assign(static_cast<std::size_t>(net.topology.link_count()),
                        mac_rate_update(opts.initial_dual, w));
      const double cost = mac_cost(net.topology, w, mac, rates);
      const auto t = static_cast<std::size_t>(opts.tracked_link);
      out.table.add(0, 100.0 * std::abs(cost - ref.cost) / std::abs(ref.cost),
                    100.0 * std::abs(mac.link_prob[t] - ref.mac.link_prob[t]) /
                        ref.mac.link_prob[t],
                    100.0 * std::abs(rates.rate[t] - ref.rates.rate[t]) / ref.rates.rate[t],
                    "ok");
      out.final_error = std::abs(cost - ref.cost) / std::abs(ref.cost);
      return out;
    }
    try {
      auto run = run_mac_distributed(net.topology, w, schedule, opts);
      for (const MacTraceRow& row : run.trace)
        out.table.add(row.iter, 100.0 * row.err_cost, 100.0 * row.err_prob,
                      100.0 * row.err_rate, "ok");
      out.final_error = run.final_err_cost;
      for (const MacTraceRow& row : run.trace)
        if (row.err_cost < target) {
          out.iters_to_target = row.iter;
          break;
        }
    } catch (const DivergenceError& e) {
      out.diverged = true;
      out.table.add(-1, std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN(), std::string("diverged: ") + e.what());
    }
    return out;
  }

  std::vector<Session> sessions = net.sessions;
  if (sessions.empty()) throw ValidationError("converge: network has no sessions");
  for (Session& s : sessions) s.delay_bound = bound;
  Weights w{lambda1, lambda2, 0.0};
  auto ref = solve_xlayer_centralized(net.topology, sessions, w);
  XlayerDistOptions opts;
  opts.max_iters = iters;
  opts.reference = &ref;
  opts.target_error = target;
  const XlayerVariant variant = algo == ConvergeAlgo::kXlayerNewton ? XlayerVariant::kNewton
                                                                    : XlayerVariant::kGradient;
  try {
    auto run = run_xlayer_distributed(net.topology, sessions, w, variant, schedule, opts);
    for (const XlayerTraceRow& row : run.trace)
      out.table.add(row.iter, 100.0 * row.err_utility, 100.0 * row.err_prob,
                    100.0 * row.err_rate, "ok");
    out.final_error = run.final_err_utility;
    for (const XlayerTraceRow& row : run.trace)
      if (row.err_utility < target) {
        out.iters_to_target = row.iter;
        break;
      }
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.table.add(-1, std::numeric_limits<double>::quiet_NaN(),
                  std::numeric_limits<double>::quiet_NaN(),
                  std::numeric_limits<double>::quiet_NaN(), std::string("diverged: ") + e.what());
  }
  return out;
}

/// Canonical per-algorithm step sizes for the reference experiments; chosen
/// so the drivers converge on sample-scale networks and overridable from the
/// command line.
inline StepSchedule default_schedule(ConvergeAlgo algo) {
  StepSchedule s;
  switch (algo) {
    case ConvergeAlgo::kMacDistributed:
      s.link_dual = 0.05;
      break;
    case ConvergeAlgo::kXlayerGradient:
      s.link_dual = 0.1;
      s.session_dual = 0.1;
      s.prob = 1e-5;
      break;
    case ConvergeAlgo::kXlayerNewton:
      s.link_dual = 0.05;
      s.session_dual = 0.05;
      s.prob = 1e-5;
      break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Optimal vs suboptimal comparison
// ---------------------------------------------------------------------------

inline CsvTable run_compare_subopt(const Topology& topo, const std::vector<double>& l1s,
                                   const std::vector<double>& l2s, double bound) {
  CsvTable table;
  table.header = {"lambda1",    "lambda2", "optimal_cost", "suboptimal_cost",
                  "gap_pct",    "infeasible_links"};
  auto points = harness_detail::grid({bound}, l1s, l2s);
  auto rows = harness_detail::sweep(points, [&](const harness_detail::GridPoint& pt) {
    TradeoffRow row;  // reuse fields: cost = optimal, energy = suboptimal, kkt = gap
    row.lambda1 = pt.lambda1;
    row.lambda2 = pt.lambda2;
    Weights w{pt.lambda1, pt.lambda2, pt.bound};
    MacSolution opt = solve_mac_centralized(topo, w);
    MacSuboptimalResult sub = mac_suboptimal(topo, w);
    row.cost = opt.cost;
    row.energy = sub.cost;
    row.kkt = 100.0 * (sub.cost - opt.cost) / std::abs(opt.cost);
    row.iterations = sub.infeasible_count;
    return row;
  });
  for (const TradeoffRow& r : rows)
    table.add(r.lambda1, r.lambda2, r.cost, r.energy, r.kkt, r.iterations);
  return table;
}

// ---------------------------------------------------------------------------
// Simulation front end
// ---------------------------------------------------------------------------

struct SimulateSpec {
  std::string prob_source = "mindc";  // mindc | mac | file:<path>
  double lambda1 = 5.0, lambda2 = 0.1;
  double delay_bound = 100.0;          // for the mac source
  std::vector<double> rho;             // per-link load as a fraction of throughput
  std::int64_t horizon = 1000000;
  std::int64_t warmup = 10000;
  std::vector<std::uint64_t> seeds{1};
};

inline MacState resolve_probabilities(const Topology& topo, const SimulateSpec& spec) {
  if (spec.prob_source == "mindc") return min_dc(topo).witness;
  if (spec.prob_source == "mac")
    return solve_mac_centralized(topo, Weights{spec.lambda1, spec.lambda2, spec.delay_bound}).mac;
  if (spec.prob_source.rfind("file:", 0) == 0) {
    const std::string path = spec.prob_source.substr(5);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open probability file: " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("probability file: ") + e.what());
    }
    MacState mac = MacState::zeros(topo);
    for (const auto& entry : j.at("probs")) {
      const int k = topo.link_index(entry.at(0).get<int>(), entry.at(1).get<int>());
      mac.link_prob[static_cast<std::size_t>(k)] = entry.at(2).get<double>();
    }
    return mac;
  }
  throw ValidationError("unknown probability source '" + spec.prob_source + "'");
}

inline CsvTable run_simulate(const Topology& topo, const SimulateSpec& spec) {
  if (spec.rho.empty()) throw ValidationError("simulate: need at least one --rho value");
  MacState mac = resolve_probabilities(topo, spec);
  std::vector<double> x = success_probabilities(topo, mac);

  CsvTable table;
  table.header = {"seed", "rho",       "from",         "to",        "load",
                  "x_model", "x_sim",     "x_err_pct",    "delay_model", "delay_sim",
                  "delay_err_pct", "little_residual_pct"};
  for (double rho : spec.rho) {
    if (rho < 0.0 || rho >= 1.0)
      throw ValidationError("simulate: rho must be in [0,1), got " + format_sig9(rho));
    std::vector<double> loads(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) loads[k] = rho * x[k];
    for (std::uint64_t seed : spec.seeds) {
      SimConfig config{mac, loads, spec.horizon, spec.warmup, seed};
      SimStats stats = simulate(topo, config);
      double max_x_err = 0.0, max_delay_err = 0.0;
      for (int k = 0; k < topo.link_count(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        const double x_err = 100.0 * std::abs(stats.links[i].empirical_success - x[i]) /
                             std::max(1e-12, x[i]);
        double delay_model = std::numeric_limits<double>::quiet_NaN();
        double delay_err = std::numeric_limits<double>::quiet_NaN();
        if (loads[i] > 0.0) {
          delay_model = link_delay(x[i], loads[i]);
          delay_err = 100.0 * std::abs(stats.links[i].mean_delay - delay_model) / delay_model;
          max_delay_err = std::max(max_delay_err, delay_err);
        }
        max_x_err = std::max(max_x_err, x_err);
        table.add(seed, rho, topo.link(k).from, topo.link(k).to, loads[i], x[i],
                  stats.links[i].empirical_success, x_err, delay_model,
                  stats.links[i].mean_delay, delay_err, 100.0 * stats.links[i].little_residual);
      }
      table.add(seed, rho, -1, -1, std::numeric_limits<double>::quiet_NaN(),
                std::numeric_limits<double>::quiet_NaN(),
                std::numeric_limits<double>::quiet_NaN(), max_x_err,
                std::numeric_limits<double>::quiet_NaN(),
                std::numeric_limits<double>::quiet_NaN(), max_delay_err,
                std::numeric_limits<double>::quiet_NaN());
    }
  }
  return table;
}

}  // namespace alohanum

#endif  // ALOHANUM_HARNESS_HPP_
