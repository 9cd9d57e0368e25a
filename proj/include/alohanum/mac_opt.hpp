#ifndef ALOHANUM_MAC_OPT_HPP_
#define ALOHANUM_MAC_OPT_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "alohanum/convex_core.hpp"
#include "alohanum/delay_model.hpp"
#include "alohanum/errors.hpp"
#include "alohanum/net_model.hpp"

namespace alohanum {

/// Scalarization weights for the energy / rate-utility tradeoff plus the
/// per-link delay bound in slots.
struct Weights {
  double energy_weight = 0.0;  // scales total energy in the cost
  double rate_weight = 0.0;    // scales the log-rate utility
  double delay_bound = 0.0;    // per-link bound, slots

  void validate() const {
    if (energy_weight < 0.0 || rate_weight < 0.0)
      throw ValidationError("weights: energy and rate weights must be >= 0");
    if (energy_weight == 0.0 && rate_weight == 0.0)
      throw ValidationError("weights: energy and rate weights cannot both be 0");
    if (!(delay_bound > 1.0))
      throw ValidationError("weights: delay bound must exceed 1 slot");
  }
};

struct MacRates {
  std::vector<double> rate;  // packets/slot, indexed like topology.links()
};

/// Average transmit energy spent per slot: sum of e_i * P_i.
inline double total_energy(const Topology& topo, const MacState& mac) {
  double total = 0.0;
  for (int i = 0; i < topo.node_count(); ++i) total += topo.energy(i) * mac.node_prob(topo, i);
  return total;
}

/// Proportional-fair utility: sum of log link rates.
inline double rate_utility(const std::vector<double>& rates) {
  double total = 0.0;
  for (double r : rates) {
    if (!(r > 0.0)) throw ValidationError("rate_utility: rates must be > 0");
    total += std::log(r);
  }
  return total;
}

inline double mac_cost(const Topology& topo, const Weights& w, const MacState& mac,
                       const MacRates& rates) {
  return w.energy_weight * total_energy(topo, mac) - w.rate_weight * rate_utility(rates.rate);
}

// ---------------------------------------------------------------------------
// Shared pieces for assembling the convex programs
// ---------------------------------------------------------------------------

namespace detail {

// Nodes whose idle probability multiplies into link k's success probability:
// the receiver plus every neighbor of the receiver other than the sender.
inline std::vector<int> interference_nodes(const Topology& topo, int link) {
  const Link& l = topo.link(link);
  std::vector<int> nodes{l.to};
  for (int nb : topo.neighbors(l.to))
    if (nb != l.from) nodes.push_back(nb);
  return nodes;
}

inline double node_prob_at(const Topology& topo, const Vec& v, int node) {
  double total = 0.0;
  for (int k : topo.out_links(node)) total += v[static_cast<std::size_t>(k)];
  return total;
}

// log x_k(p) evaluated on the p-prefix of the solver vector; NaN outside the
// domain, which the barrier line search treats as infeasible.
inline double log_success(const Topology& topo, const Vec& v, int link,
                          const std::vector<int>& factors) {
  double lx = std::log(v[static_cast<std::size_t>(link)]);
  for (int node : factors) lx += std::log(1.0 - node_prob_at(topo, v, node));
  return lx;
}

inline void add_neg_log_success_gradient(const Topology& topo, const Vec& v, int link,
                                         const std::vector<int>& factors, Vec& grad) {
  grad[static_cast<std::size_t>(link)] -= 1.0 / v[static_cast<std::size_t>(link)];
  for (int node : factors) {
    const double inv = 1.0 / (1.0 - node_prob_at(topo, v, node));
    for (int m : topo.out_links(node)) grad[static_cast<std::size_t>(m)] += inv;
  }
}

inline void add_neg_log_success_hessian(const Topology& topo, const Vec& v, int link,
                                        const std::vector<int>& factors, double coeff,
                                        linalg::Matrix& hess) {
  hess(link, link) += coeff / (v[static_cast<std::size_t>(link)] * v[static_cast<std::size_t>(link)]);
  for (int node : factors) {
    const double inv = 1.0 / (1.0 - node_prob_at(topo, v, node));
    const double inv2 = coeff * inv * inv;
    for (int m : topo.out_links(node))
      for (int m2 : topo.out_links(node)) hess(m, m2) += inv2;
  }
}

// Box constraints common to problems whose first L variables are the link
// probabilities: p_k >= floor and node sums at most 1 - eps.
inline void append_probability_box(const Topology& topo, int dim, double floor,
                                   std::vector<SmoothFunction>& constraints) {
  for (int k = 0; k < topo.link_count(); ++k) {
    Vec c(static_cast<std::size_t>(dim), 0.0);
    c[static_cast<std::size_t>(k)] = -1.0;
    constraints.push_back(linear_function(std::move(c), floor));  // floor - p_k <= 0
  }
  for (int i = 0; i < topo.node_count(); ++i) {
    Vec c(static_cast<std::size_t>(dim), 0.0);
    for (int k : topo.out_links(i)) c[static_cast<std::size_t>(k)] = 1.0;
    constraints.push_back(linear_function(std::move(c), -(1.0 - kInteriorEps)));
  }
}

inline constexpr double kProbFloor = 1e-9;

// Interior starting probabilities: half of each node's budget split evenly.
inline Vec interior_probabilities(const Topology& topo) {
  Vec p(static_cast<std::size_t>(topo.link_count()), 0.0);
  for (int i = 0; i < topo.node_count(); ++i) {
    const auto& out = topo.out_links(i);
    for (int k : out) p[static_cast<std::size_t>(k)] = 0.5 / static_cast<double>(out.size());
  }
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Feasibility threshold: the smallest usable link delay bound
// ---------------------------------------------------------------------------

struct MinDcResult {
  double min_dc = 0.0;       // 1 / (maxmin link success probability)
  MacState witness{{}};      // probabilities achieving the maxmin
  SolveReport report;
};

/// Maximizes the worst-link success probability over the persistence
/// probabilities (epigraph form, interior-point solve). The reciprocal of the
/// optimum is the smallest delay bound any link can meet at vanishing load.
inline MinDcResult min_dc(const Topology& topo, BarrierOptions opts = {}) {
  const int num_links = topo.link_count();
  const int dim = num_links + 1;  // p..., t = lower bound on log x

  ConvexProgram prog;
  prog.dim = dim;
  {
    Vec c(static_cast<std::size_t>(dim), 0.0);
    c.back() = -1.0;
    prog.objective = linear_function(std::move(c));  // maximize t
  }
  for (int k = 0; k < num_links; ++k) {
    auto factors = detail::interference_nodes(topo, k);
    SmoothFunction g;
    g.value = [&topo, k, factors](const Vec& v) {
      return v.back() - detail::log_success(topo, v, k, factors);
    };
    g.gradient = [&topo, k, factors](const Vec& v, Vec& grad) {
      grad.assign(v.size(), 0.0);
      grad.back() = 1.0;
      detail::add_neg_log_success_gradient(topo, v, k, factors, grad);
    };
    g.add_hessian = [&topo, k, factors](const Vec& v, double coeff, linalg::Matrix& h) {
      detail::add_neg_log_success_hessian(topo, v, k, factors, coeff, h);
    };
    prog.constraints.push_back(std::move(g));
  }
  detail::append_probability_box(topo, dim, detail::kProbFloor, prog.constraints);

  Vec start = detail::interior_probabilities(topo);
  double min_log_x = 0.0;
  for (int k = 0; k < num_links; ++k)
    min_log_x = std::min(min_log_x,
                         detail::log_success(topo, start, k, detail::interference_nodes(topo, k)));
  start.push_back(min_log_x - 1.0);

  BarrierResult r = barrier_solve(prog, std::move(start), opts);
  if (!r.report.converged)
    throw NumericError("min_dc: interior solve did not converge, kkt residual " +
                       std::to_string(r.report.kkt_residual));
  MinDcResult out;
  out.min_dc = std::exp(-r.x.back());
  out.witness = MacState{Vec(r.x.begin(), r.x.end() - 1)};
  out.report = std::move(r.report);
  return out;
}

// ---------------------------------------------------------------------------
// Centralized solve of the delay-constrained MAC problem
// ---------------------------------------------------------------------------

struct MacSolution {
  MacState mac{{}};
  MacRates rates;
  Vec link_duals;  // multipliers of the per-link delay constraints
  double cost = 0.0;
  SolveReport report;
};

/// Minimizes energy_weight * E - rate_weight * U_r over probabilities and
/// log-rates subject to each link's delay staying within the bound. Returns
/// a KKT point of the convex transformed program.
inline MacSolution solve_mac_centralized(const Topology& topo, const Weights& w,
                                         BarrierOptions opts = {}) {
  w.validate();
  MinDcResult feas = min_dc(topo);
  if (w.delay_bound <= feas.min_dc * (1.0 + 1e-9))
    throw InfeasibleError("solve_mac_centralized: delay bound " + std::to_string(w.delay_bound) +
                          " is not above the network minimum " + std::to_string(feas.min_dc));

  const int num_links = topo.link_count();
  const int dim = 2 * num_links;  // p..., z... (z = log link rate)
  const double inv_dc = 1.0 / w.delay_bound;
  const double rate_coeff = 1.0 - 0.5 * inv_dc;

  ConvexProgram prog;
  prog.dim = dim;
  {
    Vec c(static_cast<std::size_t>(dim), 0.0);
    for (int k = 0; k < num_links; ++k) {
      c[static_cast<std::size_t>(k)] = w.energy_weight * topo.energy(topo.link(k).from);
      c[static_cast<std::size_t>(num_links + k)] = -w.rate_weight;
    }
    prog.objective = linear_function(std::move(c));
  }
  for (int k = 0; k < num_links; ++k) {
    auto factors = detail::interference_nodes(topo, k);
    const int zi = num_links + k;
    SmoothFunction g;
    g.value = [&topo, k, zi, factors, inv_dc, rate_coeff](const Vec& v) {
      return std::log(inv_dc + rate_coeff * std::exp(v[static_cast<std::size_t>(zi)])) -
             detail::log_success(topo, v, k, factors);
    };
    g.gradient = [&topo, k, zi, factors, inv_dc, rate_coeff](const Vec& v, Vec& grad) {
      grad.assign(v.size(), 0.0);
      const double cez = rate_coeff * std::exp(v[static_cast<std::size_t>(zi)]);
      grad[static_cast<std::size_t>(zi)] = cez / (inv_dc + cez);
      detail::add_neg_log_success_gradient(topo, v, k, factors, grad);
    };
    g.add_hessian = [&topo, k, zi, factors, inv_dc, rate_coeff](const Vec& v, double coeff,
                                                                linalg::Matrix& h) {
      const double cez = rate_coeff * std::exp(v[static_cast<std::size_t>(zi)]);
      const double wz = cez / (inv_dc + cez);
      h(zi, zi) += coeff * wz * (1.0 - wz);
      detail::add_neg_log_success_hessian(topo, v, k, factors, coeff, h);
    };
    prog.constraints.push_back(std::move(g));
  }
  detail::append_probability_box(topo, dim, detail::kProbFloor, prog.constraints);
  for (int k = 0; k < num_links; ++k) {  // z box keeps log rates bounded
    Vec lo(static_cast<std::size_t>(dim), 0.0), hi(static_cast<std::size_t>(dim), 0.0);
    lo[static_cast<std::size_t>(num_links + k)] = -1.0;
    hi[static_cast<std::size_t>(num_links + k)] = 1.0;
    prog.constraints.push_back(linear_function(std::move(lo), std::log(kRateFloor)));
    prog.constraints.push_back(linear_function(std::move(hi), -std::log(kRateCap)));
  }

  // Start from a damped maxmin witness with tiny rates; if the margin is too
  // thin the barrier falls back to its phase-I step.
  Vec start(static_cast<std::size_t>(dim), std::log(10.0 * kRateFloor));
  for (int k = 0; k < num_links; ++k)
    start[static_cast<std::size_t>(k)] =
        std::max(detail::kProbFloor * 2.0, 0.999 * feas.witness.link_prob[static_cast<std::size_t>(k)]);

  BarrierResult r = barrier_solve(prog, std::move(start), opts);
  if (!r.report.converged)
    throw NumericError("solve_mac_centralized: kkt residual " +
                       std::to_string(r.report.kkt_residual) + " above tolerance");

  MacSolution out;
  out.mac = MacState{Vec(r.x.begin(), r.x.begin() + num_links)};
  out.rates.rate.resize(static_cast<std::size_t>(num_links));
  for (int k = 0; k < num_links; ++k)
    out.rates.rate[static_cast<std::size_t>(k)] = std::exp(r.x[static_cast<std::size_t>(num_links + k)]);
  out.link_duals = Vec(r.duals.begin(), r.duals.begin() + num_links);
  out.cost = mac_cost(topo, w, out.mac, out.rates);
  out.report = std::move(r.report);
  return out;
}

// ---------------------------------------------------------------------------
// Distributed optimization: per-link / per-node update rules
// ---------------------------------------------------------------------------

/// Stationary link rate given the link's delay price. Below the rate weight
/// the stationarity condition has no positive solution and the rate saturates
/// at the cap; a zero rate weight pins it at the floor.
inline double mac_rate_update(double link_dual, const Weights& w) {
  if (w.rate_weight <= 0.0) return kRateFloor;
  if (link_dual <= w.rate_weight) return kRateCap;
  const double r = w.rate_weight / ((link_dual - w.rate_weight) * (w.delay_bound - 0.5));
  return std::clamp(r, kRateFloor, kRateCap);
}

/// One-hop information a node needs for its probability update: the prices of
/// its own outgoing links plus the summed prices of links received at itself
/// or at its neighbors by other senders (the links its transmissions jam).
struct MacNodeView {
  double interference_dual_sum = 0.0;            // over links this node can disturb
  std::vector<std::pair<int, double>> own_duals;  // (link index, price) per outgoing link
};

inline MacNodeView mac_node_view(const Topology& topo, int node, const Vec& link_duals) {
  MacNodeView view;
  for (int k : topo.in_links(node)) view.interference_dual_sum += link_duals[static_cast<std::size_t>(k)];
  for (int nb : topo.neighbors(node))
    for (int k : topo.in_links(nb))
      if (topo.link(k).from != node)
        view.interference_dual_sum += link_duals[static_cast<std::size_t>(k)];
  for (int k : topo.out_links(node)) view.own_duals.emplace_back(k, link_duals[static_cast<std::size_t>(k)]);
  return view;
}

struct MacProbUpdate {
  std::vector<std::pair<int, double>> prob;  // (link index, new probability)
  double node_prob = 0.0;
  bool clamped = false;  // root fell outside [0, 1 - eps)
};

/// Per-node minimizer of the partial Lagrangian: the node total solves
/// a P^2 - b P + c = 0 with a = energy term, c = sum of own link prices, and
/// each link gets the share proportional to its own price. The smaller root
/// is the economically meaningful one; P = 1 always solves the single-link
/// case and is never selected.
inline MacProbUpdate mac_prob_update(const Topology& topo, int node, const MacNodeView& view,
                                     const Weights& w, double eps = kInteriorEps) {
  const double a = w.energy_weight * topo.energy(node);
  double own_sum = 0.0;
  for (const auto& [k, mu] : view.own_duals) own_sum += mu;
  const double b = view.interference_dual_sum + own_sum + a;
  const double c = own_sum;

  MacProbUpdate out;
  double root;
  if (a > 1e-300) {
    const double disc = std::max(0.0, b * b - 4.0 * a * c);
    root = (b - std::sqrt(disc)) / (2.0 * a);
  } else if (b > 0.0) {
    root = c / b;
  } else {
    root = 0.0;  // no prices anywhere: nothing to transmit for
  }
  const double limit = 1.0 - eps;
  out.clamped = !(root >= 0.0 && root <= limit);
  out.node_prob = std::clamp(root, 0.0, limit);

  for (const auto& [k, mu] : view.own_duals)
    out.prob.emplace_back(k, c > 0.0 ? out.node_prob * mu / c : 0.0);
  return out;
}

/// Price ascent on the per-link delay constraint in log form.
inline Vec mac_dual_update(const Vec& duals, const std::vector<double>& rates,
                           const std::vector<double>& success, const Weights& w, double step) {
  const double inv_dc = 1.0 / w.delay_bound;
  const double rate_coeff = 1.0 - 0.5 * inv_dc;
  Vec next(duals.size());
  for (std::size_t k = 0; k < duals.size(); ++k) {
    const double violation = std::log(rate_coeff * rates[k] + inv_dc) - std::log(success[k]);
    next[k] = std::max(0.0, duals[k] + step * violation);
  }
  return next;
}

struct MacTraceRow {
  int iter = 0;
  double cost = 0.0;
  double err_cost = std::numeric_limits<double>::quiet_NaN();
  double err_prob = std::numeric_limits<double>::quiet_NaN();
  double err_rate = std::numeric_limits<double>::quiet_NaN();
  double max_violation = 0.0;
};

struct MacDistOptions {
  bool divergence_watch = true;
  int max_iters = 4000;
  double initial_prob = 0.1;
  double initial_dual = 1.0;
  double target_error = 0.01;          // on the cost, relative to the reference
  int tracked_link = 0;                // link whose p/r errors are recorded
  const MacSolution* reference = nullptr;
};

struct MacDistributedResult {
  MacState mac{{}};
  MacRates rates;
  Vec duals;
  std::vector<MacTraceRow> trace;
  int iters_to_target = -1;
  double final_err_cost = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

class DivergenceWatch {
 public:
  // Healthy runs pull the constraint violation down toward zero, possibly
  // with excursions; stuck or oscillating runs hold it well above the best
  // level they ever reached. Two views of the same idea: a pointwise streak
  // (catches violations pinned high) and a moving-average streak (catches
  // oscillations that keep crossing zero).
  bool update(double violation) {
    const double v = std::max(violation, 0.0);
    best_ = std::min(best_, v);
    if (v > std::max(4.0 * best_, 0.25)) {
      if (++strikes_ >= 200) return true;
    } else {
      strikes_ = 0;
    }
    window_.push_back(v);
    window_sum_ += v;
    if (window_.size() > 100) {
      window_sum_ -= window_[window_.size() - 101];
      const double avg = window_sum_ / 100.0;
      best_avg_ = std::min(best_avg_, avg);
      if (avg > std::max(6.0 * best_avg_, 0.25)) {
        if (++avg_strikes_ >= 200) return true;
      } else {
        avg_strikes_ = 0;
      }
    }
    return false;
  }

 private:
  double best_ = std::numeric_limits<double>::infinity();
  double best_avg_ = std::numeric_limits<double>::infinity();
  std::vector<double> window_;
  double window_sum_ = 0.0;
  int strikes_ = 0;
  int avg_strikes_ = 0;
};

}  // namespace detail

/// Bulk-synchronous price-directed iteration: every round each link refreshes
/// its rate from its own price, every node re-solves its probability from
/// one-hop prices, and prices move along the constraint violation measured at
/// the previous round's state.
inline MacDistributedResult run_mac_distributed(const Topology& topo, const Weights& w,
                                                const StepSchedule& schedule,
                                                const MacDistOptions& opts = {}) {
  w.validate();
  schedule.validate();
  const int num_links = topo.link_count();
  const double inv_dc = 1.0 / w.delay_bound;
  const double rate_coeff = 1.0 - 0.5 * inv_dc;

  MacDistributedResult out;
  out.mac = MacState::uniform(topo, opts.initial_prob);
  out.duals.assign(static_cast<std::size_t>(num_links), opts.initial_dual);
  out.rates.rate.assign(static_cast<std::size_t>(num_links), 0.0);
  for (int k = 0; k < num_links; ++k)
    out.rates.rate[static_cast<std::size_t>(k)] = mac_rate_update(out.duals[static_cast<std::size_t>(k)], w);

  detail::DivergenceWatch watch;
  for (int n = 0; n < opts.max_iters; ++n) {
    // New primal point from the previous round's prices.
    MacRates next_rates;
    next_rates.rate.resize(static_cast<std::size_t>(num_links));
    for (int k = 0; k < num_links; ++k)
      next_rates.rate[static_cast<std::size_t>(k)] = mac_rate_update(out.duals[static_cast<std::size_t>(k)], w);
    MacState next_mac = out.mac;
    for (int i = 0; i < topo.node_count(); ++i) {
      MacNodeView view = mac_node_view(topo, i, out.duals);
      MacProbUpdate upd = mac_prob_update(topo, i, view, w);
      for (const auto& [k, p] : upd.prob) next_mac.link_prob[static_cast<std::size_t>(k)] = p;
    }

    // Price step driven by the state the prices were computed against.
    std::vector<double> success = success_probabilities(topo, out.mac);
    for (double& x : success) x = std::max(x, 1e-300);
    Vec next_duals =
        mac_dual_update(out.duals, out.rates.rate, success, w, schedule.link_dual_at(n));

    out.mac = std::move(next_mac);
    out.rates = std::move(next_rates);
    out.duals = std::move(next_duals);

    MacTraceRow row;
    row.iter = n + 1;
    row.cost = mac_cost(topo, w, out.mac, out.rates);
    std::vector<double> x_now = success_probabilities(topo, out.mac);
    for (int k = 0; k < num_links; ++k) {
      const double v = std::log(rate_coeff * out.rates.rate[static_cast<std::size_t>(k)] + inv_dc) -
                       std::log(std::max(x_now[static_cast<std::size_t>(k)], 1e-300));
      row.max_violation = std::max(row.max_violation, v);
    }
    if (opts.reference) {
      const auto t = static_cast<std::size_t>(opts.tracked_link);
      row.err_cost = std::abs(row.cost - opts.reference->cost) / std::abs(opts.reference->cost);
      row.err_prob = std::abs(out.mac.link_prob[t] - opts.reference->mac.link_prob[t]) /
                     std::abs(opts.reference->mac.link_prob[t]);
      row.err_rate = std::abs(out.rates.rate[t] - opts.reference->rates.rate[t]) /
                     std::abs(opts.reference->rates.rate[t]);
      if (out.iters_to_target < 0 && row.err_cost < opts.target_error)
        out.iters_to_target = row.iter;
      out.final_err_cost = row.err_cost;
    }
    out.trace.push_back(row);

    if (!std::isfinite(row.cost) || linalg::norm_inf(out.duals) > 1e9)
      throw DivergenceError("run_mac_distributed: iteration " + std::to_string(n + 1) +
                            " produced a non-finite or exploding state; reduce the step size");
    if (opts.divergence_watch && watch.update(row.max_violation))
      throw DivergenceError("run_mac_distributed: constraint violation stuck above its best level at iteration " + std::to_string(n + 1) + "; reduce the step size");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Non-iterative suboptimal rule
// ---------------------------------------------------------------------------

struct MacSuboptimalResult {
  MacState mac{{}};
  MacRates rates;
  std::vector<bool> feasible;  // per link: delay bound attainable at its throughput
  int infeasible_count = 0;
  double cost = 0.0;
  SolveReport report;
};

/// Two-step rule: optimize the unconstrained tradeoff (where the optimal rate
/// equals the link throughput), then back the rates off to sit exactly on the
/// delay bound. Links whose achieved throughput cannot meet the bound at any
/// positive rate are flagged instead of failed.
inline MacSuboptimalResult mac_suboptimal(const Topology& topo, const Weights& w,
                                          BarrierOptions opts = {}) {
  w.validate();
  const int num_links = topo.link_count();

  // Stage 1: min energy_weight*E - rate_weight*sum log x(p) over probabilities.
  ConvexProgram prog;
  prog.dim = num_links;
  std::vector<std::vector<int>> factor_sets(static_cast<std::size_t>(num_links));
  for (int k = 0; k < num_links; ++k)
    factor_sets[static_cast<std::size_t>(k)] = detail::interference_nodes(topo, k);
  prog.objective.value = [&topo, &factor_sets, w](const Vec& v) {
    double obj = 0.0;
    for (int k = 0; k < topo.link_count(); ++k) {
      obj += w.energy_weight * topo.energy(topo.link(k).from) * v[static_cast<std::size_t>(k)];
      obj -= w.rate_weight * detail::log_success(topo, v, k, factor_sets[static_cast<std::size_t>(k)]);
    }
    return obj;
  };
  prog.objective.gradient = [&topo, &factor_sets, w](const Vec& v, Vec& grad) {
    grad.assign(v.size(), 0.0);
    Vec scratch(v.size(), 0.0);
    for (int k = 0; k < topo.link_count(); ++k) {
      grad[static_cast<std::size_t>(k)] += w.energy_weight * topo.energy(topo.link(k).from);
      detail::add_neg_log_success_gradient(topo, v, k, factor_sets[static_cast<std::size_t>(k)], scratch);
    }
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += w.rate_weight * scratch[i];
  };
  prog.objective.add_hessian = [&topo, &factor_sets, w](const Vec& v, double coeff,
                                                        linalg::Matrix& h) {
    for (int k = 0; k < topo.link_count(); ++k)
      detail::add_neg_log_success_hessian(topo, v, k, factor_sets[static_cast<std::size_t>(k)],
                                          coeff * w.rate_weight, h);
  };
  detail::append_probability_box(topo, num_links, detail::kProbFloor, prog.constraints);

  BarrierResult r = barrier_solve(prog, detail::interior_probabilities(topo), opts);

  MacSuboptimalResult out;
  out.mac = MacState{r.x};
  out.report = std::move(r.report);
  out.rates.rate.resize(static_cast<std::size_t>(num_links));
  out.feasible.assign(static_cast<std::size_t>(num_links), true);

  // Stage 2: rates sitting exactly on the delay bound at the achieved
  // throughput: r = (Dc*x - 1) / (Dc - 1/2).
  std::vector<double> x = success_probabilities(topo, out.mac);
  for (int k = 0; k < num_links; ++k) {
    const double raw = (w.delay_bound * x[static_cast<std::size_t>(k)] - 1.0) / (w.delay_bound - 0.5);
    if (raw <= 0.0) {
      out.feasible[static_cast<std::size_t>(k)] = false;
      out.infeasible_count++;
      out.rates.rate[static_cast<std::size_t>(k)] = kRateFloor;
    } else {
      out.rates.rate[static_cast<std::size_t>(k)] = std::max(raw, kRateFloor);
    }
  }
  out.cost = mac_cost(topo, w, out.mac, out.rates);
  return out;
}

/// Stage-2 rate rule in isolation (used by tests and the comparison command).
inline double suboptimal_rate(double success_prob, double delay_bound) {
  return (delay_bound * success_prob - 1.0) / (delay_bound - 0.5);
}

}  // namespace alohanum

#endif  // ALOHANUM_MAC_OPT_HPP_
