#ifndef ALOHANUM_CROSSLAYER_OPT_HPP_
#define ALOHANUM_CROSSLAYER_OPT_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "alohanum/convex_core.hpp"
#include "alohanum/delay_model.hpp"
#include "alohanum/errors.hpp"
#include "alohanum/mac_opt.hpp"
#include "alohanum/net_model.hpp"

namespace alohanum {

/// Index structure shared by the centralized and distributed cross-layer
/// solvers. Only links that carry at least one session participate; links
/// with no traffic stay silent (transmitting on them spends energy and jams
/// neighbors without carrying utility).
struct XlayerLayout {
  std::vector<int> active_links;                   // topology link indices
  std::vector<int> slot_of_link;                   // link index -> slot or -1
  std::vector<std::vector<int>> sessions_on_link;  // slot -> session indices
  std::vector<std::vector<int>> route_slots;       // session -> slots along its route

  int active_count() const { return static_cast<int>(active_links.size()); }
};

inline XlayerLayout make_xlayer_layout(const Topology& topo, const std::vector<Session>& sessions) {
  if (sessions.empty()) throw ValidationError("cross-layer problem needs at least one session");
  XlayerLayout layout;
  layout.slot_of_link.assign(static_cast<std::size_t>(topo.link_count()), -1);
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    validate_session(topo, sessions[s]);
    for (const Link& l : sessions[s].route) {
      const int k = topo.link_index(l.from, l.to);
      if (layout.slot_of_link[static_cast<std::size_t>(k)] < 0) {
        layout.slot_of_link[static_cast<std::size_t>(k)] = layout.active_count();
        layout.active_links.push_back(k);
        layout.sessions_on_link.emplace_back();
      }
    }
  }
  layout.route_slots.resize(sessions.size());
  for (std::size_t s = 0; s < sessions.size(); ++s)
    for (const Link& l : sessions[s].route) {
      const int slot = layout.slot_of_link[static_cast<std::size_t>(topo.link_index(l.from, l.to))];
      layout.route_slots[s].push_back(slot);
      layout.sessions_on_link[static_cast<std::size_t>(slot)].push_back(static_cast<int>(s));
    }
  return layout;
}

struct SessionRates {
  std::vector<double> rate;  // y_s, packets/slot

  std::vector<double> link_loads(const Topology& topo, const XlayerLayout& layout) const {
    std::vector<double> loads(static_cast<std::size_t>(topo.link_count()), 0.0);
    for (int a = 0; a < layout.active_count(); ++a)
      for (int s : layout.sessions_on_link[static_cast<std::size_t>(a)])
        loads[static_cast<std::size_t>(layout.active_links[static_cast<std::size_t>(a)])] +=
            rate[static_cast<std::size_t>(s)];
    return loads;
  }
};

struct LinkDelayBudget {
  std::vector<double> budget;  // per active slot, slots
};

struct CrossDuals {
  Vec link_price;    // per active slot
  Vec budget_price;  // per session
};

inline double session_utility(const SessionRates& rates) { return rate_utility(rates.rate); }

inline double xlayer_cost(const Topology& topo, const Weights& w, const MacState& mac,
                          const SessionRates& rates) {
  return w.energy_weight * total_energy(topo, mac) - w.rate_weight * session_utility(rates);
}

// ---------------------------------------------------------------------------
// Centralized solve
// ---------------------------------------------------------------------------

struct XlayerSolution {
  XlayerLayout layout;
  MacState mac{{}};           // full link vector; silent links at 0
  SessionRates rates;
  LinkDelayBudget budgets;
  Vec link_duals;             // per active slot
  Vec session_duals;          // per session
  double cost = 0.0;
  double utility = 0.0;
  SolveReport report;
};

/// Joint congestion/contention optimum: minimize energy_weight * E -
/// rate_weight * sum log y_s over session log-rates, per-link delay budgets
/// and persistence probabilities, subject to each active link covering its
/// load within its budget and each route staying within the session bound.
inline XlayerSolution solve_xlayer_centralized(const Topology& topo,
                                               const std::vector<Session>& sessions,
                                               const Weights& w, BarrierOptions opts = {}) {
  if (w.energy_weight < 0.0 || w.rate_weight < 0.0 ||
      (w.energy_weight == 0.0 && w.rate_weight == 0.0))
    throw ValidationError("cross-layer weights: need non-negative weights, not both zero");
  XlayerLayout layout = make_xlayer_layout(topo, sessions);

  const int num_sessions = static_cast<int>(sessions.size());
  const int num_active = layout.active_count();
  const int z_off = 0, d_off = num_sessions, p_off = num_sessions + num_active;
  const int dim = num_sessions + 2 * num_active;

  // Per-node solver indices of modeled outgoing links, for node totals.
  std::vector<std::vector<int>> out_vars(static_cast<std::size_t>(topo.node_count()));
  for (int a = 0; a < num_active; ++a) {
    const Link& l = topo.link(layout.active_links[static_cast<std::size_t>(a)]);
    out_vars[static_cast<std::size_t>(l.from)].push_back(p_off + a);
  }
  auto node_total = [&out_vars](const Vec& v, int node) {
    double t = 0.0;
    for (int idx : out_vars[static_cast<std::size_t>(node)]) t += v[static_cast<std::size_t>(idx)];
    return t;
  };

  ConvexProgram prog;
  prog.dim = dim;
  {
    Vec c(static_cast<std::size_t>(dim), 0.0);
    for (int s = 0; s < num_sessions; ++s) c[static_cast<std::size_t>(z_off + s)] = -w.rate_weight;
    for (int a = 0; a < num_active; ++a) {
      const Link& l = topo.link(layout.active_links[static_cast<std::size_t>(a)]);
      c[static_cast<std::size_t>(p_off + a)] = w.energy_weight * topo.energy(l.from);
    }
    prog.objective = linear_function(std::move(c));
  }

  // Load-vs-throughput constraint of each active link.
  for (int a = 0; a < num_active; ++a) {
    const int k = layout.active_links[static_cast<std::size_t>(a)];
    const Link& l = topo.link(k);
    std::vector<int> factors{l.to};
    for (int nb : topo.neighbors(l.to))
      if (nb != l.from) factors.push_back(nb);
    const std::vector<int> users = layout.sessions_on_link[static_cast<std::size_t>(a)];
    const int d_idx = d_off + a, p_idx = p_off + a;

    auto log_x = [&topo, &node_total, p_idx, factors](const Vec& v) {
      double lx = std::log(v[static_cast<std::size_t>(p_idx)]);
      for (int node : factors) lx += std::log(1.0 - node_total(v, node));
      return lx;
    };

    SmoothFunction g;
    g.value = [users, d_idx, log_x](const Vec& v) {
      const double d = v[static_cast<std::size_t>(d_idx)];
      double load = 0.0;
      for (int s : users) load += std::exp(v[static_cast<std::size_t>(s)]);
      return std::log(1.0 / d + load * (1.0 - 0.5 / d)) - log_x(v);
    };
    g.gradient = [&topo, &out_vars, &node_total, users, d_idx, p_idx, factors](const Vec& v,
                                                                               Vec& grad) {
      grad.assign(v.size(), 0.0);
      const double d = v[static_cast<std::size_t>(d_idx)];
      const double cd = 1.0 - 0.5 / d;
      double load = 0.0;
      for (int s : users) load += std::exp(v[static_cast<std::size_t>(s)]);
      const double u = 1.0 / d + load * cd;
      for (int s : users) grad[static_cast<std::size_t>(s)] = std::exp(v[static_cast<std::size_t>(s)]) * cd / u;
      grad[static_cast<std::size_t>(d_idx)] = (0.5 * load - 1.0) / (d * d * u);
      grad[static_cast<std::size_t>(p_idx)] -= 1.0 / v[static_cast<std::size_t>(p_idx)];
      for (int node : factors) {
        const double inv = 1.0 / (1.0 - node_total(v, node));
        for (int idx : out_vars[static_cast<std::size_t>(node)]) grad[static_cast<std::size_t>(idx)] += inv;
      }
    };
    g.add_hessian = [&topo, &out_vars, &node_total, users, d_idx, p_idx, factors](
                        const Vec& v, double coeff, linalg::Matrix& h) {
      const double d = v[static_cast<std::size_t>(d_idx)];
      const double cd = 1.0 - 0.5 / d;
      double load = 0.0;
      for (int s : users) load += std::exp(v[static_cast<std::size_t>(s)]);
      const double u = 1.0 / d + load * cd;
      // log u = log(1/D + sum_s e^{z_s} (1 - 1/(2D))): assemble grad u and
      // hess u over (z_users..., D), then hess(log u) = Hu/u - gu guT / u^2.
      const double ud = (0.5 * load - 1.0) / (d * d);
      for (int s : users) {
        const double us = std::exp(v[static_cast<std::size_t>(s)]) * cd;
        for (int s2 : users) {
          const double us2 = std::exp(v[static_cast<std::size_t>(s2)]) * cd;
          double huv = -us * us2 / (u * u);
          if (s == s2) huv += us / u;
          h(s, s2) += coeff * huv;
        }
        const double usd = std::exp(v[static_cast<std::size_t>(s)]) * 0.5 / (d * d);  // d2u/dz dD
        const double cross = coeff * (usd / u - us * ud / (u * u));
        h(s, d_idx) += cross;
        h(d_idx, s) += cross;
      }
      const double udd = (2.0 - load) / (d * d * d);
      h(d_idx, d_idx) += coeff * (udd / u - ud * ud / (u * u));
      // -log x part.
      h(p_idx, p_idx) += coeff / (v[static_cast<std::size_t>(p_idx)] * v[static_cast<std::size_t>(p_idx)]);
      for (int node : factors) {
        const double inv = 1.0 / (1.0 - node_total(v, node));
        const double inv2 = coeff * inv * inv;
        for (int i1 : out_vars[static_cast<std::size_t>(node)])
          for (int i2 : out_vars[static_cast<std::size_t>(node)]) h(i1, i2) += inv2;
      }
    };
    prog.constraints.push_back(std::move(g));
  }

  // Session budget constraints: sum of route budgets within the bound.
  for (int s = 0; s < num_sessions; ++s) {
    Vec c(static_cast<std::size_t>(dim), 0.0);
    for (int slot : layout.route_slots[static_cast<std::size_t>(s)])
      c[static_cast<std::size_t>(d_off + slot)] += 1.0;
    prog.constraints.push_back(
        linear_function(std::move(c), -sessions[static_cast<std::size_t>(s)].delay_bound));
  }

  // Boxes: rates, budgets and probabilities.
  auto bound = [&](int idx, double sign, double offset) {
    Vec c(static_cast<std::size_t>(dim), 0.0);
    c[static_cast<std::size_t>(idx)] = sign;
    prog.constraints.push_back(linear_function(std::move(c), offset));
  };
  for (int s = 0; s < num_sessions; ++s) {
    bound(z_off + s, -1.0, std::log(kRateFloor));   // z >= log floor
    bound(z_off + s, 1.0, -std::log(kRateCap));     // z <= log cap
  }
  for (int a = 0; a < num_active; ++a) {
    bound(d_off + a, -1.0, 0.75);                   // D >= 0.75 (domain guard)
    bound(p_off + a, -1.0, detail::kProbFloor);     // p >= floor
  }
  for (int i = 0; i < topo.node_count(); ++i) {
    if (out_vars[static_cast<std::size_t>(i)].empty()) continue;
    Vec c(static_cast<std::size_t>(dim), 0.0);
    for (int idx : out_vars[static_cast<std::size_t>(i)]) c[static_cast<std::size_t>(idx)] = 1.0;
    prog.constraints.push_back(linear_function(std::move(c), -(1.0 - kInteriorEps)));
  }

  // Start: maxmin witness probabilities (silent links dropped), tiny rates,
  // budgets at the per-link floor plus a conservative share of route slack.
  MinDcResult feas = min_dc(topo);
  int tight_session = -1;
  Vec start(static_cast<std::size_t>(dim), 0.0);
  for (int s = 0; s < num_sessions; ++s)
    start[static_cast<std::size_t>(z_off + s)] = std::log(10.0 * kRateFloor);
  for (int a = 0; a < num_active; ++a)
    start[static_cast<std::size_t>(p_off + a)] = std::max(
        2.0 * detail::kProbFloor,
        0.999 * feas.witness.link_prob[static_cast<std::size_t>(layout.active_links[static_cast<std::size_t>(a)])]);
  {
    std::vector<double> x(static_cast<std::size_t>(num_active));
    for (int a = 0; a < num_active; ++a) {
      const int k = layout.active_links[static_cast<std::size_t>(a)];
      const Link& l = topo.link(k);
      double xv = start[static_cast<std::size_t>(p_off + a)] * (1.0 - node_total(start, l.to));
      for (int nb : topo.neighbors(l.to))
        if (nb != l.from) xv *= 1.0 - node_total(start, nb);
      x[static_cast<std::size_t>(a)] = xv;
    }
    Vec slack(sessions.size());
    int tightest = 0;
    for (int s = 0; s < num_sessions; ++s) {
      double need = 0.0;
      for (int slot : layout.route_slots[static_cast<std::size_t>(s)])
        need += 1.0 / x[static_cast<std::size_t>(slot)];
      slack[static_cast<std::size_t>(s)] =
          sessions[static_cast<std::size_t>(s)].delay_bound - need;
      if (slack[static_cast<std::size_t>(s)] < slack[static_cast<std::size_t>(tightest)]) tightest = s;
    }
    for (int a = 0; a < num_active; ++a) {
      double share = std::numeric_limits<double>::infinity();
      for (int s : layout.sessions_on_link[static_cast<std::size_t>(a)]) {
        const double route_len =
            static_cast<double>(layout.route_slots[static_cast<std::size_t>(s)].size());
        share = std::min(share, 0.5 * slack[static_cast<std::size_t>(s)] / route_len);
      }
      start[static_cast<std::size_t>(d_off + a)] = 1.0 / x[static_cast<std::size_t>(a)] + share;
    }
    if (slack[static_cast<std::size_t>(tightest)] <= 0.0) {
      // The smart start is outside the feasible set; leave phase-I a rough but
      // domain-valid start and translate a failure into the hardest session.
      for (int a = 0; a < num_active; ++a)
        start[static_cast<std::size_t>(d_off + a)] = std::max(1.0, 1.0 / x[static_cast<std::size_t>(a)]);
      tight_session = tightest;
    }
  }

  BarrierResult r;
  try {
    r = barrier_solve(prog, std::move(start), opts);
  } catch (const InfeasibleError&) {
    const auto t = static_cast<std::size_t>(std::max(tight_session, 0));
    throw InfeasibleError("solve_xlayer_centralized: no feasible point; tightest session " +
                          std::to_string(sessions[t].id) + " cannot fit its bound of " +
                          std::to_string(sessions[t].delay_bound) + " slots");
  }
  if (!r.report.converged)
    throw NumericError("solve_xlayer_centralized: kkt residual " +
                       std::to_string(r.report.kkt_residual) + " above tolerance");

  XlayerSolution out;
  out.layout = std::move(layout);
  out.mac = MacState::zeros(topo);
  for (int a = 0; a < num_active; ++a)
    out.mac.link_prob[static_cast<std::size_t>(out.layout.active_links[static_cast<std::size_t>(a)])] =
        r.x[static_cast<std::size_t>(p_off + a)];
  out.rates.rate.resize(sessions.size());
  for (int s = 0; s < num_sessions; ++s)
    out.rates.rate[static_cast<std::size_t>(s)] = std::exp(r.x[static_cast<std::size_t>(z_off + s)]);
  out.budgets.budget.resize(static_cast<std::size_t>(num_active));
  for (int a = 0; a < num_active; ++a)
    out.budgets.budget[static_cast<std::size_t>(a)] = r.x[static_cast<std::size_t>(d_off + a)];
  out.link_duals = Vec(r.duals.begin(), r.duals.begin() + num_active);
  out.session_duals = Vec(r.duals.begin() + num_active, r.duals.begin() + num_active + num_sessions);
  out.cost = xlayer_cost(topo, w, out.mac, out.rates);
  out.utility = session_utility(out.rates);
  out.report = std::move(r.report);
  return out;
}

// ---------------------------------------------------------------------------
// Distributed update rules
// ---------------------------------------------------------------------------

/// Closed-form minimizer of the per-link budget subproblem
/// min D*sum_v + price*(2 - sum_y)/(2D), projected above 1/x. With no budget
/// pressure (sum_v = 0) the subproblem has no interior minimum; the link
/// falls back to the smaller of its session budget shares. An optional cap
/// (the smallest session bound using the link) keeps transient budgets from
/// blowing past any scale the budget prices can react to.
inline double link_budget_update(double link_price, double session_price_sum, double load_sum,
                                 double success_prob, double fallback_share,
                                 double cap = std::numeric_limits<double>::infinity()) {
  const double floor = (1.0 + 1e-9) / success_prob;
  double d;
  if (session_price_sum <= 0.0) {
    d = std::max(floor, fallback_share);
  } else {
    const double num = link_price * (2.0 - load_sum);
    d = num <= 0.0 ? floor : std::max(floor, std::sqrt(num / (2.0 * session_price_sum)));
  }
  return std::min(d, cap);
}

/// Closed-form maximizer of the per-session rate subproblem
/// max rate_weight*log y - y*sum(price*(1 - 1/(2D))), clamped to (0, y_max].
/// A non-positive denominator means no route pressure: the rate saturates.
inline double session_rate_update(double rate_weight,
                                  const std::vector<std::pair<double, double>>& route_price_budget,
                                  double y_max) {
  double denom = 0.0;
  for (const auto& [price, budget] : route_price_budget) denom += price * (1.0 - 0.5 / budget);
  if (denom <= 0.0) return y_max;
  return std::clamp(rate_weight / denom, kRateFloor, y_max);
}

/// Secant-scaled step direction: the residual divided by a diagonal
/// curvature estimate from successive iterates. The magnitude of the secant
/// is what matters (dual residuals shrink as their prices grow, so the signed
/// secant is usually negative); a floor keeps the scaled step bounded when
/// the residual has barely moved. An undefined secant (no iterate movement,
/// non-finite or zero estimate) falls back to the plain gradient direction.
inline double secant_direction(double residual, double prev_residual, double iterate,
                               double prev_iterate, double curvature_floor = 1e-3) {
  const double delta = iterate - prev_iterate;
  if (delta == 0.0) return residual;
  const double curvature = std::abs((residual - prev_residual) / delta);
  if (!std::isfinite(curvature) || curvature == 0.0) return residual;
  return residual / std::max(curvature, curvature_floor);
}

/// Residual of an active link's load constraint (positive = violated).
inline double link_load_residual(double budget, double load_sum, double success_prob) {
  return (1.0 - 0.5 / budget) * load_sum + 1.0 / budget - success_prob;
}

/// Gradient ascent on both dual families with projection at zero.
inline CrossDuals xlayer_dual_update_gradient(const CrossDuals& duals, const Vec& link_residual,
                                              const Vec& budget_residual, double alpha,
                                              double beta) {
  CrossDuals next = duals;
  for (std::size_t a = 0; a < next.link_price.size(); ++a)
    next.link_price[a] = std::max(0.0, next.link_price[a] + alpha * link_residual[a]);
  for (std::size_t s = 0; s < next.budget_price.size(); ++s)
    next.budget_price[s] = std::max(0.0, next.budget_price[s] + beta * budget_residual[s]);
  return next;
}

/// Objective sensitivity to each persistence probability: the energy price
/// minus the throughput prices weighted by the analytic derivative of the
/// success probabilities. `link_price_full` is indexed like topology.links()
/// (zero on links carrying no constraint).
inline Vec prob_gradient(const Topology& topo, const Vec& link_price_full, const MacState& mac,
                         double energy_weight) {
  const int num_links = topo.link_count();
  Vec f(static_cast<std::size_t>(num_links), 0.0);
  std::vector<double> node_prob(static_cast<std::size_t>(topo.node_count()));
  for (int i = 0; i < topo.node_count(); ++i) node_prob[static_cast<std::size_t>(i)] = mac.node_prob(topo, i);

  for (int k = 0; k < num_links; ++k)
    f[static_cast<std::size_t>(k)] = energy_weight * topo.energy(topo.link(k).from);

  for (int st = 0; st < num_links; ++st) {
    const double price = link_price_full[static_cast<std::size_t>(st)];
    if (price == 0.0) continue;
    const Link& l = topo.link(st);
    // Product of idle factors: x_st / p_st, stable as p_st -> 0.
    double idle_product = 1.0 - node_prob[static_cast<std::size_t>(l.to)];
    std::vector<int> factors{l.to};
    for (int nb : topo.neighbors(l.to))
      if (nb != l.from) {
        idle_product *= 1.0 - node_prob[static_cast<std::size_t>(nb)];
        factors.push_back(nb);
      }
    // d x_st / d p_st = x_st / p_st.
    f[static_cast<std::size_t>(st)] -= price * idle_product;
    // d x_st / d p_ij = -x_st / (1 - P_i) whenever node i's idle factor
    // appears; the interior margin keeps the division bounded.
    const double x_st = mac.link_prob[static_cast<std::size_t>(st)] * idle_product;
    for (int node : factors) {
      const double sens = x_st / (1.0 - node_prob[static_cast<std::size_t>(node)]);
      for (int m : topo.out_links(node)) f[static_cast<std::size_t>(m)] += price * sens;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Distributed driver
// ---------------------------------------------------------------------------

enum class XlayerVariant { kGradient, kNewton };

struct XlayerTraceRow {
  int iter = 0;
  double utility = 0.0;
  double err_utility = std::numeric_limits<double>::quiet_NaN();
  double err_rate = std::numeric_limits<double>::quiet_NaN();
  double err_prob = std::numeric_limits<double>::quiet_NaN();
  double max_violation = 0.0;
};

struct XlayerDistOptions {
  bool divergence_watch = true;
  // Trust region for the secant-scaled variant; the plain gradient variant
  // takes its literal steps. Dual moves are also bounded relative to the
  // price itself so one noisy curvature estimate cannot erase a price.
  double max_dual_step = 2.0;
  double max_prob_step = 0.02;
  double rel_dual_step = 0.25;   // per-iteration dual move, fraction of 1+price
  double curvature_init = 1.0;   // neutral scale until real secants arrive

  int max_iters = 4000;
  double initial_prob = 0.1;
  double target_error = 0.01;     // on rate utility, relative to the reference
  int tracked_session = 0;
  int tracked_link = -1;          // defaults to the first active link
  bool rates_before_budgets = false;  // flip the inner closed-form order
  const XlayerSolution* reference = nullptr;
};

struct XlayerDistributedResult {
  MacState mac{{}};
  SessionRates rates;
  LinkDelayBudget budgets;
  CrossDuals duals;
  std::vector<XlayerTraceRow> trace;
  int iters_to_target = -1;
  double final_err_utility = std::numeric_limits<double>::quiet_NaN();
};

/// Bulk-synchronous rounds of the price-directed cross-layer scheme: links
/// re-solve their budgets, sessions their rates (both closed form), prices
/// step along the residuals (gradient or secant-scaled), and probabilities
/// descend the priced interference gradient.
inline XlayerDistributedResult run_xlayer_distributed(const Topology& topo,
                                                      const std::vector<Session>& sessions,
                                                      const Weights& w, XlayerVariant variant,
                                                      const StepSchedule& schedule,
                                                      const XlayerDistOptions& opts = {}) {
  schedule.validate();
  XlayerLayout layout = make_xlayer_layout(topo, sessions);
  const int num_active = layout.active_count();
  const int num_sessions = static_cast<int>(sessions.size());
  const int tracked_link =
      opts.tracked_link >= 0 ? opts.tracked_link : layout.active_links.front();

  XlayerDistributedResult out;
  out.mac = MacState::zeros(topo);
  for (int k : layout.active_links)
    out.mac.link_prob[static_cast<std::size_t>(k)] = opts.initial_prob;
  out.mac = project_probabilities(out.mac.link_prob, topo);
  out.rates.rate.assign(sessions.size(), 0.01);
  out.duals.link_price.assign(static_cast<std::size_t>(num_active), 0.0);
  out.duals.budget_price.assign(sessions.size(), 0.0);
  out.budgets.budget.resize(static_cast<std::size_t>(num_active));
  for (int a = 0; a < num_active; ++a) {
    double share = std::numeric_limits<double>::infinity();
    for (int s : layout.sessions_on_link[static_cast<std::size_t>(a)])
      share = std::min(share, sessions[static_cast<std::size_t>(s)].delay_bound /
                                  static_cast<double>(
                                      layout.route_slots[static_cast<std::size_t>(s)].size()));
    out.budgets.budget[static_cast<std::size_t>(a)] = share;
  }

  Vec prev_h, prev_g;
  Vec prev_mu, prev_v;
  // Decayed running maxima of the secant curvature magnitudes. Tracking the
  // recent maximum instead of the instantaneous secant keeps the scaled steps
  // conservative against estimation noise; the floor acts until real
  // curvature information exists.
  constexpr double kCurvFloor = 1e-3, kCurvDecay = 0.9;
  Vec curv_mu(static_cast<std::size_t>(num_active), opts.curvature_init);
  Vec curv_v(sessions.size(), opts.curvature_init);  // h, g, H, G scratch lives below
  const auto updated_curvature = [&](double resid, double prev_resid, double iter,
                                     double prev_iter, double decay, double& track) {
    track = std::max(kCurvFloor, decay * track);
    // The secant is only trustworthy on interior moves; a projection-clipped
    // iterate pairs a truncated denominator with a full numerator.
    const double delta = iter - prev_iter;
    if (delta != 0.0 && iter > 0.0 && prev_iter > 0.0) {
      const double secant = std::abs((resid - prev_resid) / delta);
      if (std::isfinite(secant)) track = std::max(track, secant);
    }
    return track;
  };

  detail::DivergenceWatch watch;
  for (int n = 0; n < opts.max_iters; ++n) {
    std::vector<double> x = success_probabilities(topo, out.mac);

    const auto budgets_from = [&](const SessionRates& rates) {
      LinkDelayBudget next;
      next.budget.resize(static_cast<std::size_t>(num_active));
      for (int a = 0; a < num_active; ++a) {
        const auto& users = layout.sessions_on_link[static_cast<std::size_t>(a)];
        double v_sum = 0.0, y_sum = 0.0;
        double share = std::numeric_limits<double>::infinity();
        double cap = std::numeric_limits<double>::infinity();
        for (int s : users) {
          v_sum += out.duals.budget_price[static_cast<std::size_t>(s)];
          y_sum += rates.rate[static_cast<std::size_t>(s)];
          const double bound = sessions[static_cast<std::size_t>(s)].delay_bound;
          share = std::min(share, bound / static_cast<double>(
                                              layout.route_slots[static_cast<std::size_t>(s)].size()));
          cap = std::min(cap, bound);
        }
        next.budget[static_cast<std::size_t>(a)] = link_budget_update(
            out.duals.link_price[static_cast<std::size_t>(a)], v_sum, y_sum,
            std::max(x[static_cast<std::size_t>(layout.active_links[static_cast<std::size_t>(a)])], kInteriorEps),
            share, cap);
      }
      return next;
    };
    const auto rates_from = [&](const LinkDelayBudget& budgets) {
      SessionRates next;
      next.rate.resize(sessions.size());
      for (int s = 0; s < num_sessions; ++s) {
        std::vector<std::pair<double, double>> route;
        for (int slot : layout.route_slots[static_cast<std::size_t>(s)])
          route.emplace_back(out.duals.link_price[static_cast<std::size_t>(slot)],
                             budgets.budget[static_cast<std::size_t>(slot)]);
        // Cap at the slot capacity only. Capping at the current route
        // throughput instead mutes the load residual exactly when a session
        // is being starved, and the prices then lose the race against the
        // probability dynamics.
        next.rate[static_cast<std::size_t>(s)] = session_rate_update(w.rate_weight, route, kRateCap);
      }
      return next;
    };

    if (opts.rates_before_budgets) {
      out.rates = rates_from(out.budgets);
      out.budgets = budgets_from(out.rates);
    } else {
      out.budgets = budgets_from(out.rates);
      out.rates = rates_from(out.budgets);
    }

    // Residuals at the fresh primal point.
    Vec h(static_cast<std::size_t>(num_active)), g(static_cast<std::size_t>(num_sessions));
    for (int a = 0; a < num_active; ++a) {
      double y_sum = 0.0;
      for (int s : layout.sessions_on_link[static_cast<std::size_t>(a)])
        y_sum += out.rates.rate[static_cast<std::size_t>(s)];
      h[static_cast<std::size_t>(a)] = link_load_residual(
          out.budgets.budget[static_cast<std::size_t>(a)], y_sum,
          x[static_cast<std::size_t>(layout.active_links[static_cast<std::size_t>(a)])]);
    }
    for (int s = 0; s < num_sessions; ++s) {
      double total = 0.0;
      for (int slot : layout.route_slots[static_cast<std::size_t>(s)])
        total += out.budgets.budget[static_cast<std::size_t>(slot)];
      g[static_cast<std::size_t>(s)] = total - sessions[static_cast<std::size_t>(s)].delay_bound;
    }

    // Dual steps: plain gradient or secant-scaled.
    const double alpha = schedule.link_dual_at(n), beta = schedule.session_dual_at(n);
    const bool scaled = variant == XlayerVariant::kNewton && !prev_h.empty();
    const auto dual_step = [&](double step, double price) {
      const double cap = std::min(opts.max_dual_step, opts.rel_dual_step * (1.0 + price));
      return std::clamp(step, -cap, cap);
    };
    CrossDuals next_duals = out.duals;
    for (int a = 0; a < num_active; ++a) {
      const auto i = static_cast<std::size_t>(a);
      double dir = h[i];
      if (scaled)
        dir = h[i] / updated_curvature(h[i], prev_h[i], out.duals.link_price[i], prev_mu[i],
                                       kCurvDecay, curv_mu[i]);
      next_duals.link_price[i] =
          std::max(0.0, out.duals.link_price[i] + dual_step(alpha * dir, out.duals.link_price[i]));
    }
    for (int s = 0; s < num_sessions; ++s) {
      const auto i = static_cast<std::size_t>(s);
      double dir = g[i];
      if (scaled)
        dir = g[i] / updated_curvature(g[i], prev_g[i], out.duals.budget_price[i], prev_v[i],
                                       1.0, curv_v[i]);  // budget subsystem is stiff: never forget
      next_duals.budget_price[i] = std::max(
          0.0, out.duals.budget_price[i] + dual_step(beta * dir, out.duals.budget_price[i]));
    }

    // Probability step along the priced interference gradient.
    Vec price_full(static_cast<std::size_t>(topo.link_count()), 0.0);
    for (int a = 0; a < num_active; ++a)
      price_full[static_cast<std::size_t>(layout.active_links[static_cast<std::size_t>(a)])] =
          next_duals.link_price[static_cast<std::size_t>(a)];
    Vec f = prob_gradient(topo, price_full, out.mac, w.energy_weight);

    // The success probabilities are multilinear in p, so the diagonal
    // curvature of the probability subproblem is structurally zero and its
    // secant only measures cross-coupling drift. The safeguard therefore
    // keeps the probability family on its plain gradient direction in both
    // variants.
    const double phi = schedule.prob_at(n);
    Vec raw = out.mac.link_prob;
    for (int a = 0; a < num_active; ++a) {
      const auto k = static_cast<std::size_t>(layout.active_links[static_cast<std::size_t>(a)]);
      const double step = std::clamp(phi * f[k], -opts.max_prob_step, opts.max_prob_step);
      raw[k] = out.mac.link_prob[k] - step;
    }

    prev_h = std::move(h);
    prev_g = std::move(g);
    prev_mu = out.duals.link_price;
    prev_v = out.duals.budget_price;

    out.duals = std::move(next_duals);
    out.mac = project_probabilities(raw, topo);

    XlayerTraceRow row;
    row.iter = n + 1;
    row.utility = session_utility(out.rates);
    for (std::size_t a = 0; a < prev_h.size(); ++a)
      row.max_violation = std::max(row.max_violation, prev_h[a]);
    for (std::size_t s = 0; s < prev_g.size(); ++s)
      row.max_violation = std::max(row.max_violation, prev_g[s]);
    if (opts.reference) {
      row.err_utility =
          std::abs(row.utility - opts.reference->utility) / std::abs(opts.reference->utility);
      const auto ts = static_cast<std::size_t>(opts.tracked_session);
      row.err_rate = std::abs(out.rates.rate[ts] - opts.reference->rates.rate[ts]) /
                     std::abs(opts.reference->rates.rate[ts]);
      const auto tk = static_cast<std::size_t>(tracked_link);
      row.err_prob = std::abs(out.mac.link_prob[tk] - opts.reference->mac.link_prob[tk]) /
                     std::abs(opts.reference->mac.link_prob[tk]);
      if (out.iters_to_target < 0 && row.err_utility < opts.target_error)
        out.iters_to_target = row.iter;
      out.final_err_utility = row.err_utility;
    }
    out.trace.push_back(row);

    if (!std::isfinite(row.utility) || linalg::norm_inf(out.duals.link_price) > 1e9 ||
        linalg::norm_inf(out.duals.budget_price) > 1e9)
      throw DivergenceError("run_xlayer_distributed: non-finite or exploding state at iteration " +
                            std::to_string(n + 1) + "; reduce the step sizes");
    if (opts.divergence_watch && watch.update(row.max_violation))
      throw DivergenceError("run_xlayer_distributed: constraint violation stuck above its best level at iteration " + std::to_string(n + 1) +
                            "; reduce the step sizes");
  }
  return out;
}

}  // namespace alohanum

#endif  // ALOHANUM_CROSSLAYER_OPT_HPP_
