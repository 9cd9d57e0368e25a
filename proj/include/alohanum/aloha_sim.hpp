#ifndef ALOHANUM_ALOHA_SIM_HPP_
#define ALOHANUM_ALOHA_SIM_HPP_

#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "alohanum/delay_model.hpp"
#include "alohanum/errors.hpp"
#include "alohanum/net_model.hpp"

namespace alohanum {

namespace simdetail {

// mt19937_64 is fully specified by the standard; the distributions are not,
// so the samplers are written out to keep runs bit-identical everywhere.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int poisson(std::mt19937_64& rng, double mean) {
  if (mean <= 0.0) return 0;
  const double limit = std::exp(-mean);
  int count = 0;
  double product = uniform01(rng);
  while (product > limit) {
    ++count;
    product *= uniform01(rng);
  }
  return count;
}

struct DelayAccumulator {
  std::vector<double> samples;

  void add(double d) { samples.push_back(d); }

  double mean() const {
    if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (double s : samples) total += s;
    return total / static_cast<double>(samples.size());
  }

  // Batch-means standard error; delay samples of one queue are correlated.
  double stderror(int batches = 20) const {
    const auto n = samples.size();
    if (n < static_cast<std::size_t>(4 * batches)) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t per = n / static_cast<std::size_t>(batches);
    std::vector<double> means;
    for (int b = 0; b < batches; ++b) {
      double total = 0.0;
      for (std::size_t i = 0; i < per; ++i) total += samples[static_cast<std::size_t>(b) * per + i];
      means.push_back(total / static_cast<double>(per));
    }
    const double grand = [&] {
      double t = 0.0;
      for (double m : means) t += m;
      return t / static_cast<double>(batches);
    }();
    double var = 0.0;
    for (double m : means) var += (m - grand) * (m - grand);
    var /= static_cast<double>(batches - 1);
    return std::sqrt(var / static_cast<double>(batches));
  }
};

}  // namespace simdetail

struct SimConfig {
  MacState mac{{}};
  std::vector<double> link_load;  // exogenous packets/slot per link
  std::int64_t horizon = 1000000;
  std::int64_t warmup = 10000;
  std::uint64_t seed = 1;
};

struct LinkSimStats {
  std::int64_t attempts = 0;    // slots the sender picked this link (incl. dummies)
  std::int64_t successes = 0;   // collision-free slots among them
  std::int64_t delivered = 0;   // real packets that left the queue
  double empirical_success = 0.0;  // successes per slot
  double mean_delay = std::numeric_limits<double>::quiet_NaN();
  double delay_stderr = std::numeric_limits<double>::quiet_NaN();
  double mean_queue = 0.0;         // time average packets in system
  double little_residual = std::numeric_limits<double>::quiet_NaN();
};

struct SimStats {
  std::vector<LinkSimStats> links;
  std::vector<double> node_energy_rate;  // energy spent per slot and node
  std::int64_t measured_slots = 0;
  std::uint64_t seed = 0;
};

namespace simdetail {

inline void validate_config(const Topology& topo, const SimConfig& config) {
  if (static_cast<int>(config.mac.link_prob.size()) != topo.link_count())
    throw ValidationError("simulate: mac state size mismatch");
  if (static_cast<int>(config.link_load.size()) != topo.link_count())
    throw ValidationError("simulate: load vector size mismatch");
  if (config.warmup < 0 || config.horizon <= config.warmup)
    throw ValidationError("simulate: need horizon > warmup >= 0");
  for (double r : config.link_load)
    if (r < 0.0) throw ValidationError("simulate: loads must be >= 0");
  for (double p : config.mac.link_prob)
    if (p < 0.0 || p > 1.0) throw ValidationError("simulate: probabilities must be in [0,1]");
  for (int i = 0; i < topo.node_count(); ++i)
    if (config.mac.node_prob(topo, i) > 1.0 + 1e-12)
      throw ValidationError("simulate: node " + std::to_string(i) +
                            " transmission probability exceeds 1");
}

}  // namespace simdetail

/// Slotted-Aloha run with per-link Poisson arrivals and backlogged (dummy
/// filled) transmissions. Each slot every node picks at most one outgoing
/// link; a transmission on (i,j) succeeds iff neither the receiver nor any
/// other neighbor of the receiver transmits. Real head-of-line packets leave
/// only on success; a packet arriving in slot t is eligible in slot t and a
/// first-try success counts one slot of delay.
inline SimStats simulate(const Topology& topo, const SimConfig& config) {
  simdetail::validate_config(topo, config);
  const int num_links = topo.link_count();
  const int num_nodes = topo.node_count();

  std::mt19937_64 rng(config.seed);
  std::vector<std::deque<std::int64_t>> queue(static_cast<std::size_t>(num_links));
  std::vector<int> chosen_link(static_cast<std::size_t>(num_nodes));
  std::vector<char> transmitting(static_cast<std::size_t>(num_nodes));

  SimStats stats;
  stats.links.resize(static_cast<std::size_t>(num_links));
  stats.node_energy_rate.assign(static_cast<std::size_t>(num_nodes), 0.0);
  stats.measured_slots = config.horizon - config.warmup;
  stats.seed = config.seed;
  std::vector<simdetail::DelayAccumulator> delays(static_cast<std::size_t>(num_links));
  std::vector<double> queue_area(static_cast<std::size_t>(num_links), 0.0);
  std::vector<std::int64_t> attempt_count(static_cast<std::size_t>(num_nodes), 0);

  for (std::int64_t t = 0; t < config.horizon; ++t) {
    const bool measured = t >= config.warmup;
    // Arrivals, eligible in this same slot.
    for (int k = 0; k < num_links; ++k) {
      const int n = simdetail::poisson(rng, config.link_load[static_cast<std::size_t>(k)]);
      for (int a = 0; a < n; ++a) queue[static_cast<std::size_t>(k)].push_back(t);
      if (measured)
        queue_area[static_cast<std::size_t>(k)] +=
            static_cast<double>(queue[static_cast<std::size_t>(k)].size());
    }
    // Transmission decisions: one categorical draw per node.
    for (int i = 0; i < num_nodes; ++i) {
      chosen_link[static_cast<std::size_t>(i)] = -1;
      transmitting[static_cast<std::size_t>(i)] = 0;
      const double u = simdetail::uniform01(rng);
      double cumulative = 0.0;
      for (int k : topo.out_links(i)) {
        cumulative += config.mac.link_prob[static_cast<std::size_t>(k)];
        if (u < cumulative) {
          chosen_link[static_cast<std::size_t>(i)] = k;
          transmitting[static_cast<std::size_t>(i)] = 1;
          break;
        }
      }
    }
    // Outcomes.
    for (int i = 0; i < num_nodes; ++i) {
      const int k = chosen_link[static_cast<std::size_t>(i)];
      if (k < 0) continue;
      if (measured) {
        ++attempt_count[static_cast<std::size_t>(i)];
        ++stats.links[static_cast<std::size_t>(k)].attempts;
      }
      const Link& l = topo.link(k);
      bool success = !transmitting[static_cast<std::size_t>(l.to)];
      if (success)
        for (int nb : topo.neighbors(l.to))
          if (nb != l.from && transmitting[static_cast<std::size_t>(nb)]) {
            success = false;
            break;
          }
      if (!success) continue;
      if (measured) ++stats.links[static_cast<std::size_t>(k)].successes;
      auto& q = queue[static_cast<std::size_t>(k)];
      if (!q.empty()) {
        const std::int64_t arrived = q.front();
        q.pop_front();
        if (arrived >= config.warmup) {
          stats.links[static_cast<std::size_t>(k)].delivered++;
          delays[static_cast<std::size_t>(k)].add(static_cast<double>(t - arrived + 1));
        }
      }
    }
  }

  const double slots = static_cast<double>(stats.measured_slots);
  for (int k = 0; k < num_links; ++k) {
    auto& ls = stats.links[static_cast<std::size_t>(k)];
    ls.empirical_success = static_cast<double>(ls.successes) / slots;
    ls.mean_delay = delays[static_cast<std::size_t>(k)].mean();
    ls.delay_stderr = delays[static_cast<std::size_t>(k)].stderror();
    ls.mean_queue = queue_area[static_cast<std::size_t>(k)] / slots;
    const double load = config.link_load[static_cast<std::size_t>(k)];
    if (load > 0.0 && ls.delivered > 0)
      ls.little_residual = std::abs(ls.mean_queue - load * ls.mean_delay) /
                           std::max(1e-12, load * ls.mean_delay);
  }
  for (int i = 0; i < num_nodes; ++i)
    stats.node_energy_rate[static_cast<std::size_t>(i)] =
        topo.energy(i) * static_cast<double>(attempt_count[static_cast<std::size_t>(i)]) / slots;
  return stats;
}

// ---------------------------------------------------------------------------
// Model validation front-ends
// ---------------------------------------------------------------------------

struct LinkValidation {
  int link = 0;
  double analytic_success = 0.0;
  double empirical_success = 0.0;
  double success_rel_err = 0.0;
  double analytic_delay = 0.0;
  double empirical_delay = 0.0;
  double delay_rel_err = 0.0;
};

struct ValidationReport {
  std::vector<LinkValidation> links;  // aggregated over seeds
  double max_success_rel_err = 0.0;
  double max_delay_rel_err = 0.0;
  bool pass = false;
  double tolerance = 0.0;
};

/// Runs the simulator against the closed-form per-link model: empirical mean
/// delay against the queueing formula and empirical throughput against the
/// collision product form. Refuses unstable configurations up front.
inline ValidationReport validate_delay_model(const Topology& topo, const MacState& mac,
                                             const std::vector<double>& loads, double tolerance,
                                             const std::vector<std::uint64_t>& seeds,
                                             std::int64_t horizon = 1000000,
                                             std::int64_t warmup = 10000) {
  std::vector<double> x = success_probabilities(topo, mac);
  for (int k = 0; k < topo.link_count(); ++k)
    if (loads[static_cast<std::size_t>(k)] > 0.0 &&
        loads[static_cast<std::size_t>(k)] >= x[static_cast<std::size_t>(k)])
      throw InstabilityError("validate_delay_model: link " + link_name(topo.link(k)) +
                             " is unstable under the requested load");

  ValidationReport report;
  report.tolerance = tolerance;
  std::vector<double> success_sum(static_cast<std::size_t>(topo.link_count()), 0.0);
  std::vector<double> delay_sum(static_cast<std::size_t>(topo.link_count()), 0.0);
  std::vector<int> delay_runs(static_cast<std::size_t>(topo.link_count()), 0);
  for (std::uint64_t seed : seeds) {
    SimConfig config{mac, loads, horizon, warmup, seed};
    SimStats stats = simulate(topo, config);
    for (int k = 0; k < topo.link_count(); ++k) {
      success_sum[static_cast<std::size_t>(k)] +=
          stats.links[static_cast<std::size_t>(k)].empirical_success;
      if (stats.links[static_cast<std::size_t>(k)].delivered > 0) {
        delay_sum[static_cast<std::size_t>(k)] += stats.links[static_cast<std::size_t>(k)].mean_delay;
        delay_runs[static_cast<std::size_t>(k)]++;
      }
    }
  }
  for (int k = 0; k < topo.link_count(); ++k) {
    LinkValidation v;
    v.link = k;
    v.analytic_success = x[static_cast<std::size_t>(k)];
    v.empirical_success = success_sum[static_cast<std::size_t>(k)] / static_cast<double>(seeds.size());
    v.success_rel_err = std::abs(v.empirical_success - v.analytic_success) /
                        std::max(1e-12, v.analytic_success);
    report.max_success_rel_err = std::max(report.max_success_rel_err, v.success_rel_err);
    if (loads[static_cast<std::size_t>(k)] > 0.0 && delay_runs[static_cast<std::size_t>(k)] > 0) {
      v.analytic_delay =
          link_delay(x[static_cast<std::size_t>(k)], loads[static_cast<std::size_t>(k)]);
      v.empirical_delay =
          delay_sum[static_cast<std::size_t>(k)] / delay_runs[static_cast<std::size_t>(k)];
      v.delay_rel_err = std::abs(v.empirical_delay - v.analytic_delay) / v.analytic_delay;
      report.max_delay_rel_err = std::max(report.max_delay_rel_err, v.delay_rel_err);
    }
    report.links.push_back(v);
  }
  report.pass = report.max_delay_rel_err <= tolerance && report.max_success_rel_err <= tolerance;
  return report;
}

struct SessionSimStats {
  int session_id = 0;
  std::int64_t delivered = 0;
  double mean_delay = std::numeric_limits<double>::quiet_NaN();
  double analytic_delay = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();  // empirical / analytic
  bool has_data = false;
};

/// Forwards real session packets hop by hop (a delivered packet joins the
/// next queue at the start of the following slot) and reports empirical
/// end-to-end delay next to the per-hop analytic sum. Relay arrivals are not
/// Poisson, so the ratio is informational.
inline std::vector<SessionSimStats> measure_end_to_end(const Topology& topo,
                                                       const std::vector<Session>& sessions,
                                                       const MacState& mac,
                                                       const std::vector<double>& session_rate,
                                                       std::int64_t horizon, std::uint64_t seed,
                                                       std::int64_t warmup = 10000) {
  if (sessions.size() != session_rate.size())
    throw ValidationError("measure_end_to_end: rate vector size mismatch");
  const int num_links = topo.link_count();
  std::vector<double> loads(static_cast<std::size_t>(num_links), 0.0);
  std::vector<std::vector<std::pair<int, int>>> hop_of;  // session -> (link, next hop index)
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    validate_session(topo, sessions[s]);
    for (const Link& l : sessions[s].route)
      loads[static_cast<std::size_t>(topo.link_index(l.from, l.to))] += session_rate[s];
  }
  std::vector<double> x = success_probabilities(topo, mac);

  struct Packet {
    int session = 0;
    int hop = 0;
    std::int64_t source_arrival = 0;
  };
  std::mt19937_64 rng(seed);
  std::vector<std::deque<Packet>> queue(static_cast<std::size_t>(num_links));
  std::vector<std::vector<Packet>> staging(static_cast<std::size_t>(num_links));  // next-slot joins
  std::vector<int> chosen_link(static_cast<std::size_t>(topo.node_count()));
  std::vector<char> transmitting(static_cast<std::size_t>(topo.node_count()));
  std::vector<simdetail::DelayAccumulator> delays(sessions.size());

  for (std::int64_t t = 0; t < horizon; ++t) {
    for (int k = 0; k < num_links; ++k) {
      for (const Packet& pk : staging[static_cast<std::size_t>(k)])
        queue[static_cast<std::size_t>(k)].push_back(pk);
      staging[static_cast<std::size_t>(k)].clear();
    }
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      const int n = simdetail::poisson(rng, session_rate[s]);
      const int first =
          topo.link_index(sessions[s].route.front().from, sessions[s].route.front().to);
      for (int a = 0; a < n; ++a)
        queue[static_cast<std::size_t>(first)].push_back(Packet{static_cast<int>(s), 0, t});
    }
    for (int i = 0; i < topo.node_count(); ++i) {
      chosen_link[static_cast<std::size_t>(i)] = -1;
      transmitting[static_cast<std::size_t>(i)] = 0;
      const double u = simdetail::uniform01(rng);
      double cumulative = 0.0;
      for (int k : topo.out_links(i)) {
        cumulative += mac.link_prob[static_cast<std::size_t>(k)];
        if (u < cumulative) {
          chosen_link[static_cast<std::size_t>(i)] = k;
          transmitting[static_cast<std::size_t>(i)] = 1;
          break;
        }
      }
    }
    for (int i = 0; i < topo.node_count(); ++i) {
      const int k = chosen_link[static_cast<std::size_t>(i)];
      if (k < 0) continue;
      const Link& l = topo.link(k);
      bool success = !transmitting[static_cast<std::size_t>(l.to)];
      if (success)
        for (int nb : topo.neighbors(l.to))
          if (nb != l.from && transmitting[static_cast<std::size_t>(nb)]) {
            success = false;
            break;
          }
      if (!success || queue[static_cast<std::size_t>(k)].empty()) continue;
      Packet pk = queue[static_cast<std::size_t>(k)].front();
      queue[static_cast<std::size_t>(k)].pop_front();
      const Session& session = sessions[static_cast<std::size_t>(pk.session)];
      if (pk.hop + 1 < static_cast<int>(session.route.size())) {
        pk.hop++;
        const Link& next = session.route[static_cast<std::size_t>(pk.hop)];
        staging[static_cast<std::size_t>(topo.link_index(next.from, next.to))].push_back(pk);
      } else if (pk.source_arrival >= warmup) {
        delays[static_cast<std::size_t>(pk.session)].add(
            static_cast<double>(t - pk.source_arrival + 1));
      }
    }
  }

  std::vector<SessionSimStats> out;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    SessionSimStats stat;
    stat.session_id = sessions[s].id;
    stat.delivered = static_cast<std::int64_t>(delays[s].samples.size());
    if (stat.delivered > 0) {
      stat.has_data = true;
      stat.mean_delay = delays[s].mean();
      stat.analytic_delay = end_to_end_delay(topo, sessions[s], x, loads);
      stat.ratio = stat.mean_delay / stat.analytic_delay;
    }
    out.push_back(stat);
  }
  return out;
}

}  // namespace alohanum

#endif  // ALOHANUM_ALOHA_SIM_HPP_
