#ifndef ALOHANUM_DELAY_MODEL_HPP_
#define ALOHANUM_DELAY_MODEL_HPP_

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "alohanum/errors.hpp"
#include "alohanum/net_model.hpp"

namespace alohanum {

/// Mean and variance of the per-link service time, in slots, when each slot
/// delivers the head-of-line packet with probability `success_prob`.
/// The service time is geometric: mean 1/x, variance (1-x)/x^2.
inline std::pair<double, double> service_stats(double success_prob) {
  if (!(success_prob > 0.0) || success_prob > 1.0)
    throw ValidationError("service_stats: success probability must be in (0,1], got " +
                          std::to_string(success_prob));
  const double mean = 1.0 / success_prob;
  const double variance = (1.0 - success_prob) * mean * mean;
  return {mean, variance};
}

/// Average link delay in slots for arrival rate `rate` (packets/slot) and
/// per-slot success probability `success_prob`: (1 - r/2) / (x - r).
/// Requires r < x; at r = x the queue is unstable and the delay is infinite.
inline double link_delay(double success_prob, double rate) {
  if (!(success_prob > 0.0) || success_prob > 1.0)
    throw ValidationError("link_delay: success probability must be in (0,1], got " +
                          std::to_string(success_prob));
  if (rate < 0.0)
    throw ValidationError("link_delay: arrival rate must be >= 0, got " + std::to_string(rate));
  if (rate >= success_prob)
    throw InstabilityError("link_delay: unstable queue, rate " + std::to_string(rate) +
                           " >= success probability " + std::to_string(success_prob));
  return (1.0 - 0.5 * rate) / (success_prob - rate);
}

/// Per-link persistence probabilities, indexed like topology.links().
/// node_prob(i) is the total transmission probability of node i.
struct MacState {
  std::vector<double> link_prob;

  static MacState zeros(const Topology& topo) {
    return MacState{std::vector<double>(static_cast<std::size_t>(topo.link_count()), 0.0)};
  }
  static MacState uniform(const Topology& topo, double p) {
    return MacState{std::vector<double>(static_cast<std::size_t>(topo.link_count()), p)};
  }

  double node_prob(const Topology& topo, int node) const {
    double total = 0.0;
    for (int k : topo.out_links(node)) total += link_prob[static_cast<std::size_t>(k)];
    return total;
  }
};

/// Probability that one slot carries a successful transmission on `link_idx`:
/// the sender picks the link while neither the receiver nor any other
/// neighbor of the receiver transmits. Queues are assumed backlogged (dummy
/// packets fill idle slots), so this does not depend on queue state.
inline double success_probability(const Topology& topo, const MacState& mac, int link_idx) {
  if (link_idx < 0 || link_idx >= topo.link_count())
    throw ValidationError("success_probability: link index out of range");
  const Link& l = topo.link(link_idx);
  double x = mac.link_prob[static_cast<std::size_t>(link_idx)];
  x *= 1.0 - mac.node_prob(topo, l.to);
  for (int other : topo.neighbors(l.to))
    if (other != l.from) x *= 1.0 - mac.node_prob(topo, other);
  return x;
}

inline std::vector<double> success_probabilities(const Topology& topo, const MacState& mac) {
  std::vector<double> x(static_cast<std::size_t>(topo.link_count()));
  for (int k = 0; k < topo.link_count(); ++k)
    x[static_cast<std::size_t>(k)] = success_probability(topo, mac, k);
  return x;
}

/// Sum of link delays along a session route. `success` and `rate` are indexed
/// like topology.links(). Throws InstabilityError naming the first unstable hop.
inline double end_to_end_delay(const Topology& topo, const Session& session,
                               const std::vector<double>& success,
                               const std::vector<double>& rate) {
  double total = 0.0;
  for (const Link& l : session.route) {
    const auto k = static_cast<std::size_t>(topo.link_index(l.from, l.to));
    if (rate[k] >= success[k])
      throw InstabilityError("end_to_end_delay: session " + std::to_string(session.id) +
                             " has unstable hop " + link_name(l));
    total += link_delay(success[k], rate[k]);
  }
  return total;
}

}  // namespace alohanum

#endif  // ALOHANUM_DELAY_MODEL_HPP_
