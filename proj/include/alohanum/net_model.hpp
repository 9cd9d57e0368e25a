#ifndef ALOHANUM_NET_MODEL_HPP_
#define ALOHANUM_NET_MODEL_HPP_

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alohanum/errors.hpp"

namespace alohanum {

struct Link {
  int from = -1;
  int to = -1;

  friend bool operator==(const Link& a, const Link& b) {
    return a.from == b.from && a.to == b.to;
  }
  friend bool operator<(const Link& a, const Link& b) {
    return a.from != b.from ? a.from < b.from : a.to < b.to;
  }
};

inline std::string link_name(const Link& l) {
  return "(" + std::to_string(l.from) + "," + std::to_string(l.to) + ")";
}

/// Immutable network description: nodes, directed links, per-node transmit
/// energy and the neighbor/out/in sets derived from the link list.
///
/// Equal transmit powers make hearing symmetric, so a link (i,j) is only
/// accepted together with its reverse (j,i). Links are stored in canonical
/// (from,to) order, which makes generator output and file round-trips stable.
class Topology {
 public:
  Topology(int node_count, std::vector<Link> links, std::vector<double> energy = {})
      : node_count_(node_count), links_(std::move(links)), energy_(std::move(energy)) {
    if (node_count_ < 1) throw ValidationError("topology: node count must be >= 1");
    if (energy_.empty()) energy_.assign(static_cast<std::size_t>(node_count_), 1.0);
    if (static_cast<int>(energy_.size()) != node_count_)
      throw ValidationError("topology: energy array size " + std::to_string(energy_.size()) +
                            " does not match node count " + std::to_string(node_count_));
    for (int i = 0; i < node_count_; ++i)
      if (!(energy_[static_cast<std::size_t>(i)] > 0.0))
        throw ValidationError("topology: energy[" + std::to_string(i) + "] must be > 0");

    std::sort(links_.begin(), links_.end());
    for (const Link& l : links_) {
      if (l.from < 0 || l.from >= node_count_ || l.to < 0 || l.to >= node_count_)
        throw ValidationError("topology: link " + link_name(l) + " references unknown node");
      if (l.from == l.to)
        throw ValidationError("topology: self-loop " + link_name(l));
    }
    for (std::size_t k = 1; k < links_.size(); ++k)
      if (links_[k] == links_[k - 1])
        throw ValidationError("topology: duplicate link " + link_name(links_[k]));
    for (const Link& l : links_)
      if (!has_link(l.to, l.from))
        throw ValidationError("topology: link " + link_name(l) +
                              " has no reverse link; neighborhoods must be symmetric");

    out_links_.assign(static_cast<std::size_t>(node_count_), {});
    in_links_.assign(static_cast<std::size_t>(node_count_), {});
    neighbors_.assign(static_cast<std::size_t>(node_count_), {});
    for (int k = 0; k < link_count(); ++k) {
      const Link& l = links_[static_cast<std::size_t>(k)];
      out_links_[static_cast<std::size_t>(l.from)].push_back(k);
      in_links_[static_cast<std::size_t>(l.to)].push_back(k);
      neighbors_[static_cast<std::size_t>(l.from)].push_back(l.to);
    }
  }

  int node_count() const { return node_count_; }
  int link_count() const { return static_cast<int>(links_.size()); }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(int k) const { return links_[static_cast<std::size_t>(k)]; }
  double energy(int node) const { return energy_[static_cast<std::size_t>(node)]; }
  const std::vector<double>& energies() const { return energy_; }

  /// Link indices leaving / entering a node, in canonical order.
  const std::vector<int>& out_links(int node) const { return out_links_[static_cast<std::size_t>(node)]; }
  const std::vector<int>& in_links(int node) const { return in_links_[static_cast<std::size_t>(node)]; }
  /// Sorted neighbor node ids (symmetric by construction).
  const std::vector<int>& neighbors(int node) const { return neighbors_[static_cast<std::size_t>(node)]; }

  bool has_link(int from, int to) const { return find_link(from, to) >= 0; }

  int link_index(int from, int to) const {
    int k = find_link(from, to);
    if (k < 0)
      throw ValidationError("topology: no such link (" + std::to_string(from) + "," +
                            std::to_string(to) + ")");
    return k;
  }

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.node_count_ == b.node_count_ && a.links_ == b.links_ && a.energy_ == b.energy_;
  }

 private:
  int find_link(int from, int to) const {
    auto it = std::lower_bound(links_.begin(), links_.end(), Link{from, to});
    if (it == links_.end() || !(*it == Link{from, to})) return -1;
    return static_cast<int>(it - links_.begin());
  }

  int node_count_;
  std::vector<Link> links_;
  std::vector<double> energy_;
  std::vector<std::vector<int>> out_links_;
  std::vector<std::vector<int>> in_links_;
  std::vector<std::vector<int>> neighbors_;
};

/// A unicast session: a fixed loop-free directed route plus its end-to-end
/// delay budget in slot times.
struct Session {
  int id = 0;
  std::vector<Link> route;
  double delay_bound = 0.0;

  int source() const { return route.front().from; }
  int destination() const { return route.back().to; }

  friend bool operator==(const Session& a, const Session& b) {
    return a.id == b.id && a.route == b.route && a.delay_bound == b.delay_bound;
  }
};

inline void validate_session(const Topology& topo, const Session& s) {
  const std::string tag = "session " + std::to_string(s.id) + ": ";
  if (s.route.empty()) throw ValidationError(tag + "route is empty");
  if (!(s.delay_bound > 0.0)) throw ValidationError(tag + "delay bound must be > 0");
  for (const Link& l : s.route)
    if (!topo.has_link(l.from, l.to))
      throw ValidationError(tag + "route link " + link_name(l) + " is not in the topology");
  for (std::size_t k = 0; k + 1 < s.route.size(); ++k)
    if (s.route[k].to != s.route[k + 1].from)
      throw ValidationError(tag + "route breaks at hop " + std::to_string(k) + ": " +
                            link_name(s.route[k]) + " -> " + link_name(s.route[k + 1]));
  std::vector<int> visited{s.route.front().from};
  for (const Link& l : s.route) {
    if (std::find(visited.begin(), visited.end(), l.to) != visited.end())
      throw ValidationError(tag + "route visits node " + std::to_string(l.to) + " twice (loop)");
    visited.push_back(l.to);
  }
}

struct Network {
  Topology topology;
  std::vector<Session> sessions;

  friend bool operator==(const Network& a, const Network& b) {
    return a.topology == b.topology && a.sessions == b.sessions;
  }
};

/// Chain 0-1-...-(n-1), both directions per adjacent pair: 2n-2 links.
inline Topology build_linear(int n) {
  if (n < 2) throw ValidationError("build_linear: need at least 2 nodes, got " + std::to_string(n));
  std::vector<Link> links;
  links.reserve(static_cast<std::size_t>(2 * n - 2));
  for (int i = 0; i + 1 < n; ++i) {
    links.push_back({i, i + 1});
    links.push_back({i + 1, i});
  }
  return Topology(n, std::move(links));
}

/// Node 0 is the hub; both directions between the hub and each leaf: 2n-2 links.
inline Topology build_star(int n) {
  if (n < 2) throw ValidationError("build_star: need at least 2 nodes, got " + std::to_string(n));
  std::vector<Link> links;
  links.reserve(static_cast<std::size_t>(2 * n - 2));
  for (int leaf = 1; leaf < n; ++leaf) {
    links.push_back({0, leaf});
    links.push_back({leaf, 0});
  }
  return Topology(n, std::move(links));
}

namespace detail {

// Canonical 10-node / 12-link / 4-session sample network, kept as versioned
// data (data/sample10.json mirrors this string byte for byte). Two 3-node
// relay components, one of them with a shared link, plus two isolated pairs.
inline constexpr const char* kSample10Json = R"({
  "nodes": 10,
  "energy": [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
  "links": [
    [0, 1], [1, 0], [1, 2], [2, 1],
    [3, 4], [4, 3], [4, 5], [5, 4],
    [6, 7], [7, 6], [8, 9], [9, 8]
  ],
  "sessions": [
    {"id": 0, "route": [[0, 1], [1, 2]], "delay_bound": 100.0},
    {"id": 1, "route": [[1, 2]], "delay_bound": 100.0},
    {"id": 2, "route": [[5, 4], [4, 3]], "delay_bound": 100.0},
    {"id": 3, "route": [[6, 7]], "delay_bound": 100.0}
  ]
}
)";

}  // namespace detail

inline Network parse_network(const nlohmann::json& j) {
  auto need = [&](const char* field) -> const nlohmann::json& {
    if (!j.contains(field))
      throw ValidationError(std::string("network file: missing field '") + field + "'");
    return j.at(field);
  };
  if (!need("nodes").is_number_integer())
    throw ValidationError("network file: field 'nodes' must be an integer");
  int nodes = need("nodes").get<int>();

  std::vector<double> energy;
  for (const auto& e : need("energy")) {
    if (!e.is_number())
      throw ValidationError("network file: field 'energy' must hold numbers");
    energy.push_back(e.get<double>());
  }

  std::vector<Link> links;
  {
    const auto& jl = need("links");
    for (std::size_t k = 0; k < jl.size(); ++k) {
      const auto& pair = jl.at(k);
      if (!pair.is_array() || pair.size() != 2)
        throw ValidationError("network file: links[" + std::to_string(k) + "] must be a [from,to] pair");
      links.push_back({pair.at(0).get<int>(), pair.at(1).get<int>()});
    }
  }

  Topology topo(nodes, std::move(links), std::move(energy));

  std::vector<Session> sessions;
  if (j.contains("sessions")) {
    const auto& js = j.at("sessions");
    for (std::size_t k = 0; k < js.size(); ++k) {
      const auto& s = js.at(k);
      const std::string where = "network file: sessions[" + std::to_string(k) + "]";
      if (!s.contains("route") || !s.contains("delay_bound"))
        throw ValidationError(where + " needs 'route' and 'delay_bound'");
      Session session;
      session.id = s.contains("id") ? s.at("id").get<int>() : static_cast<int>(k);
      for (const auto& pair : s.at("route")) {
        if (!pair.is_array() || pair.size() != 2)
          throw ValidationError(where + ".route entries must be [from,to] pairs");
        session.route.push_back({pair.at(0).get<int>(), pair.at(1).get<int>()});
      }
      session.delay_bound = s.at("delay_bound").get<double>();
      validate_session(topo, session);
      sessions.push_back(std::move(session));
    }
  }
  return Network{std::move(topo), std::move(sessions)};
}

/// The frozen 10-node sample network used by the experiment harness.
inline Network build_sample10() {
  return parse_network(nlohmann::json::parse(detail::kSample10Json));
}

inline nlohmann::ordered_json network_to_json(const Network& net) {
  nlohmann::ordered_json j;
  j["nodes"] = net.topology.node_count();
  j["energy"] = net.topology.energies();
  auto links = nlohmann::ordered_json::array();
  for (const Link& l : net.topology.links()) links.push_back({l.from, l.to});
  j["links"] = std::move(links);
  auto sessions = nlohmann::ordered_json::array();
  for (const Session& s : net.sessions) {
    nlohmann::ordered_json js;
    js["id"] = s.id;
    auto route = nlohmann::ordered_json::array();
    for (const Link& l : s.route) route.push_back({l.from, l.to});
    js["route"] = std::move(route);
    js["delay_bound"] = s.delay_bound;
    sessions.push_back(std::move(js));
  }
  j["sessions"] = std::move(sessions);
  return j;
}

inline Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open network file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("network file " + path + ": " + e.what());
  }
  return parse_network(j);
}

inline void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write network file: " + path);
  out << network_to_json(net).dump(2) << "\n";
  if (!out) throw IoError("failed while writing network file: " + path);
}

}  // namespace alohanum

#endif  // ALOHANUM_NET_MODEL_HPP_
