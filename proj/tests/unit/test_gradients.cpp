#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "alohanum/crosslayer_opt.hpp"
#include "alohanum/mac_opt.hpp"
#include "test_support.hpp"

// Finite-difference integrity checks of every analytic derivative the
// optimizers rely on, evaluated against independently written value
// functions.

namespace {

using namespace alohanum;

// Full Lagrangian of the link-delay-constrained problem, written out from its
// definition: sum over links of energy cost, negative rate utility and the
// priced log-form delay constraint.
double mac_lagrangian(const Topology& topo, const Weights& w, const std::vector<double>& p,
                      const std::vector<double>& z, const Vec& duals) {
  const double inv_dc = 1.0 / w.delay_bound;
  const double coeff = 1.0 - 0.5 * inv_dc;
  MacState mac{p};
  double value = 0.0;
  for (int k = 0; k < topo.link_count(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    value += w.energy_weight * topo.energy(topo.link(k).from) * p[i];
    value -= w.rate_weight * z[i];
    value += duals[i] * (std::log(coeff * std::exp(z[i]) + inv_dc) -
                         std::log(success_probability(topo, mac, k)));
  }
  return value;
}

TEST(GradientIntegrity, RateUpdateZeroesLagrangianDerivative) {
  Weights w{5.0, 0.1, 100.0};
  Topology pair = build_linear(2);
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    Vec duals{std::uniform_real_distribution<double>(0.12, 3.0)(rng),
              std::uniform_real_distribution<double>(0.12, 3.0)(rng)};
    std::vector<double> p{0.2, 0.3};
    std::vector<double> z(2);
    for (int k = 0; k < 2; ++k)
      z[static_cast<std::size_t>(k)] = std::log(mac_rate_update(duals[static_cast<std::size_t>(k)], w));
    for (std::size_t k = 0; k < 2; ++k) {
      auto along_z = [&](const testsupport::Vec& zz) {
        std::vector<double> z2(zz.begin(), zz.end());
        return mac_lagrangian(pair, w, p, z2, duals);
      };
      const double d = testsupport::fd_derivative(along_z, z, k, 1e-6);
      EXPECT_NEAR(d, 0.0, 1e-7);
    }
  }
}

TEST(GradientIntegrity, ProbUpdateZeroesLagrangianDerivative) {
  Weights w{5.0, 0.1, 100.0};
  Network net = build_sample10();
  const Topology& topo = net.topology;
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    Vec duals(static_cast<std::size_t>(topo.link_count()));
    for (double& m : duals) m = std::uniform_real_distribution<double>(0.3, 2.0)(rng);
    std::vector<double> p(static_cast<std::size_t>(topo.link_count()), 0.0);
    bool interior = true;
    for (int i = 0; i < topo.node_count(); ++i) {
      MacNodeView view = mac_node_view(topo, i, duals);
      MacProbUpdate upd = mac_prob_update(topo, i, view, w);
      interior = interior && !upd.clamped;
      for (const auto& [k, prob] : upd.prob) p[static_cast<std::size_t>(k)] = prob;
    }
    ASSERT_TRUE(interior);
    std::vector<double> z(static_cast<std::size_t>(topo.link_count()), std::log(0.01));
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto along_p = [&](const testsupport::Vec& pp) {
        std::vector<double> p2(pp.begin(), pp.end());
        return mac_lagrangian(topo, w, p2, z, duals);
      };
      const double d = testsupport::fd_derivative(along_p, p, k, 1e-7);
      EXPECT_NEAR(d, 0.0, 1e-5) << "link " << k;
    }
  }
}

TEST(GradientIntegrity, LogSuccessGradientMatchesFiniteDifferences) {
  Network net = build_sample10();
  const Topology& topo = net.topology;
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    Vec p(static_cast<std::size_t>(topo.link_count()));
    for (double& v : p) v = std::uniform_real_distribution<double>(0.05, 0.35)(rng);
    for (int k = 0; k < topo.link_count(); ++k) {
      auto factors = detail::interference_nodes(topo, k);
      auto value = [&](const testsupport::Vec& pp) {
        return -detail::log_success(topo, pp, k, factors);
      };
      Vec grad(p.size(), 0.0);
      detail::add_neg_log_success_gradient(topo, p, k, factors, grad);
      Vec fd = testsupport::fd_gradient(value, p, 1e-6);
      for (std::size_t i = 0; i < p.size(); ++i)
        EXPECT_NEAR(grad[i], fd[i], 1e-6 * std::max(1.0, std::abs(fd[i])));
    }
  }
}

TEST(GradientIntegrity, LogSuccessHessianMatchesDifferencedGradient) {
  Topology star = build_star(4);
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    Vec p(static_cast<std::size_t>(star.link_count()));
    for (double& v : p) v = std::uniform_real_distribution<double>(0.05, 0.3)(rng);
    for (int k = 0; k < star.link_count(); ++k) {
      auto factors = detail::interference_nodes(star, k);
      linalg::Matrix hess(static_cast<int>(p.size()));
      detail::add_neg_log_success_hessian(star, p, k, factors, 1.0, hess);
      for (std::size_t j = 0; j < p.size(); ++j) {
        auto grad_j = [&](const testsupport::Vec& pp) {
          Vec g(pp.size(), 0.0);
          detail::add_neg_log_success_gradient(star, pp, k, factors, g);
          return g[j];
        };
        Vec hess_col = testsupport::fd_gradient(grad_j, p, 1e-6);
        for (std::size_t i = 0; i < p.size(); ++i)
          EXPECT_NEAR(hess(static_cast<int>(i), static_cast<int>(j)), hess_col[i],
                      1e-5 * std::max(1.0, std::abs(hess_col[i])));
      }
    }
  }
}

TEST(GradientIntegrity, XlayerSolutionIsStationaryUnderHandDifferences) {
  // Rebuild the transformed cross-layer Lagrangian from scratch and check by
  // central differences that the returned point and multipliers zero it in
  // every coordinate that sits away from its bounds.
  Network net = build_sample10();
  Weights w{0.005, 10.0, 0.0};
  auto sol = solve_xlayer_centralized(net.topology, net.sessions, w);
  const XlayerLayout& layout = sol.layout;
  const int num_sessions = static_cast<int>(net.sessions.size());
  const int num_active = layout.active_count();

  // Variable vector: [z_s..., D_a..., p_a...].
  Vec v;
  for (int s = 0; s < num_sessions; ++s) v.push_back(std::log(sol.rates.rate[static_cast<std::size_t>(s)]));
  for (int a = 0; a < num_active; ++a) v.push_back(sol.budgets.budget[static_cast<std::size_t>(a)]);
  for (int a = 0; a < num_active; ++a)
    v.push_back(sol.mac.link_prob[static_cast<std::size_t>(layout.active_links[static_cast<std::size_t>(a)])]);

  auto lagrangian = [&](const testsupport::Vec& vv) {
    double value = 0.0;
    MacState mac = MacState::zeros(net.topology);
    for (int a = 0; a < num_active; ++a)
      mac.link_prob[static_cast<std::size_t>(layout.active_links[static_cast<std::size_t>(a)])] =
          vv[static_cast<std::size_t>(num_sessions + num_active + a)];
    for (int s = 0; s < num_sessions; ++s) value -= w.rate_weight * vv[static_cast<std::size_t>(s)];
    value += w.energy_weight * total_energy(net.topology, mac);
    for (int a = 0; a < num_active; ++a) {
      const double d = vv[static_cast<std::size_t>(num_sessions + a)];
      double load = 0.0;
      for (int s : layout.sessions_on_link[static_cast<std::size_t>(a)])
        load += std::exp(vv[static_cast<std::size_t>(s)]);
      const double x = success_probability(net.topology, mac,
                                           layout.active_links[static_cast<std::size_t>(a)]);
      value += sol.link_duals[static_cast<std::size_t>(a)] *
               (std::log(1.0 / d + load * (1.0 - 0.5 / d)) - std::log(x));
    }
    for (int s = 0; s < num_sessions; ++s) {
      double total = 0.0;
      for (int slot : layout.route_slots[static_cast<std::size_t>(s)])
        total += vv[static_cast<std::size_t>(num_sessions + slot)];
      value += sol.session_duals[static_cast<std::size_t>(s)] *
               (total - net.sessions[static_cast<std::size_t>(s)].delay_bound);
    }
    return value;
  };

  int checked = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool is_rate = i < static_cast<std::size_t>(num_sessions);
    const bool is_prob = i >= static_cast<std::size_t>(num_sessions + num_active);
    if (is_rate && sol.rates.rate[i] > 0.9) continue;  // rate-cap box dual not modeled
    if (is_prob) {
      // Only probabilities away from their own and their node's bounds carry
      // zero stationarity without box multipliers.
      const double p = v[i];
      const int a = static_cast<int>(i) - num_sessions - num_active;
      const int node = net.topology.link(layout.active_links[static_cast<std::size_t>(a)]).from;
      MacState mac = sol.mac;
      if (p < 0.05 || p > 0.95 || mac.node_prob(net.topology, node) > 0.99) continue;
    }
    const double d = testsupport::fd_derivative(lagrangian, v, i, 1e-6);
    EXPECT_NEAR(d, 0.0, 2e-5) << "coordinate " << i;
    ++checked;
  }
  EXPECT_GE(checked, num_active);  // at least every budget coordinate
}

}  // namespace
