#include "alohanum/convex_core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using namespace alohanum;

SmoothFunction quadratic_1d(double center) {
  SmoothFunction f;
  f.value = [center](const Vec& x) { return (x[0] - center) * (x[0] - center); };
  f.gradient = [center](const Vec& x, Vec& g) { g.assign(x.size(), 0.0); g[0] = 2.0 * (x[0] - center); };
  f.add_hessian = [](const Vec&, double c, linalg::Matrix& h) { h(0, 0) += 2.0 * c; };
  return f;
}

PgProblem box_quadratic(Vec center, Vec lo, Vec hi) {
  PgProblem p;
  p.value = [center](const Vec& x) {
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) v += (x[i] - center[i]) * (x[i] - center[i]);
    return v;
  };
  p.gradient = [center](const Vec& x) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * (x[i] - center[i]);
    return g;
  };
  p.project = [lo, hi](Vec& x) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
  };
  return p;
}

TEST(ProjectedGradient, ActiveBoxOptimum) {
  auto r = projected_gradient(box_quadratic({3.0}, {0.0}, {1.0}), {0.2}, StepSchedule{}, {1e-10, 20000});
  EXPECT_TRUE(r.report.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-9);
}

TEST(ProjectedGradient, UnconstrainedQuadratic) {
  auto r = projected_gradient(box_quadratic({0.0, 0.0}, {-10.0, -10.0}, {10.0, 10.0}), {1.0, 1.0},
                              StepSchedule{}, {1e-9, 50000});
  EXPECT_TRUE(r.report.converged);
  EXPECT_NEAR(r.x[0], 0.0, 1e-6);
  EXPECT_NEAR(r.x[1], 0.0, 1e-6);
}

TEST(ProjectedGradient, KktResidualAtKnownOptimum) {
  // min (x-2)^2 + (y+1)^2 over [0,1]^2: optimum (1,0); active bounds carry
  // multipliers 2 for x<=1 and 2 for -y<=0.
  auto r = projected_gradient(box_quadratic({2.0, -1.0}, {0.0, 0.0}, {1.0, 1.0}), {0.5, 0.5},
                              StepSchedule{}, {1e-11, 50000});
  ConvexProgram prog;
  prog.dim = 2;
  prog.objective.value = [](const Vec& x) {
    return (x[0] - 2.0) * (x[0] - 2.0) + (x[1] + 1.0) * (x[1] + 1.0);
  };
  prog.objective.gradient = [](const Vec& x, Vec& g) {
    g = {2.0 * (x[0] - 2.0), 2.0 * (x[1] + 1.0)};
  };
  prog.constraints.push_back(linear_function({1.0, 0.0}, -1.0));   // x - 1 <= 0
  prog.constraints.push_back(linear_function({-1.0, 0.0}, 0.0));   // -x <= 0
  prog.constraints.push_back(linear_function({0.0, 1.0}, -1.0));   // y - 1 <= 0
  prog.constraints.push_back(linear_function({0.0, -1.0}, 0.0));   // -y <= 0
  EXPECT_LE(kkt_residual(prog, r.x, {2.0, 0.0, 0.0, 2.0}), 1e-6);
}

TEST(ProjectedGradient, MonotoneUnderSmallConstantStep) {
  StepSchedule sched;
  sched.base = 0.05;
  auto r = projected_gradient(box_quadratic({5.0, -3.0}, {-1.0, -1.0}, {1.0, 1.0}), {-1.0, 1.0},
                              sched, {1e-12, 2000});
  const auto& traj = r.report.objective_trajectory;
  ASSERT_EQ(static_cast<int>(traj.size()), r.report.iterations);
  for (std::size_t i = 1; i < traj.size(); ++i) EXPECT_LE(traj[i], traj[i - 1] + 1e-12);
}

TEST(ProjectedGradient, NanGradientRaisesNumericError) {
  PgProblem p = box_quadratic({0.0}, {-1.0}, {1.0});
  p.gradient = [](const Vec& x) { return Vec{std::nan("")}; };
  EXPECT_THROW(projected_gradient(p, {0.5}, StepSchedule{}, {1e-8, 10}), NumericError);
}

TEST(StepSchedule, DiminishingVanishesWithDivergentSum) {
  StepSchedule s;
  s.mode = StepSchedule::Mode::kDiminishing;
  s.base = 0.1;
  EXPECT_LT(s.base_at(1000000), s.base_at(0) / 1000.0);
  double sum_small = 0.0, sum_large = 0.0;
  for (int n = 0; n < 1000; ++n) sum_small += s.base_at(n);
  for (int n = 0; n < 1000000; ++n) sum_large += s.base_at(n);
  EXPECT_GT(sum_large, sum_small + 0.1 * 10.0 * std::log(1000.0) * 0.9);
  EXPECT_THROW((StepSchedule{StepSchedule::Mode::kConstant, -1.0}.validate()), ValidationError);
}

TEST(Barrier, LinearProgramOneVariable) {
  ConvexProgram prog;
  prog.dim = 1;
  prog.objective = linear_function({1.0});
  prog.constraints.push_back(linear_function({-1.0}, 2.0));  // 2 - x <= 0
  prog.constraints.push_back(linear_function({1.0}, -50.0));  // x <= 50
  auto r = barrier_solve(prog, {0.0});  // infeasible start exercises phase-I
  EXPECT_TRUE(r.report.converged);
  EXPECT_NEAR(r.x[0], 2.0, 1e-5);
  EXPECT_NEAR(r.duals[0], 1.0, 1e-4);
  EXPECT_LE(r.report.kkt_residual, 1e-6);
}

TEST(Barrier, AgreesWithProjectedGradientOnBoxQuadratic) {
  ConvexProgram prog;
  prog.dim = 1;
  prog.objective = quadratic_1d(3.0);
  prog.constraints.push_back(linear_function({1.0}, -1.0));  // x <= 1
  prog.constraints.push_back(linear_function({-1.0}, 0.0));  // x >= 0
  auto b = barrier_solve(prog, {0.5});
  auto pg = projected_gradient(box_quadratic({3.0}, {0.0}, {1.0}), {0.5}, StepSchedule{}, {1e-10, 20000});
  EXPECT_TRUE(b.report.converged);
  const double fb = prog.objective.value(b.x);
  const double fp = prog.objective.value(pg.x);
  EXPECT_NEAR(fb, fp, 0.005 * std::abs(fp));
}

TEST(Barrier, InfeasibleProgramRaises) {
  ConvexProgram prog;
  prog.dim = 1;
  prog.objective = linear_function({1.0});
  prog.constraints.push_back(linear_function({1.0}, -1.0));   // x <= 1
  prog.constraints.push_back(linear_function({-1.0}, 2.0));   // x >= 2
  EXPECT_THROW(barrier_solve(prog, {0.0}), InfeasibleError);
}

TEST(KktResidual, QuadraticOptimumAndPerturbation) {
  ConvexProgram prog;
  prog.dim = 1;
  prog.objective = quadratic_1d(0.25);
  prog.constraints.push_back(linear_function({1.0}, -1.0));
  EXPECT_LT(kkt_residual(prog, {0.25}, {0.0}), 1e-10);
  const double r1 = kkt_residual(prog, {0.3}, {0.0});
  const double r2 = kkt_residual(prog, {0.4}, {0.0});
  EXPECT_GT(r1, 0.01);
  EXPECT_GT(r2, r1);
}

TEST(ProjectProbabilities, FeasibleInputUnchanged) {
  Topology star = build_star(3);
  Vec raw{0.2, 0.2, 0.3, 0.1};
  MacState s = project_probabilities(raw, star);
  EXPECT_EQ(s.link_prob, raw);
}

TEST(ProjectProbabilities, ProportionalRescale) {
  // Node 0 of a star with two outgoing links at (0.8, 0.6), eps = 0.01.
  Topology star = build_star(3);
  MacState s = project_probabilities({0.8, 0.6, 0.0, 0.0}, star, 0.01);
  EXPECT_NEAR(s.link_prob[0], 0.8 * 0.99 / 1.4, 1e-12);
  EXPECT_NEAR(s.link_prob[1], 0.6 * 0.99 / 1.4, 1e-12);
  EXPECT_NEAR(s.node_prob(star, 0), 0.99, 1e-12);
}

TEST(ProjectProbabilities, ClampsNegativeBeforeScaling) {
  Topology star = build_star(3);
  MacState s = project_probabilities({-0.2, 0.5, 0.0, 0.0}, star, 0.01);
  EXPECT_DOUBLE_EQ(s.link_prob[0], 0.0);
  EXPECT_DOUBLE_EQ(s.link_prob[1], 0.5);
}

TEST(KktResidual, RandomFeasiblePointOfDelayConstrainedProgramIsFlagged) {
  // Variables (p0, p1, z0, z1) of the two-node delay-constrained tradeoff;
  // away from the optimum the residual is decisively nonzero.
  const double l1 = 5.0, l2 = 0.1, inv_dc = 0.01, coeff = 1.0 - 0.5 * inv_dc;
  ConvexProgram prog;
  prog.dim = 4;
  prog.objective = linear_function({l1, l1, -l2, -l2});
  for (int k = 0; k < 2; ++k) {
    SmoothFunction g;
    g.value = [k, inv_dc, coeff](const Vec& v) {
      const double own = v[static_cast<std::size_t>(k)];
      const double other = v[static_cast<std::size_t>(1 - k)];
      return std::log(inv_dc + coeff * std::exp(v[static_cast<std::size_t>(2 + k)])) -
             std::log(own * (1.0 - other));
    };
    g.gradient = [k, inv_dc, coeff](const Vec& v, Vec& grad) {
      grad.assign(4, 0.0);
      const double cez = coeff * std::exp(v[static_cast<std::size_t>(2 + k)]);
      grad[static_cast<std::size_t>(2 + k)] = cez / (inv_dc + cez);
      grad[static_cast<std::size_t>(k)] = -1.0 / v[static_cast<std::size_t>(k)];
      grad[static_cast<std::size_t>(1 - k)] = 1.0 / (1.0 - v[static_cast<std::size_t>(1 - k)]);
    };
    prog.constraints.push_back(std::move(g));
  }
  std::mt19937_64 rng(92);
  for (int trial = 0; trial < 20; ++trial) {
    const double p0 = std::uniform_real_distribution<double>(0.1, 0.6)(rng);
    const double p1 = std::uniform_real_distribution<double>(0.1, 0.6)(rng);
    Vec x{p0, p1, std::log(0.2 * p0 * (1.0 - p1)), std::log(0.2 * p1 * (1.0 - p0))};
    Vec duals{std::uniform_real_distribution<double>(0.0, 1.0)(rng),
              std::uniform_real_distribution<double>(0.0, 1.0)(rng)};
    EXPECT_GT(kkt_residual(prog, x, duals), 0.01);
  }
}

TEST(ProjectProbabilities, IdempotentAndBounded) {
  std::mt19937_64 rng(21);
  Topology star = build_star(6);
  for (int trial = 0; trial < 200; ++trial) {
    Vec raw(static_cast<std::size_t>(star.link_count()));
    for (double& v : raw) v = std::uniform_real_distribution<double>(-0.5, 1.5)(rng);
    MacState once = project_probabilities(raw, star);
    MacState twice = project_probabilities(once.link_prob, star);
    for (int i = 0; i < star.node_count(); ++i)
      EXPECT_LE(once.node_prob(star, i), 1.0 - kInteriorEps + 1e-12);
    for (std::size_t k = 0; k < raw.size(); ++k)
      EXPECT_NEAR(once.link_prob[k], twice.link_prob[k], 1e-12);
  }
}

}  // namespace
