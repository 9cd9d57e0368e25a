#ifndef ALOHANUM_CONVEX_CORE_HPP_
#define ALOHANUM_CONVEX_CORE_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "alohanum/delay_model.hpp"
#include "alohanum/errors.hpp"
#include "alohanum/linalg.hpp"
#include "alohanum/net_model.hpp"

namespace alohanum {

// Interior margin keeping probabilities and rates away from 0/1 so that the
// logarithms appearing in objectives and constraints stay finite.
inline constexpr double kInteriorEps = 1e-6;
inline constexpr double kRateFloor = 1e-9;
inline constexpr double kRateCap = 1.0 - kInteriorEps;

/// Step sizes for the iterative schemes. `link_dual`, `session_dual` and
/// `prob` are the per-family steps; `base` drives the generic routines.
struct StepSchedule {
  enum class Mode { kConstant, kDiminishing };

  Mode mode = Mode::kConstant;
  double base = 0.01;
  double link_dual = 0.05;
  double session_dual = 0.05;
  double prob = 0.01;
  double decay_offset = 10.0;  // diminishing: s * offset / (offset + n)

  double at(double s, int n) const {
    if (mode == Mode::kConstant) return s;
    return s * decay_offset / (decay_offset + static_cast<double>(n));
  }
  double base_at(int n) const { return at(base, n); }
  double link_dual_at(int n) const { return at(link_dual, n); }
  double session_dual_at(int n) const { return at(session_dual, n); }
  double prob_at(int n) const { return at(prob, n); }

  void validate() const {
    if (!(base > 0.0) || !(link_dual > 0.0) || !(session_dual > 0.0) || !(prob > 0.0))
      throw ValidationError("step schedule: all step sizes must be > 0");
    if (!(decay_offset > 0.0))
      throw ValidationError("step schedule: decay offset must be > 0");
  }
};

struct StopRule {
  double tol = 1e-8;
  int max_iters = 100000;
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> objective_trajectory;
  double max_violation = 0.0;
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  double wall_seconds = 0.0;
};

namespace detail {

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string snapshot(const Vec& x) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << "]";
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Projected gradient descent
// ---------------------------------------------------------------------------

struct PgProblem {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<void(Vec&)> project;  // in-place projection onto the feasible set
};

struct PgResult {
  Vec x;
  SolveReport report;
};

/// Minimizes `problem` by x <- proj(x - s_n grad). Converged when the
/// per-step displacement scaled by the step (a projected-gradient norm
/// surrogate) drops below the tolerance.
inline PgResult projected_gradient(const PgProblem& problem, Vec x0, const StepSchedule& schedule,
                                   const StopRule& stop = {}) {
  schedule.validate();
  detail::WallClock clock;
  PgResult out;
  out.x = std::move(x0);
  problem.project(out.x);

  for (int n = 0; n < stop.max_iters; ++n) {
    Vec grad = problem.gradient(out.x);
    if (!linalg::all_finite(grad))
      throw NumericError("projected_gradient: non-finite gradient at iterate " +
                         detail::snapshot(out.x));
    const double step = schedule.base_at(n);
    Vec next = out.x;
    for (std::size_t i = 0; i < next.size(); ++i) next[i] -= step * grad[i];
    problem.project(next);

    double moved = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) moved = std::max(moved, std::abs(next[i] - out.x[i]));
    out.x = std::move(next);

    const double value = problem.value(out.x);
    if (!std::isfinite(value))
      throw NumericError("projected_gradient: non-finite objective at iterate " +
                         detail::snapshot(out.x));
    out.report.objective_trajectory.push_back(value);
    out.report.iterations = n + 1;
    out.report.kkt_residual = moved / step;
    if (moved / step <= stop.tol) {
      out.report.converged = true;
      break;
    }
  }
  out.report.wall_seconds = clock.seconds();
  return out;
}

// ---------------------------------------------------------------------------
// Log-barrier interior solver
// ---------------------------------------------------------------------------

/// Twice-differentiable scalar function of the solver variables.
/// `add_hessian` accumulates coeff * H(x) into the matrix; leave it empty for
/// linear functions.
struct SmoothFunction {
  std::function<double(const Vec&)> value;
  std::function<void(const Vec&, Vec&)> gradient;  // overwrites the output vector
  std::function<void(const Vec&, double, linalg::Matrix&)> add_hessian;
};

inline SmoothFunction linear_function(Vec coeffs, double offset = 0.0) {
  auto c = std::make_shared<Vec>(std::move(coeffs));
  SmoothFunction f;
  f.value = [c, offset](const Vec& x) { return linalg::dot(*c, x) + offset; };
  f.gradient = [c](const Vec&, Vec& g) { g = *c; };
  return f;
}

/// min objective(x)  s.t.  constraints[k](x) <= 0.
struct ConvexProgram {
  int dim = 0;
  SmoothFunction objective;
  std::vector<SmoothFunction> constraints;
};

struct BarrierOptions {
  double t0 = 1.0;
  double mu = 20.0;
  double t_max = 1e9;
  double newton_tol = 1e-18;  // on half the squared Newton decrement
  int max_newton_per_stage = 120;
  // Stages stop as soon as a centered point certifies this KKT residual.
  // Driving t far beyond 1/kkt_tol only trades accuracy away: the active
  // constraint values sink toward rounding noise and both the extracted
  // multipliers and the representable stationarity degrade with them.
  double kkt_tol = 1e-6;
  // Internal: early exit used by the phase-I wrapper.
  std::function<bool(const Vec&)> early_stop;
};

struct BarrierResult {
  Vec x;
  Vec duals;  // one multiplier per constraint
  SolveReport report;
};

/// KKT residual of a convex program at (x, duals): the largest of the
/// stationarity infinity-norm, constraint violation, complementarity slack
/// and dual infeasibility.
inline double kkt_residual(const ConvexProgram& program, const Vec& x, const Vec& duals) {
  Vec grad(x.size());
  program.objective.gradient(x, grad);
  Vec scratch(x.size());
  double violation = 0.0, complementarity = 0.0, dual_neg = 0.0;
  for (std::size_t k = 0; k < program.constraints.size(); ++k) {
    const double gk = program.constraints[k].value(x);
    violation = std::max(violation, gk);
    complementarity = std::max(complementarity, std::abs(duals[k] * gk));
    dual_neg = std::max(dual_neg, -duals[k]);
    program.constraints[k].gradient(x, scratch);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += duals[k] * scratch[i];
  }
  return std::max({linalg::norm_inf(grad), violation, complementarity, dual_neg});
}

namespace detail {

// Multipliers at a centered point: 1/(t(-g)), then a least-squares fit of the
// stationarity condition over the significant ones, kept only when it lowers
// the residual. Returns the multipliers and the KKT residual they certify.
inline std::pair<Vec, double> extract_duals(const ConvexProgram& program, const Vec& x, double t) {
  const auto m = program.constraints.size();
  const int n = program.dim;
  Vec duals(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) duals[k] = -1.0 / (t * program.constraints[k].value(x));
  double residual = kkt_residual(program, x, duals);

  double max_dual = 0.0;
  for (double d : duals) max_dual = std::max(max_dual, d);
  const double active_threshold = 1e-5 * std::max(1.0, max_dual);
  std::vector<int> active;
  for (std::size_t k = 0; k < m; ++k)
    if (duals[k] > active_threshold) active.push_back(static_cast<int>(k));
  if (!active.empty()) {
    const int ka = static_cast<int>(active.size());
    std::vector<Vec> grads(static_cast<std::size_t>(ka), Vec(static_cast<std::size_t>(n)));
    for (int a = 0; a < ka; ++a)
      program.constraints[static_cast<std::size_t>(active[static_cast<std::size_t>(a)])].gradient(
          x, grads[static_cast<std::size_t>(a)]);
    Vec f0(static_cast<std::size_t>(n));
    program.objective.gradient(x, f0);
    linalg::Matrix ata(ka);
    Vec rhs(static_cast<std::size_t>(ka));
    for (int a = 0; a < ka; ++a) {
      for (int b = 0; b <= a; ++b) {
        const double v =
            linalg::dot(grads[static_cast<std::size_t>(a)], grads[static_cast<std::size_t>(b)]);
        ata(a, b) = v;
        ata(b, a) = v;
      }
      rhs[static_cast<std::size_t>(a)] = -linalg::dot(grads[static_cast<std::size_t>(a)], f0);
    }
    if (auto fitted = linalg::solve_spd(ata, rhs)) {
      Vec refined = duals;
      for (int a = 0; a < ka; ++a)
        refined[static_cast<std::size_t>(active[static_cast<std::size_t>(a)])] =
            std::max(0.0, (*fitted)[static_cast<std::size_t>(a)]);
      const double res = kkt_residual(program, x, refined);
      if (res < residual) {
        duals = std::move(refined);
        residual = res;
      }
    }
  }
  return {std::move(duals), residual};
}

inline bool strictly_feasible(const ConvexProgram& program, const Vec& x) {
  for (const auto& g : program.constraints) {
    const double v = g.value(x);
    if (!(v < 0.0)) return false;  // NaN counts as infeasible
  }
  return true;
}

inline double barrier_value(const ConvexProgram& program, double t, const Vec& x) {
  double psi = t * program.objective.value(x);
  for (const auto& g : program.constraints) {
    const double v = g.value(x);
    if (!(v < 0.0)) return std::numeric_limits<double>::infinity();
    psi -= std::log(-v);
  }
  return psi;
}

}  // namespace detail

/// Interior-point solve of `program` from a starting point. If the start is
/// not strictly feasible a phase-I problem is solved first; if that fails the
/// program is declared infeasible. The result carries the multipliers of the
/// final centering step, so kkt_residual() can be checked directly.
inline BarrierResult barrier_solve(const ConvexProgram& program, Vec x0, BarrierOptions opts = {});

namespace detail {

inline Vec phase_one(const ConvexProgram& program, const Vec& x0, const BarrierOptions& base_opts) {
  // min s  s.t.  g_k(x) - s <= 0, s >= -2; start at s0 = max g + 1.
  const int n = program.dim;
  ConvexProgram aux;
  aux.dim = n + 1;
  {
    Vec c(static_cast<std::size_t>(n) + 1, 0.0);
    c.back() = 1.0;
    aux.objective = linear_function(std::move(c));
  }
  for (const auto& g : program.constraints) {
    SmoothFunction shifted;
    shifted.value = [g](const Vec& xs) {
      Vec x(xs.begin(), xs.end() - 1);
      return g.value(x) - xs.back();
    };
    shifted.gradient = [g, n](const Vec& xs, Vec& grad) {
      Vec x(xs.begin(), xs.end() - 1);
      Vec gx(static_cast<std::size_t>(n));
      g.gradient(x, gx);
      grad.assign(static_cast<std::size_t>(n) + 1, 0.0);
      std::copy(gx.begin(), gx.end(), grad.begin());
      grad.back() = -1.0;
    };
    if (g.add_hessian) {
      shifted.add_hessian = [g, n](const Vec& xs, double coeff, linalg::Matrix& h) {
        // Hessian is zero in s; reuse the x-block. The matrix is one larger,
        // so stage into a dense block copy.
        Vec x(xs.begin(), xs.end() - 1);
        linalg::Matrix hx(n);
        g.add_hessian(x, coeff, hx);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) h(i, j) += hx(i, j);
      };
    }
    aux.constraints.push_back(std::move(shifted));
  }
  {
    Vec c(static_cast<std::size_t>(n) + 1, 0.0);
    c.back() = -1.0;
    aux.constraints.push_back(linear_function(std::move(c), -2.0));  // -s - 2 <= 0
  }

  Vec start(x0);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& g : program.constraints) {
    const double v = g.value(x0);
    if (!std::isfinite(v))
      throw NumericError("phase-I: constraint undefined at the supplied start");
    worst = std::max(worst, v);
  }
  start.push_back(worst + 1.0);

  BarrierOptions opts = base_opts;
  opts.early_stop = [](const Vec& xs) { return xs.back() < -1e-4; };
  BarrierResult r = barrier_solve(aux, std::move(start), opts);
  if (!(r.x.back() < 0.0))
    throw InfeasibleError("problem infeasible: phase-I optimum has violation " +
                          std::to_string(r.x.back()));
  r.x.pop_back();
  return r.x;
}

}  // namespace detail

inline BarrierResult barrier_solve(const ConvexProgram& program, Vec x0, BarrierOptions opts) {
  detail::WallClock clock;
  if (static_cast<int>(x0.size()) != program.dim)
    throw ValidationError("barrier_solve: start dimension mismatch");
  if (!detail::strictly_feasible(program, x0) && !opts.early_stop)
    x0 = detail::phase_one(program, x0, opts);
  if (!detail::strictly_feasible(program, x0))
    throw NumericError("barrier_solve: no strictly feasible start");

  const int n = program.dim;
  const auto m = program.constraints.size();
  BarrierResult out;
  out.x = std::move(x0);

  Vec grad(static_cast<std::size_t>(n)), cgrad(static_cast<std::size_t>(n));
  std::vector<int> nz;
  double t = opts.t0;
  bool stop_early = false;
  Vec best_x, best_duals;
  double best_residual = std::numeric_limits<double>::infinity();

  while (true) {
    for (int it = 0; it < opts.max_newton_per_stage; ++it) {
      // Assemble gradient and Hessian of t*f0 - sum log(-g_k).
      program.objective.gradient(out.x, grad);
      for (double& v : grad) v *= t;
      linalg::Matrix hess(n);
      if (program.objective.add_hessian) program.objective.add_hessian(out.x, t, hess);
      for (const auto& g : program.constraints) {
        const double gv = g.value(out.x);
        const double w = -1.0 / gv;  // gv < 0
        g.gradient(out.x, cgrad);
        nz.clear();
        for (int i = 0; i < n; ++i)
          if (cgrad[static_cast<std::size_t>(i)] != 0.0) {
            nz.push_back(i);
            grad[static_cast<std::size_t>(i)] += w * cgrad[static_cast<std::size_t>(i)];
          }
        for (int i : nz)
          for (int j : nz)
            hess(i, j) += w * w * cgrad[static_cast<std::size_t>(i)] * cgrad[static_cast<std::size_t>(j)];
        if (g.add_hessian) g.add_hessian(out.x, w, hess);
      }
      if (!linalg::all_finite(grad))
        throw NumericError("barrier_solve: non-finite gradient at " + detail::snapshot(out.x));

      Vec rhs(grad);
      for (double& v : rhs) v = -v;
      auto step = linalg::solve_spd(hess, rhs);
      if (!step) throw NumericError("barrier_solve: Newton system unsolvable");
      const double decrement2 = -linalg::dot(grad, *step);
      if (!(decrement2 > 2.0 * opts.newton_tol)) break;

      // Damped phase uses Armijo on the barrier value; once the Newton
      // decrement enters the quadratically convergent region the value test
      // is dominated by rounding, so only strict feasibility is enforced.
      const bool quad_region = std::sqrt(std::max(decrement2, 0.0)) <= 0.25;
      const double slope = -decrement2;
      double s = 1.0;
      const double psi0 = quad_region ? 0.0 : detail::barrier_value(program, t, out.x);
      Vec trial(out.x);
      bool accepted = false;
      for (int bt = 0; bt < 70; ++bt) {
        for (int i = 0; i < n; ++i)
          trial[static_cast<std::size_t>(i)] =
              out.x[static_cast<std::size_t>(i)] + s * (*step)[static_cast<std::size_t>(i)];
        if (quad_region) {
          if (detail::strictly_feasible(program, trial)) {
            accepted = true;
            break;
          }
        } else {
          const double psi = detail::barrier_value(program, t, trial);
          if (psi <= psi0 + 0.25 * s * slope) {
            accepted = true;
            break;
          }
        }
        s *= 0.5;
      }
      if (!accepted) break;  // stalled; current point is the stage answer
      double moved = 0.0;
      for (int i = 0; i < n; ++i)
        moved = std::max(moved, std::abs(trial[static_cast<std::size_t>(i)] -
                                         out.x[static_cast<std::size_t>(i)]));
      out.x = trial;
      out.report.iterations++;
      out.report.objective_trajectory.push_back(program.objective.value(out.x));
      if (opts.early_stop && opts.early_stop(out.x)) {
        stop_early = true;
        break;
      }
      if (moved == 0.0) break;
    }
    if (stop_early) break;
    if (m > 0 && 1.0 / t <= opts.kkt_tol) {
      auto [duals, residual] = detail::extract_duals(program, out.x, t);
      if (residual < best_residual) {
        best_residual = residual;
        best_x = out.x;
        best_duals = std::move(duals);
      }
      if (best_residual <= opts.kkt_tol) break;
    }
    if (t >= opts.t_max) break;
    t = std::min(t * opts.mu, opts.t_max);
  }

  if (!best_x.empty()) {
    out.x = std::move(best_x);
    out.duals = std::move(best_duals);
    out.report.kkt_residual = best_residual;
  } else {
    auto [duals, residual] = detail::extract_duals(program, out.x, t);
    out.duals = std::move(duals);
    out.report.kkt_residual = residual;
  }
  out.report.max_violation = 0.0;  // iterates remain strictly feasible
  out.report.converged = stop_early || out.report.kkt_residual <= opts.kkt_tol;
  out.report.wall_seconds = clock.seconds();
  return out;
}

// ---------------------------------------------------------------------------
// Probability projection
// ---------------------------------------------------------------------------

/// Clamp raw per-link values into [0,1], then proportionally shrink each
/// node's outgoing probabilities so its total stays at most 1 - eps.
inline MacState project_probabilities(const Vec& raw, const Topology& topo,
                                      double eps = kInteriorEps) {
  if (static_cast<int>(raw.size()) != topo.link_count())
    throw ValidationError("project_probabilities: size mismatch");
  MacState state{raw};
  for (double& p : state.link_prob) p = std::clamp(p, 0.0, 1.0);
  const double limit = 1.0 - eps;
  for (int i = 0; i < topo.node_count(); ++i) {
    const double total = state.node_prob(topo, i);
    if (total > limit * (1.0 + 1e-12)) {
      const double scale = limit / total;
      for (int k : topo.out_links(i)) state.link_prob[static_cast<std::size_t>(k)] *= scale;
    }
  }
  return state;
}

}  // namespace alohanum

#endif  // ALOHANUM_CONVEX_CORE_HPP_
