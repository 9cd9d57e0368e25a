// Experiment runner: feasibility sweeps, tradeoff curves, convergence traces,
// optimal-vs-suboptimal comparison and simulator validation, all emitted as
// CSV files with a JSON manifest sidecar. Exit codes: 0 ok, 2 infeasible,
// 3 divergence, 4 I/O, 5 validation, 1 anything else.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alohanum/harness.hpp"

namespace {

using namespace alohanum;

std::string resolve_out(const std::string& out) {
  if (out.empty()) throw ValidationError("--out is required");
  const char* dir = std::getenv("ALOHANUM_OUT_DIR");
  if (dir != nullptr && *dir != '\0' && out.find('/') == std::string::npos)
    return std::string(dir) + "/" + out;
  return out;
}

nlohmann::ordered_json base_config(const std::string& network, const std::string& out) {
  nlohmann::ordered_json j;
  j["network"] = network;
  j["out"] = out;
  return j;
}

struct CliOptions {
  std::string network = "sample10";
  std::string out;
  std::vector<double> lambda1{5.0};
  std::vector<double> lambda2{0.1};
  std::vector<double> dc;
  std::vector<double> ds;
  std::vector<int> sizes;
  std::vector<double> rho{0.5};
  std::vector<std::uint64_t> seeds{1};
  std::string problem = "mac";
  std::string algorithm = "mac-dist";
  std::string probs = "mindc";
  double step_alpha = -1.0;  // negative: use the per-algorithm default
  double step_beta = -1.0;
  double step_phi = -1.0;
  int iters = 4000;
  std::int64_t horizon = 1000000;
  std::int64_t warmup = 10000;
  double tolerance = 0.01;
};

StepSchedule schedule_for(const CliOptions& opt, ConvergeAlgo algo) {
  StepSchedule s = default_schedule(algo);
  if (opt.step_alpha > 0.0) s.link_dual = opt.step_alpha;
  if (opt.step_beta > 0.0) s.session_dual = opt.step_beta;
  if (opt.step_phi > 0.0) s.prob = opt.step_phi;
  return s;
}

int run(int argc, char** argv) {
  CLI::App app{"delay-constrained utility maximization experiments"};
  app.require_subcommand(1);
  CliOptions opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--network", opt.network, "file | linear:N | star:N | sample10");
    cmd->add_option("--out", opt.out, "output CSV path (ALOHANUM_OUT_DIR joins bare names)")
        ->required();
  };

  CLI::App* min_dc_cmd = app.add_subcommand("min-dc", "smallest feasible link delay bound");
  add_common(min_dc_cmd);
  min_dc_cmd->add_option("--sizes", opt.sizes, "node counts for linear/star families");

  CLI::App* tradeoff_cmd = app.add_subcommand("tradeoff", "energy vs rate-utility sweep");
  add_common(tradeoff_cmd);
  tradeoff_cmd->add_option("--problem", opt.problem, "mac | xlayer");
  tradeoff_cmd->add_option("--lambda1", opt.lambda1, "energy weights");
  tradeoff_cmd->add_option("--lambda2", opt.lambda2, "rate weights");
  tradeoff_cmd->add_option("--dc", opt.dc, "link delay bounds (mac)");
  tradeoff_cmd->add_option("--ds", opt.ds, "session delay bounds (xlayer)");

  CLI::App* converge_cmd = app.add_subcommand("converge", "distributed algorithm error trace");
  add_common(converge_cmd);
  converge_cmd->add_option("--algorithm", opt.algorithm, "mac-dist | xlayer-grad | xlayer-newton");
  converge_cmd->add_option("--lambda1", opt.lambda1, "energy weight (first value used)");
  converge_cmd->add_option("--lambda2", opt.lambda2, "rate weight (first value used)");
  converge_cmd->add_option("--dc", opt.dc, "link delay bound (mac-dist)");
  converge_cmd->add_option("--ds", opt.ds, "session delay bound (xlayer)");
  converge_cmd->add_option("--step-alpha", opt.step_alpha, "link dual step");
  converge_cmd->add_option("--step-beta", opt.step_beta, "session dual step");
  converge_cmd->add_option("--step-phi", opt.step_phi, "probability step");
  converge_cmd->add_option("--iters", opt.iters, "iteration budget");
  converge_cmd->add_option("--tolerance", opt.tolerance, "target relative error");

  CLI::App* subopt_cmd = app.add_subcommand("compare-subopt", "optimal vs non-iterative rule");
  add_common(subopt_cmd);
  subopt_cmd->add_option("--lambda1", opt.lambda1, "energy weights");
  subopt_cmd->add_option("--lambda2", opt.lambda2, "rate weights");
  subopt_cmd->add_option("--dc", opt.dc, "link delay bound (first value used)");

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "empirical vs analytic link model");
  add_common(simulate_cmd);
  simulate_cmd->add_option("--probs", opt.probs, "mindc | mac | file:<path>");
  simulate_cmd->add_option("--lambda1", opt.lambda1, "energy weight for --probs mac");
  simulate_cmd->add_option("--lambda2", opt.lambda2, "rate weight for --probs mac");
  simulate_cmd->add_option("--dc", opt.dc, "delay bound for --probs mac");
  simulate_cmd->add_option("--rho", opt.rho, "loads as fractions of link throughput");
  simulate_cmd->add_option("--seed", opt.seeds, "simulation seeds");
  simulate_cmd->add_option("--horizon", opt.horizon, "slots per run");
  simulate_cmd->add_option("--warmup", opt.warmup, "slots excluded from statistics");

  CLI11_PARSE(app, argc, argv);
  const std::string out = resolve_out(opt.out);

  if (min_dc_cmd->parsed()) {
    CsvTable table = run_min_dc(opt.network, opt.sizes);
    table.write(out);
    auto config = base_config(opt.network, out);
    config["sizes"] = opt.sizes;
    write_manifest(out, "min-dc", config);
    return 0;
  }

  if (tradeoff_cmd->parsed()) {
    Network net = resolve_network(opt.network);
    const bool xlayer = opt.problem == "xlayer";
    if (!xlayer && opt.problem != "mac")
      throw ValidationError("tradeoff: --problem must be mac or xlayer");
    const std::vector<double>& bounds = xlayer ? opt.ds : opt.dc;
    if (bounds.empty())
      throw ValidationError(xlayer ? "tradeoff: need --ds" : "tradeoff: need --dc");
    CsvTable table = xlayer ? run_xlayer_tradeoff(net, opt.lambda1, opt.lambda2, bounds)
                            : run_mac_tradeoff(net.topology, opt.lambda1, opt.lambda2, bounds);
    table.write(out);
    auto config = base_config(opt.network, out);
    config["problem"] = opt.problem;
    config["lambda1"] = opt.lambda1;
    config["lambda2"] = opt.lambda2;
    config["bounds"] = bounds;
    write_manifest(out, "tradeoff", config);
    return 0;
  }

  if (converge_cmd->parsed()) {
    Network net = resolve_network(opt.network);
    const ConvergeAlgo algo = parse_converge_algo(opt.algorithm);
    const std::vector<double>& bounds = algo == ConvergeAlgo::kMacDistributed ? opt.dc : opt.ds;
    if (bounds.empty())
      throw ValidationError(algo == ConvergeAlgo::kMacDistributed ? "converge: need --dc"
                                                                  : "converge: need --ds");
    const StepSchedule schedule = schedule_for(opt, algo);
    ConvergeResult result = run_converge(net, algo, opt.lambda1.front(), opt.lambda2.front(),
                                         bounds.front(), schedule, opt.iters, opt.tolerance);
    result.table.write(out);
    auto config = base_config(opt.network, out);
    config["algorithm"] = opt.algorithm;
    config["lambda1"] = opt.lambda1.front();
    config["lambda2"] = opt.lambda2.front();
    config["bound"] = bounds.front();
    config["step_alpha"] = schedule.link_dual;
    config["step_beta"] = schedule.session_dual;
    config["step_phi"] = schedule.prob;
    config["iters"] = opt.iters;
    config["iters_to_target"] = result.iters_to_target;
    config["final_error"] = result.final_error;
    write_manifest(out, "converge", config);
    if (result.diverged) return 3;
    return 0;
  }

  if (subopt_cmd->parsed()) {
    Network net = resolve_network(opt.network);
    if (opt.dc.empty()) throw ValidationError("compare-subopt: need --dc");
    CsvTable table = run_compare_subopt(net.topology, opt.lambda1, opt.lambda2, opt.dc.front());
    table.write(out);
    auto config = base_config(opt.network, out);
    config["lambda1"] = opt.lambda1;
    config["lambda2"] = opt.lambda2;
    config["dc"] = opt.dc.front();
    write_manifest(out, "compare-subopt", config);
    return 0;
  }

  if (simulate_cmd->parsed()) {
    Network net = resolve_network(opt.network);
    SimulateSpec spec;
    spec.prob_source = opt.probs;
    spec.lambda1 = opt.lambda1.front();
    spec.lambda2 = opt.lambda2.front();
    spec.delay_bound = opt.dc.empty() ? 100.0 : opt.dc.front();
    spec.rho = opt.rho;
    spec.horizon = opt.horizon;
    spec.warmup = opt.warmup;
    spec.seeds = opt.seeds;
    CsvTable table = run_simulate(net.topology, spec);
    table.write(out);
    auto config = base_config(opt.network, out);
    config["probs"] = opt.probs;
    config["rho"] = opt.rho;
    config["horizon"] = opt.horizon;
    config["warmup"] = opt.warmup;
    config["seeds"] = opt.seeds;
    write_manifest(out, "simulate", config);
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const alohanum::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 2;
  } catch (const alohanum::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 3;
  } catch (const alohanum::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const alohanum::InstabilityError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 5;
  } catch (const alohanum::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
