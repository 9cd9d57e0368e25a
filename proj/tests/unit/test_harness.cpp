#include "alohanum/harness.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace {

using namespace alohanum;

std::string temp_path(const std::string& name) {
  return std::string(::testing::TempDir()) + "/" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(ALOHANUM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

TEST(Csv, FixedDecimalNineSignificantDigits) {
  EXPECT_EQ(format_sig9(4.0), "4.00000000");
  EXPECT_EQ(format_sig9(0.00123456789), "0.00123456789");
  EXPECT_EQ(format_sig9(123456789.0), "123456789");
  EXPECT_EQ(format_sig9(-2.5), "-2.50000000");
  EXPECT_EQ(format_sig9(0.0), "0.00000000");
  EXPECT_EQ(format_sig9(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Harness, ResolveNetworkForms) {
  EXPECT_EQ(resolve_network("linear:4").topology.link_count(), 6);
  EXPECT_EQ(resolve_network("star:5").topology.link_count(), 8);
  EXPECT_EQ(resolve_network("sample10").sessions.size(), 4u);
  EXPECT_THROW(resolve_network("linear:1"), ValidationError);
  EXPECT_THROW(resolve_network("linear:x"), ValidationError);
  EXPECT_THROW(resolve_network("/nonexistent/net.json"), IoError);
}

TEST(Harness, MinDcTableForFamilies) {
  CsvTable table = run_min_dc("linear", {4, 8});
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0][0], "linear");
  EXPECT_EQ(table.rows[0][1], "4");
  CsvTable pair = run_min_dc("linear:2", {});
  EXPECT_NEAR(std::stod(pair.rows[0][2]), 4.0, 1e-3);
  EXPECT_THROW(run_min_dc("linear", {}), ValidationError);
}

TEST(Harness, MacTradeoffDominanceAndInfeasibleRows) {
  Network net = build_sample10();
  CsvTable table = run_mac_tradeoff(net.topology, {5.0}, {0.1}, {40.0, 100.0, 1000.0});
  ASSERT_EQ(table.rows.size(), 3u);
  double prev_energy = std::numeric_limits<double>::infinity();
  double prev_utility = -std::numeric_limits<double>::infinity();
  for (const auto& row : table.rows) {
    EXPECT_EQ(row.back(), "ok");
    const double energy = std::stod(row[3]);
    const double utility = std::stod(row[4]);
    EXPECT_LE(energy, prev_energy + 1e-9);   // relaxing the bound saves energy
    EXPECT_GE(utility, prev_utility - 1e-9); // and buys utility
    prev_energy = energy;
    prev_utility = utility;
  }

  CsvTable infeasible = run_mac_tradeoff(build_linear(2), {5.0}, {0.1}, {2.0, 50.0});
  ASSERT_EQ(infeasible.rows.size(), 2u);
  EXPECT_EQ(infeasible.rows[0].back(), "infeasible");
  EXPECT_EQ(infeasible.rows[1].back(), "ok");
}

TEST(Harness, ZeroEnergyWeightMaximizesEnergy) {
  Network net = build_sample10();
  CsvTable table = run_mac_tradeoff(net.topology, {0.0, 5.0}, {0.1}, {100.0});
  ASSERT_EQ(table.rows.size(), 2u);
  const double energy_free = std::stod(table.rows[0][3]);  // lambda1 = 0 sorts first
  const double energy_paid = std::stod(table.rows[1][3]);
  EXPECT_GT(energy_free, energy_paid);
}

TEST(Harness, XlayerTradeoffPlateau) {
  Network net = build_sample10();
  CsvTable table = run_xlayer_tradeoff(net, {0.005}, {10.0}, {100.0, 800.0, 1600.0});
  ASSERT_EQ(table.rows.size(), 3u);
  const double u100 = std::stod(table.rows[0][4]);
  const double u800 = std::stod(table.rows[1][4]);
  const double u1600 = std::stod(table.rows[2][4]);
  EXPECT_LT(u1600 - u800, u800 - u100);
  EXPECT_THROW(run_xlayer_tradeoff(Network{build_linear(2), {}}, {0.1}, {1.0}, {100.0}),
               ValidationError);
}

TEST(Harness, ConvergeTraceReachesTarget) {
  Network net = build_sample10();
  ConvergeResult result =
      run_converge(net, ConvergeAlgo::kMacDistributed, 5.0, 0.1, 100.0,
                   default_schedule(ConvergeAlgo::kMacDistributed), 200);
  ASSERT_EQ(result.table.rows.size(), 200u);
  EXPECT_EQ(result.iters_to_target, 10);
  EXPECT_LT(result.final_error, 0.01);
  EXPECT_FALSE(result.diverged);
}

TEST(Harness, ConvergeZeroIterationBudgetEmitsInitialError) {
  Network net = build_sample10();
  ConvergeResult result =
      run_converge(net, ConvergeAlgo::kMacDistributed, 5.0, 0.1, 100.0,
                   default_schedule(ConvergeAlgo::kMacDistributed), 0);
  ASSERT_EQ(result.table.rows.size(), 1u);
  EXPECT_EQ(result.table.rows[0][0], "0");
  EXPECT_GT(std::stod(result.table.rows[0][1]), 1.0);  // far from optimal at the start
}

TEST(Harness, ConvergeDivergenceTrailerRow) {
  Network net = build_sample10();
  StepSchedule s = default_schedule(ConvergeAlgo::kXlayerGradient);
  s.prob *= 10.0;
  ConvergeResult result =
      run_converge(net, ConvergeAlgo::kXlayerGradient, 0.005, 10.0, 100.0, s, 30000);
  EXPECT_TRUE(result.diverged);
  ASSERT_FALSE(result.table.rows.empty());
  EXPECT_EQ(result.table.rows.back()[0], "-1");
  EXPECT_NE(result.table.rows.back().back().find("diverged"), std::string::npos);
}

TEST(Harness, CompareSuboptZeroRateWeight) {
  CsvTable table = run_compare_subopt(build_linear(2), {5.0}, {0.0}, 100.0);
  ASSERT_EQ(table.rows.size(), 1u);
  const double opt_cost = std::stod(table.rows[0][2]);
  const double sub_cost = std::stod(table.rows[0][3]);
  // Both drive rates to the floor; the costs only differ by the residual
  // energy the optimal solve needs to keep the bound satisfiable.
  EXPECT_NEAR(opt_cost, sub_cost, 0.2);
  EXPECT_GT(std::stoi(table.rows[0][5]), 0);  // the rule flags the dead links
}

TEST(Harness, SimulateTableShapeAndDeterminism) {
  Topology pair = build_linear(2);
  SimulateSpec spec;
  spec.rho = {0.5};
  spec.horizon = 30000;
  spec.warmup = 1000;
  spec.seeds = {7, 8};
  CsvTable a = run_simulate(pair, spec);
  CsvTable b = run_simulate(pair, spec);
  ASSERT_EQ(a.rows.size(), 6u);  // (2 links + summary) x 2 seeds
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.rows[2][2], "-1");  // per-seed summary marker
  EXPECT_THROW(run_simulate(pair, SimulateSpec{.rho = {}}), ValidationError);
  EXPECT_THROW(run_simulate(pair, SimulateSpec{.rho = {1.5}}), ValidationError);
}

TEST(Harness, SimulatedDelaysAtSolverPointRespectBound) {
  Network net = build_sample10();
  Weights w{5.0, 0.1, 100.0};
  auto sol = solve_mac_centralized(net.topology, w);
  SimConfig config{sol.mac, sol.rates.rate, 400000, 5000, 17};
  SimStats stats = simulate(net.topology, config);
  for (int k = 0; k < net.topology.link_count(); ++k) {
    const auto& ls = stats.links[static_cast<std::size_t>(k)];
    ASSERT_GT(ls.delivered, 100);
    EXPECT_LE(ls.mean_delay, 1.1 * w.delay_bound);
  }
}

TEST(Cli, ExitCodesPerFailureClass) {
  EXPECT_EQ(run_cli("min-dc --network linear:4 --out " + temp_path("ok.csv")), 0);
  EXPECT_EQ(run_cli("min-dc --network linear:zz --out " + temp_path("bad.csv")), 5);
  EXPECT_EQ(run_cli("min-dc --network /missing/net.json --out " + temp_path("io.csv")), 4);
  EXPECT_EQ(run_cli("converge --network linear:2 --algorithm mac-dist --dc 2 --out " +
                    temp_path("inf.csv")),
            2);  // bound below the feasibility threshold
  EXPECT_EQ(run_cli("converge --network sample10 --algorithm xlayer-grad --lambda1 0.005 "
                    "--lambda2 10 --ds 100 --step-phi 0.0001 --iters 30000 --out " +
                    temp_path("div.csv")),
            3);
  EXPECT_NE(run_cli("min-dc --network linear:4"), 0);  // --out required
}

TEST(Cli, TradeoffKeepsGoingPastInfeasibleRows) {
  const std::string out = temp_path("trade_inf.csv");
  EXPECT_EQ(run_cli("tradeoff --network linear:2 --problem mac --lambda1 5 --lambda2 0.1 "
                    "--dc 2 50 --out " + out),
            0);
  const std::string text = slurp(out);
  EXPECT_NE(text.find("infeasible"), std::string::npos);
  EXPECT_NE(text.find("ok"), std::string::npos);
}

TEST(Cli, OutDirEnvironmentJoinsBareNames) {
  const std::string dir = temp_path("outdir");
  std::system(("mkdir -p " + dir).c_str());
  EXPECT_EQ(run_cli("min-dc --network linear:2 --out env_smoke.csv",
                    "ALOHANUM_OUT_DIR=" + dir),
            0);
  EXPECT_NE(slurp(dir + "/env_smoke.csv").find("min_dc"), std::string::npos);
  EXPECT_FALSE(slurp(dir + "/env_smoke.csv.manifest.json").empty());
}

TEST(Cli, ManifestRecordsRunConfiguration) {
  const std::string out = temp_path("mani.csv");
  ASSERT_EQ(run_cli("simulate --network linear:2 --rho 0.3 --horizon 20000 --seed 3 4 --out " + out),
            0);
  const std::string manifest = slurp(out + ".manifest.json");
  EXPECT_NE(manifest.find("\"schema_version\": 1"), std::string::npos);
  EXPECT_NE(manifest.find("\"seeds\""), std::string::npos);
  EXPECT_NE(manifest.find("\"command\": \"simulate\""), std::string::npos);
}

}  // namespace
