// Copyright 2026 The flex Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// flex: command-line front end.
//
// Exit codes: 0 ok, 2 validation failure, 3 degenerate aggregation, 4 I/O or
// parse failure.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "flex/aggregation.h"
#include "flex/errors.h"
#include "flex/fleet.h"
#include "flex/io.h"
#include "flex/oracle.h"
#include "flex/pipeline.h"

namespace {

using namespace flex;

constexpr int kExitValidation = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitIo = 4;

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError:
    case ErrorCode::kParseError:
    case ErrorCode::kLengthMismatch:
      return kExitIo;
    case ErrorCode::kEmptyOrDegenerate:
      return kExitDegenerate;
    default:
      return kExitValidation;
  }
}

void Print(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << "\n"; }

Eigen::VectorXd LoadProfile(const std::string& path, int m) {
  std::istringstream in(ReadFile(path));
  return ReadProfileCsv(in, m);
}

template <typename Writer>
void WriteOrPrint(const std::string& path, Writer&& writer) {
  std::ostringstream out;
  writer(out);
  if (path.empty() || path == "-") {
    std::cout << out.str();
  } else {
    WriteFile(path, out.str());
  }
}

PriceUnit ParseUnit(const std::string& s) {
  if (s == "mwh") return PriceUnit::kPerMwh;
  if (s == "kwh") return PriceUnit::kPerKwh;
  throw Error(ErrorCode::kParseError, "price unit must be mwh or kwh");
}

struct AggregateArgs {
  int group_size = 10;
  int fanout = 11;
  std::string policy = "window-sorted";
  std::uint64_t seed = 42;
  int workers = 1;
  std::string debug_dir;

  void Register(CLI::App* cmd, bool with_seed = true) {
    cmd->add_option("--group-size", group_size, "Tasks per stage-1 group")->capture_default_str();
    cmd->add_option("--fanout", fanout, "Units per node in later stages")->capture_default_str();
    cmd->add_option("--policy", policy, "random | window-sorted")->capture_default_str();
    if (with_seed) cmd->add_option("--seed", seed, "Seed of the random partition")->capture_default_str();
    cmd->add_option("--workers", workers, "Parallel LP solves (FLEX_WORKERS overrides)")
        ->capture_default_str();
    cmd->add_option("--debug-dir", debug_dir, "Dump every lifted system and homothet LP here");
  }

  AggregateConfig Config() const {
    AggregateConfig c;
    c.group_size = group_size;
    c.fanout = fanout;
    c.policy = ParsePartitionPolicy(policy);
    c.seed = seed;
    c.workers = workers;
    if (const char* env = std::getenv("FLEX_WORKERS")) {
      try {
        c.workers = std::stoi(env);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kValidationError, "FLEX_WORKERS must be an integer");
      }
    }
    c.debug_dir = debug_dir;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("flex"));
  spdlog::set_level(spdlog::level::warn);

  CLI::App app{"Virtual battery aggregation of deferrable loads"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  // gen-fleet
  int n = 100, m = 24;
  std::uint64_t seed = 42;
  double delta_h = 1.0;
  std::string out;
  auto* gen = app.add_subcommand("gen-fleet", "Generate a seeded fleet");
  gen->add_option("--n", n, "Number of tasks")->capture_default_str();
  gen->add_option("--m", m, "Slots in the horizon")->capture_default_str();
  gen->add_option("--seed", seed)->capture_default_str();
  gen->add_option("--delta-h", delta_h, "Slot length in hours")->capture_default_str();
  gen->add_option("--out", out, "Fleet JSON")->required();

  // aggregate
  std::string fleet_path, tree_path = "tree.json", battery_path = "battery.json", bounds_path;
  bool with_certificate = false;
  AggregateArgs agg;
  auto* aggregate = app.add_subcommand("aggregate", "Aggregate a fleet into a virtual battery");
  aggregate->add_option("--fleet", fleet_path)->required();
  agg.Register(aggregate);
  aggregate->add_option("--out", tree_path, "Aggregation tree JSON")->capture_default_str();
  aggregate->add_option("--battery", battery_path, "Battery JSON")->capture_default_str();
  aggregate->add_option("--bounds", bounds_path, "Per-slot bounds CSV");
  aggregate->add_flag("--with-certificate", with_certificate, "Keep the Farkas multipliers G");

  // arbitrage
  std::string prices_path, unit = "mwh", profile_out, report_out, arb_fleet;
  auto* arbitrage = app.add_subcommand("arbitrage", "Cheapest profile in a battery");
  arbitrage->add_option("--battery", battery_path)->required();
  arbitrage->add_option("--prices", prices_path, "CSV slot,price")->required();
  arbitrage->add_option("--price-unit", unit, "mwh | kwh")->capture_default_str();
  arbitrage->add_option("--fleet", arb_fleet, "Fleet for the immediate-charging baseline");
  arbitrage->add_option("--out", profile_out, "Profile CSV (default stdout)");
  arbitrage->add_option("--report", report_out, "Summary JSON (default stdout)");

  // dispatch
  std::string profile_path, schedule_out;
  double dispatch_tol = 1e-5;
  auto* dispatch = app.add_subcommand("dispatch", "Split an aggregate profile into task schedules");
  dispatch->add_option("--tree", tree_path)->required();
  dispatch->add_option("--profile", profile_path)->required();
  dispatch->add_option("--out", schedule_out, "Schedule CSV (default stdout)");
  dispatch->add_option("--tol", dispatch_tol, "Membership and validation tolerance (kW)")
      ->capture_default_str();

  // verify
  std::string schedule_path;
  double verify_tol = 1e-6;
  auto* verify = app.add_subcommand("verify", "Check a schedule against a fleet and profile");
  verify->add_option("--fleet", fleet_path)->required();
  verify->add_option("--schedule", schedule_path)->required();
  verify->add_option("--profile", profile_path)->required();
  verify->add_option("--tol", verify_tol)->capture_default_str();

  // oracle
  std::string method = "lp";
  bool brute_force = false;
  auto* oracle = app.add_subcommand("oracle", "Is an aggregate profile adequate for a fleet?");
  oracle->add_option("--fleet", fleet_path)->required();
  oracle->add_option("--profile", profile_path)->required();
  oracle->add_option("--method", method, "lp | thm1")->capture_default_str();
  oracle->add_flag("--brute-force", brute_force, "thm1: enumerate every task subset");

  // demo
  std::string demo_dir = "demo";
  AggregateArgs demo_agg;
  auto* demo = app.add_subcommand("demo", "Seeded end-to-end run");
  demo->add_option("--seed", seed)->capture_default_str();
  demo->add_option("--n", n)->capture_default_str();
  demo->add_option("--m", m)->capture_default_str();
  demo->add_option("--out", demo_dir, "Output directory")->capture_default_str();
  demo->add_option("--prices", prices_path, "CSV slot,price in $/MWh (default: synthetic)");
  demo_agg.Register(demo, /*with_seed=*/false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }
  if (verbose) spdlog::set_level(spdlog::level::info);

  try {
    if (*gen) {
      const Fleet fleet = GenerateFleet(n, m, seed, [&] {
        GenProfile p;
        p.delta_h = delta_h;
        return p;
      }());
      SaveFleet(fleet, out);
      return 0;
    }
    if (*aggregate) {
      const Fleet fleet = LoadFleet(fleet_path);
      const AggregationTree tree = Aggregate(fleet, agg.Config());
      WriteJsonFile(tree_path, tree.ToJson(with_certificate));
      WriteJsonFile(battery_path, BatteryToJson(tree.battery));
      if (!bounds_path.empty()) {
        WriteOrPrint(bounds_path, [&](std::ostream& o) { WriteBoundsCsv(tree.battery, o); });
      }
      spdlog::info("{} groups, {} cohorts, {} stages, lambda {}", tree.groups, tree.cohorts,
                   tree.stages, tree.nodes[tree.root].homothet.lambda);
      return 0;
    }
    if (*arbitrage) {
      const VirtualBattery battery = BatteryFromJson(ReadJsonFile(battery_path));
      const PriceSeries prices = LoadPrices(prices_path, ParseUnit(unit), battery.m());
      nlohmann::ordered_json summary;
      ArbitrageResult r;
      if (arb_fleet.empty()) {
        r = Arbitrage(battery, prices);
      } else {
        r = CompareWithBaseline(LoadFleet(arb_fleet), battery, prices);
      }
      summary["energy_kwh"] = battery.delta_h * r.z.sum();
      summary["cost"] = r.cost;
      if (!arb_fleet.empty()) {
        summary["baseline_cost"] = r.baseline_cost;
        summary["savings_fraction"] = r.savings_fraction;
      }
      WriteOrPrint(profile_out, [&](std::ostream& o) { WriteProfileCsv(r.z, o); });
      if (report_out.empty()) {
        if (!profile_out.empty()) Print(summary);
      } else {
        WriteJsonFile(report_out, summary);
      }
      return 0;
    }
    if (*dispatch) {
      const AggregationTree tree = AggregationTree::FromJson(ReadJsonFile(tree_path));
      const Eigen::VectorXd u = LoadProfile(profile_path, tree.fleet.m);
      const DispatchResult d = Dispatch(tree, u, dispatch_tol);
      WriteOrPrint(schedule_out, [&](std::ostream& o) { WriteScheduleCsv(tree.fleet, d.schedule, o); });
      return 0;
    }
    if (*verify) {
      const Fleet fleet = LoadFleet(fleet_path);
      std::istringstream in(ReadFile(schedule_path));
      const Eigen::MatrixXd schedule = ReadScheduleCsv(fleet, in);
      const Eigen::VectorXd u = LoadProfile(profile_path, fleet.m);
      const ScheduleReport report = ValidateSchedule(fleet, schedule, u, verify_tol);
      Print(ReportToJson(report, fleet));
      return report.ok() ? 0 : kExitValidation;
    }
    if (*oracle) {
      const Fleet fleet = LoadFleet(fleet_path);
      const Eigen::VectorXd u = LoadProfile(profile_path, fleet.m);
      AdequacyVerdict v;
      if (method == "lp") {
        v = AdequacyLp(fleet, u);
      } else if (method == "thm1") {
        v = AdequacySubsets(fleet, u, brute_force ? SubsetSearch::kBruteForce : SubsetSearch::kGreedy);
      } else {
        throw Error(ErrorCode::kParseError, "method must be lp or thm1");
      }
      Print(VerdictToJson(v, fleet));
      return v.adequate ? 0 : kExitValidation;
    }
    if (*demo) {
      const Fleet fleet = GenerateFleet(n, m, seed);
      const PriceSeries prices =
          prices_path.empty() ? TwoValleyPrices(m) : LoadPrices(prices_path, PriceUnit::kPerMwh, m);
      std::filesystem::create_directories(demo_dir);
      const std::filesystem::path dir(demo_dir);
      SaveFleet(fleet, (dir / "fleet.json").string());
      WriteOrPrint((dir / "prices.csv").string(),
                   [&](std::ostream& o) { WritePricesCsv(prices, PriceUnit::kPerMwh, o); });
      AggregateConfig config = demo_agg.Config();
      config.seed = seed;
      const PipelineReport r = RunPipeline(fleet, prices, config, demo_dir);
      Print(r.report);
      return r.ok() ? 0 : kExitValidation;
    }
  } catch (const Error& e) {
    std::cerr << "flex: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "flex: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
