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

#include "flex/pipeline.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flex/errors.h"
#include "flex/io.h"
#include "flex/lp.h"
#include "flex/oracle.h"

namespace flex {
namespace {

using Eigen::VectorXd;

// Re-raises with the pipeline stage in front of the message.
template <typename Fn>
auto Stage(const char* label, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    std::string what = e.what();
    const std::string prefix = std::string(ErrorCodeName(e.code())) + ": ";
    if (what.rfind(prefix, 0) == 0) what = what.substr(prefix.size());
    throw Error(e.code(), std::string(label) + ": " + what);
  }
}

double Bump(double h, double center, double width) {
  const double x = (h - center) / width;
  return std::exp(-x * x);
}

template <typename Writer>
void WriteWith(const std::string& path, Writer&& writer) {
  std::ostringstream out;
  writer(out);
  WriteFile(path, out.str());
}

}  // namespace

PriceSeries LoadPrices(const std::string& path, PriceUnit unit, int m) {
  std::istringstream in(ReadFile(path));
  auto rows = ReadCsv(in);
  if (!rows.empty() && !rows.front().empty()) {
    try {
      ParseNumber(rows.front().front(), "");
    } catch (const Error&) {
      rows.erase(rows.begin());  // header
    }
  }
  if (m >= 0 && static_cast<int>(rows.size()) != m) {
    throw Error(ErrorCode::kLengthMismatch, path + ": " + std::to_string(rows.size()) +
                                                " price rows for a horizon of " + std::to_string(m));
  }
  PriceSeries out;
  out.source = path;
  out.prices.resize(static_cast<Eigen::Index>(rows.size()));
  const double scale = unit == PriceUnit::kPerMwh ? 1e-3 : 1.0;
  for (size_t r = 0; r < rows.size(); ++r) {
    const std::string where = path + " row " + std::to_string(r + 1);
    if (rows[r].size() != 2) throw Error(ErrorCode::kParseError, where + ": expected slot,price");
    const double slot = ParseNumber(rows[r][0], where);
    if (slot != static_cast<double>(r + 1)) {
      throw Error(ErrorCode::kParseError, where + ": slots must run 1..m in order");
    }
    out.prices[static_cast<Eigen::Index>(r)] = scale * ParseNumber(rows[r][1], where);
  }
  return out;
}

void WritePricesCsv(const PriceSeries& prices, PriceUnit unit, std::ostream& out) {
  const double scale = unit == PriceUnit::kPerMwh ? 1e3 : 1.0;
  out << "slot,price\n";
  for (int t = 0; t < prices.prices.size(); ++t) {
    out << (t + 1) << ',' << Fixed6(scale * prices.prices[t]) << '\n';
  }
}

PriceSeries TwoValleyPrices(int m) {
  PriceSeries out;
  out.source = "two-valley synthetic";
  out.prices.resize(m);
  for (int t = 0; t < m; ++t) {
    const double h = 24.0 * t / m;  // hours after noon
    const double mwh = 35.0 + 15.0 * Bump(h, 7.0, 2.5) - 18.0 * Bump(h, 15.0, 2.5) -
                       8.0 * Bump(h, 22.0, 1.5);
    out.prices[t] = mwh / 1000.0;
  }
  return out;
}

ArbitrageResult Arbitrage(const VirtualBattery& battery, const PriceSeries& prices) {
  const int m = battery.m();
  if (prices.prices.size() != m) {
    throw Error(ErrorCode::kLengthMismatch, "price series and battery lengths differ");
  }
  try {
    battery.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kEmptyBattery, e.what());
  }
  lp::LpBuilder b;
  const int z = b.AddVariables(m);
  std::vector<lp::LpBuilder::Term> energy;
  for (int t = 0; t < m; ++t) {
    b.SetBounds(z + t, battery.p_low[t], battery.p_high[t]);
    b.SetObjective(z + t, battery.delta_h * prices.prices[t]);
    energy.push_back({z + t, battery.delta_h});
  }
  b.AddLessEqual(energy, battery.e_high);
  for (auto& term : energy) term.coeff = -term.coeff;
  b.AddLessEqual(energy, -battery.e_low);
  const lp::LpSolution sol = lp::SolveLp(b.Build());
  if (sol.status != lp::LpStatus::kOptimal) {
    throw Error(ErrorCode::kEmptyBattery,
                std::string("arbitrage LP ended with status ") + lp::LpStatusName(sol.status));
  }
  ArbitrageResult out;
  out.z = sol.x;
  out.cost = sol.objective_value;
  return out;
}

VectorXd BaselineImmediate(const Fleet& fleet, double target_energy) {
  double lo = 0.0, hi = 0.0;
  for (const auto& t : fleet.tasks) {
    lo += t.e_low;
    hi += t.e_high;
  }
  const double tol = 1e-9 * (1.0 + std::abs(hi));
  if (target_energy < lo - tol || target_energy > hi + tol) {
    throw Error(ErrorCode::kTargetOutOfRange,
                "target energy " + std::to_string(target_energy) + " kWh outside [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  const double theta = hi > lo ? std::clamp((target_energy - lo) / (hi - lo), 0.0, 1.0) : 0.0;
  VectorXd u = VectorXd::Zero(fleet.m);
  for (const auto& t : fleet.tasks) {
    double left = t.e_low + theta * (t.e_high - t.e_low);
    for (int s = t.a - 1; s < t.d && left > 0.0; ++s) {
      const double rate = std::min(t.p, left / fleet.delta_h);
      u[s] += rate;
      left -= rate * fleet.delta_h;
    }
  }
  return u;
}

ArbitrageResult CompareWithBaseline(const Fleet& fleet, const VirtualBattery& battery,
                                    const PriceSeries& prices) {
  ArbitrageResult out = Arbitrage(battery, prices);
  out.baseline_profile = BaselineImmediate(fleet, battery.delta_h * out.z.sum());
  out.baseline_cost = battery.delta_h * prices.prices.dot(out.baseline_profile);
  out.savings_fraction = out.baseline_cost != 0.0
                             ? (out.baseline_cost - out.cost) / std::abs(out.baseline_cost)
                             : 0.0;
  return out;
}

PipelineReport RunPipeline(const Fleet& fleet, const PriceSeries& prices,
                           const AggregateConfig& config, const std::string& out_dir) {
  PipelineReport r;
  r.tree = Stage("aggregate", [&] { return Aggregate(fleet, config); });
  r.arbitrage = Stage("arbitrage", [&] { return CompareWithBaseline(fleet, r.tree.battery, prices); });
  const VectorXd& z = r.arbitrage.z;
  r.schedule = Stage("dispatch", [&] { return Dispatch(r.tree, z).schedule; });
  const ScheduleReport check = ValidateSchedule(fleet, r.schedule, z, 1e-6);
  r.schedule_valid = check.ok();
  r.schedule_max_violation = check.max_violation;
  r.adequate = Stage("verify", [&] { return AdequacyLp(fleet, z).adequate; });

  double e_low = 0.0, e_high = 0.0;
  for (const auto& t : fleet.tasks) {
    e_low += t.e_low;
    e_high += t.e_high;
  }
  nlohmann::ordered_json& j = r.report;
  j["fleet"] = {{"tasks", fleet.size()}, {"m", fleet.m}, {"delta_h", fleet.delta_h},
                {"e_low_kwh", e_low}, {"e_high_kwh", e_high}};
  j["aggregation"] = {{"groups", r.tree.groups},
                      {"cohorts", r.tree.cohorts},
                      {"stages", r.tree.stages},
                      {"group_size", config.group_size},
                      {"fanout", config.fanout},
                      {"policy", PartitionPolicyName(config.policy)},
                      {"root_lambda", r.tree.nodes[r.tree.root].homothet.lambda},
                      {"warnings", r.tree.warnings}};
  j["battery"] = {{"e_low_kwh", r.tree.battery.e_low}, {"e_high_kwh", r.tree.battery.e_high}};
  j["arbitrage"] = {{"prices", prices.source},
                    {"energy_kwh", fleet.delta_h * z.sum()},
                    {"cost", r.arbitrage.cost},
                    {"baseline_cost", r.arbitrage.baseline_cost},
                    {"savings", r.arbitrage.baseline_cost - r.arbitrage.cost},
                    {"savings_fraction", r.arbitrage.savings_fraction}};
  j["verification"] = {{"schedule_valid", r.schedule_valid},
                       {"schedule_max_violation", r.schedule_max_violation},
                       {"adequacy_lp", r.adequate},
                       {"ok", r.ok()}};

  Stage("write", [&] {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::kIoError, "cannot create " + out_dir + ": " + ec.message());
    const std::filesystem::path dir(out_dir);
    WriteJsonFile((dir / "battery.json").string(), BatteryToJson(r.tree.battery));
    WriteJsonFile((dir / "tree.json").string(), r.tree.ToJson());
    WriteWith((dir / "profile.csv").string(), [&](std::ostream& o) { WriteProfileCsv(z, o); });
    WriteWith((dir / "schedule.csv").string(),
              [&](std::ostream& o) { WriteScheduleCsv(fleet, r.schedule, o); });
    WriteWith((dir / "bounds.csv").string(), [&](std::ostream& o) { WriteBoundsCsv(r.tree.battery, o); });
    WriteWith((dir / "profile_vs_price.csv").string(), [&](std::ostream& o) {
      o << "slot,price_per_kwh,optimal_kw,baseline_kw\n";
      for (int t = 0; t < fleet.m; ++t) {
        o << (t + 1) << ',' << Fixed6(prices.prices[t]) << ',' << Fixed6(z[t]) << ','
          << Fixed6(r.arbitrage.baseline_profile[t]) << '\n';
      }
    });
    WriteJsonFile((dir / "report.json").string(), r.report);
    return 0;
  });
  return r;
}

}  // namespace flex
