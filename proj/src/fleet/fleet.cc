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

#include "flex/fleet.h"

#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "flex/errors.h"
#include "flex/io.h"
#include "flex/random.h"

namespace flex {
namespace {

const nlohmann::json& Field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::kParseError, where + ": missing field \"" + key + "\"");
  }
  return obj.at(key);
}

double NumberAt(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = Field(obj, key, where);
  if (!v.is_number()) throw Error(ErrorCode::kParseError, where + ": field \"" + key + "\" must be a number");
  return v.get<double>();
}

int IntAt(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = Field(obj, key, where);
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::kParseError, where + ": field \"" + key + "\" must be an integer");
  }
  return v.get<int>();
}

double Round3(double v) { return std::round(v * 1000.0) / 1000.0; }
double Floor3(double v) { return std::floor(v * 1000.0) / 1000.0; }

}  // namespace

void Fleet::Validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kValidationError, what); };
  if (m < 1) fail("horizon m must be at least 1");
  if (!(delta_h > 0.0) || !std::isfinite(delta_h)) fail("delta_h must be positive");
  std::set<std::string> ids;
  for (const ChargingTask& t : tasks) {
    const std::string who = "task \"" + t.id + "\"";
    if (t.id.empty()) fail("task with empty id");
    if (!ids.insert(t.id).second) fail("duplicate task id \"" + t.id + "\"");
    if (t.a < 1 || t.d > m || t.a >= t.d) {
      fail(who + ": need 1 <= a < d <= m, got a=" + std::to_string(t.a) +
           " d=" + std::to_string(t.d) + " m=" + std::to_string(m));
    }
    if (!(t.p > 0.0) || !std::isfinite(t.p)) fail(who + ": rate must be positive");
    if (!(t.e_low >= 0.0) || !(t.e_high >= t.e_low) || !std::isfinite(t.e_high)) {
      fail(who + ": need 0 <= e_low <= e_high");
    }
    if (t.e_low > t.window() * t.p * delta_h * (1 + 1e-12)) {
      fail(who + ": e_low exceeds the energy the window can deliver");
    }
  }
}

AdmissibleSet AdmissiblePolytope(const ChargingTask& task, int m, double delta_h) {
  if (task.a < 1 || task.d > m || task.a > task.d) {
    throw Error(ErrorCode::kValidationError, "task \"" + task.id + "\" outside the horizon");
  }
  const int w = task.window();
  if (task.e_low > w * task.p * delta_h * (1 + 1e-12)) {
    throw Error(ErrorCode::kInfeasibleTask,
                "task \"" + task.id + "\": e_low exceeds window capacity");
  }
  AdmissibleSet out;
  out.active.resize(w);
  std::iota(out.active.begin(), out.active.end(), task.a - 1);
  out.battery.p_low = Eigen::VectorXd::Zero(w);
  out.battery.p_high = Eigen::VectorXd::Constant(w, task.p);
  out.battery.e_low = task.e_low;
  out.battery.e_high = task.e_high;
  out.battery.delta_h = delta_h;
  out.poly = BatteryToHPolytope(out.battery);
  return out;
}

void GenProfile::Validate(int m) const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kBadProfile, what); };
  if (m < 2) fail("horizon must have at least two slots");
  if (!(arrival_sigma > 0.0)) fail("arrival_sigma must be positive");
  if (stay_min < 2 || stay_max < stay_min) fail("need 2 <= stay_min <= stay_max");
  if (rates_kw.empty() || rates_kw.size() != rate_weights.size()) {
    fail("rates_kw and rate_weights must be nonempty and of equal length");
  }
  double total = 0.0;
  for (size_t k = 0; k < rates_kw.size(); ++k) {
    if (!(rates_kw[k] > 0.0)) fail("rates must be positive");
    if (!(rate_weights[k] >= 0.0)) fail("rate weights must be nonnegative");
    total += rate_weights[k];
  }
  if (!(total > 0.0)) fail("rate weights sum to zero");
  if (!(energy_min_kwh > 0.0) || energy_max_kwh < energy_min_kwh) fail("bad energy range");
  if (!(energy_flex >= 0.0) || energy_flex >= 1.0) fail("energy_flex must be in [0, 1)");
  if (!(max_fill > 0.0) || max_fill > 1.0) fail("max_fill must be in (0, 1]");
  if (!(delta_h > 0.0)) fail("delta_h must be positive");
  if (arrival_mean < 0.5 || arrival_mean > m + 0.5) fail("arrival_mean outside the horizon");
}

Fleet GenerateFleet(int n, int m, std::uint64_t seed, const GenProfile& profile) {
  if (n < 1) throw Error(ErrorCode::kBadProfile, "fleet size must be at least 1");
  profile.Validate(m);
  Rng rng(seed);
  Fleet fleet;
  fleet.m = m;
  fleet.delta_h = profile.delta_h;
  const double weight_total =
      std::accumulate(profile.rate_weights.begin(), profile.rate_weights.end(), 0.0);
  const size_t width = std::max<size_t>(4, std::to_string(n).size());
  for (int i = 0; i < n; ++i) {
    ChargingTask task;
    const std::string number = std::to_string(i + 1);
    task.id = "ev" + std::string(width - number.size(), '0') + number;
    while (true) {
      int a = 0;
      do {
        a = static_cast<int>(std::lround(profile.arrival_mean + profile.arrival_sigma * rng.Normal()));
      } while (a < 1 || a > m - 1);
      const int stay = profile.stay_min +
                       static_cast<int>(rng.Below(profile.stay_max - profile.stay_min + 1));
      const int d = std::min(a + stay - 1, m);
      double pick = rng.Uniform() * weight_total;
      size_t k = 0;
      while (k + 1 < profile.rates_kw.size() && pick >= profile.rate_weights[k]) {
        pick -= profile.rate_weights[k];
        ++k;
      }
      const double p = profile.rates_kw[k];
      double nominal = rng.Uniform(profile.energy_min_kwh, profile.energy_max_kwh);
      const double cap = profile.max_fill * (d - a) * p * profile.delta_h;
      nominal = std::min(nominal, cap / (1.0 + profile.energy_flex));
      task.a = a;
      task.d = d;
      task.p = p;
      task.e_low = Round3(nominal * (1.0 - profile.energy_flex));
      task.e_high = Floor3(nominal * (1.0 + profile.energy_flex));
      if (d > a && task.e_low <= task.e_high && task.e_low <= task.window() * p * profile.delta_h) {
        break;
      }
    }
    fleet.tasks.push_back(std::move(task));
  }
  fleet.Validate();
  return fleet;
}

nlohmann::ordered_json FleetToJson(const Fleet& fleet) {
  nlohmann::ordered_json j;
  j["m"] = fleet.m;
  j["delta_h"] = fleet.delta_h;
  nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
  for (const ChargingTask& t : fleet.tasks) {
    nlohmann::ordered_json o;
    o["id"] = t.id;
    o["a"] = t.a;
    o["d"] = t.d;
    o["p_kw"] = t.p;
    o["e_low_kwh"] = t.e_low;
    o["e_high_kwh"] = t.e_high;
    tasks.push_back(std::move(o));
  }
  j["tasks"] = std::move(tasks);
  return j;
}

Fleet FleetFromJson(const nlohmann::json& j) {
  Fleet fleet;
  fleet.m = IntAt(j, "m", "fleet");
  fleet.delta_h = j.contains("delta_h") ? NumberAt(j, "delta_h", "fleet") : 1.0;
  const auto& tasks = Field(j, "tasks", "fleet");
  if (!tasks.is_array()) throw Error(ErrorCode::kParseError, "fleet: field \"tasks\" must be an array");
  for (size_t k = 0; k < tasks.size(); ++k) {
    const std::string where = "tasks[" + std::to_string(k) + "]";
    const auto& o = tasks[k];
    ChargingTask t;
    const auto& id = Field(o, "id", where);
    if (!id.is_string()) throw Error(ErrorCode::kParseError, where + ": field \"id\" must be a string");
    t.id = id.get<std::string>();
    t.a = IntAt(o, "a", where);
    t.d = IntAt(o, "d", where);
    t.p = NumberAt(o, "p_kw", where);
    t.e_low = NumberAt(o, "e_low_kwh", where);
    t.e_high = NumberAt(o, "e_high_kwh", where);
    fleet.tasks.push_back(std::move(t));
  }
  fleet.Validate();
  return fleet;
}

Fleet LoadFleet(const std::string& path) { return FleetFromJson(ReadJsonFile(path)); }

void SaveFleet(const Fleet& fleet, const std::string& path) {
  WriteJsonFile(path, FleetToJson(fleet));
}

void WriteScheduleCsv(const Fleet& fleet, const Eigen::MatrixXd& schedule, std::ostream& out) {
  if (schedule.rows() != fleet.size() || schedule.cols() != fleet.m) {
    throw Error(ErrorCode::kDimensionMismatch, "schedule shape does not match the fleet");
  }
  out << "task_id";
  for (int t = 1; t <= fleet.m; ++t) out << ",t" << t;
  out << "\n";
  for (int i = 0; i < fleet.size(); ++i) {
    out << fleet.tasks[i].id;
    for (int t = 0; t < fleet.m; ++t) out << "," << Fixed6(schedule(i, t));
    out << "\n";
  }
}

Eigen::MatrixXd ReadScheduleCsv(const Fleet& fleet, std::istream& in) {
  const auto rows = ReadCsv(in);
  if (rows.empty() || rows.front().empty() || rows.front()[0] != "task_id") {
    throw Error(ErrorCode::kParseError, "schedule: missing task_id header");
  }
  if (static_cast<int>(rows.front().size()) != fleet.m + 1) {
    throw Error(ErrorCode::kLengthMismatch, "schedule: header does not have m slot columns");
  }
  std::map<std::string, int> index;
  for (int i = 0; i < fleet.size(); ++i) index[fleet.tasks[i].id] = i;
  Eigen::MatrixXd schedule = Eigen::MatrixXd::Zero(fleet.size(), fleet.m);
  std::vector<char> seen(fleet.size(), 0);
  for (size_t r = 1; r < rows.size(); ++r) {
    const std::string where = "schedule row " + std::to_string(r + 1);
    if (static_cast<int>(rows[r].size()) != fleet.m + 1) {
      throw Error(ErrorCode::kParseError, where + ": expected " + std::to_string(fleet.m + 1) + " fields");
    }
    auto it = index.find(rows[r][0]);
    if (it == index.end()) throw Error(ErrorCode::kParseError, where + ": unknown task \"" + rows[r][0] + "\"");
    if (seen[it->second]++) throw Error(ErrorCode::kParseError, where + ": duplicate task \"" + rows[r][0] + "\"");
    for (int t = 0; t < fleet.m; ++t) schedule(it->second, t) = ParseNumber(rows[r][t + 1], where);
  }
  for (int i = 0; i < fleet.size(); ++i) {
    if (!seen[i]) throw Error(ErrorCode::kParseError, "schedule: no row for task \"" + fleet.tasks[i].id + "\"");
  }
  return schedule;
}

}  // namespace flex
