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

// Deferrable charging tasks and fleets.
//
// Slots are 1-based in files and in ChargingTask (a, d); everything that
// indexes vectors uses 0-based slot t - 1.

#ifndef FLEX_FLEET_H_
#define FLEX_FLEET_H_

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "flex/geometry.h"

namespace flex {

struct ChargingTask {
  std::string id;
  int a = 1;       // arrival slot
  int d = 1;       // departure slot (inclusive)
  double p = 0.0;  // kW
  double e_low = 0.0;   // kWh
  double e_high = 0.0;  // kWh

  int window() const { return d - a + 1; }
  // Uses (d - a) p as the capacity, one slot less than the window holds.
  bool deferrable(double delta_h = 1.0) const { return e_high < (d - a) * p * delta_h; }
};

struct Fleet {
  int m = 24;
  double delta_h = 1.0;
  std::vector<ChargingTask> tasks;

  int size() const { return static_cast<int>(tasks.size()); }
  // Throws kValidationError on horizon, id or parameter violations.
  void Validate() const;
};

// Admissible set of one task over its active slots.
struct AdmissibleSet {
  std::vector<int> active;  // 0-based slots a-1 .. d-1
  VirtualBattery battery;   // bounds [0, p] per active slot, energy interval
  HPolytope poly;           // facet form of `battery`
};

// Throws kInfeasibleTask when e_low exceeds the window capacity.
AdmissibleSet AdmissiblePolytope(const ChargingTask& task, int m, double delta_h = 1.0);

// Stand-in distribution for a residential evening fleet. Arrival slots follow
// a normal law truncated to the horizon, stays are uniform, the rate comes
// from a type mix and the nominal energy is uniform then clipped so that the
// task stays deferrable.
struct GenProfile {
  double arrival_mean = 7.0;
  double arrival_sigma = 3.0;
  int stay_min = 6;
  int stay_max = 12;
  std::vector<double> rates_kw = {3.3, 6.6, 7.2};
  std::vector<double> rate_weights = {0.3, 0.4, 0.3};
  double energy_min_kwh = 8.0;
  double energy_max_kwh = 24.0;
  double energy_flex = 0.05;  // e_low, e_high = nominal * (1 -/+ flex)
  double max_fill = 0.9;      // nominal * (1 + flex) <= max_fill * (d - a) p delta
  double delta_h = 1.0;

  void Validate(int m) const;  // throws kBadProfile
};

Fleet GenerateFleet(int n, int m, std::uint64_t seed, const GenProfile& profile = {});

nlohmann::ordered_json FleetToJson(const Fleet& fleet);
Fleet FleetFromJson(const nlohmann::json& j);
Fleet LoadFleet(const std::string& path);
void SaveFleet(const Fleet& fleet, const std::string& path);

// Schedule CSV: header task_id,t1..tm, one row per task, kW with %.6f.
void WriteScheduleCsv(const Fleet& fleet, const Eigen::MatrixXd& schedule, std::ostream& out);
Eigen::MatrixXd ReadScheduleCsv(const Fleet& fleet, std::istream& in);

}  // namespace flex

#endif  // FLEX_FLEET_H_
