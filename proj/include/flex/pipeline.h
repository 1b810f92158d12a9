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

// Price data, the energy-arbitrage LP over a virtual battery, the immediate
// charging baseline and the end-to-end run used by `flex demo`.

#ifndef FLEX_PIPELINE_H_
#define FLEX_PIPELINE_H_

#include <Eigen/Dense>

#include <string>

#include "flex/aggregation.h"
#include "flex/fleet.h"
#include "flex/geometry.h"
#include "json.hpp"

namespace flex {

struct PriceSeries {
  Eigen::VectorXd prices;  // $/kWh per slot
  std::string source;
};

enum class PriceUnit { kPerMwh, kPerKwh };

// CSV `slot,price` with slots 1..m in order; an optional header row is
// skipped. $/MWh input is divided by 1000. Throws kParseError or
// kLengthMismatch (m < 0 accepts any length).
PriceSeries LoadPrices(const std::string& path, PriceUnit unit = PriceUnit::kPerMwh, int m = -1);
void WritePricesCsv(const PriceSeries& prices, PriceUnit unit, std::ostream& out);

// Day-ahead shaped curve over a noon-anchored horizon: an evening peak, a
// deep overnight valley and a shallower late-morning one.
PriceSeries TwoValleyPrices(int m);

struct ArbitrageResult {
  Eigen::VectorXd z;  // kW
  double cost = 0.0;  // $
  Eigen::VectorXd baseline_profile;
  double baseline_cost = 0.0;
  double savings_fraction = 0.0;
};

// min delta * prices'z over z in the battery. Fills z and cost. Throws
// kEmptyBattery when the battery has no point.
ArbitrageResult Arbitrage(const VirtualBattery& battery, const PriceSeries& prices);

// Every task charges at full rate from arrival until it has its share
// e_low + theta (e_high - e_low), theta chosen so the shares total
// `target_energy`. Returns the aggregate profile. Throws kTargetOutOfRange.
Eigen::VectorXd BaselineImmediate(const Fleet& fleet, double target_energy);

// Arbitrage plus the baseline at the same total energy.
ArbitrageResult CompareWithBaseline(const Fleet& fleet, const VirtualBattery& battery,
                                    const PriceSeries& prices);

struct PipelineReport {
  AggregationTree tree;
  ArbitrageResult arbitrage;
  Eigen::MatrixXd schedule;
  bool schedule_valid = false;
  double schedule_max_violation = 0.0;
  bool adequate = false;
  nlohmann::ordered_json report;  // contents of report.json

  bool ok() const { return schedule_valid && adequate; }
};

// Aggregates, optimizes, dispatches and verifies; writes battery.json,
// tree.json, profile.csv, schedule.csv, bounds.csv, profile_vs_price.csv and
// report.json into out_dir.
PipelineReport RunPipeline(const Fleet& fleet, const PriceSeries& prices,
                           const AggregateConfig& config, const std::string& out_dir);

}  // namespace flex

#endif  // FLEX_PIPELINE_H_
