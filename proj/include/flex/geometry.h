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

// Polytopes in inequality form, homothets, virtual batteries and the LP-based
// machinery relating them (containment certificates, support functions,
// Fourier-Motzkin projection, hit-and-run sampling).

#ifndef FLEX_GEOMETRY_H_
#define FLEX_GEOMETRY_H_

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <vector>

#include "flex/random.h"
#include "json.hpp"

namespace flex {

inline constexpr double kGeomTol = 1e-7;

// {x : A x <= c}.
struct HPolytope {
  Eigen::MatrixXd a;
  Eigen::VectorXd c;

  HPolytope() = default;
  HPolytope(Eigen::MatrixXd a_in, Eigen::VectorXd c_in);

  int dim() const { return static_cast<int>(a.cols()); }
  int rows() const { return static_cast<int>(a.rows()); }
};

// lambda * B + mu. Equivalently s = 1/lambda, r = -mu/lambda.
struct Homothet {
  double lambda = 1.0;
  Eigen::VectorXd mu;

  Homothet Inverse() const { return {1.0 / lambda, -mu / lambda}; }
};

// Per-slot power interval plus an interval on delivered energy
// delta_h * sum(u).
struct VirtualBattery {
  Eigen::VectorXd p_low;
  Eigen::VectorXd p_high;
  double e_low = 0.0;
  double e_high = 0.0;
  double delta_h = 1.0;

  int m() const { return static_cast<int>(p_low.size()); }
  // Throws kValidationError when the invariants fail.
  void Validate() const;
  bool Contains(const Eigen::VectorXd& u, double tol = kGeomTol) const;
};

nlohmann::ordered_json BatteryToJson(const VirtualBattery& b);
VirtualBattery BatteryFromJson(const nlohmann::json& j);

// Rows [I; -I; delta 1'; -delta 1'] with right-hand side
// (p_high, -p_low, e_high, -e_low).
HPolytope BatteryToHPolytope(const VirtualBattery& b);

// The battery lambda B + mu (power bounds scale and shift, energy bounds pick
// up delta 1'mu).
VirtualBattery ApplyHomothet(const Homothet& h, const VirtualBattery& b);

bool ContainsPoint(const HPolytope& p, const Eigen::VectorXd& x,
                   double tol = kGeomTol);

// Decides inner subset-of outer with a single LP: G >= 0, G A_inner = A_outer,
// G c_inner <= c_outer. Throws kEmptyInner if inner has no point. When
// `multipliers` is given and the answer is true, it receives G.
bool ContainsPolytope(const HPolytope& inner, const HPolytope& outer,
                      Eigen::MatrixXd* multipliers = nullptr);

HPolytope HomothetApply(const Homothet& h, const HPolytope& b);

// A homothet of a particular base polytope. Bases are compared by identity
// first and by value second.
struct BasedHomothet {
  std::shared_ptr<const HPolytope> base;
  Homothet homothet;
};

// max v'u over the battery in closed form: start from p_low and raise slots
// in decreasing order of v until the best reachable energy is met. Optionally
// returns the maximizer.
double BatterySupport(const VirtualBattery& b, const Eigen::VectorXd& v,
                      Eigen::VectorXd* argmax = nullptr);

// Recognizes the facet form produced by BatteryToHPolytope.
std::optional<VirtualBattery> AsBattery(const HPolytope& p);

// Minkowski sum of homothets of one base: (sum lambda_k, sum mu_k). Throws
// kMixedBases when the bases differ.
Homothet SumHomothets(const std::vector<BasedHomothet>& parts);

// max v'x over p. Throws kUnboundedDirection or kEmptyInner.
double SupportFunction(const HPolytope& p, const Eigen::VectorXd& v);

// Projection of p onto all coordinates except `coord` (pairs every row with a
// positive coefficient against every row with a negative one).
HPolytope FmEliminateOne(const HPolytope& p, int coord);

// Hit-and-run over {A x <= c, E x = e}. Directions are drawn in the null space
// of E, so lower-dimensional sets are handled. The chain starts at the
// Chebyshev center of the set inside its affine hull.
class HitAndRunSampler {
 public:
  HitAndRunSampler(HPolytope p, Eigen::MatrixXd eq_a, Eigen::VectorXd eq_b,
                   std::uint64_t seed);

  const Eigen::VectorXd& center() const { return center_; }
  // Advances the chain `thin` steps and returns the new point.
  Eigen::VectorXd Next(int thin = 1);

 private:
  HPolytope p_;
  Eigen::MatrixXd null_basis_;
  Eigen::VectorXd center_;
  Eigen::VectorXd current_;
  Rng rng_;
};

// Sampler over a battery; slots with p_low == p_high and a pinned total energy
// become equality constraints.
HitAndRunSampler BatterySampler(const VirtualBattery& b, std::uint64_t seed);

}  // namespace flex

#endif  // FLEX_GEOMETRY_H_
