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

#include "flex/geometry.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "flex/errors.h"
#include "flex/lp.h"

namespace flex {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<double> ToStd(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd VectorField(const nlohmann::json& j, const char* key, int m) {
  if (!j.contains(key)) throw Error(ErrorCode::kParseError, std::string("missing field \"") + key + "\"");
  const auto& arr = j.at(key);
  if (!arr.is_array() || static_cast<int>(arr.size()) != m) {
    throw Error(ErrorCode::kParseError,
                std::string("field \"") + key + "\" must be an array of length " + std::to_string(m));
  }
  VectorXd v(m);
  for (int t = 0; t < m; ++t) {
    if (!arr[t].is_number()) {
      throw Error(ErrorCode::kParseError, std::string("field \"") + key + "\" has a non-numeric entry");
    }
    v[t] = arr[t].get<double>();
  }
  return v;
}

double NumberField(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw Error(ErrorCode::kParseError, std::string("missing or non-numeric field \"") + key + "\"");
  }
  return j.at(key).get<double>();
}

void RequireSameDim(int a, int b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

bool Nonempty(const HPolytope& p) {
  const int n = p.dim();
  lp::LpProblem problem = lp::LpProblem::FromDense(
      VectorXd::Zero(n), p.a, p.c, MatrixXd(0, n), VectorXd(0),
      VectorXd::Constant(n, -lp::kInf), VectorXd::Constant(n, lp::kInf));
  return lp::CheckFeasible(problem) == lp::Feasibility::kFeasible;
}

}  // namespace

HPolytope::HPolytope(Eigen::MatrixXd a_in, Eigen::VectorXd c_in)
    : a(std::move(a_in)), c(std::move(c_in)) {
  if (a.rows() != c.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "row count of A differs from length of c");
  }
  if (!a.allFinite() || !c.allFinite()) {
    throw Error(ErrorCode::kMalformedProblem, "non-finite polytope data");
  }
}

void VirtualBattery::Validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kValidationError, what); };
  if (p_high.size() != p_low.size()) fail("p_low and p_high lengths differ");
  if (!p_low.allFinite() || !p_high.allFinite() || !std::isfinite(e_low) ||
      !std::isfinite(e_high)) {
    fail("non-finite battery parameter");
  }
  if (!(delta_h > 0.0)) fail("delta_h must be positive");
  const double scale = 1.0 + p_high.cwiseAbs().sum() + std::abs(e_high) + std::abs(e_low);
  const double tol = 1e-9 * scale;
  for (int t = 0; t < m(); ++t) {
    if (p_low[t] > p_high[t] + tol) fail("p_low exceeds p_high at slot " + std::to_string(t + 1));
  }
  if (e_low > e_high + tol) fail("e_low exceeds e_high");
  if (delta_h * p_low.sum() > e_high + tol) fail("sum of p_low exceeds e_high");
  if (e_low > delta_h * p_high.sum() + tol) fail("e_low exceeds sum of p_high");
}

bool VirtualBattery::Contains(const Eigen::VectorXd& u, double tol) const {
  if (u.size() != m()) return false;
  for (int t = 0; t < m(); ++t) {
    if (u[t] < p_low[t] - tol || u[t] > p_high[t] + tol) return false;
  }
  const double e = delta_h * u.sum();
  return e >= e_low - tol && e <= e_high + tol;
}

nlohmann::ordered_json BatteryToJson(const VirtualBattery& b) {
  nlohmann::ordered_json j;
  j["m"] = b.m();
  if (b.delta_h != 1.0) j["delta_h"] = b.delta_h;
  j["p_low"] = ToStd(b.p_low);
  j["p_high"] = ToStd(b.p_high);
  j["e_low_kwh"] = b.e_low;
  j["e_high_kwh"] = b.e_high;
  return j;
}

VirtualBattery BatteryFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "battery must be a JSON object");
  if (!j.contains("m") || !j.at("m").is_number_integer() || j.at("m").get<int>() < 0) {
    throw Error(ErrorCode::kParseError, "missing or invalid field \"m\"");
  }
  const int m = j.at("m").get<int>();
  VirtualBattery b;
  b.p_low = VectorField(j, "p_low", m);
  b.p_high = VectorField(j, "p_high", m);
  b.e_low = NumberField(j, "e_low_kwh");
  b.e_high = NumberField(j, "e_high_kwh");
  if (j.contains("delta_h")) b.delta_h = NumberField(j, "delta_h");
  b.Validate();
  return b;
}

HPolytope BatteryToHPolytope(const VirtualBattery& b) {
  const int m = b.m();
  MatrixXd a = MatrixXd::Zero(2 * m + 2, m);
  VectorXd c(2 * m + 2);
  a.topRows(m).setIdentity();
  a.middleRows(m, m) = -MatrixXd::Identity(m, m);
  a.row(2 * m).setConstant(b.delta_h);
  a.row(2 * m + 1).setConstant(-b.delta_h);
  c << b.p_high, -b.p_low, b.e_high, -b.e_low;
  return HPolytope(std::move(a), std::move(c));
}

VirtualBattery ApplyHomothet(const Homothet& h, const VirtualBattery& b) {
  RequireSameDim(static_cast<int>(h.mu.size()), b.m(), "homothet translate vs battery");
  VirtualBattery out;
  out.delta_h = b.delta_h;
  out.p_low = h.lambda * b.p_low + h.mu;
  out.p_high = h.lambda * b.p_high + h.mu;
  out.e_low = h.lambda * b.e_low + b.delta_h * h.mu.sum();
  out.e_high = h.lambda * b.e_high + b.delta_h * h.mu.sum();
  return out;
}

double BatterySupport(const VirtualBattery& b, const Eigen::VectorXd& v, Eigen::VectorXd* argmax) {
  const int m = b.m();
  RequireSameDim(m, static_cast<int>(v.size()), "direction vs battery");
  std::vector<int> order(m);
  for (int t = 0; t < m; ++t) order[t] = t;
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return v[x] > v[y]; });
  double free_energy = 0.0, energy = 0.0;
  for (int t = 0; t < m; ++t) {
    free_energy += b.delta_h * (v[t] > 0 ? b.p_high[t] : b.p_low[t]);
    energy += b.delta_h * b.p_low[t];
  }
  const double target = std::clamp(free_energy, b.e_low, b.e_high);
  VectorXd x = b.p_low;
  for (int t : order) {
    if (energy >= target) break;
    const double room = b.delta_h * (b.p_high[t] - b.p_low[t]);
    const double take = std::min(room, target - energy);
    x[t] += take / b.delta_h;
    energy += take;
  }
  if (argmax != nullptr) *argmax = x;
  return v.dot(x);
}

std::optional<VirtualBattery> AsBattery(const HPolytope& p) {
  const int m = p.dim();
  if (p.rows() != 2 * m + 2) return std::nullopt;
  const double delta = p.a(2 * m, 0);
  if (!(delta > 0)) return std::nullopt;
  MatrixXd expected = MatrixXd::Zero(2 * m + 2, m);
  expected.topRows(m).setIdentity();
  expected.middleRows(m, m) = -MatrixXd::Identity(m, m);
  expected.row(2 * m).setConstant(delta);
  expected.row(2 * m + 1).setConstant(-delta);
  if (p.a != expected) return std::nullopt;
  VirtualBattery b;
  b.delta_h = delta;
  b.p_high = p.c.head(m);
  b.p_low = -p.c.segment(m, m);
  b.e_high = p.c[2 * m];
  b.e_low = -p.c[2 * m + 1];
  return b;
}

bool ContainsPoint(const HPolytope& p, const Eigen::VectorXd& x, double tol) {
  RequireSameDim(p.dim(), static_cast<int>(x.size()), "point vs polytope");
  if (p.rows() == 0) return true;
  return (p.a * x - p.c).maxCoeff() <= tol;
}

bool ContainsPolytope(const HPolytope& inner, const HPolytope& outer,
                      Eigen::MatrixXd* multipliers) {
  RequireSameDim(inner.dim(), outer.dim(), "containment operands");
  if (!Nonempty(inner)) throw Error(ErrorCode::kEmptyInner, "inner polytope is empty");
  const int k_in = inner.rows();
  const int k_out = outer.rows();
  const int dim = inner.dim();
  lp::LpBuilder builder;
  const int g0 = builder.AddVariables(k_out * k_in, 0.0, lp::kInf);
  auto g = [&](int r, int q) { return g0 + r * k_in + q; };
  std::vector<lp::LpBuilder::Term> terms;
  for (int r = 0; r < k_out; ++r) {
    for (int d = 0; d < dim; ++d) {
      terms.clear();
      for (int q = 0; q < k_in; ++q) {
        if (inner.a(q, d) != 0.0) terms.push_back({g(r, q), inner.a(q, d)});
      }
      builder.AddEqual(terms, outer.a(r, d));
    }
    terms.clear();
    for (int q = 0; q < k_in; ++q) {
      if (inner.c[q] != 0.0) terms.push_back({g(r, q), inner.c[q]});
    }
    builder.AddLessEqual(terms, outer.c[r]);
  }
  const lp::LpSolution s = lp::SolveLp(builder.Build());
  if (s.status != lp::LpStatus::kOptimal) return false;
  if (multipliers != nullptr) {
    multipliers->resize(k_out, k_in);
    for (int r = 0; r < k_out; ++r) {
      for (int q = 0; q < k_in; ++q) (*multipliers)(r, q) = s.x[g(r, q)];
    }
  }
  return true;
}

HPolytope HomothetApply(const Homothet& h, const HPolytope& b) {
  RequireSameDim(static_cast<int>(h.mu.size()), b.dim(), "homothet translate vs polytope");
  return HPolytope(b.a, h.lambda * b.c + b.a * h.mu);
}

Homothet SumHomothets(const std::vector<BasedHomothet>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kMixedBases, "no homothets to sum");
  const HPolytope& base = *parts.front().base;
  Homothet total{0.0, VectorXd::Zero(base.dim())};
  for (const BasedHomothet& part : parts) {
    const HPolytope& b = *part.base;
    const bool same = part.base == parts.front().base ||
                      (b.a.rows() == base.a.rows() && b.a.cols() == base.a.cols() &&
                       b.a == base.a && b.c == base.c);
    if (!same) throw Error(ErrorCode::kMixedBases, "homothets of different base polytopes");
    if (!(part.homothet.lambda > 0.0)) {
      throw Error(ErrorCode::kMixedBases, "homothet scale must be positive");
    }
    total.lambda += part.homothet.lambda;
    total.mu += part.homothet.mu;
  }
  return total;
}

double SupportFunction(const HPolytope& p, const Eigen::VectorXd& v) {
  RequireSameDim(p.dim(), static_cast<int>(v.size()), "direction vs polytope");
  const int n = p.dim();
  lp::LpProblem problem = lp::LpProblem::FromDense(
      -v, p.a, p.c, MatrixXd(0, n), VectorXd(0), VectorXd::Constant(n, -lp::kInf),
      VectorXd::Constant(n, lp::kInf));
  const lp::LpSolution s = lp::SolveLp(problem);
  switch (s.status) {
    case lp::LpStatus::kOptimal:
      return -s.objective_value;
    case lp::LpStatus::kUnbounded:
      throw Error(ErrorCode::kUnboundedDirection, "polytope is unbounded in the given direction");
    case lp::LpStatus::kInfeasible:
      throw Error(ErrorCode::kEmptyInner, "support function of an empty polytope");
    case lp::LpStatus::kIterationLimit:
      break;
  }
  throw Error(ErrorCode::kMalformedProblem, "support-function LP hit the iteration limit");
}

HPolytope FmEliminateOne(const HPolytope& p, int coord) {
  const int n = p.dim();
  if (n < 2 || coord < 0 || coord >= n) {
    throw Error(ErrorCode::kDimensionMismatch, "coordinate out of range for elimination");
  }
  std::vector<int> pos, neg, zero;
  for (int r = 0; r < p.rows(); ++r) {
    const double v = p.a(r, coord);
    if (v > 0) {
      pos.push_back(r);
    } else if (v < 0) {
      neg.push_back(r);
    } else {
      zero.push_back(r);
    }
  }
  const int rows = static_cast<int>(zero.size() + pos.size() * neg.size());
  MatrixXd a(rows, n);
  VectorXd c(rows);
  int k = 0;
  for (int r : zero) {
    a.row(k) = p.a.row(r);
    c[k++] = p.c[r];
  }
  for (int rp : pos) {
    for (int rn : neg) {
      const double wp = 1.0 / p.a(rp, coord);
      const double wn = -1.0 / p.a(rn, coord);
      a.row(k) = wp * p.a.row(rp) + wn * p.a.row(rn);
      a(k, coord) = 0.0;
      c[k++] = wp * p.c[rp] + wn * p.c[rn];
    }
  }
  MatrixXd reduced(rows, n - 1);
  reduced.leftCols(coord) = a.leftCols(coord);
  reduced.rightCols(n - 1 - coord) = a.rightCols(n - 1 - coord);
  return HPolytope(std::move(reduced), std::move(c));
}

HitAndRunSampler::HitAndRunSampler(HPolytope p, Eigen::MatrixXd eq_a, Eigen::VectorXd eq_b,
                                   std::uint64_t seed)
    : p_(std::move(p)), rng_(seed) {
  const int n = p_.dim();
  if (eq_a.rows() > 0) {
    RequireSameDim(static_cast<int>(eq_a.cols()), n, "equality rows vs polytope");
    Eigen::FullPivLU<MatrixXd> lu(eq_a);
    const MatrixXd kernel = lu.kernel();
    if (lu.rank() == n) {
      null_basis_ = MatrixXd(n, 0);
    } else {
      Eigen::HouseholderQR<MatrixXd> qr(kernel);
      null_basis_ = qr.householderQ() * MatrixXd::Identity(n, kernel.cols());
    }
  } else {
    null_basis_ = MatrixXd::Identity(n, n);
  }

  // Chebyshev center within the affine hull: maximize rho subject to
  // a_i x + rho |N' a_i| <= c_i, E x = e, 0 <= rho <= 1e6.
  lp::LpBuilder builder;
  const int x0 = builder.AddVariables(n);
  const int rho = builder.AddVariables(1, 0.0, 1e6);
  builder.SetObjective(rho, -1.0);
  std::vector<lp::LpBuilder::Term> terms;
  for (int r = 0; r < p_.rows(); ++r) {
    terms.clear();
    for (int j = 0; j < n; ++j) {
      if (p_.a(r, j) != 0.0) terms.push_back({x0 + j, p_.a(r, j)});
    }
    const double norm = (null_basis_.transpose() * p_.a.row(r).transpose()).norm();
    if (norm > 1e-12) terms.push_back({rho, norm});
    builder.AddLessEqual(terms, p_.c[r]);
  }
  for (int r = 0; r < eq_a.rows(); ++r) {
    terms.clear();
    for (int j = 0; j < n; ++j) {
      if (eq_a(r, j) != 0.0) terms.push_back({x0 + j, eq_a(r, j)});
    }
    builder.AddEqual(terms, eq_b[r]);
  }
  const lp::LpSolution s = lp::SolveLp(builder.Build());
  if (s.status != lp::LpStatus::kOptimal) {
    throw Error(ErrorCode::kEmptyInner, "cannot sample an empty polytope");
  }
  center_ = s.x.head(n);
  current_ = center_;
}

Eigen::VectorXd HitAndRunSampler::Next(int thin) {
  const int k = static_cast<int>(null_basis_.cols());
  if (k == 0) return current_;
  for (int step = 0; step < thin; ++step) {
    VectorXd z(k);
    for (int i = 0; i < k; ++i) z[i] = rng_.Normal();
    const VectorXd d = null_basis_ * z.normalized();
    double t_lo = -lp::kInf, t_hi = lp::kInf;
    const VectorXd ad = p_.a * d;
    const VectorXd slack = (p_.c - p_.a * current_).cwiseMax(0.0);
    for (int r = 0; r < p_.rows(); ++r) {
      if (std::abs(ad[r]) <= 1e-12 * (1.0 + p_.a.row(r).norm())) continue;
      const double t = slack[r] / ad[r];
      if (ad[r] > 0) {
        t_hi = std::min(t_hi, t);
      } else {
        t_lo = std::max(t_lo, t);
      }
    }
    if (!std::isfinite(t_lo) || !std::isfinite(t_hi)) {
      throw Error(ErrorCode::kUnboundedDirection, "hit-and-run chord is unbounded");
    }
    if (t_hi <= t_lo) continue;
    current_ += rng_.Uniform(t_lo, t_hi) * d;
  }
  return current_;
}

HitAndRunSampler BatterySampler(const VirtualBattery& b, std::uint64_t seed) {
  b.Validate();
  const int m = b.m();
  std::vector<int> fixed;
  for (int t = 0; t < m; ++t) {
    if (b.p_low[t] == b.p_high[t]) fixed.push_back(t);
  }
  const bool pinned_energy = b.e_low == b.e_high;
  const int rows = static_cast<int>(fixed.size()) + (pinned_energy ? 1 : 0);
  MatrixXd eq_a = MatrixXd::Zero(rows, m);
  VectorXd eq_b(rows);
  int k = 0;
  for (int t : fixed) {
    eq_a(k, t) = 1.0;
    eq_b[k++] = b.p_low[t];
  }
  if (pinned_energy) {
    eq_a.row(k).setConstant(b.delta_h);
    eq_b[k] = b.e_low;
  }
  return HitAndRunSampler(BatteryToHPolytope(b), std::move(eq_a), std::move(eq_b), seed);
}

}  // namespace flex
