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

// Generators and brute-force oracles shared by the test binaries.

#ifndef FLEX_TESTS_TEST_UTIL_H_
#define FLEX_TESTS_TEST_UTIL_H_

#include <Eigen/Dense>

#include <vector>

#include "flex/fleet.h"
#include "flex/geometry.h"
#include "flex/random.h"

namespace flex::testing {

inline Eigen::VectorXd Vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Sign-corrected constraint system of the two-dimensional worked example:
// -0.5x - y <= -9, 0.6x + y <= 10, -x - y <= -10.
inline HPolytope ExampleOnePolytope() {
  Eigen::MatrixXd a(3, 2);
  a << -0.5, -1, 0.6, 1, -1, -1;
  return HPolytope(a, Vec({-9, 10, -10}));
}

inline HPolytope Box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int n = static_cast<int>(lo.size());
  Eigen::MatrixXd a(2 * n, n);
  a << Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd c(2 * n);
  c << hi, -lo;
  return HPolytope(a, c);
}

// Random bounded polytope containing the ball of radius 0.5 around `center`.
inline HPolytope RandomPolytope(Rng& rng, int dim, int facets, const Eigen::VectorXd& center) {
  Eigen::MatrixXd a(facets + 2 * dim, dim);
  Eigen::VectorXd c(facets + 2 * dim);
  for (int r = 0; r < facets; ++r) {
    Eigen::VectorXd n(dim);
    for (int j = 0; j < dim; ++j) n[j] = rng.Normal();
    n.normalize();
    a.row(r) = n.transpose();
    c[r] = n.dot(center) + rng.Uniform(0.5, 2.0);
  }
  for (int j = 0; j < dim; ++j) {
    a.row(facets + 2 * j).setZero();
    a(facets + 2 * j, j) = 1.0;
    c[facets + 2 * j] = center[j] + 3.0;
    a.row(facets + 2 * j + 1).setZero();
    a(facets + 2 * j + 1, j) = -1.0;
    c[facets + 2 * j + 1] = -center[j] + 3.0;
  }
  return HPolytope(a, c);
}

// All vertices of a bounded polytope of dimension <= 3 by intersecting every
// choice of `dim` rows.
inline std::vector<Eigen::VectorXd> EnumerateVertices(const HPolytope& p, double tol = 1e-9) {
  const int d = p.dim();
  const int k = p.rows();
  std::vector<Eigen::VectorXd> out;
  std::vector<int> idx(d);
  auto recurse = [&](auto&& self, int start, int depth) -> void {
    if (depth == d) {
      Eigen::MatrixXd m(d, d);
      Eigen::VectorXd rhs(d);
      for (int i = 0; i < d; ++i) {
        m.row(i) = p.a.row(idx[i]);
        rhs[i] = p.c[idx[i]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
      if (lu.rank() < d) return;
      const Eigen::VectorXd x = lu.solve(rhs);
      if ((p.a * x - p.c).maxCoeff() <= tol) out.push_back(x);
      return;
    }
    for (int r = start; r < k; ++r) {
      idx[depth] = r;
      self(self, r + 1, depth + 1);
    }
  };
  recurse(recurse, 0, 0);
  return out;
}

// Small random fleet with arbitrary windows inside 1..m.
inline Fleet RandomFleet(Rng& rng, int n, int m) {
  Fleet fleet;
  fleet.m = m;
  for (int i = 0; i < n; ++i) {
    ChargingTask t;
    t.id = "t" + std::to_string(i + 1);
    t.a = 1 + static_cast<int>(rng.Below(m - 1));
    t.d = t.a + 1 + static_cast<int>(rng.Below(m - t.a));
    t.p = rng.Uniform(0.5, 3.0);
    const double cap = t.window() * t.p;
    t.e_low = rng.Uniform(0.0, 0.8) * cap;
    t.e_high = t.e_low + rng.Uniform(0.0, 0.4) * cap;
    fleet.tasks.push_back(t);
  }
  return fleet;
}

// Random admissible profile of one task over the full horizon.
inline Eigen::VectorXd RandomAdmissible(Rng& rng, const ChargingTask& t, int m, double delta = 1.0) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
  for (int s = t.a - 1; s <= t.d - 1; ++s) v[s] = rng.Uniform(0.0, t.p);
  const double cap = t.window() * t.p * delta;
  const double target = rng.Uniform(t.e_low, std::min(t.e_high, cap));
  const double e = delta * v.sum();
  if (e < target) {
    const double theta = (target - e) / (cap - e);
    for (int s = t.a - 1; s <= t.d - 1; ++s) v[s] += theta * (t.p - v[s]);
  } else if (e > 0) {
    v *= target / e;
  }
  return v;
}

// Random admissible charging matrix (N x m).
inline Eigen::MatrixXd RandomSchedule(Rng& rng, const Fleet& fleet) {
  Eigen::MatrixXd s(fleet.size(), fleet.m);
  for (int i = 0; i < fleet.size(); ++i) {
    s.row(i) = RandomAdmissible(rng, fleet.tasks[i], fleet.m, fleet.delta_h).transpose();
  }
  return s;
}

}  // namespace flex::testing

#endif  // FLEX_TESTS_TEST_UTIL_H_
