// Copyright 2026 The urlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace urlab {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

/// Raised for every contract violation: bad shapes, failed invariants,
/// truncation gates, out-of-range parameters.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical thresholds shared by the whole library.
///
/// `saturation` decides when an inequality counts as an equality,
/// `floor` how far below zero a margin may sit before it is a violation.
/// `tail` bounds the population of the two highest levels of a truncated
/// basis; states above it are refused by every state-dependent operation.
struct Tolerances {
  double saturation = 1e-8;
  double floor = 1e-10;
  double hermitian = 1e-10;
  double psd = 1e-10;
  double residue = 1e-10;
  double tail = 1e-12;
};

/// Outcome of evaluating one inequality lhs >= rhs.
struct Verdict {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool saturated = false;
  double tol = 1e-8;
  double floor = 1e-10;
  std::string context;

  bool holds() const { return margin >= -floor; }
};

inline Verdict make_verdict(std::string name, double lhs, double rhs,
                            const Tolerances& tol, std::string context = {}) {
  Verdict v;
  v.name = std::move(name);
  v.lhs = lhs;
  v.rhs = rhs;
  v.margin = lhs - rhs;
  v.tol = tol.saturation;
  v.floor = tol.floor;
  v.saturated = std::abs(v.margin) <= tol.saturation;
  v.context = std::move(context);
  return v;
}

/// Max-entry norm of M - M^dagger.
template <typename Derived>
double hermiticity_defect(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols()) throw Error("hermiticity_defect: matrix is not square");
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// Symplectic metric for the ordering (p_1..p_m, q_1..q_m):
/// J_{nu, m+nu} = 1 = -J_{m+nu, nu}.
inline RMatrix symplectic_metric(Eigen::Index modes) {
  RMatrix j = RMatrix::Zero(2 * modes, 2 * modes);
  for (Eigen::Index nu = 0; nu < modes; ++nu) {
    j(nu, modes + nu) = 1.0;
    j(modes + nu, nu) = -1.0;
  }
  return j;
}

inline double max_abs(const CMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double max_abs(const RMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace urlab
