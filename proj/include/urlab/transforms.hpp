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

#include "urlab/core.hpp"
#include "urlab/hilbert.hpp"
#include "urlab/relations.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace urlab::transforms {

using hilbert::Operator;
using hilbert::QuantumState;

/// Real n x n map acting on observable vectors, X'_i = sum_j lambda_ij X_j.
struct LinearMap {
  RMatrix lambda;
  double det = 0.0;
  double orthogonal_defect = 0.0;
  std::optional<double> symplectic_defect;

  static LinearMap from(RMatrix lambda) {
    if (lambda.rows() != lambda.cols() || lambda.rows() == 0) {
      throw Error("LinearMap: matrix must be square and non-empty");
    }
    LinearMap m;
    m.det = lambda.determinant();
    const auto n = lambda.rows();
    m.orthogonal_defect = max_abs(RMatrix(lambda * lambda.transpose() - RMatrix::Identity(n, n)));
    if (n % 2 == 0) {
      const RMatrix j = symplectic_metric(n / 2);
      m.symplectic_defect = max_abs(RMatrix(lambda * j * lambda.transpose() - j));
    }
    m.lambda = std::move(lambda);
    return m;
  }

  Eigen::Index size() const { return lambda.rows(); }
  bool invertible() const { return std::abs(det) > 1e-10; }
  bool orthogonal(double tol = 1e-10) const { return orthogonal_defect <= tol; }
  bool symplectic(double tol = 1e-10) const {
    return symplectic_defect.has_value() && *symplectic_defect <= tol;
  }
  bool unimodular(double tol = 1e-10) const { return std::abs(std::abs(det) - 1.0) <= tol; }

  /// Diagonal with lambda_k lambda_{m+k} = 1 for every pair (even n).
  bool special_scale(double tol = 1e-10) const {
    const auto n = size();
    if (n % 2 != 0) return false;
    RMatrix off = lambda;
    off.diagonal().setZero();
    if (max_abs(off) > tol) return false;
    for (Eigen::Index k = 0; k < n / 2; ++k) {
      if (std::abs(lambda(k, k) * lambda(n / 2 + k, n / 2 + k) - 1.0) > tol) return false;
    }
    return true;
  }
};

/// p' = p cos t + q sin t, q' = -p sin t + q cos t on the pair (p, q).
inline LinearMap rotation2(double theta) {
  RMatrix l(2, 2);
  l << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
  return LinearMap::from(std::move(l));
}

/// X_1 -> X_1 / alpha, X_2 -> alpha X_2.
inline LinearMap scale2(double alpha) {
  if (alpha == 0.0) throw Error("scale2: alpha must be non-zero");
  RMatrix l = RMatrix::Zero(2, 2);
  l(0, 0) = 1.0 / alpha;
  l(1, 1) = alpha;
  return LinearMap::from(std::move(l));
}

inline std::vector<Operator> apply_linear(const LinearMap& map, std::span<const Operator> xs) {
  if (static_cast<Eigen::Index>(xs.size()) != map.size()) {
    throw Error("apply_linear: map size does not match observable count");
  }
  if (!map.invertible()) throw Error("apply_linear: map is singular");
  std::vector<Operator> out;
  for (Eigen::Index i = 0; i < map.size(); ++i) {
    CMatrix m = CMatrix::Zero(xs[0].matrix.rows(), xs[0].matrix.cols());
    bool hermitian = true;
    for (Eigen::Index j = 0; j < map.size(); ++j) {
      hilbert::require_same_basis(xs[0].basis, xs[j].basis, "apply_linear");
      if (map.lambda(i, j) != 0.0) m += map.lambda(i, j) * xs[j].matrix;
      hermitian = hermitian && xs[j].hermitian;
    }
    if (hermitian) m = 0.5 * (m + m.adjoint()).eval();
    out.push_back(Operator{xs[0].basis, std::move(m), hermitian});
  }
  return out;
}

/// Lambda M Lambda^T; applies to both the uncertainty and commutator matrices.
inline RMatrix transform_sigma(const LinearMap& map, const RMatrix& sigma) {
  if (sigma.rows() != map.size() || sigma.cols() != map.size()) {
    throw Error("transform_sigma: dimension mismatch");
  }
  return map.lambda * sigma * map.lambda.transpose();
}

// ---------------------------------------------------------------------------
// Random maps

enum class MapKind { gl, orthogonal, symplectic };

inline MapKind parse_map_kind(const std::string& s) {
  if (s == "gl") return MapKind::gl;
  if (s == "orthogonal") return MapKind::orthogonal;
  if (s == "symplectic") return MapKind::symplectic;
  throw Error("unknown map kind '" + s + "'");
}

/// One random map. Orthogonal draws are rotations (det +1) so that at
/// n = 2 they are also symplectic; symplectic draws are exp(J S) with S
/// random symmetric.
inline LinearMap random_map(MapKind kind, Eigen::Index n, std::mt19937_64& rng,
                            double spread = 0.5) {
  if (n < 1) throw Error("random_map: n must be positive");
  std::normal_distribution<double> g(0.0, 1.0);
  auto gaussian = [&](Eigen::Index r, Eigen::Index c) {
    RMatrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = g(rng);
    return m;
  };
  switch (kind) {
    case MapKind::gl:
      while (true) {
        RMatrix m = gaussian(n, n);
        if (std::abs(m.determinant()) > 1e-6) return LinearMap::from(std::move(m));
      }
    case MapKind::orthogonal: {
      Eigen::HouseholderQR<RMatrix> qr(gaussian(n, n));
      RMatrix q = qr.householderQ();
      const RMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
      for (Eigen::Index k = 0; k < n; ++k)
        if (r(k, k) < 0.0) q.col(k) *= -1.0;
      if (q.determinant() < 0.0) q.col(0) *= -1.0;
      return LinearMap::from(std::move(q));
    }
    case MapKind::symplectic: {
      if (n % 2 != 0) throw Error("random_map: symplectic maps need even n");
      RMatrix s = gaussian(n, n);
      s = (0.5 * spread * (s + s.transpose())).eval();
      const RMatrix h = symplectic_metric(n / 2) * s;
      return LinearMap::from(h.exp());
    }
  }
  throw Error("random_map: unknown kind");
}

inline std::vector<LinearMap> random_maps(MapKind kind, Eigen::Index n, std::size_t count,
                                          std::uint64_t seed, double spread = 0.5) {
  std::mt19937_64 rng(seed);
  std::vector<LinearMap> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) out.push_back(random_map(kind, n, rng, spread));
  return out;
}

// ---------------------------------------------------------------------------
// Invariance testing

struct InvarianceEntry {
  Verdict verdict;
  double det = 0.0;
  bool orthogonal = false;
  bool symplectic = false;
  bool special_scale = false;
  bool in_class = false;  // map belongs to the class the relation is invariant under
  bool lhs_preserved = false;
  bool rhs_preserved = false;
  bool sign_preserved = false;
  bool saturation_preserved = false;
};

struct InvarianceReport {
  std::string relation;
  Verdict base;
  std::vector<InvarianceEntry> entries;
  bool sign_preserved_all = true;        // over invertible maps (robertson_n's guarantee)
  bool class_values_preserved = true;    // over in-class maps
  bool saturation_preserved_all = true;  // only meaningful when base.saturated
};

struct InvarianceOptions {
  double value_tol = 1e-9;
  double saturation_tol = 1e-7;
  relations::CatalogParams params;
};

inline const std::vector<std::string>& invariance_relations() {
  static const std::vector<std::string> names = {"robertson_n",     "hadamard_robertson",
                                                 "trace_n",         "symplectic_invariant",
                                                 "schrodinger_two", "trace_two",
                                                 "robertson_two"};
  return names;
}

namespace detail {

inline int sign_of(double margin, double tol) {
  if (std::abs(margin) <= tol) return 0;
  return margin > 0.0 ? 1 : -1;
}

inline bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

}  // namespace detail

/// Evaluates `relation` on Lambda X for every map and compares with the
/// untransformed verdict.
///
/// Invariance classes: robertson_n and schrodinger_two keep their values
/// under |det| = 1 maps (and the margin sign under every invertible map);
/// trace_n keeps its left side under orthogonal maps; trace_two keeps
/// both sides under orthogonal maps; symplectic_invariant keeps its value
/// under symplectic maps; hadamard_robertson and robertson_two only under
/// the special scale maps X_k -> X_k / a, X_{m+k} -> a X_{m+k}.
inline InvarianceReport invariance_report(const std::string& relation,
                                          std::span<const Operator> xs, const QuantumState& s,
                                          std::span<const LinearMap> maps,
                                          const InvarianceOptions& opts = {},
                                          const Tolerances& tol = {}) {
  bool known = false;
  for (const auto& n : invariance_relations()) known = known || n == relation;
  if (!known) throw Error("invariance_report: unsupported relation '" + relation + "'");

  const QuantumState states[] = {s};
  InvarianceReport rep;
  rep.relation = relation;
  rep.base = relations::evaluate(relation, xs, states, opts.params, tol).front();
  const int base_sign = detail::sign_of(rep.base.margin, opts.saturation_tol);

  for (const LinearMap& map : maps) {
    const auto transformed = apply_linear(map, xs);
    InvarianceEntry e;
    e.verdict = relations::evaluate(relation, transformed, states, opts.params, tol).front();
    e.det = map.det;
    e.orthogonal = map.orthogonal();
    e.symplectic = map.symplectic();
    e.special_scale = map.special_scale();
    if (relation == "robertson_n" || relation == "schrodinger_two") {
      e.in_class = map.unimodular();
    } else if (relation == "trace_n" || relation == "trace_two") {
      e.in_class = e.orthogonal;
    } else if (relation == "symplectic_invariant") {
      e.in_class = e.symplectic;
    } else {
      e.in_class = e.special_scale;
    }
    e.lhs_preserved = detail::close(e.verdict.lhs, rep.base.lhs, opts.value_tol);
    e.rhs_preserved = detail::close(e.verdict.rhs, rep.base.rhs, opts.value_tol);
    e.sign_preserved = base_sign == 0
                           ? std::abs(e.verdict.margin) <= opts.saturation_tol
                           : e.verdict.margin * base_sign > 0.0;
    e.saturation_preserved = std::abs(e.verdict.margin) <= opts.saturation_tol;

    if (map.invertible()) rep.sign_preserved_all = rep.sign_preserved_all && e.sign_preserved;
    if (e.in_class) {
      const bool ok = relation == "trace_n" ? e.lhs_preserved : e.lhs_preserved && e.rhs_preserved;
      rep.class_values_preserved = rep.class_values_preserved && ok;
    }
    rep.saturation_preserved_all = rep.saturation_preserved_all && e.saturation_preserved;
    rep.entries.push_back(std::move(e));
  }
  if (!rep.base.saturated) rep.saturation_preserved_all = false;
  return rep;
}

}  // namespace urlab::transforms
