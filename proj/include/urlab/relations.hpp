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
#include "urlab/matkit.hpp"
#include "urlab/moments.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace urlab::relations {

using hilbert::Operator;
using hilbert::QuantumState;
using matkit::MinorIndex;

namespace detail {

inline void require_count(std::span<const Operator> xs, std::size_t n, const char* who) {
  if (xs.size() != n) {
    throw Error(std::string(who) + ": expected " + std::to_string(n) + " observables, got " +
                std::to_string(xs.size()));
  }
}

inline const hilbert::BasisSpec& require_fock(const QuantumState& s, const char* who) {
  if (s.basis().kind != hilbert::BasisKind::fock) {
    throw Error(std::string(who) + ": needs a Fock-basis state, got " + s.basis().str());
  }
  return s.basis();
}

struct CanonicalPair {
  Operator q;
  Operator p;
};

inline CanonicalPair canonical_pair(const hilbert::BasisSpec& b, int mode) {
  if (mode < 0 || mode >= b.modes) throw Error("canonical pair: mode out of range");
  auto ops = hilbert::fock_operators(b.levels, b.modes);
  return {ops.q[static_cast<std::size_t>(mode)], ops.p[static_cast<std::size_t>(mode)]};
}

/// Variances and covariance of one pair in one state.
struct PairMoments {
  double var_x;
  double var_y;
  double cov;
};

inline PairMoments pair_moments(const Operator& x, const Operator& y, const QuantumState& s,
                                const Tolerances& tol) {
  return {moments::covariance(x, x, s, tol), moments::covariance(y, y, s, tol),
          moments::covariance(x, y, s, tol)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Two observables, one state

/// (dp)^2 (dq)^2 >= 1/4 for the canonical pair of `mode`.
inline Verdict heisenberg_kennard(const QuantumState& s, const Tolerances& tol = {},
                                  int mode = 0) {
  const auto& b = detail::require_fock(s, "heisenberg_kennard");
  const auto pq = detail::canonical_pair(b, mode);
  const double vq = moments::covariance(pq.q, pq.q, s, tol);
  const double vp = moments::covariance(pq.p, pq.p, s, tol);
  return make_verdict("heisenberg_kennard", vp * vq, 0.25, tol, "mode=" + std::to_string(mode));
}

/// (dX)^2 (dY)^2 >= |<[X,Y]>|^2 / 4.
inline Verdict robertson_two(const Operator& x, const Operator& y, const QuantumState& s,
                             const Tolerances& tol = {}) {
  const auto m = detail::pair_moments(x, y, s, tol);
  const double c = std::abs(moments::mean_commutator(x, y, s, tol));
  return make_verdict("robertson_two", m.var_x * m.var_y, 0.25 * c * c, tol);
}

/// (dX)^2 + (dY)^2 >= |<[X,Y]>|.
inline Verdict trace_two(const Operator& x, const Operator& y, const QuantumState& s,
                         const Tolerances& tol = {}) {
  const auto m = detail::pair_moments(x, y, s, tol);
  const double c = std::abs(moments::mean_commutator(x, y, s, tol));
  return make_verdict("trace_two", m.var_x + m.var_y, c, tol);
}

/// (dX)^2 (dY)^2 - (dXY)^2 >= |<[X,Y]>|^2 / 4.
inline Verdict schrodinger_two(const Operator& x, const Operator& y, const QuantumState& s,
                               const Tolerances& tol = {}) {
  const auto m = detail::pair_moments(x, y, s, tol);
  const double c = std::abs(moments::mean_commutator(x, y, s, tol));
  return make_verdict("schrodinger_two", m.var_x * m.var_y - m.cov * m.cov, 0.25 * c * c, tol);
}

// ---------------------------------------------------------------------------
// n observables, one state

inline Verdict robertson_n(const moments::MomentBundle& b, const Tolerances& tol = {}) {
  if (b.size() < 2) throw Error("robertson_n: needs at least 2 observables");
  return make_verdict("robertson_n", b.sigma.determinant(), b.commutators.determinant(), tol,
                      "n=" + std::to_string(b.size()));
}

/// det sigma >= det C.
inline Verdict robertson_n(std::span<const Operator> xs, const QuantumState& s,
                           const Tolerances& tol = {}) {
  return robertson_n(moments::moment_bundle(xs, s, tol), tol);
}

inline Verdict hadamard_robertson(const moments::MomentBundle& b, const Tolerances& tol = {}) {
  if (b.size() < 2) throw Error("hadamard_robertson: needs at least 2 observables");
  return make_verdict("hadamard_robertson", b.sigma.diagonal().prod(),
                      b.commutators.determinant(), tol, "n=" + std::to_string(b.size()));
}

/// prod_i (dX_i)^2 >= det C.
inline Verdict hadamard_robertson(std::span<const Operator> xs, const QuantumState& s,
                                  const Tolerances& tol = {}) {
  return hadamard_robertson(moments::moment_bundle(xs, s, tol), tol);
}

inline Verdict trace_n(const moments::MomentBundle& b, const Tolerances& tol = {}) {
  const Eigen::Index n = b.size();
  if (n < 2) throw Error("trace_n: needs at least 2 observables");
  // |<[X_i, X_j]>| = 2 |C_ij|
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) sum += 2.0 * std::abs(b.commutators(i, j));
  return make_verdict("trace_n", b.sigma.trace(), sum / static_cast<double>(n - 1), tol,
                      "n=" + std::to_string(n));
}

/// Tr sigma >= 1/(n-1) sum_{j>i} |<[X_i, X_j]>|.
inline Verdict trace_n(std::span<const Operator> xs, const QuantumState& s,
                       const Tolerances& tol = {}) {
  return trace_n(moments::moment_bundle(xs, s, tol), tol);
}

inline Verdict trace_even(const moments::MomentBundle& b, const Tolerances& tol = {}) {
  const Eigen::Index n = b.size();
  if (n < 2 || n % 2 != 0) throw Error("trace_even: needs an even number of observables");
  const Eigen::Index half = n / 2;
  double sum = 0.0;
  for (Eigen::Index mu = 0; mu < half; ++mu) sum += 2.0 * std::abs(b.commutators(mu, half + mu));
  return make_verdict("trace_even", b.sigma.trace(), sum, tol, "n=" + std::to_string(n));
}

/// Tr sigma >= sum_mu |<[X_mu, X_{m+mu}]>|, first half paired with second.
inline Verdict trace_even(std::span<const Operator> xs, const QuantumState& s,
                          const Tolerances& tol = {}) {
  return trace_even(moments::moment_bundle(xs, s, tol), tol);
}

/// Tr[(i sigma J)^{2k}] >= m / 2^{2k-1} for the uncertainty matrix of
/// (p_1..p_m, q_1..q_m).
inline Verdict symplectic_invariant_ur(const RMatrix& sigma, int k, const Tolerances& tol = {}) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0 || sigma.rows() % 2 != 0) {
    throw Error("symplectic_invariant_ur: sigma must be square of even dimension");
  }
  if (k < 1) throw Error("symplectic_invariant_ur: power k must be >= 1");
  const Eigen::Index m = sigma.rows() / 2;
  const CMatrix base = kI * (sigma * symplectic_metric(m)).cast<Complex>();
  CMatrix power = CMatrix::Identity(base.rows(), base.cols());
  for (int r = 0; r < 2 * k; ++r) power = (power * base).eval();
  const Complex tr = power.trace();
  if (std::abs(tr.imag()) > tol.residue * std::max(1.0, std::abs(tr.real()))) {
    throw Error("symplectic_invariant_ur: trace has imaginary residue " +
                std::to_string(tr.imag()));
  }
  const double rhs = static_cast<double>(m) / std::pow(2.0, 2 * k - 1);
  return make_verdict("symplectic_invariant", tr.real(), rhs, tol,
                      "m=" + std::to_string(m) + " k=" + std::to_string(k));
}

inline Verdict symplectic_invariant_ur(std::span<const Operator> canonical, const QuantumState& s,
                                       int k, const Tolerances& tol = {}) {
  return symplectic_invariant_ur(moments::moment_bundle(canonical, s, tol).sigma, k, tol);
}

// ---------------------------------------------------------------------------
// Two states

/// The three state-entangled relations for (q, p) in states psi and phi:
///   dq_psi dp_phi + dq_phi dp_psi >= 1
///   dq_psi^2 dp_phi^2 + dq_phi^2 dp_psi^2 >= 1/2
///   the same minus 2 |dqp_psi dqp_phi| >= 1/2
inline std::array<Verdict, 3> two_state_suite(const QuantumState& psi, const QuantumState& phi,
                                              const Tolerances& tol = {}, int mode = 0) {
  const auto& b = detail::require_fock(psi, "two_state_suite");
  hilbert::require_same_basis(b, phi.basis(), "two_state_suite");
  const auto pq = detail::canonical_pair(b, mode);
  const auto a = detail::pair_moments(pq.q, pq.p, psi, tol);
  const auto c = detail::pair_moments(pq.q, pq.p, phi, tol);
  const double cross = a.var_x * c.var_y + c.var_x * a.var_y;
  const std::string ctx = "mode=" + std::to_string(mode);
  return {
      make_verdict("two_state_trace",
                   std::sqrt(a.var_x) * std::sqrt(c.var_y) + std::sqrt(c.var_x) * std::sqrt(a.var_y),
                   1.0, tol, ctx),
      make_verdict("two_state_heisenberg", cross, 0.5, tol, ctx),
      make_verdict("two_state_schrodinger", cross - 2.0 * std::abs(a.cov * c.cov), 0.5, tol, ctx),
  };
}

/// Schrodinger relation extended to two states:
/// dX1^2 dY2^2 + dX2^2 dY1^2 - 2|dXY1 dXY2| >= |<[X,Y]>_1 <[X,Y]>_2| / 2.
inline Verdict schrodinger_two_state(const Operator& x, const Operator& y, const QuantumState& s1,
                                     const QuantumState& s2, const Tolerances& tol = {}) {
  hilbert::require_same_basis(s1.basis(), s2.basis(), "schrodinger_two_state");
  const auto a = detail::pair_moments(x, y, s1, tol);
  const auto c = detail::pair_moments(x, y, s2, tol);
  const double c1 = std::abs(moments::mean_commutator(x, y, s1, tol));
  const double c2 = std::abs(moments::mean_commutator(x, y, s2, tol));
  const double lhs = a.var_x * c.var_y + c.var_x * a.var_y - 2.0 * std::abs(a.cov * c.cov);
  return make_verdict("schrodinger_two_state", lhs, 0.5 * c1 * c2, tol);
}

// ---------------------------------------------------------------------------
// Principal and characteristic relations from physical Gram matrices

/// Which Lemma inequalities to evaluate on the Gram matrices H_mu.
///
/// `moment_order` 1 uses G(X; psi_mu); higher orders use the k-th power
/// Gram matrix. Exactly one of `minor` / `characteristic` selects the
/// minor-type pair; `include_trace` adds the trace inequalities.
///
/// With `adapt_orientation`, every H_mu after the first is replaced by the
/// least favourable of its PSD variants D H D and D H^T D (D a diagonal
/// sign matrix, the Gram matrices of X_i -> -X_i and of conjugated
/// vectors), and each verdict keeps its smallest margin. For two
/// observables and two states this turns the minor_sum pair into the
/// two-state Schrodinger relation with absolute values.
struct PrincipalSpec {
  int moment_order = 1;
  std::optional<MinorIndex> minor;
  std::optional<int> characteristic;
  bool include_trace = true;
  bool adapt_orientation = false;
};

inline constexpr std::size_t kMaxOrientationCombos = 4096;

inline std::vector<CMatrix> physical_grams(std::span<const Operator> xs,
                                           std::span<const QuantumState> states, int moment_order,
                                           const Tolerances& tol = {}) {
  std::vector<CMatrix> hs;
  for (const QuantumState& s : states) {
    if (moment_order == 1) {
      hs.push_back(moments::moment_bundle(xs, s, tol).gram);
    } else {
      hs.push_back(moments::gram_higher(xs, moment_order, s, tol));
    }
  }
  return hs;
}

namespace detail {

inline std::vector<CMatrix> orientation_variants(const CMatrix& h) {
  const auto n = static_cast<int>(h.rows());
  std::vector<CMatrix> out;
  for (int mask = 0; mask < (1 << (n - 1)); ++mask) {
    Eigen::VectorXcd d = Eigen::VectorXcd::Ones(n);
    for (int i = 1; i < n; ++i)
      if (mask & (1 << (i - 1))) d(i) = -1.0;
    const CMatrix flipped = d.asDiagonal() * h * d.asDiagonal();
    out.push_back(flipped);
    out.push_back(flipped.transpose());
  }
  return out;
}

inline std::pair<Verdict, Verdict> minor_pair(std::span<const CMatrix> hs,
                                              const PrincipalSpec& spec, const Tolerances& tol) {
  if (spec.minor) return matkit::lemma_minor_check(hs, *spec.minor, tol);
  return matkit::characteristic_check(hs, *spec.characteristic, tol);
}

}  // namespace detail

inline std::vector<Verdict> generate_principal_ur(std::span<const Operator> xs,
                                                  std::span<const QuantumState> states,
                                                  const PrincipalSpec& spec,
                                                  const Tolerances& tol = {}) {
  if (states.empty()) throw Error("generate_principal_ur: no states");
  if (spec.minor.has_value() == spec.characteristic.has_value()) {
    throw Error("generate_principal_ur: choose exactly one of minor / characteristic");
  }
  const std::vector<CMatrix> hs = physical_grams(xs, states, spec.moment_order, tol);
  const auto n = static_cast<int>(xs.size());
  const std::string type = "type=(" + std::to_string(n) + "," + std::to_string(states.size()) +
                           ") k=" + std::to_string(spec.moment_order) +
                           (spec.minor ? " idx=" + spec.minor->str()
                                       : " r=" + std::to_string(*spec.characteristic));

  std::pair<Verdict, Verdict> pair;
  if (!spec.adapt_orientation || hs.size() == 1) {
    pair = detail::minor_pair(hs, spec, tol);
  } else {
    std::vector<std::vector<CMatrix>> variants;
    std::size_t combos = 1;
    for (std::size_t mu = 1; mu < hs.size(); ++mu) {
      variants.push_back(detail::orientation_variants(hs[mu]));
      combos *= variants.back().size();
      if (combos > kMaxOrientationCombos) {
        throw Error("generate_principal_ur: too many orientation combinations");
      }
    }
    std::vector<CMatrix> trial(hs);
    std::vector<std::size_t> pick(variants.size(), 0);
    bool first = true;
    for (std::size_t c = 0; c < combos; ++c) {
      std::size_t rest = c;
      for (std::size_t v = 0; v < variants.size(); ++v) {
        pick[v] = rest % variants[v].size();
        rest /= variants[v].size();
        trial[v + 1] = variants[v][pick[v]];
      }
      auto candidate = detail::minor_pair(trial, spec, tol);
      if (first || candidate.first.margin < pair.first.margin) pair.first = candidate.first;
      if (first || candidate.second.margin < pair.second.margin) pair.second = candidate.second;
      first = false;
    }
  }

  std::vector<Verdict> out;
  for (Verdict v : {pair.first, pair.second}) {
    v.name = "principal_" + v.name;
    v.context = type;
    out.push_back(std::move(v));
  }
  if (spec.include_trace && n >= 2) {
    for (std::size_t mu = 0; mu < hs.size(); ++mu) {
      const auto tv = matkit::lemma_trace_check(hs[mu], tol);
      const std::string ctx = type + " state=" + std::to_string(mu);
      Verdict any = tv.any_n;
      any.name = "principal_" + any.name;
      any.context = ctx;
      out.push_back(std::move(any));
      if (tv.even_n) {
        Verdict even = *tv.even_n;
        even.name = "principal_" + even.name;
        even.context = ctx;
        out.push_back(std::move(even));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gram determinant of a single composed vector

/// Positivity of <chi|chi> for chi = phi - psi<psi|phi> - psi_X<psi_X|phi>,
/// psi_X = (X - <X>_psi) psi / d_psi X, and the bounds read off from it.
///
/// `printed` is d_psi X >= f[X,psi,phi] with the squared overlap in the
/// numerator; it is reported, not asserted. `product` compares
/// d_psi X d_phi X against f[X,psi,phi] f[X,phi,psi]. `corrected` is the
/// first-power form that <chi|chi> >= 0 actually implies.
struct FlemingReport {
  double gram_det = 0.0;
  CVector psi_x;
  double f_psi_phi = 0.0;
  double f_phi_psi = 0.0;
  Verdict printed;
  Verdict product;
  double bound_symmetrized = 0.0;
  Verdict corrected;
  bool printed_violated = false;
};

inline FlemingReport fleming_bound(const Operator& x, const QuantumState& psi,
                                   const QuantumState& phi, const Tolerances& tol = {}) {
  hilbert::require_same_basis(psi.basis(), phi.basis(), "fleming_bound");
  hilbert::require_same_basis(x.basis, psi.basis(), "fleming_bound");
  if (!psi.is_pure() || !phi.is_pure()) throw Error("fleming_bound: needs pure states");
  const CVector& u = psi.amplitudes();
  const CVector& v = phi.amplitudes();
  const double mean_psi = moments::mean(x, psi, tol);
  const double mean_phi = moments::mean(x, phi, tol);
  const double dpsi = std::sqrt(std::max(0.0, moments::covariance(x, x, psi, tol)));
  const double dphi = std::sqrt(std::max(0.0, moments::covariance(x, x, phi, tol)));
  if (dpsi <= 1e-12) throw Error("fleming_bound: X has zero spread in psi");
  const Complex overlap = u.dot(v);
  const double one_minus = 1.0 - std::norm(overlap);
  if (one_minus <= 1e-12) throw Error("fleming_bound: states are parallel");

  FlemingReport r;
  const CVector shifted_psi = x.matrix * u - mean_psi * u;
  r.psi_x = shifted_psi / dpsi;
  const CVector chi = v - u * overlap - r.psi_x * r.psi_x.dot(v);
  r.gram_det = chi.squaredNorm();

  const CVector shifted_phi = x.matrix * v - mean_phi * v;
  const double num_psi_phi = std::norm(v.dot(shifted_psi));
  const double num_phi_psi = std::norm(u.dot(shifted_phi));
  r.f_psi_phi = num_psi_phi / std::sqrt(one_minus);
  r.f_phi_psi = num_phi_psi / std::sqrt(one_minus);
  r.bound_symmetrized = r.f_psi_phi * r.f_phi_psi;
  r.printed = make_verdict("fleming_printed", dpsi, r.f_psi_phi, tol);
  r.product = make_verdict("fleming_product", dpsi * dphi, r.bound_symmetrized, tol);
  r.corrected =
      make_verdict("fleming_corrected", dpsi, std::sqrt(num_psi_phi / one_minus), tol);
  r.printed_violated = !r.printed.holds() && r.gram_det >= -1e-12;
  return r;
}

// ---------------------------------------------------------------------------
// Catalog dispatch

/// Extra knobs for catalog entries that take them.
struct CatalogParams {
  int k = 1;
  int mode = 0;
  std::optional<MinorIndex> minor;
  std::optional<int> characteristic;
  bool adapt_orientation = false;
  bool include_trace = true;
};

inline const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names = {
      "heisenberg_kennard", "robertson_two",   "trace_two",          "schrodinger_two",
      "robertson_n",        "hadamard_robertson", "trace_n",         "trace_even",
      "symplectic_invariant", "two_state_suite", "schrodinger_two_state", "principal",
      "fleming"};
  return names;
}

inline bool is_catalog_name(const std::string& name) {
  for (const auto& n : catalog_names())
    if (n == name) return true;
  return false;
}

/// Evaluates catalog entry `name`; multi-verdict entries return several.
inline std::vector<Verdict> evaluate(const std::string& name, std::span<const Operator> xs,
                                     std::span<const QuantumState> states,
                                     const CatalogParams& params = {},
                                     const Tolerances& tol = {}) {
  auto need_states = [&](std::size_t n) {
    if (states.size() != n) {
      throw Error(name + ": expected " + std::to_string(n) + " states, got " +
                  std::to_string(states.size()));
    }
  };
  if (name == "heisenberg_kennard") {
    need_states(1);
    return {heisenberg_kennard(states[0], tol, params.mode)};
  }
  if (name == "robertson_two" || name == "trace_two" || name == "schrodinger_two") {
    need_states(1);
    detail::require_count(xs, 2, name.c_str());
    if (name == "robertson_two") return {robertson_two(xs[0], xs[1], states[0], tol)};
    if (name == "trace_two") return {trace_two(xs[0], xs[1], states[0], tol)};
    return {schrodinger_two(xs[0], xs[1], states[0], tol)};
  }
  if (name == "robertson_n") {
    need_states(1);
    return {robertson_n(xs, states[0], tol)};
  }
  if (name == "hadamard_robertson") {
    need_states(1);
    return {hadamard_robertson(xs, states[0], tol)};
  }
  if (name == "trace_n") {
    need_states(1);
    return {trace_n(xs, states[0], tol)};
  }
  if (name == "trace_even") {
    need_states(1);
    return {trace_even(xs, states[0], tol)};
  }
  if (name == "symplectic_invariant") {
    need_states(1);
    return {symplectic_invariant_ur(xs, states[0], params.k, tol)};
  }
  if (name == "two_state_suite") {
    need_states(2);
    const auto v = two_state_suite(states[0], states[1], tol, params.mode);
    return {v.begin(), v.end()};
  }
  if (name == "schrodinger_two_state") {
    need_states(2);
    detail::require_count(xs, 2, name.c_str());
    return {schrodinger_two_state(xs[0], xs[1], states[0], states[1], tol)};
  }
  if (name == "principal") {
    PrincipalSpec spec;
    spec.moment_order = params.k;
    spec.minor = params.minor;
    spec.characteristic = params.characteristic;
    spec.adapt_orientation = params.adapt_orientation;
    spec.include_trace = params.include_trace;
    if (!spec.minor && !spec.characteristic) {
      spec.minor = MinorIndex::full(static_cast<int>(xs.size()));
    }
    return generate_principal_ur(xs, states, spec, tol);
  }
  if (name == "fleming") {
    need_states(2);
    detail::require_count(xs, 1, name.c_str());
    const auto r = fleming_bound(xs[0], states[0], states[1], tol);
    return {make_verdict("fleming_gram", r.gram_det, 0.0, tol), r.corrected};
  }
  throw Error("unknown relation '" + name + "'");
}

}  // namespace urlab::relations
