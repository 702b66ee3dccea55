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

#include <span>
#include <sstream>
#include <vector>

namespace urlab::moments {

using hilbert::Operator;
using hilbert::QuantumState;

/// First and second moments of n observables in one state.
///
/// sigma_ij = <X_i X_j + X_j X_i>/2 - <X_i><X_j>, C_ij = -(i/2)<[X_i, X_j]>,
/// G_ij = <(X_i - <X_i>)(X_j - <X_j>)>. G = sigma + iC.
struct MomentBundle {
  RVector means;
  RMatrix sigma;
  RMatrix commutators;
  CMatrix gram;

  Eigen::Index size() const { return means.size(); }
};

namespace detail {

inline void check_inputs(std::span<const Operator> xs, const QuantumState& s,
                         const Tolerances& tol, const char* who) {
  if (xs.empty()) throw Error(std::string(who) + ": no observables");
  for (const Operator& x : xs) {
    hilbert::require_same_basis(x.basis, s.basis(), who);
    if (!x.hermitian) throw Error(std::string(who) + ": observable is not flagged Hermitian");
  }
  hilbert::require_tail(s, tol.tail);
}

inline double real_checked(Complex z, double tol, const char* what) {
  if (std::abs(z.imag()) > tol * std::max(1.0, std::abs(z.real()))) {
    std::ostringstream os;
    os << what << " has imaginary residue " << z.imag();
    throw Error(os.str());
  }
  return z.real();
}

/// <M> in either state form, without any gate.
inline Complex expectation(const CMatrix& m, const QuantumState& s) {
  if (s.is_pure()) return s.amplitudes().dot(m * s.amplitudes());
  return (s.rho().cwiseProduct(m.transpose())).sum();
}

/// Tr(rho A B) without forming A B.
inline Complex trace_product(const CMatrix& rho_a, const CMatrix& b) {
  return rho_a.cwiseProduct(b.transpose()).sum();
}

/// Spectral factors sqrt(lambda_k) v_k of a density matrix.
inline CMatrix density_factors(const CMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
  const RVector lam = es.eigenvalues().cwiseMax(0.0);
  int keep = 0;
  for (Eigen::Index k = 0; k < lam.size(); ++k) keep += lam(k) > 0.0;
  CMatrix f(rho.rows(), keep);
  int c = 0;
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    if (lam(k) > 0.0) f.col(c++) = std::sqrt(lam(k)) * es.eigenvectors().col(k);
  }
  return f;
}

/// Gram matrix of shifted operators Y_i - shift_i in the state: pure states
/// via shifted-vector inner products, mixed via the spectral sum of the
/// same construction, so the result is PSD by construction.
inline CMatrix shifted_gram(const std::vector<CMatrix>& ys, const RVector& shifts,
                            const QuantumState& s) {
  const auto n = static_cast<Eigen::Index>(ys.size());
  if (s.is_pure()) {
    const CVector& psi = s.amplitudes();
    CMatrix chi(psi.size(), n);
    for (Eigen::Index i = 0; i < n; ++i) chi.col(i) = ys[i] * psi - shifts(i) * psi;
    return chi.adjoint() * chi;
  }
  const CMatrix f = density_factors(s.rho());
  CMatrix g = CMatrix::Zero(n, n);
  std::vector<CMatrix> chis;
  chis.reserve(ys.size());
  for (Eigen::Index i = 0; i < n; ++i) chis.push_back(ys[i] * f - shifts(i) * f);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = (chis[i].adjoint() * chis[j]).trace();
  return g;
}

inline void verify_bundle(const MomentBundle& b, const Tolerances& tol) {
  const Eigen::Index n = b.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (b.sigma(i, i) < -tol.psd) {
      std::ostringstream os;
      os << "moment_bundle: negative variance sigma(" << i << "," << i << ") = " << b.sigma(i, i);
      throw Error(os.str());
    }
  }
  const CMatrix assembled = b.sigma.cast<Complex>() + kI * b.commutators.cast<Complex>();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double scale = std::max(1.0, std::abs(b.gram(i, j)));
      if (std::abs(b.gram(i, j) - assembled(i, j)) > tol.psd * scale) {
        std::ostringstream os;
        os << "moment_bundle: G != sigma + iC at (" << i << "," << j << "): " << b.gram(i, j)
           << " vs " << assembled(i, j);
        throw Error(os.str());
      }
    }
  }
  const double floor = tol.psd * std::max(1.0, b.gram.cwiseAbs().maxCoeff());
  if (matkit::min_eigenvalue(b.gram) < -floor) {
    throw Error("moment_bundle: Gram matrix is not positive semidefinite");
  }
}

}  // namespace detail

/// <X> for a Hermitian X. The imaginary residue is checked, then dropped.
inline double mean(const Operator& x, const QuantumState& s, const Tolerances& tol = {}) {
  const Operator xs[] = {x};
  detail::check_inputs(xs, s, tol, "mean");
  return detail::real_checked(detail::expectation(x.matrix, s), tol.residue, "mean");
}

/// Symmetrized covariance; covariance(X, X, s) is the variance.
inline double covariance(const Operator& x, const Operator& y, const QuantumState& s,
                         const Tolerances& tol = {}) {
  const Operator xs[] = {x, y};
  detail::check_inputs(xs, s, tol, "covariance");
  const double mx = detail::real_checked(detail::expectation(x.matrix, s), tol.residue, "mean");
  const double my = detail::real_checked(detail::expectation(y.matrix, s), tol.residue, "mean");
  Complex sym;
  if (s.is_pure()) {
    const CVector xp = x.matrix * s.amplitudes();
    const CVector yp = y.matrix * s.amplitudes();
    sym = 0.5 * (xp.dot(yp) + yp.dot(xp));
  } else {
    const CMatrix& rho = s.rho();
    sym = 0.5 * (detail::trace_product(rho * x.matrix, y.matrix) +
                 detail::trace_product(rho * y.matrix, x.matrix));
  }
  return detail::real_checked(sym, tol.residue, "covariance") - mx * my;
}

/// <[X, Y]>, which must be purely imaginary for Hermitian X, Y. The two
/// orderings are evaluated separately so truncation damage shows up as a
/// real residue.
inline Complex mean_commutator(const Operator& x, const Operator& y, const QuantumState& s,
                               const Tolerances& tol = {}) {
  const Operator xs[] = {x, y};
  detail::check_inputs(xs, s, tol, "mean_commutator");
  Complex xy, yx;
  if (s.is_pure()) {
    const CVector xp = x.matrix * s.amplitudes();
    const CVector yp = y.matrix * s.amplitudes();
    xy = xp.dot(yp);
    yx = yp.dot(xp);
  } else {
    const CMatrix& rho = s.rho();
    xy = detail::trace_product(rho * x.matrix, y.matrix);
    yx = detail::trace_product(rho * y.matrix, x.matrix);
  }
  const Complex c = xy - yx;
  if (std::abs(c.real()) > tol.residue * std::max(1.0, std::abs(c.imag()))) {
    std::ostringstream os;
    os << "mean_commutator: real residue " << c.real() << " (truncation damage?)";
    throw Error(os.str());
  }
  return Complex(0.0, c.imag());
}

inline MomentBundle moment_bundle(std::span<const Operator> xs, const QuantumState& s,
                                  const Tolerances& tol = {}) {
  detail::check_inputs(xs, s, tol, "moment_bundle");
  const auto n = static_cast<Eigen::Index>(xs.size());
  MomentBundle b{RVector(n), RMatrix(n, n), RMatrix(n, n), CMatrix(n, n)};

  // second moments <X_i X_j>
  CMatrix second(n, n);
  if (s.is_pure()) {
    const CVector& psi = s.amplitudes();
    CMatrix applied(psi.size(), n);
    for (Eigen::Index i = 0; i < n; ++i) applied.col(i) = xs[i].matrix * psi;
    for (Eigen::Index i = 0; i < n; ++i) {
      b.means(i) = detail::real_checked(psi.dot(applied.col(i)), tol.residue, "mean");
    }
    second = applied.adjoint() * applied;
  } else {
    const CMatrix& rho = s.rho();
    std::vector<CMatrix> rx;
    for (Eigen::Index i = 0; i < n; ++i) {
      rx.push_back(rho * xs[i].matrix);
      b.means(i) = detail::real_checked(rx.back().trace(), tol.residue, "mean");
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) second(i, j) = detail::trace_product(rx[i], xs[j].matrix);
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Complex anti = 0.5 * (second(i, j) + second(j, i));
      const Complex comm = second(i, j) - second(j, i);
      b.sigma(i, j) = detail::real_checked(anti, tol.residue, "sigma") - b.means(i) * b.means(j);
      b.commutators(i, j) =
          detail::real_checked(-0.5 * kI * comm, tol.residue, "commutator matrix");
    }
  }

  std::vector<CMatrix> ys;
  for (const Operator& x : xs) ys.push_back(x.matrix);
  b.gram = detail::shifted_gram(ys, b.means, s);
  detail::verify_bundle(b, tol);
  return b;
}

/// Same quantities from explicit operator products traced against the
/// density operator. Independent of the vector route; O(d^3) per pair.
inline MomentBundle moment_bundle_trace_form(std::span<const Operator> xs, const QuantumState& s,
                                             const Tolerances& tol = {}) {
  detail::check_inputs(xs, s, tol, "moment_bundle");
  const auto n = static_cast<Eigen::Index>(xs.size());
  const CMatrix rho = s.density();
  const Eigen::Index d = rho.rows();
  MomentBundle b{RVector(n), RMatrix(n, n), RMatrix(n, n), CMatrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    b.means(i) = detail::real_checked((rho * xs[i].matrix).trace(), tol.residue, "mean");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const CMatrix& xi = xs[i].matrix;
      const CMatrix& xj = xs[j].matrix;
      const CMatrix anti = xi * xj + xj * xi;
      const CMatrix comm = xi * xj - xj * xi;
      b.sigma(i, j) = 0.5 * (rho * anti).trace().real() - b.means(i) * b.means(j);
      b.commutators(i, j) = (-0.5 * kI * (rho * comm).trace()).real();
      const CMatrix di = xi - b.means(i) * CMatrix::Identity(d, d);
      const CMatrix dj = xj - b.means(j) * CMatrix::Identity(d, d);
      b.gram(i, j) = (rho * di * dj).trace();
    }
  }
  return b;
}

inline constexpr int kMaxMomentOrder = 6;

/// G'_ij = <(X_i^k - <X_i>^k)(X_j^k - <X_j>^k)>, the Gram matrix of the
/// k-th order transformed states.
inline CMatrix gram_higher(std::span<const Operator> xs, int k, const QuantumState& s,
                           const Tolerances& tol = {}) {
  if (k < 1 || k > kMaxMomentOrder) {
    throw Error("gram_higher: moment order must be in [1, " + std::to_string(kMaxMomentOrder) +
                "]");
  }
  detail::check_inputs(xs, s, tol, "gram_higher");
  const auto n = static_cast<Eigen::Index>(xs.size());
  std::vector<CMatrix> powers;
  RVector shifts(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = detail::real_checked(detail::expectation(xs[i].matrix, s), tol.residue, "mean");
    shifts(i) = std::pow(m, k);
    CMatrix p = xs[i].matrix;
    for (int r = 1; r < k; ++r) p = (p * xs[i].matrix).eval();
    powers.push_back(std::move(p));
  }
  CMatrix g = detail::shifted_gram(powers, shifts, s);
  const double floor = tol.psd * std::max(1.0, g.cwiseAbs().maxCoeff());
  if (matkit::min_eigenvalue(g) < -floor) throw Error("gram_higher: Gram matrix is not PSD");
  return g;
}

/// G_ij = <chi_i|chi_j> for arbitrary (unnormalized) vectors.
inline CMatrix gram_generic(std::span<const CVector> kets, const Tolerances& tol = {}) {
  if (kets.empty()) throw Error("gram_generic: no vectors");
  const Eigen::Index d = kets.front().size();
  CMatrix k(d, static_cast<Eigen::Index>(kets.size()));
  for (std::size_t i = 0; i < kets.size(); ++i) {
    if (kets[i].size() != d) throw Error("gram_generic: basis mismatch among vectors");
    k.col(static_cast<Eigen::Index>(i)) = kets[i];
  }
  CMatrix g = k.adjoint() * k;
  const double floor = tol.psd * std::max(1.0, g.cwiseAbs().maxCoeff());
  if (matkit::min_eigenvalue(g) < -floor) throw Error("gram_generic: Gram matrix is not PSD");
  return g;
}

}  // namespace urlab::moments
