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

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

namespace urlab::matkit {

/// H = S + iA with S real symmetric and A real antisymmetric.
struct HermitianSplit {
  RMatrix S;
  RMatrix A;

  CMatrix reassemble() const {
    return S.cast<Complex>() + kI * A.cast<Complex>();
  }
};

/// Sorted, distinct, 1-based row/column positions of a principal minor.
class MinorIndex {
 public:
  MinorIndex() = default;
  explicit MinorIndex(std::vector<int> indices) : indices_(std::move(indices)) {
    if (indices_.empty()) throw Error("MinorIndex: empty index set");
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      if (indices_[k] < 1) throw Error("MinorIndex: indices are 1-based");
      if (k > 0 && indices_[k] <= indices_[k - 1]) {
        throw Error("MinorIndex: indices must be strictly increasing");
      }
    }
  }
  MinorIndex(std::initializer_list<int> indices)
      : MinorIndex(std::vector<int>(indices)) {}

  static MinorIndex full(int n) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) idx[static_cast<std::size_t>(k)] = k + 1;
    return MinorIndex(std::move(idx));
  }

  int order() const { return static_cast<int>(indices_.size()); }
  const std::vector<int>& indices() const { return indices_; }

  void check_bounds(Eigen::Index n) const {
    if (indices_.empty()) throw Error("MinorIndex: empty index set");
    if (indices_.back() > n) {
      std::ostringstream os;
      os << "MinorIndex: index " << indices_.back() << " out of range for n = " << n;
      throw Error(os.str());
    }
  }

  std::string str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t k = 0; k < indices_.size(); ++k) os << (k ? "," : "") << indices_[k];
    os << ")";
    return os.str();
  }

  friend bool operator==(const MinorIndex&, const MinorIndex&) = default;

 private:
  std::vector<int> indices_;
};

inline HermitianSplit hermitian_split(const CMatrix& h, double tol = 1e-10) {
  if (h.rows() != h.cols()) throw Error("hermitian_split: matrix is not square");
  const double defect = hermiticity_defect(h);
  if (defect > tol) {
    std::ostringstream os;
    os << "hermitian_split: hermiticity defect " << defect << " exceeds " << tol;
    throw Error(os.str());
  }
  const RMatrix re = h.real();
  const RMatrix im = h.imag();
  return {0.5 * (re + re.transpose()), 0.5 * (im - im.transpose())};
}

inline double min_eigenvalue(const CMatrix& h) {
  if (h.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_psd(const CMatrix& h, double tol = 1e-10) {
  if (h.rows() != h.cols()) throw Error("is_psd: matrix is not square");
  if (hermiticity_defect(h) > tol) throw Error("is_psd: matrix is not Hermitian");
  return min_eigenvalue(h) >= -tol;
}

template <typename Derived>
auto submatrix(const Eigen::MatrixBase<Derived>& b, const MinorIndex& idx) {
  using Scalar = typename Derived::Scalar;
  const int r = idx.order();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sub(r, r);
  const auto& ix = idx.indices();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) sub(i, j) = b(ix[i] - 1, ix[j] - 1);
  return sub;
}

/// Determinant of B restricted to rows and columns `idx`.
template <typename Derived>
typename Derived::Scalar principal_minor(const Eigen::MatrixBase<Derived>& b,
                                         const MinorIndex& idx) {
  if (b.rows() != b.cols()) throw Error("principal_minor: matrix is not square");
  idx.check_bounds(b.rows());
  const auto sub = submatrix(b, idx);
  if (sub.rows() == 1) return sub(0, 0);
  return sub.partialPivLu().determinant();
}

/// Calls fn(MinorIndex) for every r-subset of {1..n} in lexicographic order.
inline void for_each_minor_index(int n, int r, const std::function<void(const MinorIndex&)>& fn) {
  if (r < 1 || r > n) throw Error("for_each_minor_index: order out of range");
  std::vector<int> idx(static_cast<std::size_t>(r));
  for (int k = 0; k < r; ++k) idx[static_cast<std::size_t>(k)] = k + 1;
  while (true) {
    fn(MinorIndex(idx));
    int k = r - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - r + k + 1) --k;
    if (k < 0) break;
    ++idx[static_cast<std::size_t>(k)];
    for (int l = k + 1; l < r; ++l)
      idx[static_cast<std::size_t>(l)] = idx[static_cast<std::size_t>(l - 1)] + 1;
  }
}

/// Sum of all order-r principal minors by explicit enumeration.
template <typename Derived>
typename Derived::Scalar characteristic_coefficient_exhaustive(
    const Eigen::MatrixBase<Derived>& b, int r) {
  if (b.rows() != b.cols()) throw Error("characteristic_coefficient: matrix is not square");
  const int n = static_cast<int>(b.rows());
  if (r < 1 || r > n) throw Error("characteristic_coefficient: order out of range");
  typename Derived::Scalar sum{0};
  for_each_minor_index(n, r, [&](const MinorIndex& idx) { sum += principal_minor(b, idx); });
  return sum;
}

/// All characteristic coefficients e_1..e_n of B as elementary symmetric
/// polynomials of its eigenvalues; entry r-1 holds order r.
template <typename Derived>
std::vector<Complex> characteristic_coefficients_spectral(const Eigen::MatrixBase<Derived>& b) {
  if (b.rows() != b.cols()) throw Error("characteristic_coefficient: matrix is not square");
  const Eigen::Index n = b.rows();
  const CMatrix bc = b.template cast<Complex>();
  Eigen::ComplexEigenSolver<CMatrix> es(bc, false);
  if (es.info() != Eigen::Success) throw Error("characteristic_coefficient: eigensolver failed");
  std::vector<Complex> e(static_cast<std::size_t>(n) + 1, Complex{0.0});
  e[0] = 1.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Complex lam = es.eigenvalues()(k);
    for (Eigen::Index r = k + 1; r >= 1; --r) {
      e[static_cast<std::size_t>(r)] += lam * e[static_cast<std::size_t>(r - 1)];
    }
  }
  return {e.begin() + 1, e.end()};
}

inline constexpr int kExhaustiveCharacteristicMaxDim = 8;

/// C_r^{(n)}(B): exhaustive minor summation up to n = 8, spectral beyond.
template <typename Derived>
typename Derived::Scalar characteristic_coefficient(const Eigen::MatrixBase<Derived>& b, int r) {
  using Scalar = typename Derived::Scalar;
  if (b.rows() != b.cols()) throw Error("characteristic_coefficient: matrix is not square");
  const int n = static_cast<int>(b.rows());
  if (r < 1 || r > n) throw Error("characteristic_coefficient: order out of range");
  if (n <= kExhaustiveCharacteristicMaxDim) return characteristic_coefficient_exhaustive(b, r);
  const Complex c = characteristic_coefficients_spectral(b)[static_cast<std::size_t>(r - 1)];
  if constexpr (std::is_same_v<Scalar, Complex>) {
    return c;
  } else {
    return static_cast<Scalar>(c.real());
  }
}

namespace detail {

inline void validate_psd_list(std::span<const CMatrix> hs, const Tolerances& tol,
                              const char* who) {
  if (hs.empty()) throw Error(std::string(who) + ": empty matrix list");
  const Eigen::Index n = hs.front().rows();
  for (std::size_t mu = 0; mu < hs.size(); ++mu) {
    const CMatrix& h = hs[mu];
    if (h.rows() != n || h.cols() != n) {
      throw Error(std::string(who) + ": dimension mismatch among matrices");
    }
    if (!is_psd(h, tol.psd)) {
      std::ostringstream os;
      os << who << ": matrix " << mu << " is not positive semidefinite (min eigenvalue "
         << min_eigenvalue(h) << ")";
      throw Error(os.str());
    }
  }
}

struct SplitSums {
  RMatrix S;
  RMatrix A;
  CMatrix H;
};

inline SplitSums split_sums(std::span<const CMatrix> hs, const Tolerances& tol) {
  const Eigen::Index n = hs.front().rows();
  SplitSums out{RMatrix::Zero(n, n), RMatrix::Zero(n, n), CMatrix::Zero(n, n)};
  for (const CMatrix& h : hs) {
    const HermitianSplit sp = hermitian_split(h, tol.hermitian);
    out.S += sp.S;
    out.A += sp.A;
    out.H += h;
  }
  return out;
}

}  // namespace detail

/// Principal-minor inequalities on `idx` for PSD H_mu = S_mu + iA_mu:
/// minor_split  M(idx; sum S) >= M(idx; sum A),
/// minor_sum    M(idx; sum H) >= sum M(idx; H_mu).
inline std::pair<Verdict, Verdict> lemma_minor_check(std::span<const CMatrix> hs,
                                                     const MinorIndex& idx,
                                                     const Tolerances& tol = {}) {
  detail::validate_psd_list(hs, tol, "lemma_minor_check");
  idx.check_bounds(hs.front().rows());
  const auto sums = detail::split_sums(hs, tol);
  const std::string ctx = "idx=" + idx.str() + " m=" + std::to_string(hs.size());

  const double m1_lhs = principal_minor(sums.S, idx);
  const double m1_rhs = principal_minor(sums.A, idx);

  const double m2_lhs = principal_minor(sums.H, idx).real();
  double m2_rhs = 0.0;
  for (const CMatrix& h : hs) m2_rhs += principal_minor(h, idx).real();

  return {make_verdict("minor_split", m1_lhs, m1_rhs, tol, ctx),
          make_verdict("minor_sum", m2_lhs, m2_rhs, tol, ctx)};
}

/// The same pair with principal minors replaced by C_r^{(n)}.
inline std::pair<Verdict, Verdict> characteristic_check(std::span<const CMatrix> hs, int r,
                                                        const Tolerances& tol = {}) {
  detail::validate_psd_list(hs, tol, "characteristic_check");
  const int n = static_cast<int>(hs.front().rows());
  if (r < 1 || r > n) throw Error("characteristic_check: order out of range");
  const auto sums = detail::split_sums(hs, tol);
  const std::string ctx = "r=" + std::to_string(r) + " m=" + std::to_string(hs.size());

  const double c1_lhs = characteristic_coefficient(sums.S, r);
  const double c1_rhs = characteristic_coefficient(sums.A, r);
  const double c2_lhs = characteristic_coefficient(sums.H, r).real();
  double c2_rhs = 0.0;
  for (const CMatrix& h : hs) c2_rhs += characteristic_coefficient(h, r).real();

  return {make_verdict("characteristic_split", c1_lhs, c1_rhs, tol, ctx),
          make_verdict("characteristic_sum", c2_lhs, c2_rhs, tol, ctx)};
}

/// Tr S >= 2/(n-1) sum_{j>i} |A_ij|. Needs n >= 2.
inline Verdict lemma_trace_any(const CMatrix& h, const Tolerances& tol = {}) {
  const CMatrix one[] = {h};
  detail::validate_psd_list(one, tol, "lemma_trace_check");
  const Eigen::Index n = h.rows();
  if (n < 2) throw Error("lemma_trace_check: needs n >= 2");
  const HermitianSplit sp = hermitian_split(h, tol.hermitian);
  double off = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) off += std::abs(sp.A(i, j));
  return make_verdict("trace_split", sp.S.trace(), 2.0 / static_cast<double>(n - 1) * off, tol,
                      "n=" + std::to_string(n));
}

/// Tr S >= sum_{nu=1}^{n/2} |A_{nu, n/2+nu}|. Needs even n.
inline Verdict lemma_trace_even(const CMatrix& h, const Tolerances& tol = {}) {
  const CMatrix one[] = {h};
  detail::validate_psd_list(one, tol, "lemma_trace_check");
  const Eigen::Index n = h.rows();
  if (n % 2 != 0) throw Error("lemma_trace_check: paired form needs even n");
  const Eigen::Index half = n / 2;
  const HermitianSplit sp = hermitian_split(h, tol.hermitian);
  double paired = 0.0;
  for (Eigen::Index nu = 0; nu < half; ++nu) paired += std::abs(sp.A(nu, half + nu));
  return make_verdict("trace_split_even", sp.S.trace(), paired, tol, "n=" + std::to_string(n));
}

struct TraceVerdicts {
  Verdict any_n;
  std::optional<Verdict> even_n;
};

/// Both trace inequalities; the even-n one only when n is even.
inline TraceVerdicts lemma_trace_check(const CMatrix& h, const Tolerances& tol = {}) {
  TraceVerdicts out{lemma_trace_any(h, tol), std::nullopt};
  if (h.rows() % 2 == 0) out.even_n = lemma_trace_even(h, tol);
  return out;
}

}  // namespace urlab::matkit
