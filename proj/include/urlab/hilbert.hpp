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
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cstdint>
#include <random>
#include <sstream>
#include <variant>
#include <vector>

namespace urlab::hilbert {

enum class BasisKind { fock, spin, su11, finite };

inline constexpr int kMaxModes = 3;
inline constexpr Eigen::Index kMaxFockDim = 1024;

/// Finite basis an operator or state lives on.
///
/// Fock bases are N^m dimensional with mode 0 as the most significant
/// tensor factor. Spin bases are ordered m = j, j-1, ..., -j. su(1,1)
/// bases hold the lowest N levels of the positive discrete series.
struct BasisSpec {
  BasisKind kind = BasisKind::finite;
  int levels = 0;  // fock: per mode, su11: N
  int modes = 1;
  int two_j = 0;
  double bargmann = 0.0;
  int finite_dim = 0;

  static BasisSpec fock(int levels, int modes = 1) {
    if (levels < 2) throw Error("fock basis: need at least 2 levels");
    if (modes < 1 || modes > kMaxModes) {
      throw Error("fock basis: mode count must be in [1, " + std::to_string(kMaxModes) + "]");
    }
    BasisSpec b;
    b.kind = BasisKind::fock;
    b.levels = levels;
    b.modes = modes;
    if (b.dim() > kMaxFockDim) {
      throw Error("fock basis: dimension " + std::to_string(b.dim()) + " exceeds " +
                  std::to_string(kMaxFockDim));
    }
    return b;
  }

  static BasisSpec spin(int two_j) {
    if (two_j < 1) throw Error("spin basis: j must be a positive half-integer");
    BasisSpec b;
    b.kind = BasisKind::spin;
    b.two_j = two_j;
    return b;
  }

  static BasisSpec su11(double k, int levels) {
    if (!(k > 0.0)) throw Error("su11 basis: Bargmann index must be positive");
    if (levels < 2) throw Error("su11 basis: need at least 2 levels");
    BasisSpec b;
    b.kind = BasisKind::su11;
    b.bargmann = k;
    b.levels = levels;
    return b;
  }

  static BasisSpec finite(int dim) {
    if (dim < 1) throw Error("finite basis: dimension must be positive");
    BasisSpec b;
    b.kind = BasisKind::finite;
    b.finite_dim = dim;
    return b;
  }

  Eigen::Index dim() const {
    switch (kind) {
      case BasisKind::fock: {
        Eigen::Index d = 1;
        for (int k = 0; k < modes; ++k) d *= levels;
        return d;
      }
      case BasisKind::spin:
        return two_j + 1;
      case BasisKind::su11:
        return levels;
      case BasisKind::finite:
        return finite_dim;
    }
    return 0;
  }

  bool truncated() const { return kind == BasisKind::fock || kind == BasisKind::su11; }
  double j() const { return 0.5 * two_j; }

  std::string str() const {
    std::ostringstream os;
    switch (kind) {
      case BasisKind::fock: os << "fock(N=" << levels << ",modes=" << modes << ")"; break;
      case BasisKind::spin: os << "spin(j=" << j() << ")"; break;
      case BasisKind::su11: os << "su11(k=" << bargmann << ",N=" << levels << ")"; break;
      case BasisKind::finite: os << "finite(" << finite_dim << ")"; break;
    }
    return os.str();
  }

  friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

struct Operator {
  BasisSpec basis;
  CMatrix matrix;
  bool hermitian = false;

  /// Builds an operator and verifies the Hermiticity flag when it is set.
  static Operator make(const BasisSpec& basis, CMatrix matrix, bool hermitian,
                       double tol = 1e-10) {
    if (matrix.rows() != basis.dim() || matrix.cols() != basis.dim()) {
      throw Error("operator: matrix shape does not match basis " + basis.str());
    }
    if (hermitian) {
      const double defect = hermiticity_defect(matrix);
      if (defect > tol) {
        std::ostringstream os;
        os << "operator: declared Hermitian but defect is " << defect;
        throw Error(os.str());
      }
    }
    return Operator{basis, std::move(matrix), hermitian};
  }
};

/// Pure amplitude vector or density operator on a basis.
class QuantumState {
 public:
  static QuantumState pure(const BasisSpec& basis, CVector amplitudes, double tol = 1e-10) {
    if (amplitudes.size() != basis.dim()) {
      throw Error("state: amplitude count does not match basis " + basis.str());
    }
    const double norm = amplitudes.norm();
    if (std::abs(norm - 1.0) > tol) {
      std::ostringstream os;
      os << "state: amplitudes have norm " << norm << ", expected 1";
      throw Error(os.str());
    }
    return QuantumState(basis, std::move(amplitudes));
  }

  static QuantumState mixed(const BasisSpec& basis, CMatrix rho, double tol = 1e-10) {
    if (rho.rows() != basis.dim() || rho.cols() != basis.dim()) {
      throw Error("state: density matrix shape does not match basis " + basis.str());
    }
    if (hermiticity_defect(rho) > tol) throw Error("state: density matrix is not Hermitian");
    const double tr = rho.trace().real();
    if (std::abs(tr - 1.0) > tol) {
      std::ostringstream os;
      os << "state: density matrix has trace " << tr << ", expected 1";
      throw Error(os.str());
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) throw Error("state: density matrix is not PSD");
    return QuantumState(basis, std::move(rho));
  }

  const BasisSpec& basis() const { return basis_; }
  Eigen::Index dim() const { return basis_.dim(); }
  bool is_pure() const { return std::holds_alternative<CVector>(form_); }

  const CVector& amplitudes() const {
    if (!is_pure()) throw Error("state: amplitudes requested from a mixed state");
    return std::get<CVector>(form_);
  }

  const CMatrix& rho() const {
    if (is_pure()) throw Error("state: density requested from a pure state");
    return std::get<CMatrix>(form_);
  }

  /// Density operator of either form.
  CMatrix density() const {
    if (is_pure()) {
      const CVector& v = amplitudes();
      return v * v.adjoint();
    }
    return rho();
  }

  /// Population on basis vector `i`.
  double population(Eigen::Index i) const {
    return is_pure() ? std::norm(amplitudes()(i)) : rho()(i, i).real();
  }

  /// Total population of basis vectors touching the two highest levels of
  /// any truncated mode. Zero for untruncated bases.
  double top_occupancy() const {
    if (!basis_.truncated()) return 0.0;
    const int n = basis_.levels;
    const int modes = basis_.kind == BasisKind::fock ? basis_.modes : 1;
    double occ = 0.0;
    for (Eigen::Index i = 0; i < dim(); ++i) {
      Eigen::Index rest = i;
      bool top = false;
      for (int k = 0; k < modes; ++k) {
        if (rest % n >= n - 2) top = true;
        rest /= n;
      }
      if (top) occ += population(i);
    }
    return occ;
  }

 private:
  QuantumState(const BasisSpec& basis, CVector v) : basis_(basis), form_(std::move(v)) {}
  QuantumState(const BasisSpec& basis, CMatrix m) : basis_(basis), form_(std::move(m)) {}

  BasisSpec basis_;
  std::variant<CVector, CMatrix> form_;
};

/// Refuses truncated-basis states whose top-level population exceeds `tail`.
inline void require_tail(const QuantumState& s, double tail) {
  if (!s.basis().truncated()) return;
  const double occ = s.top_occupancy();
  if (occ > tail) {
    std::ostringstream os;
    os << "state on " << s.basis().str() << " has top-two-level occupancy " << occ
       << " above tail tolerance " << tail;
    throw Error(os.str());
  }
}

inline void require_same_basis(const BasisSpec& a, const BasisSpec& b, const char* who) {
  if (!(a == b)) throw Error(std::string(who) + ": basis mismatch " + a.str() + " vs " + b.str());
}

// ---------------------------------------------------------------------------
// Operators

namespace detail {

inline CMatrix annihilation(int levels) {
  CMatrix a = CMatrix::Zero(levels, levels);
  for (int n = 1; n < levels; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

/// I (x) ... (x) op (x) ... (x) I with op on `mode`.
inline CMatrix embed_mode(const CMatrix& op, int mode, int modes) {
  const Eigen::Index n = op.rows();
  CMatrix out = CMatrix::Identity(1, 1);
  for (int k = 0; k < modes; ++k) {
    const CMatrix factor = k == mode ? op : CMatrix::Identity(n, n);
    CMatrix next = Eigen::kroneckerProduct(out, factor).eval();
    out = std::move(next);
  }
  return out;
}

inline Operator hermitian_part(const BasisSpec& b, const CMatrix& m) {
  return Operator::make(b, 0.5 * (m + m.adjoint()), true);
}

}  // namespace detail

/// Ladder and canonical operators with q = (a + a^dag)/sqrt2 and
/// p = -i(a - a^dag)/sqrt2, so that [p, q] = -i away from the top level.
struct FockOperators {
  BasisSpec basis;
  std::vector<Operator> a;
  std::vector<Operator> adag;
  std::vector<Operator> q;
  std::vector<Operator> p;

  /// (p_1 .. p_m, q_1 .. q_m): the ordering the symplectic metric assumes.
  std::vector<Operator> canonical() const {
    std::vector<Operator> out(p);
    out.insert(out.end(), q.begin(), q.end());
    return out;
  }
};

inline FockOperators fock_operators(int levels, int modes = 1) {
  const BasisSpec basis = BasisSpec::fock(levels, modes);
  FockOperators ops{basis, {}, {}, {}, {}};
  const CMatrix a1 = detail::annihilation(levels);
  const double r2 = std::sqrt(2.0);
  for (int mu = 0; mu < modes; ++mu) {
    CMatrix a = detail::embed_mode(a1, mu, modes);
    CMatrix ad = a.adjoint();
    CMatrix q = (a + ad) / r2;
    CMatrix p = -kI * (a - ad) / r2;
    ops.a.push_back(Operator::make(basis, a, false));
    ops.adag.push_back(Operator::make(basis, ad, false));
    ops.q.push_back(detail::hermitian_part(basis, q));
    ops.p.push_back(detail::hermitian_part(basis, p));
  }
  return ops;
}

struct SpinOperators {
  BasisSpec basis;
  Operator J1, J2, J3;

  std::vector<Operator> all() const { return {J1, J2, J3}; }
};

/// Spin-j matrices for j = two_j / 2 in the weight basis m = j..-j.
inline SpinOperators spin_operators(int two_j) {
  const BasisSpec basis = BasisSpec::spin(two_j);
  const Eigen::Index d = basis.dim();
  const double j = basis.j();
  CMatrix jp = CMatrix::Zero(d, d);
  CMatrix j3 = CMatrix::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double m = j - static_cast<double>(k);
    j3(k, k) = m;
    if (k > 0) jp(k - 1, k) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
  }
  const CMatrix jm = jp.adjoint();
  return {basis, detail::hermitian_part(basis, 0.5 * (jp + jm)),
          detail::hermitian_part(basis, (jp - jm) / (2.0 * kI)),
          Operator::make(basis, j3, true)};
}

struct Su11Operators {
  BasisSpec basis;
  Operator K1, K2, K3;

  std::vector<Operator> all() const { return {K1, K2, K3}; }
};

/// Positive discrete series of su(1,1), truncated to `levels` states:
/// K3|n> = (k+n)|n>, K+|n> = sqrt((n+1)(2k+n))|n+1>.
inline Su11Operators su11_operators(double k, int levels) {
  const BasisSpec basis = BasisSpec::su11(k, levels);
  CMatrix kp = CMatrix::Zero(levels, levels);
  CMatrix k3 = CMatrix::Zero(levels, levels);
  for (int n = 0; n < levels; ++n) {
    k3(n, n) = k + n;
    if (n + 1 < levels) kp(n + 1, n) = std::sqrt((n + 1.0) * (2.0 * k + n));
  }
  const CMatrix km = kp.adjoint();
  return {basis, detail::hermitian_part(basis, 0.5 * (kp + km)),
          detail::hermitian_part(basis, (kp - km) / (2.0 * kI)),
          Operator::make(basis, k3, true)};
}

inline Operator commutator(const Operator& x, const Operator& y) {
  require_same_basis(x.basis, y.basis, "commutator");
  return Operator{x.basis, x.matrix * y.matrix - y.matrix * x.matrix, false};
}

// ---------------------------------------------------------------------------
// States

inline QuantumState basis_state(const BasisSpec& basis, Eigen::Index index) {
  if (index < 0 || index >= basis.dim()) throw Error("basis_state: index out of range");
  CVector v = CVector::Zero(basis.dim());
  v(index) = 1.0;
  return QuantumState::pure(basis, std::move(v));
}

/// Single-mode Fock state |n> on N levels.
inline QuantumState fock_state(int levels, int n) {
  return basis_state(BasisSpec::fock(levels), n);
}

namespace detail {

/// Truncates a working-space vector to the first `levels` entries after
/// checking both the discarded weight and the top-two-level population.
inline CVector truncate_checked(const CVector& work, int levels, double tail, const char* who) {
  const double discarded =
      work.size() > levels ? work.tail(work.size() - levels).squaredNorm() : 0.0;
  const double top = work.segment(levels - 2, 2).squaredNorm();
  if (discarded > tail || top > tail) {
    std::ostringstream os;
    os << who << ": truncation at N = " << levels << " leaves tail weight "
       << std::max(discarded, top) << " above " << tail << "; increase N";
    throw Error(os.str());
  }
  CVector v = work.head(levels);
  v /= v.norm();
  return v;
}

}  // namespace detail

/// Canonical coherent state |alpha> on N Fock levels.
inline QuantumState coherent_state(Complex alpha, int levels, double tail = 1e-12) {
  const BasisSpec basis = BasisSpec::fock(levels);
  const double a2 = std::norm(alpha);
  // amplitudes grow until n ~ |alpha|^2, so run well past the cut to bound the tail
  const int work = std::max(levels + 2, static_cast<int>(levels + 4 * a2 + 64));
  CVector c(work);
  c(0) = std::exp(-0.5 * a2);
  for (int n = 1; n < work; ++n) c(n) = c(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  return QuantumState::pure(basis, detail::truncate_checked(c, levels, tail, "coherent_state"));
}

inline constexpr double kMaxSqueeze = 1.5;

/// Smallest N the squeezed-state constructor is likely to accept for |zeta|.
inline int suggested_levels(Complex zeta) {
  return static_cast<int>(std::ceil(25.0 * std::exp(2.0 * std::abs(zeta))));
}

/// D(alpha) S(zeta) |0> with S(zeta) = exp((zeta* a^2 - zeta a^dag^2)/2),
/// computed by matrix exponentials in a padded working space.
inline QuantumState squeezed_state(Complex alpha, Complex zeta, int levels, double tail = 1e-12) {
  if (std::abs(zeta) > kMaxSqueeze) {
    std::ostringstream os;
    os << "squeezed_state: |zeta| = " << std::abs(zeta) << " exceeds " << kMaxSqueeze;
    throw Error(os.str());
  }
  BasisSpec::fock(levels);
  const int work = 2 * levels + 20;
  const CMatrix a = detail::annihilation(work);
  const CMatrix ad = a.adjoint();
  CVector v = CVector::Zero(work);
  v(0) = 1.0;
  if (zeta != Complex{0.0}) {
    const CMatrix gen = 0.5 * (std::conj(zeta) * a * a - zeta * ad * ad);
    v = gen.exp() * v;
  }
  if (alpha != Complex{0.0}) {
    const CMatrix gen = alpha * ad - std::conj(alpha) * a;
    v = gen.exp() * v;
  }
  return QuantumState::pure(BasisSpec::fock(levels),
                            detail::truncate_checked(v, levels, tail, "squeezed_state"));
}

/// D(alpha) S(zeta) rho_thermal(nbar) S^dag D^dag, truncated to N levels.
inline QuantumState gaussian_state(Complex alpha, Complex zeta, double nbar, int levels,
                                   double tail = 1e-12) {
  if (nbar < 0.0) throw Error("gaussian_state: thermal occupation must be non-negative");
  if (std::abs(zeta) > kMaxSqueeze) throw Error("gaussian_state: squeeze exceeds cap");
  const BasisSpec basis = BasisSpec::fock(levels);
  const int work = 2 * levels + 20;
  const CMatrix a = detail::annihilation(work);
  const CMatrix ad = a.adjoint();
  CMatrix u = CMatrix::Identity(work, work);
  if (zeta != Complex{0.0}) u = (0.5 * (std::conj(zeta) * a * a - zeta * ad * ad)).exp();
  if (alpha != Complex{0.0}) u = (alpha * ad - std::conj(alpha) * a).exp() * u;

  CMatrix rho = CMatrix::Zero(levels, levels);
  double weight = 0.0;
  const double ratio = nbar / (nbar + 1.0);
  double pk = 1.0 / (nbar + 1.0);
  for (int k = 0; k < work && pk > 1e-300; ++k, pk *= ratio) {
    const CVector col = u.col(k);
    const double top = col.segment(levels - 2, 2).squaredNorm();
    const double discarded = col.tail(work - levels).squaredNorm();
    weight += pk * std::max(top, discarded);
    rho += pk * col.head(levels) * col.head(levels).adjoint();
  }
  if (weight > tail) {
    std::ostringstream os;
    os << "gaussian_state: truncation at N = " << levels << " leaves tail weight " << weight;
    throw Error(os.str());
  }
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  return QuantumState::mixed(basis, std::move(rho));
}

/// Rotation of |j, j> to polar angle theta and azimuth phi:
/// exp(-i phi J3) exp(-i theta J2) |j, j>.
inline QuantumState spin_coherent_state(int two_j, double theta, double phi) {
  const BasisSpec basis = BasisSpec::spin(two_j);
  const Eigen::Index d = basis.dim();
  const double j = basis.j();
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  CVector v(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double m = j - static_cast<double>(k);
    // binomial(2j, k) via lgamma keeps large j finite
    const double log_binom =
        std::lgamma(two_j + 1.0) - std::lgamma(k + 1.0) - std::lgamma(two_j - k + 1.0);
    const double mag = std::exp(0.5 * log_binom) * std::pow(c, static_cast<double>(two_j - k)) *
                       std::pow(s, static_cast<double>(k));
    v(k) = mag * std::exp(-kI * (m * phi));
  }
  v /= v.norm();
  return QuantumState::pure(basis, std::move(v));
}

/// Tensor product of single-mode Fock states on a common level count.
inline QuantumState product_state(const std::vector<QuantumState>& modes) {
  if (modes.empty()) throw Error("product_state: no modes");
  const int levels = modes.front().basis().levels;
  for (const auto& s : modes) {
    if (s.basis().kind != BasisKind::fock || s.basis().modes != 1 || s.basis().levels != levels) {
      throw Error("product_state: every factor must be a single-mode Fock state on N levels");
    }
  }
  const BasisSpec basis = BasisSpec::fock(levels, static_cast<int>(modes.size()));
  bool all_pure = true;
  for (const auto& s : modes) all_pure = all_pure && s.is_pure();
  if (all_pure) {
    CVector v = CVector::Ones(1);
    for (const auto& s : modes) {
      CVector next = Eigen::kroneckerProduct(v, s.amplitudes()).eval();
      v = std::move(next);
    }
    v /= v.norm();
    return QuantumState::pure(basis, std::move(v));
  }
  CMatrix rho = CMatrix::Ones(1, 1);
  for (const auto& s : modes) {
    CMatrix next = Eigen::kroneckerProduct(rho, s.density()).eval();
    rho = std::move(next);
  }
  return QuantumState::mixed(basis, std::move(rho));
}

/// Shape of a random draw: pure (Haar) or mixed with the given rank.
/// A positive `support` restricts the draw to the lowest `support` levels
/// of every mode (or the first `support` basis vectors of untruncated
/// bases). Zero means everything on untruncated bases and levels - 2 on
/// truncated ones, which keeps default draws clear of the top levels.
struct RandomForm {
  bool mixed = false;
  int rank = 1;
  int support = 0;
};

namespace detail {

inline std::vector<Eigen::Index> support_indices(const BasisSpec& basis, int support) {
  std::vector<Eigen::Index> out;
  const Eigen::Index d = basis.dim();
  if (support <= 0) {
    if (!basis.truncated()) {
      for (Eigen::Index i = 0; i < d; ++i) out.push_back(i);
      return out;
    }
    support = std::max(1, basis.levels - 2);  // clear of the tail gate
  }
  if (!basis.truncated()) {
    if (support > d) throw Error("random_state: support exceeds basis dimension");
    for (Eigen::Index i = 0; i < support; ++i) out.push_back(i);
    return out;
  }
  if (support > basis.levels) throw Error("random_state: support exceeds level count");
  const int n = basis.levels;
  const int modes = basis.kind == BasisKind::fock ? basis.modes : 1;
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::Index rest = i;
    bool inside = true;
    for (int k = 0; k < modes; ++k) {
      if (rest % n >= support) inside = false;
      rest /= n;
    }
    if (inside) out.push_back(i);
  }
  return out;
}

inline CVector complex_normal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = g(rng);
    const double im = g(rng);
    v(i) = Complex(re, im);
  }
  return v;
}

}  // namespace detail

inline QuantumState random_state(const BasisSpec& basis, std::mt19937_64& rng,
                                 const RandomForm& form = {}) {
  const auto idx = detail::support_indices(basis, form.support);
  const auto sub = static_cast<Eigen::Index>(idx.size());
  auto scatter = [&](const CVector& small) {
    CVector v = CVector::Zero(basis.dim());
    for (Eigen::Index k = 0; k < sub; ++k) v(idx[static_cast<std::size_t>(k)]) = small(k);
    return v;
  };
  if (!form.mixed) {
    CVector v = scatter(detail::complex_normal(sub, rng));
    v /= v.norm();
    return QuantumState::pure(basis, std::move(v));
  }
  if (form.rank < 1 || form.rank > sub) {
    throw Error("random_state: rank " + std::to_string(form.rank) + " outside [1, " +
                std::to_string(sub) + "]");
  }
  CMatrix rho = CMatrix::Zero(basis.dim(), basis.dim());
  for (int r = 0; r < form.rank; ++r) {
    const CVector v = scatter(detail::complex_normal(sub, rng));
    rho += v * v.adjoint();
  }
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  return QuantumState::mixed(basis, std::move(rho));
}

inline QuantumState random_state(const BasisSpec& basis, std::uint64_t seed,
                                 const RandomForm& form = {}) {
  std::mt19937_64 rng(seed);
  return random_state(basis, rng, form);
}

/// Random Hermitian matrix with i.i.d. complex-normal entries, symmetrized.
inline Operator random_observable(const BasisSpec& basis, std::mt19937_64& rng) {
  const Eigen::Index d = basis.dim();
  CMatrix m(d, d);
  for (Eigen::Index j = 0; j < d; ++j) m.col(j) = detail::complex_normal(d, rng);
  return detail::hermitian_part(basis, m);
}

/// |<a|b>|^2 for pure states, Tr(rho_a rho_b) otherwise.
inline double fidelity(const QuantumState& a, const QuantumState& b) {
  require_same_basis(a.basis(), b.basis(), "fidelity");
  if (a.is_pure() && b.is_pure()) return std::norm(a.amplitudes().dot(b.amplitudes()));
  return (a.density() * b.density()).trace().real();
}

}  // namespace urlab::hilbert
