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

#include "catch_amalgamated.hpp"

#include "oracles.hpp"
#include "urlab/hilbert.hpp"

using namespace urlab;
using namespace urlab::hilbert;

TEST_CASE("BasisSpec dimensions and caps", "[hilbert]") {
  CHECK(BasisSpec::fock(10).dim() == 10);
  CHECK(BasisSpec::fock(8, 3).dim() == 512);
  CHECK(BasisSpec::spin(3).dim() == 4);
  CHECK(BasisSpec::su11(0.5, 20).dim() == 20);
  CHECK(BasisSpec::finite(5).dim() == 5);
  CHECK_THROWS_AS(BasisSpec::fock(1), Error);
  CHECK_THROWS_AS(BasisSpec::fock(11, 3), Error);  // 1331 > cap
  CHECK_THROWS_AS(BasisSpec::fock(4, 4), Error);
  CHECK_THROWS_AS(BasisSpec::spin(-1), Error);
  CHECK_THROWS_AS(BasisSpec::su11(0.0, 10), Error);
}

TEST_CASE("Fock operators satisfy the truncated canonical commutator", "[hilbert]") {
  const int n = 12;
  const auto ops = fock_operators(n);
  const CMatrix c = ops.p[0].matrix * ops.q[0].matrix - ops.q[0].matrix * ops.p[0].matrix;
  // [p, q] = -i except in the last corner where truncation leaves +i(N-1).
  for (int k = 0; k < n - 1; ++k) CHECK(std::abs(c(k, k) + kI) < 1e-12);
  CHECK(std::abs(c(n - 1, n - 1) - kI * double(n - 1)) < 1e-12);
  CHECK(max_abs(CMatrix(ops.a[0].matrix - oracle::lowering(n))) < 1e-14);
  CHECK(ops.q[0].hermitian);
  CHECK(ops.p[0].hermitian);
}

TEST_CASE("multimode operators act on their own factor", "[hilbert]") {
  const auto ops = fock_operators(4, 2);
  const CMatrix a1 = ops.a[0].matrix;
  const CMatrix a2 = ops.a[1].matrix;
  CHECK(max_abs(CMatrix(a1 * a2 - a2 * a1)) < 1e-14);
  CHECK(max_abs(CMatrix(a1 * ops.adag[1].matrix - ops.adag[1].matrix * a1)) < 1e-14);
  const auto canon = ops.canonical();
  REQUIRE(canon.size() == 4);
  // ordering (p1, p2, q1, q2)
  CHECK(max_abs(CMatrix(canon[0].matrix - ops.p[0].matrix)) == 0.0);
  CHECK(max_abs(CMatrix(canon[3].matrix - ops.q[1].matrix)) == 0.0);
}

TEST_CASE("spin operators match the ladder oracle", "[hilbert]") {
  for (int two_j = 1; two_j <= 6; ++two_j) {
    oracle::CMatrix jx, jy, jz;
    oracle::spin_matrices(two_j, jx, jy, jz);
    const auto s = spin_operators(two_j);
    CHECK(max_abs(CMatrix(s.J1.matrix - jx)) < 1e-12);
    CHECK(max_abs(CMatrix(s.J2.matrix - jy)) < 1e-12);
    CHECK(max_abs(CMatrix(s.J3.matrix - jz)) < 1e-12);
    const CMatrix c = commutator(s.J1, s.J2).matrix;
    CHECK(max_abs(CMatrix(c - kI * s.J3.matrix)) < 1e-12);
    const double j = 0.5 * two_j;
    const CMatrix casimir = s.J1.matrix * s.J1.matrix + s.J2.matrix * s.J2.matrix +
                            s.J3.matrix * s.J3.matrix;
    CHECK(max_abs(CMatrix(casimir - j * (j + 1) * CMatrix::Identity(two_j + 1, two_j + 1))) <
          1e-12);
  }
  const auto half = spin_operators(1);
  CHECK(max_abs(CMatrix(2.0 * half.J1.matrix - oracle::pauli_x())) < 1e-15);
  CHECK(max_abs(CMatrix(2.0 * half.J2.matrix - oracle::pauli_y())) < 1e-15);
  CHECK(max_abs(CMatrix(2.0 * half.J3.matrix - oracle::pauli_z())) < 1e-15);
}

TEST_CASE("su(1,1) operators obey the algebra below the cut", "[hilbert]") {
  const int n = 16;
  const auto k = su11_operators(0.75, n);
  const CMatrix c12 = commutator(k.K1, k.K2).matrix;
  // [K1, K2] = -i K3 away from the truncation edge
  for (int r = 0; r < n - 1; ++r)
    for (int c = 0; c < n - 1; ++c) CHECK(std::abs(c12(r, c) + kI * k.K3.matrix(r, c)) < 1e-10);
  CHECK(std::abs(k.K3.matrix(0, 0) - 0.75) < 1e-15);
}

TEST_CASE("QuantumState validation", "[hilbert]") {
  const auto b = BasisSpec::finite(2);
  CVector v(2);
  v << 0.9, 0.0;
  CHECK_THROWS_AS(QuantumState::pure(b, v), Error);
  v << 1.0, 0.0;
  CHECK_NOTHROW(QuantumState::pure(b, v));
  CVector wrong(3);
  wrong << 1, 0, 0;
  CHECK_THROWS_AS(QuantumState::pure(b, wrong), Error);

  CMatrix rho = CMatrix::Identity(2, 2) * 0.5;
  const CMatrix r2 = QuantumState::mixed(b, rho).rho();
  CHECK(std::abs((r2 * r2).trace().real() - 0.5) < 1e-15);
  rho(0, 0) = 1.5;
  rho(1, 1) = -0.5;
  CHECK_THROWS_AS(QuantumState::mixed(b, rho), Error);
  CMatrix skew = CMatrix::Identity(2, 2) * 0.5;
  skew(0, 1) = 0.1;
  CHECK_THROWS_AS(QuantumState::mixed(b, skew), Error);
}

TEST_CASE("coherent states match the closed form", "[hilbert]") {
  for (const Complex alpha : {Complex(0, 0), Complex(1.0, 0.5), Complex(-1.2, 1.5)}) {
    const auto s = coherent_state(alpha, 40);
    const oracle::CVector ref = oracle::coherent_amplitudes(alpha, 40);
    CHECK((s.amplitudes() - ref).norm() < 1e-12);
    const CMatrix a = oracle::lowering(40);
    CHECK(std::abs(oracle::expect(a, s.amplitudes()) - alpha) < 1e-10);
  }
  CHECK_THROWS_AS(coherent_state(Complex(3.0, 0.0), 20), Error);
}

TEST_CASE("squeezed state second moments match the Bogoliubov form", "[hilbert]") {
  const int n = 140;
  const auto ops = fock_operators(n);
  for (const double r : {0.1, 0.5, 1.0}) {
    for (const double th : {0.0, 0.7, 2.5}) {
      const Complex alpha(0.6, -0.4);
      const auto s = squeezed_state(alpha, std::polar(r, th), n);
      const oracle::CVector& psi = s.amplitudes();
      const double vq = oracle::variance(ops.q[0].matrix, psi);
      const double vp = oracle::variance(ops.p[0].matrix, psi);
      CHECK(std::abs(vq - 0.5 * (std::cosh(2 * r) - std::sinh(2 * r) * std::cos(th))) < 1e-9);
      CHECK(std::abs(vp - 0.5 * (std::cosh(2 * r) + std::sinh(2 * r) * std::cos(th))) < 1e-9);
      CHECK(std::abs(oracle::expect(oracle::lowering(n), psi) - alpha) < 1e-9);
    }
  }
  CHECK_THROWS_AS(squeezed_state(0.0, 1.6, 200), Error);
  CHECK_THROWS_AS(squeezed_state(0.0, 1.0, 40), Error);
}

TEST_CASE("gaussian state reduces to its special cases", "[hilbert]") {
  const int n = 60;
  const auto pure = squeezed_state(Complex(0.3, 0.2), Complex(0.4, 0.1), n);
  const auto g0 = gaussian_state(Complex(0.3, 0.2), Complex(0.4, 0.1), 0.0, n);
  CHECK(std::abs(fidelity(pure, g0) - 1.0) < 1e-10);

  const auto thermal = gaussian_state(0.0, 0.0, 0.5, n);
  // Bose-Einstein populations
  for (int k = 0; k < 6; ++k) {
    const double want = std::pow(0.5, k) / std::pow(1.5, k + 1);
    CHECK(std::abs(thermal.population(k) - want) < 1e-12);
  }
  // purity of a thermal state is 1 / (2 nbar + 1)
  CHECK(std::abs((thermal.rho() * thermal.rho()).trace().real() - 0.5) < 1e-10);
  CHECK_THROWS_AS(gaussian_state(0.0, 0.0, -0.1, n), Error);
}

TEST_CASE("tail gate refuses states that touch the cut", "[hilbert]") {
  const auto top = fock_state(10, 9);
  CHECK(top.top_occupancy() == 1.0);
  CHECK_THROWS_AS(require_tail(top, 1e-12), Error);
  CHECK_NOTHROW(require_tail(fock_state(10, 7), 1e-12));
  // finite and spin bases have no cut
  CHECK(basis_state(BasisSpec::spin(2), 2).top_occupancy() == 0.0);
}

TEST_CASE("spin coherent states are rotated highest weights", "[hilbert]") {
  for (int two_j : {1, 2, 5}) {
    for (double th : {0.0, 0.4, 2.0}) {
      for (double ph : {0.0, 1.1, -2.3}) {
        const auto s = spin_coherent_state(two_j, th, ph);
        const oracle::CVector ref = oracle::rotated_highest_weight(two_j, th, ph);
        CHECK(std::abs(std::abs(ref.dot(s.amplitudes())) - 1.0) < 1e-12);
        oracle::CMatrix jx, jy, jz;
        oracle::spin_matrices(two_j, jx, jy, jz);
        const double j = 0.5 * two_j;
        CHECK(std::abs(oracle::expect(jz, s.amplitudes()) - j * std::cos(th)) < 1e-12);
        CHECK(std::abs(oracle::expect(jx, s.amplitudes()) - j * std::sin(th) * std::cos(ph)) <
              1e-12);
      }
    }
  }
}

TEST_CASE("product states", "[hilbert]") {
  const auto a = coherent_state(0.5, 8, 1e-6);
  const auto b = fock_state(8, 1);
  const auto ab = product_state({a, b});
  CHECK(ab.basis().modes == 2);
  CHECK(ab.is_pure());
  const auto ops = fock_operators(8, 2);
  CHECK(std::abs(oracle::expect(ops.a[0].matrix, ab.amplitudes()) -
                 oracle::expect(oracle::lowering(8), a.amplitudes())) < 1e-12);
  CHECK(std::abs(oracle::expect(ops.adag[1].matrix * ops.a[1].matrix, ab.amplitudes()) - 1.0) <
        1e-12);
  const auto th = gaussian_state(0.0, 0.0, 0.05, 8, 1e-6);
  CHECK_FALSE(product_state({th, b}).is_pure());
  CHECK_THROWS_AS(product_state({a, fock_state(6, 0)}), Error);
}

TEST_CASE("random states are valid and reproducible", "[hilbert][property]") {
  const auto basis = BasisSpec::fock(12);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto p = random_state(basis, seed);
    CHECK(std::abs(p.amplitudes().norm() - 1.0) < 1e-12);
    CHECK(p.top_occupancy() == 0.0);  // support stops below the cut
    const auto p2 = random_state(basis, seed);
    CHECK((p.amplitudes() - p2.amplitudes()).norm() == 0.0);

    RandomForm form;
    form.mixed = true;
    form.rank = 1 + static_cast<int>(seed % 5);
    const auto m = random_state(basis, seed, form);
    CHECK(std::abs(m.rho().trace().real() - 1.0) < 1e-12);
    CHECK(oracle::min_eig(m.rho()) > -1e-12);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m.rho());
    int rank = 0;
    for (double e : es.eigenvalues()) rank += e > 1e-12;
    CHECK(rank == form.rank);
  }
  const auto spin = random_state(BasisSpec::spin(3), 7);
  CHECK(spin.dim() == 4);
}

TEST_CASE("random observables are Hermitian", "[hilbert]") {
  std::mt19937_64 rng(3);
  const auto x = random_observable(BasisSpec::finite(6), rng);
  CHECK(x.hermitian);
  CHECK(hermiticity_defect(x.matrix) == 0.0);
}

TEST_CASE("fidelity", "[hilbert]") {
  const auto a = fock_state(6, 0);
  const auto b = fock_state(6, 1);
  CHECK(fidelity(a, a) == 1.0);
  CHECK(fidelity(a, b) == 0.0);
  const auto c = coherent_state(0.7, 30);
  CHECK(std::abs(fidelity(coherent_state(0.7, 30), fock_state(30, 0)) -
                 std::exp(-0.49)) < 1e-12);
  CHECK_THROWS_AS(fidelity(a, c), Error);
}
