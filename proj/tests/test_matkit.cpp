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
#include "urlab/matkit.hpp"
#include "urlab/moments.hpp"

using namespace urlab;
using namespace urlab::matkit;

namespace {

CMatrix vacuum_gram(bool q_first) {
  const auto ops = hilbert::fock_operators(24);
  const auto vac = hilbert::fock_state(24, 0);
  const std::vector<hilbert::Operator> xs =
      q_first ? std::vector<hilbert::Operator>{ops.q[0], ops.p[0]}
              : std::vector<hilbert::Operator>{ops.p[0], ops.q[0]};
  return moments::moment_bundle(xs, vac).gram;
}

}  // namespace

TEST_CASE("hermitian_split on fixed inputs", "[matkit]") {
  const auto id = hermitian_split(CMatrix::Identity(2, 2));
  CHECK(max_abs(RMatrix(id.S - RMatrix::Identity(2, 2))) == 0.0);
  CHECK(max_abs(id.A) == 0.0);

  CMatrix h(2, 2);
  h << 1.0, kI, -kI, 1.0;
  const auto sp = hermitian_split(h);
  RMatrix a(2, 2);
  a << 0, 1, -1, 0;
  CHECK(max_abs(RMatrix(sp.S - RMatrix::Identity(2, 2))) == 0.0);
  CHECK(max_abs(RMatrix(sp.A - a)) == 0.0);
}

TEST_CASE("hermitian_split of the oscillator ground-state Gram matrix", "[matkit]") {
  // Ordering (q, p): G_12 = <q p> = i/2, so A_12 = +1/2.
  const auto qp = hermitian_split(vacuum_gram(true));
  CHECK(std::abs(qp.S(0, 0) - 0.5) < 1e-12);
  CHECK(std::abs(qp.S(1, 1) - 0.5) < 1e-12);
  CHECK(std::abs(qp.S(0, 1)) < 1e-12);
  CHECK(std::abs(qp.A(0, 1) - 0.5) < 1e-12);
  CHECK(std::abs(qp.A(1, 0) + 0.5) < 1e-12);
  // Ordering (p, q) flips the antisymmetric part.
  const auto pq = hermitian_split(vacuum_gram(false));
  CHECK(std::abs(pq.A(0, 1) + 0.5) < 1e-12);
}

TEST_CASE("hermitian_split rejects bad input", "[matkit]") {
  CHECK_THROWS_AS(hermitian_split(CMatrix::Zero(2, 3)), Error);
  CMatrix h = CMatrix::Identity(2, 2);
  h(0, 1) = 1.0;
  CHECK_THROWS_AS(hermitian_split(h), Error);
}

TEST_CASE("hermitian_split reassembles random Hermitian matrices", "[matkit][property]") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 7;
    const CMatrix h = oracle::random_hermitian(n, rng);
    const auto sp = hermitian_split(h);
    CHECK(max_abs(CMatrix(sp.reassemble() - h)) <= 1e-12);
    CHECK(max_abs(RMatrix(sp.S - sp.S.transpose())) == 0.0);
    CHECK(max_abs(RMatrix(sp.A + sp.A.transpose())) == 0.0);
  }
}

TEST_CASE("is_psd", "[matkit]") {
  CHECK(is_psd(CMatrix::Identity(3, 3), 1e-10));
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = -1.0;
  CHECK_FALSE(is_psd(d, 1e-10));

  std::mt19937_64 rng(2);
  const CMatrix kets = oracle::random_complex(6, 4, rng);
  const CMatrix gram = kets.adjoint() * kets;
  CHECK(oracle::min_eig(gram) > -1e-12);
  CHECK(is_psd(gram, 1e-10));

  CMatrix skew = CMatrix::Identity(2, 2);
  skew(0, 1) = 0.5;
  CHECK_THROWS_AS(is_psd(skew), Error);
}

TEST_CASE("principal_minor on fixed inputs", "[matkit]") {
  RMatrix d = RMatrix::Zero(3, 3);
  d.diagonal() << 2, 3, 5;
  CHECK(principal_minor(d, MinorIndex{1, 3}) == 10.0);

  RMatrix b(2, 2);
  b << 1, 2, 3, 4;
  CHECK(std::abs(principal_minor(b, MinorIndex{1, 2}) + 2.0) < 1e-14);

  std::mt19937_64 rng(3);
  const CMatrix c = oracle::random_complex(5, 5, rng);
  for (int k = 1; k <= 5; ++k) CHECK(principal_minor(c, MinorIndex{k}) == c(k - 1, k - 1));
  CHECK(std::abs(principal_minor(c, MinorIndex::full(5)) - oracle::leibniz_det(c)) < 1e-10);
}

TEST_CASE("MinorIndex validation", "[matkit]") {
  CHECK_THROWS_AS(MinorIndex({2, 2}), Error);
  CHECK_THROWS_AS(MinorIndex({3, 1}), Error);
  CHECK_THROWS_AS(MinorIndex({0, 1}), Error);
  CHECK_THROWS_AS(MinorIndex(std::vector<int>{}), Error);
  CHECK_THROWS_AS(principal_minor(RMatrix::Identity(2, 2), MinorIndex{1, 3}), Error);
  CHECK(MinorIndex::full(3).str() == "(1,2,3)");
}

TEST_CASE("characteristic_coefficient against hand values and oracles", "[matkit]") {
  RMatrix d = RMatrix::Zero(3, 3);
  d.diagonal() << 1, 2, 3;
  CHECK(characteristic_coefficient(d, 2) == 11.0);
  CHECK(characteristic_coefficient(d, 1) == 6.0);
  CHECK(characteristic_coefficient(d, 3) == 6.0);
  CHECK_THROWS_AS(characteristic_coefficient(d, 0), Error);
  CHECK_THROWS_AS(characteristic_coefficient(d, 4), Error);

  std::mt19937_64 rng(4);
  const CMatrix b = oracle::random_complex(4, 4, rng);
  CHECK(std::abs(characteristic_coefficient(b, 1) - b.trace()) < 1e-12);
  for (int r = 1; r <= 4; ++r) {
    CHECK(std::abs(characteristic_coefficient(b, r) - oracle::charpoly_fit(b, r)) < 1e-9);
  }
}

TEST_CASE("spectral characteristic coefficients beyond the exhaustive range", "[matkit]") {
  std::mt19937_64 rng(5);
  const CMatrix b = oracle::random_complex(10, 10, rng) / 3.0;
  for (int r : {1, 2, 5, 10}) {
    const Complex fit = oracle::charpoly_fit(b, r);
    CHECK(std::abs(characteristic_coefficient(b, r) - fit) < 1e-7 * std::max(1.0, std::abs(fit)));
  }
}

TEST_CASE("exhaustive and spectral characteristic coefficients agree", "[matkit][property]") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 6;
    const CMatrix b = oracle::random_complex(n, n, rng);
    const auto spectral = characteristic_coefficients_spectral(b);
    for (int r = 1; r <= n; ++r) {
      const Complex ex = characteristic_coefficient_exhaustive(b, r);
      CHECK(std::abs(ex - spectral[static_cast<std::size_t>(r - 1)]) <= 1e-9 * std::max(1.0, std::abs(ex)));
    }
  }
}

TEST_CASE("odd antisymmetric determinants vanish", "[matkit][property]") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int n : {1, 3, 5, 7}) {
    RMatrix a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    a = (a - a.transpose()).eval();
    CHECK(std::abs(principal_minor(a, MinorIndex::full(n))) <= 1e-12);
  }
}

TEST_CASE("principal minors of PSD matrices are real and non-negative", "[matkit][property]") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5;
    const CMatrix h = oracle::random_psd(n, 1 + trial % n, rng);
    const double norm = h.operatorNorm();
    for (int r = 1; r <= n; ++r) {
      // round-off in an r x r determinant scales like |H|^r, not like the minor
      const double scale = std::max(1.0, std::pow(norm, r));
      for_each_minor_index(n, r, [&](const MinorIndex& idx) {
        const Complex m = principal_minor(h, idx);
        CHECK(m.real() >= -1e-12 * scale);
        CHECK(std::abs(m.imag()) <= 1e-12 * scale);
      });
    }
  }
}

TEST_CASE("for_each_minor_index enumerates every subset once", "[matkit]") {
  std::vector<std::string> seen;
  for_each_minor_index(4, 2, [&](const MinorIndex& idx) { seen.push_back(idx.str()); });
  const std::vector<std::string> want = {"(1,2)", "(1,3)", "(1,4)", "(2,3)", "(2,4)", "(3,4)"};
  CHECK(seen == want);
}

TEST_CASE("lemma_minor_check trivial cases", "[matkit]") {
  std::mt19937_64 rng(9);
  const CMatrix real_psd = [&] {
    const RMatrix a = RMatrix::Random(3, 3);
    return CMatrix((a * a.transpose()).cast<Complex>());
  }();
  const CMatrix one[] = {real_psd};
  const auto [split, sum] = lemma_minor_check(one, MinorIndex{1, 3});
  CHECK(split.rhs == 0.0);
  CHECK(std::abs(split.margin - principal_minor(real_psd, MinorIndex{1, 3}).real()) < 1e-14);
  CHECK(split.margin >= 0.0);

  const CMatrix h[] = {oracle::random_psd(4, 3, rng)};
  const auto v = lemma_minor_check(h, MinorIndex{1, 2, 4});
  CHECK(v.second.margin == 0.0);
  CHECK(v.second.saturated);
}

TEST_CASE("lemma_minor_check rejects invalid tuples", "[matkit]") {
  CMatrix bad = CMatrix::Identity(2, 2);
  bad(1, 1) = -1.0;
  const CMatrix not_psd[] = {CMatrix::Identity(2, 2), bad};
  CHECK_THROWS_AS(lemma_minor_check(not_psd, MinorIndex{1}), Error);
  const CMatrix mismatch[] = {CMatrix::Identity(2, 2), CMatrix::Identity(3, 3)};
  CHECK_THROWS_AS(lemma_minor_check(mismatch, MinorIndex{1}), Error);
  const CMatrix ok[] = {CMatrix::Identity(2, 2)};
  CHECK_THROWS_AS(lemma_minor_check(ok, MinorIndex{1, 3}), Error);
}

TEST_CASE("lemma_minor_check recomputed by hand", "[matkit]") {
  std::mt19937_64 rng(10);
  const CMatrix hs[] = {oracle::random_psd(3, 2, rng), oracle::random_psd(3, 3, rng)};
  const auto [split, sum] = lemma_minor_check(hs, MinorIndex::full(3));
  const CMatrix total = hs[0] + hs[1];
  const CMatrix s = total.real().cast<Complex>();
  const CMatrix a = total.imag().cast<Complex>();
  CHECK(std::abs(split.lhs - oracle::leibniz_det(s).real()) < 1e-9);
  CHECK(std::abs(split.rhs - oracle::leibniz_det(a).real()) < 1e-9);
  CHECK(std::abs(split.rhs) < 1e-9);  // odd antisymmetric
  CHECK(std::abs(sum.lhs - oracle::leibniz_det(total).real()) < 1e-9);
  CHECK(std::abs(sum.rhs - (oracle::leibniz_det(hs[0]) + oracle::leibniz_det(hs[1])).real()) < 1e-9);
  CHECK(split.holds());
  CHECK(sum.holds());
}

TEST_CASE("lemma_trace_check on the ground-state Gram matrix", "[matkit]") {
  const auto tv = lemma_trace_check(vacuum_gram(false));
  CHECK(std::abs(tv.any_n.lhs - 1.0) < 1e-12);
  CHECK(std::abs(tv.any_n.rhs - 1.0) < 1e-12);
  CHECK(tv.any_n.saturated);
  REQUIRE(tv.even_n.has_value());
  CHECK(std::abs(tv.even_n->rhs - 0.5) < 1e-12);
  CHECK(std::abs(tv.even_n->margin - 0.5) < 1e-12);
  CHECK(tv.even_n->holds());
}

TEST_CASE("lemma_trace_check on real and odd-sized inputs", "[matkit]") {
  const RMatrix a = RMatrix::Random(3, 3);
  const CMatrix real_psd = (a * a.transpose()).cast<Complex>();
  const auto tv = lemma_trace_check(real_psd);
  CHECK(tv.any_n.rhs == 0.0);
  CHECK(tv.any_n.margin == real_psd.trace().real());
  CHECK_FALSE(tv.even_n.has_value());
  CHECK_THROWS_AS(lemma_trace_even(real_psd), Error);
  CHECK_THROWS_AS(lemma_trace_any(CMatrix::Identity(1, 1)), Error);
}

TEST_CASE("characteristic_check reductions", "[matkit]") {
  std::mt19937_64 rng(11);
  const CMatrix hs[] = {oracle::random_psd(4, 2, rng), oracle::random_psd(4, 4, rng)};
  const auto full = lemma_minor_check(hs, MinorIndex::full(4));
  const auto top = characteristic_check(hs, 4);
  CHECK(std::abs(full.first.margin - top.first.margin) < 1e-10);
  CHECK(std::abs(full.second.margin - top.second.margin) < 1e-10);

  const CMatrix one[] = {hs[0]};
  const auto r1 = characteristic_check(one, 1);
  CHECK(std::abs(r1.first.rhs) < 1e-14);
  CHECK(std::abs(r1.first.lhs - hs[0].trace().real()) < 1e-12);
  CHECK_THROWS_AS(characteristic_check(one, 5), Error);
}

TEST_CASE("all matrix inequalities hold on random PSD tuples", "[matkit][property]") {
  std::mt19937_64 rng(12);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 5;  // 2..6
    const int m = 1 + trial % 3;  // 1..3
    std::vector<CMatrix> hs;
    for (int mu = 0; mu < m; ++mu) {
      const int rank = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
      hs.push_back(oracle::random_psd(n, rank, rng));
      REQUIRE(oracle::min_eig(hs.back()) > -1e-10);
    }
    const MinorIndex idx = MinorIndex::full(n);
    const auto [split, sum] = lemma_minor_check(hs, idx);
    const int r = 1 + trial % n;
    const auto [csplit, csum] = characteristic_check(hs, r);
    const auto tv = lemma_trace_check(hs[0]);
    for (const Verdict* v : {&split, &sum, &csplit, &csum, &tv.any_n}) {
      CHECK(v->margin >= -1e-10);
      ++checked;
    }
    if (tv.even_n) CHECK(tv.even_n->margin >= -1e-10);
  }
  CHECK(checked == 5000);
}
