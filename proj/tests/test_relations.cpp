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
#include "urlab/relations.hpp"

#include <numbers>

using namespace urlab;
using namespace urlab::hilbert;
using namespace urlab::relations;

namespace {

std::vector<Operator> qp(int levels) {
  const auto ops = fock_operators(levels);
  return {ops.q[0], ops.p[0]};
}

}  // namespace

TEST_CASE("ground state saturates the two-observable relations", "[relations]") {
  const auto xs = qp(30);
  const auto vac = fock_state(30, 0);
  for (const Verdict& v : {heisenberg_kennard(vac), robertson_two(xs[0], xs[1], vac),
                           trace_two(xs[0], xs[1], vac), schrodinger_two(xs[0], xs[1], vac)}) {
    INFO(v.name);
    CHECK(std::abs(v.margin) <= 1e-9);
    CHECK(v.saturated);
  }
  CHECK(std::abs(heisenberg_kennard(vac).rhs - 0.25) == 0.0);
  CHECK(std::abs(trace_two(xs[0], xs[1], vac).rhs - 1.0) < 1e-12);
}

TEST_CASE("multimode ground state saturates the n-observable relations", "[relations]") {
  for (int m : {1, 2}) {
    const auto ops = fock_operators(m == 1 ? 30 : 12, m);
    const auto canon = ops.canonical();
    const auto vac = basis_state(ops.basis, 0);
    const double quarter_m = std::pow(0.25, m);
    const auto rn = robertson_n(canon, vac);
    const auto hr = hadamard_robertson(canon, vac);
    const auto te = trace_even(canon, vac);
    CHECK(std::abs(rn.lhs - quarter_m) < 1e-12);
    CHECK(std::abs(rn.rhs - quarter_m) < 1e-12);
    CHECK(std::abs(hr.margin) <= 1e-8);
    CHECK(std::abs(te.lhs - m) < 1e-12);
    CHECK(std::abs(te.margin) <= 1e-8);
    for (int k : {1, 2}) {
      const auto si = symplectic_invariant_ur(canon, vac, k);
      CHECK(std::abs(si.lhs - m / std::pow(2.0, 2 * k - 1)) <= 1e-10);
      CHECK(si.saturated);
    }
  }
}

TEST_CASE("squeezed states saturate Schrodinger but not Robertson", "[relations]") {
  const auto xs = qp(80);
  for (double r : {0.1, 0.4, 0.8}) {
    for (double th : {0.0, 0.9, 2.2}) {
      const auto s = squeezed_state(Complex(1.0, -0.5), std::polar(r, th), 80);
      const auto sch = schrodinger_two(xs[0], xs[1], s);
      CHECK(std::abs(sch.margin) <= 1e-7);
      // covariance^2 is what Robertson misses
      const double cov = -0.5 * std::sinh(2 * r) * std::sin(th);
      CHECK(std::abs(robertson_two(xs[0], xs[1], s).margin - cov * cov) < 1e-8);
      // trace margin is cosh 2r - 1
      CHECK(std::abs(trace_two(xs[0], xs[1], s).margin - (std::cosh(2 * r) - 1.0)) < 1e-8);
    }
  }
}

TEST_CASE("coherent states saturate the trace relations", "[relations]") {
  const auto ops = fock_operators(40);
  const std::vector<Operator> pq = {ops.p[0], ops.q[0]};
  for (const Complex a : {Complex(0.5, 0), Complex(-1.0, 1.5), Complex(0, -2)}) {
    const auto s = coherent_state(a, 40);
    CHECK(std::abs(trace_two(pq[0], pq[1], s).margin) <= 1e-8);
    CHECK(std::abs(trace_even(pq, s).margin) <= 1e-8);
  }
}

TEST_CASE("spin coherent Robertson margin has the closed form", "[relations]") {
  for (int two_j : {1, 2, 4}) {
    const auto ops = spin_operators(two_j);
    const double j = 0.5 * two_j;
    for (double th : {0.3, 1.2}) {
      for (double ph : {0.0, 0.5, std::numbers::pi / 2}) {
        const auto s = spin_coherent_state(two_j, th, ph);
        const double st = std::sin(th);
        const double want =
            0.25 * j * j * std::pow(st, 4) * std::pow(std::cos(ph) * std::sin(ph), 2);
        CHECK(std::abs(robertson_two(ops.J1, ops.J2, s).margin - want) < 1e-12);
        CHECK(std::abs(schrodinger_two(ops.J1, ops.J2, s).margin) < 1e-12);
      }
    }
  }
}

TEST_CASE("spin one-half up state", "[relations]") {
  const auto ops = spin_operators(1);
  const auto up = basis_state(BasisSpec::spin(1), 0);
  const auto xs = ops.all();
  // sigma = diag(1/4, 1/4, 0): product vanishes, and so does det C for odd n
  const auto hr = hadamard_robertson(xs, up);
  CHECK(std::abs(hr.lhs) < 1e-15);
  CHECK(std::abs(hr.rhs) < 1e-15);
  const auto tn = trace_n(xs, up);
  CHECK(std::abs(tn.lhs - 0.5) < 1e-12);
  CHECK(std::abs(tn.rhs - 0.25) < 1e-12);
}

TEST_CASE("relation ordering on random states", "[relations][property]") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = 2 + trial % 10;
    const auto basis = BasisSpec::finite(d);
    const auto x = random_observable(basis, rng);
    const auto y = random_observable(basis, rng);
    RandomForm form;
    form.mixed = trial % 2 == 1;
    form.rank = 1 + trial % d;
    const auto s = random_state(basis, rng, form);
    const auto rob = robertson_two(x, y, s);
    const auto sch = schrodinger_two(x, y, s);
    const auto tr = trace_two(x, y, s);
    CHECK(rob.holds());
    CHECK(sch.holds());
    CHECK(tr.holds());
    CHECK(sch.lhs <= rob.lhs + 1e-12);
    CHECK(tr.lhs >= 2.0 * std::sqrt(std::max(0.0, rob.lhs)) - 1e-10);
    // trace saturation forces the others to saturate
    if (tr.saturated) {
      CHECK(rob.saturated);
      CHECK(sch.saturated);
    }
    if (rob.saturated) CHECK(sch.saturated);

    const int n = 2 + trial % 4;
    std::vector<Operator> xs;
    for (int i = 0; i < n; ++i) xs.push_back(random_observable(basis, rng));
    const auto b = moments::moment_bundle(xs, s);
    const auto rn = robertson_n(b);
    const auto hr = hadamard_robertson(b);
    const auto tn = trace_n(b);
    CHECK(rn.holds());
    CHECK(hr.holds());
    CHECK(tn.holds());
    CHECK(hr.lhs >= rn.lhs - 1e-10 * std::max(1.0, std::abs(rn.lhs)));  // Hadamard inequality
    if (n % 2 == 0) CHECK(trace_even(b).holds());
  }
}

TEST_CASE("n-observable relations reject bad sizes", "[relations]") {
  const auto xs = qp(20);
  const auto vac = fock_state(20, 0);
  const std::vector<Operator> one = {xs[0]};
  CHECK_THROWS_AS(robertson_n(one, vac), Error);
  CHECK_THROWS_AS(trace_n(one, vac), Error);
  const auto s = spin_operators(2);
  CHECK_THROWS_AS(trace_even(s.all(), spin_coherent_state(2, 0.3, 0.1)), Error);
  CHECK_THROWS_AS(symplectic_invariant_ur(RMatrix::Identity(3, 3), 1), Error);
  CHECK_THROWS_AS(symplectic_invariant_ur(RMatrix::Identity(2, 2), 0), Error);
}

TEST_CASE("two-state suite reduces to one-state relations on equal states", "[relations]") {
  const auto xs = qp(20);
  std::mt19937_64 rng(41);
  RandomForm low;
  low.support = 16;
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_state(BasisSpec::fock(20), rng, low);
    const auto suite = two_state_suite(s, s);
    const auto rob = robertson_two(xs[0], xs[1], s);
    const auto sch = schrodinger_two(xs[0], xs[1], s);
    CHECK(std::abs(suite[0].lhs - 2.0 * std::sqrt(rob.lhs)) <= 1e-12);
    CHECK(std::abs(suite[1].lhs - 2.0 * rob.lhs) <= 1e-12 * std::max(1.0, rob.lhs));
    CHECK(std::abs(suite[2].lhs - 2.0 * sch.lhs) <= 1e-12 * std::max(1.0, sch.lhs));
    // the root form never exceeds the trace form and meets it when dq = dp
    CHECK(suite[0].lhs <= trace_two(xs[0], xs[1], s).lhs + 1e-12);
    const auto s2 = schrodinger_two_state(xs[0], xs[1], s, s);
    CHECK(std::abs(s2.lhs - 2.0 * sch.lhs) <= 1e-12 * std::max(1.0, sch.lhs));
  }
  const auto coh = coherent_state(Complex(0.3, 0.2), 20);
  const auto suite = two_state_suite(coh, coh);
  CHECK(std::abs(suite[0].lhs - trace_two(xs[0], xs[1], coh).lhs) < 1e-12);
}

TEST_CASE("two-state suite holds on random Fock pairs", "[relations][property]") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto basis = BasisSpec::fock(16);
    RandomForm form;
    form.mixed = trial % 4 == 0;
    form.rank = 2;
    form.support = 12;
    const auto a = random_state(basis, rng, form);
    RandomForm pure;
    pure.support = 12;
    const auto b = random_state(basis, rng, pure);
    for (const auto& v : two_state_suite(a, b)) CHECK(v.holds());
  }
}

TEST_CASE("principal generator matches the two-state Schrodinger form", "[relations]") {
  const auto xs = qp(24);
  std::mt19937_64 rng(43);
  PrincipalSpec spec;
  spec.minor = matkit::MinorIndex::full(2);
  spec.adapt_orientation = true;
  RandomForm low;
  low.support = 20;
  for (int trial = 0; trial < 30; ++trial) {
    const QuantumState states[] = {random_state(BasisSpec::fock(24), rng, low),
                                   random_state(BasisSpec::fock(24), rng, low)};
    const auto vs = generate_principal_ur(xs, states, spec);
    REQUIRE(vs.size() >= 2);
    CHECK(vs[1].name == "principal_minor_sum");
    const auto s2 = schrodinger_two_state(xs[0], xs[1], states[0], states[1]);
    CHECK(std::abs(vs[1].margin - s2.margin) <= 1e-12 * std::max(1.0, std::abs(s2.lhs)));
    for (const auto& v : vs) CHECK(v.holds());
  }
}

TEST_CASE("principal generator on higher orders and characteristic coefficients", "[relations][property]") {
  std::mt19937_64 rng(44);
  const auto basis = BasisSpec::finite(6);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Operator> xs;
    for (int i = 0; i < 3; ++i) xs.push_back(random_observable(basis, rng));
    const QuantumState states[] = {random_state(basis, rng), random_state(basis, rng),
                                   random_state(basis, rng)};
    PrincipalSpec spec;
    spec.moment_order = 1 + trial % 3;
    spec.characteristic = 1 + trial % 3;
    for (const auto& v : generate_principal_ur(xs, states, spec)) {
      INFO(v.name << " " << v.context);
      CHECK(v.holds());
    }
  }
  PrincipalSpec both;
  both.minor = matkit::MinorIndex{1};
  both.characteristic = 1;
  const auto x = random_observable(basis, rng);
  const std::vector<Operator> one = {x};
  const QuantumState s[] = {random_state(basis, rng)};
  CHECK_THROWS_AS(generate_principal_ur(one, s, both), Error);
}

TEST_CASE("Gram-vector bound for a pair of pure states", "[relations][property]") {
  std::mt19937_64 rng(45);
  const auto basis = BasisSpec::finite(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_observable(basis, rng);
    const auto psi = random_state(basis, rng);
    const auto phi = random_state(basis, rng);
    const auto r = fleming_bound(x, psi, phi);
    CHECK(r.gram_det >= -1e-12);
    CHECK(r.corrected.holds());
    // the printed form is reported; when it fails the Gram vector still has
    // non-negative norm
    if (!r.printed.holds()) CHECK(r.printed_violated);
  }
  const auto x = random_observable(basis, rng);
  const auto psi = random_state(basis, rng);
  CHECK_THROWS_AS(fleming_bound(x, psi, psi), Error);
  RandomForm mixed;
  mixed.mixed = true;
  mixed.rank = 2;
  CHECK_THROWS_AS(fleming_bound(x, psi, random_state(basis, rng, mixed)), Error);
}

TEST_CASE("catalog dispatch", "[relations]") {
  CHECK(catalog_names().size() == 13);
  for (const auto& name : catalog_names()) CHECK(is_catalog_name(name));
  CHECK_FALSE(is_catalog_name("nope"));

  const auto xs = qp(20);
  const QuantumState one[] = {fock_state(20, 0)};
  const QuantumState two[] = {fock_state(20, 0), fock_state(20, 1)};
  CHECK_THROWS_AS(evaluate("nope", xs, one), Error);
  CHECK_THROWS_AS(evaluate("robertson_two", xs, two), Error);
  CHECK_THROWS_AS(evaluate("two_state_suite", xs, one), Error);
  CHECK(evaluate("two_state_suite", xs, two).size() == 3);
  const auto principal = evaluate("principal", xs, two);
  CHECK(principal.front().context.find("idx=(1,2)") != std::string::npos);
  const std::vector<Operator> q = {xs[0]};
  const auto fl = evaluate("fleming", q, two);
  REQUIRE(fl.size() == 2);
  CHECK(fl[0].name == "fleming_gram");
  CHECK(fl[1].name == "fleming_corrected");
}
