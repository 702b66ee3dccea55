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
#include "urlab/parallel.hpp"
#include "urlab/relations.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace urlab::search {

using hilbert::Operator;
using hilbert::QuantumState;

struct CoherentGrid {
  int levels = 40;
  std::vector<Complex> alphas;
};

struct SqueezedGrid {
  int levels = 80;
  std::vector<Complex> alphas;
  std::vector<Complex> zetas;
};

struct SpinCoherentGrid {
  int two_j = 1;
  std::vector<double> thetas;
  std::vector<double> phis;
};

/// Real parameter vector -> normalized ket. Parameters come in (re, im)
/// pairs, one pair per basis vector in the support (see RandomForm).
struct GenericFamily {
  hilbert::BasisSpec basis;
  int support = 0;
};

/// Displaced squeezed thermal states on one mode, parameters
/// (Re alpha, Im alpha, t, s) with zeta = 1.5 tanh(t) and nbar = s^2.
/// The pure members (s = 0) are the squeezed states.
struct GaussianFamily {
  int levels = 40;
};

using StateFamily =
    std::variant<CoherentGrid, SqueezedGrid, SpinCoherentGrid, GenericFamily, GaussianFamily>;

struct FamilyPoint {
  std::vector<double> params;
  QuantumState state;
};

/// Every grid point of a finite family, in row-major parameter order.
inline std::vector<FamilyPoint> enumerate(const StateFamily& family, double tail = 1e-12) {
  std::vector<FamilyPoint> out;
  if (const auto* c = std::get_if<CoherentGrid>(&family)) {
    for (Complex a : c->alphas)
      out.push_back({{a.real(), a.imag()}, hilbert::coherent_state(a, c->levels, tail)});
  } else if (const auto* s = std::get_if<SqueezedGrid>(&family)) {
    for (Complex a : s->alphas)
      for (Complex z : s->zetas)
        out.push_back({{a.real(), a.imag(), z.real(), z.imag()},
                       hilbert::squeezed_state(a, z, s->levels, tail)});
  } else if (const auto* sp = std::get_if<SpinCoherentGrid>(&family)) {
    for (double th : sp->thetas)
      for (double ph : sp->phis)
        out.push_back({{th, ph}, hilbert::spin_coherent_state(sp->two_j, th, ph)});
  } else {
    throw Error("enumerate: family is not a finite grid");
  }
  return out;
}

inline int parameter_count(const StateFamily& family) {
  if (const auto* g = std::get_if<GenericFamily>(&family)) {
    const int support = g->support > 0 ? g->support
                        : g->basis.truncated() ? g->basis.levels - 2
                                               : static_cast<int>(g->basis.dim());
    return 2 * static_cast<int>(hilbert::detail::support_indices(g->basis, support).size());
  }
  if (std::holds_alternative<GaussianFamily>(family)) return 4;
  throw Error("parameter_count: family is not parametrized");
}

/// Maps a parameter vector of a continuous family to its state.
inline QuantumState realize(const StateFamily& family, std::span<const double> params,
                            double tail = 1e-12) {
  if (static_cast<int>(params.size()) != parameter_count(family)) {
    throw Error("realize: wrong parameter count");
  }
  if (const auto* g = std::get_if<GenericFamily>(&family)) {
    const int support = g->support > 0 ? g->support
                        : g->basis.truncated() ? g->basis.levels - 2
                                               : static_cast<int>(g->basis.dim());
    const auto idx = hilbert::detail::support_indices(g->basis, support);
    CVector v = CVector::Zero(g->basis.dim());
    for (std::size_t k = 0; k < idx.size(); ++k) v(idx[k]) = Complex(params[2 * k], params[2 * k + 1]);
    const double norm = v.norm();
    if (!(norm > 1e-300) || !std::isfinite(norm)) throw Error("realize: zero parameter vector");
    v /= norm;
    return QuantumState::pure(g->basis, std::move(v));
  }
  const auto& gf = std::get<GaussianFamily>(family);
  const Complex alpha(params[0], params[1]);
  const Complex zeta(hilbert::kMaxSqueeze * std::tanh(params[2]), 0.0);
  return hilbert::gaussian_state(alpha, zeta, params[3] * params[3], gf.levels, tail);
}

// ---------------------------------------------------------------------------
// Saturation scans

struct ScanPoint {
  std::vector<double> params;
  Verdict verdict;
};

struct ScanReport {
  std::string relation;
  std::vector<ScanPoint> points;
  double max_abs_margin = 0.0;
  double min_margin = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

/// Evaluates `relation` at every grid point; the family passes iff every
/// |margin| stays within `tolerance`.
inline ScanReport saturation_scan(const StateFamily& family, const std::string& relation,
                                  std::span<const Operator> observables, double tolerance,
                                  const relations::CatalogParams& params = {},
                                  const Tolerances& tol = {}, int jobs = 1) {
  const auto grid = enumerate(family, tol.tail);
  ScanReport rep;
  rep.relation = relation;
  rep.tolerance = tolerance;
  rep.points.resize(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    const QuantumState states[] = {grid[i].state};
    rep.points[i] = {grid[i].params,
                     relations::evaluate(relation, observables, states, params, tol).front()};
  });
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& p : rep.points) {
    rep.max_abs_margin = std::max(rep.max_abs_margin, std::abs(p.verdict.margin));
    rep.min_margin = std::min(rep.min_margin, p.verdict.margin);
  }
  if (rep.points.empty()) rep.min_margin = 0.0;
  rep.pass = rep.max_abs_margin <= tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Minimization

struct MinimizeOptions {
  int budget = 5000;
  int restarts = 3;
  std::uint64_t seed = 0;
  double step = 0.2;
  double diameter_tol = 1e-9;
  relations::CatalogParams params;
};

struct EvaluationRecord {
  int index = 0;
  int restart = 0;
  double margin = 0.0;
};

struct MinimizeResult {
  std::vector<double> best_params;
  double best_margin = 0.0;
  double start_margin = 0.0;
  int evaluations = 0;
  std::string status;  // converged | budget_exhausted | no_improvement
  std::vector<EvaluationRecord> trace;
};

/// Margin of `relation` as a function of family parameters; states the
/// relation refuses (truncation gate, degenerate parameters) score +inf.
inline double margin_at(const std::string& relation, std::span<const Operator> observables,
                        const StateFamily& family, std::span<const double> params,
                        const relations::CatalogParams& cp, const Tolerances& tol) {
  try {
    const QuantumState states[] = {realize(family, params, tol.tail)};
    const double m = relations::evaluate(relation, observables, states, cp, tol).front().margin;
    return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// Nelder-Mead on the margin with dimension-adaptive coefficients and
/// restarts from the incumbent along random orthonormal directions.
/// Never returns a point worse than `start`.
inline MinimizeResult minimize_ur(const std::string& relation,
                                  std::span<const Operator> observables,
                                  const StateFamily& family, std::span<const double> start,
                                  const MinimizeOptions& opts = {}, const Tolerances& tol = {}) {
  const int n = parameter_count(family);
  if (static_cast<int>(start.size()) != n) throw Error("minimize_ur: wrong start dimension");
  if (opts.budget < 1) throw Error("minimize_ur: budget must be positive");

  MinimizeResult res;
  std::mt19937_64 rng(opts.seed);
  int restart = 0;
  auto f = [&](const RVector& x) {
    const std::vector<double> p(x.data(), x.data() + x.size());
    const double m = margin_at(relation, observables, family, p, opts.params, tol);
    res.trace.push_back({res.evaluations, restart, m});
    ++res.evaluations;
    return m;
  };

  RVector best = Eigen::Map<const RVector>(start.data(), n);
  double best_f = f(best);
  if (!std::isfinite(best_f)) throw Error("minimize_ur: margin is not finite at the start point");
  res.start_margin = best_f;

  const double dn = static_cast<double>(n);
  const double c_expand = 1.0 + 2.0 / dn;
  const double c_contract = 0.75 - 0.5 / dn;
  const double c_shrink = 1.0 - 1.0 / dn;
  bool converged = false;

  for (restart = 0; restart <= opts.restarts && res.evaluations < opts.budget; ++restart) {
    RMatrix dirs = RMatrix::Identity(n, n);
    if (restart > 0) {
      std::normal_distribution<double> g(0.0, 1.0);
      RMatrix m(n, n);
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) m(i, j) = g(rng);
      dirs = Eigen::HouseholderQR<RMatrix>(m).householderQ();
    }
    std::vector<RVector> x(static_cast<std::size_t>(n) + 1, best);
    std::vector<double> fx(static_cast<std::size_t>(n) + 1, best_f);
    for (int i = 0; i < n && res.evaluations < opts.budget; ++i) {
      x[static_cast<std::size_t>(i) + 1] = best + opts.step * dirs.col(i);
      fx[static_cast<std::size_t>(i) + 1] = f(x[static_cast<std::size_t>(i) + 1]);
    }
    std::vector<std::size_t> order(x.size());
    converged = false;
    while (res.evaluations < opts.budget) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
      std::vector<RVector> xs;
      std::vector<double> fs;
      for (std::size_t k : order) {
        xs.push_back(x[k]);
        fs.push_back(fx[k]);
      }
      x = std::move(xs);
      fx = std::move(fs);

      double diameter = 0.0;
      for (std::size_t k = 1; k < x.size(); ++k) diameter = std::max(diameter, (x[k] - x[0]).norm());
      if (diameter < opts.diameter_tol) {
        converged = true;
        break;
      }

      const std::size_t w = x.size() - 1;
      RVector centroid = RVector::Zero(n);
      for (std::size_t k = 0; k < w; ++k) centroid += x[k];
      centroid /= dn;

      const RVector xr = centroid + (centroid - x[w]);
      const double fr = f(xr);
      if (fr < fx[0]) {
        if (res.evaluations >= opts.budget) {
          x[w] = xr;
          fx[w] = fr;
          break;
        }
        const RVector xe = centroid + c_expand * (xr - centroid);
        const double fe = f(xe);
        if (fe < fr) {
          x[w] = xe;
          fx[w] = fe;
        } else {
          x[w] = xr;
          fx[w] = fr;
        }
        continue;
      }
      if (fr < fx[w - 1]) {
        x[w] = xr;
        fx[w] = fr;
        continue;
      }
      if (res.evaluations >= opts.budget) break;
      const bool outside = fr < fx[w];
      const RVector xc = outside ? RVector(centroid + c_contract * (xr - centroid))
                                 : RVector(centroid + c_contract * (x[w] - centroid));
      const double fc = f(xc);
      if (outside ? fc <= fr : fc < fx[w]) {
        x[w] = xc;
        fx[w] = fc;
        continue;
      }
      for (std::size_t k = 1; k < x.size() && res.evaluations < opts.budget; ++k) {
        x[k] = x[0] + c_shrink * (x[k] - x[0]);
        fx[k] = f(x[k]);
      }
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (fx[k] < best_f) {
        best_f = fx[k];
        best = x[k];
      }
    }
  }

  res.best_params.assign(best.data(), best.data() + best.size());
  res.best_margin = best_f;
  if (best_f >= res.start_margin) {
    res.best_params.assign(start.begin(), start.end());
    res.best_margin = res.start_margin;
    res.status = converged ? "converged" : "no_improvement";
  } else {
    res.status = converged ? "converged" : "budget_exhausted";
  }
  return res;
}

struct CoherentFit {
  Complex alpha;
  double fidelity = 0.0;
};

/// Coherent state closest to a single-mode Fock state: a grid over
/// |alpha| <= radius, then repeated local refinement around the best node.
inline CoherentFit best_coherent_fit(const QuantumState& s, double radius = 3.0, int grid = 41) {
  const auto& b = s.basis();
  if (b.kind != hilbert::BasisKind::fock || b.modes != 1) {
    throw Error("best_coherent_fit: needs a single-mode Fock state");
  }
  CoherentFit best{Complex{0.0}, -1.0};
  auto probe = [&](Complex a) {
    try {
      const double f = hilbert::fidelity(s, hilbert::coherent_state(a, b.levels, 1.0));
      if (f > best.fidelity) best = {a, f};
    } catch (const Error&) {
    }
  };
  double h = 2.0 * radius / (grid - 1);
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) probe(Complex(-radius + i * h, -radius + j * h));
  for (int round = 0; round < 40 && h > 1e-9; ++round) {
    const Complex c = best.alpha;
    for (int i = -2; i <= 2; ++i)
      for (int j = -2; j <= 2; ++j) probe(c + Complex(i * h / 2.0, j * h / 2.0));
    h /= 2.0;
  }
  return best;
}

}  // namespace urlab::search
