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

// Config-driven scenarios: TOML in, JSON/CSV reports out.

#include "urlab/core.hpp"
#include "urlab/hilbert.hpp"
#include "urlab/matkit.hpp"
#include "urlab/moments.hpp"
#include "urlab/parallel.hpp"
#include "urlab/relations.hpp"
#include "urlab/search.hpp"
#include "urlab/transforms.hpp"

#include "json.hpp"
#include "toml.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace urlab::cli {

using hilbert::BasisSpec;
using hilbert::Operator;
using hilbert::QuantumState;
using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitConfig = 2;

/// Anything wrong with a scenario before numbers are produced.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunOptions {
  int jobs = 1;
  std::optional<double> tol_sat;
  std::optional<double> floor;
  std::filesystem::path out = "urlab-out";
  std::string format;  // empty: command default
  std::optional<std::uint64_t> seed_override;
};

/// URLAB_SEED, when set to a non-negative integer.
inline std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("URLAB_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const unsigned long long s = std::stoull(v, &used);
    if (used != std::string_view(v).size()) throw std::invalid_argument("trailing");
    return static_cast<std::uint64_t>(s);
  } catch (const std::exception&) {
    throw ConfigError(std::string("URLAB_SEED is not a non-negative integer: ") + v);
  }
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for item `index` of stream `stream`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(base ^ splitmix64(stream)) + index);
}

// ---------------------------------------------------------------------------
// Config loading

struct LoadedConfig {
  std::string text;
  toml::table table;
  std::optional<std::uint64_t> report_seed;  // set when replaying a report
};

inline LoadedConfig parse_config_text(std::string text, std::string_view source = "config") {
  LoadedConfig out;
  try {
    out.table = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ": " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(os.str());
  }
  out.text = std::move(text);
  return out;
}

/// Reads a TOML scenario, or a JSON report whose embedded config and seed
/// are replayed.
inline LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json report;
    try {
      report = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": invalid JSON report: " + e.what());
    }
    if (!report.contains("config") || !report["config"].is_string()) {
      throw ConfigError(path.string() + ": report has no embedded config");
    }
    LoadedConfig out = parse_config_text(report["config"].get<std::string>(), path.string());
    if (report.contains("seed") && report["seed"].is_number_unsigned()) {
      out.report_seed = report["seed"].get<std::uint64_t>();
    }
    return out;
  }
  return parse_config_text(std::move(text), path.string());
}

namespace detail {

inline std::string where_key(std::string_view where, std::string_view key) {
  return std::string(where) + "." + std::string(key);
}

inline void check_keys(const toml::table& t, std::initializer_list<std::string_view> allowed,
                       std::string_view where) {
  for (auto&& [k, v] : t) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k.str() == a;
    if (!ok) throw ConfigError("unknown key '" + where_key(where, k.str()) + "'");
  }
}

inline double number(const toml::node& n, const std::string& where) {
  if (const auto* i = n.as_integer()) return static_cast<double>(i->get());
  if (const auto* f = n.as_floating_point()) return f->get();
  if (const auto* s = n.as_string()) {
    if (!s->get().empty() && s->get()[0] == '$') {
      throw ConfigError(where + ": unresolved sweep variable '" + s->get() + "'");
    }
  }
  throw ConfigError(where + ": expected a number");
}

inline std::int64_t integer(const toml::node& n, const std::string& where) {
  if (const auto* i = n.as_integer()) return i->get();
  const double d = number(n, where);
  if (d != std::floor(d)) throw ConfigError(where + ": expected an integer");
  return static_cast<std::int64_t>(d);
}

/// A number, or a [re, im] pair.
inline Complex complex_value(const toml::node& n, const std::string& where) {
  if (const auto* a = n.as_array()) {
    if (a->size() != 2) throw ConfigError(where + ": complex values are [re, im] pairs");
    return {number(*a->get(0), where), number(*a->get(1), where)};
  }
  return {number(n, where), 0.0};
}

inline CVector vector_value(const toml::node& n, const std::string& where) {
  const auto* a = n.as_array();
  if (a == nullptr) throw ConfigError(where + ": expected an array");
  CVector v(static_cast<Eigen::Index>(a->size()));
  for (std::size_t i = 0; i < a->size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = complex_value(*a->get(i), where);
  }
  return v;
}

inline CMatrix matrix_value(const toml::node& n, const std::string& where) {
  const auto* rows = n.as_array();
  if (rows == nullptr || rows->empty()) throw ConfigError(where + ": expected an array of rows");
  const auto r = static_cast<Eigen::Index>(rows->size());
  CMatrix m;
  for (Eigen::Index i = 0; i < r; ++i) {
    const CVector row = vector_value(*rows->get(static_cast<std::size_t>(i)), where);
    if (i == 0) m.resize(r, row.size());
    if (row.size() != m.cols()) throw ConfigError(where + ": ragged matrix rows");
    m.row(i) = row.transpose();
  }
  return m;
}

inline RMatrix real_matrix_value(const toml::node& n, const std::string& where) {
  const CMatrix m = matrix_value(n, where);
  if (m.imag().cwiseAbs().maxCoeff() > 0.0) throw ConfigError(where + ": expected real entries");
  return m.real();
}

inline std::vector<std::string> string_list(const toml::node& n, const std::string& where) {
  std::vector<std::string> out;
  if (const auto* s = n.as_string()) {
    out.push_back(s->get());
    return out;
  }
  const auto* a = n.as_array();
  if (a == nullptr) throw ConfigError(where + ": expected a string or list of strings");
  for (const auto& e : *a) {
    const auto* s = e.as_string();
    if (s == nullptr) throw ConfigError(where + ": expected strings");
    out.push_back(s->get());
  }
  return out;
}

inline std::vector<double> number_list(const toml::node& n, const std::string& where) {
  std::vector<double> out;
  const auto* a = n.as_array();
  if (a == nullptr) return {number(n, where)};
  for (const auto& e : *a) out.push_back(number(e, where));
  return out;
}

inline const toml::node* find(const toml::table& t, std::string_view key) { return t.get(key); }

inline double get_number(const toml::table& t, std::string_view key, double def,
                         std::string_view where) {
  const auto* n = find(t, key);
  return n ? number(*n, where_key(where, key)) : def;
}

inline int get_int(const toml::table& t, std::string_view key, int def, std::string_view where) {
  const auto* n = find(t, key);
  return n ? static_cast<int>(integer(*n, where_key(where, key))) : def;
}

inline bool get_bool(const toml::table& t, std::string_view key, bool def,
                     std::string_view where) {
  const auto* n = find(t, key);
  if (n == nullptr) return def;
  const auto* b = n->as_boolean();
  if (b == nullptr) throw ConfigError(where_key(where, key) + ": expected a boolean");
  return b->get();
}

inline std::string get_string(const toml::table& t, std::string_view key, std::string def,
                              std::string_view where) {
  const auto* n = find(t, key);
  if (n == nullptr) return def;
  const auto* s = n->as_string();
  if (s == nullptr) throw ConfigError(where_key(where, key) + ": expected a string");
  return s->get();
}

inline std::optional<std::uint64_t> get_seed(const toml::table& t, std::string_view key,
                                             std::string_view where) {
  const auto* n = find(t, key);
  if (n == nullptr) return std::nullopt;
  const auto v = integer(*n, where_key(where, key));
  if (v < 0) throw ConfigError(where_key(where, key) + ": seeds must be non-negative");
  return static_cast<std::uint64_t>(v);
}

inline const toml::table& require_table(const toml::node& n, const std::string& where) {
  const auto* t = n.as_table();
  if (t == nullptr) throw ConfigError(where + ": expected a table");
  return *t;
}

/// Replaces every "$name" string by its numeric value, recursively.
inline void substitute(toml::node& n, const std::map<std::string, double>& vars) {
  if (auto* t = n.as_table()) {
    for (auto&& [k, v] : *t) {
      if (const auto* s = v.as_string(); s && !s->get().empty() && s->get()[0] == '$') {
        const auto it = vars.find(s->get().substr(1));
        if (it != vars.end()) t->insert_or_assign(k, it->second);
      } else {
        substitute(v, vars);
      }
    }
  } else if (auto* a = n.as_array()) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      if (const auto* s = a->get(i)->as_string(); s && !s->get().empty() && s->get()[0] == '$') {
        const auto it = vars.find(s->get().substr(1));
        if (it != vars.end()) a->replace(a->cbegin() + static_cast<std::ptrdiff_t>(i), it->second);
      } else {
        substitute(*a->get(i), vars);
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario model

struct RelationSpec {
  std::string name;
  std::string label;
  std::vector<std::string> states;
  std::vector<std::string> observables;
  relations::CatalogParams params;
  std::string expect = "holds";  // holds | saturated
  std::optional<transforms::LinearMap> map;
};

struct BatterySpec {
  std::string name;
  int pure_samples = 0;
  int mixed_samples = 0;
  int min_dim = 2;
  int max_dim = 16;
  std::vector<int> n = {2, 3, 4};
  std::vector<std::string> relations;
  std::uint64_t seed = 0;
};

struct TransformSpec {
  std::string relation;
  std::string state;
  std::vector<std::string> observables;
  std::string kind;
  std::vector<transforms::LinearMap> maps;
  std::string expect = "none";  // none | sign | saturation | class_values
  transforms::InvarianceOptions options;
};

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

struct MinimizeSpec {
  std::string relation;
  std::vector<std::string> observables;
  search::StateFamily family;
  std::string family_name;
  std::vector<double> start;
  search::MinimizeOptions options;
  std::optional<double> target;
  bool coherent_fit = false;
  bool full_trace = true;
};

struct Scenario {
  std::uint64_t seed = 0;
  bool seeded = false;
  Tolerances tol;
  std::optional<BasisSpec> basis;
  std::map<std::string, QuantumState> states;
  std::map<std::string, CMatrix> operators;
  std::vector<std::string> observables;
  std::vector<RelationSpec> relations;
  std::vector<BatterySpec> batteries;
  std::vector<TransformSpec> transforms;
  std::vector<SweepAxis> sweep;
  std::optional<MinimizeSpec> minimize;
};

/// Relations a random battery may request: the ones valid for arbitrary
/// Hermitian observables on an arbitrary finite space.
inline const std::vector<std::string>& battery_relations() {
  static const std::vector<std::string> names = {
      "robertson_two", "trace_two",  "schrodinger_two", "robertson_n",           "hadamard_robertson",
      "trace_n",       "trace_even", "principal",       "schrodinger_two_state", "fleming"};
  return names;
}

namespace detail {

inline BasisSpec parse_basis(const toml::table& t, std::string_view where) {
  check_keys(t, {"kind", "levels", "modes", "two_j", "j", "k", "dim"}, where);
  const std::string kind = get_string(t, "kind", "fock", where);
  try {
    if (kind == "fock") return BasisSpec::fock(get_int(t, "levels", 30, where), get_int(t, "modes", 1, where));
    if (kind == "spin") {
      if (find(t, "j")) {
        return BasisSpec::spin(static_cast<int>(std::lround(2.0 * get_number(t, "j", 0.5, where))));
      }
      return BasisSpec::spin(get_int(t, "two_j", 1, where));
    }
    if (kind == "su11") return BasisSpec::su11(get_number(t, "k", 0.5, where), get_int(t, "levels", 30, where));
    if (kind == "finite") return BasisSpec::finite(get_int(t, "dim", 2, where));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
  throw ConfigError(std::string(where) + ".kind: unknown basis kind '" + kind + "'");
}

inline Tolerances parse_tolerances(const toml::table& root, const RunOptions& opts) {
  Tolerances tol;
  if (const auto* n = find(root, "tolerances")) {
    const auto& t = require_table(*n, "tolerances");
    check_keys(t, {"saturation", "floor", "hermitian", "psd", "residue", "tail"}, "tolerances");
    tol.saturation = get_number(t, "saturation", tol.saturation, "tolerances");
    tol.floor = get_number(t, "floor", tol.floor, "tolerances");
    tol.hermitian = get_number(t, "hermitian", tol.hermitian, "tolerances");
    tol.psd = get_number(t, "psd", tol.psd, "tolerances");
    tol.residue = get_number(t, "residue", tol.residue, "tolerances");
    tol.tail = get_number(t, "tail", tol.tail, "tolerances");
  }
  if (opts.tol_sat) tol.saturation = *opts.tol_sat;
  if (opts.floor) tol.floor = *opts.floor;
  for (double v : {tol.saturation, tol.floor, tol.hermitian, tol.psd, tol.residue, tol.tail}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("tolerances: every tolerance must be positive");
  }
  return tol;
}

inline Complex squeeze_parameter(const toml::table& t, const std::string& where) {
  if (find(t, "zeta")) {
    if (find(t, "r")) throw ConfigError(where + ": give either zeta or r/phase, not both");
    return complex_value(*find(t, "zeta"), where + ".zeta");
  }
  const double r = get_number(t, "r", 0.0, where);
  const double phase = get_number(t, "phase", 0.0, where);
  return std::polar(r, phase);
}

inline const BasisSpec& single_mode_fock(const BasisSpec& b, const std::string& where) {
  if (b.kind != hilbert::BasisKind::fock || b.modes != 1) {
    throw ConfigError(where + ": needs a single-mode Fock basis");
  }
  return b;
}

inline QuantumState build_state(const std::string& name, const toml::table& t,
                                const std::optional<BasisSpec>& default_basis,
                                const std::map<std::string, QuantumState>& built,
                                std::uint64_t seed, bool seeded, const Tolerances& tol) {
  const std::string where = "states." + name;
  check_keys(t,
             {"kind", "basis", "n", "index", "alpha", "zeta", "r", "phase", "nbar", "theta", "phi",
              "amplitudes", "normalize", "rho", "mixed", "rank", "support", "seed", "of"},
             where);
  const std::string kind = get_string(t, "kind", "", where);
  if (kind.empty()) throw ConfigError(where + ".kind is required");

  if (kind == "product") {
    const auto* of = find(t, "of");
    if (of == nullptr) throw ConfigError(where + ".of is required for product states");
    std::vector<QuantumState> factors;
    for (const auto& f : string_list(*of, where + ".of")) {
      const auto it = built.find(f);
      if (it == built.end()) throw ConfigError(where + ".of: unknown or product state '" + f + "'");
      factors.push_back(it->second);
    }
    return hilbert::product_state(factors);
  }

  std::optional<BasisSpec> basis = default_basis;
  if (const auto* b = find(t, "basis")) basis = parse_basis(require_table(*b, where + ".basis"), where + ".basis");
  if (!basis) throw ConfigError(where + ": no basis (set [basis] or states." + name + ".basis)");
  const BasisSpec& bs = *basis;

  if (kind == "vacuum") return hilbert::basis_state(bs, 0);
  if (kind == "fock" || kind == "basis") {
    Eigen::Index idx = 0;
    if (kind == "basis") {
      idx = get_int(t, "index", 0, where);
    } else {
      const auto* n = find(t, "n");
      std::vector<double> ns = n ? number_list(*n, where + ".n") : std::vector<double>{0.0};
      const int modes = bs.kind == hilbert::BasisKind::fock ? bs.modes : 1;
      if (static_cast<int>(ns.size()) != modes) throw ConfigError(where + ".n: one entry per mode");
      for (double v : ns) {
        if (v < 0 || v >= bs.levels || v != std::floor(v)) throw ConfigError(where + ".n: level out of range");
        idx = idx * bs.levels + static_cast<Eigen::Index>(v);
      }
    }
    if (idx < 0 || idx >= bs.dim()) throw ConfigError(where + ": index out of range");
    return hilbert::basis_state(bs, idx);
  }
  if (kind == "coherent" || kind == "squeezed" || kind == "gaussian") {
    const int levels = single_mode_fock(bs, where).levels;
    const Complex alpha = find(t, "alpha") ? complex_value(*find(t, "alpha"), where + ".alpha") : Complex{};
    if (kind == "coherent") return hilbert::coherent_state(alpha, levels, tol.tail);
    const Complex zeta = squeeze_parameter(t, where);
    if (kind == "squeezed") return hilbert::squeezed_state(alpha, zeta, levels, tol.tail);
    return hilbert::gaussian_state(alpha, zeta, get_number(t, "nbar", 0.0, where), levels, tol.tail);
  }
  if (kind == "spin_coherent") {
    if (bs.kind != hilbert::BasisKind::spin) throw ConfigError(where + ": needs a spin basis");
    return hilbert::spin_coherent_state(bs.two_j, get_number(t, "theta", 0.0, where),
                                        get_number(t, "phi", 0.0, where));
  }
  if (kind == "amplitudes") {
    const auto* a = find(t, "amplitudes");
    if (a == nullptr) throw ConfigError(where + ".amplitudes is required");
    CVector v = vector_value(*a, where + ".amplitudes");
    if (get_bool(t, "normalize", false, where) && v.norm() > 0.0) v /= v.norm();
    return QuantumState::pure(bs, std::move(v), tol.psd);
  }
  if (kind == "density") {
    const auto* r = find(t, "rho");
    if (r == nullptr) throw ConfigError(where + ".rho is required");
    return QuantumState::mixed(bs, matrix_value(*r, where + ".rho"), tol.psd);
  }
  if (kind == "random") {
    auto s = get_seed(t, "seed", where);
    if (!s && !seeded) throw ConfigError(where + ": random states need a seed");
    hilbert::RandomForm form;
    form.mixed = get_bool(t, "mixed", false, where);
    form.rank = get_int(t, "rank", 1, where);
    form.support = get_int(t, "support", bs.truncated() ? bs.levels - 2 : 0, where);
    const std::uint64_t use = s ? *s : derive_seed(seed, 1, std::hash<std::string>{}(name));
    return hilbert::random_state(bs, use, form);
  }
  throw ConfigError(where + ".kind: unknown state kind '" + kind + "'");
}

inline std::optional<transforms::LinearMap> parse_map(const toml::table& t, const std::string& where) {
  check_keys(t, {"rotation", "scale", "lambda"}, where);
  int given = 0;
  for (auto k : {"rotation", "scale", "lambda"}) given += find(t, k) ? 1 : 0;
  if (given != 1) throw ConfigError(where + ": give exactly one of rotation, scale, lambda");
  if (find(t, "rotation")) return transforms::rotation2(get_number(t, "rotation", 0.0, where));
  if (find(t, "scale")) return transforms::scale2(get_number(t, "scale", 1.0, where));
  return transforms::LinearMap::from(real_matrix_value(*find(t, "lambda"), where + ".lambda"));
}

inline relations::CatalogParams parse_catalog_params(const toml::table& t, const std::string& where) {
  relations::CatalogParams p;
  p.k = get_int(t, "k", 1, where);
  p.mode = get_int(t, "mode", 0, where);
  if (const auto* m = find(t, "minor")) {
    std::vector<int> idx;
    for (double v : number_list(*m, where + ".minor")) idx.push_back(static_cast<int>(v));
    try {
      p.minor = matkit::MinorIndex(idx);
    } catch (const Error& e) {
      throw ConfigError(where + ".minor: " + e.what());
    }
  }
  if (find(t, "characteristic")) p.characteristic = get_int(t, "characteristic", 1, where);
  p.adapt_orientation = get_bool(t, "adapt_orientation", false, where);
  p.include_trace = get_bool(t, "include_trace", true, where);
  return p;
}

inline std::vector<SweepAxis> parse_sweep(const toml::table& t) {
  check_keys(t, {"axes"}, "sweep");
  std::vector<SweepAxis> axes;
  const auto* a = find(t, "axes");
  if (a == nullptr) return axes;
  const auto* arr = a->as_array();
  if (arr == nullptr) throw ConfigError("sweep.axes: expected an array of tables");
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const std::string where = "sweep.axes[" + std::to_string(i) + "]";
    const auto& at = require_table(*arr->get(i), where);
    check_keys(at, {"name", "values", "start", "stop", "count"}, where);
    SweepAxis axis;
    axis.name = get_string(at, "name", "", where);
    if (axis.name.empty()) throw ConfigError(where + ".name is required");
    for (const auto& prev : axes)
      if (prev.name == axis.name) throw ConfigError(where + ": duplicate axis '" + axis.name + "'");
    if (const auto* v = find(at, "values")) {
      if (find(at, "start") || find(at, "stop") || find(at, "count")) {
        throw ConfigError(where + ": give values or start/stop/count, not both");
      }
      if (v->as_array() == nullptr) throw ConfigError(where + ".values: expected an array");
      axis.values = number_list(*v, where + ".values");
    } else {
      const double start = get_number(at, "start", 0.0, where);
      const double stop = get_number(at, "stop", 0.0, where);
      const int count = get_int(at, "count", 0, where);
      if (count < 0) throw ConfigError(where + ".count must be non-negative");
      for (int k = 0; k < count; ++k) {
        axis.values.push_back(count == 1 ? start : start + (stop - start) * k / (count - 1));
      }
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

}  // namespace detail

/// Validates a config table and constructs every state it declares.
inline Scenario build_scenario(const toml::table& root, const RunOptions& opts,
                               std::optional<std::uint64_t> seed_override = std::nullopt) {
  using namespace detail;
  check_keys(root,
             {"seed", "tolerances", "basis", "states", "operators", "observables", "relations",
              "batteries", "transforms", "sweep", "minimize"},
             "config");
  Scenario sc;
  sc.tol = parse_tolerances(root, opts);
  if (auto s = get_seed(root, "seed", "config")) {
    sc.seed = *s;
    sc.seeded = true;
  }
  if (seed_override) {
    sc.seed = *seed_override;
    sc.seeded = true;
  }
  if (const auto* b = find(root, "basis")) sc.basis = parse_basis(require_table(*b, "basis"), "basis");
  if (const auto* o = find(root, "observables")) sc.observables = string_list(*o, "observables");

  if (const auto* ops = find(root, "operators")) {
    for (auto&& [k, v] : require_table(*ops, "operators")) {
      const std::string where = "operators." + std::string(k.str());
      const auto& t = require_table(v, where);
      check_keys(t, {"matrix"}, where);
      if (!find(t, "matrix")) throw ConfigError(where + ".matrix is required");
      sc.operators.emplace(std::string(k.str()), matrix_value(*find(t, "matrix"), where + ".matrix"));
    }
  }

  if (const auto* st = find(root, "states")) {
    const auto& tbl = require_table(*st, "states");
    // products refer to plain states, so build those first
    for (int pass = 0; pass < 2; ++pass) {
      for (auto&& [k, v] : tbl) {
        const std::string name(k.str());
        const auto& t = require_table(v, "states." + name);
        const bool product = get_string(t, "kind", "", "states." + name) == "product";
        if (product != (pass == 1)) continue;
        try {
          QuantumState s = build_state(name, t, sc.basis, sc.states, sc.seed, sc.seeded, sc.tol);
          hilbert::require_tail(s, sc.tol.tail);
          sc.states.emplace(name, std::move(s));
        } catch (const ConfigError&) {
          throw;
        } catch (const Error& e) {
          throw ConfigError("states." + name + ": " + e.what());
        }
      }
    }
  }

  auto check_state = [&](const std::string& s, const std::string& where) {
    if (!sc.states.count(s)) throw ConfigError(where + ": unknown state '" + s + "'");
  };

  if (const auto* rel = find(root, "relations")) {
    const auto* arr = rel->as_array();
    if (arr == nullptr) throw ConfigError("relations: expected [[relations]] tables");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string where = "relations[" + std::to_string(i) + "]";
      const auto& t = require_table(*arr->get(i), where);
      check_keys(t,
                 {"name", "label", "states", "observables", "expect", "map", "k", "mode", "minor",
                  "characteristic", "adapt_orientation", "include_trace"},
                 where);
      RelationSpec r;
      r.name = get_string(t, "name", "", where);
      if (!relations::is_catalog_name(r.name)) throw ConfigError(where + ".name: unknown relation '" + r.name + "'");
      r.label = get_string(t, "label", r.name, where);
      if (!find(t, "states")) throw ConfigError(where + ".states is required");
      r.states = string_list(*find(t, "states"), where + ".states");
      for (const auto& s : r.states) check_state(s, where + ".states");
      r.observables = find(t, "observables") ? string_list(*find(t, "observables"), where + ".observables")
                                             : sc.observables;
      r.params = parse_catalog_params(t, where);
      r.expect = get_string(t, "expect", "holds", where);
      if (r.expect != "holds" && r.expect != "saturated") {
        throw ConfigError(where + ".expect: must be 'holds' or 'saturated'");
      }
      if (const auto* m = find(t, "map")) {
        try {
          r.map = parse_map(require_table(*m, where + ".map"), where + ".map");
        } catch (const ConfigError&) {
          throw;
        } catch (const Error& e) {
          throw ConfigError(where + ".map: " + e.what());
        }
      }
      sc.relations.push_back(std::move(r));
    }
  }

  if (const auto* bat = find(root, "batteries")) {
    const auto* arr = bat->as_array();
    if (arr == nullptr) throw ConfigError("batteries: expected [[batteries]] tables");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string where = "batteries[" + std::to_string(i) + "]";
      const auto& t = require_table(*arr->get(i), where);
      check_keys(t, {"name", "pure_samples", "mixed_samples", "min_dim", "max_dim", "n", "relations", "seed"},
                 where);
      BatterySpec b;
      b.name = get_string(t, "name", "battery" + std::to_string(i), where);
      b.pure_samples = get_int(t, "pure_samples", 0, where);
      b.mixed_samples = get_int(t, "mixed_samples", 0, where);
      b.min_dim = get_int(t, "min_dim", 2, where);
      b.max_dim = get_int(t, "max_dim", 16, where);
      if (b.pure_samples < 0 || b.mixed_samples < 0) throw ConfigError(where + ": sample counts must be >= 0");
      if (b.min_dim < 2 || b.max_dim < b.min_dim || b.max_dim > 64) {
        throw ConfigError(where + ": need 2 <= min_dim <= max_dim <= 64");
      }
      if (const auto* n = find(t, "n")) {
        b.n.clear();
        for (double v : number_list(*n, where + ".n")) b.n.push_back(static_cast<int>(v));
      }
      if (b.n.empty()) throw ConfigError(where + ".n: need at least one observable count");
      for (int n : b.n)
        if (n < 2 || n > 8) throw ConfigError(where + ".n: observable counts must be in [2, 8]");
      b.relations = find(t, "relations") ? string_list(*find(t, "relations"), where + ".relations")
                                         : battery_relations();
      for (const auto& r : b.relations) {
        if (std::find(battery_relations().begin(), battery_relations().end(), r) == battery_relations().end()) {
          throw ConfigError(where + ".relations: '" + r + "' is not available for random batteries");
        }
      }
      auto s = get_seed(t, "seed", where);
      if (!s && !sc.seeded && b.pure_samples + b.mixed_samples > 0) {
        throw ConfigError(where + ": random batteries need a seed");
      }
      b.seed = s ? *s : derive_seed(sc.seed, 2, i);
      sc.batteries.push_back(std::move(b));
    }
  }

  if (const auto* tr = find(root, "transforms")) {
    const auto* arr = tr->as_array();
    if (arr == nullptr) throw ConfigError("transforms: expected [[transforms]] tables");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string where = "transforms[" + std::to_string(i) + "]";
      const auto& t = require_table(*arr->get(i), where);
      check_keys(t,
                 {"relation", "state", "observables", "kind", "count", "seed", "spread", "rotation",
                  "scale", "lambda", "expect", "value_tol", "saturation_tol", "k"},
                 where);
      TransformSpec ts;
      ts.relation = get_string(t, "relation", "", where);
      const auto& inv = transforms::invariance_relations();
      if (std::find(inv.begin(), inv.end(), ts.relation) == inv.end()) {
        throw ConfigError(where + ".relation: '" + ts.relation + "' has no invariance class");
      }
      ts.state = get_string(t, "state", "", where);
      check_state(ts.state, where + ".state");
      ts.observables = find(t, "observables") ? string_list(*find(t, "observables"), where + ".observables")
                                              : sc.observables;
      ts.kind = get_string(t, "kind", "gl", where);
      ts.expect = get_string(t, "expect", "none", where);
      if (ts.expect != "none" && ts.expect != "sign" && ts.expect != "saturation" &&
          ts.expect != "class_values") {
        throw ConfigError(where + ".expect: must be none, sign, saturation or class_values");
      }
      ts.options.value_tol = get_number(t, "value_tol", ts.options.value_tol, where);
      ts.options.saturation_tol = get_number(t, "saturation_tol", ts.options.saturation_tol, where);
      ts.options.params.k = get_int(t, "k", 1, where);
      try {
        if (ts.kind == "rotation") {
          if (!find(t, "rotation")) throw ConfigError(where + ".rotation is required");
          for (double th : number_list(*find(t, "rotation"), where + ".rotation"))
            ts.maps.push_back(transforms::rotation2(th));
        } else if (ts.kind == "scale") {
          if (!find(t, "scale")) throw ConfigError(where + ".scale is required");
          for (double a : number_list(*find(t, "scale"), where + ".scale")) ts.maps.push_back(transforms::scale2(a));
        } else if (ts.kind == "explicit") {
          if (!find(t, "lambda")) throw ConfigError(where + ".lambda is required");
          ts.maps.push_back(transforms::LinearMap::from(real_matrix_value(*find(t, "lambda"), where + ".lambda")));
        } else {
          const auto kind = transforms::parse_map_kind(ts.kind);
          auto s = get_seed(t, "seed", where);
          if (!s && !sc.seeded) throw ConfigError(where + ": random maps need a seed");
          const int count = get_int(t, "count", 50, where);
          if (count < 0) throw ConfigError(where + ".count must be non-negative");
          ts.maps = transforms::random_maps(kind, static_cast<Eigen::Index>(ts.observables.size()),
                                            static_cast<std::size_t>(count), s ? *s : derive_seed(sc.seed, 3, i),
                                            get_number(t, "spread", 0.5, where));
        }
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(where + ": " + e.what());
      }
      sc.transforms.push_back(std::move(ts));
    }
  }

  if (const auto* sw = find(root, "sweep")) sc.sweep = parse_sweep(require_table(*sw, "sweep"));

  if (const auto* mn = find(root, "minimize")) {
    const std::string where = "minimize";
    const auto& t = require_table(*mn, where);
    check_keys(t,
               {"relation", "observables", "family", "levels", "support", "basis", "start",
                "budget", "restarts", "seed", "step", "target", "coherent_fit", "trace", "k", "mode"},
               where);
    MinimizeSpec m;
    m.relation = get_string(t, "relation", "", where);
    if (!relations::is_catalog_name(m.relation)) throw ConfigError(where + ".relation: unknown relation '" + m.relation + "'");
    m.observables = find(t, "observables") ? string_list(*find(t, "observables"), where + ".observables")
                                           : std::vector<std::string>{"p", "q"};
    m.family_name = get_string(t, "family", "generic", where);
    if (m.family_name == "gaussian") {
      m.family = search::GaussianFamily{get_int(t, "levels", 40, where)};
    } else if (m.family_name == "generic") {
      const int support = get_int(t, "support", 12, where);
      BasisSpec b = find(t, "basis") ? parse_basis(require_table(*find(t, "basis"), where + ".basis"), where + ".basis")
                                     : BasisSpec::fock(support + 2);
      m.family = search::GenericFamily{b, support};
      m.coherent_fit = b.kind == hilbert::BasisKind::fock && b.modes == 1;
    } else {
      throw ConfigError(where + ".family: must be 'gaussian' or 'generic'");
    }
    m.coherent_fit = get_bool(t, "coherent_fit", m.coherent_fit, where);
    m.full_trace = get_bool(t, "trace", true, where);
    m.options.budget = get_int(t, "budget", 5000, where);
    m.options.restarts = get_int(t, "restarts", 3, where);
    m.options.step = get_number(t, "step", 0.2, where);
    m.options.params.k = get_int(t, "k", 1, where);
    m.options.params.mode = get_int(t, "mode", 0, where);
    if (m.options.budget < 1 || m.options.restarts < 0 || !(m.options.step > 0.0)) {
      throw ConfigError(where + ": need budget >= 1, restarts >= 0, step > 0");
    }
    auto s = get_seed(t, "seed", where);
    if (!s && !sc.seeded) throw ConfigError(where + ": minimization needs a seed");
    m.options.seed = s ? *s : derive_seed(sc.seed, 4, 0);
    if (find(t, "target")) m.target = get_number(t, "target", 0.0, where);
    int dim = 0;
    try {
      dim = search::parameter_count(m.family);
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
    if (const auto* st = find(t, "start")) {
      m.start = number_list(*st, where + ".start");
      if (static_cast<int>(m.start.size()) != dim) {
        throw ConfigError(where + ".start: expected " + std::to_string(dim) + " parameters");
      }
    } else {
      std::mt19937_64 rng(derive_seed(m.options.seed, 5, 0));
      std::normal_distribution<double> g(0.0, 1.0);
      for (int i = 0; i < dim; ++i) m.start.push_back(g(rng));
    }
    sc.minimize = std::move(m);
  }
  return sc;
}

// ---------------------------------------------------------------------------
// Observables

/// Named observables on `basis`: p, q (single mode), p1..pm, q1..qm,
/// canonical (= p1..pm q1..qm), J1..J3, K1..K3, or [operators] entries.
inline std::vector<Operator> resolve_observables(const Scenario& sc,
                                                 const std::vector<std::string>& names,
                                                 const BasisSpec& basis) {
  std::vector<Operator> out;
  std::optional<hilbert::FockOperators> fock;
  std::optional<hilbert::SpinOperators> spin;
  std::optional<hilbert::Su11Operators> su11;
  auto need_fock = [&](const std::string& n) -> const hilbert::FockOperators& {
    if (basis.kind != hilbert::BasisKind::fock) throw ConfigError("observable '" + n + "' needs a Fock basis");
    if (!fock) fock = hilbert::fock_operators(basis.levels, basis.modes);
    return *fock;
  };
  for (const auto& n : names) {
    if (const auto it = sc.operators.find(n); it != sc.operators.end()) {
      if (it->second.rows() != basis.dim()) {
        throw ConfigError("operator '" + n + "' does not match basis " + basis.str());
      }
      try {
        out.push_back(Operator::make(basis, it->second, true, sc.tol.hermitian));
      } catch (const Error& e) {
        throw ConfigError("operator '" + n + "': " + e.what());
      }
      continue;
    }
    if (n == "canonical") {
      for (const auto& o : need_fock(n).canonical()) out.push_back(o);
      continue;
    }
    if ((n == "p" || n == "q")) {
      const auto& f = need_fock(n);
      if (basis.modes != 1) throw ConfigError("observable '" + n + "' is ambiguous on several modes; use " + n + "1..");
      out.push_back(n == "p" ? f.p[0] : f.q[0]);
      continue;
    }
    if (n.size() == 2 && (n[0] == 'p' || n[0] == 'q') && n[1] >= '1' && n[1] <= '9') {
      const auto& f = need_fock(n);
      const int mode = n[1] - '1';
      if (mode >= basis.modes) throw ConfigError("observable '" + n + "': no such mode");
      out.push_back(n[0] == 'p' ? f.p[static_cast<std::size_t>(mode)] : f.q[static_cast<std::size_t>(mode)]);
      continue;
    }
    if (n == "J1" || n == "J2" || n == "J3") {
      if (basis.kind != hilbert::BasisKind::spin) throw ConfigError("observable '" + n + "' needs a spin basis");
      if (!spin) spin = hilbert::spin_operators(basis.two_j);
      out.push_back(n == "J1" ? spin->J1 : n == "J2" ? spin->J2 : spin->J3);
      continue;
    }
    if (n == "K1" || n == "K2" || n == "K3") {
      if (basis.kind != hilbert::BasisKind::su11) throw ConfigError("observable '" + n + "' needs an su11 basis");
      if (!su11) su11 = hilbert::su11_operators(basis.bargmann, basis.levels);
      out.push_back(n == "K1" ? su11->K1 : n == "K2" ? su11->K2 : su11->K3);
      continue;
    }
    throw ConfigError("unknown observable '" + n + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON helpers

inline json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline json matrix_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json real_matrix_json(const RMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json state_json(const QuantumState& s) {
  json j{{"basis", s.basis().str()}, {"pure", s.is_pure()}};
  if (s.is_pure()) {
    json amps = json::array();
    for (Eigen::Index i = 0; i < s.dim(); ++i) amps.push_back(complex_json(s.amplitudes()(i)));
    j["amplitudes"] = std::move(amps);
  } else {
    j["rho"] = matrix_json(s.rho());
  }
  return j;
}

inline json verdict_json(const Verdict& v) {
  return {{"name", v.name},         {"lhs", v.lhs},         {"rhs", v.rhs},
          {"margin", v.margin},     {"saturated", v.saturated}, {"holds", v.holds()},
          {"context", v.context}};
}

inline json certificate_json(const std::string& origin, const Verdict& v,
                             const std::vector<QuantumState>& states,
                             const std::vector<Operator>& xs, const Tolerances& tol) {
  json c{{"origin", origin}, {"verdict", verdict_json(v)}, {"floor", tol.floor}};
  c["states"] = json::array();
  for (const auto& s : states) c["states"].push_back(state_json(s));
  c["observables"] = json::array();
  for (const auto& x : xs) c["observables"].push_back(matrix_json(x.matrix));
  return c;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalOutcome {
  json report;
  std::vector<json> certificates;
  int violations = 0;
  int unmet = 0;
  int exit_code() const { return violations + unmet > 0 ? kExitViolation : kExitOk; }
};

namespace detail {

inline std::vector<QuantumState> pick_states(const Scenario& sc, const std::vector<std::string>& names) {
  std::vector<QuantumState> out;
  for (const auto& n : names) out.push_back(sc.states.at(n));
  return out;
}

/// Evaluates one [[relations]] entry; rethrows library errors as config errors.
inline std::vector<Verdict> evaluate_relation(const Scenario& sc, const RelationSpec& r,
                                              std::vector<QuantumState>& states,
                                              std::vector<Operator>& xs) {
  states = pick_states(sc, r.states);
  try {
    xs = resolve_observables(sc, r.observables, states.front().basis());
    if (r.map) xs = transforms::apply_linear(*r.map, xs);
    return relations::evaluate(r.name, xs, states, r.params, sc.tol);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(r.label + ": " + e.what());
  }
}

struct BatteryAccumulator {
  std::string name;
  int count = 0;
  int saturated = 0;
  int violations = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  double max_margin = -std::numeric_limits<double>::infinity();
};

struct SampleResult {
  std::vector<Verdict> verdicts;
  double gram_defect = 0.0;
  double route_defect = 0.0;
  double odd_det_c = 0.0;
  std::vector<json> certificates;
};

inline SampleResult battery_sample(const BatterySpec& b, std::size_t index, const Tolerances& tol) {
  std::mt19937_64 rng(derive_seed(b.seed, 0, index));
  const bool mixed = static_cast<int>(index) >= b.pure_samples;
  const int d = std::uniform_int_distribution<int>(b.min_dim, b.max_dim)(rng);
  const int n = b.n[std::uniform_int_distribution<std::size_t>(0, b.n.size() - 1)(rng)];
  const BasisSpec basis = BasisSpec::finite(d);
  hilbert::RandomForm form;
  form.mixed = mixed;
  auto draw = [&] {
    if (mixed) form.rank = std::uniform_int_distribution<int>(1, d)(rng);
    return hilbert::random_state(basis, rng, form);
  };
  const QuantumState psi = draw();
  const QuantumState phi = draw();
  std::vector<Operator> xs;
  for (int i = 0; i < n; ++i) xs.push_back(hilbert::random_observable(basis, rng));

  SampleResult out;
  const auto bundle = moments::moment_bundle(xs, psi, tol);
  const auto route = moments::moment_bundle_trace_form(xs, psi, tol);
  const CMatrix assembled = bundle.sigma.cast<Complex>() + kI * bundle.commutators.cast<Complex>();
  out.gram_defect = max_abs(CMatrix(bundle.gram - assembled));
  out.route_defect = std::max({max_abs(RMatrix(bundle.sigma - route.sigma)),
                               max_abs(RMatrix(bundle.commutators - route.commutators)),
                               max_abs(CMatrix(bundle.gram - route.gram))});
  if (n % 2 == 1) out.odd_det_c = std::abs(bundle.commutators.determinant());

  const std::vector<QuantumState> one = {psi};
  const std::vector<QuantumState> two = {psi, phi};
  const std::span<const Operator> all(xs);
  for (const auto& name : b.relations) {
    if (name == "trace_even" && n % 2 != 0) continue;
    if (name == "fleming" && mixed) continue;  // defined for pure states only
    std::vector<Verdict> vs;
    std::span<const Operator> use = all;
    const std::vector<QuantumState>* st = &one;
    if (name == "robertson_two" || name == "trace_two" || name == "schrodinger_two") {
      use = all.first(2);
    } else if (name == "schrodinger_two_state") {
      use = all.first(2);
      st = &two;
    } else if (name == "fleming") {
      use = all.first(1);
      st = &two;
    } else if (name == "principal") {
      st = &two;
    }
    vs = relations::evaluate(name, use, *st, {}, tol);
    for (auto& v : vs) {
      if (!v.holds()) {
        out.certificates.push_back(certificate_json(
            b.name + "#" + std::to_string(index) + ":" + name, v, *st,
            std::vector<Operator>(use.begin(), use.end()), tol));
      }
      out.verdicts.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace detail

/// Every [[relations]], [[batteries]] and [[transforms]] entry of `sc`.
inline EvalOutcome evaluate_scenario(const Scenario& sc, int jobs = 1) {
  EvalOutcome out;
  json& rep = out.report;
  rep["relations"] = json::array();
  for (std::size_t i = 0; i < sc.relations.size(); ++i) {
    const auto& r = sc.relations[i];
    std::vector<QuantumState> states;
    std::vector<Operator> xs;
    const auto vs = detail::evaluate_relation(sc, r, states, xs);
    json entry{{"label", r.label}, {"relation", r.name}, {"states", r.states},
               {"observables", r.observables}, {"expect", r.expect}};
    entry["verdicts"] = json::array();
    bool ok = true;
    for (const auto& v : vs) {
      entry["verdicts"].push_back(verdict_json(v));
      if (!v.holds()) {
        ++out.violations;
        ok = false;
        out.certificates.push_back(certificate_json("relations[" + std::to_string(i) + "]:" + r.label,
                                                    v, states, xs, sc.tol));
      } else if (r.expect == "saturated" && !v.saturated) {
        ++out.unmet;
        ok = false;
      }
    }
    entry["ok"] = ok;
    rep["relations"].push_back(std::move(entry));
  }

  rep["batteries"] = json::array();
  for (const auto& b : sc.batteries) {
    const auto total = static_cast<std::size_t>(b.pure_samples + b.mixed_samples);
    std::vector<detail::SampleResult> results(total);
    try {
      parallel_for(total, jobs, [&](std::size_t i) { results[i] = detail::battery_sample(b, i, sc.tol); });
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError("battery '" + b.name + "': " + e.what());
    }
    std::vector<detail::BatteryAccumulator> acc;
    double gram_defect = 0.0, route_defect = 0.0, odd_det = 0.0;
    int violations = 0;
    for (auto& res : results) {
      gram_defect = std::max(gram_defect, res.gram_defect);
      route_defect = std::max(route_defect, res.route_defect);
      odd_det = std::max(odd_det, res.odd_det_c);
      for (const auto& v : res.verdicts) {
        auto it = std::find_if(acc.begin(), acc.end(), [&](const auto& a) { return a.name == v.name; });
        if (it == acc.end()) {
          acc.push_back({v.name});
          it = acc.end() - 1;
        }
        ++it->count;
        it->saturated += v.saturated ? 1 : 0;
        it->min_margin = std::min(it->min_margin, v.margin);
        it->max_margin = std::max(it->max_margin, v.margin);
        if (!v.holds()) {
          ++it->violations;
          ++violations;
        }
      }
      for (auto& c : res.certificates) out.certificates.push_back(std::move(c));
    }
    out.violations += violations;
    json entry{{"name", b.name},
               {"seed", b.seed},
               {"pure_samples", b.pure_samples},
               {"mixed_samples", b.mixed_samples},
               {"violations", violations},
               {"max_gram_defect", gram_defect},
               {"max_route_defect", route_defect},
               {"max_odd_det_c", odd_det}};
    entry["summary"] = json::array();
    for (const auto& a : acc) {
      entry["summary"].push_back({{"verdict", a.name},
                                  {"count", a.count},
                                  {"saturated", a.saturated},
                                  {"violations", a.violations},
                                  {"min_margin", a.min_margin},
                                  {"max_margin", a.max_margin}});
    }
    rep["batteries"].push_back(std::move(entry));
  }

  rep["transforms"] = json::array();
  for (std::size_t i = 0; i < sc.transforms.size(); ++i) {
    const auto& t = sc.transforms[i];
    const QuantumState& s = sc.states.at(t.state);
    transforms::InvarianceReport inv;
    double sigma_defect = 0.0;
    try {
      const auto xs = resolve_observables(sc, t.observables, s.basis());
      inv = transforms::invariance_report(t.relation, xs, s, t.maps, t.options, sc.tol);
      const auto base = moments::moment_bundle(xs, s, sc.tol);
      for (const auto& map : t.maps) {
        const auto moved = moments::moment_bundle(transforms::apply_linear(map, xs), s, sc.tol);
        sigma_defect = std::max({sigma_defect,
                                 max_abs(RMatrix(transforms::transform_sigma(map, base.sigma) - moved.sigma)),
                                 max_abs(RMatrix(transforms::transform_sigma(map, base.commutators) -
                                                 moved.commutators))});
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError("transforms[" + std::to_string(i) + "]: " + e.what());
    }
    bool met = true;
    if (t.expect == "sign") met = inv.sign_preserved_all;
    if (t.expect == "saturation") met = inv.saturation_preserved_all;
    if (t.expect == "class_values") met = inv.class_values_preserved;
    double min_margin = inv.base.margin, max_margin = inv.base.margin;
    int in_class = 0;
    for (const auto& e : inv.entries) {
      min_margin = std::min(min_margin, e.verdict.margin);
      max_margin = std::max(max_margin, e.verdict.margin);
      in_class += e.in_class ? 1 : 0;
      if (!e.verdict.holds()) {
        ++out.violations;
        met = false;
      }
    }
    if (!met) ++out.unmet;
    rep["transforms"].push_back({{"relation", t.relation},
                                 {"state", t.state},
                                 {"kind", t.kind},
                                 {"maps", t.maps.size()},
                                 {"in_class", in_class},
                                 {"expect", t.expect},
                                 {"met", met},
                                 {"base", verdict_json(inv.base)},
                                 {"sign_preserved_all", inv.sign_preserved_all},
                                 {"class_values_preserved", inv.class_values_preserved},
                                 {"saturation_preserved_all", inv.saturation_preserved_all},
                                 {"min_margin", min_margin},
                                 {"max_margin", max_margin},
                                 {"max_sigma_transform_defect", sigma_defect}});
  }
  rep["violations"] = out.violations;
  rep["unmet_expectations"] = out.unmet;
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::size_t point = 0;
  std::vector<double> values;
  std::size_t entry = 0;
  std::string label;
  Verdict verdict;
  bool expect_saturated = false;
};

struct SweepOutcome {
  std::vector<SweepAxis> axes;
  std::vector<SweepRow> rows;
  int violations = 0;
  int unmet = 0;
  int exit_code() const { return violations + unmet > 0 ? kExitViolation : kExitOk; }
};

/// Cartesian grid over the sweep axes, first axis outermost; every point
/// re-parses the config with "$name" strings replaced by the point values.
inline SweepOutcome run_sweep_grid(const toml::table& root, const RunOptions& opts,
                                   std::optional<std::uint64_t> seed_override, int jobs = 1) {
  SweepOutcome out;
  const auto* sw = root.get("sweep");
  if (sw == nullptr) throw ConfigError("sweep: config has no [sweep] table");
  out.axes = detail::parse_sweep(detail::require_table(*sw, "sweep"));
  std::size_t points = out.axes.empty() ? 0 : 1;
  for (const auto& a : out.axes) points *= a.values.size();

  std::vector<std::vector<SweepRow>> per_point(points);
  std::vector<std::pair<int, int>> counts(points);
  parallel_for(points, jobs, [&](std::size_t p) {
    std::map<std::string, double> vars;
    std::vector<double> values(out.axes.size());
    std::size_t rest = p;
    for (std::size_t k = out.axes.size(); k-- > 0;) {
      const auto& a = out.axes[k];
      values[k] = a.values[rest % a.values.size()];
      vars[a.name] = values[k];
      rest /= a.values.size();
    }
    toml::table t = root;
    t.erase("sweep");
    detail::substitute(t, vars);
    const Scenario sc = build_scenario(t, opts, seed_override);
    for (std::size_t e = 0; e < sc.relations.size(); ++e) {
      std::vector<QuantumState> states;
      std::vector<Operator> xs;
      for (const auto& v : detail::evaluate_relation(sc, sc.relations[e], states, xs)) {
        if (!v.holds()) ++counts[p].first;
        else if (sc.relations[e].expect == "saturated" && !v.saturated) ++counts[p].second;
        per_point[p].push_back({p, values, e, sc.relations[e].label, v,
                                sc.relations[e].expect == "saturated"});
      }
    }
  });
  for (std::size_t p = 0; p < points; ++p) {
    out.violations += counts[p].first;
    out.unmet += counts[p].second;
    for (auto& r : per_point[p]) out.rows.push_back(std::move(r));
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string sweep_csv(const SweepOutcome& s) {
  std::ostringstream os;
  os << "point";
  for (const auto& a : s.axes) os << "," << csv_field(a.name);
  os << ",entry,label,verdict,lhs,rhs,margin,saturated,holds,context\n";
  for (const auto& r : s.rows) {
    os << r.point;
    for (double v : r.values) os << "," << format_double(v);
    os << "," << r.entry << "," << csv_field(r.label) << "," << csv_field(r.verdict.name) << ","
       << format_double(r.verdict.lhs) << "," << format_double(r.verdict.rhs) << ","
       << format_double(r.verdict.margin) << "," << (r.verdict.saturated ? "true" : "false") << ","
       << (r.verdict.holds() ? "true" : "false") << "," << csv_field(r.verdict.context) << "\n";
  }
  return os.str();
}

inline json sweep_json(const SweepOutcome& s) {
  json j;
  j["axes"] = json::array();
  for (const auto& a : s.axes) j["axes"].push_back({{"name", a.name}, {"values", a.values}});
  j["rows"] = json::array();
  for (const auto& r : s.rows) {
    json row = verdict_json(r.verdict);
    row["point"] = r.point;
    row["values"] = r.values;
    row["entry"] = r.entry;
    row["label"] = r.label;
    j["rows"].push_back(std::move(row));
  }
  j["violations"] = s.violations;
  j["unmet_expectations"] = s.unmet;
  return j;
}

// ---------------------------------------------------------------------------
// Minimization

inline json run_minimize_spec(const Scenario& sc, const MinimizeSpec& m, int& exit_code) {
  std::vector<Operator> xs;
  try {
    const QuantumState probe = search::realize(m.family, m.start, 1.0);
    xs = resolve_observables(sc, m.observables, probe.basis());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("minimize: ") + e.what());
  }
  search::MinimizeResult res;
  try {
    res = search::minimize_ur(m.relation, xs, m.family, m.start, m.options, sc.tol);
  } catch (const Error& e) {
    throw ConfigError(std::string("minimize: ") + e.what());
  }
  json j{{"relation", m.relation},
         {"family", m.family_name},
         {"parameters", search::parameter_count(m.family)},
         {"start", m.start},
         {"start_margin", res.start_margin},
         {"best_params", res.best_params},
         {"best_margin", res.best_margin},
         {"evaluations", res.evaluations},
         {"status", res.status},
         {"budget", m.options.budget},
         {"restarts", m.options.restarts},
         {"seed", m.options.seed}};
  if (m.full_trace) {
    json trace = json::array();
    for (const auto& e : res.trace) trace.push_back({e.index, e.restart, e.margin});
    j["trace"] = std::move(trace);
  }
  const QuantumState best = search::realize(m.family, res.best_params, sc.tol.tail);
  if (m.coherent_fit) {
    const auto fit = search::best_coherent_fit(best);
    j["coherent_fit"] = {{"alpha", complex_json(fit.alpha)}, {"fidelity", fit.fidelity}};
  }
  if (best.is_pure()) j["best_state"] = state_json(best);
  exit_code = kExitOk;
  if (m.target) {
    j["target"] = *m.target;
    j["target_met"] = res.best_margin <= *m.target;
    if (res.best_margin > *m.target) exit_code = kExitViolation;
  }
  if (res.best_margin < -sc.tol.floor) exit_code = kExitViolation;
  return j;
}

// ---------------------------------------------------------------------------
// Lemma fuzzing

struct LemmaFuzzOptions {
  int n = 4;
  int m = 2;
  int samples = 1000;
  std::uint64_t seed = 0;
  double coefficient_tol = 1e-9;
};

/// Random PSD tuples (random rank, random scale) through every minor,
/// characteristic and trace inequality, plus exhaustive-vs-spectral
/// characteristic coefficients.
inline json lemma_fuzz(const LemmaFuzzOptions& o, const Tolerances& tol, int jobs, int& exit_code) {
  if (o.n < 1 || o.n > 8 || o.m < 1 || o.m > 8 || o.samples < 0) {
    throw ConfigError("lemma-fuzz: need 1 <= n <= 8, 1 <= m <= 8, samples >= 0");
  }
  struct Sample {
    std::map<std::string, std::pair<int, double>> verdicts;  // count, min margin
    int violations = 0;
    double coefficient_defect = 0.0;
    std::vector<json> certificates;
  };
  std::vector<Sample> res(static_cast<std::size_t>(o.samples));
  parallel_for(res.size(), jobs, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(o.seed, 6, i));
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<CMatrix> hs;
    for (int mu = 0; mu < o.m; ++mu) {
      const int rank = std::uniform_int_distribution<int>(1, o.n)(rng);
      CMatrix a(o.n, rank);
      for (Eigen::Index c = 0; c < rank; ++c)
        for (Eigen::Index r = 0; r < o.n; ++r) a(r, c) = Complex(g(rng), g(rng));
      const double scale = std::exp(std::uniform_real_distribution<double>(-2.0, 2.0)(rng));
      CMatrix h = scale * a * a.adjoint();
      hs.push_back(0.5 * (h + h.adjoint()));
    }
    // Both sides of every inequality are homogeneous under a common
    // rescaling, so bring the largest matrix to unit norm: the absolute
    // floor then means the same thing for every tuple.
    double top = 0.0;
    for (const auto& h : hs) top = std::max(top, Eigen::SelfAdjointEigenSolver<CMatrix>(h).eigenvalues().maxCoeff());
    if (top > 0.0)
      for (auto& h : hs) h /= top;
    Sample& s = res[i];
    auto record = [&](const Verdict& v) {
      auto& e = s.verdicts[v.name];
      e.second = e.first == 0 ? v.margin : std::min(e.second, v.margin);
      ++e.first;
      if (!v.holds()) {
        ++s.violations;
        json c{{"sample", i}, {"verdict", verdict_json(v)}, {"matrices", json::array()}};
        for (const auto& h : hs) c["matrices"].push_back(matrix_json(h));
        s.certificates.push_back(std::move(c));
      }
    };
    for (int r = 1; r <= o.n; ++r) {
      matkit::for_each_minor_index(o.n, r, [&](const matkit::MinorIndex& idx) {
        const auto [a, b] = matkit::lemma_minor_check(hs, idx, tol);
        record(a);
        record(b);
      });
      const auto [a, b] = matkit::characteristic_check(hs, r, tol);
      record(a);
      record(b);
    }
    if (o.n >= 2) {
      CMatrix total = CMatrix::Zero(o.n, o.n);
      for (const auto& h : hs) {
        total += h;
        const auto tv = matkit::lemma_trace_check(h, tol);
        record(tv.any_n);
        if (tv.even_n) record(*tv.even_n);
      }
      const auto tv = matkit::lemma_trace_check(total, tol);
      record(tv.any_n);
      if (tv.even_n) record(*tv.even_n);
    }
    for (const auto& h : hs) {
      const auto spectral = matkit::characteristic_coefficients_spectral(h);
      for (int r = 1; r <= o.n; ++r) {
        const Complex ex = matkit::characteristic_coefficient_exhaustive(h, r);
        const Complex sp = spectral[static_cast<std::size_t>(r - 1)];
        s.coefficient_defect =
            std::max(s.coefficient_defect, std::abs(ex - sp) / std::max(1.0, std::abs(ex)));
      }
    }
  });

  std::map<std::string, std::pair<int, double>> merged;
  int violations = 0;
  double coefficient_defect = 0.0;
  json certs = json::array();
  for (auto& s : res) {
    for (const auto& [k, v] : s.verdicts) {
      auto it = merged.find(k);
      if (it == merged.end()) {
        merged[k] = v;
      } else {
        it->second.first += v.first;
        it->second.second = std::min(it->second.second, v.second);
      }
    }
    violations += s.violations;
    coefficient_defect = std::max(coefficient_defect, s.coefficient_defect);
    for (auto& c : s.certificates) certs.push_back(std::move(c));
  }
  json j{{"n", o.n},
         {"m", o.m},
         {"samples", o.samples},
         {"seed", o.seed},
         {"floor", tol.floor},
         {"violations", violations},
         {"max_coefficient_defect", coefficient_defect},
         {"coefficient_tol", o.coefficient_tol}};
  j["summary"] = json::array();
  for (const auto& [k, v] : merged) {
    j["summary"].push_back({{"verdict", k}, {"count", v.first}, {"min_margin", v.second}});
  }
  j["certificates"] = std::move(certs);
  const bool ok = violations == 0 && coefficient_defect <= o.coefficient_tol;
  j["ok"] = ok;
  exit_code = ok ? kExitOk : kExitViolation;
  return j;
}

// ---------------------------------------------------------------------------
// File output

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
}

inline json run_header(const std::string& command, const LoadedConfig& cfg, std::uint64_t seed,
                       const Tolerances& tol) {
  return {{"tool", "urlab"},
          {"command", command},
          {"seed", seed},
          {"config", cfg.text},
          {"tolerances",
           {{"saturation", tol.saturation},
            {"floor", tol.floor},
            {"hermitian", tol.hermitian},
            {"psd", tol.psd},
            {"residue", tol.residue},
            {"tail", tol.tail}}}};
}

/// URLAB_SEED beats a replayed report's seed, which beats the config.
inline std::optional<std::uint64_t> effective_override(const LoadedConfig& cfg, const RunOptions& opts) {
  if (opts.seed_override) return opts.seed_override;
  return cfg.report_seed;
}

inline int run_eval(const LoadedConfig& cfg, const RunOptions& opts, std::ostream& log = std::cout) {
  const Scenario sc = build_scenario(cfg.table, opts, effective_override(cfg, opts));
  EvalOutcome ev = evaluate_scenario(sc, opts.jobs);
  json report = run_header("eval", cfg, sc.seed, sc.tol);
  for (auto& [k, v] : ev.report.items()) report[k] = v;
  json paths = json::array();
  for (std::size_t i = 0; i < ev.certificates.size(); ++i) {
    std::ostringstream name;
    name << "certificates/certificate_" << std::setw(4) << std::setfill('0') << i << ".json";
    write_text(opts.out / name.str(), ev.certificates[i].dump(2) + "\n");
    paths.push_back(name.str());
  }
  report["certificates"] = paths;
  report["exit_code"] = ev.exit_code();
  write_text(opts.out / "report.json", report.dump(2) + "\n");

  for (const auto& r : report["relations"]) {
    for (const auto& v : r["verdicts"]) {
      log << (v["holds"].get<bool>() ? (v["saturated"].get<bool>() ? "SATURATED " : "HOLDS     ")
                                     : "VIOLATED  ")
          << r["label"].get<std::string>() << " " << v["name"].get<std::string>()
          << " margin=" << format_double(v["margin"].get<double>()) << "\n";
    }
  }
  for (const auto& b : report["batteries"]) {
    for (const auto& s : b["summary"]) {
      log << "BATTERY   " << b["name"].get<std::string>() << " " << s["verdict"].get<std::string>()
          << " count=" << s["count"].get<int>() << " violations=" << s["violations"].get<int>()
          << " min_margin=" << format_double(s["min_margin"].get<double>()) << "\n";
    }
  }
  for (const auto& t : report["transforms"]) {
    log << (t["met"].get<bool>() ? "TRANSFORM " : "FAILED    ") << t["relation"].get<std::string>()
        << " kind=" << t["kind"].get<std::string>() << " expect=" << t["expect"].get<std::string>()
        << "\n";
  }
  log << "violations=" << ev.violations << " unmet=" << ev.unmet << " report="
      << (opts.out / "report.json").string() << "\n";
  return ev.exit_code();
}

inline int run_sweep(const LoadedConfig& cfg, const RunOptions& opts, std::ostream& log = std::cout) {
  const auto seed = effective_override(cfg, opts);
  // validates the non-swept parts and fixes the seed and tolerances
  toml::table base = cfg.table;
  base.erase("sweep");
  const Tolerances tol = detail::parse_tolerances(base, opts);
  std::uint64_t used_seed = seed.value_or(detail::get_seed(base, "seed", "config").value_or(0));
  const SweepOutcome s = run_sweep_grid(cfg.table, opts, seed, opts.jobs);
  const std::string format = opts.format.empty() ? "csv" : opts.format;
  json meta = run_header("sweep", cfg, used_seed, tol);
  meta["violations"] = s.violations;
  meta["unmet_expectations"] = s.unmet;
  meta["exit_code"] = s.exit_code();
  if (format == "csv") {
    write_text(opts.out / "sweep.csv", sweep_csv(s));
    meta["table"] = "sweep.csv";
    meta["rows"] = s.rows.size();
    write_text(opts.out / "sweep.json", meta.dump(2) + "\n");
  } else if (format == "json") {
    json body = sweep_json(s);  // keep alive: items() only views it
    for (auto& [k, v] : body.items()) meta[k] = v;
    write_text(opts.out / "sweep.json", meta.dump(2) + "\n");
  } else {
    throw ConfigError("--format must be csv or json");
  }
  log << "rows=" << s.rows.size() << " violations=" << s.violations << " unmet=" << s.unmet
      << " out=" << opts.out.string() << "\n";
  return s.exit_code();
}

inline int run_minimize(const LoadedConfig& cfg, const RunOptions& opts, std::ostream& log = std::cout) {
  const Scenario sc = build_scenario(cfg.table, opts, effective_override(cfg, opts));
  if (!sc.minimize) throw ConfigError("minimize: config has no [minimize] table");
  int code = kExitOk;
  json body = run_minimize_spec(sc, *sc.minimize, code);
  json report = run_header("minimize", cfg, sc.seed, sc.tol);
  for (auto& [k, v] : body.items()) report[k] = v;
  report["exit_code"] = code;
  write_text(opts.out / "minimize.json", report.dump(2) + "\n");
  log << "status=" << body["status"].get<std::string>()
      << " start_margin=" << format_double(body["start_margin"].get<double>())
      << " best_margin=" << format_double(body["best_margin"].get<double>())
      << " evaluations=" << body["evaluations"].get<int>();
  if (body.contains("coherent_fit")) {
    log << " coherent_fidelity=" << format_double(body["coherent_fit"]["fidelity"].get<double>());
  }
  log << "\n";
  return code;
}

inline int run_lemma_fuzz(const LemmaFuzzOptions& o, const RunOptions& opts, std::ostream& log = std::cout) {
  Tolerances tol;
  if (opts.tol_sat) tol.saturation = *opts.tol_sat;
  if (opts.floor) tol.floor = *opts.floor;
  LemmaFuzzOptions use = o;
  if (opts.seed_override) use.seed = *opts.seed_override;
  int code = kExitOk;
  json j = lemma_fuzz(use, tol, opts.jobs, code);
  j["tool"] = "urlab";
  j["command"] = "lemma-fuzz";
  j["exit_code"] = code;
  write_text(opts.out / "lemma_fuzz.json", j.dump(2) + "\n");
  for (const auto& s : j["summary"]) {
    log << s["verdict"].get<std::string>() << " count=" << s["count"].get<int>()
        << " min_margin=" << format_double(s["min_margin"].get<double>()) << "\n";
  }
  log << "violations=" << j["violations"].get<int>()
      << " max_coefficient_defect=" << format_double(j["max_coefficient_defect"].get<double>()) << "\n";
  return code;
}

}  // namespace urlab::cli
