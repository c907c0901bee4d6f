#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "drift.hpp"
#include "initial.hpp"
#include "particles.hpp"
#include "spde.hpp"

namespace wfdual {

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DriftBlock {
  std::vector<double> coeffs;
  double b_inf = 0.0;
  std::optional<double> binomial_q;
  std::optional<std::uint32_t> truncate_k;

  DriftSpec build() const {
    if (binomial_q) return binomial_coeffs(*binomial_q, truncate_k.value_or(8));
    return DriftSpec(coeffs, b_inf);
  }
  bool operator==(const DriftBlock&) const = default;
};

struct InitialBlock {
  std::string kind = "constant";  // constant | gaussian_bump | one | zero
  double c = 0.5;
  double a = 0.0;
  double b = 0.0;

  InitialCondition build() const {
    if (kind == "constant") return InitialCondition::constant(c);
    if (kind == "gaussian_bump") return InitialCondition::gaussian_bump(a, b);
    if (kind == "one") return InitialCondition::one();
    if (kind == "zero") return InitialCondition::zero();
    throw ConfigError("unknown initial kind '" + kind + "'");
  }
  bool operator==(const InitialBlock&) const = default;
};

struct DiscretizationBlock {
  double dx = 1.0 / 32.0;
  double dt_field = 1.0 / 4096.0;
  double domain = 8.0;  // half-width X of [-X, X]
  double dt_particles = 1e-3;
  bool operator==(const DiscretizationBlock&) const = default;
};

struct TruncationBlock {
  std::uint32_t l = 0;
  std::uint32_t m = 0;
  std::string k_mode = "auto";  // auto | untruncated | truncated
  bool operator==(const TruncationBlock&) const = default;
};

struct RepsBlock {
  std::uint64_t lhs = 200;
  std::uint64_t rhs = 2000;
  std::uint64_t particles = 1000;
  bool operator==(const RepsBlock&) const = default;
};

struct MomentsBlock {
  double x = 0.0;
  std::vector<std::uint32_t> l = {4, 8, 16};
  std::vector<std::uint32_t> m = {4, 8, 16};
  bool diagonal_only = true;
  bool operator==(const MomentsBlock&) const = default;
};

struct DiagnoseBlock {
  std::vector<std::string> checks = {"branching", "supermartingale", "coming_down", "reflection"};
  double R = 1.0;
  std::vector<double> times = {0.1, 0.25, 0.5};
  double mu = 1.0;
  std::vector<std::uint32_t> l = {64, 128, 256};
  std::vector<double> t = {0.01, 0.04, 0.1};
  std::vector<std::uint32_t> m = {64, 128};
  double delta = 0.05;
  double site = 0.0;
  bool operator==(const DiagnoseBlock&) const = default;
};

struct OutputBlock {
  std::vector<double> sample_times;  // dual trajectory / spde snapshots; empty: 11 even points on [0, horizon]
  std::uint64_t population_cap = 1'000'000;
  bool operator==(const OutputBlock&) const = default;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  unsigned threads = 0;
  std::string output_dir = "out";
  std::vector<double> points;
  double horizon = 0.25;
  DriftBlock drift;
  InitialBlock initial;
  DiscretizationBlock discretization;
  TruncationBlock truncation;
  RepsBlock reps;
  MomentsBlock moments;
  DiagnoseBlock diagnose;
  OutputBlock output;

  bool operator==(const ExperimentConfig&) const = default;

  Domain domain() const { return {discretization.domain, discretization.dx}; }
  Truncation particle_truncation() const { return {truncation.l, truncation.m}; }
  std::optional<KMode> k_mode() const {
    if (truncation.k_mode == "untruncated") return KMode::untruncated;
    if (truncation.k_mode == "truncated") return KMode::truncated;
    return std::nullopt;
  }
  std::vector<double> resolved_sample_times() const {
    if (!output.sample_times.empty()) return output.sample_times;
    std::vector<double> ts;
    for (int i = 0; i <= 10; ++i) ts.push_back(horizon * i / 10.0);
    return ts;
  }
};

namespace detail {

class TableReader {
 public:
  TableReader(const toml::table& t, std::string path) : t_(t), path_(std::move(path)) {}

  ~TableReader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto&& [k, v] : t_) {
      (void)v;
      if (!seen_.count(std::string(k.str())))
        throw ConfigError("unknown key '" + where(std::string(k.str())) + "'");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return t_.contains(key);
  }

  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    auto v = t_[key].value<double>();
    if (!v || !t_[key].is_number()) throw ConfigError("'" + where(key) + "' must be a number");
    out = *v;
  }
  template <typename Int>
    requires std::is_integral_v<Int>
  void get(const std::string& key, Int& out) {
    if (!has(key)) return;
    auto v = t_[key].value<std::int64_t>();
    if (!v || !t_[key].is_integer() || *v < 0) throw ConfigError("'" + where(key) + "' must be a nonnegative integer");
    out = static_cast<Int>(*v);
  }
  void get(const std::string& key, bool& out) {
    if (!has(key)) return;
    auto v = t_[key].value<bool>();
    if (!v) throw ConfigError("'" + where(key) + "' must be a boolean");
    out = *v;
  }
  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    auto v = t_[key].value<std::string>();
    if (!v) throw ConfigError("'" + where(key) + "' must be a string");
    out = *v;
  }
  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    if (!has(key)) return;
    T v{};
    get(key, v);
    out = v;
  }
  template <typename T>
  void get(const std::string& key, std::vector<T>& out) {
    if (!has(key)) return;
    const auto* arr = t_[key].as_array();
    if (!arr) throw ConfigError("'" + where(key) + "' must be an array");
    out.clear();
    for (const auto& node : *arr) {
      if constexpr (std::is_same_v<T, double>) {
        auto v = node.template value<double>();
        if (!v || !node.is_number()) throw ConfigError("'" + where(key) + "' must hold numbers");
        out.push_back(*v);
      } else if constexpr (std::is_same_v<T, std::string>) {
        auto v = node.template value<std::string>();
        if (!v) throw ConfigError("'" + where(key) + "' must hold strings");
        out.push_back(*v);
      } else {
        auto v = node.template value<std::int64_t>();
        if (!v || !node.is_integer() || *v < 0) throw ConfigError("'" + where(key) + "' must hold nonnegative integers");
        out.push_back(static_cast<T>(*v));
      }
    }
  }

  const toml::table* sub(const std::string& key) {
    if (!has(key)) return nullptr;
    const auto* t = t_[key].as_table();
    if (!t) throw ConfigError("'" + where(key) + "' must be a table");
    return t;
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const toml::table& t_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

template <typename T>
std::string fmt_array(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    if constexpr (std::is_same_v<T, double>) s += fmt_double(v[i]);
    else if constexpr (std::is_same_v<T, std::string>) s += quote(v[i]);
    else s += std::to_string(v[i]);
  }
  return s + "]";
}

}  // namespace detail

/// Semantic checks shared by the parser and programmatic construction.
inline void validate_config(const ExperimentConfig& c) {
  if (!(c.horizon >= 0.0) || !std::isfinite(c.horizon)) throw ConfigError("horizon must be finite and nonnegative");
  if (c.drift.binomial_q && !c.drift.coeffs.empty())
    throw ConfigError("drift: give either coeffs/b_inf or binomial_q/truncate_k, not both");
  if (c.drift.truncate_k && !c.drift.binomial_q) throw ConfigError("drift.truncate_k needs drift.binomial_q");
  if (!c.drift.binomial_q && c.drift.coeffs.empty()) throw ConfigError("drift.coeffs must be nonempty");
  try {
    (void)c.drift.build();
    (void)c.initial.build();
    (void)c.domain().cells();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(c.discretization.dt_field > 0.0) || !(c.discretization.dt_particles > 0.0))
    throw ConfigError("time steps must be positive");
  if (c.truncation.k_mode != "auto" && c.truncation.k_mode != "untruncated" && c.truncation.k_mode != "truncated")
    throw ConfigError("truncation.k_mode must be auto, untruncated or truncated");
  for (double x : c.points)
    if (!std::isfinite(x)) throw ConfigError("points must be finite");
}

inline ExperimentConfig parse_config(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "TOML parse error: " << e.description() << " at " << e.source().begin;
    throw ConfigError(os.str());
  }
  ExperimentConfig c;
  {
    detail::TableReader r(root, "");
    r.get("master_seed", c.master_seed);
    r.get("threads", c.threads);
    r.get("output_dir", c.output_dir);
    r.get("points", c.points);
    r.get("horizon", c.horizon);
    if (const auto* t = r.sub("drift")) {
      detail::TableReader d(*t, "drift");
      d.get("coeffs", c.drift.coeffs);
      d.get("b_inf", c.drift.b_inf);
      d.get("binomial_q", c.drift.binomial_q);
      d.get("truncate_k", c.drift.truncate_k);
    }
    if (const auto* t = r.sub("initial")) {
      detail::TableReader d(*t, "initial");
      d.get("kind", c.initial.kind);
      d.get("c", c.initial.c);
      d.get("a", c.initial.a);
      d.get("b", c.initial.b);
    }
    if (const auto* t = r.sub("discretization")) {
      detail::TableReader d(*t, "discretization");
      d.get("dx", c.discretization.dx);
      d.get("dt_field", c.discretization.dt_field);
      d.get("domain", c.discretization.domain);
      d.get("dt_particles", c.discretization.dt_particles);
    }
    if (const auto* t = r.sub("truncation")) {
      detail::TableReader d(*t, "truncation");
      d.get("l", c.truncation.l);
      d.get("m", c.truncation.m);
      d.get("k_mode", c.truncation.k_mode);
    }
    if (const auto* t = r.sub("reps")) {
      detail::TableReader d(*t, "reps");
      d.get("lhs", c.reps.lhs);
      d.get("rhs", c.reps.rhs);
      d.get("particles", c.reps.particles);
    }
    if (const auto* t = r.sub("moments")) {
      detail::TableReader d(*t, "moments");
      d.get("x", c.moments.x);
      d.get("l", c.moments.l);
      d.get("m", c.moments.m);
      d.get("diagonal_only", c.moments.diagonal_only);
    }
    if (const auto* t = r.sub("diagnose")) {
      detail::TableReader d(*t, "diagnose");
      d.get("checks", c.diagnose.checks);
      d.get("R", c.diagnose.R);
      d.get("times", c.diagnose.times);
      d.get("mu", c.diagnose.mu);
      d.get("l", c.diagnose.l);
      d.get("t", c.diagnose.t);
      d.get("m", c.diagnose.m);
      d.get("delta", c.diagnose.delta);
      d.get("site", c.diagnose.site);
    }
    if (const auto* t = r.sub("output")) {
      detail::TableReader d(*t, "output");
      d.get("sample_times", c.output.sample_times);
      d.get("population_cap", c.output.population_cap);
    }
  }
  validate_config(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Canonical TOML. Doubles print with 17 significant digits, so parsing the
/// result reproduces every field exactly.
inline std::string to_toml(const ExperimentConfig& c) {
  using detail::fmt_array;
  using detail::fmt_double;
  using detail::quote;
  std::ostringstream o;
  o << "master_seed = " << c.master_seed << "\n";
  o << "threads = " << c.threads << "\n";
  o << "output_dir = " << quote(c.output_dir) << "\n";
  o << "points = " << fmt_array(c.points) << "\n";
  o << "horizon = " << fmt_double(c.horizon) << "\n";
  o << "\n[drift]\n";
  if (c.drift.binomial_q) {
    o << "binomial_q = " << fmt_double(*c.drift.binomial_q) << "\n";
    if (c.drift.truncate_k) o << "truncate_k = " << *c.drift.truncate_k << "\n";
  } else {
    o << "coeffs = " << fmt_array(c.drift.coeffs) << "\n";
    o << "b_inf = " << fmt_double(c.drift.b_inf) << "\n";
  }
  o << "\n[initial]\nkind = " << quote(c.initial.kind) << "\nc = " << fmt_double(c.initial.c)
    << "\na = " << fmt_double(c.initial.a) << "\nb = " << fmt_double(c.initial.b) << "\n";
  o << "\n[discretization]\ndx = " << fmt_double(c.discretization.dx)
    << "\ndt_field = " << fmt_double(c.discretization.dt_field)
    << "\ndomain = " << fmt_double(c.discretization.domain)
    << "\ndt_particles = " << fmt_double(c.discretization.dt_particles) << "\n";
  o << "\n[truncation]\nl = " << c.truncation.l << "\nm = " << c.truncation.m
    << "\nk_mode = " << quote(c.truncation.k_mode) << "\n";
  o << "\n[reps]\nlhs = " << c.reps.lhs << "\nrhs = " << c.reps.rhs << "\nparticles = " << c.reps.particles << "\n";
  o << "\n[moments]\nx = " << fmt_double(c.moments.x) << "\nl = " << fmt_array(c.moments.l)
    << "\nm = " << fmt_array(c.moments.m) << "\ndiagonal_only = " << (c.moments.diagonal_only ? "true" : "false")
    << "\n";
  o << "\n[diagnose]\nchecks = " << fmt_array(c.diagnose.checks) << "\nR = " << fmt_double(c.diagnose.R)
    << "\ntimes = " << fmt_array(c.diagnose.times) << "\nmu = " << fmt_double(c.diagnose.mu)
    << "\nl = " << fmt_array(c.diagnose.l) << "\nt = " << fmt_array(c.diagnose.t)
    << "\nm = " << fmt_array(c.diagnose.m) << "\ndelta = " << fmt_double(c.diagnose.delta)
    << "\nsite = " << fmt_double(c.diagnose.site) << "\n";
  o << "\n[output]\nsample_times = " << fmt_array(c.output.sample_times)
    << "\npopulation_cap = " << c.output.population_cap << "\n";
  return o.str();
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json drift;
  if (c.drift.binomial_q) {
    drift["binomial_q"] = *c.drift.binomial_q;
    if (c.drift.truncate_k) drift["truncate_k"] = *c.drift.truncate_k;
  } else {
    drift["coeffs"] = c.drift.coeffs;
    drift["b_inf"] = c.drift.b_inf;
  }
  return {
      {"master_seed", c.master_seed},
      {"threads", c.threads},
      {"output_dir", c.output_dir},
      {"points", c.points},
      {"horizon", c.horizon},
      {"drift", drift},
      {"initial", {{"kind", c.initial.kind}, {"c", c.initial.c}, {"a", c.initial.a}, {"b", c.initial.b}}},
      {"discretization",
       {{"dx", c.discretization.dx},
        {"dt_field", c.discretization.dt_field},
        {"domain", c.discretization.domain},
        {"dt_particles", c.discretization.dt_particles}}},
      {"truncation", {{"l", c.truncation.l}, {"m", c.truncation.m}, {"k_mode", c.truncation.k_mode}}},
      {"reps", {{"lhs", c.reps.lhs}, {"rhs", c.reps.rhs}, {"particles", c.reps.particles}}},
      {"moments",
       {{"x", c.moments.x}, {"l", c.moments.l}, {"m", c.moments.m}, {"diagonal_only", c.moments.diagonal_only}}},
      {"diagnose",
       {{"checks", c.diagnose.checks},
        {"R", c.diagnose.R},
        {"times", c.diagnose.times},
        {"mu", c.diagnose.mu},
        {"l", c.diagnose.l},
        {"t", c.diagnose.t},
        {"m", c.diagnose.m},
        {"delta", c.diagnose.delta},
        {"site", c.diagnose.site}}},
      {"output", {{"sample_times", c.output.sample_times}, {"population_cap", c.output.population_cap}}},
  };
}

/// FNV-1a 64 over the canonical JSON form, minus the thread count and output
/// directory (neither changes results).
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("threads");
  j.erase("output_dir");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash_hex(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(c)));
  return buf;
}

}  // namespace wfdual
