// wfdual: command-line driver for the SPDE / dual particle experiments.
//
// Exit codes: 0 pass, 1 statistical failure, 2 configuration error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wfdual/config.hpp"
#include "wfdual/output.hpp"
#include "wfdual/wfdual.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wfdual;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kConfigError = 2;

struct Common {
  std::string config_path;
  std::string out_dir;
};

struct Run {
  ExperimentConfig cfg;
  std::string hash;
  fs::path out;
};

Run prepare(const Common& common) {
  Run r;
  r.cfg = load_config(common.config_path);
  if (!common.out_dir.empty()) r.cfg.output_dir = common.out_dir;
  r.cfg.threads = resolve_threads(r.cfg.threads);
  r.hash = config_hash_hex(r.cfg);
  r.out = r.cfg.output_dir;
  fs::create_directories(r.out);
  return r;
}

FieldConfig field_config(const ExperimentConfig& c) {
  FieldConfig f;
  f.domain = c.domain();
  f.dt = c.discretization.dt_field;
  f.threads = c.threads;
  return f;
}

DualConfig dual_config(const ExperimentConfig& c) {
  DualConfig d;
  d.dt = c.discretization.dt_particles;
  d.truncation = c.particle_truncation();
  d.k_mode = c.k_mode();
  d.population_cap = c.output.population_cap;
  d.threads = c.threads;
  return d;
}

ParticleRunConfig particle_config(const ExperimentConfig& c) {
  return {c.discretization.dt_particles, static_cast<std::size_t>(c.output.population_cap), c.threads};
}

void require_safe_points(const ExperimentConfig& c) {
  if (!probe_points_safe(c.points, c.discretization.domain, c.horizon))
    throw ConfigError("probe points outside the safe sub-domain: need max|x| + 8 sqrt(T) <= domain");
}

// ---------------------------------------------------------------------------

int cmd_spde(const Common& common) {
  auto run = prepare(common);
  const auto& c = run.cfg;
  require_safe_points(c);
  const auto spec = c.drift.build();
  const auto f = c.initial.build();
  const FieldDrift drift{spec, 0};
  const auto times = c.resolved_sample_times();
  const auto field = simulate_field(f, drift, c.domain(), c.horizon, c.discretization.dt_field,
                                    replica_seed(c.master_seed, StreamTag::field, 0), times);
  CsvWriter snaps(run.out / "field_snapshots.csv", run.hash, {"t", "x", "u"});
  for (const auto& s : field.snapshots)
    for (std::size_t j = 0; j < s.values.size(); ++j) snaps.row(s.t, s.domain.x(j), s.values[j]);
  if (!c.points.empty() && c.reps.lhs >= 2) {
    const auto est = estimate_lhs(f, drift, c.points, c.horizon, c.reps.lhs, c.master_seed, field_config(c));
    write_json(run.out / "spde_estimate.json", to_json(est), run.hash);
    std::printf("E[prod u_T(x_i)] = %.6f +- %.6f (%zu reps)\n", est.mean, est.std_error, est.reps);
  }
  std::printf("wrote %s\n", (run.out / "field_snapshots.csv").c_str());
  return kPass;
}

int cmd_dual(const Common& common, const std::vector<std::uint32_t>& coupled_m) {
  auto run = prepare(common);
  const auto& c = run.cfg;
  const auto spec = c.drift.build();
  SystemConfig sc;
  sc.initial = c.points;
  sc.truncation = c.particle_truncation();
  sc.k_mode = c.k_mode().value_or(c.truncation.m > 0 ? KMode::truncated : KMode::untruncated);
  sc.horizon = c.horizon;
  sc.dt = c.discretization.dt_particles;
  sc.sample_times = c.resolved_sample_times();
  sc.population_cap = c.output.population_cap;
  const std::uint64_t seed = replica_seed(c.master_seed, StreamTag::particles, 0);

  if (coupled_m.empty()) {
    const auto summary = run_system(spec, sc, seed);
    CsvWriter traj(run.out / "trajectory.csv", run.hash, {"t", "|I|", "n_branch", "n_branch_neg", "K"});
    write_trajectory_csv(traj, summary.trajectory);
    write_json(run.out / "terminal.json", terminal_json(summary), run.hash);
    std::printf("|I_T| = %zu, n_branch = %zu, n_branch_neg = %zu, K_T = %.6f%s\n", summary.population,
                summary.n_branch, summary.n_branch_neg, summary.K, summary.aborted ? " (ABORTED)" : "");
    return summary.aborted ? kFail : kPass;
  }

  auto runs = run_coupled_truncations(spec, sc, coupled_m, seed);
  CsvWriter pop(run.out / "population.csv", run.hash, {"m", "t", "|I|", "n_branch", "n_branch_neg", "K"});
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (const auto& p : runs[i].trajectory) pop.row(coupled_m[i], p.t, p.population, p.n_branch, p.n_branch_neg, p.K);
  bool ok = true;
  json checks = json::array();
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    const bool same = coupling_identity_holds(runs.back(), runs[i], coupled_m[i]);
    ok = ok && same;
    checks.push_back({{"m", coupled_m[i]}, {"master_m", coupled_m.back()}, {"set_identity", same}});
    std::printf("set identity m=%u vs master m=%u: %s\n", coupled_m[i], coupled_m.back(), same ? "pass" : "FAIL");
  }
  write_json(run.out / "coupling.json", {{"checks", checks}, {"pass", ok}}, run.hash);
  return ok ? kPass : kFail;
}

int cmd_duality(const Common& common) {
  auto run = prepare(common);
  const auto& c = run.cfg;
  require_safe_points(c);
  const auto rep = verify_duality(c.initial.build(), c.drift.build(), c.points, c.horizon, field_config(c),
                                  dual_config(c), c.reps.lhs, c.reps.rhs, c.master_seed);
  json j = {{"lhs", to_json(rep.lhs)}, {"rhs", to_json(rep.rhs)}, {"z", rep.z},
            {"threshold", rep.threshold}, {"valid", rep.valid}, {"pass", rep.pass}};
  write_json(run.out / "duality.json", j, run.hash);
  j["config_hash"] = run.hash;
  std::cout << j.dump(2) << "\n";
  return rep.pass ? kPass : kFail;
}

int cmd_moments(const Common& common) {
  auto run = prepare(common);
  const auto& c = run.cfg;
  MomentConfig mc{c.discretization.dt_particles, static_cast<std::size_t>(c.output.population_cap), c.threads};
  const auto table = estimate_indicator(c.initial.build(), c.drift.build(), c.moments.x, c.horizon, c.moments.l,
                                        c.moments.m, c.reps.rhs, c.master_seed, mc, c.moments.diagonal_only);
  CsvWriter grid(run.out / "moments_grid.csv", run.hash, {"l", "m", "mean", "stderr", "reps"});
  const auto& rows = c.moments.diagonal_only ? table.diagonal : table.grid;
  for (const auto& e : rows) grid.row(e.l, e.m, e.estimate.mean, e.estimate.std_error, e.estimate.reps);
  json diag = json::array();
  for (const auto& e : table.diagonal) diag.push_back({{"l", e.l}, {"m", e.m}, {"estimate", to_json(e.estimate)}});
  write_json(run.out / "moments.json",
             {{"estimate", table.estimate}, {"stderr", table.estimate_stderr}, {"stabilized", table.stabilized},
              {"diagonal", diag}},
             run.hash);
  for (const auto& e : table.diagonal)
    std::printf("l=%u m=%u  %.6f +- %.6f\n", e.l, e.m, e.estimate.mean, e.estimate.std_error);
  std::printf("indicator estimate %.6f +- %.6f, stabilized: %s\n", table.estimate, table.estimate_stderr,
              table.stabilized ? "yes" : "no");
  return table.stabilized ? kPass : kFail;
}

int cmd_diagnose(const Common& common) {
  auto run = prepare(common);
  const auto& c = run.cfg;
  const auto pc = particle_config(c);
  const auto& d = c.diagnose;
  bool all = true;
  for (const auto& check : d.checks) {
    json details;
    bool pass = false;
    if (check == "branching") {
      const auto r = check_branching_identity(c.drift.build(), c.points, c.particle_truncation(), c.horizon,
                                              c.reps.particles, c.master_seed, pc);
      CsvWriter w(run.out / "diagnose_branching.csv", run.hash, {"quantity", "mean", "stderr", "reps"}, check);
      w.row("n_branch", r.branches.mean, r.branches.std_error, r.branches.reps);
      w.row("mu_occupation", r.compensator.mean, r.compensator.std_error, r.compensator.reps);
      w.row("difference", r.difference.mean, r.difference.std_error, r.difference.reps);
      pass = r.pass;
      details = {{"n_branch", to_json(r.branches)}, {"mu_occupation", to_json(r.compensator)}, {"z", r.z}};
    } else if (check == "supermartingale") {
      const auto r = check_supermartingale(c.drift.build(), d.R, c.points, d.times, c.reps.particles,
                                           c.master_seed, pc);
      CsvWriter w(run.out / "diagnose_supermartingale.csv", run.hash, {"t", "mean", "stderr", "reps", "bound_ok"},
                  check);
      json rows = json::array();
      for (const auto& row : r.rows) {
        w.row(row.t, row.z.mean, row.z.std_error, row.z.reps, row.bound_ok ? 1 : 0);
        rows.push_back({{"t", row.t}, {"estimate", to_json(row.z)}, {"bound_ok", row.bound_ok}});
      }
      pass = r.pass;
      details = {{"R", r.R}, {"bound", r.bound}, {"rows", rows}, {"step_z", r.step_z}, {"monotone_ok", r.monotone_ok}};
    } else if (check == "coming_down") {
      const auto r = check_coming_down(d.mu, d.l, d.site, d.t, c.reps.particles, c.master_seed, pc);
      CsvWriter w(run.out / "diagnose_coming_down.csv", run.hash, {"l", "t", "mean", "stderr", "reps"}, check);
      for (const auto& row : r.rows)
        w.row(row.l, row.t, row.population.mean, row.population.std_error, row.population.reps);
      pass = r.pass;
      details = {{"stabilization_z", r.stabilization_z}, {"stabilized", r.stabilized},
                 {"shape_ratio", r.shape_ratio},         {"shape_ok", r.shape_ok}};
    } else if (check == "reflection") {
      const auto r = check_reflection(c.drift.build(), d.m, d.delta, c.reps.particles, c.master_seed, pc,
                                      {d.site});
      CsvWriter w(run.out / "diagnose_reflection.csv", run.hash, {"m", "mean", "stderr", "reps", "excluded"}, check);
      for (const auto& row : r.rows)
        w.row(row.m, row.population.mean, row.population.std_error, row.population.reps, row.excluded);
      pass = r.pass;
      details = {{"delta", r.delta}, {"z", r.z}};
    } else {
      throw ConfigError("unknown diagnose check '" + check + "'");
    }
    write_json(run.out / ("diagnose_" + check + ".json"), {{"check", check}, {"pass", pass}, {"details", details}},
               run.hash);
    std::printf("%-16s %s\n", check.c_str(), pass ? "pass" : "FAIL");
    all = all && pass;
  }
  return all ? kPass : kFail;
}

int cmd_coeffs(const std::string& config_path, std::optional<double> q, std::uint32_t k,
               const std::vector<double>& coeffs, double b_inf, const std::vector<double>& scan) {
  DriftSpec spec = [&] {
    if (!config_path.empty()) return load_config(config_path).drift.build();
    if (q) return binomial_coeffs(*q, k);
    if (coeffs.empty()) throw ConfigError("give --config, --binomial-q or --coeffs");
    return DriftSpec(coeffs, b_inf);
  }();
  const auto rep = validate(spec);
  std::printf("coeffs:");
  for (double b : spec.coeffs()) std::printf(" %.10g", b);
  std::printf("\nb_inf: %.10g\nmu: %.10g\n", spec.b_inf(), spec.mu());
  if (spec.tail_mass() > 0.0) std::printf("tail mass: %.3e\n", spec.tail_mass());
  for (const auto& o : spec.offspring()) {
    if (o.children == kInfiniteOffspring) std::printf("p_inf = %.10g\n", o.probability);
    else std::printf("p_%u = %.10g\n", o.children, o.probability);
  }
  std::printf("b(0) >= 0: %s\nb(1) <= 0: %s\noffspring law: %s\nlinear only: %s\n",
              rep.sign_at_zero ? "pass" : "FAIL", rep.sign_at_one ? "pass" : "FAIL",
              rep.offspring_well_formed ? "pass" : "FAIL", rep.linear_only ? "yes" : "no");
  bool any = false;
  for (double R : scan) {
    const bool ok = check_condition(spec, R);
    any = any || ok;
    std::printf("condition at R=%g: %s\n", R, ok ? "pass" : "fail");
  }
  return rep.pass() && (scan.empty() || any) ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wright-Fisher SPDE / dual particle system laboratory"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "experiment TOML file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", common.out_dir, "override output_dir");
  };

  auto* spde = app.add_subcommand("spde", "simulate the field and write snapshots");
  add_common(spde);
  auto* dual = app.add_subcommand("dual", "run the dual particle system");
  add_common(dual);
  std::vector<std::uint32_t> coupled_m;
  dual->add_option("--coupled-m", coupled_m, "ascending m list sharing one master randomness")->delimiter(',');
  auto* duality = app.add_subcommand("duality", "compare both sides of the moment duality");
  add_common(duality);
  auto* moments = app.add_subcommand("moments", "moment / indicator estimates on an (l, m) grid");
  add_common(moments);
  auto* diagnose = app.add_subcommand("diagnose", "structural checks of the dual system");
  add_common(diagnose);

  auto* coeffs = app.add_subcommand("coeffs", "validate a drift and scan the growth condition");
  std::string coeffs_config;
  std::optional<double> q;
  std::uint32_t k = 8;
  std::vector<double> coeff_list;
  double b_inf = 0.0;
  std::vector<double> scan;
  coeffs->add_option("--config", coeffs_config, "take the drift from a TOML file")->check(CLI::ExistingFile);
  coeffs->add_option("--binomial-q", q, "binomial-series drift -(1-z)^q z");
  coeffs->add_option("--k", k, "truncation order of the binomial series");
  coeffs->add_option("--coeffs", coeff_list, "b_0,b_1,...")->delimiter(',');
  coeffs->add_option("--b-inf", b_inf, "coefficient of the atom at z=1");
  coeffs->add_option("--scan-r", scan, "R values for the growth condition")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*spde) return cmd_spde(common);
    if (*dual) return cmd_dual(common, coupled_m);
    if (*duality) return cmd_duality(common);
    if (*moments) return cmd_moments(common);
    if (*diagnose) return cmd_diagnose(common);
    if (*coeffs) return cmd_coeffs(coeffs_config, q, k, coeff_list, b_inf, scan);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  }
  return kConfigError;
}
