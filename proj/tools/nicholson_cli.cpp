// Command-line runner: condition checks, simulation, persistence analysis,
// pullback meshes and parameter studies.
//
// Exit codes: 0 success, 1 domain failure (condition violated, not
// persistent, no convergence, numerical instability), 2 usage or parse error.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nicholson/nicholson.hpp"

namespace fs = std::filesystem;
using nicholson::SystemSpec;
using nicholson::TorusPoint;

namespace {

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsage = 2;

struct Common {
  std::string model;
  std::string config;
  std::vector<double> theta{0.0, 0.0};
  double h = 0.01;
  std::vector<std::string> argv;
};

struct Resolved {
  SystemSpec spec;
  std::string model_text;
};

Resolved resolve_model(const Common& c) {
  auto kv = nicholson::KeyValues::load(c.model);
  if (!c.config.empty()) kv.merge(nicholson::KeyValues::load(c.config));
  SystemSpec spec = nicholson::build_spec(kv);
  return {spec, nicholson::write_model(spec)};
}

TorusPoint theta_of(const Common& c) { return {c.theta.at(0), c.theta.at(1)}; }

unsigned resolve_jobs(int flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("NICHOLSON_JOBS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return nicholson::default_jobs();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw nicholson::Error("cannot write '" + path.string() + "'");
  out << text;
}

struct Manifest {
  nlohmann::ordered_json j;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  Manifest(const std::string& command, const Common& c, const Resolved& r) {
    j["command"] = command;
    j["version"] = nicholson::kVersion;
    j["argv"] = c.argv;
    j["model_file"] = c.model;
    j["config_file"] = c.config;
    j["resolved_model"] = r.model_text;
    j["theta"] = c.theta;
    j["h"] = c.h;
    j["outputs"] = nlohmann::json::array();
  }
  void output(const fs::path& p) { j["outputs"].push_back(p.string()); }
  void save(const fs::path& path) {
    j["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file(path, j.dump(2) + "\n");
  }
};

void add_common(CLI::App* sub, Common& c, bool with_theta = true) {
  sub->add_option("model", c.model, "model description file")->required()->check(CLI::ExistingFile);
  sub->add_option("--config", c.config, "key-value file overriding model keys")->check(CLI::ExistingFile);
  if (with_theta) sub->add_option("--theta", c.theta, "base point theta1,theta2")->delimiter(',')->expected(2);
  sub->add_option("--h", c.h, "step size")->check(CLI::PositiveNumber);
}

// ---------------------------------------------------------------------------

struct CheckArgs {
  std::string mode = "auto";
  double t_check = 200.0 * nicholson::kTwoPi;
  double dt = 0.01;
};

int run_check(const Common& c, const CheckArgs& a) {
  const Resolved r = resolve_model(c);
  nicholson::CheckGrid grid;
  grid.theta = theta_of(c);
  grid.t_end = a.t_check;
  grid.dt = a.dt;
  grid.mode = a.mode == "closed"     ? nicholson::BoundsMode::ClosedForm
              : a.mode == "sampling" ? nicholson::BoundsMode::Sampling
                                     : nicholson::BoundsMode::Auto;
  const auto assumptions = nicholson::check_assumptions(r.spec, grid);
  const auto bounds = nicholson::compute_bounds(r.spec, grid);
  const auto zone = nicholson::check_invariant_zone(r.spec, bounds, grid);
  nicholson::write_assumption_report(std::cout, assumptions);
  nicholson::write_zone_report(std::cout, zone);
  bool ok = true;
  for (const auto& h : assumptions.items)
    if (!h.holds) {
      std::cout << "FAILED: " << h.id;
      if (h.witness) std::cout << ' ' << h.witness->describe();
      std::cout << '\n';
      ok = false;
    }
  for (const auto& p : zone.patches)
    if (p.status != nicholson::ZonePatch::Status::Holds) {
      std::cout << "FAILED: zona-inv patch " << p.patch << ' ' << to_string(p.status) << " margin "
                << nicholson::format_double(p.margin) << '\n';
      ok = false;
    }
  std::cout << (ok ? "all conditions hold" : "conditions violated") << '\n';
  return ok ? kOk : kDomainFailure;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  double t_start = 0.0;
  double t_end = 0.0;
  std::string method = "gl2";
  std::string out;
  bool linearized = false;
  double history = 1.0;
};

template <class Field>
int simulate_field(Field field, const Common& c, const Resolved& r, const SimulateArgs& a) {
  nicholson::SolverConfig cfg;
  cfg.h = c.h;
  cfg.method = a.method == "rk23" ? nicholson::Method::ExplicitRK23 : nicholson::Method::GaussLegendre2;
  const double span = a.t_end - a.t_start;
  const int m = field.dim();
  const std::vector<double> delays = field.delays();
  std::ostringstream csv;
  // the summary goes to stderr when the CSV itself is written to stdout
  std::ostream& log = (a.out.empty() || a.out == "-") ? std::cerr : std::cout;
  int code = kOk;
  if (span <= 0.0) {
    nicholson::Trajectory empty(m, cfg.h, delays, nicholson::History::constant(m, a.history));
    nicholson::write_trajectory_csv(csv, empty, 0.0, a.t_start);
    log << "empty time span: header only\n";
  } else {
    try {
      const auto traj = nicholson::integrate(std::move(field), nicholson::History::constant(m, a.history), span, cfg);
      nicholson::write_trajectory_csv(csv, traj, span, a.t_start);
      double initial = std::fabs(a.history);
      double final_amp = 0.0;
      double peak = 0.0;
      // sign flips between consecutive nodes: the signature of a step outside the stability region
      std::size_t flips = 0;
      const std::size_t tail = traj.size() - std::max<std::size_t>(1, traj.size() / 10);
      for (std::size_t k = 0; k < traj.size(); ++k) {
        const double v = traj.state(k).cwiseAbs().maxCoeff();
        peak = std::max(peak, v);
        if (k >= tail) final_amp = std::max(final_amp, v);
        if (k > 0 && (traj.state(k).array() * traj.state(k - 1).array() < 0.0).any()) ++flips;
      }
      const double growth = initial > 0.0 ? final_amp / initial : final_amp;
      const double flip_share = traj.size() > 1 ? static_cast<double>(flips) / static_cast<double>(traj.size() - 1) : 0.0;
      log << "nodes: " << traj.size() << ", method " << to_string(cfg.method) << ", h " << cfg.h << '\n';
      log << "peak |y|: " << nicholson::format_double(peak)
          << ", amplitude growth (last 10% vs initial): " << nicholson::format_double(growth)
          << ", node-to-node sign flips: " << flips << '\n';
      if (growth > 10.0 && flip_share > 0.25) {
        log << "WARNING: growing amplitude with step-to-step oscillation, unstable\n";
      } else if (growth > 10.0) {
        log << "note: smooth exponential growth (no step-to-step oscillation)\n";
      }
    } catch (const nicholson::NonfiniteState& e) {
      log << "WARNING: growing amplitude, unstable: " << e.what() << '\n';
      code = kDomainFailure;
      nicholson::Trajectory empty(m, cfg.h, delays, nicholson::History::constant(m, a.history));
      nicholson::write_trajectory_csv(csv, empty, 0.0, a.t_start);
    }
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << csv.str();
  } else {
    Manifest man("simulate", c, r);
    write_file(a.out, csv.str());
    man.output(a.out);
    man.j["method"] = a.method;
    man.j["t_start"] = a.t_start;
    man.j["t_end"] = a.t_end;
    man.j["linearized"] = a.linearized;
    man.save(a.out + ".manifest.json");
  }
  return code;
}

int run_simulate(const Common& c, const SimulateArgs& a) {
  const Resolved r = resolve_model(c);
  const TorusPoint base = nicholson::advance_base(theta_of(c), a.t_start);
  if (a.linearized)
    return simulate_field(nicholson::LinearField(nicholson::linearize_at_zero(r.spec), base), c, r, a);
  return simulate_field(nicholson::NicholsonField(r.spec, base), c, r, a);
}

// ---------------------------------------------------------------------------

struct PersistenceArgs {
  double horizon = 2000.0;
  double threshold = 1e6;
  std::string out;
};

int run_persistence(const Common& c, const PersistenceArgs& a) {
  const Resolved r = resolve_model(c);
  nicholson::PersistenceOptions opts;
  opts.lyapunov.horizon = a.horizon;
  opts.lyapunov.renorm_threshold = a.threshold;
  nicholson::SolverConfig cfg;
  cfg.h = c.h;
  const auto rep = nicholson::persistence_verdict(r.spec, theta_of(c), opts, cfg);
  nicholson::write_persistence_report(std::cout, rep);
  if (!a.out.empty()) {
    Manifest man("persistence", c, r);
    std::ostringstream csv;
    nicholson::write_persistence_csv(csv, rep);
    write_file(a.out, csv.str());
    man.output(a.out);
    man.j["horizon"] = a.horizon;
    man.j["renorm_threshold"] = a.threshold;
    man.save(a.out + ".manifest.json");
  }
  return rep.verdict == nicholson::Verdict::Persistent ? kOk : kDomainFailure;
}

// ---------------------------------------------------------------------------

struct MeshArgs {
  int n = 16;
  double tol = 1e-6;
  double lag = 10.0;
  double t_step = 10.0;
  double t_max = 2000.0;
  int jobs = 0;
  std::string out_dir = ".";
  bool svg = true;
};

void add_mesh_options(CLI::App* sub, MeshArgs& a) {
  sub->add_option("--n", a.n, "grid resolution per angle")->check(CLI::PositiveNumber);
  sub->add_option("--tol", a.tol, "pullback convergence tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--lag", a.lag, "comparison lag")->check(CLI::PositiveNumber);
  sub->add_option("--t-step", a.t_step, "horizon increment")->check(CLI::PositiveNumber);
  sub->add_option("--t-max", a.t_max, "horizon cap")->check(CLI::PositiveNumber);
  sub->add_option("--jobs", a.jobs, "worker threads (default NICHOLSON_JOBS or all cores)");
  sub->add_option("--out-dir", a.out_dir, "output directory");
  sub->add_flag("!--no-svg", a.svg, "skip SVG heatmaps");
}

nicholson::PullbackConfig pullback_config(const MeshArgs& a) {
  nicholson::PullbackConfig p;
  p.tol = a.tol;
  p.lag = a.lag;
  p.t_step = a.t_step;
  p.t_max = a.t_max;
  return p;
}

void record_mesh_args(Manifest& man, const MeshArgs& a, unsigned jobs) {
  man.j["n"] = a.n;
  man.j["tol"] = a.tol;
  man.j["lag"] = a.lag;
  man.j["t_step"] = a.t_step;
  man.j["t_max"] = a.t_max;
  man.j["jobs"] = jobs;
}

void emit_mesh(const nicholson::AttractorMesh& mesh, const fs::path& dir, const std::string& stem, bool svg,
               Manifest& man) {
  std::ostringstream csv;
  nicholson::write_mesh_csv(csv, mesh);
  write_file(dir / (stem + ".csv"), csv.str());
  man.output(dir / (stem + ".csv"));
  if (!svg) return;
  for (int c = 0; c < mesh.dim; ++c) {
    std::ostringstream s;
    nicholson::write_mesh_svg(s, mesh, c);
    const fs::path p = dir / (stem + "_y" + std::to_string(c + 1) + ".svg");
    write_file(p, s.str());
    man.output(p);
  }
}

int mesh_status(const nicholson::AttractorMesh& mesh) {
  int code = kOk;
  for (std::size_t k = 0; k < mesh.failures.size(); ++k)
    if (!mesh.failures[k].empty()) {
      std::cout << "node " << k / mesh.n << ',' << k % mesh.n << " failed: " << mesh.failures[k] << '\n';
      code = kDomainFailure;
    }
  for (const auto& v : mesh.invariant_violations) {
    std::cout << "invariant violated: " << v << '\n';
    code = kDomainFailure;
  }
  return code;
}

int run_mesh(const Common& c, const MeshArgs& a) {
  const Resolved r = resolve_model(c);
  const unsigned jobs = resolve_jobs(a.jobs);
  Manifest man("mesh", c, r);
  record_mesh_args(man, a, jobs);
  nicholson::SolverConfig cfg;
  cfg.h = c.h;
  const auto mesh = nicholson::compute_mesh(r.spec, a.n, pullback_config(a), cfg, jobs);
  const fs::path dir = a.out_dir;
  emit_mesh(mesh, dir, "mesh", a.svg, man);
  double t_worst = 0.0;
  for (double t : mesh.horizons) t_worst = std::max(t_worst, std::isnan(t) ? 0.0 : t);
  std::cout << "mesh " << a.n << 'x' << a.n << ": " << (mesh.partial() ? "partial" : "complete")
            << ", max T_final " << t_worst << ", invariants " << (mesh.invariants_hold() ? "hold" : "VIOLATED") << '\n';
  man.save(dir / "manifest.json");
  return mesh_status(mesh);
}

struct StudyArgs {
  std::string axis;
  std::vector<double> values;
};

int run_study(const Common& c, const MeshArgs& a, const StudyArgs& s) {
  const Resolved r = resolve_model(c);
  const auto axis = nicholson::parse_axis(s.axis);
  if (!axis) throw nicholson::ParseError("unknown axis '" + s.axis + "'");
  const unsigned jobs = resolve_jobs(a.jobs);
  Manifest man("study", c, r);
  record_mesh_args(man, a, jobs);
  man.j["axis"] = s.axis;
  man.j["values"] = s.values;
  nicholson::SolverConfig cfg;
  cfg.h = c.h;
  const auto rep = nicholson::parameter_study(r.spec, *axis, s.values, a.n, pullback_config(a), cfg, jobs);
  const fs::path dir = a.out_dir;
  int code = kOk;
  for (std::size_t k = 0; k < rep.entries.size(); ++k) {
    emit_mesh(rep.entries[k].mesh, dir, "study_" + std::to_string(k), a.svg, man);
    if (mesh_status(rep.entries[k].mesh) != kOk) code = kDomainFailure;
    if (!rep.entries[k].assumptions.all_hold() || !rep.entries[k].zone.holds()) code = kDomainFailure;
  }
  std::ostringstream txt;
  nicholson::write_monotonicity_report(txt, rep);
  write_file(dir / "monotonicity.txt", txt.str());
  man.output(dir / "monotonicity.txt");
  std::cout << txt.str();
  man.save(dir / "manifest.json");
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-periodic Nicholson delay systems: persistence, pullback attractors, parameter studies"};
  app.set_version_flag("--version", nicholson::kVersion);
  app.set_help_flag("--help", "print this help and exit");  // -h would clash with --h (step size)
  app.require_subcommand(1);

  Common common;
  common.argv.assign(argv + 1, argv + argc);

  CheckArgs check_args;
  auto* check = app.add_subcommand("check", "verify hypotheses (a1)-(a6) and the invariant-zone condition");
  add_common(check, common);
  check->add_option("--mode", check_args.mode, "auto | closed | sampling")
      ->check(CLI::IsMember({"auto", "closed", "sampling"}));
  check->add_option("--t-check", check_args.t_check, "sampled horizon")->check(CLI::PositiveNumber);
  check->add_option("--dt", check_args.dt, "sampling step")->check(CLI::PositiveNumber);

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "integrate the model and write a CSV trajectory");
  add_common(simulate, common);
  simulate->add_option("--t-start", sim_args.t_start, "start time (base point shifted accordingly)");
  simulate->add_option("--t-end", sim_args.t_end, "end time")->required();
  simulate->add_option("--method", sim_args.method, "gl2 | rk23")->check(CLI::IsMember({"gl2", "rk23"}));
  simulate->add_option("--out", sim_args.out, "CSV output path (stdout when omitted)");
  simulate->add_option("--history", sim_args.history, "constant initial map value");
  simulate->add_flag("--linearized", sim_args.linearized, "integrate the linearization along the null solution");

  PersistenceArgs pers_args;
  auto* persistence = app.add_subcommand("persistence", "Lyapunov exponents and uniform persistence verdict");
  add_common(persistence, common);
  persistence->add_option("--horizon", pers_args.horizon, "integration horizon T")->check(CLI::PositiveNumber);
  persistence->add_option("--threshold", pers_args.threshold, "renormalization threshold");
  persistence->add_option("--out", pers_args.out, "CSV output path");

  MeshArgs mesh_args;
  auto* mesh = app.add_subcommand("mesh", "pullback attractor over a uniform torus grid");
  add_common(mesh, common, false);
  add_mesh_options(mesh, mesh_args);

  MeshArgs study_mesh_args;
  StudyArgs study_args;
  auto* study = app.add_subcommand("study", "attractor meshes along a parameter axis with monotonicity report");
  add_common(study, common, false);
  add_mesh_options(study, study_mesh_args);
  study->add_option("--axis", study_args.axis, "both | alpha12 | mortality")->required();
  study->add_option("--values", study_args.values, "comma-separated parameter values")->delimiter(',')->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*check) return run_check(common, check_args);
    if (*simulate) return run_simulate(common, sim_args);
    if (*persistence) return run_persistence(common, pers_args);
    if (*mesh) return run_mesh(common, mesh_args);
    if (*study) return run_study(common, study_mesh_args, study_args);
  } catch (const nicholson::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kUsage;
  } catch (const nicholson::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const nicholson::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainFailure;
  }
  return kUsage;
}
