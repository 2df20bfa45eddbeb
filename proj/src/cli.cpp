#include "equiorb/cli.hpp"

#include "equiorb/errors.hpp"
#include "equiorb/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

namespace equiorb {

using nlohmann::json;
namespace fs = std::filesystem;

void RunManifest::validate() const {
  if (group_file.empty()) throw ParseError("manifest: missing group file");
  if (!fs::exists(group_file))
    throw ParseError("manifest: group file " + group_file.string() + " does not exist");
  if (restarts < 1) throw ParseError("manifest: restarts must be at least 1");
  if (s < 0) throw ParseError("manifest: s must be non-negative");
  if (nu && *nu < 1) throw ParseError("manifest: nu must be positive");
  try {
    config.validate();
  } catch (const Error& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

RunManifest load_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open manifest " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError("manifest " + file.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("manifest: expected a JSON object");
  const fs::path base = file.parent_path();
  auto rel = [&](const fs::path& p) { return p.is_relative() ? base / p : p; };
  RunManifest m;
  try {
    if (j.contains("group")) m.group_file = rel(j.at("group").get<std::string>());
    if (j.contains("s")) m.s = j.at("s").get<int>();
    if (j.contains("nu") && !j.at("nu").is_null()) m.nu = j.at("nu").get<int>();
    if (j.contains("restarts")) m.restarts = j.at("restarts").get<int>();
    if (j.contains("out")) m.out_dir = rel(j.at("out").get<std::string>());
    if (j.contains("require_coercive")) m.require_coercive = j.at("require_coercive").get<bool>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  if (j.contains("config")) m.config = parse_minimize_config(j.at("config"), m.config);
  return m;
}

json to_json(const RunManifest& m) {
  json j = {{"group", m.group_file.string()},
            {"s", m.s},
            {"nu", m.effective_nu()},
            {"restarts", m.restarts},
            {"out", m.out_dir.string()},
            {"require_coercive", m.require_coercive},
            {"config", to_json(m.config)}};
  return j;
}

int cmd_check(const fs::path& group_file, std::ostream& out, std::ostream& err) {
  LoadedGroup g;
  try {
    g = load_group(group_file);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const SymmetryGroup& group = *g.group;
  const Classification& cls = group.classification();
  const double fixed_dim = group.kernel_projector().trace();
  const bool coercive = is_coercive(group);
  out << "group:        " << (g.definition.name.empty() ? group_file.string() : g.definition.name)
      << '\n'
      << "bodies:       " << group.system().n() << " in R^" << group.system().d() << '\n'
      << "order:        " << group.order() << '\n'
      << "kernel order: " << group.kernel().size() << '\n'
      << "type:         " << to_string(cls.type) << (cls.kernel_only ? " (kernel only)" : "")
      << '\n'
      << "l:            " << cls.l << '\n'
      << "dim (E^n)^K:  " << static_cast<long>(std::lround(fixed_dim)) << '\n'
      << "coercive:     " << (coercive ? "coercive" : "not coercive") << '\n';
  return kExitOk;
}

namespace {

void require_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("output directory " + dir.string() + " cannot be created: " + ec.message());
  const fs::path probe = dir / ".equiorb-write-test";
  {
    std::ofstream f(probe);
    if (!f) throw Error("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

}  // namespace

std::vector<RunResult> cmd_minimize(const RunManifest& manifest, std::ostream& log) {
  manifest.validate();
  const LoadedGroup g = load_group(manifest.group_file);
  require_writable(manifest.out_dir);
  if (!is_coercive(*g.group)) {
    if (manifest.require_coercive) throw InvalidGroup("group is not coercive");
    log << "warning: group is not coercive; minimizing sequences may escape\n";
  }

  const QuadratureParams quad{manifest.effective_nu()};
  std::vector<RunResult> results;
  std::vector<SummaryRow> rows;
  for (int i = 0; i < manifest.restarts; ++i) {
    MinimizeConfig cfg = manifest.config;
    cfg.seed = manifest.config.seed + static_cast<std::uint64_t>(i);
    RunResult r;
    r.row.seed = cfg.seed;
    r.history_file = manifest.out_dir / ("history_" + std::to_string(cfg.seed) + ".csv");
    try {
      const FourierPath start =
          random_init(g.group, manifest.s, cfg.seed, cfg.amplitude, quad, cfg.collision_floor);
      const MinimizeOutcome outcome = minimize(start, quad, cfg);
      r.row.status = to_string(outcome.status);
      r.row.action = outcome.report.action;
      r.row.grad_norm = outcome.report.grad_norm;
      r.row.min_distance = outcome.report.min_mutual_distance;
      write_history_csv(r.history_file, outcome.history);
      if (outcome.status == Status::Converged) {
        r.record_file = manifest.out_dir / ("orbit_" + std::to_string(cfg.seed) + ".json");
        write_orbit_record(*r.record_file,
                           make_orbit_record(g.definition, outcome.path, quad, outcome.report));
      }
    } catch (const Error& e) {
      r.row.status = std::string("error: ") + e.what();
      r.row.action = r.row.grad_norm = r.row.min_distance = std::nan("");
      write_history_csv(r.history_file, {});
    }
    log << "seed " << r.row.seed << ": " << r.row.status << "  action " << format_double(r.row.action)
        << "  grad " << format_double(r.row.grad_norm) << "  min distance "
        << format_double(r.row.min_distance) << '\n';
    rows.push_back(r.row);
    results.push_back(std::move(r));
  }
  write_summary_csv(manifest.out_dir / "summary.csv", rows);
  return results;
}

void cmd_sample(const fs::path& orbit_file, std::optional<int> resolution, std::ostream& out) {
  const LoadedOrbit orbit = load_orbit(orbit_file);
  const int l = orbit.path.group().l();
  const int res = resolution.value_or(orbit.quad.nu * l);
  if (res < 1) throw ParseError("resolution must be positive");
  if (res % l == 0) {
    const FullPeriodTrajectory traj = extend_to_full_period(orbit.path, QuadratureParams{res / l});
    write_trajectory_csv(out, traj.times, traj.samples);
    return;
  }
  extend_to_full_period(orbit.path, orbit.quad);  // junction check
  std::vector<double> times;
  std::vector<Configuration> samples;
  for (int i = 0; i <= res; ++i) {
    const double t = i == res ? static_cast<double>(l) : static_cast<double>(i) * l / res;
    times.push_back(t);
    samples.push_back(sample_full_period(orbit.path, t));
  }
  write_trajectory_csv(out, times, samples);
}

namespace {

HttpService* g_service = nullptr;

extern "C" void handle_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Equivariant periodic orbit search for the n-body problem", "equiorb"};
  app.require_subcommand(1);

  std::string group_file;
  auto* check = app.add_subcommand("check", "Validate a group file and print its diagnostics");
  check->add_option("--group,group", group_file, "Group definition file")->required();

  std::string manifest_file;
  std::optional<int> s, nu, restarts, max_iters;
  std::optional<std::uint64_t> seed;
  std::optional<double> grad_tol, amplitude;
  std::optional<std::string> out_dir, method;
  bool require_coercive = false;
  auto* mini = app.add_subcommand("minimize", "Search for periodic orbits from random starts");
  mini->add_option("--manifest", manifest_file, "Run manifest (JSON)");
  mini->add_option("--group", group_file, "Group definition file");
  mini->add_option("--s", s, "Number of sine modes");
  mini->add_option("--nu", nu, "Quadrature subintervals per fundamental domain");
  mini->add_option("--seed", seed, "Seed of the first restart");
  mini->add_option("--restarts", restarts, "Number of random restarts");
  mini->add_option("--max-iters", max_iters, "Iteration cap per run");
  mini->add_option("--grad-tol", grad_tol, "Gradient norm tolerance");
  mini->add_option("--amplitude", amplitude, "Amplitude of the random initial coefficients");
  mini->add_option("--method", method, "quasi-newton or steepest-descent");
  mini->add_option("--out", out_dir, "Output directory");
  mini->add_flag("--require-coercive", require_coercive, "Refuse non-coercive groups");

  std::string orbit_file;
  std::optional<int> resolution;
  std::string sample_out;
  auto* samp = app.add_subcommand("sample", "Export the full-period trajectory of an orbit");
  samp->add_option("--orbit,orbit", orbit_file, "Orbit record")->required();
  samp->add_option("--resolution", resolution, "Intervals over the full period (default nu*l)");
  samp->add_option("--out", sample_out, "CSV file (default: standard output)");

  int port = 8080;
  std::string host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--host", host, "Address to bind");
  serve->add_option("--manifest", manifest_file, "Manifest providing session defaults");
  serve->add_option("--s", s, "Default number of sine modes");
  serve->add_option("--nu", nu, "Default quadrature subintervals");
  serve->add_option("--max-iters", max_iters, "Iteration cap per session");
  serve->add_option("--grad-tol", grad_tol, "Gradient norm tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  auto apply_overrides = [&](RunManifest& m) {
    if (!group_file.empty()) m.group_file = group_file;
    if (s) m.s = *s;
    if (nu) m.nu = *nu;
    if (restarts) m.restarts = *restarts;
    if (max_iters) m.config.max_iters = *max_iters;
    if (grad_tol) m.config.grad_tol = *grad_tol;
    if (seed) m.config.seed = *seed;
    if (amplitude) m.config.amplitude = *amplitude;
    if (out_dir) m.out_dir = *out_dir;
    if (require_coercive) m.require_coercive = true;
    if (method) {
      auto mm = method_from_string(*method);
      if (!mm) throw ParseError("unknown method '" + *method + "'");
      m.config.method = *mm;
    }
  };

  if (*check) return cmd_check(group_file, out, err);

  if (*mini) {
    RunManifest m;
    try {
      if (!manifest_file.empty()) m = load_manifest(manifest_file);
      apply_overrides(m);
      m.validate();
      fs::create_directories(m.out_dir);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    }
    std::vector<RunResult> results;
    try {
      results = cmd_minimize(m, out);
    } catch (const ParseError& e) {
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    }
    int converged = 0;
    for (const auto& r : results) converged += r.record_file.has_value();
    out << converged << " of " << results.size() << " runs converged; summary in "
        << (m.out_dir / "summary.csv").string() << '\n';
    return converged > 0 ? kExitOk : kExitComputation;
  }

  if (*samp) {
    try {
      if (sample_out.empty()) {
        cmd_sample(orbit_file, resolution, out);
      } else {
        std::ostringstream buf;
        cmd_sample(orbit_file, resolution, buf);
        std::ofstream f(sample_out);
        if (!f) throw ParseError("cannot write " + sample_out);
        f << buf.str();
      }
    } catch (const ParseError& e) {
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const ShapeError& e) {
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return kExitComputation;
    }
    return kExitOk;
  }

  if (*serve) {
    SessionDefaults defaults;
    try {
      if (!manifest_file.empty()) {
        const RunManifest m = load_manifest(manifest_file);
        defaults.s = m.s;
        defaults.nu = m.nu;
        defaults.config = m.config;
      }
      if (s) defaults.s = *s;
      if (nu) defaults.nu = *nu;
      if (max_iters) defaults.config.max_iters = *max_iters;
      if (grad_tol) defaults.config.grad_tol = *grad_tol;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    }
    SessionManager manager(defaults);
    HttpService service(manager);
    int bound = 0;
    try {
      bound = service.bind(ServeOptions{host, port});
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    }
    out << "listening on http://" << host << ':' << bound << std::endl;
    g_service = &service;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    service.listen();
    g_service = nullptr;
    return kExitOk;
  }
  return kExitUsage;
}

}  // namespace equiorb
