#include "equiorb/orbit_io.hpp"

#include "equiorb/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace equiorb {

using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw ParseError(std::string("orbit record: missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("orbit record: field '") + name + "' has the wrong type");
  }
}

std::ofstream open_for_write(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  out.precision(17);
  return out;
}

std::string coord_name(int c, int d) {
  static const char* names[] = {"x", "y", "z"};
  return d <= 3 ? names[c] : "_" + std::to_string(c + 1);
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

OrbitRecord make_orbit_record(const GroupDefinition& def, const FourierPath& path,
                              const QuadratureParams& quad, const ActionReport& report) {
  OrbitRecord rec;
  rec.group = to_json(def);
  rec.s = path.s();
  rec.nu = quad.nu;
  const int dim = path.block_size();
  rec.coeffs.resize(static_cast<std::size_t>(path.block_count()));
  for (int k = 0; k < path.block_count(); ++k) {
    auto& blk = rec.coeffs[static_cast<std::size_t>(k)];
    blk.assign(path.coeffs().data() + static_cast<std::ptrdiff_t>(k) * dim,
               path.coeffs().data() + static_cast<std::ptrdiff_t>(k + 1) * dim);
  }
  rec.action = report.action;
  rec.grad_norm = report.grad_norm;
  rec.min_distance = report.min_mutual_distance;
  return rec;
}

json to_json(const OrbitRecord& rec) {
  json j;
  j["group"] = rec.group;
  j["s"] = rec.s;
  j["nu"] = rec.nu;
  j["coeffs"] = rec.coeffs;
  j["action"] = rec.action;
  j["grad_norm"] = rec.grad_norm;
  j["min_distance"] = rec.min_distance;
  return j;
}

OrbitRecord parse_orbit_record(const json& j) {
  if (!j.is_object()) throw ParseError("orbit record: expected a JSON object");
  OrbitRecord rec;
  if (!j.contains("group")) throw ParseError("orbit record: missing field 'group'");
  rec.group = j.at("group");
  if (!rec.group.is_object() && !rec.group.is_string())
    throw ParseError("orbit record: field 'group' must be an object or a path");
  rec.s = field<int>(j, "s");
  rec.nu = field<int>(j, "nu");
  if (rec.s < 0) throw ParseError("orbit record: field 's' must be non-negative");
  if (rec.nu < 1) throw ParseError("orbit record: field 'nu' must be positive");
  rec.coeffs = field<std::vector<std::vector<double>>>(j, "coeffs");
  // Diagnostics may be absent or null (non-finite values serialize as null).
  auto diag = [&](const char* name) {
    if (!j.contains(name) || j.at(name).is_null()) return std::nan("");
    if (!j.at(name).is_number())
      throw ParseError(std::string("orbit record: field '") + name + "' must be a number");
    return j.at(name).get<double>();
  };
  rec.action = diag("action");
  rec.grad_norm = diag("grad_norm");
  rec.min_distance = diag("min_distance");
  return rec;
}

std::string dump_orbit_record(const OrbitRecord& rec) { return to_json(rec).dump(2) + "\n"; }

void write_orbit_record(const std::filesystem::path& file, const OrbitRecord& rec) {
  auto out = open_for_write(file);
  out << dump_orbit_record(rec);
  if (!out) throw Error("failed writing " + file.string());
}

OrbitRecord read_orbit_record(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open orbit record " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError("orbit record " + file.string() + ": " + e.what());
  }
  return parse_orbit_record(j);
}

LoadedOrbit resolve_orbit(const OrbitRecord& rec, const std::filesystem::path& base_dir) {
  LoadedGroup group;
  if (rec.group.is_string()) {
    std::filesystem::path p = rec.group.get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    group = load_group(p);
  } else {
    group = build_group(parse_group_definition(rec.group));
  }
  const int dim = group.group->system().dim();
  if (static_cast<int>(rec.coeffs.size()) != rec.s + 2) {
    std::ostringstream os;
    os << "orbit record: field 'coeffs' has " << rec.coeffs.size() << " blocks, expected s+2 = "
       << rec.s + 2;
    throw ParseError(os.str());
  }
  Eigen::VectorXd flat(static_cast<Eigen::Index>(rec.s + 2) * dim);
  for (std::size_t k = 0; k < rec.coeffs.size(); ++k) {
    if (static_cast<int>(rec.coeffs[k].size()) != dim) {
      std::ostringstream os;
      os << "orbit record: field 'coeffs[" << k << "]' has " << rec.coeffs[k].size()
         << " entries, expected n*d = " << dim;
      throw ParseError(os.str());
    }
    for (int i = 0; i < dim; ++i)
      flat[static_cast<Eigen::Index>(k) * dim + i] = rec.coeffs[k][static_cast<std::size_t>(i)];
  }
  FourierPath path(group.group, rec.s, std::move(flat));
  return {rec, std::move(group), std::move(path), QuadratureParams{rec.nu}};
}

LoadedOrbit load_orbit(const std::filesystem::path& file) {
  return resolve_orbit(read_orbit_record(file), file.parent_path());
}

void write_history_csv(const std::filesystem::path& file,
                       const std::vector<HistoryEntry>& history) {
  auto out = open_for_write(file);
  out << "iter,action,grad_norm,min_distance\n";
  for (const auto& h : history)
    out << h.iter << ',' << format_double(h.action) << ',' << format_double(h.grad_norm) << ','
        << format_double(h.min_distance) << '\n';
}

void write_summary_csv(const std::filesystem::path& file, const std::vector<SummaryRow>& rows) {
  auto out = open_for_write(file);
  out << "seed,status,action,grad_norm,min_distance\n";
  for (const auto& r : rows)
    out << r.seed << ',' << r.status << ',' << format_double(r.action) << ','
        << format_double(r.grad_norm) << ',' << format_double(r.min_distance) << '\n';
}

void write_trajectory_csv(std::ostream& out, const std::vector<double>& times,
                          const std::vector<Configuration>& samples) {
  if (times.size() != samples.size()) throw ShapeError("trajectory: times and samples differ");
  out << 't';
  if (!samples.empty()) {
    const auto d = static_cast<int>(samples.front().rows());
    for (Eigen::Index j = 0; j < samples.front().cols(); ++j)
      for (int c = 0; c < d; ++c) out << ",q" << j + 1 << coord_name(c, d);
  }
  out << '\n';
  for (std::size_t i = 0; i < times.size(); ++i) {
    out << format_double(times[i]);
    const Configuration& q = samples[i];
    for (Eigen::Index j = 0; j < q.cols(); ++j)
      for (Eigen::Index c = 0; c < q.rows(); ++c) out << ',' << format_double(q(c, j));
    out << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& file, const std::vector<double>& times,
                          const std::vector<Configuration>& samples) {
  auto out = open_for_write(file);
  write_trajectory_csv(out, times, samples);
}

}  // namespace equiorb

namespace equiorb {

MinimizeConfig parse_minimize_config(const json& j, MinimizeConfig cfg) {
  if (!j.is_object()) throw ParseError("config: expected a JSON object");
  auto num = [&](const char* name, auto& dst) {
    if (!j.contains(name)) return;
    using T = std::remove_reference_t<decltype(dst)>;
    try {
      dst = j.at(name).get<T>();
    } catch (const json::exception&) {
      throw ParseError(std::string("config: field '") + name + "' has the wrong type");
    }
  };
  num("max_iters", cfg.max_iters);
  num("grad_tol", cfg.grad_tol);
  num("memory", cfg.memory);
  num("collision_floor", cfg.collision_floor);
  num("initial_step", cfg.line_search.initial_step);
  num("shrink", cfg.line_search.shrink);
  num("armijo", cfg.line_search.armijo);
  num("max_backtracks", cfg.line_search.max_backtracks);
  num("divergence_radius", cfg.divergence_radius);
  num("seed", cfg.seed);
  num("amplitude", cfg.amplitude);
  if (j.contains("method")) {
    if (!j.at("method").is_string()) throw ParseError("config: field 'method' must be a string");
    auto m = method_from_string(j.at("method").get<std::string>());
    if (!m) throw ParseError("config: unknown method '" + j.at("method").get<std::string>() + "'");
    cfg.method = *m;
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return cfg;
}

json to_json(const MinimizeConfig& cfg) {
  return {{"max_iters", cfg.max_iters},
          {"grad_tol", cfg.grad_tol},
          {"method", to_string(cfg.method)},
          {"memory", cfg.memory},
          {"collision_floor", cfg.collision_floor},
          {"initial_step", cfg.line_search.initial_step},
          {"shrink", cfg.line_search.shrink},
          {"armijo", cfg.line_search.armijo},
          {"max_backtracks", cfg.line_search.max_backtracks},
          {"divergence_radius", cfg.divergence_radius},
          {"seed", cfg.seed},
          {"amplitude", cfg.amplitude}};
}

}  // namespace equiorb
