#pragma once

#include "equiorb/group_io.hpp"
#include "equiorb/optimizer.hpp"
#include "equiorb/pathspace.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace equiorb {

/// Persisted orbit:
///
///   { "group": <definition object | path>, "s", "nu",
///     "coeffs": [[...] x (s+2)], "action", "grad_norm", "min_distance" }
///
/// Each coefficient block lists the n*d entries body-major, coordinate-minor.
struct OrbitRecord {
  nlohmann::json group;
  int s = 0;
  int nu = 0;
  std::vector<std::vector<double>> coeffs;
  double action = 0.0;
  double grad_norm = 0.0;
  double min_distance = 0.0;
};

OrbitRecord make_orbit_record(const GroupDefinition& def, const FourierPath& path,
                              const QuadratureParams& quad, const ActionReport& report);

nlohmann::json to_json(const OrbitRecord& rec);
OrbitRecord parse_orbit_record(const nlohmann::json& j);

/// Serialized form; stable byte-for-byte for equal records.
std::string dump_orbit_record(const OrbitRecord& rec);
void write_orbit_record(const std::filesystem::path& file, const OrbitRecord& rec);
OrbitRecord read_orbit_record(const std::filesystem::path& file);

/// A record resolved into a live path. A group given as a path string is
/// resolved relative to `base_dir`.
struct LoadedOrbit {
  OrbitRecord record;
  LoadedGroup group;
  FourierPath path;
  QuadratureParams quad;
};

LoadedOrbit resolve_orbit(const OrbitRecord& rec, const std::filesystem::path& base_dir = {});
LoadedOrbit load_orbit(const std::filesystem::path& file);

void write_history_csv(const std::filesystem::path& file,
                       const std::vector<HistoryEntry>& history);

struct SummaryRow {
  std::uint64_t seed = 0;
  std::string status;
  double action = 0.0;
  double grad_norm = 0.0;
  double min_distance = 0.0;
};

void write_summary_csv(const std::filesystem::path& file, const std::vector<SummaryRow>& rows);

/// Header t,q1x,q1y,... then one row per sample.
void write_trajectory_csv(std::ostream& out, const std::vector<double>& times,
                          const std::vector<Configuration>& samples);
void write_trajectory_csv(const std::filesystem::path& file, const std::vector<double>& times,
                          const std::vector<Configuration>& samples);

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

}  // namespace equiorb

namespace equiorb {

/// Overlay the fields present in `j` (max_iters, grad_tol, method, memory,
/// collision_floor, initial_step, shrink, armijo, max_backtracks,
/// divergence_radius, seed, amplitude) onto `base`.
MinimizeConfig parse_minimize_config(const nlohmann::json& j, MinimizeConfig base = {});
nlohmann::json to_json(const MinimizeConfig& cfg);

}  // namespace equiorb
