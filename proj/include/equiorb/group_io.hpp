#pragma once

#include "equiorb/symmetry.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace equiorb {

/// Spatial part of a generator as written in a group file.
struct GeneratorSpec {
  std::vector<int> perm;  ///< 1-based images: perm[j-1] = sigma(j)
  Eigen::MatrixXd mat;
};

/// Contents of a group definition file.
///
///   { "name", "n", "d", "alpha", "masses", "action_type", "l",
///     "kernel_generators": [ {"perm", "mat"} ... ],
///     "generators": { "r" | "h0" [, "h1"] : {"perm", "mat"} } }
struct GroupDefinition {
  std::string name;
  int n = 0;
  int d = 0;
  double alpha = 1.0;
  std::vector<double> masses;
  ActionType action_type = ActionType::Cyclic;
  int l = 1;
  std::vector<GeneratorSpec> kernel_generators;
  std::map<std::string, GeneratorSpec> generators;
};

/// Parse and schema-check a definition. Throws ParseError naming the field.
GroupDefinition parse_group_definition(const nlohmann::json& j);
GroupDefinition load_group_definition(const std::filesystem::path& path);
nlohmann::json to_json(const GroupDefinition& def);

/// A definition together with the group it generates.
struct LoadedGroup {
  GroupDefinition definition;
  std::shared_ptr<const SymmetryGroup> group;
};

/// Attach time actions to the spatial generators (r -> rotation by T/l,
/// h0 -> reflection fixing 0, h1 -> reflection fixing T/l), close the
/// group and check the declared l and action_type against classify().
LoadedGroup build_group(const GroupDefinition& def, std::size_t cap = 10000);

LoadedGroup load_group(const std::filesystem::path& path);

/// Generators with time actions attached, as passed to close_group().
std::vector<GroupElement> timed_generators(const GroupDefinition& def);

}  // namespace equiorb
