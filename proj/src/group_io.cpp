#include "equiorb/group_io.hpp"

#include "equiorb/errors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace equiorb {

using nlohmann::json;

namespace {

const json& require(const json& j, const std::string& key,
                    const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ParseError(where + ": missing field \"" + key + "\"");
  return j.at(key);
}

int as_int(const json& j, const std::string& field) {
  if (!j.is_number_integer())
    throw ParseError("field \"" + field + "\" must be an integer");
  return j.get<int>();
}

double as_double(const json& j, const std::string& field) {
  if (!j.is_number()) throw ParseError("field \"" + field + "\" must be a number");
  return j.get<double>();
}

GeneratorSpec parse_generator(const json& j, const std::string& field, int n,
                              int d) {
  if (!j.is_object())
    throw ParseError("field \"" + field + "\" must be an object");
  GeneratorSpec g;
  const json& perm = require(j, "perm", field);
  if (!perm.is_array() || static_cast<int>(perm.size()) != n)
    throw ParseError("field \"" + field + ".perm\" must list " +
                     std::to_string(n) + " body indices");
  for (const auto& p : perm) {
    if (!p.is_number_integer())
      throw ParseError("field \"" + field + ".perm\" must hold integers");
    g.perm.push_back(p.get<int>());
  }
  const json& mat = require(j, "mat", field);
  if (!mat.is_array() || static_cast<int>(mat.size()) != d)
    throw ParseError("field \"" + field + ".mat\" must have " +
                     std::to_string(d) + " rows");
  g.mat.resize(d, d);
  for (int r = 0; r < d; ++r) {
    const json& row = mat[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != d)
      throw ParseError("field \"" + field + ".mat\" row " + std::to_string(r) +
                       " must have " + std::to_string(d) + " entries");
    for (int c = 0; c < d; ++c)
      g.mat(r, c) = as_double(row[static_cast<std::size_t>(c)], field + ".mat");
  }
  return g;
}

json generator_json(const GeneratorSpec& g) {
  json mat = json::array();
  for (Eigen::Index r = 0; r < g.mat.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < g.mat.cols(); ++c) row.push_back(g.mat(r, c));
    mat.push_back(row);
  }
  return json{{"perm", g.perm}, {"mat", mat}};
}

GroupElement to_element(const GeneratorSpec& spec, TimeAction time,
                        const std::string& label) {
  GroupElement g;
  g.time = time;
  g.mat = spec.mat;
  for (int p : spec.perm) {
    if (p < 1 || p > static_cast<int>(spec.perm.size()))
      throw InvalidGenerator(label + ": permutation entry " + std::to_string(p) +
                             " out of range");
    g.perm.push_back(p - 1);
  }
  return g;
}

}  // namespace

GroupDefinition parse_group_definition(const json& j) {
  if (!j.is_object()) throw ParseError("group definition must be a JSON object");
  GroupDefinition def;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw ParseError("field \"name\" must be a string");
    def.name = j["name"].get<std::string>();
  }
  def.n = as_int(require(j, "n", "group"), "n");
  def.d = as_int(require(j, "d", "group"), "d");
  if (def.n < 2) throw ParseError("field \"n\" must be at least 2");
  if (def.d < 1) throw ParseError("field \"d\" must be at least 1");
  def.alpha = j.contains("alpha") ? as_double(j["alpha"], "alpha") : 1.0;
  if (j.contains("masses")) {
    const json& m = j["masses"];
    if (!m.is_array() || static_cast<int>(m.size()) != def.n)
      throw ParseError("field \"masses\" must list " + std::to_string(def.n) +
                       " numbers");
    for (const auto& v : m) def.masses.push_back(as_double(v, "masses"));
  } else {
    def.masses.assign(static_cast<std::size_t>(def.n), 1.0);
  }
  const json& type = require(j, "action_type", "group");
  if (!type.is_string())
    throw ParseError("field \"action_type\" must be a string");
  const auto at = action_type_from_string(type.get<std::string>());
  if (!at)
    throw ParseError("field \"action_type\" must be cyclic, brake or dihedral");
  def.action_type = *at;
  def.l = as_int(require(j, "l", "group"), "l");
  if (def.l < 1) throw ParseError("field \"l\" must be positive");

  if (j.contains("kernel_generators")) {
    const json& kg = j["kernel_generators"];
    if (!kg.is_array())
      throw ParseError("field \"kernel_generators\" must be an array");
    for (std::size_t i = 0; i < kg.size(); ++i)
      def.kernel_generators.push_back(parse_generator(
          kg[i], "kernel_generators[" + std::to_string(i) + "]", def.n, def.d));
  }

  const json empty = json::object();
  const json& gens = j.contains("generators") ? j["generators"] : empty;
  if (!gens.is_object()) throw ParseError("field \"generators\" must be an object");
  std::vector<std::string> needed;
  switch (def.action_type) {
    case ActionType::Cyclic:
      if (def.l > 1) needed = {"r"};
      break;
    case ActionType::Brake:
      needed = {"h0"};
      break;
    case ActionType::Dihedral:
      needed = {"h0", "h1"};
      break;
  }
  for (const auto& key : needed) {
    if (!gens.contains(key))
      throw ParseError("field \"generators." + key + "\" is required for " +
                       to_string(def.action_type) + " groups");
  }
  for (auto it = gens.begin(); it != gens.end(); ++it) {
    if (std::find(needed.begin(), needed.end(), it.key()) == needed.end())
      throw ParseError("field \"generators." + it.key() +
                       "\" is not used by " + to_string(def.action_type) +
                       " groups");
    def.generators[it.key()] =
        parse_generator(it.value(), "generators." + it.key(), def.n, def.d);
  }
  return def;
}

GroupDefinition load_group_definition(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open group file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_group_definition(j);
}

json to_json(const GroupDefinition& def) {
  json kg = json::array();
  for (const auto& g : def.kernel_generators) kg.push_back(generator_json(g));
  json gens = json::object();
  for (const auto& [key, g] : def.generators) gens[key] = generator_json(g);
  json j{{"name", def.name},
         {"n", def.n},
         {"d", def.d},
         {"alpha", def.alpha},
         {"action_type", to_string(def.action_type)},
         {"l", def.l},
         {"kernel_generators", kg},
         {"generators", gens}};
  if (!def.masses.empty()) j["masses"] = def.masses;
  return j;
}

std::vector<GroupElement> timed_generators(const GroupDefinition& def) {
  std::vector<GroupElement> out;
  for (std::size_t i = 0; i < def.kernel_generators.size(); ++i)
    out.push_back(to_element(def.kernel_generators[i], TimeAction::identity(),
                             "kernel_generators[" + std::to_string(i) + "]"));
  for (const auto& [key, spec] : def.generators) {
    TimeAction time;
    if (key == "r") time = TimeAction::rotation(1, def.l);
    else if (key == "h0") time = TimeAction::reflection(0, 1);
    else time = TimeAction::reflection(2, def.l);
    out.push_back(to_element(spec, time, "generators." + key));
  }
  return out;
}

LoadedGroup build_group(const GroupDefinition& def, std::size_t cap) {
  const MassSystem system(def.n, def.d, def.masses, def.alpha);
  const auto gens = timed_generators(def);
  // Validate with the file's names before closure renumbers them.
  std::size_t idx = 0;
  for (std::size_t i = 0; i < def.kernel_generators.size(); ++i, ++idx)
    validate_element(gens[idx], system,
                     "kernel_generators[" + std::to_string(i) + "]");
  for (const auto& entry : def.generators)
    validate_element(gens[idx++], system, "generators." + entry.first);

  auto group = std::make_shared<const SymmetryGroup>(close_group(system, gens, cap));
  if (group->l() != def.l) {
    std::ostringstream os;
    os << "declared l = " << def.l << " but the generated time image has order "
       << group->l();
    throw InvalidGroup(os.str());
  }
  if (group->type() != def.action_type) {
    throw InvalidGroup("declared action_type " + to_string(def.action_type) +
                       " but the group classifies as " +
                       to_string(group->type()));
  }
  return {def, std::move(group)};
}

LoadedGroup load_group(const std::filesystem::path& path) {
  return build_group(load_group_definition(path));
}

}  // namespace equiorb
