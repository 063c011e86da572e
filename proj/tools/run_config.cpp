#include "run_config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "spider/presets.hpp"
#include "spider/skew.hpp"

namespace spider::cli {

using nlohmann::json;

const std::vector<std::string> kCommands = {"simulate", "kernel", "pde", "skew", "verify", "compare-fk"};

namespace {

using Section = std::vector<std::pair<std::string, json>>;

Section scheme_section(const std::string& command) {
  Section s = {{"n_freeze", 64}, {"n_fine", 16}, {"horizon", 1.0}, {"crossing", "grid-touch"}};
  if (command == "simulate" || command == "skew") s.push_back({"record_every", 16});
  if (command == "verify") s[3].second = "bridge-local-time";
  if (command == "compare-fk") s.erase(s.begin() + 2);  // the horizon comes from the grid
  return s;
}

const Section kStart = {{"branch", 1}, {"x", 0.0}, {"l", 0.0}};
const Section kGrid = {{"horizon", 1.0}, {"x_max", 6.0}, {"l_max", 5.0}, {"mx", 200}, {"ml", 100}, {"mt", 100}, {"outer", "outflow"}};
const Section kTerminal = {{"name", "compatible-smooth"}, {"c", 1.0}};
const Section kKernel = {{"variant", "local-time-weighted"},
                         {"convention", "last-zero-time"},
                         {"s", 0.0},
                         {"t", 1.0},
                         {"source_branch", 1},
                         {"source_x", 0.0},
                         {"source_l", 0.0},
                         {"y_max", 4.0},
                         {"ny", 16},
                         {"ell_max", 3.0},
                         {"nl", 12},
                         {"inner_tol", 1e-8},
                         {"entry_tol", 1e-6}};
const Section kVerify = {{"suites", json::array({"martingale", "non-stickiness", "self-convergence"})},
                         {"functions", json::array({"x", "x2", "bump"})},
                         {"times", json::array({0.25, 0.5, 0.75})},
                         {"eps", json::array({0.01, 0.02, 0.04, 0.08})},
                         {"negative_control", "branch-1"},
                         {"self_n_freeze", 4},
                         {"self_doublings", 3},
                         {"self_paths", 2000}};
const Section kTolerances = {{"z", 3.0}, {"range_fraction", 0.02}};

std::vector<std::string> sections_for(const std::string& c) {
  if (c == "simulate") return {"seed", "paths", "preset", "start", "scheme"};
  if (c == "kernel") return {"preset", "kernel"};
  if (c == "pde") return {"preset", "grid", "terminal"};
  if (c == "skew") return {"seed", "paths", "skew", "scheme"};
  if (c == "verify") return {"seed", "paths", "preset", "start", "scheme", "verify", "tolerances"};
  return {"seed", "paths", "preset", "start", "scheme", "grid", "terminal", "tolerances"};
}

std::string type_name(const json& v) {
  if (v.is_number_integer()) return "an integer";
  if (v.is_number()) return "a number";
  if (v.is_string()) return "a string";
  if (v.is_boolean()) return "a boolean";
  if (v.is_array()) return "an array";
  return "an object";
}

void check_type(const std::string& where, const json& def, const json& v) {
  bool ok;
  if (def.is_number_integer())
    ok = v.is_number_integer();
  else if (def.is_number())
    ok = v.is_number();
  else if (def.is_array())
    ok = v.is_array() && std::all_of(v.begin(), v.end(), [&](const json& e) {
           return def.empty() || (def[0].is_string() ? e.is_string() : e.is_number());
         });
  else
    ok = std::string(v.type_name()) == def.type_name();
  if (!ok) throw ConfigError("config: '" + where + "' must be " + type_name(def) + (def.is_array() ? " of " + type_name(def[0]) + "s" : ""));
}

json fill(const std::string& name, const Section& section, const json& given) {
  if (!given.is_object()) throw ConfigError("config: '" + name + "' must be an object");
  for (const auto& [key, _] : given.items())
    if (std::none_of(section.begin(), section.end(), [&](const auto& f) { return f.first == key; }))
      throw ConfigError("config: unknown key '" + name + "." + key + "'");
  json out = json::object();
  for (const auto& [key, def] : section) {
    if (given.contains(key)) {
      check_type(name + "." + key, def, given[key]);
      out[key] = given[key];
    } else {
      out[key] = def;
    }
  }
  return out;
}

template <class F>
json wrap(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const PreconditionError& e) {
    throw ConfigError("config: '" + where + "': " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError("config: '" + where + "': " + e.what());
  }
}

}  // namespace

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    if (const auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": top level must be a JSON object");
  if (j.contains("artifacts") && j.contains("config")) return j.at("config");
  return j;
}

json complete_config(const std::string& command, json file,
                     const std::vector<std::pair<std::string, json>>& overrides) {
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
    throw ConfigError("unknown command '" + command + "'");
  if (!file.is_object()) throw ConfigError("config: top level must be a JSON object");
  if (file.contains("command") && file["command"] != command)
    throw ConfigError("config: 'command' is " + file["command"].dump() + " but the subcommand is '" + command + "'");
  for (const auto& [ptr, value] : overrides) {
    // A different preset family discards the parameters of the old one.
    if (ptr == "/preset/family" && file.contains("preset") && file["preset"].value("family", "") != value)
      file["preset"] = json::object();
    file[json::json_pointer(ptr)] = value;
  }

  const auto allowed = sections_for(command);
  for (const auto& [key, _] : file.items()) {
    if (key == "command") continue;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("config: key '" + key + "' is not used by '" + command + "'");
  }

  json out = {{"command", command}};
  for (const auto& key : allowed) {
    const json given = file.contains(key) ? file[key] : json();
    if (key == "seed") {
      if (!given.is_null() && !(given.is_number_unsigned() || (given.is_number_integer() && given.get<long long>() >= 0)))
        throw ConfigError("config: 'seed' must be a non-negative integer");
      out["seed"] = given.is_null() ? json(1u) : json(given.get<std::uint64_t>());
    } else if (key == "paths") {
      if (!given.is_null() && !(given.is_number_integer() && given.get<long long>() > 0))
        throw ConfigError("config: 'paths' must be a positive integer");
      out["paths"] = given.is_null() ? json(command == "simulate" || command == "skew" ? 1000u : 10000u)
                                     : json(given.get<std::uint64_t>());
    } else if (key == "preset") {
      json p = given.is_null() ? json::object() : given;
      if (!p.is_object()) throw ConfigError("config: 'preset' must be an object");
      if (!p.contains("family")) p["family"] = "brownian-spider";
      out["preset"] = wrap("preset", [&] { return normalize_preset(p); });
    } else if (key == "skew") {
      json p = given.is_null() ? json::object() : given;
      if (!p.is_object()) throw ConfigError("config: 'skew' must be an object");
      double y0 = 0.0;
      if (p.contains("y0")) {
        check_type("skew.y0", 0.0, p["y0"]);
        y0 = p["y0"].get<double>();
        p.erase("y0");
      }
      json n = wrap("skew", [&] { return normalize_skew_preset(p); });
      n["y0"] = y0;
      out["skew"] = n;
    } else {
      static const std::map<std::string, const Section*> fixed = {{"start", &kStart},       {"grid", &kGrid},
                                                                 {"terminal", &kTerminal}, {"kernel", &kKernel},
                                                                 {"verify", &kVerify},     {"tolerances", &kTolerances}};
      const Section scheme = scheme_section(command);
      const Section& sec = key == "scheme" ? scheme : *fixed.at(key);
      out[key] = fill(key, sec, given.is_null() ? json::object() : given);
    }
  }
  return out;
}

}  // namespace spider::cli
