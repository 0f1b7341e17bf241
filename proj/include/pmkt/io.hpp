#pragma once

// JSON instance files: loading with field-level diagnostics, saving, and the
// structural checks mirrored by data/instance.schema.json.

#include "pmkt/model.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace pmkt::io {

using json = nlohmann::json;

struct InstanceError : std::runtime_error {
  std::vector<std::string> problems;
  explicit InstanceError(std::vector<std::string> probs)
      : std::runtime_error(join(probs)), problems(std::move(probs)) {}
  static std::string join(const std::vector<std::string>& v) {
    std::ostringstream os;
    os << "invalid instance:";
    for (const auto& s : v) os << "\n  - " << s;
    return os.str();
  }
};

namespace detail {

class FieldReader {
 public:
  explicit FieldReader(std::vector<std::string>& problems) : problems_(problems) {}

  double number(const json& j, const std::string& path, const char* key,
                std::optional<double> def = std::nullopt) {
    if (!j.contains(key)) {
      if (def) return *def;
      problems_.push_back(path + "." + key + ": required number missing");
      return 0;
    }
    if (!j[key].is_number()) {
      problems_.push_back(path + "." + key + ": expected a number");
      return 0;
    }
    return j[key].get<double>();
  }

  long integer(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer()) {
      problems_.push_back(path + "." + key + ": required integer missing");
      return 0;
    }
    return j[key].get<long>();
  }

  std::string text(const json& j, const std::string& path, const char* key,
                   std::optional<std::string> def = std::nullopt) {
    if (!j.contains(key)) {
      if (def) return *def;
      problems_.push_back(path + "." + key + ": required string missing");
      return {};
    }
    if (!j[key].is_string()) {
      problems_.push_back(path + "." + key + ": expected a string");
      return {};
    }
    return j[key].get<std::string>();
  }

  std::vector<double> numbers(const json& j, const std::string& path, const char* key,
                              int expected) {
    std::vector<double> out;
    if (!j.contains(key) || !j[key].is_array()) {
      problems_.push_back(path + "." + key + ": expected an array of " +
                          std::to_string(expected) + " numbers");
      return out;
    }
    for (const auto& v : j[key]) {
      if (!v.is_number()) {
        problems_.push_back(path + "." + key + ": expected numbers only");
        return out;
      }
      out.push_back(v.get<double>());
    }
    if (expected >= 0 && static_cast<int>(out.size()) != expected) {
      problems_.push_back(path + "." + key + ": expected " + std::to_string(expected) +
                          " entries, got " + std::to_string(out.size()));
    }
    return out;
  }

 private:
  std::vector<std::string>& problems_;
};

}  // namespace detail

inline MarketInstance instance_from_json(const json& doc) {
  std::vector<std::string> problems;
  detail::FieldReader rd(problems);
  MarketInstance inst;

  for (const char* key : {"nodes", "edges", "scenarios"}) {
    if (!doc.contains(key) || !doc[key].is_array()) {
      problems.push_back(std::string(key) + ": required array missing");
    }
  }
  if (!problems.empty()) throw InstanceError(problems);

  if (doc.contains("meta") && doc["meta"].is_object()) {
    inst.name = doc["meta"].value("name", "");
  }

  int S = static_cast<int>(doc["scenarios"].size());
  for (int w = 0; w < S; ++w) {
    const auto& j = doc["scenarios"][w];
    std::string path = "scenarios[" + std::to_string(w) + "]";
    Scenario sc;
    sc.id = rd.text(j, path, "id", "w" + std::to_string(w));
    sc.p = rd.number(j, path, "p");
    sc.p0 = rd.number(j, path, "p0");
    inst.scenarios.scenarios.push_back(sc);
  }

  for (size_t i = 0; i < doc["nodes"].size(); ++i) {
    const auto& j = doc["nodes"][i];
    std::string path = "nodes[" + std::to_string(i) + "]";
    ProsumerParams nd;
    nd.id = static_cast<int>(rd.integer(j, path, "id"));
    nd.D_lo = rd.number(j, path, "D_lo");
    nd.D_hi = rd.number(j, path, "D_hi");
    nd.G_lo = rd.number(j, path, "G_lo");
    nd.G_hi = rd.number(j, path, "G_hi");
    nd.a = rd.number(j, path, "a");
    nd.b = rd.number(j, path, "b");
    nd.d = rd.number(j, path, "d", 0.0);
    nd.a_tilde = rd.number(j, path, "a_tilde");
    nd.b_tilde = rd.number(j, path, "b_tilde", 0.0);
    nd.chi = rd.number(j, path, "chi", 0.0);
    nd.Dstar = rd.numbers(j, path, "Dstar", S);
    nd.dG = rd.numbers(j, path, "dG", S);
    inst.nodes.push_back(nd);
  }

  for (size_t i = 0; i < doc["edges"].size(); ++i) {
    const auto& j = doc["edges"][i];
    std::string path = "edges[" + std::to_string(i) + "]";
    EdgeParams e;
    e.u = static_cast<int>(rd.integer(j, path, "u"));
    e.v = static_cast<int>(rd.integer(j, path, "v"));
    e.kappa = rd.number(j, path, "kappa");
    e.a = rd.number(j, path, "a", 0.0);
    e.b_uv = rd.number(j, path, "b_uv");
    e.b_vu = rd.number(j, path, "b_vu");
    inst.edges.push_back(e);
  }

  if (doc.contains("gamma")) {
    inst.gamma = rd.numbers(doc, "", "gamma", S);
  }

  if (!problems.empty()) throw InstanceError(problems);
  auto invariant_problems = validate_instance(inst);
  if (!invariant_problems.empty()) throw InstanceError(invariant_problems);
  inst.finalize();
  return inst;
}

inline MarketInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InstanceError({"cannot open instance file: " + path});
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw InstanceError({std::string("JSON parse error: ") + e.what()});
  }
  return instance_from_json(doc);
}

inline json instance_to_json(const MarketInstance& inst) {
  json doc;
  doc["meta"] = {{"name", inst.name}};
  doc["scenarios"] = json::array();
  for (const auto& sc : inst.scenarios.scenarios) {
    doc["scenarios"].push_back({{"id", sc.id}, {"p", sc.p}, {"p0", sc.p0}});
  }
  doc["nodes"] = json::array();
  for (const auto& nd : inst.nodes) {
    doc["nodes"].push_back({{"id", nd.id},
                            {"D_lo", nd.D_lo},
                            {"D_hi", nd.D_hi},
                            {"G_lo", nd.G_lo},
                            {"G_hi", nd.G_hi},
                            {"a", nd.a},
                            {"b", nd.b},
                            {"d", nd.d},
                            {"a_tilde", nd.a_tilde},
                            {"b_tilde", nd.b_tilde},
                            {"chi", nd.chi},
                            {"Dstar", nd.Dstar},
                            {"dG", nd.dG}});
  }
  doc["edges"] = json::array();
  for (const auto& e : inst.edges) {
    doc["edges"].push_back({{"u", e.u},
                            {"v", e.v},
                            {"kappa", e.kappa},
                            {"a", e.a},
                            {"b_uv", e.b_uv},
                            {"b_vu", e.b_vu}});
  }
  if (inst.gamma) doc["gamma"] = *inst.gamma;
  return doc;
}

inline void save_instance(const MarketInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << instance_to_json(inst).dump(2) << "\n";
}

}  // namespace pmkt::io
