#include "epimc/json_io.hpp"

#include "epimc/error.hpp"

namespace epimc {

Json to_json(const KripkeStructure& m) {
  Json j;
  j["agents"] = m.agents();
  j["variables"] = m.vars().names();
  Json worlds = Json::array();
  for (WorldId w = 0; w < m.num_worlds(); ++w) worlds.push_back(world_to_hex(m, w));
  j["worlds"] = std::move(worlds);
  Json classes = Json::object();
  for (std::size_t a = 0; a < m.agents().size(); ++a) classes[m.agents()[a]] = m.partition(a).class_of;
  j["classes"] = std::move(classes);
  return j;
}

KripkeStructure structure_from_json(const Json& j) {
  try {
    auto agents = j.at("agents").get<std::vector<std::string>>();
    VariableTable vars(j.at("variables").get<std::vector<std::string>>());
    const auto& ws = j.at("worlds");
    WorldStore store(vars.width(), ws.size());
    for (std::size_t w = 0; w < ws.size(); ++w) {
      auto row = world_from_hex(ws[w].get<std::string>(), vars.width());
      for (std::size_t b = 0; b < vars.width(); ++b) store.set(w, b, row.get(b));
    }
    std::vector<Partition> parts;
    for (const auto& a : agents) {
      auto labels = j.at("classes").at(a).get<std::vector<std::uint32_t>>();
      parts.push_back(Partition::from_labels(labels));
    }
    return KripkeStructure(std::move(agents), std::move(vars), std::move(store), std::move(parts));
  } catch (const Json::exception& e) {
    throw ParseError(std::string("structure JSON: ") + e.what(), 1, 1);
  }
}

Json to_json(const BisimRelation& r) {
  Json j;
  Json pairs = Json::array();
  for (auto [w, u] : r.pairs()) pairs.push_back({w, u});
  j["pairs"] = std::move(pairs);
  j["size"] = r.size();
  j["left_total"] = r.left_total();
  j["right_total"] = r.right_total();
  j["vars"] = r.vars;
  j["agents"] = r.agents;
  return j;
}

Json to_json(const CheckpointReport& c) {
  Json j;
  j["label"] = c.label;
  j["position"] = c.position;
  j["passed"] = c.passed();
  Json results = Json::array();
  for (const auto& r : c.results) {
    Json e{{"assertion", r.text}, {"valid", r.valid}};
    e["counterexample"] = r.counterexample ? Json(*r.counterexample) : Json(nullptr);
    results.push_back(std::move(e));
  }
  j["results"] = std::move(results);
  return j;
}

namespace {

Json optional_world(const std::optional<WorldId>& w) { return w ? Json(*w) : Json(nullptr); }

std::optional<WorldId> world_or_null(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<WorldId>();
}

}  // namespace

Json to_json(const SpecReport& r) {
  Json j;
  j["n"] = r.n;
  j["mode"] = to_string(r.mode);
  j["strength"] = to_string(r.strength);
  j["candidate"] = r.candidate;
  j["rounds"] = r.rounds;
  j["passed"] = r.passed();
  j["failures"] = r.failures();
  j["world_counts"] = r.world_counts;
  j["timings"] = {{"build", r.build_seconds}, {"run", r.run_seconds}, {"check", r.check_seconds}};
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    Json x{{"spec", e.spec}, {"agent", e.agent}, {"slot", e.slot}, {"checkpoint", e.checkpoint},
           {"position", e.position}, {"passed", e.passed}};
    x["witness"] = optional_world(e.witness);
    x["related"] = optional_world(e.related);
    x["witness_view"] = e.witness_view;
    x["related_view"] = e.related_view;
    entries.push_back(std::move(x));
  }
  j["entries"] = std::move(entries);
  return j;
}

SpecReport spec_report_from_json(const Json& j) {
  try {
    SpecReport r;
    r.n = j.at("n").get<int>();
    r.mode = parse_mode(j.at("mode").get<std::string>());
    r.strength = parse_strength(j.at("strength").get<std::string>());
    r.candidate = j.at("candidate").get<std::string>();
    r.rounds = j.at("rounds").get<int>();
    r.world_counts = j.at("world_counts").get<std::vector<std::size_t>>();
    const auto& t = j.at("timings");
    r.build_seconds = t.at("build").get<double>();
    r.run_seconds = t.at("run").get<double>();
    r.check_seconds = t.at("check").get<std::map<std::string, double>>();
    for (const auto& x : j.at("entries")) {
      SpecEntry e;
      e.spec = x.at("spec").get<std::string>();
      e.agent = x.at("agent").get<std::string>();
      e.slot = x.at("slot").get<int>();
      e.checkpoint = x.at("checkpoint").get<std::string>();
      e.position = x.at("position").get<std::size_t>();
      e.passed = x.at("passed").get<bool>();
      e.witness = world_or_null(x.at("witness"));
      e.related = world_or_null(x.at("related"));
      e.witness_view = x.at("witness_view").get<std::map<std::string, int>>();
      e.related_view = x.at("related_view").get<std::map<std::string, int>>();
      r.entries.push_back(std::move(e));
    }
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what(), 1, 1);
  }
}

}  // namespace epimc
