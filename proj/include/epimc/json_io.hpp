#pragma once

#include <string>

#include "json.hpp"

#include "epimc/bisim.hpp"
#include "epimc/kripke.hpp"
#include "epimc/lang.hpp"
#include "epimc/twophase.hpp"

namespace epimc {

using Json = nlohmann::ordered_json;

/// {agents, variables, worlds: [hex...], classes: {agent: [ids]}}
Json to_json(const KripkeStructure& m);
KripkeStructure structure_from_json(const Json& j);

/// {pairs: [[w,u]...], size, left_total, right_total, vars, agents}
Json to_json(const BisimRelation& r);

Json to_json(const CheckpointReport& c);
Json to_json(const SpecReport& r);
SpecReport spec_report_from_json(const Json& j);

}  // namespace epimc
