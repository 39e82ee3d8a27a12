// Decoding helpers for two-phase structures, shared by the suites.
#pragma once

#include <string>
#include <vector>

#include "epimc/formula.hpp"
#include "epimc/kripke.hpp"

namespace tp {

inline int slot_of(const epimc::KripkeStructure& m, const epimc::MacroContext& ctx, const std::string& a,
                   epimc::WorldId w) {
  int v = 0;
  for (int b = 0; b < ctx.width; ++b) v |= int(m.value(w, ctx.slot_bit(a, b).str())) << b;
  return v;
}

inline bool message_of(const epimc::KripkeStructure& m, const epimc::MacroContext& ctx, const std::string& a,
                       epimc::WorldId w) {
  return m.value(w, ctx.message_var(a).str());
}

inline bool rr_of(const epimc::KripkeStructure& m, const std::string& a, int t, epimc::WorldId w) {
  return m.value(w, a + ".rr[" + std::to_string(t) + "]");
}

/// Least world with the given slot requests and messages.
inline epimc::WorldId find_world(const epimc::KripkeStructure& m, const epimc::MacroContext& ctx,
                                 const std::vector<int>& sr, const std::vector<bool>& msg) {
  for (epimc::WorldId w = 0; w < m.num_worlds(); ++w) {
    bool ok = true;
    for (std::size_t i = 0; i < sr.size() && ok; ++i)
      ok = slot_of(m, ctx, ctx.agents[i], w) == sr[i] && message_of(m, ctx, ctx.agents[i], w) == msg[i];
    if (ok) return w;
  }
  throw std::runtime_error("no such world");
}

/// Projection of each world of `next` onto the world of `prev` it extends,
/// found by matching the values of prev's variables.
inline std::vector<epimc::WorldId> projection(const epimc::KripkeStructure& prev, const epimc::KripkeStructure& next) {
  std::map<std::vector<bool>, epimc::WorldId> index;
  const auto& names = prev.vars().names();
  for (epimc::WorldId w = 0; w < prev.num_worlds(); ++w) {
    std::vector<bool> row;
    for (std::size_t v = 0; v < names.size(); ++v) row.push_back(prev.value(w, v));
    index.emplace(std::move(row), w);
  }
  std::vector<std::size_t> cols;
  for (const auto& n : names) cols.push_back(next.vars().require(n));
  std::vector<epimc::WorldId> out(next.num_worlds());
  for (epimc::WorldId w = 0; w < next.num_worlds(); ++w) {
    std::vector<bool> row;
    for (auto c : cols) row.push_back(next.value(w, c));
    out[w] = index.at(row);
  }
  return out;
}

/// Perfect recall: worlds indistinguishable after a step project onto
/// worlds that were indistinguishable before it.
inline bool refines(const epimc::KripkeStructure& prev, const epimc::KripkeStructure& next) {
  auto proj = projection(prev, next);
  for (std::size_t a = 0; a < prev.agents().size(); ++a) {
    const auto an = next.require_agent(prev.agents()[a]);
    // representative per new class must be consistent with every member
    std::vector<std::int64_t> old_class(next.partition(an).num_classes, -1);
    for (epimc::WorldId w = 0; w < next.num_worlds(); ++w) {
      auto c = next.class_of(an, w);
      std::int64_t oc = prev.class_of(a, proj[w]);
      if (old_class[c] < 0)
        old_class[c] = oc;
      else if (old_class[c] != oc)
        return false;
    }
  }
  return true;
}

}  // namespace tp
