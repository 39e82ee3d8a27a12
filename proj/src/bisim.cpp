#include "epimc/bisim.hpp"

#include <algorithm>
#include <bit>
#include <map>

#include "epimc/error.hpp"

namespace epimc {

BisimRelation::BisimRelation(std::size_t left, std::size_t right)
    : left_(left), right_(right), stride_(std::max<std::size_t>(1, (right + 63) / 64)), rows_(left * stride_, 0) {}

void BisimRelation::set(WorldId w, WorldId u, bool v) {
  auto& word = rows_[w * stride_ + (u >> 6)];
  auto mask = std::uint64_t{1} << (u & 63);
  if (v)
    word |= mask;
  else
    word &= ~mask;
}

std::size_t BisimRelation::size() const {
  std::size_t c = 0;
  for (auto w : rows_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

bool BisimRelation::left_total() const {
  for (std::size_t w = 0; w < left_; ++w) {
    auto r = row(static_cast<WorldId>(w));
    if (std::all_of(r.begin(), r.end(), [](auto x) { return x == 0; })) return false;
  }
  return true;
}

bool BisimRelation::right_total() const {
  std::vector<std::uint64_t> cover(stride_, 0);
  for (std::size_t w = 0; w < left_; ++w) {
    auto r = row(static_cast<WorldId>(w));
    for (std::size_t k = 0; k < stride_; ++k) cover[k] |= r[k];
  }
  for (std::size_t u = 0; u < right_; ++u)
    if (!((cover[u >> 6] >> (u & 63)) & 1u)) return false;
  return true;
}

std::vector<std::pair<WorldId, WorldId>> BisimRelation::pairs() const {
  std::vector<std::pair<WorldId, WorldId>> out;
  for (std::size_t w = 0; w < left_; ++w)
    for (std::size_t u = 0; u < right_; ++u)
      if (contains(static_cast<WorldId>(w), static_cast<WorldId>(u)))
        out.emplace_back(static_cast<WorldId>(w), static_cast<WorldId>(u));
  return out;
}

namespace {

void check_params(const KripkeStructure& m, const KripkeStructure& n, const std::vector<std::string>& vars,
                  const std::vector<std::string>& agents) {
  for (const auto& v : vars)
    if (!m.vars().contains(v) || !n.vars().contains(v))
      throw FitnessError("bisimulation variable " + v + " is not defined in both structures");
  for (const auto& a : agents)
    if (!m.agent_index(a) || !n.agent_index(a))
      throw FitnessError("bisimulation agent " + a + " is not present in both structures");
}

std::vector<std::uint64_t> signature(const KripkeStructure& m, WorldId w, const std::vector<std::size_t>& idx) {
  std::vector<std::uint64_t> sig((idx.size() + 63) / 64, 0);
  for (std::size_t k = 0; k < idx.size(); ++k)
    if (m.value(w, idx[k])) sig[k >> 6] |= std::uint64_t{1} << (k & 63);
  return sig;
}

using Bits = std::vector<std::uint64_t>;

bool intersects(std::span<const std::uint64_t> a, const Bits& b) {
  for (std::size_t k = 0; k < b.size(); ++k)
    if (a[k] & b[k]) return true;
  return false;
}

bool subset(const Bits& a, const Bits& b) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] & ~b[k]) return false;
  return true;
}

}  // namespace

BisimRelation greatest_bisimulation(const KripkeStructure& m, const KripkeStructure& n,
                                    const std::vector<std::string>& vars, const std::vector<std::string>& agents,
                                    BisimStats* stats) {
  check_params(m, n, vars, agents);
  const std::size_t L = m.num_worlds(), R = n.num_worlds();
  BisimRelation rel(L, R);
  rel.vars = vars;
  rel.agents = agents;
  const std::size_t stride = std::max<std::size_t>(1, (R + 63) / 64);

  // Atoms: group right worlds by their valuation of vars.
  std::vector<std::size_t> mi, ni;
  for (const auto& v : vars) {
    mi.push_back(m.vars().require(v));
    ni.push_back(n.vars().require(v));
  }
  std::map<Bits, Bits> by_sig;
  for (WorldId u = 0; u < R; ++u) {
    auto& row = by_sig.try_emplace(signature(n, u, ni), Bits(stride, 0)).first->second;
    row[u >> 6] |= std::uint64_t{1} << (u & 63);
  }
  for (WorldId w = 0; w < L; ++w) {
    auto it = by_sig.find(signature(m, w, mi));
    if (it == by_sig.end()) continue;
    for (std::size_t u = 0; u < R; ++u)
      if ((it->second[u >> 6] >> (u & 63)) & 1u) rel.set(w, static_cast<WorldId>(u), true);
  }
  const std::size_t initial = rel.size();

  struct AgentView {
    const Partition* left;
    const Partition* right;
    std::vector<Bits> right_members;  // per right class
    std::vector<std::vector<WorldId>> left_members;
  };
  std::vector<AgentView> views;
  for (const auto& a : agents) {
    AgentView v;
    v.left = &m.partition(*m.agent_index(a));
    v.right = &n.partition(*n.agent_index(a));
    v.right_members.assign(v.right->num_classes, Bits(stride, 0));
    for (std::size_t u = 0; u < R; ++u) v.right_members[v.right->class_of[u]][u >> 6] |= std::uint64_t{1} << (u & 63);
    v.left_members.resize(v.left->num_classes);
    for (WorldId w = 0; w < L; ++w) v.left_members[v.left->class_of[w]].push_back(w);
    views.push_back(std::move(v));
  }

  // Bulk-synchronous rounds: decide every class pair against the current
  // relation, then drop all pairs whose classes fail for some agent.
  std::size_t rounds = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    ++rounds;
    std::vector<std::vector<char>> ok(views.size());
    for (std::size_t ai = 0; ai < views.size(); ++ai) {
      const auto& v = views[ai];
      const std::size_t CL = v.left->num_classes, CR = v.right->num_classes;
      auto& table = ok[ai];
      table.assign(CL * CR, 1);
      for (std::size_t c = 0; c < CL; ++c) {
        Bits reach(stride, 0);
        for (auto w2 : v.left_members[c]) {
          auto r = rel.row(w2);
          for (std::size_t k = 0; k < stride; ++k) reach[k] |= r[k];
          for (std::size_t d = 0; d < CR; ++d)
            if (table[c * CR + d] && !intersects(r, v.right_members[d])) table[c * CR + d] = 0;  // forth
        }
        for (std::size_t d = 0; d < CR; ++d)
          if (table[c * CR + d] && !subset(v.right_members[d], reach)) table[c * CR + d] = 0;  // back
      }
    }
    std::vector<std::pair<WorldId, WorldId>> drop;
    for (WorldId w = 0; w < L; ++w) {
      auto r = rel.row(w);
      for (std::size_t k = 0; k < stride; ++k) {
        auto word = r[k];
        while (word) {
          auto u = static_cast<WorldId>(k * 64 + static_cast<std::size_t>(std::countr_zero(word)));
          word &= word - 1;
          for (std::size_t ai = 0; ai < views.size(); ++ai) {
            const auto& v = views[ai];
            if (!ok[ai][std::size_t{v.left->class_of[w]} * v.right->num_classes + v.right->class_of[u]]) {
              drop.emplace_back(w, u);
              break;
            }
          }
        }
      }
    }
    for (auto [w, u] : drop) rel.set(w, u, false);
    changed = !drop.empty();
  }
  if (stats) {
    stats->rounds = rounds;
    stats->initial_pairs = initial;
    stats->removed_pairs = initial - rel.size();
  }
  return rel;
}

bool are_bisimilar(const KripkeStructure& m, const KripkeStructure& n, const std::vector<std::string>& vars,
                   const std::vector<std::string>& agents) {
  return greatest_bisimulation(m, n, vars, agents).total();
}

std::optional<ClosureViolation> verify_bisimulation(const KripkeStructure& m, const KripkeStructure& n,
                                                    const BisimRelation& r) {
  check_params(m, n, r.vars, r.agents);
  if (r.left_size() != m.num_worlds() || r.right_size() != n.num_worlds())
    throw PreconditionError("relation dimensions do not match the structures");
  std::vector<std::vector<std::vector<WorldId>>> lc, rc;
  for (const auto& a : r.agents) {
    lc.push_back(classes_of(m, a));
    rc.push_back(classes_of(n, a));
  }
  for (auto [w, u] : r.pairs()) {
    for (const auto& v : r.vars)
      if (m.value(w, v) != n.value(u, v)) return ClosureViolation{"atoms", w, u, "", "disagree on " + v};
    for (std::size_t ai = 0; ai < r.agents.size(); ++ai) {
      const auto& a = r.agents[ai];
      const auto& wc = lc[ai][m.class_of(*m.agent_index(a), w)];
      const auto& uc = rc[ai][n.class_of(*n.agent_index(a), u)];
      for (auto w2 : wc) {
        bool found = false;
        for (auto u2 : uc)
          if (r.contains(w2, u2)) {
            found = true;
            break;
          }
        if (!found)
          return ClosureViolation{"forth", w, u, a, "left world " + std::to_string(w2) + " has no partner"};
      }
      for (auto u2 : uc) {
        bool found = false;
        for (auto w2 : wc)
          if (r.contains(w2, u2)) {
            found = true;
            break;
          }
        if (!found)
          return ClosureViolation{"back", w, u, a, "right world " + std::to_string(u2) + " has no partner"};
      }
    }
  }
  return std::nullopt;
}

PreservationReport check_preservation(const KripkeStructure& m, const KripkeStructure& n, const BisimRelation& r,
                                      const std::vector<Formula>& formulas) {
  PreservationReport rep;
  Evaluator em(m), en(n);
  auto pairs = r.pairs();
  rep.pairs_checked = pairs.size();
  for (std::size_t k = 0; k < formulas.size(); ++k) {
    check_fit(m, formulas[k]);
    check_fit(n, formulas[k]);
    const auto& sm = em.sat(formulas[k]);
    const auto& sn = en.sat(formulas[k]);
    for (auto [w, u] : pairs)
      if (sm.test(w) != sn.test(u)) rep.violations.push_back({k, w, u, sm.test(w), sn.test(u)});
    ++rep.formulas_checked;
  }
  return rep;
}

}  // namespace epimc
