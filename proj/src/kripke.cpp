#include "epimc/kripke.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "epimc/error.hpp"
#include "epimc/names.hpp"

namespace epimc {

VariableTable::VariableTable(const std::vector<std::string>& names) {
  for (const auto& n : names) add(n);
}

std::size_t VariableTable::add(const std::string& name) {
  if (name.empty()) throw PreconditionError("empty variable name");
  auto [it, inserted] = index_.emplace(name, names_.size());
  if (!inserted) throw PreconditionError("duplicate variable " + name);
  names_.push_back(name);
  return it->second;
}

std::optional<std::size_t> VariableTable::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t VariableTable::require(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw FitnessError("unknown variable " + std::string(name));
  return *idx;
}

World WorldStore::world(std::size_t w) const {
  World out(width_);
  for (std::size_t b = 0; b < width_; ++b) out.set(b, get(w, b));
  return out;
}

Partition Partition::universal(std::size_t num_worlds) {
  Partition p;
  p.class_of.assign(num_worlds, 0);
  p.num_classes = num_worlds ? 1 : 0;
  return p;
}

Partition Partition::from_labels(std::span<const std::uint32_t> labels) {
  Partition p;
  p.class_of.resize(labels.size());
  std::uint32_t max_label = 0;
  for (auto l : labels) max_label = std::max(max_label, l);
  if (!labels.empty() && max_label <= 4 * labels.size()) {
    constexpr auto kUnset = ~std::uint32_t{0};
    std::vector<std::uint32_t> rank(std::size_t{max_label} + 1, kUnset);
    for (std::size_t w = 0; w < labels.size(); ++w) {
      auto& r = rank[labels[w]];
      if (r == kUnset) r = p.num_classes++;
      p.class_of[w] = r;
    }
    return p;
  }
  std::unordered_map<std::uint32_t, std::uint32_t> rank;
  for (std::size_t w = 0; w < labels.size(); ++w) {
    auto [it, inserted] = rank.emplace(labels[w], p.num_classes);
    if (inserted) ++p.num_classes;
    p.class_of[w] = it->second;
  }
  return p;
}

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<std::uint32_t, std::uint64_t>& k) const {
    std::uint64_t h = k.second * 0x9E3779B97F4A7C15ull;
    h ^= (static_cast<std::uint64_t>(k.first) + 0x632BE59BD9B4E019ull) + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h ^ (h >> 31));
  }
};

Partition refine_chunk(const Partition& base, const WorldStore& worlds, std::span<const std::size_t> bits) {
  Partition out;
  const std::size_t n = worlds.size();
  out.class_of.resize(n);
  if (bits.size() <= 20 && (std::size_t{base.num_classes} << bits.size()) <= (std::size_t{1} << 24)) {
    constexpr auto kUnset = ~std::uint32_t{0};
    std::vector<std::uint32_t> ids(std::size_t{base.num_classes} << bits.size(), kUnset);
    for (std::size_t w = 0; w < n; ++w) {
      std::size_t sig = 0;
      for (std::size_t k = 0; k < bits.size(); ++k) sig |= std::size_t{worlds.get(w, bits[k])} << k;
      auto& slot = ids[(std::size_t{base.class_of[w]} << bits.size()) | sig];
      if (slot == kUnset) slot = out.num_classes++;
      out.class_of[w] = slot;
    }
    return out;
  }
  std::unordered_map<std::pair<std::uint32_t, std::uint64_t>, std::uint32_t, PairHash> ids;
  ids.reserve(std::min<std::size_t>(n, std::size_t{base.num_classes} << std::min<std::size_t>(bits.size(), 20)));
  for (std::size_t w = 0; w < n; ++w) {
    std::uint64_t sig = 0;
    for (std::size_t k = 0; k < bits.size(); ++k) sig |= std::uint64_t{worlds.get(w, bits[k])} << k;
    auto [it, inserted] = ids.emplace(std::make_pair(base.class_of[w], sig), out.num_classes);
    if (inserted) ++out.num_classes;
    out.class_of[w] = it->second;
  }
  return out;
}

}  // namespace

Partition refine(const Partition& base, const WorldStore& worlds, std::span<const std::size_t> bits) {
  if (bits.empty()) return base;
  // Successive refinement by 64-bit chunks equals refinement by the whole
  // signature, and first-occurrence numbering keeps ids canonical.
  Partition current = base;
  for (std::size_t off = 0; off < bits.size(); off += 64) {
    auto len = std::min<std::size_t>(64, bits.size() - off);
    current = refine_chunk(current, worlds, bits.subspan(off, len));
  }
  return current;
}

KripkeStructure::KripkeStructure(std::vector<std::string> agents, VariableTable vars, WorldStore worlds,
                                 std::vector<Partition> partitions)
    : agents_(std::move(agents)), vars_(std::move(vars)), worlds_(std::move(worlds)) {
  if (partitions.size() != agents_.size())
    throw PreconditionError("expected one partition per agent");
  if (worlds_.width() != vars_.width()) throw PreconditionError("world width does not match variable table");
  for (std::size_t i = 0; i < agents_.size(); ++i)
    for (std::size_t j = i + 1; j < agents_.size(); ++j)
      if (agents_[i] == agents_[j]) throw PreconditionError("duplicate agent " + agents_[i]);
  partitions_.reserve(partitions.size());
  for (auto& p : partitions) {
    if (p.class_of.size() != worlds_.size()) throw PreconditionError("partition size does not match world count");
    partitions_.push_back(Partition::from_labels(p.class_of));
  }
}

std::optional<std::size_t> KripkeStructure::agent_index(std::string_view agent) const {
  for (std::size_t i = 0; i < agents_.size(); ++i)
    if (agents_[i] == agent) return i;
  return std::nullopt;
}

std::size_t KripkeStructure::require_agent(std::string_view agent) const {
  auto idx = agent_index(agent);
  if (!idx) throw FitnessError("unknown agent " + std::string(agent));
  return *idx;
}

KripkeStructure KripkeStructure::with_agent(const std::string& agent) const {
  if (agent_index(agent)) return *this;
  auto agents = agents_;
  agents.push_back(agent);
  auto parts = partitions_;
  parts.push_back(Partition::universal(num_worlds()));
  return KripkeStructure(std::move(agents), vars_, worlds_, std::move(parts));
}

KripkeStructure build_structure(const std::vector<std::string>& agents, const std::vector<std::string>& vars,
                                const std::vector<World>& worlds,
                                const std::map<std::string, std::vector<std::string>>& observation_sets,
                                const BuildOptions& options) {
  VariableTable table(vars);
  for (const auto& [agent, _] : observation_sets)
    if (std::find(agents.begin(), agents.end(), agent) == agents.end())
      throw PreconditionError("observation set for unknown agent " + agent);

  std::vector<const World*> kept;
  kept.reserve(worlds.size());
  std::set<std::vector<std::uint64_t>> seen;
  for (const auto& w : worlds) {
    if (w.width() != table.width()) throw PreconditionError("world width does not match variable count");
    if (options.deduplicate && !seen.emplace(w.words().begin(), w.words().end()).second) continue;
    kept.push_back(&w);
  }

  WorldStore store(table.width(), kept.size());
  for (std::size_t w = 0; w < kept.size(); ++w)
    for (std::size_t b = 0; b < table.width(); ++b) store.set(w, b, kept[w]->get(b));

  std::vector<Partition> parts;
  for (const auto& agent : agents) {
    std::vector<std::size_t> bits;
    if (auto it = observation_sets.find(agent); it != observation_sets.end()) {
      for (const auto& v : it->second) {
        auto idx = table.find(v);
        if (!idx) throw PreconditionError("observation set of " + agent + " names unknown variable " + v);
        bits.push_back(*idx);
      }
    }
    parts.push_back(refine(Partition::universal(kept.size()), store, bits));
  }
  return KripkeStructure(agents, std::move(table), std::move(store), std::move(parts));
}

KripkeStructure full_structure(const std::vector<std::string>& agents, const std::vector<std::string>& vars) {
  if (vars.size() > 24) throw ResourceError("too many variables for a full structure");
  std::vector<World> worlds;
  for (std::size_t code = 0; code < (std::size_t{1} << vars.size()); ++code) {
    World w(vars.size());
    for (std::size_t b = 0; b < vars.size(); ++b) w.set(b, (code >> b) & 1u);
    worlds.push_back(std::move(w));
  }
  std::map<std::string, std::vector<std::string>> obs;
  for (const auto& a : agents) {
    auto& own = obs[a];
    for (const auto& v : vars)
      if (owner_of(v) == a) own.push_back(v);
  }
  return build_structure(agents, vars, worlds, obs, {.deduplicate = false});
}

ConsistencyReport check_consistent(const KripkeStructure& m, const ObservabilityMap& ov) {
  ConsistencyReport rep;
  for (const auto& [agent, vars] : ov) {
    auto ai = m.agent_index(agent);
    if (!ai) {
      if (vars.empty()) continue;
      rep.consistent = false;
      rep.agent = agent;
      rep.message = "unknown agent " + agent;
      return rep;
    }
    const auto& part = m.partition(*ai);
    for (const auto& v : vars) {
      auto idx = m.vars().find(v);
      if (!idx) {
        rep.consistent = false;
        rep.agent = agent;
        rep.var = v;
        rep.message = "variable " + v + " observed by " + agent + " is not defined";
        return rep;
      }
      std::vector<std::int64_t> rep_world(part.num_classes, -1);
      for (WorldId w = 0; w < m.num_worlds(); ++w) {
        auto c = part.class_of[w];
        if (rep_world[c] < 0) {
          rep_world[c] = w;
        } else if (m.value(static_cast<WorldId>(rep_world[c]), *idx) != m.value(w, *idx)) {
          rep.consistent = false;
          rep.agent = agent;
          rep.var = v;
          rep.first = static_cast<WorldId>(rep_world[c]);
          rep.second = w;
          rep.message = agent + " observes " + v + " but it varies within a class";
          return rep;
        }
      }
    }
  }
  return rep;
}

std::vector<std::vector<WorldId>> classes_of(const KripkeStructure& m, std::string_view agent) {
  const auto& part = m.partition(m.require_agent(agent));
  std::vector<std::vector<WorldId>> out(part.num_classes);
  for (WorldId w = 0; w < m.num_worlds(); ++w) out[part.class_of[w]].push_back(w);
  return out;
}

std::string world_to_hex(const KripkeStructure& m, WorldId w) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::size_t width = m.vars().width();
  std::size_t digits = std::max<std::size_t>(1, (width + 3) / 4);
  std::string out(digits, '0');
  for (std::size_t d = 0; d < digits; ++d) {
    unsigned nib = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      std::size_t bit = d * 4 + b;
      if (bit < width && m.value(w, bit)) nib |= 1u << b;
    }
    out[digits - 1 - d] = kDigits[nib];
  }
  return out;
}

World world_from_hex(std::string_view hex, std::size_t width) {
  World out(width);
  std::size_t digits = hex.size();
  for (std::size_t d = 0; d < digits; ++d) {
    char c = hex[digits - 1 - d];
    unsigned nib;
    if (c >= '0' && c <= '9')
      nib = static_cast<unsigned>(c - '0');
    else if (c >= 'a' && c <= 'f')
      nib = static_cast<unsigned>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F')
      nib = static_cast<unsigned>(c - 'A' + 10);
    else
      throw PreconditionError("bad hex digit in world encoding");
    for (std::size_t b = 0; b < 4; ++b) {
      std::size_t bit = d * 4 + b;
      if ((nib >> b) & 1u) {
        if (bit >= width) throw PreconditionError("world encoding wider than the variable table");
        out.set(bit, true);
      }
    }
  }
  return out;
}

}  // namespace epimc
