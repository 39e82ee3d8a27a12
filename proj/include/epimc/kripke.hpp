#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace epimc {

using WorldId = std::uint32_t;

/// Ordered variable names mapped to contiguous bit positions.
class VariableTable {
 public:
  VariableTable() = default;
  explicit VariableTable(const std::vector<std::string>& names);

  /// Appends a new name; throws PreconditionError on duplicates.
  std::size_t add(const std::string& name);
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t require(std::string_view name) const;  // throws FitnessError
  bool contains(std::string_view name) const { return find(name).has_value(); }

  const std::string& name(std::size_t idx) const { return names_[idx]; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t width() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// A packed valuation row.
class World {
 public:
  World() = default;
  explicit World(std::size_t width) : width_(width), words_((width + 63) / 64, 0) {}

  std::size_t width() const { return width_; }
  bool get(std::size_t bit) const { return (words_[bit >> 6] >> (bit & 63)) & 1u; }
  void set(std::size_t bit, bool v) {
    auto mask = std::uint64_t{1} << (bit & 63);
    if (v)
      words_[bit >> 6] |= mask;
    else
      words_[bit >> 6] &= ~mask;
  }
  std::span<const std::uint64_t> words() const { return words_; }
  bool operator==(const World&) const = default;

 private:
  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

/// All worlds of a structure as fixed-stride packed rows.
class WorldStore {
 public:
  WorldStore() = default;
  WorldStore(std::size_t width, std::size_t count)
      : width_(width), stride_(stride_for(width)), count_(count), data_(stride_ * count, 0) {}

  static std::size_t stride_for(std::size_t width) { return std::max<std::size_t>(1, (width + 63) / 64); }

  std::size_t width() const { return width_; }
  std::size_t stride() const { return stride_; }
  std::size_t size() const { return count_; }

  bool get(std::size_t w, std::size_t bit) const {
    return (data_[w * stride_ + (bit >> 6)] >> (bit & 63)) & 1u;
  }
  void set(std::size_t w, std::size_t bit, bool v) {
    auto& word = data_[w * stride_ + (bit >> 6)];
    auto mask = std::uint64_t{1} << (bit & 63);
    if (v)
      word |= mask;
    else
      word &= ~mask;
  }
  std::span<const std::uint64_t> row(std::size_t w) const { return {data_.data() + w * stride_, stride_}; }
  std::span<std::uint64_t> row(std::size_t w) { return {data_.data() + w * stride_, stride_}; }

  World world(std::size_t w) const;

 private:
  std::size_t width_ = 0;
  std::size_t stride_ = 1;
  std::size_t count_ = 0;
  std::vector<std::uint64_t> data_;
};

/// An equivalence relation stored as class ids. Ids are dense and numbered by
/// the rank of each class's least member.
struct Partition {
  std::vector<std::uint32_t> class_of;
  std::uint32_t num_classes = 0;

  static Partition universal(std::size_t num_worlds);
  /// Renumbers arbitrary labels into canonical least-member order.
  static Partition from_labels(std::span<const std::uint32_t> labels);

  bool operator==(const Partition&) const = default;
};

/// Refines `base` by agreement on the given bit positions.
Partition refine(const Partition& base, const WorldStore& worlds, std::span<const std::size_t> bits);

/// agent -> variables it may observe.
using ObservabilityMap = std::map<std::string, std::set<std::string>>;

class KripkeStructure {
 public:
  KripkeStructure() = default;
  /// Raw constructor: partitions are given explicitly (one per agent) and
  /// renumbered canonically.
  KripkeStructure(std::vector<std::string> agents, VariableTable vars, WorldStore worlds,
                  std::vector<Partition> partitions);

  const std::vector<std::string>& agents() const { return agents_; }
  std::optional<std::size_t> agent_index(std::string_view agent) const;
  std::size_t require_agent(std::string_view agent) const;  // throws FitnessError

  const VariableTable& vars() const { return vars_; }
  const WorldStore& worlds() const { return worlds_; }
  std::size_t num_worlds() const { return worlds_.size(); }

  bool value(WorldId w, std::size_t var) const { return worlds_.get(w, var); }
  bool value(WorldId w, std::string_view var) const { return worlds_.get(w, vars_.require(var)); }

  const Partition& partition(std::size_t agent) const { return partitions_[agent]; }
  std::uint32_t class_of(std::size_t agent, WorldId w) const { return partitions_[agent].class_of[w]; }

  /// Copy with an extra agent that distinguishes nothing.
  KripkeStructure with_agent(const std::string& agent) const;

 private:
  std::vector<std::string> agents_;
  VariableTable vars_;
  WorldStore worlds_;
  std::vector<Partition> partitions_;
};

struct BuildOptions {
  bool deduplicate = true;
};

/// Observation-generated structure: agent i cannot distinguish worlds that
/// agree on observation_sets[i].
KripkeStructure build_structure(const std::vector<std::string>& agents, const std::vector<std::string>& vars,
                                const std::vector<World>& worlds,
                                const std::map<std::string, std::vector<std::string>>& observation_sets,
                                const BuildOptions& options = {});

/// Every boolean assignment to `vars` as a world, each agent observing the
/// variables it owns (by name prefix).
KripkeStructure full_structure(const std::vector<std::string>& agents, const std::vector<std::string>& vars);

struct ConsistencyReport {
  bool consistent = true;
  std::string agent;
  std::string var;
  std::optional<WorldId> first;
  std::optional<WorldId> second;  // same ~_agent class, different value of var
  std::string message;
};

ConsistencyReport check_consistent(const KripkeStructure& m, const ObservabilityMap& ov);

/// The agent's equivalence classes, ordered by least member.
std::vector<std::vector<WorldId>> classes_of(const KripkeStructure& m, std::string_view agent);

/// Hex encoding of a valuation row: bit v is bit v of the big number, digits
/// printed most significant first, ceil(width/4) digits.
std::string world_to_hex(const KripkeStructure& m, WorldId w);
World world_from_hex(std::string_view hex, std::size_t width);

}  // namespace epimc
