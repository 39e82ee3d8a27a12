#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epimc/formula.hpp"
#include "epimc/kripke.hpp"

namespace epimc {

/// A relation between the worlds of two structures, one bitset row per left
/// world, together with the (Var, Agt) parameters it was computed for.
class BisimRelation {
 public:
  BisimRelation() = default;
  BisimRelation(std::size_t left, std::size_t right);

  std::size_t left_size() const { return left_; }
  std::size_t right_size() const { return right_; }

  bool contains(WorldId w, WorldId u) const { return (rows_[w * stride_ + (u >> 6)] >> (u & 63)) & 1u; }
  void set(WorldId w, WorldId u, bool v);
  std::span<const std::uint64_t> row(WorldId w) const { return {rows_.data() + w * stride_, stride_}; }

  std::size_t size() const;
  bool left_total() const;
  bool right_total() const;
  bool total() const { return left_total() && right_total(); }
  std::vector<std::pair<WorldId, WorldId>> pairs() const;

  std::vector<std::string> vars;
  std::vector<std::string> agents;

  bool operator==(const BisimRelation&) const = default;

 private:
  std::size_t left_ = 0;
  std::size_t right_ = 0;
  std::size_t stride_ = 1;
  std::vector<std::uint64_t> rows_;
};

struct BisimStats {
  std::size_t rounds = 0;
  std::size_t initial_pairs = 0;
  std::size_t removed_pairs = 0;
};

/// Largest (vars, agents)-bisimulation between m and n.
BisimRelation greatest_bisimulation(const KripkeStructure& m, const KripkeStructure& n,
                                    const std::vector<std::string>& vars, const std::vector<std::string>& agents,
                                    BisimStats* stats = nullptr);

bool are_bisimilar(const KripkeStructure& m, const KripkeStructure& n, const std::vector<std::string>& vars,
                   const std::vector<std::string>& agents);

struct ClosureViolation {
  std::string condition;  // "atoms", "forth", "back"
  WorldId left = 0;
  WorldId right = 0;
  std::string agent;
  std::string detail;
};

/// Checks Atoms/Forth/Back pair by pair, without any class-level shortcut.
std::optional<ClosureViolation> verify_bisimulation(const KripkeStructure& m, const KripkeStructure& n,
                                                    const BisimRelation& r);

struct PreservationViolation {
  std::size_t formula = 0;
  WorldId left = 0;
  WorldId right = 0;
  bool left_value = false;
  bool right_value = false;
};

struct PreservationReport {
  std::size_t formulas_checked = 0;
  std::size_t pairs_checked = 0;
  std::vector<PreservationViolation> violations;
  bool preserved() const { return violations.empty(); }
};

/// Every formula must take the same value at both ends of every pair of r.
PreservationReport check_preservation(const KripkeStructure& m, const KripkeStructure& n, const BisimRelation& r,
                                      const std::vector<Formula>& formulas);

}  // namespace epimc
