#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "epimc/kripke.hpp"
#include "epimc/names.hpp"
#include "epimc/world_set.hpp"

namespace epimc {

/// Immutable epistemic formula over the core connectives
/// top | atom | not | and | K_i. Everything else is sugar built from these.
class Formula {
 public:
  enum class Kind { Top, Atom, Not, And, Knows };

  static Formula top();
  static Formula atom(VarName var);
  static Formula negation(Formula f);
  static Formula conjunction(Formula lhs, Formula rhs);
  static Formula knows(std::string agent, Formula body);

  Kind kind() const;
  const VarName& var() const;          // Atom
  const std::string& agent() const;    // Knows
  const Formula& operand() const;      // Not, Knows
  const Formula& lhs() const;          // And
  const Formula& rhs() const;          // And

  /// Node identity, stable for the lifetime of any copy of this formula.
  const void* id() const { return node_.get(); }

  bool operator==(const Formula& other) const;  // structural

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

// Derived connectives, expanded into the core forms.
Formula bottom();
Formula lnot(Formula f);
Formula land(Formula a, Formula b);
Formula lor(Formula a, Formula b);
Formula implies(Formula a, Formula b);
Formula iff(Formula a, Formula b);
Formula lxor(Formula a, Formula b);
Formula all_of(const std::vector<Formula>& fs);  // empty -> top
Formula any_of(const std::vector<Formula>& fs);  // empty -> bottom
/// K_i(f) | K_i(!f)
Formula knows_whether(const std::string& agent, Formula f);

bool is_propositional(const Formula& f);
std::size_t formula_size(const Formula& f);
std::size_t formula_depth(const Formula& f);
std::set<std::string> atoms_of(const Formula& f);
std::set<std::string> agents_of(const Formula& f);

/// Prints in the concrete grammar using only core connectives; the output
/// parses back to a structurally equal formula.
std::string to_string(const Formula& f);

enum class Strength { Strong, Weak };

/// Bindings for the protocol macros (conflict, sender, C0, slot equality).
struct MacroContext {
  int n = 0;
  int width = 0;  // bits per slot request
  std::vector<std::string> agents;
  std::string slot_request = "slot_request";
  std::string message = "message";
  std::string round_result = "rr";
  Strength strength = Strength::Strong;
  /// Whose round-result copies `C0 == x` reads in formula position.
  std::string rr_agent;

  /// Agents "1".."n", width ceil(log2(n+1)).
  static MacroContext for_agents(int n, Strength strength = Strength::Strong);

  /// Bit `bit` of the slot request of `agent` (bare when agent is empty).
  VarName slot_bit(const std::string& agent, int bit) const;
  VarName round_result_var(const std::string& agent, int round) const;
  VarName message_var(const std::string& agent) const;
};

int slot_width(int n);

/// agent.slot_request == k, expanded over the little-endian bit encoding.
Formula slot_request_equals(const std::string& agent, int k, const MacroContext& ctx);
/// Two distinct agents both request slot s.
Formula expand_conflict(int s, const MacroContext& ctx);
/// Some agent (other than i when strong) has message x and requests a slot.
Formula expand_sender(const std::string& agent, bool x, const MacroContext& ctx);
/// Exactly x of the round results rr[1..n] of `owner` are 0.
Formula expand_count_zero(int x, const MacroContext& ctx, const std::string& owner);

/// Parses the formula grammar. `ctx` is needed only when macros are used.
Formula parse_formula(std::string_view text, const MacroContext* ctx = nullptr);

/// Throws FitnessError when an atom or agent of f is missing from m.
void check_fit(const KripkeStructure& m, const Formula& f);

/// Computes satisfaction sets bottom-up, memoised per formula node.
class Evaluator {
 public:
  explicit Evaluator(const KripkeStructure& m, unsigned jobs = 1) : m_(m), jobs_(jobs) {}

  const WorldSet& sat(const Formula& f);
  bool at(WorldId w, const Formula& f) { return sat(f).test(w); }
  const KripkeStructure& structure() const { return m_; }

 private:
  WorldSet compute(const Formula& f);

  const KripkeStructure& m_;
  unsigned jobs_;
  std::unordered_map<const void*, std::pair<Formula, WorldSet>> memo_;
};

bool eval_at(const KripkeStructure& m, WorldId w, const Formula& f);

struct Validity {
  bool valid = true;
  std::optional<WorldId> counterexample;  // least failing world
};

Validity valid(const KripkeStructure& m, const Formula& f, unsigned jobs = 1);

}  // namespace epimc
