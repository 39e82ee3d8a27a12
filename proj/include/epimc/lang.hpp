#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "epimc/formula.hpp"
#include "epimc/kripke.hpp"
#include "epimc/names.hpp"

namespace epimc {

/// Boolean expression over variables, as used on the right of assignments
/// and sends.
class Expression {
 public:
  enum class Kind { Const, Var, Not, And, Or, Xor };

  static Expression constant(bool v);
  static Expression var(VarName name);
  static Expression negation(Expression e);
  static Expression conjunction(Expression a, Expression b);
  static Expression disjunction(Expression a, Expression b);
  static Expression exclusive_or(Expression a, Expression b);
  /// Left-folded xor; the empty xor is false.
  static Expression xor_all(const std::vector<Expression>& es);

  /// Propositional formula to expression; throws PreconditionError on K.
  static Expression from_formula(const Formula& f);

  Kind kind() const;
  bool value() const;               // Const
  const VarName& name() const;      // Var
  const Expression& lhs() const;    // Not (operand), And, Or, Xor
  const Expression& rhs() const;

  /// Qualifies bare variable names with `agent`.
  Expression qualified(std::string_view agent) const;
  /// Distinct variables read, in first-occurrence order.
  std::vector<VarName> vars() const;
  Formula to_formula() const;

  bool operator==(const Expression& other) const;

 private:
  struct Node;
  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

std::string to_string(const Expression& e);

/// i: x := e
struct Assign {
  std::string agent;
  VarName target;
  Expression expr;
};
/// i: rand(x)
struct Rand {
  std::string agent;
  VarName target;
};
/// i: e -> j.x
struct Send {
  std::string agent;
  Expression expr;
  VarName target;
};
/// i: broadcast(x)
struct Broadcast {
  std::string agent;
  VarName source;
};

using AtomicAction = std::variant<Assign, Rand, Send, Broadcast>;

const std::string& actor(const AtomicAction& a);
std::vector<std::string> reads(const AtomicAction& a);
std::vector<std::string> writes(const AtomicAction& a);
std::string to_string(const AtomicAction& a);

/// A set of simultaneous atomic actions; no variable is written twice.
class JointAction {
 public:
  JointAction() = default;
  explicit JointAction(std::vector<AtomicAction> actions);  // throws PreconditionError on double write

  void add(AtomicAction a);
  const std::vector<AtomicAction>& actions() const { return actions_; }
  bool empty() const { return actions_.empty(); }
  std::vector<std::string> written() const;
  std::vector<std::string> read() const;

 private:
  std::vector<AtomicAction> actions_;
};

struct Assertion {
  std::string text;
  Formula formula;
};

/// Assertions checked for validity after `position` steps have run.
struct Checkpoint {
  std::size_t position = 0;
  std::string label;
  std::vector<Assertion> assertions;
};

/// Marks a block of steps generated as one DC or DC^a round.
struct InstanceMarker {
  int index = 0;
  bool abstract = false;
  std::size_t first_step = 0;
  std::size_t length = 0;
  std::vector<std::string> agents;            // participants (without T)
  std::map<std::string, Expression> messages;  // per agent, qualified
  std::vector<std::string> internal_vars;      // keys, b, x_i, y of this round
  std::string graph;                           // key graph description (concrete)
};

struct Program {
  std::vector<JointAction> steps;
  std::vector<Checkpoint> checkpoints;
  std::vector<InstanceMarker> instances;

  std::size_t length() const { return steps.size(); }
  /// Appends `other`, shifting its checkpoint and marker positions.
  Program& append(const Program& other);
  void add_step(JointAction a) { steps.push_back(std::move(a)); }
  void add_checkpoint(std::string label, std::vector<Assertion> assertions);
  std::set<std::string> agents() const;
};

/// Parses `step { ... }` / `checkpoint "..." assert ...` text.
Program parse_program(std::string_view text, const MacroContext* ctx = nullptr);

/// A program file: optional header declaring the initial structure, then
/// the program. See README for the grammar.
struct ProgramFile {
  std::vector<std::string> agents;
  std::vector<std::string> vars;
  std::vector<World> worlds;  // empty: all assignments
  std::map<std::string, std::vector<std::string>> observe;  // overrides
  Program program;

  KripkeStructure initial_structure() const;
};

ProgramFile parse_program_file(std::string_view text, const MacroContext* ctx = nullptr);

struct EnabledReport {
  bool enabled = true;
  int condition = 0;  // violated condition (1-3) or 0
  std::size_t step = 0;
  std::string message;
};

EnabledReport enabled_at_ov(const JointAction& a, const ObservabilityMap& ov);
ObservabilityMap apply_ov(const ObservabilityMap& ov, const JointAction& a);

/// ov(i) = the variables of M owned by i (name prefix) that are constant on
/// each ~_i class.
ObservabilityMap canonical_ov(const KripkeStructure& m);

struct StructureEnabled {
  EnabledReport report;
  /// ov after the enabled prefix of the program.
  ObservabilityMap ov;
};

StructureEnabled enabled_at_structure(const Program& p, const KripkeStructure& m);

struct StepOptions {
  unsigned jobs = 1;
  std::size_t max_worlds = std::size_t{1} << 24;
};

struct StepResult {
  KripkeStructure structure;
  ObservabilityMap ov;
};

/// M[A]. Worlds are enumerated base-world major, then the random bits in
/// little-endian order of their rand actions.
StepResult step(const KripkeStructure& m, const ObservabilityMap& ov, const JointAction& a,
                const StepOptions& options = {});

struct AssertionResult {
  std::string text;
  bool valid = true;
  std::optional<WorldId> counterexample;
};

struct CheckpointReport {
  std::string label;
  std::size_t position = 0;
  std::vector<AssertionResult> results;
  bool passed() const;
};

struct RunOptions {
  unsigned jobs = 1;
  std::size_t max_worlds = std::size_t{1} << 24;
  std::optional<double> budget_seconds;
  std::optional<ObservabilityMap> ov;  // default: canonical_ov
  bool evaluate_checkpoints = true;
  bool check_consistency = false;      // re-check ov after every step
  std::function<void(const Checkpoint&, const KripkeStructure&)> on_checkpoint;
  std::function<void(std::size_t, const KripkeStructure&, const KripkeStructure&)> on_step;
};

struct RunResult {
  KripkeStructure structure;
  ObservabilityMap ov;
  std::vector<CheckpointReport> checkpoints;
  std::vector<std::size_t> world_counts;  // before the first step, then after each
  bool passed() const;
};

/// Folds step over the program, evaluating checkpoints on the intermediate
/// structures. Agents the program mentions but M0 lacks join with no
/// initial observations.
RunResult run(const KripkeStructure& m0, const Program& p, const RunOptions& options = {});

}  // namespace epimc
