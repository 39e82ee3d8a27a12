#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "epimc/formula.hpp"
#include "epimc/kripke.hpp"
#include "epimc/lang.hpp"

namespace epimc {

enum class Mode { Concrete, Abstract };

std::string to_string(Mode m);
std::string to_string(Strength s);
Mode parse_mode(std::string_view s);
Strength parse_strength(std::string_view s);

/// Concrete predicates standing in for the knowledge conditions of the
/// two-phase program. Expressions use bare names (slot_request bits,
/// message, rr[t], kc[s]) and are qualified per agent when assigned.
struct CandidateImpl {
  std::string name;
  std::vector<Expression> kc;             // index s-1
  Expression rcvd0 = Expression::constant(false);
  Expression rcvd1 = Expression::constant(false);
  Expression dlvrd = Expression::constant(false);
  std::vector<Expression> conflict_free;  // empty: not tracked
};

/// Every predicate false.
CandidateImpl initial_candidate(int n);
/// The verified predicates for kc, conflict_free, rcvd0/1 and dlvrd.
CandidateImpl final_candidate(int n, Strength strength);
/// JSON candidate file: {"name":..,"kc": "expr with {s}" | [..], "rcvd0":..,
/// "rcvd1":.., "dlvrd":.., "conflict_free": ..}. `{s}`, `{n}` and `{n+s}`
/// are substituted before parsing.
CandidateImpl parse_candidate(std::string_view json_text, int n);

struct TwoPhaseSetup {
  KripkeStructure structure;
  ObservabilityMap ov;
  MacroContext ctx;
};

/// All (slot request, message) combinations for agents 1..n; each agent
/// observes only its own. Agent 1's digit varies fastest.
TwoPhaseSetup build_initial(int n);

/// Index of the initial world with the given requests and messages.
WorldId initial_world(int n, const std::vector<int>& slot_requests, const std::vector<bool>& messages);

/// A verification condition with the pieces needed to explain a failure.
struct SpecFormula {
  std::string spec;  // "1", "2a", "2b", "3", "4", "cf"
  std::string agent;
  int slot = 0;
  Formula formula = Formula::top();
  std::optional<Formula> knowledge_operand;  // psi in the K_agent psi it compares against
};

SpecFormula spec_formula(const MacroContext& ctx, std::string_view spec, const std::string& agent, int slot = 0);

struct SpecCheck {
  std::size_t checkpoint = 0;  // index into program.checkpoints
  SpecFormula spec;
};

struct TwoPhaseProgram {
  Program program;
  std::vector<SpecCheck> checks;
  int rounds = 0;
  Mode mode = Mode::Abstract;
};

/// Reservation rounds, then per slot the kc assignment and its transmission
/// round, then the reception/delivery assignments. `rounds` < 2n truncates
/// after that many DC rounds (0 means all). `specs` filters which
/// verification conditions are attached (empty: all).
TwoPhaseProgram build_program(int n, const CandidateImpl& cand, Mode mode, Strength strength, int rounds = 0,
                              const std::set<std::string>& specs = {});

struct SpecEntry {
  std::string spec;
  std::string agent;
  int slot = 0;
  std::string checkpoint;
  std::size_t position = 0;
  bool passed = true;
  std::optional<WorldId> witness;
  std::optional<WorldId> related;  // ~_agent-related world explaining a knowledge mismatch
  std::map<std::string, int> witness_view;
  std::map<std::string, int> related_view;

  bool operator==(const SpecEntry&) const = default;
};

struct SpecReport {
  int n = 0;
  Mode mode = Mode::Abstract;
  Strength strength = Strength::Strong;
  std::string candidate;
  int rounds = 0;
  std::vector<SpecEntry> entries;
  std::vector<std::size_t> world_counts;
  double build_seconds = 0;
  double run_seconds = 0;
  std::map<std::string, double> check_seconds;  // per spec id

  bool passed() const;
  std::size_t failures() const;
  /// Equality of everything but timings.
  bool same_verdicts(const SpecReport& other) const;
};

struct CheckOptions {
  int rounds = 0;
  std::set<std::string> specs;
  unsigned jobs = 1;
  std::optional<double> budget_seconds;
  std::size_t max_worlds = std::size_t{1} << 24;
};

struct TwoPhaseRun {
  TwoPhaseSetup setup;
  TwoPhaseProgram program;
  RunResult result;
  SpecReport report;
};

/// Builds, runs and checks; keeps the final structure for inspection.
TwoPhaseRun run_two_phase(int n, const CandidateImpl& cand, Strength strength, Mode mode,
                          const CheckOptions& options = {});

SpecReport check_implementation(int n, const CandidateImpl& cand, Strength strength, Mode mode,
                                const CheckOptions& options = {});

/// Decoded view of a world: slot requests as integers, messages and the
/// protocol's history variables, per agent (internal DC variables omitted).
std::map<std::string, int> describe_world(const KripkeStructure& m, const MacroContext& ctx, WorldId w);

}  // namespace epimc
