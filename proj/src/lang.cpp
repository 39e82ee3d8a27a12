#include "epimc/lang.hpp"

#include <algorithm>
#include <chrono>

#include "epimc/error.hpp"
#include "epimc/parallel.hpp"

namespace epimc {

// ---------------------------------------------------------------------------
// Expression

struct Expression::Node {
  Kind kind;
  bool value = false;
  VarName name;
  std::vector<Expression> kids;
};

Expression Expression::constant(bool v) {
  return Expression(std::make_shared<const Node>(Node{Kind::Const, v, {}, {}}));
}
Expression Expression::var(VarName name) {
  return Expression(std::make_shared<const Node>(Node{Kind::Var, false, std::move(name), {}}));
}
Expression Expression::negation(Expression e) {
  return Expression(std::make_shared<const Node>(Node{Kind::Not, false, {}, {std::move(e)}}));
}
Expression Expression::conjunction(Expression a, Expression b) {
  return Expression(std::make_shared<const Node>(Node{Kind::And, false, {}, {std::move(a), std::move(b)}}));
}
Expression Expression::disjunction(Expression a, Expression b) {
  return Expression(std::make_shared<const Node>(Node{Kind::Or, false, {}, {std::move(a), std::move(b)}}));
}
Expression Expression::exclusive_or(Expression a, Expression b) {
  return Expression(std::make_shared<const Node>(Node{Kind::Xor, false, {}, {std::move(a), std::move(b)}}));
}

Expression Expression::xor_all(const std::vector<Expression>& es) {
  if (es.empty()) return constant(false);
  Expression acc = es.front();
  for (std::size_t k = 1; k < es.size(); ++k) acc = exclusive_or(acc, es[k]);
  return acc;
}

Expression Expression::from_formula(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Top: return constant(true);
    case Formula::Kind::Atom: return var(f.var());
    case Formula::Kind::Not:
      if (f.operand().kind() == Formula::Kind::Top) return constant(false);
      // Fold the not-and-not pattern that lor() produces back into a disjunction.
      if (f.operand().kind() == Formula::Kind::And && f.operand().lhs().kind() == Formula::Kind::Not &&
          f.operand().rhs().kind() == Formula::Kind::Not)
        return disjunction(from_formula(f.operand().lhs().operand()), from_formula(f.operand().rhs().operand()));
      return negation(from_formula(f.operand()));
    case Formula::Kind::And: return conjunction(from_formula(f.lhs()), from_formula(f.rhs()));
    case Formula::Kind::Knows: throw PreconditionError("knowledge operator cannot appear in a program expression");
  }
  return constant(false);
}

Expression::Kind Expression::kind() const { return node_->kind; }
bool Expression::value() const { return node_->value; }
const VarName& Expression::name() const { return node_->name; }
const Expression& Expression::lhs() const { return node_->kids.at(0); }
const Expression& Expression::rhs() const { return node_->kids.at(1); }

Expression Expression::qualified(std::string_view agent) const {
  switch (kind()) {
    case Kind::Const: return *this;
    case Kind::Var: return name().qualified() ? *this : var(name().qualified_as(agent));
    case Kind::Not: return negation(lhs().qualified(agent));
    case Kind::And: return conjunction(lhs().qualified(agent), rhs().qualified(agent));
    case Kind::Or: return disjunction(lhs().qualified(agent), rhs().qualified(agent));
    case Kind::Xor: return exclusive_or(lhs().qualified(agent), rhs().qualified(agent));
  }
  return *this;
}

namespace {

void collect_vars(const Expression& e, std::vector<VarName>& out) {
  switch (e.kind()) {
    case Expression::Kind::Const: return;
    case Expression::Kind::Var:
      if (std::find(out.begin(), out.end(), e.name()) == out.end()) out.push_back(e.name());
      return;
    case Expression::Kind::Not: collect_vars(e.lhs(), out); return;
    default:
      collect_vars(e.lhs(), out);
      collect_vars(e.rhs(), out);
  }
}

}  // namespace

std::vector<VarName> Expression::vars() const {
  std::vector<VarName> out;
  collect_vars(*this, out);
  return out;
}

Formula Expression::to_formula() const {
  switch (kind()) {
    case Kind::Const: return value() ? Formula::top() : bottom();
    case Kind::Var: return Formula::atom(name());
    case Kind::Not: return lnot(lhs().to_formula());
    case Kind::And: return land(lhs().to_formula(), rhs().to_formula());
    case Kind::Or: return lor(lhs().to_formula(), rhs().to_formula());
    case Kind::Xor: return lxor(lhs().to_formula(), rhs().to_formula());
  }
  return bottom();
}

bool Expression::operator==(const Expression& other) const {
  if (node_ == other.node_) return true;
  if (kind() != other.kind()) return false;
  switch (kind()) {
    case Kind::Const: return value() == other.value();
    case Kind::Var: return name() == other.name();
    case Kind::Not: return lhs() == other.lhs();
    default: return lhs() == other.lhs() && rhs() == other.rhs();
  }
}

std::string to_string(const Expression& e) {
  switch (e.kind()) {
    case Expression::Kind::Const: return e.value() ? "true" : "false";
    case Expression::Kind::Var: return e.name().str();
    case Expression::Kind::Not: return "!" + to_string(e.lhs());
    case Expression::Kind::And: return "(" + to_string(e.lhs()) + " & " + to_string(e.rhs()) + ")";
    case Expression::Kind::Or: return "(" + to_string(e.lhs()) + " | " + to_string(e.rhs()) + ")";
    case Expression::Kind::Xor: return "(" + to_string(e.lhs()) + " ^ " + to_string(e.rhs()) + ")";
  }
  return {};
}

// ---------------------------------------------------------------------------
// Actions

const std::string& actor(const AtomicAction& a) {
  return std::visit([](const auto& x) -> const std::string& { return x.agent; }, a);
}

namespace {

std::vector<std::string> names_of(const std::vector<VarName>& vs) {
  std::vector<std::string> out;
  for (const auto& v : vs) out.push_back(v.str());
  return out;
}

}  // namespace

std::vector<std::string> reads(const AtomicAction& a) {
  if (auto* x = std::get_if<Assign>(&a)) return names_of(x->expr.qualified(x->agent).vars());
  if (auto* x = std::get_if<Send>(&a)) return names_of(x->expr.qualified(x->agent).vars());
  if (auto* x = std::get_if<Broadcast>(&a)) return {x->source.qualified_as(x->agent).str()};
  return {};
}

std::vector<std::string> writes(const AtomicAction& a) {
  if (auto* x = std::get_if<Assign>(&a)) return {x->target.qualified_as(x->agent).str()};
  if (auto* x = std::get_if<Rand>(&a)) return {x->target.qualified_as(x->agent).str()};
  if (auto* x = std::get_if<Send>(&a)) return {x->target.str()};
  return {};
}

std::string to_string(const AtomicAction& a) {
  if (auto* x = std::get_if<Assign>(&a)) return x->agent + ": " + x->target.str() + " := " + to_string(x->expr);
  if (auto* x = std::get_if<Rand>(&a)) return x->agent + ": rand(" + x->target.str() + ")";
  if (auto* x = std::get_if<Send>(&a)) return x->agent + ": " + to_string(x->expr) + " -> " + x->target.str();
  const auto& b = std::get<Broadcast>(a);
  return b.agent + ": broadcast(" + b.source.str() + ")";
}

JointAction::JointAction(std::vector<AtomicAction> actions) {
  for (auto& a : actions) add(std::move(a));
}

void JointAction::add(AtomicAction a) {
  if (actor(a).empty()) throw PreconditionError("action without an agent");
  if (auto* s = std::get_if<Send>(&a); s && !s->target.qualified())
    throw PreconditionError("send target must name the receiving agent");
  auto existing = written();
  for (const auto& w : writes(a))
    if (std::find(existing.begin(), existing.end(), w) != existing.end())
      throw PreconditionError("variable " + w + " written twice in one joint action");
  actions_.push_back(std::move(a));
}

std::vector<std::string> JointAction::written() const {
  std::vector<std::string> out;
  for (const auto& a : actions_)
    for (auto& w : writes(a)) out.push_back(std::move(w));
  return out;
}

std::vector<std::string> JointAction::read() const {
  std::vector<std::string> out;
  for (const auto& a : actions_)
    for (auto& r : reads(a))
      if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(std::move(r));
  return out;
}

// ---------------------------------------------------------------------------
// Programs

Program& Program::append(const Program& other) {
  const auto shift = steps.size();
  steps.insert(steps.end(), other.steps.begin(), other.steps.end());
  for (auto c : other.checkpoints) {
    c.position += shift;
    checkpoints.push_back(std::move(c));
  }
  for (auto m : other.instances) {
    m.first_step += shift;
    instances.push_back(std::move(m));
  }
  return *this;
}

void Program::add_checkpoint(std::string label, std::vector<Assertion> assertions) {
  checkpoints.push_back(Checkpoint{steps.size(), std::move(label), std::move(assertions)});
}

std::set<std::string> Program::agents() const {
  std::set<std::string> out;
  for (const auto& s : steps)
    for (const auto& a : s.actions()) {
      out.insert(actor(a));
      if (auto* send = std::get_if<Send>(&a)) out.insert(send->target.agent);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Enabledness and observability

namespace {

bool observes(const ObservabilityMap& ov, const std::string& agent, const std::string& var) {
  auto it = ov.find(agent);
  return it != ov.end() && it->second.contains(var);
}

}  // namespace

EnabledReport enabled_at_ov(const JointAction& a, const ObservabilityMap& ov) {
  EnabledReport rep;
  auto fail = [&](int cond, std::string msg) {
    rep.enabled = false;
    rep.condition = cond;
    rep.message = std::move(msg);
    return rep;
  };
  for (const auto& w : a.written())
    for (const auto& [agent, vars] : ov)
      if (vars.contains(w)) return fail(1, "written variable " + w + " is already observable to agent " + agent);
  for (const auto& act : a.actions()) {
    const auto& i = actor(act);
    if (std::holds_alternative<Assign>(act) || std::holds_alternative<Send>(act)) {
      for (const auto& r : reads(act))
        if (!observes(ov, i, r))
          return fail(2, "agent " + i + " reads " + r + " which it cannot observe in '" + to_string(act) + "'");
    } else if (auto* b = std::get_if<Broadcast>(&act)) {
      auto src = b->source.qualified_as(i).str();
      if (b->source.qualified() && b->source.agent != i)
        return fail(3, "agent " + i + " may only broadcast its own variables, not " + src);
      if (!observes(ov, i, src)) return fail(3, "agent " + i + " broadcasts " + src + " which it cannot observe");
    }
  }
  return rep;
}

ObservabilityMap apply_ov(const ObservabilityMap& ov, const JointAction& a) {
  auto rep = enabled_at_ov(a, ov);
  if (!rep.enabled) throw EnablednessError(rep.message);
  ObservabilityMap out = ov;
  for (const auto& act : a.actions()) {
    if (auto* x = std::get_if<Assign>(&act)) {
      out[x->agent].insert(x->target.qualified_as(x->agent).str());
    } else if (auto* x = std::get_if<Rand>(&act)) {
      out[x->agent].insert(x->target.qualified_as(x->agent).str());
    } else if (auto* x = std::get_if<Send>(&act)) {
      out[x->target.agent].insert(x->target.str());
    }
  }
  for (const auto& act : a.actions())
    if (auto* b = std::get_if<Broadcast>(&act)) {
      auto src = b->source.qualified_as(b->agent).str();
      out[b->agent];
      for (auto& [agent, vars] : out) vars.insert(src);
    }
  return out;
}

ObservabilityMap canonical_ov(const KripkeStructure& m) {
  ObservabilityMap ov;
  const auto n = m.num_worlds();
  for (std::size_t ai = 0; ai < m.agents().size(); ++ai) {
    const auto& agent = m.agents()[ai];
    auto& set = ov[agent];
    const auto& part = m.partition(ai);
    for (std::size_t v = 0; v < m.vars().width(); ++v) {
      if (owner_of(m.vars().name(v)) != agent) continue;
      std::vector<std::int8_t> seen(part.num_classes, -1);
      bool constant = true;
      for (std::size_t w = 0; w < n && constant; ++w) {
        auto& s = seen[part.class_of[w]];
        std::int8_t val = m.value(static_cast<WorldId>(w), v);
        if (s < 0)
          s = val;
        else if (s != val)
          constant = false;
      }
      if (constant) set.insert(m.vars().name(v));
    }
  }
  return ov;
}

namespace {

ObservabilityMap with_agents(ObservabilityMap ov, const KripkeStructure& m, const Program* p) {
  for (const auto& a : m.agents()) ov[a];
  if (p)
    for (const auto& a : p->agents()) ov[a];
  return ov;
}

/// Structure-level condition 3 followed by the per-step ov walk.
EnabledReport walk(const Program& p, const KripkeStructure& m, ObservabilityMap& ov) {
  EnabledReport rep;
  for (std::size_t k = 0; k < p.steps.size(); ++k)
    for (const auto& w : p.steps[k].written())
      if (m.vars().contains(w)) {
        rep.enabled = false;
        rep.condition = 3;
        rep.step = k;
        rep.message = "step " + std::to_string(k + 1) + " writes " + w + " which is already defined";
        return rep;
      }
  for (std::size_t k = 0; k < p.steps.size(); ++k) {
    auto r = enabled_at_ov(p.steps[k], ov);
    if (!r.enabled) {
      rep.enabled = false;
      rep.condition = 2;
      rep.step = k;
      rep.message = "step " + std::to_string(k + 1) + " not enabled (action condition " +
                    std::to_string(r.condition) + "): " + r.message;
      return rep;
    }
    ov = apply_ov(ov, p.steps[k]);
  }
  return rep;
}

}  // namespace

StructureEnabled enabled_at_structure(const Program& p, const KripkeStructure& m) {
  StructureEnabled out;
  out.ov = with_agents(canonical_ov(m), m, &p);
  out.report = walk(p, m, out.ov);
  return out;
}

// ---------------------------------------------------------------------------
// M[A]

namespace {

/// Postfix code for an expression over the bit positions of a structure.
struct Compiled {
  enum Op : std::uint32_t { Push0, Push1, Load, Not, And, Or, Xor };
  std::vector<std::pair<Op, std::uint32_t>> code;

  void emit(const Expression& e, const VariableTable& vars) {
    switch (e.kind()) {
      case Expression::Kind::Const: code.emplace_back(e.value() ? Push1 : Push0, 0); return;
      case Expression::Kind::Var:
        code.emplace_back(Load, static_cast<std::uint32_t>(vars.require(e.name().str())));
        return;
      case Expression::Kind::Not:
        emit(e.lhs(), vars);
        code.emplace_back(Not, 0);
        return;
      default:
        emit(e.lhs(), vars);
        emit(e.rhs(), vars);
        code.emplace_back(e.kind() == Expression::Kind::And ? And : e.kind() == Expression::Kind::Or ? Or : Xor, 0);
    }
  }

  bool eval(std::span<const std::uint64_t> row, std::vector<std::uint8_t>& stack) const {
    stack.clear();
    for (auto [op, arg] : code) {
      switch (op) {
        case Push0: stack.push_back(0); break;
        case Push1: stack.push_back(1); break;
        case Load: stack.push_back((row[arg >> 6] >> (arg & 63)) & 1u); break;
        case Not: stack.back() ^= 1; break;
        default: {
          auto b = stack.back();
          stack.pop_back();
          auto& a = stack.back();
          a = op == And ? (a & b) : op == Or ? (a | b) : (a ^ b);
        }
      }
    }
    return stack.back() != 0;
  }
};

struct Effect {
  std::size_t target;  // bit in the new table
  std::optional<Compiled> expr;
  std::size_t rand_bit = 0;  // position in kappa when expr is empty
};

}  // namespace

StepResult step(const KripkeStructure& m, const ObservabilityMap& ov_in, const JointAction& a,
                const StepOptions& options) {
  ObservabilityMap ov = with_agents(ov_in, m, nullptr);
  for (const auto& act : a.actions()) {
    m.require_agent(actor(act));
    if (auto* s = std::get_if<Send>(&act)) m.require_agent(s->target.agent);
  }
  for (const auto& w : a.written())
    if (m.vars().contains(w)) throw EnablednessError("joint action writes " + w + " which is already defined");
  auto rep = enabled_at_ov(a, ov);
  if (!rep.enabled) throw EnablednessError(rep.message);

  VariableTable vars = m.vars();
  std::vector<Effect> effects;
  std::size_t rand_count = 0;
  for (const auto& act : a.actions()) {
    auto ws = writes(act);
    if (ws.empty()) continue;
    Effect eff;
    eff.target = vars.add(ws.front());
    if (auto* x = std::get_if<Assign>(&act)) {
      eff.expr.emplace();
      eff.expr->emit(x->expr.qualified(x->agent), m.vars());
    } else if (auto* x = std::get_if<Send>(&act)) {
      eff.expr.emplace();
      eff.expr->emit(x->expr.qualified(x->agent), m.vars());
    } else {
      eff.rand_bit = rand_count++;
    }
    effects.push_back(std::move(eff));
  }
  if (rand_count >= 32) throw ResourceError("too many random choices in one joint action");

  const std::size_t base = m.num_worlds();
  const std::size_t fan = std::size_t{1} << rand_count;
  if (base > options.max_worlds / fan)
    throw ResourceError("step would create " + std::to_string(base) + " x " + std::to_string(fan) +
                        " worlds, above the cap of " + std::to_string(options.max_worlds));
  const std::size_t total = base * fan;
  WorldStore store(vars.width(), total);
  const std::size_t old_stride = m.worlds().stride();

  parallel_for(
      base, options.jobs,
      [&](std::size_t begin, std::size_t end) {
        std::vector<std::uint8_t> stack;
        std::vector<std::uint8_t> values(effects.size());
        for (std::size_t w = begin; w < end; ++w) {
          auto src = m.worlds().row(w);
          for (std::size_t k = 0; k < effects.size(); ++k)
            if (effects[k].expr) values[k] = effects[k].expr->eval(src, stack);
          for (std::size_t kappa = 0; kappa < fan; ++kappa) {
            const std::size_t nw = w * fan + kappa;
            auto dst = store.row(nw);
            std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(old_stride), dst.begin());
            for (std::size_t k = 0; k < effects.size(); ++k) {
              bool v = effects[k].expr ? values[k] != 0 : ((kappa >> effects[k].rand_bit) & 1u);
              store.set(nw, effects[k].target, v);
            }
          }
        }
      },
      1);

  ObservabilityMap next = apply_ov(ov, a);
  std::vector<Partition> parts;
  parts.reserve(m.agents().size());
  for (std::size_t ai = 0; ai < m.agents().size(); ++ai) {
    const auto& agent = m.agents()[ai];
    const auto& old = m.partition(ai);
    Partition expanded;
    expanded.num_classes = old.num_classes;
    expanded.class_of.resize(total);
    for (std::size_t w = 0; w < total; ++w) expanded.class_of[w] = old.class_of[w / fan];
    std::vector<std::size_t> bits;
    const auto& before = ov[agent];
    for (const auto& v : next[agent])
      if (!before.contains(v)) bits.push_back(vars.require(v));
    std::sort(bits.begin(), bits.end());
    parts.push_back(refine(expanded, store, bits));
  }
  return StepResult{KripkeStructure(m.agents(), std::move(vars), std::move(store), std::move(parts)),
                    std::move(next)};
}

// ---------------------------------------------------------------------------
// Runs

bool CheckpointReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.valid; });
}

bool RunResult::passed() const {
  return std::all_of(checkpoints.begin(), checkpoints.end(), [](const auto& c) { return c.passed(); });
}

RunResult run(const KripkeStructure& m0, const Program& p, const RunOptions& options) {
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  auto check_budget = [&](std::string_view where) {
    if (!options.budget_seconds) return;
    std::chrono::duration<double> elapsed = Clock::now() - started;
    if (elapsed.count() > *options.budget_seconds)
      throw ResourceError("time budget of " + std::to_string(*options.budget_seconds) + "s exceeded " +
                          std::string(where));
  };

  for (const auto& c : p.checkpoints)
    if (c.position > p.steps.size()) throw PreconditionError("checkpoint '" + c.label + "' is past the end");

  KripkeStructure m = m0;
  for (const auto& a : p.agents())
    if (!m.agent_index(a)) m = m.with_agent(a);

  ObservabilityMap ov;
  if (options.ov) {
    ov = with_agents(*options.ov, m, &p);
    auto cons = check_consistent(m, ov);
    if (!cons.consistent) throw EnablednessError("observability map inconsistent: " + cons.message);
  } else {
    ov = with_agents(canonical_ov(m), m, &p);
  }
  {
    ObservabilityMap probe = ov;
    auto rep = walk(p, m, probe);
    if (!rep.enabled) throw EnablednessError(rep.message);
  }

  std::vector<const Checkpoint*> order;
  for (const auto& c : p.checkpoints) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [](auto* x, auto* y) { return x->position < y->position; });

  RunResult result;
  result.world_counts.push_back(m.num_worlds());
  std::size_t next_cp = 0;
  auto fire_checkpoints = [&](std::size_t pos) {
    while (next_cp < order.size() && order[next_cp]->position == pos) {
      const auto& cp = *order[next_cp++];
      if (options.on_checkpoint) options.on_checkpoint(cp, m);
      if (options.evaluate_checkpoints) {
        CheckpointReport rep{cp.label, cp.position, {}};
        Evaluator ev(m, options.jobs);
        for (const auto& as : cp.assertions) {
          check_fit(m, as.formula);
          const auto& s = ev.sat(as.formula);
          AssertionResult r{as.text, true, std::nullopt};
          if (auto miss = s.first_unset()) {
            r.valid = false;
            r.counterexample = static_cast<WorldId>(*miss);
          }
          rep.results.push_back(std::move(r));
        }
        result.checkpoints.push_back(std::move(rep));
      }
      check_budget("at checkpoint '" + cp.label + "'");
    }
  };

  fire_checkpoints(0);
  for (std::size_t k = 0; k < p.steps.size(); ++k) {
    auto next = step(m, ov, p.steps[k], StepOptions{options.jobs, options.max_worlds});
    if (options.on_step) options.on_step(k, m, next.structure);
    m = std::move(next.structure);
    ov = std::move(next.ov);
    if (options.check_consistency) {
      auto cons = check_consistent(m, ov);
      if (!cons.consistent)
        throw EnablednessError("observability map inconsistent after step " + std::to_string(k + 1) + ": " +
                               cons.message);
    }
    result.world_counts.push_back(m.num_worlds());
    check_budget("after step " + std::to_string(k + 1));
    fire_checkpoints(k + 1);
  }
  result.structure = std::move(m);
  result.ov = std::move(ov);
  return result;
}

}  // namespace epimc
