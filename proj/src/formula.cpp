#include "epimc/formula.hpp"

#include <algorithm>
#include <functional>

#include "epimc/error.hpp"
#include "epimc/parallel.hpp"
#include "syntax.hpp"

namespace epimc {

VarName VarName::parse(std::string_view text) {
  try {
    syntax::Parser p(text);
    auto v = p.variable();
    if (!p.at(syntax::Tok::End)) p.fail("trailing characters");
    return v;
  } catch (const ParseError& e) {
    throw PreconditionError("malformed variable name '" + std::string(text) + "': " + e.what());
  }
}

struct Formula::Node {
  Kind kind;
  VarName var;
  std::string agent;
  std::vector<Formula> kids;
};

Formula Formula::top() {
  static const Formula t(std::make_shared<const Node>(Node{Kind::Top, {}, {}, {}}));
  return t;
}

Formula Formula::atom(VarName var) {
  return Formula(std::make_shared<const Node>(Node{Kind::Atom, std::move(var), {}, {}}));
}

Formula Formula::negation(Formula f) {
  return Formula(std::make_shared<const Node>(Node{Kind::Not, {}, {}, {std::move(f)}}));
}

Formula Formula::conjunction(Formula lhs, Formula rhs) {
  return Formula(std::make_shared<const Node>(Node{Kind::And, {}, {}, {std::move(lhs), std::move(rhs)}}));
}

Formula Formula::knows(std::string agent, Formula body) {
  if (agent.empty()) throw PreconditionError("knowledge operator without an agent");
  return Formula(std::make_shared<const Node>(Node{Kind::Knows, {}, std::move(agent), {std::move(body)}}));
}

Formula::Kind Formula::kind() const { return node_->kind; }
const VarName& Formula::var() const { return node_->var; }
const std::string& Formula::agent() const { return node_->agent; }
const Formula& Formula::operand() const { return node_->kids.at(0); }
const Formula& Formula::lhs() const { return node_->kids.at(0); }
const Formula& Formula::rhs() const { return node_->kids.at(1); }

bool Formula::operator==(const Formula& other) const {
  if (node_ == other.node_) return true;
  if (kind() != other.kind()) return false;
  switch (kind()) {
    case Kind::Top: return true;
    case Kind::Atom: return var() == other.var();
    case Kind::Not: return operand() == other.operand();
    case Kind::And: return lhs() == other.lhs() && rhs() == other.rhs();
    case Kind::Knows: return agent() == other.agent() && operand() == other.operand();
  }
  return false;
}

Formula bottom() { return Formula::negation(Formula::top()); }
Formula lnot(Formula f) { return Formula::negation(std::move(f)); }
Formula land(Formula a, Formula b) { return Formula::conjunction(std::move(a), std::move(b)); }
Formula lor(Formula a, Formula b) { return lnot(land(lnot(std::move(a)), lnot(std::move(b)))); }
Formula implies(Formula a, Formula b) { return lnot(land(std::move(a), lnot(std::move(b)))); }
Formula iff(Formula a, Formula b) { return land(implies(a, b), implies(b, a)); }
Formula lxor(Formula a, Formula b) { return lnot(iff(std::move(a), std::move(b))); }

Formula all_of(const std::vector<Formula>& fs) {
  if (fs.empty()) return Formula::top();
  Formula acc = fs.front();
  for (std::size_t k = 1; k < fs.size(); ++k) acc = land(acc, fs[k]);
  return acc;
}

Formula any_of(const std::vector<Formula>& fs) {
  if (fs.empty()) return bottom();
  Formula acc = fs.front();
  for (std::size_t k = 1; k < fs.size(); ++k) acc = lor(acc, fs[k]);
  return acc;
}

Formula knows_whether(const std::string& agent, Formula f) {
  return lor(Formula::knows(agent, f), Formula::knows(agent, lnot(f)));
}

bool is_propositional(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Top:
    case Formula::Kind::Atom: return true;
    case Formula::Kind::Not: return is_propositional(f.operand());
    case Formula::Kind::And: return is_propositional(f.lhs()) && is_propositional(f.rhs());
    case Formula::Kind::Knows: return false;
  }
  return false;
}

std::size_t formula_size(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Top:
    case Formula::Kind::Atom: return 1;
    case Formula::Kind::Not:
    case Formula::Kind::Knows: return 1 + formula_size(f.operand());
    case Formula::Kind::And: return 1 + formula_size(f.lhs()) + formula_size(f.rhs());
  }
  return 0;
}

std::size_t formula_depth(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Top:
    case Formula::Kind::Atom: return 0;
    case Formula::Kind::Not:
    case Formula::Kind::Knows: return 1 + formula_depth(f.operand());
    case Formula::Kind::And: return 1 + std::max(formula_depth(f.lhs()), formula_depth(f.rhs()));
  }
  return 0;
}

namespace {

void collect(const Formula& f, std::set<std::string>* atoms, std::set<std::string>* agents) {
  switch (f.kind()) {
    case Formula::Kind::Top: return;
    case Formula::Kind::Atom:
      if (atoms) atoms->insert(f.var().str());
      return;
    case Formula::Kind::Not: collect(f.operand(), atoms, agents); return;
    case Formula::Kind::And:
      collect(f.lhs(), atoms, agents);
      collect(f.rhs(), atoms, agents);
      return;
    case Formula::Kind::Knows:
      if (agents) agents->insert(f.agent());
      collect(f.operand(), atoms, agents);
      return;
  }
}

}  // namespace

std::set<std::string> atoms_of(const Formula& f) {
  std::set<std::string> out;
  collect(f, &out, nullptr);
  return out;
}

std::set<std::string> agents_of(const Formula& f) {
  std::set<std::string> out;
  collect(f, nullptr, &out);
  return out;
}

std::string to_string(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Top: return "true";
    case Formula::Kind::Atom: return f.var().str();
    case Formula::Kind::Not:
      if (f.operand().kind() == Formula::Kind::Top) return "false";
      return "!" + to_string(f.operand());
    case Formula::Kind::And: return "(" + to_string(f.lhs()) + " & " + to_string(f.rhs()) + ")";
    case Formula::Kind::Knows: return "K[" + f.agent() + "] " + to_string(f.operand());
  }
  return {};
}

// ---------------------------------------------------------------------------
// Macros

int slot_width(int n) {
  int w = 0;
  while ((1 << w) < n + 1) ++w;
  return w;
}

MacroContext MacroContext::for_agents(int n, Strength strength) {
  if (n < 1) throw PreconditionError("need at least one agent");
  MacroContext ctx;
  ctx.n = n;
  ctx.width = slot_width(n);
  for (int i = 1; i <= n; ++i) ctx.agents.push_back(std::to_string(i));
  ctx.strength = strength;
  ctx.rr_agent = ctx.agents.front();
  return ctx;
}

VarName MacroContext::slot_bit(const std::string& agent, int bit) const {
  return VarName(agent, slot_request + "_b" + std::to_string(bit));
}

VarName MacroContext::round_result_var(const std::string& agent, int round) const {
  return VarName(agent, round_result, round);
}

VarName MacroContext::message_var(const std::string& agent) const { return VarName(agent, message); }

Formula slot_request_equals(const std::string& agent, int k, const MacroContext& ctx) {
  if (k < 0 || k >= (1 << ctx.width)) throw PreconditionError("slot value out of encodable range");
  std::vector<Formula> bits;
  for (int b = 0; b < ctx.width; ++b) {
    auto a = Formula::atom(ctx.slot_bit(agent, b));
    bits.push_back(((k >> b) & 1) ? a : lnot(a));
  }
  return all_of(bits);
}

Formula expand_conflict(int s, const MacroContext& ctx) {
  if (s < 1 || s > ctx.n) throw PreconditionError("conflict slot out of range");
  std::vector<Formula> pairs;
  for (std::size_t i = 0; i < ctx.agents.size(); ++i)
    for (std::size_t j = i + 1; j < ctx.agents.size(); ++j)
      pairs.push_back(land(slot_request_equals(ctx.agents[i], s, ctx), slot_request_equals(ctx.agents[j], s, ctx)));
  return any_of(pairs);
}

Formula expand_sender(const std::string& agent, bool x, const MacroContext& ctx) {
  std::vector<Formula> senders;
  for (const auto& j : ctx.agents) {
    if (ctx.strength == Strength::Strong && j == agent) continue;
    auto msg = Formula::atom(ctx.message_var(j));
    senders.push_back(land(x ? msg : lnot(msg), lnot(slot_request_equals(j, 0, ctx))));
  }
  return any_of(senders);
}

Formula expand_count_zero(int x, const MacroContext& ctx, const std::string& owner) {
  if (x < 0 || x > ctx.n) throw PreconditionError("C0 value out of range");
  std::vector<Formula> cases;
  // Enumerate the x-subsets of rounds 1..n whose result is 0.
  std::function<void(int, int, std::vector<bool>&)> rec = [&](int t, int left, std::vector<bool>& zero) {
    if (t > ctx.n) {
      if (left != 0) return;
      std::vector<Formula> lits;
      for (int r = 1; r <= ctx.n; ++r) {
        auto a = Formula::atom(ctx.round_result_var(owner, r));
        lits.push_back(zero[r] ? lnot(a) : a);
      }
      cases.push_back(all_of(lits));
      return;
    }
    if (left > 0) {
      zero[t] = true;
      rec(t + 1, left - 1, zero);
      zero[t] = false;
    }
    if (ctx.n - t >= left) rec(t + 1, left, zero);
  };
  std::vector<bool> zero(ctx.n + 1, false);
  rec(1, x, zero);
  return any_of(cases);
}

Formula parse_formula(std::string_view text, const MacroContext* ctx) {
  syntax::Parser p(text);
  auto tree = p.expression();
  if (!p.at(syntax::Tok::End)) p.fail("unexpected trailing input");
  return syntax::lower_formula(*tree, {.ctx = ctx, .agent = {}, .allow_bare = false});
}

// ---------------------------------------------------------------------------
// Evaluation

void check_fit(const KripkeStructure& m, const Formula& f) {
  for (const auto& a : atoms_of(f))
    if (!m.vars().contains(a)) throw FitnessError("formula mentions undefined variable " + a);
  for (const auto& a : agents_of(f))
    if (!m.agent_index(a)) throw FitnessError("formula mentions unknown agent " + a);
}

const WorldSet& Evaluator::sat(const Formula& f) {
  if (auto it = memo_.find(f.id()); it != memo_.end()) return it->second.second;
  WorldSet s = compute(f);
  auto [it, _] = memo_.emplace(f.id(), std::make_pair(f, std::move(s)));
  return it->second.second;
}

WorldSet Evaluator::compute(const Formula& f) {
  const std::size_t n = m_.num_worlds();
  switch (f.kind()) {
    case Formula::Kind::Top: return WorldSet(n, true);
    case Formula::Kind::Atom: {
      auto idx = m_.vars().find(f.var().str());
      if (!idx) throw FitnessError("formula mentions undefined variable " + f.var().str());
      WorldSet out(n);
      auto words = out.words();
      parallel_for(n, jobs_, [&](std::size_t begin, std::size_t end) {
        for (std::size_t w = begin; w < end; ++w)
          if (m_.value(static_cast<WorldId>(w), *idx)) words[w >> 6] |= std::uint64_t{1} << (w & 63);
      });
      return out;
    }
    case Formula::Kind::Not: {
      WorldSet out = sat(f.operand());
      out.flip();
      return out;
    }
    case Formula::Kind::And: {
      WorldSet out = sat(f.lhs());
      out &= sat(f.rhs());
      return out;
    }
    case Formula::Kind::Knows: {
      auto agent = m_.agent_index(f.agent());
      if (!agent) throw FitnessError("formula mentions unknown agent " + f.agent());
      const auto& body = sat(f.operand());
      const auto& part = m_.partition(*agent);
      std::vector<char> all_true(part.num_classes, 1);
      for (std::size_t w = 0; w < n; ++w)
        if (!body.test(w)) all_true[part.class_of[w]] = 0;
      WorldSet out(n);
      auto words = out.words();
      parallel_for(n, jobs_, [&](std::size_t begin, std::size_t end) {
        for (std::size_t w = begin; w < end; ++w)
          if (all_true[part.class_of[w]]) words[w >> 6] |= std::uint64_t{1} << (w & 63);
      });
      return out;
    }
  }
  return WorldSet(n);
}

bool eval_at(const KripkeStructure& m, WorldId w, const Formula& f) {
  if (w >= m.num_worlds()) throw PreconditionError("world index out of range");
  check_fit(m, f);
  Evaluator ev(m);
  return ev.at(w, f);
}

Validity valid(const KripkeStructure& m, const Formula& f, unsigned jobs) {
  check_fit(m, f);
  Evaluator ev(m, jobs);
  const auto& s = ev.sat(f);
  Validity v;
  if (auto miss = s.first_unset()) {
    v.valid = false;
    v.counterexample = static_cast<WorldId>(*miss);
  }
  return v;
}

}  // namespace epimc
