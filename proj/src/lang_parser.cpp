#include <algorithm>

#include "epimc/dc.hpp"
#include "epimc/error.hpp"
#include "epimc/lang.hpp"
#include "syntax.hpp"

namespace epimc {

namespace {

using syntax::Parser;
using syntax::Tok;

std::string agent_name(Parser& p) { return p.expect(Tok::Ident, "agent name").text; }

AtomicAction parse_atomic(Parser& p, const MacroContext* ctx) {
  const auto start = p.peek();
  std::string agent = agent_name(p);
  p.expect(Tok::Colon, "':' after agent");
  syntax::LowerOptions opt{ctx, agent, false};

  if ((p.at_word("rand") || p.at_word("broadcast")) && p.at(Tok::LParen, 1)) {
    bool is_rand = p.next().text == "rand";
    p.next();
    auto var_tok = p.peek();
    VarName v = p.variable();
    p.expect(Tok::RParen, "')'");
    if (v.qualified() && v.agent != agent)
      Parser::fail_at(var_tok, "agent " + agent + " may only " + (is_rand ? "randomise" : "broadcast") +
                                   " its own variables");
    v = v.qualified_as(agent);
    if (is_rand) return Rand{agent, v};
    return Broadcast{agent, v};
  }

  // Try `x := e` first, then `e -> j.x`.
  const auto mark = p.position();
  if (p.at(Tok::Ident)) {
    auto var_tok = p.peek();
    try {
      VarName target = p.variable();
      if (p.accept(Tok::Assign)) {
        if (target.qualified() && target.agent != agent)
          Parser::fail_at(var_tok, "agent " + agent + " may only assign its own variables");
        auto e = syntax::lower_expression(*p.expression(), opt);
        return Assign{agent, target.qualified_as(agent), e};
      }
    } catch (const ParseError&) {
      // not an assignment target; reparse as an expression below
    }
  }
  p.rewind(mark);
  auto e = syntax::lower_expression(*p.expression(), opt);
  if (!p.at(Tok::Arrow)) p.fail("expected ':=' or '->' in action of agent " + agent);
  p.next();
  auto target_tok = p.peek();
  VarName target = p.variable();
  if (!target.qualified()) Parser::fail_at(target_tok, "send target must be written receiver.variable");
  (void)start;
  return Send{agent, e, target};
}

JointAction parse_step(Parser& p, const MacroContext* ctx) {
  auto open = p.peek();
  p.expect(Tok::LBrace, "'{'");
  JointAction a;
  while (!p.at(Tok::RBrace)) {
    auto at = p.peek();
    auto act = parse_atomic(p, ctx);
    try {
      a.add(std::move(act));
    } catch (const PreconditionError& e) {
      Parser::fail_at(at, e.what());
    }
    if (!p.accept(Tok::Semi)) break;
  }
  p.expect(Tok::RBrace, "'}' or ';'");
  (void)open;
  return a;
}

std::vector<Assertion> parse_assertions(Parser& p, const MacroContext* ctx) {
  p.expect_word("assert");
  std::vector<Assertion> out;
  do {
    auto from = p.position();
    auto tree = p.expression();
    auto text = p.slice(from, p.position());
    out.push_back(Assertion{text, syntax::lower_formula(*tree, {ctx, "", false})});
  } while (p.accept(Tok::Comma));
  p.accept(Tok::Semi);
  return out;
}

/// `ring:N`, `complete:N` or `file:"path"`.
KeyGraph parse_graph(Parser& p) {
  auto kind = p.expect(Tok::Ident, "graph kind").text;
  p.expect(Tok::Colon, "':' in graph");
  std::string arg;
  if (p.at(Tok::String))
    arg = p.next().text;
  else
    arg = p.expect(Tok::Ident, "graph argument").text;
  try {
    return KeyGraph::from_spec(kind + ":" + arg);
  } catch (const Error& e) {
    p.fail(e.what());
  }
}

/// `dc <t> <graph> msg <expr>` / `dca <t> agents a b c msg <expr>`.
Program parse_dc_directive(Parser& p, const MacroContext* ctx) {
  bool abstract = p.next().text == "dca";
  auto t_tok = p.peek();
  int t = static_cast<int>(p.integer());
  if (t < 1) Parser::fail_at(t_tok, "instance index must be positive");
  std::vector<std::string> agents;
  std::optional<KeyGraph> g;
  if (abstract) {
    p.expect_word("agents");
    while (p.at(Tok::Ident) && !p.at_word("msg")) agents.push_back(p.next().text);
  } else {
    g = parse_graph(p);
    agents = g->agents();
  }
  p.expect_word("msg");
  auto tree = p.expression();
  p.accept(Tok::Semi);
  std::map<std::string, Expression> msgs;
  for (const auto& a : agents) msgs.emplace(a, syntax::lower_expression(*tree, {ctx, a, false}));
  return abstract ? build_dc_abstract(agents, msgs, t) : build_dc(*g, msgs, t);
}

void parse_body(Parser& p, const MacroContext* ctx, Program& prog) {
  while (!p.at(Tok::End)) {
    if (p.at_word("step")) {
      p.next();
      prog.add_step(parse_step(p, ctx));
    } else if (p.at_word("checkpoint")) {
      p.next();
      auto label = p.expect(Tok::String, "checkpoint label").text;
      prog.add_checkpoint(label, parse_assertions(p, ctx));
    } else if (p.at_word("dc") || p.at_word("dca")) {
      prog.append(parse_dc_directive(p, ctx));
    } else {
      p.fail("expected 'step', 'checkpoint', 'dc' or 'dca'");
    }
  }
}

}  // namespace

Program parse_program(std::string_view text, const MacroContext* ctx) {
  Parser p(text);
  Program prog;
  parse_body(p, ctx, prog);
  return prog;
}

ProgramFile parse_program_file(std::string_view text, const MacroContext* ctx) {
  Parser p(text);
  ProgramFile f;
  std::vector<std::vector<std::pair<std::string, bool>>> worlds;
  while (true) {
    if (p.at_word("agents")) {
      p.next();
      while (p.at(Tok::Ident)) f.agents.push_back(p.next().text);
      p.expect(Tok::Semi, "';' after agents");
    } else if (p.at_word("var")) {
      p.next();
      while (p.at(Tok::Ident)) {
        auto tok = p.peek();
        auto v = p.variable();
        if (!v.qualified()) Parser::fail_at(tok, "declared variables must be qualified");
        f.vars.push_back(v.str());
      }
      p.expect(Tok::Semi, "';' after var");
    } else if (p.at_word("world")) {
      p.next();
      std::vector<std::pair<std::string, bool>> w;
      while (p.at(Tok::Ident)) {
        auto v = p.variable().str();
        p.expect(Tok::Equals, "'=' in world");
        auto bit = p.peek();
        auto val = p.integer();
        if (val != 0 && val != 1) Parser::fail_at(bit, "world values are 0 or 1");
        w.emplace_back(v, val == 1);
      }
      p.expect(Tok::Semi, "';' after world");
      worlds.push_back(std::move(w));
    } else if (p.at_word("observe")) {
      p.next();
      auto agent = agent_name(p);
      p.expect(Tok::Colon, "':' after agent");
      auto& obs = f.observe[agent];
      while (p.at(Tok::Ident)) obs.push_back(p.variable().str());
      p.expect(Tok::Semi, "';' after observe");
    } else {
      break;
    }
  }
  for (const auto& w : worlds) {
    World row(f.vars.size());
    for (const auto& [name, val] : w) {
      auto it = std::find(f.vars.begin(), f.vars.end(), name);
      if (it == f.vars.end()) throw ParseError("world mentions undeclared variable " + name, 1, 1);
      row.set(static_cast<std::size_t>(it - f.vars.begin()), val);
    }
    f.worlds.push_back(std::move(row));
  }
  parse_body(p, ctx, f.program);
  return f;
}

KripkeStructure ProgramFile::initial_structure() const {
  std::vector<std::string> ags = agents;
  for (const auto& v : vars) {
    std::string owner(owner_of(v));
    if (std::find(ags.begin(), ags.end(), owner) == ags.end()) ags.push_back(owner);
  }
  for (const auto& a : program.agents())
    if (std::find(ags.begin(), ags.end(), a) == ags.end()) ags.push_back(a);
  std::map<std::string, std::vector<std::string>> obs;
  for (const auto& a : ags) {
    if (auto it = observe.find(a); it != observe.end()) {
      obs[a] = it->second;
      continue;
    }
    auto& o = obs[a];
    for (const auto& v : vars)
      if (owner_of(v) == a) o.push_back(v);
  }
  std::vector<World> rows = worlds;
  if (rows.empty()) {
    if (vars.size() > 24) throw ResourceError("too many variables to enumerate all assignments");
    for (std::size_t k = 0; k < (std::size_t{1} << vars.size()); ++k) {
      World w(vars.size());
      for (std::size_t b = 0; b < vars.size(); ++b) w.set(b, (k >> b) & 1u);
      rows.push_back(std::move(w));
    }
  }
  return build_structure(ags, vars, rows, obs, BuildOptions{false});
}

}  // namespace epimc
