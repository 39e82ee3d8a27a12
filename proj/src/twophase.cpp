#include "epimc/twophase.hpp"

#include <algorithm>
#include <chrono>

#include "epimc/dc.hpp"
#include "epimc/error.hpp"
#include "json.hpp"
#include "syntax.hpp"

namespace epimc {

std::string to_string(Mode m) { return m == Mode::Concrete ? "concrete" : "abstract"; }
std::string to_string(Strength s) { return s == Strength::Strong ? "strong" : "weak"; }

Mode parse_mode(std::string_view s) {
  if (s == "concrete") return Mode::Concrete;
  if (s == "abstract") return Mode::Abstract;
  throw ParseError("mode must be concrete or abstract, got '" + std::string(s) + "'", 1, 1);
}

Strength parse_strength(std::string_view s) {
  if (s == "strong") return Strength::Strong;
  if (s == "weak") return Strength::Weak;
  throw ParseError("strength must be strong or weak, got '" + std::string(s) + "'", 1, 1);
}

// ---------------------------------------------------------------------------
// Candidates

namespace {

void check_n(int n) {
  if (n < 2) throw PreconditionError("the two-phase protocol needs at least 2 agents");
  if (n > 8) throw PreconditionError("the two-phase protocol is limited to 8 agents");
}

Expression parse_template(std::string text, int n, int s, const MacroContext& ctx) {
  auto replace_all = [&](const std::string& from, const std::string& to) {
    for (std::size_t pos = 0; (pos = text.find(from, pos)) != std::string::npos; pos += to.size())
      text.replace(pos, from.size(), to);
  };
  replace_all("{n+s}", std::to_string(n + s));
  replace_all("{s}", std::to_string(s));
  replace_all("{n}", std::to_string(n));
  syntax::Parser p(text);
  auto tree = p.expression();
  if (!p.at(syntax::Tok::End)) p.fail("unexpected trailing input");
  return syntax::lower_expression(*tree, {&ctx, "", true});
}

std::string join(const std::vector<std::string>& parts, const std::string& op, const std::string& empty) {
  if (parts.empty()) return empty;
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k) out += " " + op + " ";
    out += "(" + parts[k] + ")";
  }
  return out;
}

std::string rr(int t) { return "rr[" + std::to_string(t) + "]"; }
std::string bit(const std::string& var, bool x) { return x ? var : "!" + var; }

}  // namespace

CandidateImpl initial_candidate(int n) {
  check_n(n);
  CandidateImpl c;
  c.name = "initial";
  c.kc.assign(n, Expression::constant(false));
  c.conflict_free.assign(n, Expression::constant(false));
  return c;
}

CandidateImpl final_candidate(int n, Strength strength) {
  check_n(n);
  auto ctx = MacroContext::for_agents(n, strength);
  CandidateImpl c;
  c.name = "final-" + to_string(strength);
  for (int s = 1; s <= n; ++s) {
    c.kc.push_back(parse_template("!(slot_request == {s} & !rr[{s}])", n, s, ctx));

    std::vector<std::string> clash, echo;
    for (int t = 1; t <= n; ++t) {
      if (t == s) continue;
      auto req = "slot_request == " + std::to_string(t);
      clash.push_back(req + " & !" + rr(t));
      echo.push_back(req + " & " + rr(t) + " & (" + rr(n + t) + " != message)");
    }
    const std::string few = n >= 3 ? "(C0 == 2 | C0 == 3)" : "C0 == 2";
    std::string cf = "C0 == 0 | C0 == 1 | (C0 == 2 & slot_request == 0)";
    cf += " | (" + few + " & (" + join(clash, "|", "false") + "))";
    cf += " | (" + few + " & (" + join(echo, "|", "false") + "))";
    c.conflict_free.push_back(parse_template(cf, n, s, ctx));
  }

  std::vector<std::pair<int, int>> slot_pairs;
  for (int s = 1; s <= n; ++s)
    for (int t = s + 1; t <= n; ++t) slot_pairs.emplace_back(s, t);

  for (bool x : {false, true}) {
    std::vector<std::string> parts;
    std::string expr;
    if (strength == Strength::Strong) {
      for (int s = 1; s <= n; ++s) {
        auto req = "slot_request == " + std::to_string(s);
        parts.push_back("(slot_request != " + std::to_string(s) + " & " + rr(s) + " & " + bit(rr(n + s), x) +
                        ") | (" + req + " & " + rr(s) + " & (" + rr(n + s) + " != message))");
      }
      expr = join(parts, "|", "false");
    } else {
      for (int s = 1; s <= n; ++s) parts.push_back(rr(s) + " & " + bit(rr(n + s), x));
      expr = "(slot_request != 0 & " + bit("message", x) + ") | " + join(parts, "|", "false");
    }
    (x ? c.rcvd1 : c.rcvd0) = parse_template(expr, n, 0, ctx);
  }

  if (strength == Strength::Strong) {
    std::vector<std::string> ones, zeros;
    for (auto [s, t] : slot_pairs) {
      ones.push_back(rr(s) + " & " + rr(t) + " & " + rr(n + s) + " & " + rr(n + t));
      zeros.push_back(rr(s) + " & " + rr(t) + " & !" + rr(n + s) + " & !" + rr(n + t));
    }
    std::string d = "(slot_request != 0 & (C0 == 0 | C0 == 1))";
    d += " | (slot_request != 0 & message & (" + join(ones, "|", "false") + "))";
    d += " | (slot_request != 0 & !message & (" + join(zeros, "|", "false") + "))";
    c.dlvrd = parse_template(d, n, 0, ctx);
  } else {
    std::vector<std::string> parts;
    for (int s = 1; s <= n; ++s) parts.push_back(rr(s) + " & (" + rr(n + s) + " == message)");
    c.dlvrd = parse_template("slot_request != 0 & (" + join(parts, "|", "false") + ")", n, 0, ctx);
  }
  return c;
}

CandidateImpl parse_candidate(std::string_view json_text, int n) {
  check_n(n);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("candidate JSON: ") + e.what(), 1, 1);
  }
  if (!j.is_object()) throw ParseError("candidate file must be a JSON object", 1, 1);
  auto ctx = MacroContext::for_agents(n);
  auto text = [&](const nlohmann::json& v, const std::string& key) {
    if (!v.is_string()) throw ParseError("candidate field '" + key + "' must be a string", 1, 1);
    return v.get<std::string>();
  };
  auto one = [&](const std::string& key, int s) {
    try {
      return parse_template(text(j.at(key), key), n, s, ctx);
    } catch (const ParseError& e) {
      throw ParseError("in candidate field '" + key + "': " + e.what(), e.line(), e.column());
    }
  };
  auto per_slot = [&](const std::string& key) {
    std::vector<Expression> out;
    const auto& v = j.at(key);
    if (v.is_array()) {
      if (v.size() != static_cast<std::size_t>(n))
        throw ParseError("candidate field '" + key + "' needs one entry per slot", 1, 1);
      for (int s = 1; s <= n; ++s) {
        try {
          out.push_back(parse_template(text(v[s - 1], key), n, s, ctx));
        } catch (const ParseError& e) {
          throw ParseError("in candidate field '" + key + "': " + e.what(), e.line(), e.column());
        }
      }
    } else {
      for (int s = 1; s <= n; ++s) out.push_back(one(key, s));
    }
    return out;
  };
  for (const char* key : {"kc", "rcvd0", "rcvd1", "dlvrd"})
    if (!j.contains(key)) throw ParseError(std::string("candidate is missing field '") + key + "'", 1, 1);
  CandidateImpl c;
  c.name = j.value("name", std::string("custom"));
  c.kc = per_slot("kc");
  c.rcvd0 = one("rcvd0", 0);
  c.rcvd1 = one("rcvd1", 0);
  c.dlvrd = one("dlvrd", 0);
  if (j.contains("conflict_free")) c.conflict_free = per_slot("conflict_free");
  return c;
}

// ---------------------------------------------------------------------------
// Initial structure

TwoPhaseSetup build_initial(int n) {
  check_n(n);
  TwoPhaseSetup out;
  out.ctx = MacroContext::for_agents(n);
  const auto& ctx = out.ctx;
  std::vector<std::string> vars;
  std::map<std::string, std::vector<std::string>> obs;
  for (const auto& a : ctx.agents) {
    for (int b = 0; b < ctx.width; ++b) vars.push_back(ctx.slot_bit(a, b).str());
    vars.push_back(ctx.message_var(a).str());
    obs[a] = std::vector<std::string>(vars.end() - ctx.width - 1, vars.end());
  }
  const std::size_t digit = 2 * static_cast<std::size_t>(n + 1);
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= digit;
  std::vector<World> worlds;
  worlds.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    World w(vars.size());
    std::size_t rest = code;
    for (int i = 0; i < n; ++i) {
      auto d = rest % digit;
      rest /= digit;
      auto sr = d / 2;
      std::size_t base = static_cast<std::size_t>(i) * (ctx.width + 1);
      for (int b = 0; b < ctx.width; ++b) w.set(base + b, (sr >> b) & 1u);
      w.set(base + ctx.width, d & 1u);
    }
    worlds.push_back(std::move(w));
  }
  out.structure = build_structure(ctx.agents, vars, worlds, obs, BuildOptions{false});
  out.ov = canonical_ov(out.structure);
  return out;
}

WorldId initial_world(int n, const std::vector<int>& slot_requests, const std::vector<bool>& messages) {
  check_n(n);
  if (slot_requests.size() != static_cast<std::size_t>(n) || messages.size() != static_cast<std::size_t>(n))
    throw PreconditionError("need one slot request and one message per agent");
  std::size_t code = 0;
  const std::size_t digit = 2 * static_cast<std::size_t>(n + 1);
  for (int i = n - 1; i >= 0; --i) {
    if (slot_requests[i] < 0 || slot_requests[i] > n) throw PreconditionError("slot request out of range");
    code = code * digit + static_cast<std::size_t>(slot_requests[i]) * 2 + (messages[i] ? 1 : 0);
  }
  return static_cast<WorldId>(code);
}

// ---------------------------------------------------------------------------
// Specifications

SpecFormula spec_formula(const MacroContext& ctx, std::string_view spec, const std::string& agent, int slot) {
  if (std::find(ctx.agents.begin(), ctx.agents.end(), agent) == ctx.agents.end())
    throw PreconditionError("unknown agent " + agent);
  SpecFormula out;
  out.spec = std::string(spec);
  out.agent = agent;
  auto need_slot = [&] {
    if (slot < 1 || slot > ctx.n) throw PreconditionError("slot out of range 1.." + std::to_string(ctx.n));
    out.slot = slot;
  };
  auto own = [&](const std::string& base, std::optional<int> idx = std::nullopt) {
    return Formula::atom(VarName(agent, base, idx));
  };
  std::vector<std::string> others;
  for (const auto& j : ctx.agents)
    if (j != agent) others.push_back(j);

  if (spec == "1") {
    need_slot();
    auto psi = expand_conflict(slot, ctx);
    out.formula = iff(own("kc", slot), lnot(Formula::knows(agent, psi)));
    out.knowledge_operand = psi;
  } else if (spec == "2a" || spec == "2b") {
    bool x = spec == "2b";
    auto psi = expand_sender(agent, x, ctx);
    out.formula = iff(own(x ? "rcvd1" : "rcvd0"), Formula::knows(agent, psi));
    out.knowledge_operand = psi;
  } else if (spec == "3") {
    std::vector<Formula> per_x, operand;
    for (bool x : {false, true}) {
      std::vector<Formula> ks;
      for (const auto& j : others) ks.push_back(Formula::knows(j, expand_sender(j, x, ctx)));
      auto everyone = all_of(ks);
      auto msg = Formula::atom(ctx.message_var(agent));
      auto is_x = x ? msg : lnot(msg);
      per_x.push_back(implies(land(is_x, lnot(slot_request_equals(agent, 0, ctx))), Formula::knows(agent, everyone)));
      operand.push_back(implies(is_x, everyone));
    }
    // Delivery is only claimed for an agent that actually transmits; read
    // literally, the implication would force dlvrd at every silent agent.
    out.formula = iff(own("dlvrd"), land(lnot(slot_request_equals(agent, 0, ctx)), all_of(per_x)));
    // The agent knows its own message, so K_i of this conjunction matches
    // the K_i subformula selected by the actual message.
    out.knowledge_operand = all_of(operand);
  } else if (spec == "4") {
    std::vector<Formula> same, unknown;
    for (bool x : {false, true}) {
      std::vector<Formula> eq;
      for (const auto& j : others) {
        auto m = Formula::atom(ctx.message_var(j));
        eq.push_back(x ? m : lnot(m));
      }
      same.push_back(Formula::knows(agent, all_of(eq)));
    }
    for (const auto& j : others) unknown.push_back(lnot(knows_whether(agent, Formula::atom(ctx.message_var(j)))));
    out.formula = lor(any_of(same), all_of(unknown));
  } else if (spec == "cf") {
    need_slot();
    auto psi = lnot(expand_conflict(slot, ctx));
    out.formula = iff(own("conflict_free", slot), Formula::knows(agent, psi));
    out.knowledge_operand = psi;
  } else {
    throw PreconditionError("unknown specification '" + std::string(spec) + "'");
  }
  return out;
}

namespace {

std::string spec_text(std::string_view spec, const std::string& i, int s) {
  auto S = std::to_string(s);
  if (spec == "1") return i + ".kc[" + S + "] <=> !K[" + i + "] conflict(" + S + ")";
  if (spec == "2a") return i + ".rcvd0 <=> K[" + i + "] sender(" + i + ", 0)";
  if (spec == "2b") return i + ".rcvd1 <=> K[" + i + "] sender(" + i + ", 1)";
  if (spec == "cf") return i + ".conflict_free[" + S + "] <=> K[" + i + "] !conflict(" + S + ")";
  return "spec " + std::string(spec) + " for agent " + i;
}

bool wanted(const std::set<std::string>& specs, const std::string& id) {
  if (specs.empty() || specs.contains("all")) return true;
  if (specs.contains(id)) return true;
  return (id == "2a" || id == "2b") && specs.contains("2");
}

Expression slot_message(const MacroContext& ctx, int s) {
  return Expression::from_formula(slot_request_equals("", s, ctx));
}

}  // namespace

TwoPhaseProgram build_program(int n, const CandidateImpl& cand, Mode mode, Strength strength, int rounds,
                              const std::set<std::string>& specs) {
  check_n(n);
  if (rounds < 0 || rounds > 2 * n) throw PreconditionError("rounds must be within 0.." + std::to_string(2 * n));
  if (cand.kc.size() != static_cast<std::size_t>(n)) throw PreconditionError("candidate needs one kc per slot");
  if (!cand.conflict_free.empty() && cand.conflict_free.size() != static_cast<std::size_t>(n))
    throw PreconditionError("candidate needs one conflict_free per slot");
  for (const auto& s : specs)
    if (s != "1" && s != "2" && s != "2a" && s != "2b" && s != "3" && s != "4" && s != "cf" && s != "all")
      throw PreconditionError("unknown specification '" + s + "'");
  const int r = rounds == 0 ? 2 * n : rounds;

  auto ctx = MacroContext::for_agents(n, strength);
  auto g = KeyGraph::ring(n);
  TwoPhaseProgram out;
  out.rounds = r;
  out.mode = mode;
  Program& p = out.program;

  auto attach = [&](const std::string& label, const std::vector<std::pair<std::string, int>>& items) {
    std::vector<Assertion> asserts;
    std::vector<SpecCheck> checks;
    for (const auto& [id, slot] : items) {
      if (!wanted(specs, id)) continue;
      for (const auto& a : ctx.agents) {
        auto sf = spec_formula(ctx, id, a, slot);
        asserts.push_back(Assertion{spec_text(id, a, slot), sf.formula});
        checks.push_back(SpecCheck{p.checkpoints.size(), std::move(sf)});
      }
    }
    if (asserts.empty()) return;
    p.add_checkpoint(label, std::move(asserts));
    out.checks.insert(out.checks.end(), checks.begin(), checks.end());
  };

  for (int t = 1; t <= std::min(n, r); ++t) {
    std::map<std::string, Expression> msgs;
    for (const auto& a : ctx.agents) msgs.emplace(a, slot_message(ctx, t));
    p.append(build_dc(g, msgs, t));
  }
  for (int s = 1; s <= n && n + s <= r; ++s) {
    JointAction assign;
    for (const auto& a : ctx.agents) assign.add(Assign{a, VarName(a, "kc", s), cand.kc[s - 1].qualified(a)});
    p.add_step(std::move(assign));
    attach("kc[" + std::to_string(s) + "]", {{"1", s}});
    std::map<std::string, Expression> msgs;
    for (const auto& a : ctx.agents)
      msgs.emplace(a, Expression::conjunction(Expression::conjunction(slot_message(ctx, s),
                                                                      Expression::var(VarName("", "kc", s))),
                                              Expression::var(VarName("", "message"))));
    p.append(build_dc(g, msgs, n + s));
  }
  if (r == 2 * n) {
    JointAction fin;
    for (const auto& a : ctx.agents) {
      fin.add(Assign{a, VarName(a, "rcvd0"), cand.rcvd0.qualified(a)});
      fin.add(Assign{a, VarName(a, "rcvd1"), cand.rcvd1.qualified(a)});
      fin.add(Assign{a, VarName(a, "dlvrd"), cand.dlvrd.qualified(a)});
      for (int s = 1; s <= static_cast<int>(cand.conflict_free.size()); ++s)
        fin.add(Assign{a, VarName(a, "conflict_free", s), cand.conflict_free[s - 1].qualified(a)});
    }
    p.add_step(std::move(fin));
    std::vector<std::pair<std::string, int>> items{{"2a", 0}, {"2b", 0}, {"3", 0}, {"4", 0}};
    if (!cand.conflict_free.empty())
      for (int s = 1; s <= n; ++s) items.emplace_back("cf", s);
    attach("end", items);
  } else {
    attach("end", {{"4", 0}});
  }

  if (mode == Mode::Abstract) p = abstract_program(p);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

bool SpecReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

std::size_t SpecReport::failures() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return !e.passed; }));
}

bool SpecReport::same_verdicts(const SpecReport& other) const {
  if (n != other.n || strength != other.strength || rounds != other.rounds || entries.size() != other.entries.size())
    return false;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& a = entries[k];
    const auto& b = other.entries[k];
    if (a.spec != b.spec || a.agent != b.agent || a.slot != b.slot || a.checkpoint != b.checkpoint ||
        a.passed != b.passed)
      return false;
  }
  return true;
}

std::map<std::string, int> describe_world(const KripkeStructure& m, const MacroContext& ctx, WorldId w) {
  std::map<std::string, int> out;
  const std::string prefix = ctx.slot_request + "_b";
  for (std::size_t v = 0; v < m.vars().width(); ++v) {
    const auto& name = m.vars().name(v);
    auto parsed = VarName::parse(name);
    if (parsed.agent == kThirdParty || parsed.base == "b" || parsed.base.rfind("k_", 0) == 0) continue;
    bool val = m.value(w, v);
    if (parsed.base.rfind(prefix, 0) == 0) {
      int b = std::stoi(parsed.base.substr(prefix.size()));
      out[parsed.agent + "." + ctx.slot_request] += (val ? 1 : 0) << b;
      continue;
    }
    out[name] = val ? 1 : 0;
  }
  return out;
}

TwoPhaseRun run_two_phase(int n, const CandidateImpl& cand, Strength strength, Mode mode,
                          const CheckOptions& options) {
  using Clock = std::chrono::steady_clock;
  auto seconds = [](Clock::time_point a) { return std::chrono::duration<double>(Clock::now() - a).count(); };
  auto t0 = Clock::now();
  TwoPhaseRun out;
  out.setup = build_initial(n);
  out.setup.ctx.strength = strength;
  out.program = build_program(n, cand, mode, strength, options.rounds, options.specs);
  auto& rep = out.report;
  rep.n = n;
  rep.mode = mode;
  rep.strength = strength;
  rep.candidate = cand.name;
  rep.rounds = out.program.rounds;
  rep.build_seconds = seconds(t0);

  const auto& prog = out.program.program;
  const auto& ctx = out.setup.ctx;
  double checking = 0;
  RunOptions ro;
  ro.jobs = options.jobs;
  ro.max_worlds = options.max_worlds;
  ro.budget_seconds = options.budget_seconds;
  ro.evaluate_checkpoints = false;
  ro.on_checkpoint = [&](const Checkpoint& cp, const KripkeStructure& m) {
    auto tc = Clock::now();
    const auto idx = static_cast<std::size_t>(&cp - prog.checkpoints.data());
    Evaluator ev(m, options.jobs);
    for (const auto& check : out.program.checks) {
      if (check.checkpoint != idx) continue;
      auto ts = Clock::now();
      const auto& sf = check.spec;
      check_fit(m, sf.formula);
      const auto& sat = ev.sat(sf.formula);
      SpecEntry e;
      e.spec = sf.spec;
      e.agent = sf.agent;
      e.slot = sf.slot;
      e.checkpoint = cp.label;
      e.position = cp.position;
      if (auto miss = sat.first_unset()) {
        e.passed = false;
        auto w = static_cast<WorldId>(*miss);
        e.witness = w;
        e.witness_view = describe_world(m, ctx, w);
        if (sf.knowledge_operand) {
          const auto ai = m.require_agent(sf.agent);
          const auto cls = m.class_of(ai, w);
          const auto& psi = ev.sat(*sf.knowledge_operand);
          std::optional<WorldId> falsifier, other;
          for (WorldId v = 0; v < m.num_worlds() && !falsifier; ++v) {
            if (m.class_of(ai, v) != cls) continue;
            if (!psi.test(v)) falsifier = v;
            else if (!other && v != w) other = v;
          }
          e.related = falsifier ? falsifier : other;
          if (e.related) e.related_view = describe_world(m, ctx, *e.related);
        }
      }
      rep.check_seconds[sf.spec] += seconds(ts);
      rep.entries.push_back(std::move(e));
    }
    checking += seconds(tc);
  };
  auto tr = Clock::now();
  out.result = run(out.setup.structure, prog, ro);
  rep.run_seconds = seconds(tr) - checking;
  rep.world_counts = out.result.world_counts;
  return out;
}

SpecReport check_implementation(int n, const CandidateImpl& cand, Strength strength, Mode mode,
                                const CheckOptions& options) {
  return run_two_phase(n, cand, strength, mode, options).report;
}

}  // namespace epimc
