#include "doctest.h"
#include "epimc/error.hpp"
#include "epimc/json_io.hpp"
#include "epimc/twophase.hpp"
#include "oracles.hpp"
#include "twophase_util.hpp"

using namespace epimc;

namespace {

Formula FM(const std::string& text, int n, Strength s = Strength::Strong) {
  auto ctx = MacroContext::for_agents(n, s);
  return parse_formula(text, &ctx);
}

}  // namespace

TEST_SUITE("twophase") {
  TEST_CASE("initial structure") {
    auto s3 = build_initial(3);
    CHECK(s3.structure.num_worlds() == 512);
    CHECK(build_initial(4).structure.num_worlds() == 10000);
    for (const auto& a : s3.ctx.agents)
      for (const auto& cls : classes_of(s3.structure, a)) CHECK(cls.size() == 512 / 8);
    // every slot request value is in range
    for (WorldId w = 0; w < 512; ++w)
      for (const auto& a : s3.ctx.agents) CHECK(tp::slot_of(s3.structure, s3.ctx, a, w) <= 3);
    auto w = initial_world(3, {2, 0, 3}, {true, false, true});
    CHECK(tp::slot_of(s3.structure, s3.ctx, "1", w) == 2);
    CHECK(tp::slot_of(s3.structure, s3.ctx, "3", w) == 3);
    CHECK(tp::message_of(s3.structure, s3.ctx, "3", w));
    CHECK_FALSE(tp::message_of(s3.structure, s3.ctx, "2", w));
    CHECK_THROWS_AS(build_initial(1), PreconditionError);
  }

  TEST_CASE("final candidate expressions") {
    auto c = final_candidate(3, Strength::Strong);
    REQUIRE(c.kc.size() == 3);
    CHECK(c.kc[1].qualified("1").to_formula() == FM("!(1.slot_request == 2 & !1.rr[2])", 3));
    auto w = final_candidate(3, Strength::Weak);
    std::set<std::string> inputs{"2.slot_request_b0", "2.slot_request_b1", "2.message"};
    for (int t = 1; t <= 6; ++t) inputs.insert("2.rr[" + std::to_string(t) + "]");
    CHECK(atoms_of(w.dlvrd.qualified("2").to_formula()) == inputs);
    auto init = initial_candidate(3);
    CHECK(init.kc[0] == Expression::constant(false));
  }

  TEST_CASE("weak dlvrd means what it says") {
    // semantic check: evaluate the candidate on every valuation of its inputs
    auto w = final_candidate(3, Strength::Weak).dlvrd.qualified("1");
    std::vector<std::string> vars{"1.slot_request_b0", "1.slot_request_b1", "1.message"};
    for (int t = 1; t <= 6; ++t) vars.push_back("1.rr[" + std::to_string(t) + "]");
    auto m = full_structure({"1"}, vars);
    auto ctx = MacroContext::for_agents(3);
    Evaluator ev(m);
    for (WorldId x = 0; x < m.num_worlds(); ++x) {
      bool want = false;
      const bool msg = m.value(x, "1.message");
      for (int s = 1; s <= 3; ++s) want = want || (tp::rr_of(m, "1", s, x) && tp::rr_of(m, "1", 3 + s, x) == msg);
      want = want && tp::slot_of(m, ctx, "1", x) != 0;
      CHECK(ev.at(x, w.to_formula()) == want);
    }
  }

  TEST_CASE("spec formula shapes") {
    auto ctx = MacroContext::for_agents(3);
    auto s1 = spec_formula(ctx, "1", "2", 1);
    CHECK(s1.knowledge_operand);
    auto s4 = spec_formula(ctx, "4", "1");
    CHECK(agents_of(s4.formula) == std::set<std::string>{"1"});
    auto strong = spec_formula(ctx, "3", "1");
    auto wctx = MacroContext::for_agents(3, Strength::Weak);
    auto weak = spec_formula(wctx, "3", "1");
    CHECK_FALSE(strong.formula == weak.formula);
    CHECK(atoms_of(strong.formula) == atoms_of(weak.formula));
    CHECK_THROWS_AS(spec_formula(ctx, "1", "1", 4), PreconditionError);
    CHECK_THROWS_AS(spec_formula(ctx, "5", "1"), PreconditionError);
  }

  TEST_CASE("program shape") {
    auto c = final_candidate(3, Strength::Strong);
    auto concrete = build_program(3, c, Mode::Concrete, Strength::Strong);
    auto abstract = build_program(3, c, Mode::Abstract, Strength::Strong);
    CHECK(concrete.program.instances.size() == 6);
    CHECK(abstract.program.instances.size() == 6);
    // 6 rounds of 5 steps, 3 kc steps and the final assignment
    CHECK(concrete.program.length() == 6 * 5 + 3 + 1);
    CHECK(abstract.program.length() == 6 * 4 + 3 + 1);
    CHECK(concrete.program.checkpoints.size() == 4);
    CHECK(build_program(3, c, Mode::Abstract, Strength::Strong, 2).program.checkpoints.size() == 1);
  }

  TEST_CASE("final candidates pass for n=3") {
    for (auto s : {Strength::Strong, Strength::Weak}) {
      auto rep = check_implementation(3, final_candidate(3, s), s, Mode::Abstract);
      CHECK(rep.passed());
      CHECK(rep.entries.size() == 3 * 3 + 3 * 4 + 9);
      CHECK(rep.world_counts.back() == 512);
    }
  }

  TEST_CASE("initial candidate fails spec 1 with a checkable witness") {
    auto run = run_two_phase(3, initial_candidate(3), Strength::Strong, Mode::Abstract, {.specs = {"1"}});
    const auto& m = run.result.structure;
    const auto& ctx = run.setup.ctx;
    CHECK_FALSE(run.report.passed());
    for (const auto& e : run.report.entries) {
      if (e.passed) continue;
      REQUIRE(e.witness);
      const auto w = *e.witness;
      CHECK_FALSE(m.value(w, e.agent + ".kc[" + std::to_string(e.slot) + "]"));
      Evaluator ev(m);
      CHECK(ev.at(w, lnot(Formula::knows(e.agent, expand_conflict(e.slot, ctx)))));
      REQUIRE(e.related);
      CHECK(m.class_of(m.require_agent(e.agent), w) == m.class_of(m.require_agent(e.agent), *e.related));
      CHECK_FALSE(ev.at(*e.related, expand_conflict(e.slot, ctx)));
    }
    // the least witness has nobody requesting anything
    const auto& first = *std::find_if(run.report.entries.begin(), run.report.entries.end(),
                                      [](const SpecEntry& e) { return !e.passed; });
    for (const auto& a : ctx.agents) CHECK(tp::slot_of(m, ctx, a, *first.witness) != first.slot);
  }

  TEST_CASE("round results are the xor of the round messages") {
    auto run = run_two_phase(3, final_candidate(3, Strength::Strong), Strength::Strong, Mode::Abstract);
    const auto& m = run.result.structure;
    const auto& ctx = run.setup.ctx;
    for (WorldId w = 0; w < m.num_worlds(); ++w) {
      for (int s = 1; s <= 3; ++s) {
        bool res = false, tx = false;
        for (const auto& a : ctx.agents) res = res != (tp::slot_of(m, ctx, a, w) == s);
        for (const auto& a : ctx.agents) {
          const bool kc = !(tp::slot_of(m, ctx, a, w) == s && !res);
          tx = tx != (tp::slot_of(m, ctx, a, w) == s && kc && tp::message_of(m, ctx, a, w));
        }
        for (const auto& a : ctx.agents) {
          CHECK(tp::rr_of(m, a, s, w) == res);
          CHECK(tp::rr_of(m, a, 3 + s, w) == tx);
        }
      }
    }
  }

  TEST_CASE("figure 5 scenario") {
    auto run = run_two_phase(4, final_candidate(4, Strength::Strong), Strength::Strong, Mode::Abstract);
    const auto& m = run.result.structure;
    const auto& ctx = run.setup.ctx;
    auto a = tp::find_world(m, ctx, {4, 3, 1, 3}, {true, false, true, false});
    CHECK(a == initial_world(4, {4, 3, 1, 3}, {true, false, true, false}));
    const std::vector<bool> rows{true, false, false, true};
    for (int t = 1; t <= 4; ++t) {
      CHECK(tp::rr_of(m, "1", t, a) == rows[t - 1]);
      CHECK(tp::rr_of(m, "1", 4 + t, a) == rows[t - 1]);
    }
    Evaluator ev(m);
    CHECK(ev.at(a, FM("K[2] !conflict(1)", 4)));
    CHECK(ev.at(a, FM("K[2] !conflict(4)", 4)));
    CHECK_FALSE(ev.at(a, FM("K[1] !conflict(4)", 4)));
    // the scenario agent 1 cannot rule out
    auto b = tp::find_world(m, ctx, {4, 1, 1, 1}, {true, true, true, true});
    CHECK(m.class_of(0, a) == m.class_of(0, b));
    CHECK(ev.at(b, FM("conflict(4)", 4)) == false);
    CHECK(ev.at(b, FM("conflict(1)", 4)));
    // a world agent 1 cannot rule out that does have a conflict on slot 4
    bool found = false;
    for (WorldId v = 0; v < m.num_worlds() && !found; ++v)
      found = m.class_of(0, v) == m.class_of(0, a) && ev.at(v, FM("conflict(4)", 4));
    CHECK(found);
  }

  TEST_CASE("knowledge of conflict freedom only grows") {
    auto setup = build_initial(3);
    auto prog = build_program(3, final_candidate(3, Strength::Strong), Mode::Abstract, Strength::Strong);
    std::vector<std::vector<bool>> sets;
    RunOptions ro;
    ro.evaluate_checkpoints = false;
    ro.on_checkpoint = [&](const Checkpoint&, const KripkeStructure& m) {
      Evaluator ev(m);
      std::vector<bool> row;
      for (const auto& a : setup.ctx.agents)
        for (int s = 1; s <= 3; ++s) {
          const auto& set = ev.sat(Formula::knows(a, lnot(expand_conflict(s, setup.ctx))));
          for (WorldId w = 0; w < m.num_worlds(); ++w) row.push_back(set.test(w));
        }
      sets.push_back(std::move(row));
    };
    run(setup.structure, prog.program, ro);
    REQUIRE(sets.size() == 4);
    for (std::size_t k = 1; k < sets.size(); ++k)
      for (std::size_t x = 0; x < sets[k].size(); ++x)
        if (sets[k - 1][x]) CHECK(sets[k][x]);
  }

  TEST_CASE("weak variant: undelivered requesters know they were not delivered") {
    auto run = run_two_phase(3, final_candidate(3, Strength::Weak), Strength::Weak, Mode::Abstract);
    auto ctx = MacroContext::for_agents(3, Strength::Weak);
    for (const auto& a : ctx.agents)
      for (bool x : {false, true}) {
        auto msg = Formula::atom(ctx.message_var(a));
        auto f = implies(land(x ? msg : lnot(msg), lnot(slot_request_equals(a, 0, ctx))),
                         Formula::knows(a, expand_sender(a, x, ctx)));
        CHECK(valid(run.result.structure, f).valid);
      }
  }

  TEST_CASE("perfect recall after every step") {
    for (auto mode : {Mode::Abstract, Mode::Concrete}) {
      auto setup = build_initial(3);
      auto prog = build_program(3, final_candidate(3, Strength::Strong), mode, Strength::Strong,
                                mode == Mode::Concrete ? 1 : 0);
      RunOptions ro;
      ro.evaluate_checkpoints = false;
      std::size_t steps = 0, bad = 0;
      ro.on_step = [&](std::size_t, const KripkeStructure& prev, const KripkeStructure& next) {
        ++steps;
        if (!tp::refines(prev, next)) ++bad;
      };
      run(setup.structure, prog.program, ro);
      CHECK(steps == prog.program.length());
      CHECK(bad == 0);
    }
  }

  TEST_CASE("concrete and abstract agree on truncated runs") {
    auto c = final_candidate(3, Strength::Strong);
    for (int r = 1; r <= 2; ++r) {
      auto conc = check_implementation(3, c, Strength::Strong, Mode::Concrete, {.rounds = r});
      auto abs = check_implementation(3, c, Strength::Strong, Mode::Abstract, {.rounds = r});
      CHECK(conc.same_verdicts(abs));
      CHECK(conc.world_counts.back() == (std::size_t{512} << (3 * r)));
      CHECK(abs.world_counts.back() == 512);
    }
  }

  TEST_CASE("results do not depend on the worker count") {
    auto c = final_candidate(3, Strength::Strong);
    auto one = check_implementation(3, c, Strength::Strong, Mode::Concrete, {.rounds = 2, .jobs = 1});
    auto three = check_implementation(3, c, Strength::Strong, Mode::Concrete, {.rounds = 2, .jobs = 3});
    CHECK(one.same_verdicts(three));
    auto r1 = run_two_phase(3, initial_candidate(3), Strength::Strong, Mode::Abstract, {.jobs = 1});
    auto r3 = run_two_phase(3, initial_candidate(3), Strength::Strong, Mode::Abstract, {.jobs = 3});
    CHECK(r1.report.entries == r3.report.entries);
    CHECK(r1.result.structure.partition(0) == r3.result.structure.partition(0));
  }

  TEST_CASE("candidate files") {
    auto c = parse_candidate(R"J({"kc": "!(slot_request == {s} & !rr[{s}])", "rcvd0": "false", "rcvd1": "false",
                                 "dlvrd": "false"})J",
                             3);
    CHECK(c.kc.size() == 3);
    auto rep = check_implementation(3, c, Strength::Strong, Mode::Abstract, {.specs = {"1"}});
    CHECK(rep.passed());
    CHECK_THROWS_AS(parse_candidate("{", 3), ParseError);
    CHECK_THROWS_AS(parse_candidate(R"({"kc": "slot_request =="})", 3), ParseError);
    // reading another agent's private variable is rejected by enabledness
    auto peek = parse_candidate(R"({"kc": "2.message", "rcvd0": "false", "rcvd1": "false", "dlvrd": "false"})", 3);
    CHECK_THROWS_AS(check_implementation(3, peek, Strength::Strong, Mode::Abstract), EnablednessError);
  }

  TEST_CASE("report json round-trips") {
    auto rep = check_implementation(3, initial_candidate(3), Strength::Weak, Mode::Abstract);
    auto back = spec_report_from_json(to_json(rep));
    CHECK(back.same_verdicts(rep));
    CHECK(back.entries == rep.entries);
    CHECK_THROWS_AS(spec_report_from_json(Json::parse("{\"n\": \"x\"}")), ParseError);
  }
}
