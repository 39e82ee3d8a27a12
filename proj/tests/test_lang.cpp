#include "doctest.h"
#include "epimc/error.hpp"
#include "epimc/lang.hpp"

using namespace epimc;

namespace {

Expression E(const std::string& v) { return Expression::var(VarName::parse(v)); }

}  // namespace

TEST_SUITE("lang") {
  TEST_CASE("broadcast enables a read: enabledness and observability update") {
    ObservabilityMap ov{{"i", {}}, {"j", {"j.y"}}};
    JointAction assign({Assign{"i", VarName("i", "x"), E("j.y")}});
    JointAction bcast({Broadcast{"j", VarName("j", "y")}});

    auto r1 = enabled_at_ov(assign, ov);
    CHECK_FALSE(r1.enabled);
    CHECK(r1.condition == 2);
    CHECK(enabled_at_ov(bcast, ov).enabled);

    auto ov2 = apply_ov(ov, bcast);
    CHECK(ov2 == ObservabilityMap{{"i", {"j.y"}}, {"j", {"j.y"}}});
    CHECK(enabled_at_ov(assign, ov2).enabled);

    auto p = parse_program("step { j: broadcast(y); } step { i: x := j.y; }");
    REQUIRE(p.length() == 2);
    auto m = full_structure({"i", "j"}, {"j.y"});
    auto se = enabled_at_structure(p, m);
    CHECK(se.report.enabled);
    CHECK(se.ov.at("i") == std::set<std::string>{"i.x", "j.y"});

    auto q = parse_program("step { i: x := j.y; }");
    auto bad = enabled_at_structure(q, m);
    CHECK_FALSE(bad.report.enabled);
    CHECK(bad.report.step == 0);
  }

  TEST_CASE("enabledness conditions 1 and 3") {
    ObservabilityMap ov{{"i", {"i.x"}}, {"j", {"j.y"}}};
    // writes an observed variable
    auto w = enabled_at_ov(JointAction({Rand{"i", VarName("i", "x")}}), ov);
    CHECK_FALSE(w.enabled);
    CHECK(w.condition == 1);
    auto s = enabled_at_ov(JointAction({Send{"i", E("i.x"), VarName("j", "y")}}), ov);
    CHECK(s.condition == 1);
    // broadcasting a variable the agent cannot read, or another agent's variable
    auto b = enabled_at_ov(JointAction({Broadcast{"i", VarName("i", "z")}}), ov);
    CHECK(b.condition == 3);
    auto b2 = enabled_at_ov(JointAction({Broadcast{"i", VarName("j", "y")}}), {{"i", {"j.y"}}});
    CHECK(b2.condition == 3);
    CHECK_THROWS_AS(JointAction({Rand{"i", VarName("i", "q")}, Assign{"i", VarName("i", "q"), Expression::constant(true)}}),
                    PreconditionError);
  }

  TEST_CASE("step semantics: rand doubles worlds, send refines the receiver") {
    auto m = full_structure({"1", "2"}, {"1.m"});
    auto ov = canonical_ov(m);
    auto r = step(m, ov, JointAction({Rand{"1", VarName("1", "k")}}));
    CHECK(r.structure.num_worlds() == 4);
    CHECK(r.structure.partition(0).num_classes == 4);
    CHECK(r.structure.partition(1).num_classes == 1);
    // world = base * 2 + key bit
    CHECK(r.structure.value(3, "1.m"));
    CHECK(r.structure.value(3, "1.k"));
    CHECK_FALSE(r.structure.value(2, "1.k"));
    auto s = step(r.structure, r.ov, JointAction({Send{"1", E("1.k"), VarName("2", "k")}}));
    CHECK(s.structure.partition(1).num_classes == 2);
    CHECK(s.ov.at("2").count("2.k") == 1);
    auto t = step(s.structure, s.ov,
                  JointAction({Assign{"2", VarName("2", "z"), Expression::exclusive_or(E("2.k"), Expression::constant(true))}}));
    for (WorldId w = 0; w < 4; ++w) CHECK(t.structure.value(w, "2.z") != t.structure.value(w, "2.k"));
    StepOptions tiny;
    tiny.max_worlds = 3;
    CHECK_THROWS_AS(step(m, ov, JointAction({Rand{"1", VarName("1", "k")}}), tiny), ResourceError);
  }

  TEST_CASE("run checks assertions at checkpoints") {
    auto file = parse_program_file(R"(
      agents 1 2;
      var 1.m 2.m;
      step { 1: rand(k); }
      step { 1: k -> 2.k; }
      step { 2: b := m ^ k; 1: c := m ^ k; }
      step { 2: broadcast(b); 1: broadcast(c); }
      checkpoint "shared" assert K[1] 1.k | K[1] !1.k, K[2] 1.m | K[2] !1.m, K[1] 2.m;
    )");
    auto res = run(file.initial_structure(), file.program);
    REQUIRE(res.checkpoints.size() == 1);
    const auto& c = res.checkpoints[0];
    CHECK(c.results[0].valid);
    CHECK(c.results[1].valid);
    // 1 learns 2.m exactly but does not know it is 1 when it is 0
    CHECK_FALSE(c.results[2].valid);
    CHECK(c.results[2].counterexample == WorldId{0});
    CHECK(res.world_counts == std::vector<std::size_t>{4, 8, 8, 8, 8});
  }

  TEST_CASE("program parser errors") {
    CHECK_THROWS_AS(parse_program("step { 1: x := ; }"), ParseError);
    CHECK_THROWS_AS(parse_program("step { 1: rand(x) 2: rand(y); }"), ParseError);
    CHECK_THROWS_AS(parse_program("checkpoint x assert 1.a"), ParseError);
    CHECK_NOTHROW(parse_program("step { 1: rand(x) } checkpoint \"x\" assert 1.x"));
    CHECK_THROWS_AS(parse_program("step { 1: x := 1.a; 2: 1.x := 2.a; }"), ParseError);
    CHECK_THROWS_AS(run(full_structure({"1"}, {"1.a"}), parse_program("step { 1: x := 2.z; }")), EnablednessError);
  }

  TEST_CASE("budget exhaustion is a resource error") {
    auto m = full_structure({"1"}, {"1.a"});
    Program p;
    for (int k = 0; k < 12; ++k) p.add_step(JointAction({Rand{"1", VarName("1", "k", k)}}));
    RunOptions ro;
    ro.budget_seconds = 1e-9;
    CHECK_THROWS_AS(run(m, p, ro), ResourceError);
  }
}
