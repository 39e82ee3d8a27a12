#include <random>

#include "doctest.h"
#include "epimc/error.hpp"
#include "epimc/kripke.hpp"

using namespace epimc;

namespace {

World bits(std::initializer_list<int> values) {
  World w(values.size());
  std::size_t k = 0;
  for (int v : values) w.set(k++, v != 0);
  return w;
}

}  // namespace

TEST_SUITE("kripke") {
  TEST_CASE("partitions are numbered by least member") {
    std::vector<std::uint32_t> labels{7, 3, 7, 9, 3};
    auto p = Partition::from_labels(labels);
    CHECK(p.class_of == std::vector<std::uint32_t>{0, 1, 0, 2, 1});
    CHECK(p.num_classes == 3);
    CHECK(Partition::universal(4).num_classes == 1);
  }

  TEST_CASE("refinement splits by observed bits") {
    auto m = full_structure({"1", "2"}, {"1.x", "1.y", "2.x"});
    CHECK(m.num_worlds() == 8);
    // 1 sees its two bits, 2 sees its one bit
    CHECK(m.partition(0).num_classes == 4);
    CHECK(m.partition(1).num_classes == 2);
    auto cls = classes_of(m, "2");
    CHECK(cls.size() == 2);
    CHECK(cls[0] == std::vector<WorldId>{0, 1, 2, 3});

    // refining a refined partition never merges classes
    std::mt19937_64 rng(3);
    for (int k = 0; k < 50; ++k) {
      std::vector<std::size_t> a{rng() % 3}, b{rng() % 3, rng() % 3};
      auto pa = refine(Partition::universal(8), m.worlds(), a);
      auto pab = refine(pa, m.worlds(), b);
      for (WorldId u = 0; u < 8; ++u)
        for (WorldId v = 0; v < 8; ++v)
          if (pab.class_of[u] == pab.class_of[v]) CHECK(pa.class_of[u] == pa.class_of[v]);
    }
  }

  TEST_CASE("build_structure deduplicates and validates") {
    std::vector<World> ws{bits({0, 1}), bits({0, 1}), bits({1, 1})};
    auto m = build_structure({"1", "2"}, {"1.a", "2.a"}, ws, {{"1", {"1.a"}}});
    CHECK(m.num_worlds() == 2);
    CHECK(m.partition(1).num_classes == 1);  // no observation set: sees nothing
    CHECK(build_structure({"1"}, {"1.a", "2.a"}, ws, {}, {.deduplicate = false}).num_worlds() == 3);
    CHECK_THROWS_AS(build_structure({"1"}, {"1.a", "2.a"}, ws, {{"3", {}}}), PreconditionError);
    CHECK_THROWS_AS(build_structure({"1"}, {"1.a", "2.a"}, ws, {{"1", {"1.q"}}}), PreconditionError);
    CHECK_THROWS_AS(build_structure({"1"}, {"1.a"}, ws, {}), PreconditionError);
    CHECK_THROWS_AS(VariableTable({"1.a", "1.a"}), PreconditionError);
    CHECK_THROWS_AS(m.require_agent("9"), FitnessError);
    CHECK_THROWS_AS(m.value(0, "9.z"), FitnessError);
  }

  TEST_CASE("consistency of an observability map") {
    auto m = full_structure({"1", "2"}, {"1.x", "2.x"});
    CHECK(check_consistent(m, {{"1", {"1.x"}}, {"2", {"2.x"}}}).consistent);
    auto bad = check_consistent(m, {{"1", {"2.x"}}});
    CHECK_FALSE(bad.consistent);
    CHECK(bad.agent == "1");
    CHECK(bad.var == "2.x");
    REQUIRE(bad.first);
    REQUIRE(bad.second);
    CHECK(m.class_of(0, *bad.first) == m.class_of(0, *bad.second));
    CHECK(m.value(*bad.first, "2.x") != m.value(*bad.second, "2.x"));
  }

  TEST_CASE("hex encoding round-trips") {
    auto m = full_structure({"1"}, {"1.a", "1.b", "1.c", "1.d", "1.e"});
    for (WorldId w = 0; w < m.num_worlds(); ++w) {
      auto hex = world_to_hex(m, w);
      CHECK(hex.size() == 2);
      CHECK(world_from_hex(hex, 5) == m.worlds().world(w));
    }
    CHECK(world_to_hex(m, 19) == "13");
    CHECK_THROWS_AS(world_from_hex("zz", 5), PreconditionError);
  }

  TEST_CASE("an added agent sees nothing") {
    auto m = full_structure({"1"}, {"1.a"}).with_agent("T");
    CHECK(m.agents().size() == 2);
    CHECK(m.partition(1).num_classes == 1);
  }
}
