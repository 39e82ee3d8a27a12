#include "doctest.h"
#include "epimc/twophase.hpp"

using namespace epimc;

TEST_CASE("final candidates for n=5, abstract") {
  for (auto s : {Strength::Strong, Strength::Weak}) {
    CAPTURE(to_string(s));
    auto rep = check_implementation(5, final_candidate(5, s), s, Mode::Abstract, {.budget_seconds = 3600});
    CHECK(rep.passed());
    CHECK(rep.world_counts.back() == 248832);
  }
}
