#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "epimc/bisim.hpp"
#include "epimc/cli.hpp"
#include "epimc/dc.hpp"
#include "epimc/error.hpp"
#include "epimc/json_io.hpp"
#include "epimc/lang.hpp"

using namespace epimc;

namespace {

struct Out {
  int code;
  std::string out, err;
};

Out call(std::vector<std::string> args) {
  args.insert(args.begin(), "epimc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string temp_file(const std::string& name, const std::string& text) {
  auto path = std::string(EPIMC_TEST_TMP) + "/" + name;
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 2") {
    CHECK(call({}).code == cli::kUsage);
    CHECK(call({"frobnicate"}).code == cli::kUsage);
    CHECK(call({"twophase", "--n", "0"}).code == cli::kUsage);
    CHECK(call({"twophase", "--mode", "sideways"}).code == cli::kUsage);
    CHECK(call({"twophase", "--spec", "7"}).code == cli::kUsage);
    CHECK(call({"twophase", "--candidate", "nonsense"}).code == cli::kUsage);
    CHECK(call({"bisim", "--graph", "star:3"}).code == cli::kUsage);
    CHECK(call({"check", "/no/such/file"}).code == cli::kUsage);
    CHECK(call({"--help"}).code == cli::kPass);
  }

  TEST_CASE("twophase verdicts map to exit codes") {
    auto pass = call({"twophase", "--n", "3", "--json"});
    CHECK(pass.code == cli::kPass);
    auto rep = spec_report_from_json(Json::parse(pass.out));
    CHECK(rep.passed());
    auto fail = call({"twophase", "--n", "3", "--candidate", "initial", "--spec", "1"});
    CHECK(fail.code == cli::kSpecFailure);
    CHECK(fail.out.find("witness world") != std::string::npos);
    auto weak = call({"twophase", "--n", "3", "--strength", "weak", "--spec", "3"});
    CHECK(weak.code == cli::kPass);
  }

  TEST_CASE("resource exhaustion exits with 3") {
    auto r = call({"twophase", "--n", "3", "--mode", "concrete", "--rounds", "4", "--budget", "0.001"});
    CHECK(r.code == cli::kResource);
  }

  TEST_CASE("bisim and dc") {
    auto b = call({"bisim", "--n", "3", "--json"});
    CHECK(b.code == cli::kPass);
    auto j = Json::parse(b.out);
    CHECK(j["bisimilar"] == true);
    CHECK(j["concrete_worlds"] == 64);
    CHECK(call({"bisim", "--n", "3", "--broken"}).code == cli::kSpecFailure);
    CHECK(call({"bisim", "--graph", "complete:4"}).code == cli::kPass);
    CHECK(call({"dc", "--n", "3"}).code == cli::kPass);
    CHECK(call({"dc", "--n", "3", "--mode", "concrete"}).code == cli::kPass);
    // with two participants each payer is identified by the other
    CHECK(call({"dc", "--n", "2"}).code == cli::kSpecFailure);
    auto triangle =
        temp_file("triangle.json", R"({"agents": ["a", "b", "c"], "edges": [["a", "b"], ["a", "c"], ["b", "c"]]})");
    CHECK(call({"bisim", "--graph", "file:" + triangle}).code == cli::kPass);
    // removing a splits the path, so a learns b's message from b's announcement
    auto path = temp_file("path.json", R"({"agents": ["a", "b", "c"], "edges": [["a", "b"], ["a", "c"]]})");
    CHECK(call({"bisim", "--graph", "file:" + path}).code == cli::kSpecFailure);
  }

  TEST_CASE("check runs program files") {
    auto ok = temp_file("ok.epi", R"(
      agents 1 2;
      var 1.m;
      step { 1: broadcast(m); }
      checkpoint "seen" assert K[2] 1.m | K[2] !1.m;
    )");
    CHECK(call({"check", ok}).code == cli::kPass);
    auto json = call({"check", ok, "--json"});
    CHECK(Json::parse(json.out)["passed"] == true);
    auto bad = temp_file("bad.epi", R"(
      agents 1 2;
      var 1.m;
      checkpoint "blind" assert K[2] 1.m | K[2] !1.m;
    )");
    CHECK(call({"check", bad}).code == cli::kSpecFailure);
    auto syntax = temp_file("syntax.epi", "step { 1: rand( }");
    CHECK(call({"check", syntax}).code == cli::kUsage);
    auto dc = temp_file("dc.epi", R"(
      agents 1 2 3;
      var 1.m 2.m 3.m;
      dc 1 ring:3 msg m;
      checkpoint "parity" assert 1.rr[1] <=> (1.m <=> (2.m <=> 3.m));
    )");
    CHECK(call({"check", dc}).code == cli::kPass);
  }

  TEST_CASE("bench prints the growth law") {
    auto r = call({"bench", "--n", "3", "--rounds", "2", "--json"});
    CHECK(r.code == cli::kPass);
    auto j = Json::parse(r.out);
    CHECK(j["growth_law_holds"] == true);
    CHECK(j["rows"][1]["concrete"]["worlds"] == 512 * 64);
    CHECK(j["rows"][1]["abstract"]["worlds"] == 512);
  }
}

TEST_SUITE("json") {
  TEST_CASE("structures round-trip") {
    auto g = KeyGraph::ring(3);
    auto m = run(message_structure(g.agents()), build_dc(g, own_messages(g.agents()), 1)).structure;
    auto back = structure_from_json(to_json(m));
    CHECK(back.agents() == m.agents());
    CHECK(back.vars().names() == m.vars().names());
    REQUIRE(back.num_worlds() == m.num_worlds());
    for (WorldId w = 0; w < m.num_worlds(); ++w) CHECK(world_to_hex(back, w) == world_to_hex(m, w));
    for (std::size_t a = 0; a < m.agents().size(); ++a) CHECK(back.partition(a) == m.partition(a));
    CHECK_THROWS_AS(structure_from_json(Json::parse("[]")), ParseError);
  }

  TEST_CASE("relation dump lists pairs and totality") {
    auto m = full_structure({"1"}, {"1.a"});
    auto rel = greatest_bisimulation(m, m, {"1.a"}, {"1"});
    auto j = to_json(rel);
    CHECK(j["left_total"] == true);
    CHECK(j["right_total"] == true);
    CHECK(j["pairs"].size() == 2);
  }
}
