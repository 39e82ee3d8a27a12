#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "epimc/formula.hpp"
#include "epimc/twophase.hpp"

namespace epimc::cli {

enum Exit : int { kPass = 0, kSpecFailure = 1, kUsage = 2, kResource = 3 };

struct RunConfig {
  std::string command;
  int n = 3;
  std::string graph;  // empty: ring:n
  Mode mode = Mode::Abstract;
  Strength strength = Strength::Strong;
  std::string candidate = "final";
  int rounds = 0;
  std::string spec = "all";
  bool json = false;
  unsigned jobs = 1;
  std::optional<double> budget;
  std::string file;     // check: program file
  bool broken = false;  // bisim: withhold one key share
};

int cmd_check(const RunConfig& cfg, std::ostream& out);
int cmd_bisim(const RunConfig& cfg, std::ostream& out);
int cmd_dc(const RunConfig& cfg, std::ostream& out);
int cmd_twophase(const RunConfig& cfg, std::ostream& out);
int cmd_bench(const RunConfig& cfg, std::ostream& out);

/// Parses arguments, dispatches, and maps errors to exit codes.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace epimc::cli
