#include "epimc/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "epimc/bisim.hpp"
#include "epimc/dc.hpp"
#include "epimc/error.hpp"
#include "epimc/json_io.hpp"
#include "epimc/lang.hpp"

namespace epimc::cli {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read " + path, 1, 1);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

KeyGraph graph_of(const RunConfig& cfg) {
  return KeyGraph::from_spec(cfg.graph.empty() ? "ring:" + std::to_string(cfg.n) : cfg.graph);
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void print_checkpoint(std::ostream& out, const CheckpointReport& c, const KripkeStructure& m) {
  out << "checkpoint \"" << c.label << "\" after step " << c.position << ": " << (c.passed() ? "pass" : "FAIL")
      << "\n";
  for (const auto& r : c.results) {
    out << "  " << (r.valid ? "valid  " : "INVALID") << "  " << r.text;
    if (r.counterexample) {
      out << "  (counterexample world " << *r.counterexample;
      if (*r.counterexample < m.num_worlds()) out << " = 0x" << world_to_hex(m, *r.counterexample);
      out << ")";
    }
    out << "\n";
  }
}

/// Runs the program and reports; each checkpoint is rendered against the
/// structure it was evaluated on.
int report_run(const KripkeStructure& m0, const Program& p, const RunConfig& cfg, std::ostream& out,
               const std::string& title) {
  RunOptions ro;
  ro.jobs = cfg.jobs;
  ro.budget_seconds = cfg.budget;
  std::vector<KripkeStructure> at_checkpoint;
  ro.on_checkpoint = [&](const Checkpoint&, const KripkeStructure& m) { at_checkpoint.push_back(m); };
  auto res = run(m0, p, ro);
  if (cfg.json) {
    Json j;
    j["program"] = title;
    j["steps"] = p.length();
    j["world_counts"] = res.world_counts;
    Json cps = Json::array();
    for (const auto& c : res.checkpoints) cps.push_back(to_json(c));
    j["checkpoints"] = std::move(cps);
    j["passed"] = res.passed();
    out << j.dump(2) << "\n";
  } else {
    out << title << ": " << p.length() << " steps, worlds " << res.world_counts.front() << " -> "
        << res.world_counts.back() << "\n";
    for (std::size_t k = 0; k < res.checkpoints.size(); ++k) print_checkpoint(out, res.checkpoints[k], at_checkpoint[k]);
    out << (res.passed() ? "all checkpoints pass" : "some checkpoints FAIL") << "\n";
  }
  return res.passed() ? kPass : kSpecFailure;
}

std::set<std::string> spec_filter(const std::string& spec) {
  if (spec == "all") return {};
  static const std::set<std::string> known{"1", "2", "3", "4", "cf"};
  if (!known.contains(spec)) throw ParseError("--spec must be one of 1, 2, 3, 4, cf, all", 1, 1);
  return {spec};
}

CandidateImpl candidate_of(const RunConfig& cfg) {
  if (cfg.candidate == "final") return final_candidate(cfg.n, cfg.strength);
  if (cfg.candidate == "initial") return initial_candidate(cfg.n);
  if (cfg.candidate.rfind("file:", 0) == 0) return parse_candidate(read_file(cfg.candidate.substr(5)), cfg.n);
  throw ParseError("--candidate must be initial, final or file:PATH", 1, 1);
}

// One line per world: inputs and set flags per agent, then the shared round
// results (every agent holds an identical copy).
std::string view_text(const std::map<std::string, int>& view) {
  std::map<std::string, std::vector<std::string>> by_agent;
  std::map<int, int> rr;
  for (const auto& [k, v] : view) {
    auto name = VarName::parse(k);
    if (name.base == "rr") {
      rr.emplace(name.index.value_or(0), v);
    } else if (name.base == "slot_request" || name.base == "message" || v != 0) {
      by_agent[name.agent].push_back(name.base + (name.index ? "[" + std::to_string(*name.index) + "]" : "") +
                                     "=" + std::to_string(v));
    }
  }
  std::string s;
  for (const auto& [a, items] : by_agent) {
    s += a + "{";
    for (std::size_t k = 0; k < items.size(); ++k) s += (k ? " " : "") + items[k];
    s += "} ";
  }
  s += "rr=";
  for (const auto& [_, v] : rr) s += std::to_string(v);
  return s;
}

}  // namespace

int cmd_check(const RunConfig& cfg, std::ostream& out) {
  auto ctx = MacroContext::for_agents(cfg.n);
  auto file = parse_program_file(read_file(cfg.file), &ctx);
  return report_run(file.initial_structure(), file.program, cfg, out, cfg.file);
}

int cmd_bisim(const RunConfig& cfg, std::ostream& out) {
  auto g = graph_of(cfg);
  const auto& agents = g.agents();
  auto m = message_structure(agents);
  auto msgs = own_messages(agents);
  auto concrete = build_dc(g, msgs, 1);
  if (cfg.broken) {
    if (g.edges().empty()) throw PreconditionError("--broken needs a graph with at least one edge");
    // The receiver of the first key draws its own bit instead of the shared one.
    const auto& e = g.edges().front();
    JointAction share;
    bool skipped = false;
    for (const auto& a : concrete.steps[1].actions()) {
      if (!skipped && std::holds_alternative<Send>(a)) {
        skipped = true;
        continue;
      }
      share.add(a);
    }
    share.add(Rand{agents[e.target], key_var(agents[e.target], e, 1)});
    concrete.steps[1] = std::move(share);
  }
  auto abstract = build_dc_abstract(agents, msgs, 1);
  RunOptions ro;
  ro.jobs = cfg.jobs;
  ro.budget_seconds = cfg.budget;
  ro.evaluate_checkpoints = false;
  auto mc = run(m, concrete, ro).structure;
  auto ma = run(m, abstract, ro).structure;

  std::vector<std::string> vars = m.vars().names();
  for (const auto& a : agents) vars.push_back(round_result_var(a, 1).str());
  BisimStats stats;
  auto rel = greatest_bisimulation(mc, ma, vars, agents, &stats);
  auto violation = verify_bisimulation(mc, ma, rel);
  if (violation) throw Error("internal: computed relation fails " + violation->condition + " check");
  const bool ok = rel.total();
  if (cfg.json) {
    Json j;
    j["graph"] = g.describe();
    j["broken"] = cfg.broken;
    j["concrete_worlds"] = mc.num_worlds();
    j["abstract_worlds"] = ma.num_worlds();
    j["rounds"] = stats.rounds;
    j["relation"] = to_json(rel);
    j["bisimilar"] = ok;
    out << j.dump(2) << "\n";
  } else {
    out << "graph: " << g.describe() << (cfg.broken ? " (first key not shared)" : "") << "\n";
    out << "concrete worlds: " << mc.num_worlds() << ", abstract worlds: " << ma.num_worlds() << "\n";
    out << "relation: " << rel.size() << " pairs after " << stats.rounds << " rounds (" << stats.removed_pairs
        << " removed), left total: " << (rel.left_total() ? "yes" : "no")
        << ", right total: " << (rel.right_total() ? "yes" : "no") << "\n";
    if (!ok) {
      for (WorldId w = 0; w < mc.num_worlds(); ++w) {
        auto row = rel.row(w);
        if (std::all_of(row.begin(), row.end(), [](auto x) { return x == 0; })) {
          out << "unmatched concrete world " << w << " = 0x" << world_to_hex(mc, w) << "\n";
          break;
        }
      }
    }
    out << (ok ? "bisimilar" : "NOT bisimilar") << "\n";
  }
  return ok ? kPass : kSpecFailure;
}

int cmd_dc(const RunConfig& cfg, std::ostream& out) {
  auto g = graph_of(cfg);
  const auto& agents = g.agents();
  auto m = payer_structure(agents);
  auto msgs = own_messages(agents);
  Program p = cfg.mode == Mode::Concrete ? build_dc(g, msgs, 1) : build_dc_abstract(agents, msgs, 1);

  std::vector<Assertion> asserts;
  std::vector<Formula> all_m;
  for (const auto& a : agents) all_m.push_back(Formula::atom(VarName(a, "m")));
  auto parity = Formula::atom(VarName(agents.front(), "m"));
  for (std::size_t k = 1; k < agents.size(); ++k) parity = lxor(parity, all_m[k]);
  for (const auto& a : agents) {
    auto rr = Formula::atom(round_result_var(a, 1));
    asserts.push_back({a + ".rr[1] <=> xor of all messages", iff(rr, parity)});
  }
  for (std::size_t i = 0; i < agents.size(); ++i) {
    std::vector<Formula> others;
    for (std::size_t j = 0; j < agents.size(); ++j)
      if (j != i) others.push_back(all_m[j]);
    auto someone = any_of(others);
    asserts.push_back({"!" + agents[i] + ".m => " + agents[i] + " knows whether another agent paid",
                       implies(lnot(all_m[i]), knows_whether(agents[i], someone))});
    for (std::size_t j = 0; j < agents.size(); ++j) {
      if (j == i) continue;
      asserts.push_back({"!" + agents[i] + ".m & " + agents[j] + ".m => !K[" + agents[i] + "] " + agents[j] + ".m",
                         implies(land(lnot(all_m[i]), all_m[j]), lnot(Formula::knows(agents[i], all_m[j])))});
    }
  }
  p.add_checkpoint("end", std::move(asserts));
  return report_run(m, p, cfg, out, (cfg.mode == Mode::Concrete ? "DC " : "DC^a ") + g.describe());
}

int cmd_twophase(const RunConfig& cfg, std::ostream& out) {
  auto cand = candidate_of(cfg);
  CheckOptions opt;
  opt.rounds = cfg.rounds;
  opt.specs = spec_filter(cfg.spec);
  opt.jobs = cfg.jobs;
  opt.budget_seconds = cfg.budget;
  auto rep = check_implementation(cfg.n, cand, cfg.strength, cfg.mode, opt);
  if (cfg.json) {
    out << to_json(rep).dump(2) << "\n";
  } else {
    out << "two-phase n=" << rep.n << " " << to_string(rep.mode) << " " << to_string(rep.strength)
        << " candidate=" << rep.candidate << " rounds=" << rep.rounds << "\n";
    out << "worlds: " << rep.world_counts.front() << " -> " << rep.world_counts.back() << " over "
        << rep.world_counts.size() - 1 << " steps\n";
    out << std::left << std::setw(6) << "spec" << std::setw(7) << "agent" << std::setw(6) << "slot" << std::setw(12)
        << "checkpoint" << "verdict\n";
    for (const auto& e : rep.entries) {
      out << std::setw(6) << e.spec << std::setw(7) << e.agent << std::setw(6) << (e.slot ? std::to_string(e.slot) : "-")
          << std::setw(12) << e.checkpoint << (e.passed ? "pass" : "FAIL") << "\n";
      if (!e.passed) {
        out << "    witness world " << *e.witness << ": " << view_text(e.witness_view) << "\n";
        if (e.related)
          out << "    agent " << e.agent << " cannot rule out world " << *e.related << ": " << view_text(e.related_view)
              << "\n";
      }
    }
    out << std::right;
    out << "timings: build " << fixed(rep.build_seconds) << "s, run " << fixed(rep.run_seconds) << "s";
    for (const auto& [spec, t] : rep.check_seconds) out << ", spec " << spec << " " << fixed(t) << "s";
    out << "\n";
    out << "summary: " << rep.entries.size() - rep.failures() << "/" << rep.entries.size() << " checks pass\n";
  }
  return rep.passed() ? kPass : kSpecFailure;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
  const int n = cfg.n;
  const int max_r = cfg.rounds ? cfg.rounds : std::min(2 * n, 4);
  if (max_r < 1 || max_r > 2 * n) throw ParseError("--rounds must be within 1.." + std::to_string(2 * n), 1, 1);
  auto cand = candidate_of(cfg);
  const auto specs = cfg.spec == "all" ? std::set<std::string>{"4"} : spec_filter(cfg.spec);
  const std::size_t edges = KeyGraph::ring(n).edges().size();
  const std::size_t base = build_initial(n).structure.num_worlds();

  struct Cell {
    bool done = false;
    double seconds = 0;
    std::size_t worlds = 0;
    std::size_t peak = 0;
    std::optional<SpecReport> report;
  };
  struct Row {
    int r;
    Cell concrete, abstract;
  };
  std::vector<Row> rows;
  bool law_ok = true, verdicts_ok = true;
  for (int r = 1; r <= max_r; ++r) {
    Row row{r, {}, {}};
    for (Mode mode : {Mode::Concrete, Mode::Abstract}) {
      Cell& cell = mode == Mode::Concrete ? row.concrete : row.abstract;
      CheckOptions opt;
      opt.rounds = r;
      opt.specs = specs;
      opt.jobs = cfg.jobs;
      opt.budget_seconds = cfg.budget;
      try {
        auto rep = check_implementation(n, cand, cfg.strength, mode, opt);
        cell.done = true;
        cell.seconds = rep.build_seconds + rep.run_seconds;
        for (const auto& [_, t] : rep.check_seconds) cell.seconds += t;
        cell.worlds = rep.world_counts.back();
        cell.peak = *std::max_element(rep.world_counts.begin(), rep.world_counts.end());
        const std::size_t expected =
            mode == Mode::Abstract ? base : base << (edges * static_cast<std::size_t>(r));
        if (cell.worlds != expected) law_ok = false;
        cell.report = std::move(rep);
      } catch (const ResourceError&) {
        cell.done = false;
      }
    }
    if (row.concrete.report && row.abstract.report && !row.concrete.report->same_verdicts(*row.abstract.report))
      verdicts_ok = false;
    rows.push_back(std::move(row));
  }

  auto speedup = [](const Row& row) -> std::optional<double> {
    if (!row.concrete.done || !row.abstract.done) return std::nullopt;
    return row.concrete.seconds / std::max(row.abstract.seconds, 1e-6);
  };
  if (cfg.json) {
    Json j;
    j["n"] = n;
    j["strength"] = to_string(cfg.strength);
    j["candidate"] = cand.name;
    j["specs"] = std::vector<std::string>(specs.begin(), specs.end());
    Json arr = Json::array();
    for (const auto& row : rows) {
      auto cell_json = [](const Cell& c) {
        Json x;
        x["completed"] = c.done;
        x["seconds"] = c.done ? Json(c.seconds) : Json(nullptr);
        x["worlds"] = c.done ? Json(c.worlds) : Json(nullptr);
        x["passed"] = c.report ? Json(c.report->passed()) : Json(nullptr);
        x["world_counts"] = c.report ? Json(c.report->world_counts) : Json(nullptr);
        return x;
      };
      Json x{{"rounds", row.r}};
      x["concrete"] = cell_json(row.concrete);
      x["abstract"] = cell_json(row.abstract);
      auto s = speedup(row);
      x["speedup"] = s ? Json(*s) : Json(nullptr);
      arr.push_back(std::move(x));
    }
    j["rows"] = std::move(arr);
    j["growth_law_holds"] = law_ok;
    j["verdicts_agree"] = verdicts_ok;
    out << j.dump(2) << "\n";
  } else {
    out << "bench n=" << n << " specs=";
    for (const auto& s : specs) out << s << ' ';
    out << "candidate=" << cand.name << " (seconds; x = budget exceeded)\n";
    out << std::setw(6) << "rounds" << std::setw(12) << "concrete" << std::setw(12) << "worlds" << std::setw(12)
        << "abstract" << std::setw(12) << "worlds" << std::setw(10) << "speedup" << "\n";
    for (const auto& row : rows) {
      auto t = [&](const Cell& c) { return c.done ? fixed(c.seconds) : std::string("x"); };
      auto w = [&](const Cell& c) { return c.done ? std::to_string(c.worlds) : std::string("x"); };
      auto s = speedup(row);
      out << std::setw(6) << row.r << std::setw(12) << t(row.concrete) << std::setw(12) << w(row.concrete)
          << std::setw(12) << t(row.abstract) << std::setw(12) << w(row.abstract) << std::setw(10)
          << (s ? fixed(*s, 1) + "x" : std::string("-")) << "\n";
    }
    out << "growth law: " << (law_ok ? "holds" : "VIOLATED") << "; verdicts: "
        << (verdicts_ok ? "concrete and abstract agree" : "DISAGREE") << "\n";
  }
  return law_ok && verdicts_ok ? kPass : kSpecFailure;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explicit-state epistemic model checker for DC-based protocols", "epimc"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string mode = "abstract", strength = "strong";
  double budget = 0;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--n", cfg.n, "number of agents")->check(CLI::Range(1, 8));
    sub->add_option("--graph", cfg.graph, "ring:N | complete:N | file:PATH");
    sub->add_option("--mode", mode, "concrete | abstract")->check(CLI::IsMember({"concrete", "abstract"}));
    sub->add_option("--strength", strength, "strong | weak")->check(CLI::IsMember({"strong", "weak"}));
    sub->add_option("--candidate", cfg.candidate, "initial | final | file:PATH");
    sub->add_option("--rounds", cfg.rounds, "truncate after R DC rounds")->check(CLI::NonNegativeNumber);
    sub->add_option("--spec", cfg.spec, "1 | 2 | 3 | 4 | cf | all")
        ->check(CLI::IsMember({"1", "2", "3", "4", "cf", "all"}));
    sub->add_flag("--json", cfg.json, "machine-readable output");
    sub->add_option("--jobs", cfg.jobs, "worker threads")->check(CLI::Range(1u, 256u));
    sub->add_option("--budget", budget, "wall-clock budget in seconds")->check(CLI::PositiveNumber);
  };
  auto* check = app.add_subcommand("check", "run a program file and check its assertions");
  check->add_option("file", cfg.file, "program file")->required();
  auto* bisim = app.add_subcommand("bisim", "compare DC and its abstraction by bisimulation");
  bisim->add_flag("--broken", cfg.broken, "withhold the first key share");
  auto* dc = app.add_subcommand("dc", "run one DC round on the payer structure");
  auto* twophase = app.add_subcommand("twophase", "check a two-phase implementation");
  auto* bench = app.add_subcommand("bench", "concrete vs abstract timing sweep");
  for (auto* sub : {check, bisim, dc, twophase, bench}) common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kPass;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  cfg.mode = parse_mode(mode);
  cfg.strength = parse_strength(strength);
  if (budget > 0) cfg.budget = budget;
  cfg.command = app.get_subcommands().front()->get_name();

  try {
    if (cfg.command == "check") return cmd_check(cfg, out);
    if (cfg.command == "bisim") return cmd_bisim(cfg, out);
    if (cfg.command == "dc") return cmd_dc(cfg, out);
    if (cfg.command == "twophase") return cmd_twophase(cfg, out);
    return cmd_bench(cfg, out);
  } catch (const ResourceError& e) {
    err << "resource limit: " << e.what() << "\n";
    return kResource;
  } catch (const std::bad_alloc&) {
    err << "resource limit: out of memory\n";
    return kResource;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace epimc::cli
