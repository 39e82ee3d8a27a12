#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "epimc/bisim.hpp"
#include "epimc/cli.hpp"
#include "epimc/dc.hpp"
#include "epimc/error.hpp"
#include "epimc/formula.hpp"
#include "epimc/json_io.hpp"
#include "epimc/lang.hpp"
#include "epimc/twophase.hpp"

namespace py = pybind11;
using namespace epimc;

namespace {

Formula formula_arg(const std::string& text, std::optional<int> n) {
  if (!n) return parse_formula(text);
  auto ctx = MacroContext::for_agents(*n);
  return parse_formula(text, &ctx);
}

CandidateImpl candidate_arg(const std::string& which, int n, Strength strength) {
  if (which == "final") return final_candidate(n, strength);
  if (which == "initial") return initial_candidate(n);
  return parse_candidate(which, n);
}

std::set<std::string> spec_set(const std::vector<std::string>& specs) { return {specs.begin(), specs.end()}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Explicit-state epistemic model checking for DC-based protocols";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<FitnessError>(m, "FitnessError", base.ptr());
  py::register_exception<EnablednessError>(m, "EnablednessError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<ResourceError>(m, "ResourceError", base.ptr());

  py::class_<KripkeStructure>(m, "Structure")
      .def_property_readonly("agents", &KripkeStructure::agents)
      .def_property_readonly("vars", [](const KripkeStructure& s) { return s.vars().names(); })
      .def_property_readonly("num_worlds", &KripkeStructure::num_worlds)
      .def("value", [](const KripkeStructure& s, WorldId w, const std::string& var) { return s.value(w, var); })
      .def("class_of",
           [](const KripkeStructure& s, const std::string& agent, WorldId w) {
             return s.class_of(s.require_agent(agent), w);
           })
      .def("classes", [](const KripkeStructure& s, const std::string& agent) { return classes_of(s, agent); })
      .def("world_hex", &world_to_hex)
      .def("to_json", [](const KripkeStructure& s) { return to_json(s).dump(); })
      .def_static("from_json", [](const std::string& text) { return structure_from_json(Json::parse(text)); })
      .def("__len__", &KripkeStructure::num_worlds);

  m.def("full_structure", &full_structure, py::arg("agents"), py::arg("vars"));
  m.def("message_structure", [](const std::vector<std::string>& agents) { return message_structure(agents); });
  m.def("payer_structure", [](const std::vector<std::string>& agents) { return payer_structure(agents); });

  m.def(
      "parse_formula", [](const std::string& text, std::optional<int> n) { return to_string(formula_arg(text, n)); },
      py::arg("text"), py::arg("n") = py::none(), "Parse and macro-expand a formula; returns its canonical text.");
  m.def(
      "valid",
      [](const KripkeStructure& s, const std::string& text, std::optional<int> n, unsigned jobs) {
        auto v = valid(s, formula_arg(text, n), jobs);
        return std::make_pair(v.valid, v.counterexample);
      },
      py::arg("structure"), py::arg("formula"), py::arg("n") = py::none(), py::arg("jobs") = 1,
      "Returns (valid, least counterexample world or None).");
  m.def(
      "sat",
      [](const KripkeStructure& s, const std::string& text, std::optional<int> n) {
        Evaluator ev(s);
        const auto& set = ev.sat(formula_arg(text, n));
        std::vector<WorldId> out;
        for (WorldId w = 0; w < s.num_worlds(); ++w)
          if (set.test(w)) out.push_back(w);
        return out;
      },
      py::arg("structure"), py::arg("formula"), py::arg("n") = py::none());

  py::class_<KeyGraph>(m, "KeyGraph")
      .def_static("ring", &KeyGraph::ring)
      .def_static("complete", &KeyGraph::complete)
      .def_static("from_spec", &KeyGraph::from_spec)
      .def_property_readonly("agents", &KeyGraph::agents)
      .def_property_readonly("edges",
                             [](const KeyGraph& g) {
                               std::vector<std::pair<std::size_t, std::size_t>> out;
                               for (const auto& e : g.edges()) out.emplace_back(e.source, e.target);
                               return out;
                             })
      .def("__str__", &KeyGraph::describe);

  m.def(
      "dc_round",
      [](const KeyGraph& g, const KripkeStructure& s, const std::string& mode, unsigned jobs) {
        auto msgs = own_messages(g.agents());
        auto p = parse_mode(mode) == Mode::Concrete ? build_dc(g, msgs, 1) : build_dc_abstract(g.agents(), msgs, 1);
        RunOptions ro;
        ro.jobs = jobs;
        return run(s, p, ro).structure;
      },
      py::arg("graph"), py::arg("structure"), py::arg("mode") = "concrete", py::arg("jobs") = 1,
      "Runs one DC round over messages <agent>.m of the given structure.");
  m.def(
      "bisimulation",
      [](const KripkeStructure& a, const KripkeStructure& b, const std::vector<std::string>& vars,
         const std::vector<std::string>& agents) {
        auto rel = greatest_bisimulation(a, b, vars, agents);
        py::dict d;
        d["pairs"] = rel.pairs();
        d["left_total"] = rel.left_total();
        d["right_total"] = rel.right_total();
        d["bisimilar"] = rel.total();
        return d;
      },
      py::arg("left"), py::arg("right"), py::arg("vars"), py::arg("agents"));
  m.def("find_key_completion", &find_key_completion, py::arg("graph"), py::arg("agent"), py::arg("kappa"),
        py::arg("mu"), py::arg("mu2"));
  m.def("verify_key_completion", &verify_key_completion, py::arg("graph"), py::arg("agent"), py::arg("kappa"),
        py::arg("mu"), py::arg("mu2"), py::arg("lam"));

  m.def(
      "run_program",
      [](const std::string& text, int n, unsigned jobs) {
        auto ctx = MacroContext::for_agents(n);
        auto file = parse_program_file(text, &ctx);
        RunOptions ro;
        ro.jobs = jobs;
        auto res = run(file.initial_structure(), file.program, ro);
        Json j = Json::array();
        for (const auto& c : res.checkpoints) j.push_back(to_json(c));
        return std::make_tuple(res.passed(), res.world_counts, j.dump());
      },
      py::arg("text"), py::arg("n") = 3, py::arg("jobs") = 1,
      "Runs a program file; returns (passed, world counts, checkpoint report JSON).");

  m.def(
      "check_implementation",
      [](int n, const std::string& candidate, const std::string& strength, const std::string& mode, int rounds,
         const std::vector<std::string>& specs, unsigned jobs, std::optional<double> budget) {
        const auto st = parse_strength(strength);
        CheckOptions opt;
        opt.rounds = rounds;
        opt.specs = spec_set(specs);
        opt.jobs = jobs;
        opt.budget_seconds = budget;
        py::gil_scoped_release release;
        return to_json(check_implementation(n, candidate_arg(candidate, n, st), st, parse_mode(mode), opt)).dump();
      },
      py::arg("n"), py::arg("candidate") = "final", py::arg("strength") = "strong", py::arg("mode") = "abstract",
      py::arg("rounds") = 0, py::arg("specs") = std::vector<std::string>{}, py::arg("jobs") = 1,
      py::arg("budget") = py::none(),
      "Checks a two-phase implementation; candidate is 'final', 'initial' or candidate JSON text. Returns report JSON.");
  m.def("initial_world", &initial_world, py::arg("n"), py::arg("slot_requests"), py::arg("messages"));

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "epimc");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
        return std::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
