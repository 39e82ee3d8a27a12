#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "epimc/kripke.hpp"
#include "epimc/lang.hpp"

namespace epimc {

/// The trusted third party of the abstract protocol.
inline constexpr std::string_view kThirdParty = "T";

/// Directed key-sharing graph; the source of an edge generates its key.
class KeyGraph {
 public:
  struct Edge {
    std::size_t source = 0;
    std::size_t target = 0;
    std::string name;  // unique key variable base, e.g. k_1_2
  };

  KeyGraph() = default;
  KeyGraph(std::vector<std::string> agents, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

  static KeyGraph ring(int n);
  static KeyGraph complete(int n);
  /// "ring:N", "complete:N", or "file:PATH" (JSON {agents, edges}).
  static KeyGraph from_spec(std::string_view spec);
  static KeyGraph from_json(std::string_view json_text);

  const std::vector<std::string>& agents() const { return agents_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t agent_index(std::string_view agent) const;  // throws PreconditionError

  std::vector<std::size_t> out_edges(std::size_t agent) const;
  std::vector<std::size_t> in_edges(std::size_t agent) const;
  /// Edges incident on the agent (in and out).
  std::vector<std::size_t> keys(std::size_t agent) const;

  std::string describe() const;

 private:
  std::vector<std::string> agents_;
  std::vector<Edge> edges_;
};

/// edge index -> key bit
using KeyAssignment = std::vector<bool>;
/// agent index -> message bit
using MessageAssignment = std::vector<bool>;

/// Instance-t variable names.
VarName key_var(const std::string& owner, const KeyGraph::Edge& e, int t);
VarName broadcast_var(const std::string& agent, int t);
VarName round_result_var(const std::string& agent, int t);
VarName third_party_input_var(const std::string& agent, int t);
VarName third_party_output_var(int t);

/// The five-step DC round over g. `messages` maps each agent to its message
/// expression (bare names refer to the agent's own variables).
Program build_dc(const KeyGraph& g, const std::map<std::string, Expression>& messages, int t);

/// The four-step trusted-third-party round.
Program build_dc_abstract(const std::vector<std::string>& agents, const std::map<std::string, Expression>& messages,
                          int t);

/// Replaces every concrete DC round of p by its abstract counterpart; the
/// segments in between are kept verbatim. Throws PreconditionError when a
/// segment or message reads a key or broadcast variable of any round.
Program abstract_program(const Program& p);

/// xor of the agents' messages evaluated at a world.
bool xor_of_messages(const KripkeStructure& m, const std::map<std::string, Expression>& messages, WorldId w);

/// Closed form of ~_i after DC^a: u ~_i v in M and equal message xor.
bool char_sim_dca(const KripkeStructure& m, const std::map<std::string, Expression>& messages, WorldId u,
                  WorldId v, std::string_view agent);

struct KeyedWorld {
  WorldId base = 0;
  KeyAssignment keys;
};

/// Closed form of ~_i after DC: base worlds related, equal keys on edges at
/// i, and equal announced bit for every agent.
bool char_sim_dc(const KripkeStructure& m, const KeyGraph& g, const std::map<std::string, Expression>& messages,
                 const KeyedWorld& u, const KeyedWorld& v, std::string_view agent);

/// Keys agreeing with kappa on the edges at `agent` under which every agent
/// announces under mu2 what it announced under (mu, kappa). Requires equal
/// message xor and mu[agent] == mu2[agent]; returns nullopt when a component
/// of the graph without the agent's edges has odd flip demand.
std::optional<KeyAssignment> find_key_completion(const KeyGraph& g, std::size_t agent, const KeyAssignment& kappa,
                                                 const MessageAssignment& mu, const MessageAssignment& mu2);

/// Direct check of the two completion equations.
bool verify_key_completion(const KeyGraph& g, std::size_t agent, const KeyAssignment& kappa,
                           const MessageAssignment& mu, const MessageAssignment& mu2, const KeyAssignment& lambda);

/// All 2^n message assignments; agent i observes i.<base>.
KripkeStructure message_structure(const std::vector<std::string>& agents, const std::string& base = "m");
/// One world per possible payer plus one where nobody pays.
KripkeStructure payer_structure(const std::vector<std::string>& agents, const std::string& base = "m");

/// Per-agent message expression `<base>` (bare).
std::map<std::string, Expression> own_messages(const std::vector<std::string>& agents, const std::string& base = "m");

}  // namespace epimc
