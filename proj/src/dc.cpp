#include "epimc/dc.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "epimc/error.hpp"
#include "json.hpp"

namespace epimc {

// ---------------------------------------------------------------------------
// Key graphs

KeyGraph::KeyGraph(std::vector<std::string> agents, const std::vector<std::pair<std::size_t, std::size_t>>& edges)
    : agents_(std::move(agents)) {
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (agents_[i].empty()) throw PreconditionError("empty agent name");
    if (agents_[i] == kThirdParty) throw PreconditionError("agent name T is reserved for the third party");
    for (std::size_t j = 0; j < i; ++j)
      if (agents_[i] == agents_[j]) throw PreconditionError("duplicate agent " + agents_[i]);
  }
  std::map<std::string, int> used;
  for (auto [s, t] : edges) {
    if (s >= agents_.size() || t >= agents_.size()) throw PreconditionError("edge endpoint out of range");
    if (s == t) throw PreconditionError("key edge endpoints must be distinct agents");
    std::string name = "k_" + agents_[s] + "_" + agents_[t];
    int copies = used[name]++;
    if (copies > 0) name += "_" + std::to_string(copies + 1);
    edges_.push_back(Edge{s, t, name});
  }
}

namespace {

std::vector<std::string> numbered(int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace

KeyGraph KeyGraph::ring(int n) {
  if (n < 1) throw PreconditionError("ring needs at least one agent");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  if (n == 2) {
    edges.emplace_back(0, 1);
  } else if (n > 2) {
    for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  }
  return KeyGraph(numbered(n), edges);
}

KeyGraph KeyGraph::complete(int n) {
  if (n < 1) throw PreconditionError("complete graph needs at least one agent");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return KeyGraph(numbered(n), edges);
}

KeyGraph KeyGraph::from_json(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("graph JSON: ") + e.what(), 1, 1);
  }
  if (!j.is_object() || !j.contains("agents") || !j.contains("edges"))
    throw ParseError("graph JSON must be an object with 'agents' and 'edges'", 1, 1);
  std::vector<std::string> agents;
  for (const auto& a : j["agents"]) agents.push_back(a.is_string() ? a.get<std::string>() : a.dump());
  auto find = [&](const nlohmann::json& v) {
    std::string name = v.is_string() ? v.get<std::string>() : v.dump();
    auto it = std::find(agents.begin(), agents.end(), name);
    if (it == agents.end()) throw ParseError("graph edge names unknown agent " + name, 1, 1);
    return static_cast<std::size_t>(it - agents.begin());
  };
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& e : j["edges"]) {
    if (!e.is_array() || e.size() != 2) throw ParseError("graph edge must be a [source, target] pair", 1, 1);
    edges.emplace_back(find(e[0]), find(e[1]));
  }
  return KeyGraph(agents, edges);
}

KeyGraph KeyGraph::from_spec(std::string_view spec) {
  auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw ParseError("graph must be ring:N, complete:N or file:PATH", 1, 1);
  auto kind = spec.substr(0, colon);
  std::string arg(spec.substr(colon + 1));
  if (kind == "file") {
    std::ifstream in(arg);
    if (!in) throw ParseError("cannot read graph file " + arg, 1, 1);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
  }
  int n = 0;
  try {
    std::size_t used = 0;
    n = std::stoi(arg, &used);
    if (used != arg.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ParseError("graph size must be an integer: " + std::string(spec), 1, colon + 2);
  }
  if (n < 1) throw ParseError("graph size must be positive", 1, colon + 2);
  if (kind == "ring") return ring(n);
  if (kind == "complete") return complete(n);
  throw ParseError("unknown graph kind " + std::string(kind), 1, 1);
}

std::size_t KeyGraph::agent_index(std::string_view agent) const {
  for (std::size_t i = 0; i < agents_.size(); ++i)
    if (agents_[i] == agent) return i;
  throw PreconditionError("agent " + std::string(agent) + " is not in the key graph");
}

std::vector<std::size_t> KeyGraph::out_edges(std::size_t agent) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges_.size(); ++e)
    if (edges_[e].source == agent) out.push_back(e);
  return out;
}

std::vector<std::size_t> KeyGraph::in_edges(std::size_t agent) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges_.size(); ++e)
    if (edges_[e].target == agent) out.push_back(e);
  return out;
}

std::vector<std::size_t> KeyGraph::keys(std::size_t agent) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges_.size(); ++e)
    if (edges_[e].source == agent || edges_[e].target == agent) out.push_back(e);
  return out;
}

std::string KeyGraph::describe() const {
  std::string out = "agents";
  for (const auto& a : agents_) out += " " + a;
  out += "; edges";
  for (const auto& e : edges_) out += " " + agents_[e.source] + "->" + agents_[e.target];
  return out;
}

// ---------------------------------------------------------------------------
// Names

VarName key_var(const std::string& owner, const KeyGraph::Edge& e, int t) { return VarName(owner, e.name, t); }
VarName broadcast_var(const std::string& agent, int t) { return VarName(agent, "b", t); }
VarName round_result_var(const std::string& agent, int t) { return VarName(agent, "rr", t); }
VarName third_party_input_var(const std::string& agent, int t) {
  return VarName(std::string(kThirdParty), "x_" + agent, t);
}
VarName third_party_output_var(int t) { return VarName(std::string(kThirdParty), "y", t); }

// ---------------------------------------------------------------------------
// Protocol builders

namespace {

Expression message_of(const std::map<std::string, Expression>& messages, const std::string& agent) {
  auto it = messages.find(agent);
  if (it == messages.end()) throw PreconditionError("no message expression for agent " + agent);
  return it->second.qualified(agent);
}

}  // namespace

Program build_dc(const KeyGraph& g, const std::map<std::string, Expression>& messages, int t) {
  const auto& agents = g.agents();
  InstanceMarker marker;
  marker.index = t;
  marker.abstract = false;
  marker.length = 5;
  marker.agents = agents;
  marker.graph = g.describe();
  for (const auto& a : agents) marker.messages.emplace(a, message_of(messages, a));

  JointAction gen, share, mask, announce, combine;
  for (const auto& e : g.edges()) {
    const auto& src = agents[e.source];
    const auto& dst = agents[e.target];
    gen.add(Rand{src, key_var(src, e, t)});
    share.add(Send{src, Expression::var(key_var(src, e, t)), key_var(dst, e, t)});
    marker.internal_vars.push_back(key_var(src, e, t).str());
    marker.internal_vars.push_back(key_var(dst, e, t).str());
  }
  std::vector<Expression> bs;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    std::vector<Expression> parts{marker.messages.at(a)};
    for (auto e : g.keys(i)) parts.push_back(Expression::var(key_var(a, g.edges()[e], t)));
    mask.add(Assign{a, broadcast_var(a, t), Expression::xor_all(parts)});
    announce.add(Broadcast{a, broadcast_var(a, t)});
    bs.push_back(Expression::var(broadcast_var(a, t)));
    marker.internal_vars.push_back(broadcast_var(a, t).str());
  }
  for (const auto& a : agents) combine.add(Assign{a, round_result_var(a, t), Expression::xor_all(bs)});

  Program p;
  p.add_step(std::move(gen));
  p.add_step(std::move(share));
  p.add_step(std::move(mask));
  p.add_step(std::move(announce));
  p.add_step(std::move(combine));
  p.instances.push_back(std::move(marker));
  return p;
}

Program build_dc_abstract(const std::vector<std::string>& agents, const std::map<std::string, Expression>& messages,
                          int t) {
  const std::string T(kThirdParty);
  InstanceMarker marker;
  marker.index = t;
  marker.abstract = true;
  marker.length = 4;
  marker.agents = agents;
  for (const auto& a : agents) {
    if (a == T) throw PreconditionError("agent name T is reserved for the third party");
    marker.messages.emplace(a, message_of(messages, a));
  }

  JointAction upload, compute, publish, receive;
  std::vector<Expression> xs;
  for (const auto& a : agents) {
    upload.add(Send{a, marker.messages.at(a), third_party_input_var(a, t)});
    xs.push_back(Expression::var(third_party_input_var(a, t)));
    marker.internal_vars.push_back(third_party_input_var(a, t).str());
  }
  compute.add(Assign{T, third_party_output_var(t), Expression::xor_all(xs)});
  publish.add(Broadcast{T, third_party_output_var(t)});
  marker.internal_vars.push_back(third_party_output_var(t).str());
  for (const auto& a : agents)
    receive.add(Assign{a, round_result_var(a, t), Expression::var(third_party_output_var(t))});

  Program p;
  p.add_step(std::move(upload));
  p.add_step(std::move(compute));
  p.add_step(std::move(publish));
  p.add_step(std::move(receive));
  p.instances.push_back(std::move(marker));
  return p;
}

Program abstract_program(const Program& p) {
  std::vector<const InstanceMarker*> markers;
  for (const auto& m : p.instances) markers.push_back(&m);
  std::sort(markers.begin(), markers.end(), [](auto* a, auto* b) { return a->first_step < b->first_step; });

  std::set<std::string> hidden;
  for (std::size_t k = 0; k < markers.size(); ++k) {
    const auto& m = *markers[k];
    if (m.first_step + m.length > p.steps.size()) throw PreconditionError("instance marker runs past the program");
    if (k + 1 < markers.size() && m.first_step + m.length > markers[k + 1]->first_step)
      throw PreconditionError("overlapping instance markers");
    if (!m.abstract) hidden.insert(m.internal_vars.begin(), m.internal_vars.end());
  }

  auto check_reads = [&](const std::vector<std::string>& reads, const std::string& where) {
    for (const auto& r : reads)
      if (hidden.contains(r)) throw PreconditionError(where + " reads protocol-internal variable " + r);
  };

  std::vector<bool> inside(p.steps.size(), false);
  for (auto* m : markers)
    for (std::size_t s = m->first_step; s < m->first_step + m->length; ++s) inside[s] = true;
  for (std::size_t s = 0; s < p.steps.size(); ++s)
    if (!inside[s]) check_reads(p.steps[s].read(), "step " + std::to_string(s + 1));
  for (auto* m : markers)
    for (const auto& [agent, e] : m->messages) {
      std::vector<std::string> rs;
      for (const auto& v : e.vars()) rs.push_back(v.str());
      check_reads(rs, "message of agent " + agent + " in round " + std::to_string(m->index));
    }
  for (const auto& c : p.checkpoints)
    for (const auto& a : c.assertions) {
      auto atoms = atoms_of(a.formula);
      check_reads({atoms.begin(), atoms.end()}, "checkpoint '" + c.label + "'");
    }

  // Old step position -> new position; checkpoints inside a concrete round
  // have no abstract counterpart.
  auto remap = [&](std::size_t pos) {
    std::size_t shift = 0;
    for (auto* m : markers) {
      if (m->abstract) continue;
      if (pos > m->first_step && pos < m->first_step + m->length)
        throw PreconditionError("checkpoint inside a DC round cannot be abstracted");
      if (pos >= m->first_step + m->length) shift += m->length - 4;
    }
    return pos - shift;
  };

  Program out;
  std::size_t s = 0;
  std::size_t next = 0;
  while (s < p.steps.size()) {
    if (next < markers.size() && markers[next]->first_step == s) {
      const auto& m = *markers[next++];
      Program block;
      if (m.abstract) {
        for (std::size_t k = 0; k < m.length; ++k) block.add_step(p.steps[s + k]);
        auto copy = m;
        copy.first_step = 0;
        block.instances.push_back(std::move(copy));
      } else {
        block = build_dc_abstract(m.agents, m.messages, m.index);
      }
      out.append(block);
      s += m.length;
    } else {
      out.add_step(p.steps[s++]);
    }
  }
  for (auto c : p.checkpoints) {
    c.position = remap(c.position);
    out.checkpoints.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed forms

namespace {

bool eval_expr(const KripkeStructure& m, WorldId w, const Expression& e) {
  switch (e.kind()) {
    case Expression::Kind::Const: return e.value();
    case Expression::Kind::Var: return m.value(w, e.name().str());
    case Expression::Kind::Not: return !eval_expr(m, w, e.lhs());
    case Expression::Kind::And: return eval_expr(m, w, e.lhs()) && eval_expr(m, w, e.rhs());
    case Expression::Kind::Or: return eval_expr(m, w, e.lhs()) || eval_expr(m, w, e.rhs());
    case Expression::Kind::Xor: return eval_expr(m, w, e.lhs()) != eval_expr(m, w, e.rhs());
  }
  return false;
}

bool related(const KripkeStructure& m, std::string_view agent, WorldId u, WorldId v) {
  auto idx = m.agent_index(agent);
  if (!idx) return true;  // an agent absent from M observes nothing yet
  return m.class_of(*idx, u) == m.class_of(*idx, v);
}

}  // namespace

bool xor_of_messages(const KripkeStructure& m, const std::map<std::string, Expression>& messages, WorldId w) {
  bool acc = false;
  for (const auto& [agent, e] : messages) acc ^= eval_expr(m, w, e.qualified(agent));
  return acc;
}

bool char_sim_dca(const KripkeStructure& m, const std::map<std::string, Expression>& messages, WorldId u,
                  WorldId v, std::string_view agent) {
  return related(m, agent, u, v) && xor_of_messages(m, messages, u) == xor_of_messages(m, messages, v);
}

bool char_sim_dc(const KripkeStructure& m, const KeyGraph& g, const std::map<std::string, Expression>& messages,
                 const KeyedWorld& u, const KeyedWorld& v, std::string_view agent) {
  if (u.keys.size() != g.edges().size() || v.keys.size() != g.edges().size())
    throw PreconditionError("key assignment does not cover the edges");
  if (!related(m, agent, u.base, v.base)) return false;
  for (auto e : g.keys(g.agent_index(agent)))
    if (u.keys[e] != v.keys[e]) return false;
  for (std::size_t j = 0; j < g.agents().size(); ++j) {
    const auto& name = g.agents()[j];
    auto e = message_of(messages, name);
    bool bu = eval_expr(m, u.base, e);
    bool bv = eval_expr(m, v.base, e);
    for (auto k : g.keys(j)) {
      bu ^= u.keys[k];
      bv ^= v.keys[k];
    }
    if (bu != bv) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Key completion

std::optional<KeyAssignment> find_key_completion(const KeyGraph& g, std::size_t agent, const KeyAssignment& kappa,
                                                 const MessageAssignment& mu, const MessageAssignment& mu2) {
  const std::size_t n = g.agents().size();
  if (agent >= n) throw PreconditionError("agent index out of range");
  if (kappa.size() != g.edges().size()) throw PreconditionError("key assignment does not cover the edges");
  if (mu.size() != n || mu2.size() != n) throw PreconditionError("message assignment does not cover the agents");
  bool x1 = false, x2 = false;
  for (std::size_t j = 0; j < n; ++j) {
    x1 ^= mu[j];
    x2 ^= mu2[j];
  }
  if (x1 != x2) throw PreconditionError("message assignments have different xor");
  if (mu[agent] != mu2[agent]) throw PreconditionError("message assignments differ at the observing agent");

  std::vector<bool> demand(n);
  for (std::size_t j = 0; j < n; ++j) demand[j] = mu[j] != mu2[j];

  // Undirected adjacency over the edges not incident to `agent`.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    const auto& ed = g.edges()[e];
    if (ed.source == agent || ed.target == agent) continue;
    adj[ed.source].emplace_back(ed.target, e);
    adj[ed.target].emplace_back(ed.source, e);
  }

  KeyAssignment lambda = kappa;
  std::vector<bool> visited(n, false);
  visited[agent] = true;
  for (std::size_t root = 0; root < n; ++root) {
    if (visited[root]) continue;
    // BFS tree, then settle demands from the leaves upwards.
    std::vector<std::size_t> order{root};
    std::vector<std::size_t> parent_edge(n, SIZE_MAX), parent(n, SIZE_MAX);
    visited[root] = true;
    for (std::size_t k = 0; k < order.size(); ++k)
      for (auto [next, e] : adj[order[k]])
        if (!visited[next]) {
          visited[next] = true;
          parent[next] = order[k];
          parent_edge[next] = e;
          order.push_back(next);
        }
    for (std::size_t k = order.size(); k-- > 1;) {
      auto v = order[k];
      if (!demand[v]) continue;
      lambda[parent_edge[v]] = !lambda[parent_edge[v]];
      demand[v] = false;
      demand[parent[v]] = !demand[parent[v]];
    }
    if (demand[root]) return std::nullopt;
  }
  return lambda;
}

bool verify_key_completion(const KeyGraph& g, std::size_t agent, const KeyAssignment& kappa,
                           const MessageAssignment& mu, const MessageAssignment& mu2, const KeyAssignment& lambda) {
  if (lambda.size() != kappa.size()) return false;
  for (auto e : g.keys(agent))
    if (kappa[e] != lambda[e]) return false;
  for (std::size_t j = 0; j < g.agents().size(); ++j) {
    bool lhs = mu[j], rhs = mu2[j];
    for (auto e : g.keys(j)) {
      lhs ^= kappa[e];
      rhs ^= lambda[e];
    }
    if (lhs != rhs) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Small structures

KripkeStructure message_structure(const std::vector<std::string>& agents, const std::string& base) {
  std::vector<std::string> vars;
  for (const auto& a : agents) vars.push_back(VarName(a, base).str());
  return full_structure(agents, vars);
}

KripkeStructure payer_structure(const std::vector<std::string>& agents, const std::string& base) {
  std::vector<std::string> vars;
  std::map<std::string, std::vector<std::string>> obs;
  for (const auto& a : agents) {
    vars.push_back(VarName(a, base).str());
    obs[a] = {vars.back()};
  }
  std::vector<World> worlds;
  worlds.emplace_back(vars.size());
  for (std::size_t k = 0; k < vars.size(); ++k) {
    World w(vars.size());
    w.set(k, true);
    worlds.push_back(std::move(w));
  }
  return build_structure(agents, vars, worlds, obs, BuildOptions{false});
}

std::map<std::string, Expression> own_messages(const std::vector<std::string>& agents, const std::string& base) {
  std::map<std::string, Expression> out;
  for (const auto& a : agents) out.emplace(a, Expression::var(VarName("", base)));
  return out;
}

}  // namespace epimc
