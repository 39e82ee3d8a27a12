// Brute-force reference implementations used to cross-check the library.
// Deliberately naive: no partitions-as-flags, no spanning trees.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "epimc/dc.hpp"
#include "epimc/formula.hpp"
#include "epimc/kripke.hpp"

namespace oracle {

using namespace epimc;

inline bool related(const KripkeStructure& m, const std::string& agent, WorldId u, WorldId v) {
  auto a = m.require_agent(agent);
  return m.class_of(a, u) == m.class_of(a, v);
}

/// Truth vector of f, with K evaluated by quantifying over every world.
class NaiveEval {
 public:
  explicit NaiveEval(const KripkeStructure& m) : m_(m) {}

  const std::vector<bool>& sat(const Formula& f) {
    if (auto it = memo_.find(f.id()); it != memo_.end()) return it->second.second;
    const std::size_t n = m_.num_worlds();
    std::vector<bool> out(n);
    switch (f.kind()) {
      case Formula::Kind::Top:
        out.assign(n, true);
        break;
      case Formula::Kind::Atom: {
        const auto name = f.var().str();
        for (WorldId w = 0; w < n; ++w) out[w] = m_.value(w, name);
        break;
      }
      case Formula::Kind::Not: {
        const auto& x = sat(f.operand());
        for (WorldId w = 0; w < n; ++w) out[w] = !x[w];
        break;
      }
      case Formula::Kind::And: {
        const auto& x = sat(f.lhs());
        const auto& y = sat(f.rhs());
        for (WorldId w = 0; w < n; ++w) out[w] = x[w] && y[w];
        break;
      }
      case Formula::Kind::Knows: {
        const auto& x = sat(f.operand());
        for (WorldId w = 0; w < n; ++w) {
          bool all = true;
          for (WorldId v = 0; v < n && all; ++v)
            if (related(m_, f.agent(), w, v) && !x[v]) all = false;
          out[w] = all;
        }
        break;
      }
    }
    return memo_.emplace(f.id(), std::make_pair(f, std::move(out))).first->second.second;
  }

 private:
  const KripkeStructure& m_;
  std::unordered_map<const void*, std::pair<Formula, std::vector<bool>>> memo_;
};

/// Bit the agent announces: its message xor every key on an incident edge.
inline bool announced(const KeyGraph& g, std::size_t j, const std::vector<bool>& mu, const std::vector<bool>& kappa) {
  bool b = mu[j];
  for (std::size_t e = 0; e < g.edges().size(); ++e)
    if (g.edges()[e].source == j || g.edges()[e].target == j) b = b != kappa[e];
  return b;
}

inline bool incident(const KeyGraph& g, std::size_t e, std::size_t i) {
  return g.edges()[e].source == i || g.edges()[e].target == i;
}

/// The completion equations, checked term by term.
inline bool completion_holds(const KeyGraph& g, std::size_t i, const std::vector<bool>& kappa,
                             const std::vector<bool>& mu, const std::vector<bool>& mu2,
                             const std::vector<bool>& lambda) {
  if (lambda.size() != kappa.size()) return false;
  for (std::size_t e = 0; e < kappa.size(); ++e)
    if (incident(g, e, i) && kappa[e] != lambda[e]) return false;
  for (std::size_t j = 0; j < g.agents().size(); ++j)
    if (announced(g, j, mu, kappa) != announced(g, j, mu2, lambda)) return false;
  return true;
}

/// Exhaustive search over all 2^|E| key assignments.
inline std::optional<std::vector<bool>> brute_completion(const KeyGraph& g, std::size_t i,
                                                         const std::vector<bool>& kappa, const std::vector<bool>& mu,
                                                         const std::vector<bool>& mu2) {
  const std::size_t edges = g.edges().size();
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << edges); ++code) {
    std::vector<bool> lambda(edges);
    for (std::size_t e = 0; e < edges; ++e) lambda[e] = (code >> e) & 1u;
    if (completion_holds(g, i, kappa, mu, mu2, lambda)) return lambda;
  }
  return std::nullopt;
}

/// A world of M[DC(m)] decoded as (message vector, key vector), read from
/// the variable values rather than from the enumeration order.
struct DcWorld {
  std::vector<bool> mu;
  std::vector<bool> kappa;
};

inline DcWorld decode_dc(const KripkeStructure& m, const KeyGraph& g, WorldId w, int t = 1) {
  DcWorld out;
  for (const auto& a : g.agents()) out.mu.push_back(m.value(w, a + ".m"));
  for (const auto& e : g.edges()) out.kappa.push_back(m.value(w, key_var(g.agents()[e.source], e, t).str()));
  return out;
}

/// Closed form of ~_i after one DC round over a message structure in which
/// each agent sees exactly its own message.
inline bool closed_form_dc(const KeyGraph& g, std::size_t i, const DcWorld& u, const DcWorld& v) {
  if (u.mu[i] != v.mu[i]) return false;
  for (std::size_t e = 0; e < u.kappa.size(); ++e)
    if (incident(g, e, i) && u.kappa[e] != v.kappa[e]) return false;
  for (std::size_t j = 0; j < g.agents().size(); ++j)
    if (announced(g, j, u.mu, u.kappa) != announced(g, j, v.mu, v.kappa)) return false;
  return true;
}

/// Closed form of ~_i after DC^a over the same kind of structure.
inline bool closed_form_dca(const std::vector<bool>& u, const std::vector<bool>& v, std::size_t i) {
  bool xu = false, xv = false;
  for (bool b : u) xu = xu != b;
  for (bool b : v) xv = xv != b;
  return u[i] == v[i] && xu == xv;
}

/// Random formula of bounded depth over the given atoms and agents.
class FormulaGen {
 public:
  FormulaGen(std::vector<std::string> atoms, std::vector<std::string> agents, std::uint64_t seed)
      : atoms_(std::move(atoms)), agents_(std::move(agents)), rng_(seed) {}

  Formula operator()(int depth) {
    std::uniform_int_distribution<int> pick(0, depth == 0 ? 1 : 6);
    switch (pick(rng_)) {
      case 0:
        return std::uniform_int_distribution<int>(0, 9)(rng_) == 0 ? Formula::top() : atom();
      case 1:
        return atom();
      case 2:
        return lnot((*this)(depth - 1));
      case 3:
        return land((*this)(depth - 1), (*this)(depth - 1));
      case 4:
        return lor((*this)(depth - 1), (*this)(depth - 1));
      default:
        return Formula::knows(agents_[std::uniform_int_distribution<std::size_t>(0, agents_.size() - 1)(rng_)],
                              (*this)(depth - 1));
    }
  }

 private:
  Formula atom() {
    return Formula::atom(VarName::parse(atoms_[std::uniform_int_distribution<std::size_t>(0, atoms_.size() - 1)(rng_)]));
  }

  std::vector<std::string> atoms_;
  std::vector<std::string> agents_;
  std::mt19937_64 rng_;
};

}  // namespace oracle
