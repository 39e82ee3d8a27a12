#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace epimc {

/// `agent.base[index]`. The agent part is empty for names written without a
/// qualifier inside an agent's own action (`x := y` means `i.x := i.y`).
struct VarName {
  std::string agent;
  std::string base;
  std::optional<int> index;

  VarName() = default;
  VarName(std::string agent_, std::string base_, std::optional<int> index_ = std::nullopt)
      : agent(std::move(agent_)), base(std::move(base_)), index(index_) {}

  bool qualified() const { return !agent.empty(); }

  /// Fills in the owner when the name is bare; qualified names are unchanged.
  VarName qualified_as(std::string_view owner) const {
    if (qualified()) return *this;
    return VarName(std::string(owner), base, index);
  }

  std::string str() const {
    std::string out;
    if (!agent.empty()) {
      out += agent;
      out += '.';
    }
    out += base;
    if (index) {
      out += '[';
      out += std::to_string(*index);
      out += ']';
    }
    return out;
  }

  /// Inverse of str(); throws PreconditionError on malformed text.
  static VarName parse(std::string_view text);

  auto operator<=>(const VarName&) const = default;
  bool operator==(const VarName&) const = default;
};

/// Owner prefix of a canonical variable name ("2.rr[3]" -> "2").
inline std::string_view owner_of(std::string_view canonical) {
  auto dot = canonical.find('.');
  if (dot == std::string_view::npos) return {};
  return canonical.substr(0, dot);
}

}  // namespace epimc
