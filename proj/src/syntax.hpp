#pragma once

// Lexer and expression parser shared by the formula, program and candidate
// readers. Produces an untyped tree that each reader lowers to its own AST.

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "epimc/formula.hpp"
#include "epimc/lang.hpp"
#include "epimc/names.hpp"

namespace epimc::syntax {

enum class Tok {
  Ident,  // [A-Za-z0-9_]+, numbers included
  String,
  LParen, RParen, LBracket, RBracket, LBrace, RBrace,
  Dot, Comma, Colon, Semi,
  Not, And, Or, Xor, Implies, Iff, Eq, Neq, Assign, Arrow, Equals,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::size_t line = 1;
  std::size_t column = 1;
  std::size_t offset = 0;  // byte range in the source
  std::size_t end = 0;
};

std::vector<Token> lex(std::string_view text);

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class Op { True, False, Int, Var, Not, And, Or, Xor, Implies, Iff, Eq, Neq, Knows, KnowsWhether, Call };
  Op op = Op::True;
  long value = 0;     // Int
  VarName var;        // Var
  std::string name;   // Knows/KnowsWhether agent, Call name
  std::vector<NodePtr> kids;
  std::size_t line = 1;
  std::size_t column = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text), toks_(lex(text)) {}

  NodePtr expression();

  const Token& peek(std::size_t ahead = 0) const;
  bool at(Tok k, std::size_t ahead = 0) const { return peek(ahead).kind == k; }
  bool at_word(std::string_view w, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Ident && peek(ahead).text == w;
  }
  Token next();
  Token expect(Tok k, std::string_view what);
  void expect_word(std::string_view w);
  bool accept(Tok k);
  std::size_t position() const { return pos_; }
  void rewind(std::size_t pos) { pos_ = pos; }
  [[noreturn]] void fail(const std::string& msg) const;
  [[noreturn]] static void fail_at(const Token& t, const std::string& msg);

  /// `agent.base[idx]` or bare `base[idx]`.
  VarName variable();
  long integer();
  /// Source text of tokens [from, to).
  std::string slice(std::size_t from, std::size_t to) const;

 private:
  NodePtr iff();
  NodePtr implication();
  NodePtr disjunction();
  NodePtr exclusive();
  NodePtr conjunction();
  NodePtr comparison();
  NodePtr unary();
  NodePtr primary();
  std::shared_ptr<Node> make(Node::Op op, const Token& at, std::vector<NodePtr> kids = {});

  std::string text_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

struct LowerOptions {
  const MacroContext* ctx = nullptr;
  /// Owner for bare names; empty keeps them bare (candidate templates).
  std::string agent;
  bool allow_bare = false;
};

Formula lower_formula(const Node& n, const LowerOptions& opt);
Expression lower_expression(const Node& n, const LowerOptions& opt);

}  // namespace epimc::syntax
