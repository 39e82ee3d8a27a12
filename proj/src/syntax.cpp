#include "syntax.hpp"

#include <cctype>
#include <utility>

#include "epimc/error.hpp"

namespace epimc::syntax {

namespace {

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

struct Unicode {
  std::string_view bytes;
  Tok kind;
};

constexpr Unicode kUnicode[] = {
    {"\xC2\xAC", Tok::Not},         // ¬
    {"\xE2\x88\xA7", Tok::And},     // ∧
    {"\xE2\x88\xA8", Tok::Or},      // ∨
    {"\xE2\x87\x92", Tok::Implies}, // ⇒
    {"\xE2\x87\x94", Tok::Iff},     // ⇔
    {"\xE2\x8A\x97", Tok::Xor},     // ⊗
    {"\xE2\x89\xA0", Tok::Neq},     // ≠
};

}  // namespace

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
        ++col;
      }
      ++i;
    }
  };
  auto push = [&](Tok k, std::size_t len) {
    out.push_back(Token{k, std::string(text.substr(i, len)), line, col, i, i + len});
    advance(len);
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == '\n' || c == ' ' || c == '\t' || c == '\r') {
      advance(1);
      continue;
    }
    if (c == '#' || (c == '/' && i + 1 < text.size() && text[i + 1] == '/')) {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (ident_char(c)) {
      std::size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      push(Tok::Ident, j - i);
      continue;
    }
    if (c == '"') {
      std::size_t j = i + 1;
      while (j < text.size() && text[j] != '"' && text[j] != '\n') ++j;
      if (j >= text.size() || text[j] != '"') throw ParseError("unterminated string", line, col);
      Token t{Tok::String, std::string(text.substr(i + 1, j - i - 1)), line, col, i, j + 1};
      advance(j + 1 - i);
      out.push_back(std::move(t));
      continue;
    }
    auto rest = text.substr(i);
    auto starts = [&](std::string_view p) { return rest.substr(0, p.size()) == p; };
    if (starts("<=>")) { push(Tok::Iff, 3); continue; }
    if (starts("=>")) { push(Tok::Implies, 2); continue; }
    if (starts("==")) { push(Tok::Eq, 2); continue; }
    if (starts("!=")) { push(Tok::Neq, 2); continue; }
    if (starts(":=")) { push(Tok::Assign, 2); continue; }
    if (starts("->")) { push(Tok::Arrow, 2); continue; }
    bool matched = false;
    for (const auto& u : kUnicode) {
      if (starts(u.bytes)) {
        push(u.kind, u.bytes.size());
        matched = true;
        break;
      }
    }
    if (matched) continue;
    switch (c) {
      case '(': push(Tok::LParen, 1); break;
      case ')': push(Tok::RParen, 1); break;
      case '[': push(Tok::LBracket, 1); break;
      case ']': push(Tok::RBracket, 1); break;
      case '{': push(Tok::LBrace, 1); break;
      case '}': push(Tok::RBrace, 1); break;
      case '.': push(Tok::Dot, 1); break;
      case ',': push(Tok::Comma, 1); break;
      case ':': push(Tok::Colon, 1); break;
      case ';': push(Tok::Semi, 1); break;
      case '!': push(Tok::Not, 1); break;
      case '&': push(Tok::And, 1); break;
      case '|': push(Tok::Or, 1); break;
      case '^': push(Tok::Xor, 1); break;
      case '=': push(Tok::Equals, 1); break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
  }
  out.push_back(Token{Tok::End, "", line, col, text.size(), text.size()});
  return out;
}

std::string Parser::slice(std::size_t from, std::size_t to) const {
  if (from >= to || from >= toks_.size()) return {};
  to = std::min(to, toks_.size());
  return text_.substr(toks_[from].offset, toks_[to - 1].end - toks_[from].offset);
}

const Token& Parser::peek(std::size_t ahead) const {
  auto idx = std::min(pos_ + ahead, toks_.size() - 1);
  return toks_[idx];
}

Token Parser::next() {
  Token t = peek();
  if (pos_ < toks_.size() - 1) ++pos_;
  return t;
}

bool Parser::accept(Tok k) {
  if (!at(k)) return false;
  next();
  return true;
}

Token Parser::expect(Tok k, std::string_view what) {
  if (!at(k)) fail("expected " + std::string(what));
  return next();
}

void Parser::expect_word(std::string_view w) {
  if (!at_word(w)) fail("expected '" + std::string(w) + "'");
  next();
}

void Parser::fail(const std::string& msg) const {
  const auto& t = peek();
  fail_at(t, msg + (t.kind == Tok::End ? " at end of input" : " near '" + t.text + "'"));
}

void Parser::fail_at(const Token& t, const std::string& msg) { throw ParseError(msg, t.line, t.column); }

long Parser::integer() {
  auto t = expect(Tok::Ident, "integer");
  if (!all_digits(t.text)) fail_at(t, "expected integer, got '" + t.text + "'");
  return std::stol(t.text);
}

VarName Parser::variable() {
  auto first = expect(Tok::Ident, "variable");
  VarName v;
  if (accept(Tok::Dot)) {
    v.agent = first.text;
    v.base = expect(Tok::Ident, "variable name after '.'").text;
  } else {
    v.base = first.text;
  }
  if (accept(Tok::LBracket)) {
    v.index = static_cast<int>(integer());
    expect(Tok::RBracket, "']'");
  }
  return v;
}

std::shared_ptr<Node> Parser::make(Node::Op op, const Token& at, std::vector<NodePtr> kids) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->kids = std::move(kids);
  n->line = at.line;
  n->column = at.column;
  return n;
}

NodePtr Parser::expression() { return iff(); }

NodePtr Parser::iff() {
  auto lhs = implication();
  while (at(Tok::Iff)) {
    auto t = next();
    lhs = make(Node::Op::Iff, t, {lhs, implication()});
  }
  return lhs;
}

NodePtr Parser::implication() {
  auto lhs = disjunction();
  if (at(Tok::Implies)) {
    auto t = next();
    return make(Node::Op::Implies, t, {lhs, implication()});
  }
  return lhs;
}

NodePtr Parser::disjunction() {
  auto lhs = exclusive();
  while (at(Tok::Or)) {
    auto t = next();
    lhs = make(Node::Op::Or, t, {lhs, exclusive()});
  }
  return lhs;
}

NodePtr Parser::exclusive() {
  auto lhs = conjunction();
  while (at(Tok::Xor)) {
    auto t = next();
    lhs = make(Node::Op::Xor, t, {lhs, conjunction()});
  }
  return lhs;
}

NodePtr Parser::conjunction() {
  auto lhs = comparison();
  while (at(Tok::And)) {
    auto t = next();
    lhs = make(Node::Op::And, t, {lhs, comparison()});
  }
  return lhs;
}

NodePtr Parser::comparison() {
  auto lhs = unary();
  if (at(Tok::Eq) || at(Tok::Neq)) {
    auto t = next();
    return make(t.kind == Tok::Eq ? Node::Op::Eq : Node::Op::Neq, t, {lhs, unary()});
  }
  return lhs;
}

NodePtr Parser::unary() {
  if (at(Tok::Not)) {
    auto t = next();
    return make(Node::Op::Not, t, {unary()});
  }
  if ((at_word("K") || at_word("Khat")) && at(Tok::LBracket, 1)) {
    auto t = next();
    next();
    auto agent = expect(Tok::Ident, "agent name").text;
    expect(Tok::RBracket, "']'");
    auto n = std::make_shared<Node>();
    n->op = t.text == "K" ? Node::Op::Knows : Node::Op::KnowsWhether;
    n->name = agent;
    n->line = t.line;
    n->column = t.column;
    n->kids = {unary()};
    return n;
  }
  return primary();
}

NodePtr Parser::primary() {
  const auto& t = peek();
  if (t.kind == Tok::LParen) {
    next();
    auto e = expression();
    expect(Tok::RParen, "')'");
    return e;
  }
  if (t.kind != Tok::Ident) fail("expected formula");
  if (t.text == "true" || t.text == "false") {
    auto tok = next();
    return make(tok.text == "true" ? Node::Op::True : Node::Op::False, tok);
  }
  if ((t.text == "conflict" || t.text == "sender") && at(Tok::LParen, 1)) {
    auto tok = next();
    next();
    auto n = std::make_shared<Node>();
    n->op = Node::Op::Call;
    n->name = tok.text;
    n->line = tok.line;
    n->column = tok.column;
    std::vector<NodePtr> args;
    if (!at(Tok::RParen)) {
      do {
        auto arg = expect(Tok::Ident, "macro argument");
        auto a = std::make_shared<Node>();
        a->line = arg.line;
        a->column = arg.column;
        if (all_digits(arg.text)) {
          a->op = Node::Op::Int;
          a->value = std::stol(arg.text);
        } else {
          a->op = Node::Op::Var;
          a->var.base = arg.text;
        }
        args.push_back(a);
      } while (accept(Tok::Comma));
    }
    expect(Tok::RParen, "')'");
    n->kids = std::move(args);
    return n;
  }
  if (all_digits(t.text) && !at(Tok::Dot, 1)) {
    auto tok = next();
    auto n = make(Node::Op::Int, tok);
    n->value = std::stol(tok.text);
    return n;
  }
  auto tok = peek();
  auto n = std::make_shared<Node>();
  n->op = Node::Op::Var;
  n->line = tok.line;
  n->column = tok.column;
  n->var = variable();
  return n;
}

// ---------------------------------------------------------------------------
// Lowering

namespace {

[[noreturn]] void fail_node(const Node& n, const std::string& msg) { throw ParseError(msg, n.line, n.column); }

const MacroContext& need_ctx(const Node& n, const LowerOptions& opt, std::string_view macro) {
  if (!opt.ctx) fail_node(n, "macro " + std::string(macro) + " used without a macro context");
  return *opt.ctx;
}

VarName resolve(const Node& n, const LowerOptions& opt) {
  VarName v = n.var;
  if (!v.qualified()) {
    if (!opt.agent.empty())
      v.agent = opt.agent;
    else if (!opt.allow_bare)
      fail_node(n, "unqualified variable '" + v.base + "' (write agent." + v.base + ")");
  }
  return v;
}

bool is_slot_var(const Node& n, const LowerOptions& opt) {
  if (n.op != Node::Op::Var || n.var.index) return false;
  std::string_view base = opt.ctx ? std::string_view(opt.ctx->slot_request) : std::string_view("slot_request");
  return n.var.base == base;
}

bool is_count_zero(const Node& n) { return n.op == Node::Op::Var && !n.var.qualified() && n.var.base == "C0"; }

std::optional<Formula> lower_comparison(const Node& n, const LowerOptions& opt) {
  const Node* lhs = n.kids[0].get();
  const Node* rhs = n.kids[1].get();
  if (lhs->op == Node::Op::Int && (is_slot_var(*rhs, opt) || is_count_zero(*rhs))) std::swap(lhs, rhs);
  std::optional<Formula> eq;
  if (is_slot_var(*lhs, opt)) {
    const auto& ctx = need_ctx(n, opt, "slot_request ==");
    if (rhs->op != Node::Op::Int) fail_node(*rhs, "slot request compared with a non-integer");
    if (rhs->value < 0 || rhs->value > ctx.n) fail_node(*rhs, "slot value out of range 0.." + std::to_string(ctx.n));
    auto v = resolve(*lhs, opt);
    eq = slot_request_equals(v.agent, static_cast<int>(rhs->value), ctx);
  } else if (is_count_zero(*lhs)) {
    const auto& ctx = need_ctx(n, opt, "C0");
    if (rhs->op != Node::Op::Int) fail_node(*rhs, "C0 compared with a non-integer");
    if (rhs->value < 0 || rhs->value > ctx.n) fail_node(*rhs, "C0 value out of range 0.." + std::to_string(ctx.n));
    std::string owner = opt.agent;
    if (owner.empty() && !opt.allow_bare) owner = ctx.rr_agent;
    eq = expand_count_zero(static_cast<int>(rhs->value), ctx, owner);
  }
  if (!eq) return std::nullopt;
  return n.op == Node::Op::Eq ? *eq : lnot(*eq);
}

Formula int_as_bool(const Node& n) {
  if (n.value == 0) return bottom();
  if (n.value == 1) return Formula::top();
  fail_node(n, "integer " + std::to_string(n.value) + " used as a truth value");
}

Formula lower_call(const Node& n, const LowerOptions& opt) {
  const auto& ctx = need_ctx(n, opt, n.name);
  auto int_arg = [&](std::size_t k) {
    if (n.kids.size() <= k || n.kids[k]->op != Node::Op::Int) fail_node(n, n.name + ": expected integer argument");
    return static_cast<int>(n.kids[k]->value);
  };
  if (n.name == "conflict") {
    if (n.kids.size() != 1) fail_node(n, "conflict takes one argument");
    int s = int_arg(0);
    if (s < 1 || s > ctx.n) fail_node(n, "conflict slot out of range 1.." + std::to_string(ctx.n));
    return expand_conflict(s, ctx);
  }
  if (n.name == "sender") {
    if (n.kids.size() != 2) fail_node(n, "sender takes two arguments");
    const auto& a = *n.kids[0];
    std::string agent = a.op == Node::Op::Int ? std::to_string(a.value) : a.var.base;
    int x = int_arg(1);
    if (x != 0 && x != 1) fail_node(n, "sender bit must be 0 or 1");
    return expand_sender(agent, x == 1, ctx);
  }
  fail_node(n, "unknown macro " + n.name);
}

}  // namespace

Formula lower_formula(const Node& n, const LowerOptions& opt) {
  using Op = Node::Op;
  auto sub = [&](std::size_t k) { return lower_formula(*n.kids[k], opt); };
  switch (n.op) {
    case Op::True: return Formula::top();
    case Op::False: return bottom();
    case Op::Int: return int_as_bool(n);
    case Op::Var:
      if (is_slot_var(n, opt) && opt.ctx) fail_node(n, "slot_request is multi-valued; compare it with ==");
      if (is_count_zero(n)) fail_node(n, "C0 must be compared with ==");
      return Formula::atom(resolve(n, opt));
    case Op::Not: return lnot(sub(0));
    case Op::And: return land(sub(0), sub(1));
    case Op::Or: return lor(sub(0), sub(1));
    case Op::Xor: return lxor(sub(0), sub(1));
    case Op::Implies: return implies(sub(0), sub(1));
    case Op::Iff: return iff(sub(0), sub(1));
    case Op::Eq:
    case Op::Neq: {
      if (auto macro = lower_comparison(n, opt)) return *macro;
      auto e = iff(sub(0), sub(1));
      return n.op == Op::Eq ? e : lnot(e);
    }
    case Op::Knows: return Formula::knows(n.name, sub(0));
    case Op::KnowsWhether: return knows_whether(n.name, sub(0));
    case Op::Call: return lower_call(n, opt);
  }
  fail_node(n, "unsupported construct");
}

Expression lower_expression(const Node& n, const LowerOptions& opt) {
  using Op = Node::Op;
  auto sub = [&](std::size_t k) { return lower_expression(*n.kids[k], opt); };
  switch (n.op) {
    case Op::True: return Expression::constant(true);
    case Op::False: return Expression::constant(false);
    case Op::Int: return Expression::from_formula(int_as_bool(n));
    case Op::Var:
      if (is_slot_var(n, opt) && opt.ctx) fail_node(n, "slot_request is multi-valued; compare it with ==");
      if (is_count_zero(n)) fail_node(n, "C0 must be compared with ==");
      return Expression::var(resolve(n, opt));
    case Op::Not: return Expression::negation(sub(0));
    case Op::And: return Expression::conjunction(sub(0), sub(1));
    case Op::Or: return Expression::disjunction(sub(0), sub(1));
    case Op::Xor: return Expression::exclusive_or(sub(0), sub(1));
    case Op::Implies: return Expression::disjunction(Expression::negation(sub(0)), sub(1));
    case Op::Iff: return Expression::negation(Expression::exclusive_or(sub(0), sub(1)));
    case Op::Eq:
    case Op::Neq: {
      if (auto macro = lower_comparison(n, opt)) return Expression::from_formula(*macro);
      auto x = Expression::exclusive_or(sub(0), sub(1));
      return n.op == Op::Neq ? x : Expression::negation(x);
    }
    case Op::Knows:
    case Op::KnowsWhether: fail_node(n, "knowledge operator inside a program expression");
    case Op::Call: return Expression::from_formula(lower_call(n, opt));
  }
  fail_node(n, "unsupported construct");
}

}  // namespace epimc::syntax
