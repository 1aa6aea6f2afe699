#include "kdvchart/dsl.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace kdvchart {

ParseError::ParseError(int line, int col, const std::string& message, std::vector<std::string> expected)
    : std::runtime_error([&] {
        std::string m = std::to_string(line) + ":" + std::to_string(col) + ": " + message;
        if (!expected.empty()) {
          m += " (expected one of:";
          for (const auto& e : expected) m += " " + e;
          m += ")";
        }
        return m;
      }()),
      line_(line),
      col_(col),
      detail_(message),
      expected_(std::move(expected)) {}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80; }

std::string jet_text(const std::string& field, int order) {
  if (order == 0) return field;
  if (order <= 3) return field + "_" + std::string(static_cast<std::size_t>(order), 'x');
  return field + "{" + std::to_string(order) + "}";
}

struct Token {
  enum class Kind { Number, Ident, Punct, End } kind = Kind::End;
  std::string text;  // number digits, identifier name, or the punctuation char
  int order = 0;     // identifiers: derivative order from the suffix
  bool time = false; // identifiers: `_t` suffix
  std::size_t offset = 0;
};

std::vector<Token> tokenize(std::string_view s, int line, int col0) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [&](std::size_t at, const std::string& msg) {
    throw ParseError(line, col0 + static_cast<int>(at), msg);
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.offset = i;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      t.kind = Token::Kind::Number;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) t.text += s[i++];
    } else if (ident_start(c)) {
      t.kind = Token::Kind::Ident;
      while (i < s.size() && ident_char(s[i])) t.text += s[i++];
      if (i + 1 < s.size() && s[i] == '_') {
        std::size_t j = i + 1;
        if (s[j] == 't') {
          t.time = true;
          i = j + 1;
        } else {
          while (j < s.size() && s[j] == 'x') ++j;
          if (j == i + 1) fail(i, "expected x or t after '_'");
          t.order = static_cast<int>(j - i - 1);
          i = j;
        }
        if (i < s.size() && ident_char(s[i])) fail(i, "unexpected character in derivative suffix");
      } else if (i < s.size() && s[i] == '{') {
        std::size_t j = i + 1;
        std::string digits;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) digits += s[j++];
        if (digits.empty() || j >= s.size() || s[j] != '}') fail(i, "malformed derivative order, expected {k}");
        t.order = std::stoi(digits);
        i = j + 1;
      }
    } else if (std::string_view("+-*/^()[]").find(c) != std::string_view::npos) {
      t.kind = Token::Kind::Punct;
      t.text = std::string(1, c);
      ++i;
    } else {
      fail(i, std::string("unexpected character '") + c + "'");
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.offset = s.size();
  out.push_back(end);
  return out;
}

class Parser {
 public:
  Parser(std::string_view text, const ParseScope& scope, int line, int col0)
      : toks_(tokenize(text, line, col0)), scope_(scope), line_(line), col0_(col0) {}

  JetExpr whole_expr() {
    JetExpr e = expr();
    expect_end();
    return e;
  }

  PseudoOp whole_operator() {
    PseudoOp op = op_expr();
    expect_end();
    return op;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  bool at_punct(char c) const { return peek().kind == Token::Kind::Punct && peek().text[0] == c; }
  bool at_ident(const char* name) const { return peek().kind == Token::Kind::Ident && peek().text == name && peek().order == 0 && !peek().time; }

  [[noreturn]] void fail(const std::string& msg, std::vector<std::string> expected = {}) const {
    throw ParseError(line_, col0_ + static_cast<int>(peek().offset), msg, std::move(expected));
  }

  void expect_punct(char c) {
    if (!at_punct(c)) fail("unexpected " + describe(peek()), {std::string("'") + c + "'"});
    ++pos_;
  }

  void expect_end() {
    if (peek().kind != Token::Kind::End) fail("unexpected " + describe(peek()), {"end of input", "'+'", "'-'", "'*'"});
  }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Token::Kind::End:
        return "end of input";
      case Token::Kind::Number:
        return "number " + t.text;
      case Token::Kind::Ident:
        return "identifier " + t.text;
      case Token::Kind::Punct:
        return "'" + t.text + "'";
    }
    return "token";
  }

  int integer_exponent() {
    bool paren = at_punct('(');
    if (paren) ++pos_;
    bool neg = at_punct('-');
    if (neg) ++pos_;
    if (peek().kind != Token::Kind::Number) fail("expected integer exponent", {"integer"});
    int n = std::stoi(peek().text);
    ++pos_;
    if (paren) expect_punct(')');
    return neg ? -n : n;
  }

  // ---- expressions

  JetExpr expr() {
    JetExpr e = term();
    while (at_punct('+') || at_punct('-')) {
      bool plus = at_punct('+');
      ++pos_;
      JetExpr t = term();
      e = plus ? e + t : e - t;
    }
    return e;
  }

  JetExpr term() {
    JetExpr e = unary();
    while (at_punct('*') || at_punct('/')) {
      bool times = at_punct('*');
      ++pos_;
      std::size_t at = pos_;
      JetExpr f = unary();
      if (times) {
        e *= f;
      } else {
        if (f.is_zero()) {
          pos_ = at;
          fail("division by zero");
        }
        e /= f;
      }
    }
    return e;
  }

  JetExpr unary() {
    if (at_punct('-')) {
      ++pos_;
      return -unary();
    }
    return power();
  }

  JetExpr power() {
    JetExpr base = primary();
    if (at_punct('^')) {
      ++pos_;
      std::size_t at = pos_;
      int n = integer_exponent();
      if (n < 0 && base.is_zero()) {
        pos_ = at;
        fail("negative power of zero");
      }
      base = base.pow(n);
    }
    return base;
  }

  JetExpr primary() {
    const Token& t = peek();
    if (t.kind == Token::Kind::Number) {
      ++pos_;
      return JetExpr(Rational(t.text));
    }
    if (at_punct('(')) {
      ++pos_;
      JetExpr e = expr();
      expect_punct(')');
      return e;
    }
    if (t.kind == Token::Kind::Ident) {
      if (t.time) fail("time derivative " + t.text + "_t is only allowed on the left of an equation");
      std::size_t here = pos_;
      ++pos_;
      if (t.text == "Dinv" && t.order == 0) {
        expect_punct('(');
        JetExpr body = expr();
        expect_punct(')');
        return make_dinv(body);
      }
      if (t.text == "D" && t.order == 0) {
        expect_punct('(');
        JetExpr body = expr();
        expect_punct(')');
        return total_derivative(body);
      }
      try {
        if (auto it = scope_.defines.find(t.text); it != scope_.defines.end())
          return total_derivative(it->second, t.order);
        if (scope_.params.count(t.text)) {
          if (t.order != 0) {
            pos_ = here;
            fail("parameter " + t.text + " has no derivatives");
          }
          return JetExpr::param(t.text);
        }
        return JetExpr::jet(t.text, t.order);
      } catch (const JetOrderOverflow& ex) {
        pos_ = here;
        fail(ex.what());
      }
    }
    fail("unexpected " + describe(t), {"number", "identifier", "Dinv(", "'('", "'-'"});
  }

  // ---- operators

  PseudoOp op_expr() {
    PseudoOp op = op_term();
    while (at_punct('+') || at_punct('-')) {
      bool plus = at_punct('+');
      ++pos_;
      PseudoOp t = op_term();
      op = plus ? op + t : op - t;
    }
    return op;
  }

  PseudoOp op_term() {
    PseudoOp op = op_unary();
    while (at_punct('*')) {
      ++pos_;
      op = op * op_unary();
    }
    return op;
  }

  PseudoOp op_unary() {
    if (at_punct('-')) {
      ++pos_;
      return -op_unary();
    }
    PseudoOp base = op_primary();
    if (at_punct('^')) {
      ++pos_;
      std::size_t at = pos_;
      int n = integer_exponent();
      if (n < 0) {
        pos_ = at;
        fail("negative operator power");
      }
      base = base.pow(n);
    }
    return base;
  }

  PseudoOp op_primary() {
    const Token& t = peek();
    if (t.kind == Token::Kind::Number) {
      ++pos_;
      Rational c(t.text);
      if (at_punct('/') && toks_[pos_ + 1].kind == Token::Kind::Number) {
        ++pos_;
        Rational d(peek().text);
        if (d == 0) fail("division by zero");
        ++pos_;
        c /= d;
      }
      return PseudoOp::scalar(c);
    }
    if (at_punct('[')) {
      ++pos_;
      JetExpr e = expr();
      expect_punct(']');
      return PseudoOp::mul(e);
    }
    if (at_punct('(')) {
      ++pos_;
      PseudoOp op = op_expr();
      expect_punct(')');
      return op;
    }
    if (t.kind == Token::Kind::Ident && t.order == 0 && !t.time) {
      if (t.text == "D") {
        ++pos_;
        return PseudoOp::d();
      }
      if (t.text == "Dinv") {
        ++pos_;
        return PseudoOp::dinv();
      }
      if (auto it = scope_.op_defines.find(t.text); it != scope_.op_defines.end()) {
        ++pos_;
        return it->second;
      }
    }
    fail("unexpected " + describe(t) + " in operator", {"D", "Dinv", "'['", "'('", "number", "operator name"});
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const ParseScope& scope_;
  int line_;
  int col0_;
};

// ---------------------------------------------------------------- chart

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

struct Line {
  int number;
  bool continuation;
  std::string text;  // without the comment, untrimmed
  int indent;        // column offset of the first non-space character (0-based)
};

bool valid_name(const std::string& s) {
  if (s.empty() || !ident_start(s[0])) return false;
  for (char c : s)
    if (!ident_char(c) && c != '-') return false;
  return true;
}

bool valid_field(const std::string& s) {
  if (s.empty() || !ident_start(s[0])) return false;
  for (char c : s)
    if (!ident_char(c)) return false;
  return s != "D" && s != "Dinv";
}

class ChartParser {
 public:
  explicit ChartParser(std::string_view src) { split(src); }

  ChartDocument run() {
    std::size_t i = 0;
    bool first = true;
    while (i < lines_.size()) {
      const Line& l = lines_[i];
      if (l.continuation) throw ParseError(l.number, l.indent + 1, "continuation line without a stanza");
      std::vector<const Line*> body;
      std::size_t j = i + 1;
      while (j < lines_.size() && lines_[j].continuation) body.push_back(&lines_[j++]);
      stanza(l, body, first);
      first = false;
      i = j;
    }
    resolve();
    return std::move(doc_);
  }

 private:
  void split(std::string_view src) {
    int number = 0;
    std::size_t start = 0;
    while (start <= src.size()) {
      std::size_t end = src.find('\n', start);
      if (end == std::string_view::npos) end = src.size();
      ++number;
      std::string text(src.substr(start, end - start));
      if (!text.empty() && text.back() == '\r') text.pop_back();
      if (auto hash = text.find('#'); hash != std::string::npos) text.resize(hash);
      std::size_t ind = text.find_first_not_of(" \t");
      if (ind != std::string::npos) lines_.push_back({number, ind > 0, text, static_cast<int>(ind)});
      if (end == src.size()) break;
      start = end + 1;
    }
  }

  // Column (1-based) of `part`, a view into `line.text`.
  static int col_of(const Line& line, std::string_view part) {
    return static_cast<int>(part.data() - line.text.data()) + 1;
  }

  static std::string_view view(const Line& l) { return std::string_view(l.text); }

  // Next whitespace-delimited word from `rest`, advancing it.
  static std::string_view word(std::string_view& rest) {
    std::size_t a = rest.find_first_not_of(" \t");
    if (a == std::string_view::npos) {
      rest = rest.substr(rest.size());
      return {};
    }
    std::size_t b = rest.find_first_of(" \t", a);
    if (b == std::string_view::npos) b = rest.size();
    std::string_view w = rest.substr(a, b - a);
    rest = rest.substr(b);
    return w;
  }

  static std::string_view strip(std::string_view s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string_view::npos) return s.substr(s.size());
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
  }

  JetExpr expr_at(const Line& l, std::string_view part, const ParseScope& scope) {
    part = strip(part);
    if (part.empty()) throw ParseError(l.number, col_of(l, part), "missing expression", {"expression"});
    return Parser(part, scope, l.number, col_of(l, part)).whole_expr();
  }

  PseudoOp op_at(const Line& l, std::string_view part) {
    part = strip(part);
    if (part.empty()) throw ParseError(l.number, col_of(l, part), "missing operator", {"operator"});
    return Parser(part, scope_, l.number, col_of(l, part)).whole_operator();
  }

  std::string name_at(const Line& l, std::string_view w, const char* what) {
    if (!valid_name(std::string(w)))
      throw ParseError(l.number, col_of(l, w), std::string("invalid ") + what + " '" + std::string(w) + "'", {what});
    return std::string(w);
  }

  void stanza(const Line& l, const std::vector<const Line*>& body, bool first) {
    std::string_view rest = view(l);
    std::string_view kw = word(rest);
    if (kw == "chart-version") {
      if (!first) throw ParseError(l.number, 1, "chart-version must be the first statement");
      std::string_view v = word(rest);
      if (v != "1") throw ParseError(l.number, col_of(l, v), "unsupported chart version", {"1"});
      no_body(body);
    } else if (kw == "define" || kw == "define-op") {
      std::size_t eq = rest.find('=');
      if (eq == std::string_view::npos) throw ParseError(l.number, static_cast<int>(l.text.size()) + 1, "missing '='", {"'='"});
      std::string_view lhs = rest.substr(0, eq);
      std::string name = name_at(l, strip(lhs), "name");
      if (scope_.defines.count(name) || scope_.op_defines.count(name))
        throw ParseError(l.number, col_of(l, strip(lhs)), "duplicate definition of " + name);
      if (kw == "define") {
        JetExpr e = expr_at(l, rest.substr(eq + 1), scope_);
        scope_.defines[name] = e;
        doc_.defines.emplace_back(name, e);
      } else {
        PseudoOp op = op_at(l, rest.substr(eq + 1));
        scope_.op_defines[name] = op;
        doc_.op_defines.emplace_back(name, op);
      }
      no_body(body);
    } else if (kw == "equation") {
      equation(l, rest, body);
    } else if (kw == "link") {
      link(l, rest, body);
    } else if (kw == "invariance") {
      invariance(l, rest, body);
    } else {
      throw ParseError(l.number, col_of(l, kw), "unknown statement '" + std::string(kw) + "'",
                       {"chart-version", "define", "define-op", "equation", "link", "invariance"});
    }
  }

  static void no_body(const std::vector<const Line*>& body) {
    if (!body.empty()) throw ParseError(body[0]->number, body[0]->indent + 1, "unexpected continuation line");
  }

  // "name:" prefix shared by equation and link stanzas.
  std::string colon_name(const Line& l, std::string_view& rest) {
    std::size_t colon = rest.find(':');
    if (colon == std::string_view::npos)
      throw ParseError(l.number, static_cast<int>(l.text.size()) + 1, "missing ':'", {"':'"});
    std::string name = name_at(l, strip(rest.substr(0, colon)), "name");
    rest = rest.substr(colon + 1);
    return name;
  }

  void equation(const Line& l, std::string_view rest, const std::vector<const Line*>& body) {
    EquationDef eq;
    eq.pos = {l.number, 1};
    eq.name = colon_name(l, rest);
    std::size_t eqs = rest.find('=');
    if (eqs == std::string_view::npos) throw ParseError(l.number, static_cast<int>(l.text.size()) + 1, "missing '='", {"'='"});
    std::string_view lhs = strip(rest.substr(0, eqs));
    // LHS: [multiplier *] field_t
    if (lhs.size() < 3 || lhs.substr(lhs.size() - 2) != "_t")
      throw ParseError(l.number, col_of(l, lhs), "left side must end with a time derivative", {"field_t"});
    std::size_t fend = lhs.size() - 2, fstart = fend;
    while (fstart > 0 && ident_char(lhs[fstart - 1])) --fstart;
    eq.field = std::string(lhs.substr(fstart, fend - fstart));
    if (!valid_field(eq.field)) throw ParseError(l.number, col_of(l, lhs.substr(fstart)), "invalid field name", {"field"});
    std::string_view prefix = strip(lhs.substr(0, fstart));
    if (!prefix.empty()) {
      if (prefix.back() != '*') throw ParseError(l.number, col_of(l, lhs.substr(fstart)), "expected '*' before time derivative", {"'*'"});
      eq.multiplier = expr_at(l, prefix.substr(0, prefix.size() - 1), scope_);
      if (eq.multiplier.is_zero()) throw ParseError(l.number, col_of(l, prefix), "zero multiplier");
    }
    eq.rhs = expr_at(l, rest.substr(eqs + 1), scope_);
    bool have_seed = false;
    for (const Line* b : body) {
      std::string_view r = view(*b);
      std::string_view kw = word(r);
      if (kw == "operator") {
        eq.recursion = op_at(*b, r);
      } else if (kw == "seed") {
        std::string_view sr = strip(r);
        std::size_t p = sr.rfind(" power ");
        if (p != std::string_view::npos) {
          std::string_view n = strip(sr.substr(p + 7));
          bool digits = !n.empty() && std::all_of(n.begin(), n.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
          if (!digits) throw ParseError(b->number, col_of(*b, n), "expected seed power", {"integer"});
          eq.seed_power = std::stoi(std::string(n));
          sr = sr.substr(0, p);
        }
        eq.seed = expr_at(*b, sr, scope_);
        have_seed = true;
      } else {
        throw ParseError(b->number, col_of(*b, kw), "unknown equation attribute '" + std::string(kw) + "'", {"operator", "seed"});
      }
    }
    if (!eq.recursion.is_zero() && !have_seed)
      throw ParseError(l.number, 1, "equation " + eq.name + " has an operator but no seed", {"seed"});
    if (doc_.registry.find_equation(eq.name)) throw ParseError(l.number, 1, "duplicate equation " + eq.name);
    doc_.registry.add_equation(std::move(eq));
  }

  SubstitutionRule solve_clause(const Line& l, std::string_view text) {
    std::size_t arrow = text.find("->");
    if (arrow == std::string_view::npos) throw ParseError(l.number, col_of(l, text), "missing '->'", {"'->'"});
    std::string_view lhs = strip(text.substr(0, arrow));
    auto toks = tokenize(lhs, l.number, col_of(l, lhs));
    if (toks.size() != 2 || toks[0].kind != Token::Kind::Ident || toks[0].time || !valid_field(toks[0].text))
      throw ParseError(l.number, col_of(l, lhs), "solve target must be a single jet variable", {"jet"});
    SubstitutionRule r;
    r.field = toks[0].text;
    r.order = toks[0].order;
    r.value = expr_at(l, text.substr(arrow + 2), scope_);
    return r;
  }

  void link(const Line& l, std::string_view rest, const std::vector<const Line*>& body) {
    BacklundLink lk;
    lk.pos = {l.number, 1};
    lk.name = colon_name(l, rest);
    std::string_view r = strip(rest);
    if (r.substr(0, 10) == "reciprocal") {
      lk.kind = LinkKind::Reciprocal;
      std::string_view spec = r.substr(10);
      std::size_t arrow = spec.find("->");
      if (arrow == std::string_view::npos) throw ParseError(l.number, col_of(l, spec), "missing '->'", {"'->'"});
      lk.from_field = trim(spec.substr(0, arrow));
      lk.to_field = trim(spec.substr(arrow + 2));
      if (!valid_field(lk.from_field) || !valid_field(lk.to_field))
        throw ParseError(l.number, col_of(l, spec), "reciprocal link needs two field names", {"field -> field"});
    } else {
      std::size_t solve = r.find(" solve ");
      std::string_view rel = solve == std::string_view::npos ? r : r.substr(0, solve);
      std::size_t eqs = rel.rfind('=');
      if (eqs == std::string_view::npos || strip(rel.substr(eqs + 1)) != "0")
        throw ParseError(l.number, col_of(l, rel) + static_cast<int>(rel.size()), "relation must read '... = 0'", {"= 0"});
      lk.relation = expr_at(l, rel.substr(0, eqs), scope_);
      if (solve != std::string_view::npos) lk.rule = solve_clause(l, r.substr(solve + 7));
    }
    std::vector<std::string> between;
    for (const Line* b : body) {
      std::string_view br = view(*b);
      std::string_view kw = word(br);
      if (kw == "between") {
        between.clear();
        for (auto w = word(br); !w.empty(); w = word(br)) between.push_back(name_at(*b, w, "equation"));
        if (between.size() != 2) throw ParseError(b->number, col_of(*b, kw), "between takes two equation names");
      } else if (kw == "solve" && lk.kind == LinkKind::Differential) {
        lk.rule = solve_clause(*b, br);
      } else {
        throw ParseError(b->number, col_of(*b, kw), "unknown link attribute '" + std::string(kw) + "'", {"between", "solve"});
      }
    }
    if (doc_.registry.find_link(lk.name)) throw ParseError(l.number, 1, "duplicate link " + lk.name);
    pending_between_[lk.name] = between;
    doc_.registry.add_link(std::move(lk));
  }

  void invariance(const Line& l, std::string_view rest, const std::vector<const Line*>& body) {
    BacklundLink inv;
    inv.kind = LinkKind::Invariance;
    inv.pos = {l.number, 1};
    std::size_t colon = rest.find(':');
    std::string_view head = colon == std::string_view::npos ? rest : rest.substr(0, colon);
    std::string_view w = word(head);
    inv.name = name_at(l, w, "name");
    std::string_view on = word(head);
    if (on != "on") throw ParseError(l.number, col_of(l, on.empty() ? head : on), "expected 'on'", {"on"});
    inv.from = inv.to = name_at(l, word(head), "equation");
    for (auto t = word(head); !t.empty(); t = word(head)) {
      if (t == "cited") {
        inv.cited = true;
      } else if (t == "params") {
        for (auto p = word(head); !p.empty(); p = word(head)) {
          if (!valid_field(std::string(p))) throw ParseError(l.number, col_of(l, p), "invalid parameter name", {"identifier"});
          inv.params.emplace_back(p);
        }
      } else {
        throw ParseError(l.number, col_of(l, t), "unexpected '" + std::string(t) + "'", {"params", "cited", "':'"});
      }
    }
    if (inv.cited && colon != std::string_view::npos)
      throw ParseError(l.number, col_of(l, rest.substr(colon)), "a cited invariance carries no formula");
    if (!inv.cited) {
      if (colon == std::string_view::npos) throw ParseError(l.number, static_cast<int>(l.text.size()) + 1, "missing ':'", {"':'", "cited"});
      std::string_view map = rest.substr(colon + 1);
      std::size_t arrow = map.find("->");
      if (arrow == std::string_view::npos) throw ParseError(l.number, col_of(l, map), "missing '->'", {"'->'"});
      std::string_view lhs = strip(map.substr(0, arrow));
      auto toks = tokenize(lhs, l.number, col_of(l, lhs));
      bool ok = !toks.empty() && toks[0].kind == Token::Kind::Ident && toks[0].order == 0 && !toks[0].time &&
                valid_field(toks[0].text);
      if (ok && toks.size() == 4 && toks[1].kind == Token::Kind::Punct && toks[1].text == "^" &&
          toks[2].kind == Token::Kind::Number) {
        inv.power = std::stoi(toks[2].text);
      } else if (!ok || toks.size() != 2) {
        throw ParseError(l.number, col_of(l, lhs), "invariance maps a field or a positive power of it", {"field", "field^k"});
      }
      if (inv.power < 1) throw ParseError(l.number, col_of(l, lhs), "power must be positive");
      inv.from_field = inv.to_field = toks[0].text;
      ParseScope sc = scope_;
      sc.params.insert(inv.params.begin(), inv.params.end());
      JetExpr image = expr_at(l, map.substr(arrow + 2), sc);
      inv.rule = SubstitutionRule{inv.hat_field(), 0, image};
      inv.relation = JetExpr::jet(inv.hat_field()).pow(inv.power) - image;
    }
    for (const Line* b : body) {
      std::string_view br = view(*b);
      std::string_view kw = word(br);
      if (kw == "loop") {
        inv.loop = name_at(*b, word(br), "label");
      } else if (kw == "assume") {
        std::string a = trim(br);
        if (a.empty()) throw ParseError(b->number, col_of(*b, kw), "empty assumption", {"assumption"});
        inv.assumptions.push_back(a);
      } else {
        throw ParseError(b->number, col_of(*b, kw), "unknown invariance attribute '" + std::string(kw) + "'", {"loop", "assume"});
      }
    }
    if (doc_.registry.find_link(inv.name)) throw ParseError(l.number, 1, "duplicate name " + inv.name);
    doc_.registry.add_link(std::move(inv));
  }

  // Fills endpoints now that every equation is known.
  void resolve() {
    ChartRegistry out;
    for (auto eq : doc_.registry.equations()) out.add_equation(eq);
    for (auto lk : doc_.registry.links()) {
      const int line = lk.pos.line;
      if (lk.kind == LinkKind::Invariance) {
        const EquationDef* eq = out.find_equation(lk.from);
        if (!eq) throw ParseError(line, 1, "unknown equation " + lk.from);
        if (!lk.cited && lk.from_field != eq->field)
          throw ParseError(line, 1, "invariance " + lk.name + " acts on " + lk.from_field + " but " + eq->name +
                                        " is an equation for " + eq->field);
        lk.from_field = lk.to_field = eq->field;
        out.add_link(lk);
        continue;
      }
      const auto& between = pending_between_.at(lk.name);
      if (!between.empty()) {
        const EquationDef* a = out.find_equation(between[0]);
        const EquationDef* b = out.find_equation(between[1]);
        if (!a) throw ParseError(line, 1, "unknown equation " + between[0]);
        if (!b) throw ParseError(line, 1, "unknown equation " + between[1]);
        lk.from = a->name;
        lk.to = b->name;
        if (lk.kind == LinkKind::Reciprocal) {
          if (lk.from_field != a->field || lk.to_field != b->field)
            throw ParseError(line, 1, "reciprocal link fields do not match its equations");
        } else {
          lk.from_field = a->field;
          lk.to_field = b->field;
        }
      } else if (lk.kind == LinkKind::Reciprocal) {
        const EquationDef* a = out.equation_for_field(lk.from_field);
        const EquationDef* b = out.equation_for_field(lk.to_field);
        if (!a || !b) throw ParseError(line, 1, "cannot infer the equations of link " + lk.name, {"between"});
        lk.from = a->name;
        lk.to = b->name;
      } else {
        auto fields = lk.relation.fields();
        if (fields.size() != 2) throw ParseError(line, 1, "relation of link " + lk.name + " must involve two fields");
        const EquationDef* a = out.equation_for_field(fields[0]);
        const EquationDef* b = out.equation_for_field(fields[1]);
        if (!a || !b) throw ParseError(line, 1, "cannot infer the equations of link " + lk.name, {"between"});
        lk.from = a->name;
        lk.to = b->name;
        lk.from_field = a->field;
        lk.to_field = b->field;
      }
      if (lk.kind == LinkKind::Differential) {
        for (const auto& f : lk.relation.fields())
          if (f != lk.from_field && f != lk.to_field)
            throw ParseError(line, 1, "relation of link " + lk.name + " mentions foreign field " + f);
        if (lk.rule && lk.rule->field != lk.from_field && lk.rule->field != lk.to_field)
          throw ParseError(line, 1, "link " + lk.name + " solves for " + lk.rule->field + ", which it does not relate");
      }
      out.add_link(lk);
    }
    doc_.registry = std::move(out);
  }

  std::vector<Line> lines_;
  ParseScope scope_;
  ChartDocument doc_;
  std::map<std::string, std::vector<std::string>> pending_between_;
};

std::string expr_or_wrap(const JetExpr& e) {
  std::string s = e.str();
  bool simple = e.num().size() == 1 && e.den().is_constant() && e.num().terms()[0].coeff == 1;
  return simple ? s : "(" + s + ")";
}

}  // namespace

JetExpr parse_expr(std::string_view text, const ParseScope& scope) {
  return Parser(text, scope, 1, 1).whole_expr();
}

PseudoOp parse_operator(std::string_view text, const ParseScope& scope) {
  return Parser(text, scope, 1, 1).whole_operator();
}

const PseudoOp* ChartDocument::find_operator(const std::string& name) const {
  for (const auto& [n, op] : op_defines)
    if (n == name) return &op;
  return nullptr;
}

ChartDocument parse_chart(std::string_view source) { return ChartParser(source).run(); }

ChartDocument load_chart(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open chart file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_chart(ss.str());
}

std::string print_chart(const ChartDocument& doc) {
  std::ostringstream out;
  out << "chart-version " << doc.version << "\n";
  if (!doc.defines.empty() || !doc.op_defines.empty()) out << "\n";
  for (const auto& [name, e] : doc.defines) out << "define " << name << " = " << e.str() << "\n";
  for (const auto& [name, op] : doc.op_defines) out << "define-op " << name << " = " << op.str() << "\n";
  for (const auto& eq : doc.registry.equations()) {
    out << "\nequation " << eq.name << ": ";
    if (eq.multiplier != JetExpr(1)) out << expr_or_wrap(eq.multiplier) << "*";
    out << eq.field << "_t = " << eq.rhs.str() << "\n";
    if (eq.has_operator()) {
      out << "  operator " << eq.recursion.str() << "\n";
      out << "  seed " << eq.seed.str();
      if (eq.seed_power != 1) out << " power " << eq.seed_power;
      out << "\n";
    }
  }
  for (const auto& lk : doc.registry.links()) {
    if (lk.kind == LinkKind::Invariance) {
      out << "\ninvariance " << lk.name << " on " << lk.from;
      if (lk.cited) {
        out << " cited\n";
      } else {
        if (!lk.params.empty()) {
          out << " params";
          for (const auto& p : lk.params) out << " " << p;
        }
        out << ": " << lk.from_field;
        if (lk.power != 1) out << "^" << lk.power;
        out << " -> " << lk.rule->value.str() << "\n";
      }
      if (!lk.loop.empty()) out << "  loop " << lk.loop << "\n";
      for (const auto& a : lk.assumptions) out << "  assume " << a << "\n";
      continue;
    }
    out << "\nlink " << lk.name << ": ";
    if (lk.kind == LinkKind::Reciprocal)
      out << "reciprocal " << lk.from_field << " -> " << lk.to_field << "\n";
    else
      out << lk.relation.str() << " = 0\n";
    out << "  between " << lk.from << " " << lk.to << "\n";
    if (lk.rule) out << "  solve " << jet_text(lk.rule->field, lk.rule->order) << " -> " << lk.rule->value.str() << "\n";
  }
  return out.str();
}

bool same_document(const ChartDocument& a, const ChartDocument& b) {
  if (a.version != b.version || a.defines != b.defines) return false;
  if (a.op_defines.size() != b.op_defines.size()) return false;
  for (std::size_t i = 0; i < a.op_defines.size(); ++i)
    if (a.op_defines[i].first != b.op_defines[i].first || !(a.op_defines[i].second == b.op_defines[i].second))
      return false;
  const auto& ea = a.registry.equations();
  const auto& eb = b.registry.equations();
  if (ea.size() != eb.size()) return false;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    const auto &x = ea[i], &y = eb[i];
    if (x.name != y.name || x.field != y.field || x.rhs != y.rhs || x.multiplier != y.multiplier ||
        !(x.recursion == y.recursion) || x.seed != y.seed || x.seed_power != y.seed_power)
      return false;
  }
  const auto& la = a.registry.links();
  const auto& lb = b.registry.links();
  if (la.size() != lb.size()) return false;
  for (std::size_t i = 0; i < la.size(); ++i) {
    const auto &x = la[i], &y = lb[i];
    if (x.name != y.name || x.kind != y.kind || x.from != y.from || x.to != y.to || x.from_field != y.from_field ||
        x.to_field != y.to_field || x.relation != y.relation || x.power != y.power || x.params != y.params ||
        x.loop != y.loop || x.cited != y.cited || x.assumptions != y.assumptions || x.rule.has_value() != y.rule.has_value())
      return false;
    if (x.rule && (x.rule->field != y.rule->field || x.rule->order != y.rule->order || x.rule->value != y.rule->value))
      return false;
  }
  return true;
}

}  // namespace kdvchart
