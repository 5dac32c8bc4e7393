#include "ein/syntax.hpp"

#include <cctype>

namespace ein {

ParseError::ParseError(int line, int col, const std::string& msg)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg), line(line), col(col) {}

namespace {

enum class Tok { Num, Id, Sym, End };

struct Token {
  Tok kind;
  std::string text;
  int line, col;
};

std::vector<Token> lex(const std::string& s) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t k = 0;
  auto advance = [&](size_t n) {
    for (size_t t = 0; t < n; ++t, ++k) {
      if (s[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (k < s.size()) {
    char c = s[k];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    int l = line, cc = col;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t e = k;
      while (e < s.size() && std::isdigit(static_cast<unsigned char>(s[e]))) ++e;
      if (e + 1 < s.size() && s[e] == '.' && std::isdigit(static_cast<unsigned char>(s[e + 1]))) {
        ++e;
        while (e < s.size() && std::isdigit(static_cast<unsigned char>(s[e]))) ++e;
      }
      out.push_back({Tok::Num, s.substr(k, e - k), l, cc});
      advance(e - k);
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t e = k;
      while (e < s.size() && (std::isalnum(static_cast<unsigned char>(s[e])) || s[e] == '_')) ++e;
      out.push_back({Tok::Id, s.substr(k, e - k), l, cc});
      advance(e - k);
    } else if (std::string("+-*/@()[],").find(c) != std::string::npos) {
      out.push_back({Tok::Sym, std::string(1, c), l, cc});
      advance(1);
    } else {
      throw ParseError(l, cc, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Tok::End, "", line, col});
  return out;
}

Rational parseNumber(const std::string& t) {
  auto dot = t.find('.');
  if (dot == std::string::npos) return Rational(mpz_class(t));
  std::string digits = t.substr(0, dot) + t.substr(dot + 1);
  mpz_class den = 1;
  for (size_t k = dot + 1; k < t.size(); ++k) den *= 10;
  Rational q(mpz_class(digits), den);
  q.canonicalize();
  return q;
}

class Parser {
 public:
  Parser(const std::string& text, const TypeEnv* env) : toks_(lex(text)), env_(env) {}

  Expr run() {
    Expr e = expr();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    return e;
  }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;
  const TypeEnv* env_;

  const Token& peek() const { return toks_[pos_]; }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(peek().line, peek().col, msg); }

  bool isSym(const char* s) const { return peek().kind == Tok::Sym && peek().text == s; }
  void expect(const char* s) {
    if (!isSym(s)) fail(std::string("expected '") + s + "'");
    ++pos_;
  }
  std::string ident() {
    if (peek().kind != Tok::Id) fail("expected identifier");
    return toks_[pos_++].text;
  }
  int integer() {
    if (peek().kind != Tok::Num || peek().text.find('.') != std::string::npos) fail("expected integer");
    return std::stoi(toks_[pos_++].text);
  }
  long signedInteger() {
    bool minus = false;
    if (isSym("-")) {
      minus = true;
      ++pos_;
    }
    long v = integer();
    return minus ? -v : v;
  }

  IndexTerm index() {
    if (peek().kind == Tok::Id) return IndexTerm::v(ident());
    int v = integer();
    if (v < 1) fail("index constants are 1-based");
    return IndexTerm::c(v);
  }

  MultiIndex indexList(const char* close) {
    MultiIndex m;
    if (isSym(close)) return m;
    m.push_back(index());
    while (isSym(",")) {
      ++pos_;
      m.push_back(index());
    }
    return m;
  }

  MultiIndex bracketed() {
    expect("[");
    MultiIndex m = indexList("]");
    expect("]");
    return m;
  }

  Expr expr() {
    Expr e = term();
    while (isSym("+") || isSym("-")) {
      bool plus = peek().text == "+";
      ++pos_;
      Expr r = term();
      e = plus ? add(e, r) : sub(e, r);
    }
    return e;
  }

  Expr term() {
    Expr e = factor();
    while (isSym("*") || isSym("/")) {
      bool times = peek().text == "*";
      ++pos_;
      Expr r = factor();
      e = times ? mul(e, r) : div(e, r);
    }
    return e;
  }

  Expr factor() {
    if (isSym("-")) {
      ++pos_;
      return neg(factor());
    }
    Expr e = primary();
    while (isSym("@")) {
      ++pos_;
      e = probe(e, primary());
    }
    return e;
  }

  Expr primary() {
    const Token& t = peek();
    if (t.kind == Tok::Num) {
      ++pos_;
      return cst(parseNumber(t.text));
    }
    if (isSym("(")) {
      ++pos_;
      Expr e = expr();
      expect(")");
      return e;
    }
    if (t.kind != Tok::Id) fail("expected expression");
    std::string name = ident();
    if (isSym("[")) {
      MultiIndex a = bracketed();
      if (env_) {
        auto it = env_->find(name);
        if (it != env_->end() && it->second.kind == ParamKind::Fld) return fld(name, a);
      }
      return ten(name, a);
    }
    if (!isSym("(")) {
      if (env_) {
        auto it = env_->find(name);
        if (it != env_->end() && it->second.kind == ParamKind::Fld) return fld(name);
      }
      return ten(name);
    }
    int line = t.line, col = t.col;
    ++pos_;
    Expr e = call(name, line, col);
    expect(")");
    return e;
  }

  Expr call(const std::string& fn, int line, int col) {
    if (fn == "delta") {
      IndexTerm i = index();
      expect(",");
      IndexTerm j = index();
      return delta(i, j);
    }
    if (fn == "eps") {
      MultiIndex m = indexList(")");
      if (m.size() != 2 && m.size() != 3) throw ParseError(line, col, "eps arity must be 2 or 3");
      return eps(m);
    }
    if (fn == "conv") {
      std::string v = ident();
      expect(",");
      MultiIndex a = bracketed();
      expect(",");
      std::string h = ident();
      expect(",");
      MultiIndex b = bracketed();
      return conv(v, a, h, b);
    }
    if (fn == "sum") {
      std::string i = ident();
      expect(",");
      int lo = integer();
      if (lo != 1) throw ParseError(line, col, "sum lower bound must be 1");
      expect(",");
      int hi = integer();
      if (hi < 1) throw ParseError(line, col, "sum upper bound must be >= 1");
      expect(",");
      return sum(i, hi, expr());
    }
    if (fn == "d") {
      MultiIndex nu;
      if (isSym("[")) {
        nu = bracketed();
      } else {
        nu.push_back(index());
      }
      if (nu.empty()) throw ParseError(line, col, "derivative needs at least one index");
      expect(",");
      return partial(nu, expr());
    }
    if (fn == "lift") {
      int d = integer();
      if (d < 1) throw ParseError(line, col, "lift dimension must be >= 1");
      expect(",");
      return lift(d, expr());
    }
    if (fn == "pow") {
      Expr b = expr();
      expect(",");
      return pow(b, static_cast<int>(signedInteger()));
    }
    if (fn == "frac") {
      long p = signedInteger();
      expect(",");
      long q = signedInteger();
      if (q == 0) throw ParseError(line, col, "zero denominator");
      Rational r(p, q);
      r.canonicalize();
      return cst(r);
    }
    auto op = opFromName(fn);
    if (!op || !isUnary(*op) || *op == Op::Pow || *op == Op::Neg)
      throw ParseError(line, col, "unknown operator '" + fn + "'");
    return unary(*op, expr());
  }
};

std::string join(const MultiIndex& m) {
  std::string s;
  for (size_t k = 0; k < m.size(); ++k) {
    if (k) s += ",";
    s += printIndex(m[k]);
  }
  return s;
}

int prec(const Expr& e) {
  switch (e->op) {
    case Op::Add:
    case Op::Sub:
      return 1;
    case Op::Mul:
    case Op::Div:
      return 2;
    case Op::Neg:
      return 3;
    case Op::Probe:
      return 4;
    default:
      return 5;
  }
}

std::string pr(const Expr& e, int need);

std::string prAt(const Expr& e, int need) {
  std::string s = pr(e, need);
  return prec(e) < need ? "(" + s + ")" : s;
}

std::string pr(const Expr& e, int) {
  switch (e->op) {
    case Op::Const:
      return printRational(e->value);
    case Op::Tensor:
    case Op::Field:
      return e->name + "[" + join(e->alpha) + "]";
    case Op::Conv:
      return "conv(" + e->name + ",[" + join(e->alpha) + "]," + e->kernel + ",[" + join(e->beta) + "])";
    case Op::Delta:
      return "delta(" + join(e->alpha) + ")";
    case Op::Eps:
      return "eps(" + join(e->alpha) + ")";
    case Op::Sum:
      return "sum(" + e->name + ",1," + std::to_string(e->n) + ", " + print(e->kids[0]) + ")";
    case Op::Partial: {
      std::string nu = e->alpha.size() == 1 ? printIndex(e->alpha[0]) : "[" + join(e->alpha) + "]";
      return "d(" + nu + ", " + print(e->kids[0]) + ")";
    }
    case Op::Probe:
      return prAt(e->kids[0], 4) + " @ " + prAt(e->kids[1], 5);
    case Op::Lift:
      return "lift(" + std::to_string(e->n) + ", " + print(e->kids[0]) + ")";
    case Op::Neg:
      return "-" + prAt(e->kids[0], 3);
    case Op::Pow:
      return "pow(" + print(e->kids[0]) + ", " + std::to_string(e->n) + ")";
    case Op::Add:
      return prAt(e->kids[0], 1) + " + " + prAt(e->kids[1], 2);
    case Op::Sub:
      return prAt(e->kids[0], 1) + " - " + prAt(e->kids[1], 2);
    case Op::Mul:
      return prAt(e->kids[0], 2) + " * " + prAt(e->kids[1], 3);
    case Op::Div:
      return prAt(e->kids[0], 2) + " / " + prAt(e->kids[1], 3);
    default:
      return std::string(opName(e->op)) + "(" + print(e->kids[0]) + ")";
  }
}

}  // namespace

Expr parse(const std::string& text, const TypeEnv* env) { return Parser(text, env).run(); }

std::string print(const Expr& e) { return pr(e, 0); }

std::string printIndex(const IndexTerm& t) { return t.isVar() ? t.var : std::to_string(t.value); }

std::string printRational(const Rational& q) {
  if (q < 0) return "frac(" + q.get_num().get_str() + "," + q.get_den().get_str() + ")";
  if (q.get_den() == 1) return q.get_num().get_str();
  // terminating decimal when the denominator is 2^a 5^b
  mpz_class d = q.get_den();
  int twos = 0, fives = 0;
  while (d % 2 == 0) d /= 2, ++twos;
  while (d % 5 == 0) d /= 5, ++fives;
  if (d != 1) return "frac(" + q.get_num().get_str() + "," + q.get_den().get_str() + ")";
  int places = std::max(twos, fives);
  mpz_class scale = 1;
  for (int k = 0; k < places; ++k) scale *= 10;
  mpz_class scaled = q.get_num() * (scale / q.get_den());
  std::string digits = scaled.get_str();
  while (static_cast<int>(digits.size()) <= places) digits = "0" + digits;
  return digits.substr(0, digits.size() - places) + "." + digits.substr(digits.size() - places);
}

}  // namespace ein
