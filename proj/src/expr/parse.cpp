#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

#include "concircle/expr.hpp"

namespace concircle {
namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse_all() {
    Expr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + term();
      } else if (accept('-')) {
        lhs = lhs - term();
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = factor();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * factor();
      } else if (accept('/')) {
        lhs = lhs / factor();
      } else {
        return lhs;
      }
    }
  }

  Expr factor() {
    if (accept('-')) return -factor();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) return pow(base, exponent());
    return base;
  }

  // rational := ['-'] unsigned ['^' rational] | '(' ['-'] unsigned ['/' unsigned] ')'
  // A chained '^' is folded right to left and must stay rational.
  Rational exponent() {
    skip_ws();
    const std::size_t start = pos_;
    Rational r;
    if (accept('(')) {
      const bool neg = accept('-');
      r = unsigned_rational();
      if (accept('/')) {
        const Rational d = unsigned_rational();
        if (d.num == 0) fail("zero denominator in exponent");
        r = Rational::make(r.num * d.den, r.den * d.num);
      }
      expect(')');
      if (neg) r.num = -r.num;
    } else {
      const bool neg = accept('-');
      skip_ws();
      if (pos_ >= text_.size() || !(std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
        pos_ = start;
        fail("non-rational exponent");
      }
      r = unsigned_rational();
      if (neg) r.num = -r.num;
    }
    if (accept('^')) {
      const std::size_t at = pos_;
      const Rational outer = exponent();
      if (!outer.is_integer() || outer.num < 0 || outer.num > 64) {
        pos_ = at;
        fail("non-rational exponent");
      }
      Rational acc{1, 1};
      for (std::int64_t i = 0; i < outer.num; ++i) acc = Rational::make(acc.num * r.num, acc.den * r.den);
      r = acc;
    }
    return r;
  }

  // Decimal literal converted exactly: "1.25" -> 5/4.
  Rational unsigned_rational() {
    skip_ws();
    const std::size_t start = pos_;
    std::int64_t num = 0;
    std::int64_t den = 1;
    bool digits = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      num = num * 10 + (text_[pos_++] - '0');
      digits = true;
      if (num > std::numeric_limits<std::int32_t>::max()) fail("exponent too large");
    }
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        num = num * 10 + (text_[pos_++] - '0');
        den *= 10;
        digits = true;
        if (den > 1'000'000'000) fail("exponent has too many decimals");
      }
    }
    if (!digits) {
      pos_ = start;
      fail("non-rational exponent");
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) fail("non-rational exponent");
    return Rational::make(num, den);
  }

  Expr primary() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    if (c == '\0') fail("unexpected end of input");
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double value = 0.0;
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
      pos_ = start;
      fail("malformed number");
    }
    return Expr::constant(value);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (peek() != '(') return Expr::variable(name);
    ++pos_;
    Expr arg = expr();
    expect(')');
    if (name == "sin") return sin(arg);
    if (name == "cos") return cos(arg);
    if (name == "exp") return exp(arg);
    if (name == "log") return log(arg);
    if (name == "sqrt") return sqrt(arg);
    if (name == "abs") return abs(arg);
    pos_ = start;
    fail("unknown function '" + std::string(name) + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text) { return Parser(text).parse_all(); }

}  // namespace concircle
