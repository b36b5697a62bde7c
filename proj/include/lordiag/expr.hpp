#pragma once

// Minimal infix expression language over the chart variables x, y, z.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' ['-' | '+'] integer)?
//   primary := number | 'x' | 'y' | 'z' | 'pi' | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | exp | sinh | cosh | sqrt

#include <array>
#include <charconv>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "lordiag/error.hpp"

namespace lordiag {

class Expr {
public:
  enum class Op { number, variable, negate, add, subtract, multiply, divide, power, call };
  enum class Function { sin, cos, exp, sinh, cosh, sqrt };

  Expr() : Expr(number(0.0)) {}

  static Expr number(double value) { return Expr(make(Op::number, value)); }
  static Expr variable(int axis) {
    auto n = make(Op::variable);
    n->axis = axis;
    return Expr(std::move(n));
  }
  static Expr negate(Expr a) { return unary(Op::negate, std::move(a)); }
  static Expr add(Expr a, Expr b) { return binary(Op::add, std::move(a), std::move(b)); }
  static Expr subtract(Expr a, Expr b) { return binary(Op::subtract, std::move(a), std::move(b)); }
  static Expr multiply(Expr a, Expr b) { return binary(Op::multiply, std::move(a), std::move(b)); }
  static Expr divide(Expr a, Expr b) { return binary(Op::divide, std::move(a), std::move(b)); }
  static Expr power(Expr base, int exponent) {
    auto n = make(Op::power);
    n->exponent = exponent;
    n->lhs = std::move(base.node_);
    return Expr(std::move(n));
  }
  static Expr call(Function fn, Expr arg) {
    auto n = make(Op::call);
    n->fn = fn;
    n->lhs = std::move(arg.node_);
    return Expr(std::move(n));
  }

  Op op() const { return node_->op; }
  double value() const { return node_->value; }
  int axis() const { return node_->axis; }
  int exponent() const { return node_->exponent; }
  Function function() const { return node_->fn; }
  Expr lhs() const { return Expr(node_->lhs); }
  Expr rhs() const { return Expr(node_->rhs); }

  double eval(double x, double y, double z) const {
    const std::array<double, 3> p{x, y, z};
    return eval_node(*node_, p);
  }
  double eval(const std::array<double, 3>& p) const { return eval_node(*node_, p); }

  friend bool operator==(const Expr& a, const Expr& b) { return same(a.node_.get(), b.node_.get()); }

private:
  struct Node {
    Op op{Op::number};
    double value{0.0};
    int axis{0};
    int exponent{1};
    Function fn{Function::sin};
    std::shared_ptr<const Node> lhs, rhs;
  };
  using NodePtr = std::shared_ptr<const Node>;

  explicit Expr(NodePtr n) : node_(std::move(n)) {}

  static std::shared_ptr<Node> make(Op op, double value = 0.0) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->value = value;
    return n;
  }
  static Expr unary(Op op, Expr a) {
    auto n = make(op);
    n->lhs = std::move(a.node_);
    return Expr(std::move(n));
  }
  static Expr binary(Op op, Expr a, Expr b) {
    auto n = make(op);
    n->lhs = std::move(a.node_);
    n->rhs = std::move(b.node_);
    return Expr(std::move(n));
  }

  static double eval_node(const Node& n, const std::array<double, 3>& p) {
    switch (n.op) {
      case Op::number: return n.value;
      case Op::variable: return p[static_cast<std::size_t>(n.axis)];
      case Op::negate: return -eval_node(*n.lhs, p);
      case Op::add: return eval_node(*n.lhs, p) + eval_node(*n.rhs, p);
      case Op::subtract: return eval_node(*n.lhs, p) - eval_node(*n.rhs, p);
      case Op::multiply: return eval_node(*n.lhs, p) * eval_node(*n.rhs, p);
      case Op::divide: return eval_node(*n.lhs, p) / eval_node(*n.rhs, p);
      case Op::power: return integer_power(eval_node(*n.lhs, p), n.exponent);
      case Op::call: {
        const double a = eval_node(*n.lhs, p);
        switch (n.fn) {
          case Function::sin: return std::sin(a);
          case Function::cos: return std::cos(a);
          case Function::exp: return std::exp(a);
          case Function::sinh: return std::sinh(a);
          case Function::cosh: return std::cosh(a);
          case Function::sqrt: return std::sqrt(a);
        }
      }
    }
    return 0.0;
  }

  static double integer_power(double base, int exponent) {
    double result = 1.0;
    unsigned e = static_cast<unsigned>(exponent < 0 ? -exponent : exponent);
    double b = base;
    while (e != 0) {
      if (e & 1U) result *= b;
      b *= b;
      e >>= 1U;
    }
    return exponent < 0 ? 1.0 / result : result;
  }

  static bool same(const Node* a, const Node* b) {
    if (a == b) return true;
    if (a == nullptr || b == nullptr || a->op != b->op) return false;
    switch (a->op) {
      case Op::number: return a->value == b->value;
      case Op::variable: return a->axis == b->axis;
      case Op::power: return a->exponent == b->exponent && same(a->lhs.get(), b->lhs.get());
      case Op::call: return a->fn == b->fn && same(a->lhs.get(), b->lhs.get());
      case Op::negate: return same(a->lhs.get(), b->lhs.get());
      default: return same(a->lhs.get(), b->lhs.get()) && same(a->rhs.get(), b->rhs.get());
    }
  }

  NodePtr node_;
};

inline const char* function_name(Expr::Function fn) {
  switch (fn) {
    case Expr::Function::sin: return "sin";
    case Expr::Function::cos: return "cos";
    case Expr::Function::exp: return "exp";
    case Expr::Function::sinh: return "sinh";
    case Expr::Function::cosh: return "cosh";
    case Expr::Function::sqrt: return "sqrt";
  }
  return "?";
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

namespace detail {

class ExprParser {
public:
  explicit ExprParser(std::string_view text) : text_(text) {}

  Expr parse() {
    Expr e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) {
      if (text_[pos_] == ')') throw ParseError(pos_, "unbalanced parentheses");
      throw ParseError(pos_, "unexpected character '" + std::string(1, text_[pos_]) + "'");
    }
    return e;
  }

private:
  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }
  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    Expr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::add(lhs, parse_term());
      } else if (accept('-')) {
        lhs = Expr::subtract(lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::multiply(lhs, parse_unary());
      } else if (accept('/')) {
        lhs = Expr::divide(lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) {
      Expr operand = parse_unary();
      // Negated literals fold into the literal so printed negative numbers reparse identically.
      if (operand.op() == Expr::Op::number) return Expr::number(-operand.value());
      return Expr::negate(operand);
    }
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (!accept('^')) return base;
    skip_space();
    bool negative = false;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) {
      negative = text_[pos_] == '-';
      ++pos_;
      skip_space();
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    if (pos_ == start || (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' ||
                                                  text_[pos_] == 'E' || is_alpha(text_[pos_])))) {
      throw ParseError(start, "non-integer exponent");
    }
    int exponent = 0;
    std::from_chars(text_.data() + start, text_.data() + pos_, exponent);
    return Expr::power(base, negative ? -exponent : exponent);
  }

  Expr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError(pos_, "unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      const std::size_t open = pos_;
      ++pos_;
      Expr inner = parse_sum();
      if (!accept(')')) throw ParseError(open, "unbalanced parentheses");
      return inner;
    }
    if (is_digit(c) || c == '.') return parse_number();
    if (is_alpha(c)) return parse_identifier();
    if (c == ')') throw ParseError(pos_, "unbalanced parentheses");
    throw ParseError(pos_, "unexpected character '" + std::string(1, c) + "'");
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (is_digit(text_[pos_]) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && is_digit(text_[p])) {
        pos_ = p;
        while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
      }
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (ec != std::errc() || ptr != text_.data() + pos_) throw ParseError(start, "malformed number");
    return Expr::number(value);
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (is_alpha(text_[pos_]) || is_digit(text_[pos_]) || text_[pos_] == '_')) ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "x") return Expr::variable(0);
    if (name == "y") return Expr::variable(1);
    if (name == "z") return Expr::variable(2);
    if (name == "pi") return Expr::number(std::numbers::pi);
    static constexpr std::array<std::pair<std::string_view, Expr::Function>, 6> functions{{
        {"sin", Expr::Function::sin},
        {"cos", Expr::Function::cos},
        {"exp", Expr::Function::exp},
        {"sinh", Expr::Function::sinh},
        {"cosh", Expr::Function::cosh},
        {"sqrt", Expr::Function::sqrt},
    }};
    for (const auto& [fname, fn] : functions) {
      if (name != fname) continue;
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] != '(') throw ParseError(pos_, "expected '(' after " + std::string(name));
      const std::size_t open = pos_;
      ++pos_;
      Expr arg = parse_sum();
      if (!accept(')')) throw ParseError(open, "unbalanced parentheses");
      return Expr::call(fn, arg);
    }
    throw ParseError(start, "unknown identifier '" + std::string(name) + "'");
  }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

  std::string_view text_;
  std::size_t pos_{0};
};

// Binding strength used by the printer; higher binds tighter.
inline int precedence(const Expr& e) {
  switch (e.op()) {
    case Expr::Op::add:
    case Expr::Op::subtract: return 1;
    case Expr::Op::multiply:
    case Expr::Op::divide: return 2;
    case Expr::Op::negate: return 3;
    case Expr::Op::number: return e.value() < 0.0 || std::signbit(e.value()) ? 3 : 5;
    case Expr::Op::power: return 4;
    default: return 5;
  }
}

inline void print_into(const Expr& e, std::string& out, int min_prec) {
  const bool paren = precedence(e) < min_prec;
  if (paren) out += '(';
  switch (e.op()) {
    case Expr::Op::number: out += format_number(e.value()); break;
    case Expr::Op::variable: out += "xyz"[e.axis()]; break;
    case Expr::Op::negate:
      out += '-';
      print_into(e.lhs(), out, 3);
      break;
    case Expr::Op::add:
    case Expr::Op::subtract:
      print_into(e.lhs(), out, 1);
      out += e.op() == Expr::Op::add ? " + " : " - ";
      print_into(e.rhs(), out, 2);
      break;
    case Expr::Op::multiply:
    case Expr::Op::divide:
      print_into(e.lhs(), out, 2);
      out += e.op() == Expr::Op::multiply ? "*" : "/";
      print_into(e.rhs(), out, 3);
      break;
    case Expr::Op::power:
      print_into(e.lhs(), out, 5);
      out += '^';
      out += std::to_string(e.exponent());
      break;
    case Expr::Op::call:
      out += function_name(e.function());
      out += '(';
      print_into(e.lhs(), out, 0);
      out += ')';
      break;
  }
  if (paren) out += ')';
}

}  // namespace detail

/// Parses `text`; throws ParseError with the byte offset of the first error.
inline Expr parse_expr(std::string_view text) { return detail::ExprParser(text).parse(); }

/// Prints with the minimal parentheses needed to reproduce the same tree.
inline std::string print_expr(const Expr& e) {
  std::string out;
  detail::print_into(e, out, 0);
  return out;
}

/// Replaces x, y, z by the given expressions.
inline Expr substitute(const Expr& e, const std::array<Expr, 3>& with) {
  switch (e.op()) {
    case Expr::Op::number: return e;
    case Expr::Op::variable: return with[static_cast<std::size_t>(e.axis())];
    case Expr::Op::negate: return Expr::negate(substitute(e.lhs(), with));
    case Expr::Op::add: return Expr::add(substitute(e.lhs(), with), substitute(e.rhs(), with));
    case Expr::Op::subtract: return Expr::subtract(substitute(e.lhs(), with), substitute(e.rhs(), with));
    case Expr::Op::multiply: return Expr::multiply(substitute(e.lhs(), with), substitute(e.rhs(), with));
    case Expr::Op::divide: return Expr::divide(substitute(e.lhs(), with), substitute(e.rhs(), with));
    case Expr::Op::power: return Expr::power(substitute(e.lhs(), with), e.exponent());
    case Expr::Op::call: return Expr::call(e.function(), substitute(e.lhs(), with));
  }
  return e;
}

/// Constant folding plus the 0/1 identities; enough to keep generated metric files readable.
inline Expr simplify(const Expr& e) {
  using Op = Expr::Op;
  auto is_const = [](const Expr& a, double v) { return a.op() == Op::number && a.value() == v; };
  switch (e.op()) {
    case Op::number:
    case Op::variable: return e;
    case Op::negate: {
      Expr a = simplify(e.lhs());
      if (a.op() == Op::number) return Expr::number(-a.value());
      if (a.op() == Op::negate) return a.lhs();
      return Expr::negate(a);
    }
    case Op::power: {
      Expr a = simplify(e.lhs());
      if (e.exponent() == 1) return a;
      if (e.exponent() == 0) return Expr::number(1.0);
      if (a.op() == Op::number) return Expr::number(Expr::power(a, e.exponent()).eval(0, 0, 0));
      return Expr::power(a, e.exponent());
    }
    case Op::call: {
      Expr a = simplify(e.lhs());
      Expr c = Expr::call(e.function(), a);
      if (a.op() == Op::number) return Expr::number(c.eval(0, 0, 0));
      return c;
    }
    default: break;
  }
  Expr a = simplify(e.lhs());
  Expr b = simplify(e.rhs());
  if (a.op() == Op::number && b.op() == Op::number) {
    switch (e.op()) {
      case Op::add: return Expr::number(a.value() + b.value());
      case Op::subtract: return Expr::number(a.value() - b.value());
      case Op::multiply: return Expr::number(a.value() * b.value());
      case Op::divide: return Expr::number(a.value() / b.value());
      default: break;
    }
  }
  switch (e.op()) {
    case Op::add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      if (b.op() == Op::number && b.value() < 0.0) return Expr::subtract(a, Expr::number(-b.value()));
      if (b.op() == Op::negate) return Expr::subtract(a, b.lhs());
      return Expr::add(a, b);
    case Op::subtract:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return simplify(Expr::negate(b));
      return Expr::subtract(a, b);
    case Op::multiply:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return Expr::number(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      if (is_const(a, -1.0)) return simplify(Expr::negate(b));
      if (is_const(b, -1.0)) return simplify(Expr::negate(a));
      return Expr::multiply(a, b);
    case Op::divide:
      if (is_const(a, 0.0)) return Expr::number(0.0);
      if (is_const(b, 1.0)) return a;
      return Expr::divide(a, b);
    default: return e;
  }
}

}  // namespace lordiag
