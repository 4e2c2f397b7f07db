#include "kropina/expr.hpp"

#include <cctype>
#include <cmath>
#include <vector>

namespace kropina {

// AST node: literal, variable index, unary/binary op, or function call.
struct Expression::Node {
  enum class Kind { Literal, Variable, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Sqrt } kind;
  double literal = 0.0;
  int var = -1;
  std::shared_ptr<const Node> a, b;

  double eval(const Vec& x) const {
    switch (kind) {
      case Kind::Literal: return literal;
      case Kind::Variable: return x[var];
      case Kind::Neg: return -a->eval(x);
      case Kind::Add: return a->eval(x) + b->eval(x);
      case Kind::Sub: return a->eval(x) - b->eval(x);
      case Kind::Mul: return a->eval(x) * b->eval(x);
      case Kind::Div: return a->eval(x) / b->eval(x);
      case Kind::Pow: return std::pow(a->eval(x), b->eval(x));
      case Kind::Sin: return std::sin(a->eval(x));
      case Kind::Cos: return std::cos(a->eval(x));
      case Kind::Exp: return std::exp(a->eval(x));
      case Kind::Sqrt: return std::sqrt(a->eval(x));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind kind, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = kind;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

struct Parser {
  const std::string& src;
  int dim;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& message) const {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < pos && i < src.size(); ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ExprParseError(message, line, col);
  }

  void skip_ws() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < src.size() && src[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos < src.size() ? src[pos] : '\0';
  }

  NodePtr parse_expression() {
    NodePtr lhs = parse_term();
    while (true) {
      if (eat('+')) {
        lhs = make(Kind::Add, lhs, parse_term());
      } else if (eat('-')) {
        lhs = make(Kind::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    while (true) {
      if (eat('*')) {
        lhs = make(Kind::Mul, lhs, parse_unary());
      } else if (eat('/')) {
        lhs = make(Kind::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (eat('-')) return make(Kind::Neg, parse_unary());
    if (eat('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (eat('^')) return make(Kind::Pow, base, parse_unary());  // right associative
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos >= src.size()) fail("unexpected end of expression");
    const char c = src[pos];
    if (c == '(') {
      ++pos;
      NodePtr inner = parse_expression();
      if (!eat(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr parse_number() {
    const std::size_t start = pos;
    while (pos < src.size() &&
           (std::isdigit(static_cast<unsigned char>(src[pos])) || src[pos] == '.' ||
            src[pos] == 'e' || src[pos] == 'E' ||
            ((src[pos] == '+' || src[pos] == '-') && pos > start &&
             (src[pos - 1] == 'e' || src[pos - 1] == 'E'))))
      ++pos;
    try {
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::Literal;
      n->literal = std::stod(src.substr(start, pos - start));
      return n;
    } catch (const std::exception&) {
      pos = start;
      fail("invalid numeric literal");
    }
  }

  NodePtr parse_ident() {
    const std::size_t start = pos;
    while (pos < src.size() && (std::isalnum(static_cast<unsigned char>(src[pos])) ||
                                src[pos] == '_'))
      ++pos;
    const std::string name = src.substr(start, pos - start);

    if (name == "pi") {
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::Literal;
      n->literal = M_PI;
      return n;
    }
    if (name == "sin" || name == "cos" || name == "exp" || name == "sqrt") {
      if (!eat('(')) fail("expected '(' after function '" + name + "'");
      NodePtr arg = parse_expression();
      if (!eat(')')) fail("expected ')' closing call to '" + name + "'");
      Kind k = name == "sin"   ? Kind::Sin
               : name == "cos" ? Kind::Cos
               : name == "exp" ? Kind::Exp
                               : Kind::Sqrt;
      return make(k, arg);
    }
    if (name.size() >= 2 && name[0] == 'x') {
      bool digits = true;
      for (std::size_t i = 1; i < name.size(); ++i)
        digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
      if (digits) {
        const int idx = std::stoi(name.substr(1));
        if (idx < 1 || idx > dim) {
          pos = start;
          fail("variable '" + name + "' out of range for dimension " + std::to_string(dim));
        }
        auto n = std::make_shared<Expression::Node>();
        n->kind = Kind::Variable;
        n->var = idx - 1;
        return n;
      }
    }
    pos = start;
    fail("unknown identifier '" + name + "'");
  }
};

}  // namespace

Expression Expression::parse(const std::string& source, int dim) {
  Parser parser{source, dim};
  Expression expr;
  expr.root_ = parser.parse_expression();
  parser.skip_ws();
  if (parser.pos != source.size()) parser.fail("trailing input after expression");
  expr.source_ = source;
  return expr;
}

double Expression::eval(const Vec& x) const {
  if (!root_) throw SpecError("expr: evaluating an empty expression");
  return root_->eval(x);
}

}  // namespace kropina
