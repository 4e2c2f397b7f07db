#pragma once

#include <memory>
#include <string>

#include "kropina/core.hpp"

namespace kropina {

struct ExprParseError : SpecError {
  int line = 1;
  int column = 1;
  ExprParseError(const std::string& what, int line_, int column_)
      : SpecError(what + " (line " + std::to_string(line_) + ", column " +
                  std::to_string(column_) + ")"),
        line(line_),
        column(column_) {}
};

// Compiled coordinate formula over variables x1..xn. Grammar: + - * / ^,
// unary minus, parentheses, numeric literals, sin cos exp sqrt, and the
// constant pi.
class Expression {
 public:
  static Expression parse(const std::string& source, int dim);

  double eval(const Vec& x) const;
  const std::string& source() const { return source_; }

  Expression() = default;

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string source_;
};

}  // namespace kropina
