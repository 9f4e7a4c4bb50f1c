#pragma once

#include <map>
#include <memory>
#include <string>

namespace rgc {

/// Minimal arithmetic expressions: +, -, *, /, ^, exp, log, sin, cos,
/// numeric constants, pi, and the variables x, y, theta, phi, rho.
class Expression {
  public:
    static Expression parse(const std::string& text);

    double eval(const std::map<std::string, double>& vars) const;
    const std::string& text() const { return text_; }

    Expression() = default;

    struct Node;  // exposed for the parser implementation

  private:
    std::shared_ptr<const Node> root_;
    std::string text_;
};

}  // namespace rgc
