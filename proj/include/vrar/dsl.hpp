#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Verification-expression language used by multi-term rewards.
//
//   expr := contains(STRING)
//         | count_at_least(STRING, INT)
//         | not(expr)
//         | all(expr, expr {, expr})
//         | any(expr, expr {, expr})
//
// The full grammar lives in docs/grammar.md.
namespace vrar::dsl {

struct Expr {
  enum class Kind { contains, count_at_least, negation, all, any };

  Kind kind = Kind::contains;
  std::string literal;        // contains, count_at_least
  std::uint32_t count = 0;    // count_at_least
  std::vector<Expr> children; // negation (1), all/any (2+)

  static Expr contains(std::string literal);
  static Expr count_at_least(std::string literal, std::uint32_t n);
  static Expr negation(Expr child);
  static Expr all(std::vector<Expr> children);
  static Expr any(std::vector<Expr> children);

  friend bool operator==(const Expr&, const Expr&) = default;
};

struct Limits {
  std::size_t max_depth = 32;
  std::size_t max_nodes = 1024;
};

struct ParseDiagnostic {
  std::size_t offset = 0;
  std::string expected;
  std::string found;

  std::string message() const;
};

/// Either a parsed expression or the first diagnostic encountered.
struct ParseResult {
  std::optional<Expr> expr;
  ParseDiagnostic diagnostic;

  bool ok() const noexcept { return expr.has_value(); }
  explicit operator bool() const noexcept { return ok(); }
};

ParseResult parse(std::string_view text, const Limits& limits = {});

/// Canonical spelling: single space after commas, only quote and backslash escaped.
std::string render(const Expr& expr);

bool evaluate(const Expr& expr, std::string_view response_text);

std::size_t depth(const Expr& expr);
std::size_t node_count(const Expr& expr);

/// Empty optional when the expression satisfies the structural invariants,
/// otherwise a description of the first violation.
std::optional<std::string> validate(const Expr& expr, const Limits& limits = {});

/// Every string literal in the tree, in pre-order.
std::vector<std::string> literals(const Expr& expr);

}  // namespace vrar::dsl
