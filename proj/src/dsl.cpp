#include "vrar/dsl.hpp"

#include "vrar/unicode.hpp"

#include <limits>
#include <utility>

namespace vrar::dsl {

Expr Expr::contains(std::string literal) {
  Expr e;
  e.kind = Kind::contains;
  e.literal = std::move(literal);
  return e;
}

Expr Expr::count_at_least(std::string literal, std::uint32_t n) {
  Expr e;
  e.kind = Kind::count_at_least;
  e.literal = std::move(literal);
  e.count = n;
  return e;
}

Expr Expr::negation(Expr child) {
  Expr e;
  e.kind = Kind::negation;
  e.children.push_back(std::move(child));
  return e;
}

Expr Expr::all(std::vector<Expr> children) {
  Expr e;
  e.kind = Kind::all;
  e.children = std::move(children);
  return e;
}

Expr Expr::any(std::vector<Expr> children) {
  Expr e;
  e.kind = Kind::any;
  e.children = std::move(children);
  return e;
}

std::string ParseDiagnostic::message() const {
  return "expected " + expected + " at offset " + std::to_string(offset) + ", found " + found;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_ident(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

struct ParseFailure {
  ParseDiagnostic diagnostic;
};

class Parser {
 public:
  Parser(std::string_view text, const Limits& limits) : text_(text), limits_(limits) {}

  Expr parse_program() {
    Expr e = parse_expr(1);
    skip_space();
    if (pos_ != text_.size()) fail("end of input");
    return e;
  }

 private:
  [[noreturn]] void fail(std::string expected) { fail_at(pos_, std::move(expected)); }

  [[noreturn]] void fail_at(std::size_t at, std::string expected) {
    throw ParseFailure{ParseDiagnostic{at, std::move(expected), describe(at)}};
  }

  std::string describe(std::size_t at) const {
    if (at >= text_.size()) return "end of input";
    char c = text_[at];
    if (is_ident(c)) {
      std::size_t end = at;
      while (end < text_.size() && (is_ident(text_[end]) || is_digit(text_[end]))) ++end;
      return "identifier '" + std::string(text_.substr(at, end - at)) + "'";
    }
    if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7f) {
      static const char* hex = "0123456789ABCDEF";
      auto b = static_cast<unsigned char>(c);
      return std::string("byte 0x") + hex[b >> 4] + hex[b & 0xF];
    }
    return std::string("'") + c + "'";
  }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  void expect(char c, const char* what) {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(what);
    ++pos_;
  }

  void count_node() {
    if (++nodes_ > limits_.max_nodes) {
      fail("at most " + std::to_string(limits_.max_nodes) + " nodes");
    }
  }

  Expr parse_expr(std::size_t depth) {
    skip_space();
    const std::size_t start = pos_;
    if (depth > limits_.max_depth) fail("nesting depth at most " + std::to_string(limits_.max_depth));
    std::size_t end = pos_;
    while (end < text_.size() && (is_ident(text_[end]) || is_digit(text_[end]))) ++end;
    const std::string_view name = text_.substr(pos_, end - pos_);
    const char* callee = "one of contains, count_at_least, not, all, any";
    if (name.empty()) fail(callee);
    Expr::Kind kind;
    if (name == "contains") {
      kind = Expr::Kind::contains;
    } else if (name == "count_at_least") {
      kind = Expr::Kind::count_at_least;
    } else if (name == "not") {
      kind = Expr::Kind::negation;
    } else if (name == "all") {
      kind = Expr::Kind::all;
    } else if (name == "any") {
      kind = Expr::Kind::any;
    } else {
      fail_at(start, callee);
    }
    pos_ = end;
    count_node();
    expect('(', "'('");

    switch (kind) {
      case Expr::Kind::contains: {
        std::string lit = parse_string();
        expect(')', "')'");
        return Expr::contains(std::move(lit));
      }
      case Expr::Kind::count_at_least: {
        std::string lit = parse_string();
        expect(',', "','");
        std::uint32_t n = parse_int();
        expect(')', "')'");
        return Expr::count_at_least(std::move(lit), n);
      }
      case Expr::Kind::negation: {
        Expr child = parse_expr(depth + 1);
        expect(')', "')'");
        return Expr::negation(std::move(child));
      }
      case Expr::Kind::all:
      case Expr::Kind::any: {
        std::vector<Expr> children;
        children.push_back(parse_expr(depth + 1));
        while (true) {
          skip_space();
          if (pos_ < text_.size() && text_[pos_] == ',') {
            ++pos_;
            children.push_back(parse_expr(depth + 1));
            continue;
          }
          if (pos_ < text_.size() && text_[pos_] == ')') {
            if (children.size() < 2) fail("',' (all/any take at least two arguments)");
            ++pos_;
            break;
          }
          fail("',' or ')'");
        }
        return kind == Expr::Kind::all ? Expr::all(std::move(children)) : Expr::any(std::move(children));
      }
    }
    fail(callee);
  }

  std::string parse_string() {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != '"') fail("string literal");
    const std::size_t open = pos_;
    ++pos_;
    std::string out;
    while (true) {
      if (pos_ >= text_.size()) fail("closing '\"'");
      char c = text_[pos_];
      if (c == '"') {
        ++pos_;
        break;
      }
      if (c == '\\') {
        if (pos_ + 1 >= text_.size()) {
          ++pos_;
          fail("escape character '\"' or '\\'");
        }
        char next = text_[pos_ + 1];
        if (next != '"' && next != '\\') {
          ++pos_;
          fail("escape character '\"' or '\\'");
        }
        out.push_back(next);
        pos_ += 2;
        continue;
      }
      out.push_back(c);
      ++pos_;
    }
    if (out.empty()) fail_at(open, "non-empty string literal");
    if (!unicode::is_valid_utf8(out)) fail_at(open, "string literal of valid UTF-8");
    return out;
  }

  std::uint32_t parse_int() {
    skip_space();
    const std::size_t start = pos_;
    if (pos_ >= text_.size() || !is_digit(text_[pos_])) fail("positive integer");
    std::uint64_t value = 0;
    while (pos_ < text_.size() && is_digit(text_[pos_])) {
      value = value * 10 + static_cast<std::uint64_t>(text_[pos_] - '0');
      if (value > std::numeric_limits<std::int32_t>::max()) fail_at(start, "integer at most 2147483647");
      ++pos_;
    }
    if (value == 0) fail_at(start, "positive integer");
    return static_cast<std::uint32_t>(value);
  }

  std::string_view text_;
  Limits limits_;
  std::size_t pos_ = 0;
  std::size_t nodes_ = 0;
};

void render_into(const Expr& e, std::string& out) {
  auto quoted = [&out](const std::string& s) {
    out.push_back('"');
    for (char c : s) {
      if (c == '"' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    out.push_back('"');
  };
  auto list = [&](const char* name) {
    out += name;
    out.push_back('(');
    for (std::size_t i = 0; i < e.children.size(); ++i) {
      if (i) out += ", ";
      render_into(e.children[i], out);
    }
    out.push_back(')');
  };
  switch (e.kind) {
    case Expr::Kind::contains:
      out += "contains(";
      quoted(e.literal);
      out.push_back(')');
      break;
    case Expr::Kind::count_at_least:
      out += "count_at_least(";
      quoted(e.literal);
      out += ", " + std::to_string(e.count) + ")";
      break;
    case Expr::Kind::negation:
      list("not");
      break;
    case Expr::Kind::all:
      list("all");
      break;
    case Expr::Kind::any:
      list("any");
      break;
  }
}

bool eval_normalized(const Expr& e, std::string_view text) {
  switch (e.kind) {
    case Expr::Kind::contains: {
      const std::string lit = unicode::nfc(e.literal);
      return !lit.empty() && text.find(lit) != std::string_view::npos;
    }
    case Expr::Kind::count_at_least:
      return unicode::count_occurrences(text, unicode::nfc(e.literal), e.count) >= e.count;
    case Expr::Kind::negation:
      return !eval_normalized(e.children.front(), text);
    case Expr::Kind::all:
      for (const Expr& c : e.children) {
        if (!eval_normalized(c, text)) return false;
      }
      return true;
    case Expr::Kind::any:
      for (const Expr& c : e.children) {
        if (eval_normalized(c, text)) return true;
      }
      return false;
  }
  return false;
}

void collect_literals(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == Expr::Kind::contains || e.kind == Expr::Kind::count_at_least) out.push_back(e.literal);
  for (const Expr& c : e.children) collect_literals(c, out);
}

std::optional<std::string> validate_node(const Expr& e, std::size_t level, const Limits& limits) {
  if (level > limits.max_depth) return "depth exceeds " + std::to_string(limits.max_depth);
  switch (e.kind) {
    case Expr::Kind::contains:
    case Expr::Kind::count_at_least:
      if (e.literal.empty()) return std::string("empty literal");
      if (!unicode::is_valid_utf8(e.literal)) return std::string("literal is not valid UTF-8");
      if (!e.children.empty()) return std::string("leaf node has children");
      if (e.kind == Expr::Kind::count_at_least &&
          (e.count == 0 || e.count > static_cast<std::uint32_t>(std::numeric_limits<std::int32_t>::max()))) {
        return std::string("count_at_least requires 1 <= n <= 2147483647");
      }
      return std::nullopt;
    case Expr::Kind::negation:
      if (e.children.size() != 1) return std::string("not takes exactly one argument");
      break;
    case Expr::Kind::all:
    case Expr::Kind::any:
      if (e.children.size() < 2) return std::string("all/any take at least two arguments");
      break;
  }
  for (const Expr& c : e.children) {
    if (auto err = validate_node(c, level + 1, limits)) return err;
  }
  return std::nullopt;
}

}  // namespace

ParseResult parse(std::string_view text, const Limits& limits) {
  ParseResult result;
  try {
    Parser parser(text, limits);
    result.expr = parser.parse_program();
  } catch (const ParseFailure& f) {
    result.diagnostic = f.diagnostic;
  }
  return result;
}

std::string render(const Expr& expr) {
  std::string out;
  render_into(expr, out);
  return out;
}

bool evaluate(const Expr& expr, std::string_view response_text) {
  return eval_normalized(expr, unicode::nfc(response_text));
}

std::size_t depth(const Expr& expr) {
  std::size_t deepest = 0;
  for (const Expr& c : expr.children) deepest = std::max(deepest, depth(c));
  return deepest + 1;
}

std::size_t node_count(const Expr& expr) {
  std::size_t n = 1;
  for (const Expr& c : expr.children) n += node_count(c);
  return n;
}

std::optional<std::string> validate(const Expr& expr, const Limits& limits) {
  if (auto err = validate_node(expr, 1, limits)) return err;
  if (node_count(expr) > limits.max_nodes) return "node count exceeds " + std::to_string(limits.max_nodes);
  return std::nullopt;
}

std::vector<std::string> literals(const Expr& expr) {
  std::vector<std::string> out;
  collect_literals(expr, out);
  return out;
}

}  // namespace vrar::dsl
