#include "svs/gateway/select.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "svs/gateway/topic.hpp"

namespace svs::gateway {
namespace {

enum class Tok { Ident, Keyword, Number, String, Star, Comma, LParen, RParen, Op, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;  // keywords upper-cased, identifiers lower-cased
  std::size_t offset = 0;
  double number = 0.0;
  CompareOp op = CompareOp::Eq;
};

bool is_keyword(std::string_view upper) {
  return upper == "SELECT" || upper == "FROM" || upper == "WHERE" || upper == "AND" || upper == "OR" ||
         upper == "NOT" || upper == "TRUE" || upper == "FALSE";
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token tok;
    tok.offset = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      const auto word = text.substr(i, j - i);
      const auto up = upper(word);
      if (is_keyword(up)) {
        tok.kind = Tok::Keyword;
        tok.text = up;
      } else {
        tok.kind = Tok::Ident;
        tok.text = lower(word);
      }
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               ((c == '-' || c == '.') && i + 1 < text.size() &&
                (std::isdigit(static_cast<unsigned char>(text[i + 1])) || text[i + 1] == '.'))) {
      std::size_t j = i + 1;
      while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.' ||
                                 text[j] == 'e' || text[j] == 'E' ||
                                 ((text[j] == '-' || text[j] == '+') && (text[j - 1] == 'e' || text[j - 1] == 'E')))) {
        ++j;
      }
      const auto lit = text.substr(i, j - i);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), v);
      if (ec != std::errc() || ptr != lit.data() + lit.size()) {
        throw SelectSyntaxError("malformed number '" + std::string(lit) + "'", i);
      }
      tok.kind = Tok::Number;
      tok.number = v;
      tok.text = std::string(lit);
      i = j;
    } else if (c == '\'' || c == '"') {
      std::size_t j = i + 1;
      std::string value;
      while (j < text.size() && text[j] != c) {
        if (text[j] == '\\' && j + 1 < text.size()) ++j;
        value += text[j++];
      }
      if (j >= text.size()) throw SelectSyntaxError("unterminated string", i);
      tok.kind = Tok::String;
      tok.text = std::move(value);
      i = j + 1;
    } else if (c == '*') {
      tok.kind = Tok::Star;
      ++i;
    } else if (c == ',') {
      tok.kind = Tok::Comma;
      ++i;
    } else if (c == '(') {
      tok.kind = Tok::LParen;
      ++i;
    } else if (c == ')') {
      tok.kind = Tok::RParen;
      ++i;
    } else if (c == '=' || c == '!' || c == '<' || c == '>') {
      tok.kind = Tok::Op;
      const bool eq_next = i + 1 < text.size() && text[i + 1] == '=';
      if (c == '=') {
        tok.op = CompareOp::Eq;
        i += 1;
      } else if (c == '!') {
        if (!eq_next) throw SelectSyntaxError("expected '!='", i);
        tok.op = CompareOp::Ne;
        i += 2;
      } else if (c == '<') {
        if (i + 1 < text.size() && text[i + 1] == '>') {
          tok.op = CompareOp::Ne;
          i += 2;
        } else {
          tok.op = eq_next ? CompareOp::Le : CompareOp::Lt;
          i += eq_next ? 2 : 1;
        }
      } else {
        tok.op = eq_next ? CompareOp::Ge : CompareOp::Gt;
        i += eq_next ? 2 : 1;
      }
    } else {
      throw SelectSyntaxError(std::string("unexpected character '") + c + "'", i);
    }
    out.push_back(std::move(tok));
  }
  Token end;
  end.kind = Tok::End;
  end.offset = text.size();
  out.push_back(end);
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  SelectStatement statement() {
    SelectStatement stmt;
    expect_keyword("SELECT");
    if (peek().kind == Tok::Star) {
      advance();
      stmt.select_all = true;
    } else {
      if (peek().kind != Tok::Ident) fail("expected '*' or a field name");
      stmt.fields.push_back(advance().text);
      while (peek().kind == Tok::Comma) {
        advance();
        if (peek().kind != Tok::Ident) fail("expected a field name after ','");
        stmt.fields.push_back(advance().text);
      }
    }
    expect_keyword("FROM");
    if (peek().kind != Tok::String) fail("expected a quoted topic filter");
    const Token& from = advance();
    try {
      validate_topic_filter(from.text);
    } catch (const InvalidFilterError& e) {
      throw SelectSyntaxError(e.what(), from.offset);
    }
    stmt.from = from.text;
    if (is_keyword("WHERE")) {
      advance();
      stmt.where = expr();
    }
    if (peek().kind != Tok::End) fail("unexpected trailing input");
    return stmt;
  }

 private:
  ExprPtr expr() {
    ExprPtr lhs = conjunction();
    while (is_keyword("OR")) {
      advance();
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::Or;
      node->lhs = lhs;
      node->rhs = conjunction();
      lhs = node;
    }
    return lhs;
  }

  ExprPtr conjunction() {
    ExprPtr lhs = term();
    while (is_keyword("AND")) {
      advance();
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::And;
      node->lhs = lhs;
      node->rhs = term();
      lhs = node;
    }
    return lhs;
  }

  ExprPtr term() {
    if (is_keyword("NOT")) {
      advance();
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::Not;
      node->lhs = primary();
      return node;
    }
    return primary();
  }

  ExprPtr primary() {
    if (peek().kind == Tok::LParen) {
      advance();
      ExprPtr inner = expr();
      if (peek().kind != Tok::RParen) fail("expected ')'");
      advance();
      return inner;
    }
    if (peek().kind != Tok::Ident) fail("expected a field name");
    auto node = std::make_shared<Expr>();
    node->kind = Expr::Kind::Compare;
    node->comparison.field = advance().text;
    if (peek().kind != Tok::Op) fail("expected a comparison operator");
    node->comparison.op = advance().op;
    const Token& lit = peek();
    if (lit.kind == Tok::Number) {
      node->comparison.literal = lit.number;
    } else if (lit.kind == Tok::String) {
      node->comparison.literal = lit.text;
    } else if (lit.kind == Tok::Keyword && (lit.text == "TRUE" || lit.text == "FALSE")) {
      node->comparison.literal = lit.text == "TRUE";
    } else {
      fail("expected a literal");
    }
    advance();
    return node;
  }

  const Token& peek() const { return toks_[pos_]; }
  const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool is_keyword(std::string_view kw) const { return peek().kind == Tok::Keyword && peek().text == kw; }
  void expect_keyword(std::string_view kw) {
    if (!is_keyword(kw)) fail("expected " + std::string(kw));
    advance();
  }
  [[noreturn]] void fail(const std::string& what) const { throw SelectSyntaxError(what, peek().offset); }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

void collect_fields(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == Expr::Kind::Compare) {
    if (std::find(out.begin(), out.end(), e.comparison.field) == out.end()) out.push_back(e.comparison.field);
    return;
  }
  if (e.lhs) collect_fields(*e.lhs, out);
  if (e.rhs) collect_fields(*e.rhs, out);
}

std::string literal_text(const Literal& lit) {
  if (const auto* d = std::get_if<double>(&lit)) {
    std::ostringstream os;
    os << *d;
    return os.str();
  }
  if (const auto* s = std::get_if<std::string>(&lit)) return "'" + *s + "'";
  return std::get<bool>(lit) ? "true" : "false";
}

template <typename T>
bool compare(const T& a, CompareOp op, const T& b) {
  switch (op) {
    case CompareOp::Eq:
      return a == b;
    case CompareOp::Ne:
      return a != b;
    case CompareOp::Lt:
      return a < b;
    case CompareOp::Le:
      return a <= b;
    case CompareOp::Gt:
      return a > b;
    case CompareOp::Ge:
      return a >= b;
  }
  return false;
}

bool evaluate_comparison(const Comparison& c, const Json& message) {
  if (!message.is_object()) throw RuleEvaluationError("message body is not a document");
  auto it = message.find(c.field);
  if (it == message.end()) throw RuleEvaluationError("message has no field '" + c.field + "'");
  const Json& v = *it;
  if (const auto* d = std::get_if<double>(&c.literal)) {
    if (!v.is_number()) throw RuleEvaluationError("field '" + c.field + "' is not a number");
    return compare(v.get<double>(), c.op, *d);
  }
  if (const auto* s = std::get_if<std::string>(&c.literal)) {
    if (!v.is_string()) throw RuleEvaluationError("field '" + c.field + "' is not a string");
    return compare(v.get_ref<const std::string&>(), c.op, *s);
  }
  if (!v.is_boolean()) throw RuleEvaluationError("field '" + c.field + "' is not a boolean");
  if (c.op != CompareOp::Eq && c.op != CompareOp::Ne) {
    throw RuleEvaluationError("booleans only support '=' and '!='");
  }
  return compare(v.get<bool>(), c.op, std::get<bool>(c.literal));
}

}  // namespace

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Eq:
      return "=";
    case CompareOp::Ne:
      return "!=";
    case CompareOp::Lt:
      return "<";
    case CompareOp::Le:
      return "<=";
    case CompareOp::Gt:
      return ">";
    case CompareOp::Ge:
      return ">=";
  }
  return "?";
}

std::vector<std::string> SelectStatement::referenced_fields() const {
  std::vector<std::string> out = fields;
  if (where) collect_fields(*where, out);
  return out;
}

SelectStatement parse_select(std::string_view text) { return Parser(tokenize(text)).statement(); }

std::string to_string(const Expr& expr) {
  switch (expr.kind) {
    case Expr::Kind::Compare:
      return expr.comparison.field + " " + std::string(to_string(expr.comparison.op)) + " " +
             literal_text(expr.comparison.literal);
    case Expr::Kind::And:
      return "(" + to_string(*expr.lhs) + " AND " + to_string(*expr.rhs) + ")";
    case Expr::Kind::Or:
      return "(" + to_string(*expr.lhs) + " OR " + to_string(*expr.rhs) + ")";
    case Expr::Kind::Not:
      return "NOT " + to_string(*expr.lhs);
  }
  return {};
}

std::string to_string(const SelectStatement& stmt) {
  std::string out = "SELECT ";
  if (stmt.select_all) {
    out += "*";
  } else {
    for (std::size_t i = 0; i < stmt.fields.size(); ++i) {
      if (i) out += ", ";
      out += stmt.fields[i];
    }
  }
  out += " FROM '" + stmt.from + "'";
  if (stmt.where) out += " WHERE " + to_string(*stmt.where);
  return out;
}

bool evaluate(const Expr& expr, const Json& message) {
  switch (expr.kind) {
    case Expr::Kind::Compare:
      return evaluate_comparison(expr.comparison, message);
    case Expr::Kind::And:
      return evaluate(*expr.lhs, message) && evaluate(*expr.rhs, message);
    case Expr::Kind::Or:
      return evaluate(*expr.lhs, message) || evaluate(*expr.rhs, message);
    case Expr::Kind::Not:
      return !evaluate(*expr.lhs, message);
  }
  return false;
}

Json project(const SelectStatement& stmt, const Json& message) {
  if (!message.is_object()) throw RuleEvaluationError("message body is not a document");
  if (stmt.select_all) return message;
  Json out = Json::object();
  for (const auto& f : stmt.fields) {
    auto it = message.find(f);
    if (it == message.end()) throw RuleEvaluationError("message has no field '" + f + "'");
    out[f] = *it;
  }
  return out;
}

}  // namespace svs::gateway
