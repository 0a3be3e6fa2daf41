#pragma once

#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "advgen/schema.hpp"
#include "advgen/textutil.hpp"

namespace advgen {

/// Syntax or reference error in a constraint file, with 1-based position.
struct ParseError : std::runtime_error {
  int line;
  int column;
  std::string message;  // bare text, without the position prefix
  ParseError(int line_, int column_, const std::string& what_)
      : std::runtime_error("line " + std::to_string(line_) + ", col " +
                          std::to_string(column_) + ": " + what_),
        line(line_),
        column(column_),
        message(what_) {}
};

/// Canonical form: sum_k w_k * x_k + bias >= 0 (or > 0 when strict).
/// Coefficients are keyed by feature name in a sorted map so iteration --
/// and therefore every derived sum and rendering -- is deterministic.
struct LinearConstraint {
  std::map<std::string, double> coefficients;
  double bias = 0.0;
  bool strict = false;
  std::string id;  // "c<N>" in file order; empty for conjunction members
};

struct ConditionalConstraint {
  std::vector<LinearConstraint> antecedent;
  std::vector<LinearConstraint> consequent;
  std::string id;
};

struct ConstraintSet {
  std::vector<LinearConstraint> linear;
  std::vector<ConditionalConstraint> conditional;
  FeatureSchema schema;
  std::vector<std::string> warnings;

  std::size_t size() const { return linear.size() + conditional.size(); }
};

struct EvalResult {
  bool satisfied = false;
  double slack = 0.0;
};

/// Sentinel slack for a conditional whose antecedent does not hold.
inline constexpr double kVacuousSlack = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Evaluation

inline double linear_slack(const LinearConstraint& c,
                           const std::map<std::string, double>& record) {
  double s = c.bias;
  for (const auto& [name, w] : c.coefficients) {
    auto it = record.find(name);
    if (it == record.end())
      throw ValidationError("evaluate: record missing feature '" + name + "'");
    s += w * it->second;
  }
  return s;
}

inline EvalResult evaluate(const LinearConstraint& c,
                           const std::map<std::string, double>& record) {
  double s = linear_slack(c, record);
  return {c.strict ? s > 0.0 : s >= 0.0, s};
}

inline EvalResult evaluate(const ConditionalConstraint& c,
                           const std::map<std::string, double>& record) {
  bool antecedent_holds = true;
  for (const LinearConstraint& a : c.antecedent)
    antecedent_holds = antecedent_holds && evaluate(a, record).satisfied;
  if (!antecedent_holds) return {true, kVacuousSlack};
  bool ok = true;
  double worst = kVacuousSlack;
  for (const LinearConstraint& q : c.consequent) {
    EvalResult r = evaluate(q, record);
    ok = ok && r.satisfied;
    worst = std::min(worst, r.slack);
  }
  return {ok, worst};
}

// ---------------------------------------------------------------------------
// Rendering (canonical text; parse(render(c)) round-trips)

inline std::string render(const LinearConstraint& c) {
  std::string out;
  bool first = true;
  for (const auto& [name, w] : c.coefficients) {
    if (first) {
      if (w < 0) out += "-";
      first = false;
    } else {
      out += w < 0 ? " - " : " + ";
    }
    out += format_double(std::abs(w)) + "*" + name;
  }
  if (c.bias != 0.0 || first) {
    if (first) {
      out += format_double(c.bias);
    } else {
      out += c.bias < 0 ? " - " : " + ";
      out += format_double(std::abs(c.bias));
    }
  }
  out += c.strict ? " > 0" : " >= 0";
  return out;
}

inline std::string render(const ConditionalConstraint& c) {
  std::string out = "if ";
  for (std::size_t i = 0; i < c.antecedent.size(); ++i) {
    if (i) out += " and ";
    out += render(c.antecedent[i]);
  }
  out += " then ";
  for (std::size_t i = 0; i < c.consequent.size(); ++i) {
    if (i) out += " and ";
    out += render(c.consequent[i]);
  }
  return out;
}

inline std::string render(const ConstraintSet& set) {
  std::string out;
  for (const LinearConstraint& c : set.linear) out += render(c) + "\n";
  for (const ConditionalConstraint& c : set.conditional) out += render(c) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

struct Token {
  enum Kind { number, identifier, plus, minus, star, cmp, kw_if, kw_then, kw_and, end };
  Kind kind = end;
  std::string text;   // identifier name or comparison operator
  double value = 0.0; // for numbers
  int column = 0;     // 1-based
};

inline std::vector<Token> tokenize_line(const std::string& line, int line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char ch = line[i];
    if (ch == '#') break;  // comment to end of line
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
      continue;
    }
    int col = static_cast<int>(i) + 1;
    if (ch == '+') {
      out.push_back({Token::plus, "+", 0.0, col});
      ++i;
    } else if (ch == '-') {
      out.push_back({Token::minus, "-", 0.0, col});
      ++i;
    } else if (ch == '*') {
      out.push_back({Token::star, "*", 0.0, col});
      ++i;
    } else if (ch == '>' || ch == '<') {
      std::string op(1, ch);
      if (i + 1 < line.size() && line[i + 1] == '=') {
        op += '=';
        i += 2;
      } else {
        ++i;
      }
      out.push_back({Token::cmp, op, 0.0, col});
    } else if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      std::size_t start = i;
      while (i < line.size() &&
             (std::isdigit(static_cast<unsigned char>(line[i])) || line[i] == '.'))
        ++i;
      // scientific notation accepted on input
      if (i < line.size() && (line[i] == 'e' || line[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < line.size() && (line[j] == '+' || line[j] == '-')) ++j;
        if (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) {
          ++j;
          while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
          i = j;
        }
      }
      std::string text = line.substr(start, i - start);
      try {
        out.push_back({Token::number, text, std::stod(text), col});
      } catch (const std::exception&) {
        throw ParseError(line_no, col, "malformed number '" + text + "'");
      }
    } else if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t start = i;
      while (i < line.size() && (std::isalnum(static_cast<unsigned char>(line[i])) ||
                                 line[i] == '_'))
        ++i;
      std::string text = line.substr(start, i - start);
      Token::Kind kind = text == "if"     ? Token::kw_if
                         : text == "then" ? Token::kw_then
                         : text == "and"  ? Token::kw_and
                                          : Token::identifier;
      out.push_back({kind, text, 0.0, col});
    } else {
      throw ParseError(line_no, col, std::string("unexpected character '") + ch + "'");
    }
  }
  int end_col = static_cast<int>(line.size()) + 1;
  out.push_back({Token::end, "", 0.0, end_col});
  return out;
}

/// One side of an inequality: coefficient map plus constant.
struct LinearExpr {
  std::map<std::string, double> coefficients;
  double constant = 0.0;
};

class LineParser {
 public:
  LineParser(std::vector<Token> tokens, int line_no, const FeatureSchema& schema)
      : tokens_(std::move(tokens)), line_(line_no), schema_(schema) {}

  bool at_if() const { return peek().kind == Token::kw_if; }

  LinearConstraint parse_linear() {
    LinearExpr lhs = parse_expr();
    Token op = expect(Token::cmp, "comparison operator");
    LinearExpr rhs = parse_expr();
    return normalize(lhs, op.text, rhs);
  }

  std::vector<LinearConstraint> parse_conj() {
    std::vector<LinearConstraint> out;
    out.push_back(parse_linear());
    while (peek().kind == Token::kw_and) {
      advance();
      out.push_back(parse_linear());
    }
    return out;
  }

  ConditionalConstraint parse_conditional() {
    expect(Token::kw_if, "'if'");
    ConditionalConstraint c;
    c.antecedent = parse_conj();
    expect(Token::kw_then, "'then'");
    c.consequent = parse_conj();
    return c;
  }

  void expect_end() {
    if (peek().kind != Token::end)
      throw ParseError(line_, peek().column, "unexpected trailing '" + peek().text + "'");
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& advance() { return tokens_[pos_++]; }

  Token expect(Token::Kind kind, const std::string& what) {
    if (peek().kind != kind)
      throw ParseError(line_, peek().column,
                       "expected " + what +
                           (peek().kind == Token::end ? ", found end of line"
                                                      : ", found '" + peek().text + "'"));
    return tokens_[pos_++];
  }

  // expr := ["+"|"-"] term (("+"|"-") term)*   (leading sign is a convenience
  // beyond the published grammar; needed so canonical rendering round-trips)
  LinearExpr parse_expr() {
    LinearExpr e;
    double sign = 1.0;
    if (peek().kind == Token::plus || peek().kind == Token::minus) {
      sign = peek().kind == Token::minus ? -1.0 : 1.0;
      advance();
    }
    parse_term(e, sign);
    while (peek().kind == Token::plus || peek().kind == Token::minus) {
      sign = advance().kind == Token::minus ? -1.0 : 1.0;
      parse_term(e, sign);
    }
    return e;
  }

  // term := [number "*"] identifier | number
  void parse_term(LinearExpr& e, double sign) {
    if (peek().kind == Token::number) {
      Token num = advance();
      if (peek().kind == Token::star) {
        advance();
        Token ident = expect(Token::identifier, "feature name after '*'");
        add_coefficient(e, ident, sign * num.value);
      } else {
        e.constant += sign * num.value;
      }
    } else if (peek().kind == Token::identifier) {
      Token ident = advance();
      add_coefficient(e, ident, sign);
    } else {
      throw ParseError(line_, peek().column,
                       peek().kind == Token::end ? "expected term, found end of line"
                                                 : "expected term, found '" + peek().text +
                                                       "'");
    }
  }

  void add_coefficient(LinearExpr& e, const Token& ident, double w) {
    const Feature* f = schema_.find(ident.text);
    if (!f)
      throw ParseError(line_, ident.column, "unknown feature '" + ident.text + "'");
    if (!f->continuous())
      throw ParseError(line_, ident.column,
                       "categorical feature '" + ident.text +
                           "' cannot appear in a constraint");
    e.coefficients[ident.text] += w;
  }

  LinearConstraint normalize(const LinearExpr& lhs, const std::string& op,
                             const LinearExpr& rhs) {
    // Orient as lhs - rhs >= 0; <=/< flip by negating every term.
    double flip = (op == "<=" || op == "<") ? -1.0 : 1.0;
    LinearConstraint c;
    c.strict = (op == ">" || op == "<");
    for (const auto& [name, w] : lhs.coefficients) c.coefficients[name] += flip * w;
    for (const auto& [name, w] : rhs.coefficients) c.coefficients[name] -= flip * w;
    c.bias = flip * (lhs.constant - rhs.constant);
    for (auto it = c.coefficients.begin(); it != c.coefficients.end();)
      it = it->second == 0.0 ? c.coefficients.erase(it) : std::next(it);
    if (c.coefficients.empty())
      throw ParseError(line_, 1, "constraint has no feature terms");
    return c;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  int line_;
  const FeatureSchema& schema_;
};

}  // namespace detail

inline ConstraintSet parse_constraints(const std::string& text, const FeatureSchema& schema) {
  schema.validate();
  ConstraintSet set;
  set.schema = schema;
  std::map<std::string, std::string> seen;  // canonical text -> id
  int next_id = 1;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string line =
        nl == std::string::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::vector<detail::Token> tokens = detail::tokenize_line(line, line_no);
    if (tokens.size() == 1) continue;  // blank or comment-only

    detail::LineParser parser(std::move(tokens), line_no, schema);
    std::string id = "c" + std::to_string(next_id++);
    std::string canonical;
    if (parser.at_if()) {
      ConditionalConstraint c = parser.parse_conditional();
      parser.expect_end();
      c.id = id;
      canonical = render(c);
      set.conditional.push_back(std::move(c));
    } else {
      LinearConstraint c = parser.parse_linear();
      parser.expect_end();
      c.id = id;
      canonical = render(c);
      set.linear.push_back(std::move(c));
    }
    auto [it, inserted] = seen.emplace(canonical, id);
    if (!inserted)
      set.warnings.push_back(id + " duplicates " + it->second + ": " + canonical);
  }
  if (set.size() == 0) throw ParseError(line_no, 1, "empty constraint set");
  return set;
}

// ---------------------------------------------------------------------------
// Statistics

struct ConstraintStats {
  std::size_t count = 0;
  std::size_t features_in_constraints = 0;  // F
  std::size_t total_features = 0;           // D
  double avg_features_per_constraint = 0.0; // avg F_phi = avg F+ + avg F-
  double avg_positive = 0.0;                // avg F+_phi
  double avg_negative = 0.0;                // avg F-_phi
};

inline ConstraintStats constraint_stats(const ConstraintSet& set) {
  ConstraintStats stats;
  stats.count = set.size();
  stats.total_features = set.schema.feature_count();

  std::set<std::string> all_features;
  double sum_pos = 0.0, sum_neg = 0.0;

  auto tally_components = [&](const std::vector<const LinearConstraint*>& parts) {
    // Signed occurrence over the union of components: a feature appearing
    // both positively and negatively contributes to both counts.
    std::set<std::string> pos, neg;
    for (const LinearConstraint* c : parts)
      for (const auto& [name, w] : c->coefficients) {
        all_features.insert(name);
        if (w > 0) pos.insert(name);
        if (w < 0) neg.insert(name);
      }
    sum_pos += static_cast<double>(pos.size());
    sum_neg += static_cast<double>(neg.size());
  };

  for (const LinearConstraint& c : set.linear) tally_components({&c});
  for (const ConditionalConstraint& c : set.conditional) {
    std::vector<const LinearConstraint*> parts;
    for (const LinearConstraint& a : c.antecedent) parts.push_back(&a);
    for (const LinearConstraint& q : c.consequent) parts.push_back(&q);
    tally_components(parts);
  }

  stats.features_in_constraints = all_features.size();
  double n = static_cast<double>(stats.count);
  stats.avg_positive = sum_pos / n;
  stats.avg_negative = sum_neg / n;
  // F_phi = F+_phi + F-_phi by definition; computing the average as the sum
  // of the two averages keeps that identity exact in floating point.
  stats.avg_features_per_constraint = stats.avg_positive + stats.avg_negative;
  return stats;
}

/// Layout matching the constraints-statistics table: one row per set.
inline std::string stats_table(const std::string& name, const ConstraintStats& s) {
  std::string out;
  out += "Dataset | # Constr. | F / D | Avg. F_phi | Avg. F_phi+ | Avg. F_phi-\n";
  out += name + " | " + std::to_string(s.count) + " | " +
         std::to_string(s.features_in_constraints) + " / " +
         std::to_string(s.total_features) + " | " +
         format_fixed(s.avg_features_per_constraint, 2) + " | " +
         format_fixed(s.avg_positive, 2) + " | " + format_fixed(s.avg_negative, 2) + "\n";
  return out;
}

}  // namespace advgen
