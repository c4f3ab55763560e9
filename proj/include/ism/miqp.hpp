// Copyright 2026 The ISM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Big-M MIQP export of the unordered problem in CPLEX LP text format, plus
// a small reader for the subset of the format the exporter writes. The
// reader exists so exported models can be evaluated at a known point
// without an external solver.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ism/bbism.hpp"
#include "ism/error.hpp"
#include "ism/oism.hpp"

namespace ism {

inline constexpr std::size_t kMiqpExportCap = 7;

struct MiqpExport {
  std::string text;
  double big_m = 0.0;
  std::vector<std::vector<ElementId>> orderings;  // y<k> selects orderings[k]
  std::size_t big_m_rows = 0;
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void append_term(std::string& out, double coef, const std::string& var) {
  out += coef < 0 ? " - " : " + ";
  out += fmt_num(std::abs(coef));
  out += ' ';
  out += var;
}

inline std::string theta_var(std::size_t j) { return "t" + std::to_string(j); }
inline std::string choice_var(std::size_t k) { return "y" + std::to_string(k); }

}  // namespace detail

inline double default_big_m(double max_row_norm, double theta_norm) {
  const double m = 1e3 * max_row_norm * theta_norm;
  return m > 0.0 ? m : 1e3;
}

inline MiqpExport export_miqp(const IsmInstance& instance,
                              std::optional<double> big_m = std::nullopt) {
  instance.validate();
  const std::size_t n = instance.suggestion.size();
  if (n > kMiqpExportCap) {
    throw CapExceeded("MIQP export refuses suggestions larger than " +
                      std::to_string(kMiqpExportCap) + " elements");
  }
  const std::size_t d = instance.theta0.size();

  MiqpExport out;
  std::vector<std::vector<ConstraintRow>> rows;
  std::vector<ElementId> ordering = canonical(instance.suggestion);
  double max_norm = 0.0;
  do {
    out.orderings.push_back(ordering);
    rows.push_back(build_constraints(*instance.objective, ordering,
                                     instance.matroid, instance.epsilon));
    for (const auto& r : rows.back()) max_norm = std::max(max_norm, r.b.norm());
  } while (std::next_permutation(ordering.begin(), ordering.end()));

  out.big_m = big_m.value_or(default_big_m(max_norm, instance.theta0.norm()));
  ISM_REQUIRE(out.big_m > 0.0 && std::isfinite(out.big_m), "big-M must be positive");

  std::string& t = out.text;
  t += "\\ Unordered inverse submodular maximization, Big-M formulation\n";
  t += "\\ bigM = " + detail::fmt_num(out.big_m) + "\n";
  t += "\\ epsilon = " + detail::fmt_num(instance.epsilon) + "\n";
  for (std::size_t k = 0; k < out.orderings.size(); ++k) {
    t += "\\ " + detail::choice_var(k) + " ordering";
    for (ElementId e : out.orderings[k]) t += " " + std::to_string(e);
    t += "\n";
  }

  t += "Minimize\n obj:";
  for (std::size_t j = 0; j < d; ++j) {
    detail::append_term(t, -2.0 * instance.theta0[j], detail::theta_var(j));
  }
  t += " + [";
  for (std::size_t j = 0; j < d; ++j) {
    t += (j ? " + 2 " : " 2 ") + detail::theta_var(j) + " ^ 2";
  }
  t += " ] / 2";
  t += " + " + detail::fmt_num(instance.theta0.squaredNorm()) + "\n";

  t += "Subject To\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t r = 0; r < rows[k].size(); ++r) {
      const auto& row = rows[k][r];
      t += " c" + std::to_string(k) + "_" + std::to_string(r) + ":";
      for (std::size_t j = 0; j < d; ++j) {
        if (row.b[j] != 0.0) detail::append_term(t, row.b[j], detail::theta_var(j));
      }
      detail::append_term(t, out.big_m, detail::choice_var(k));
      t += " <= " + detail::fmt_num(out.big_m - row.margin) + "\n";
      ++out.big_m_rows;
    }
  }
  t += " choose:";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    detail::append_term(t, 1.0, detail::choice_var(k));
  }
  t += " = 1\n";
  if (instance.domain.preserve_sum) {
    t += " sum:";
    for (std::size_t j = 0; j < d; ++j) detail::append_term(t, 1.0, detail::theta_var(j));
    t += " = " + detail::fmt_num(instance.theta0.sum()) + "\n";
  }

  t += "Bounds\n";
  for (std::size_t j = 0; j < d; ++j) {
    const auto& lb = instance.domain.lower_bounds;
    if (lb && std::isfinite((*lb)[j])) {
      t += " " + detail::theta_var(j) + " >= " + detail::fmt_num((*lb)[j]) + "\n";
    } else {
      t += " " + detail::theta_var(j) + " free\n";
    }
  }
  t += "Binary\n";
  for (std::size_t k = 0; k < rows.size(); ++k) t += " " + detail::choice_var(k) + "\n";
  t += "End\n";
  return out;
}

// ---------------------------------------------------------------------------
// Reader

struct LpExpr {
  std::map<std::string, double> linear;
  std::map<std::pair<std::string, std::string>, double> quadratic;
  double constant = 0.0;

  double eval(const std::map<std::string, double>& x) const {
    auto at = [&](const std::string& v) {
      auto it = x.find(v);
      return it == x.end() ? 0.0 : it->second;
    };
    double s = constant;
    for (const auto& [v, c] : linear) s += c * at(v);
    for (const auto& [vv, c] : quadratic) s += c * at(vv.first) * at(vv.second);
    return s;
  }
};

enum class LpSense { Le, Ge, Eq };

struct LpRow {
  std::string name;
  LpExpr lhs;
  LpSense sense = LpSense::Le;
  double rhs = 0.0;
};

struct LpModel {
  bool minimize = true;
  LpExpr objective;
  std::vector<LpRow> rows;
  std::map<std::string, std::pair<double, double>> bounds;  // default [0, inf)
  std::set<std::string> binaries;
  std::set<std::string> variables;

  std::pair<double, double> bound(const std::string& v) const {
    auto it = bounds.find(v);
    if (it != bounds.end()) return it->second;
    if (binaries.count(v)) return {0.0, 1.0};
    return {0.0, std::numeric_limits<double>::infinity()};
  }

  // Largest violation of any row, bound or integrality condition at x.
  double max_violation(const std::map<std::string, double>& x) const {
    double worst = 0.0;
    for (const auto& r : rows) {
      const double v = r.lhs.eval(x) - r.rhs;
      switch (r.sense) {
        case LpSense::Le: worst = std::max(worst, v); break;
        case LpSense::Ge: worst = std::max(worst, -v); break;
        case LpSense::Eq: worst = std::max(worst, std::abs(v)); break;
      }
    }
    for (const auto& v : variables) {
      auto it = x.find(v);
      const double xv = it == x.end() ? 0.0 : it->second;
      const auto [lo, hi] = bound(v);
      worst = std::max({worst, lo - xv, xv - hi});
      if (binaries.count(v)) worst = std::max(worst, std::abs(xv - std::round(xv)));
    }
    return worst;
  }
};

namespace detail {

struct LpToken {
  enum Kind { Number, Name, Op } kind;
  std::string text;
  double value = 0.0;
};

inline std::vector<LpToken> lex_lp(const std::string& s) {
  std::vector<LpToken> out;
  std::size_t i = 0;
  auto name_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
           c == '#' || c == '$' || c == '!' || c == '"' || c == '&' ||
           c == '(' || c == ')' || c == ',' || c == ';' || c == '?' ||
           c == '@' || c == '{' || c == '}' || c == '~' || c == '\'';
  };
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t used = 0;
      const double v = std::stod(s.substr(i), &used);
      out.push_back({LpToken::Number, s.substr(i, used), v});
      i += used;
    } else if (c == '<' || c == '>' || c == '=') {
      std::string op(1, c);
      if (i + 1 < s.size() && s[i + 1] == '=') { op += '='; ++i; }
      if (op == "=<") op = "<=";
      if (op == "=>") op = ">=";
      if (op == "<") op = "<=";
      if (op == ">") op = ">=";
      out.push_back({LpToken::Op, op});
      ++i;
    } else if (c == '+' || c == '-' || c == '*' || c == '^' || c == '/' ||
               c == '[' || c == ']' || c == ':') {
      out.push_back({LpToken::Op, std::string(1, c)});
      ++i;
    } else if (name_char(c)) {
      std::size_t j = i;
      while (j < s.size() && name_char(s[j])) ++j;
      out.push_back({LpToken::Name, s.substr(i, j - i)});
      i = j;
    } else {
      throw std::runtime_error(std::string("LP: unexpected character '") + c + "'");
    }
  }
  return out;
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline bool is_infinity(const std::string& name) {
  const std::string l = lower(name);
  return l == "inf" || l == "infinity";
}

class LpParser {
 public:
  LpParser(std::vector<LpToken> toks, LpModel& model)
      : t_(std::move(toks)), m_(model) {}

  void objective() {
    skip_label();
    m_.objective = expr();
    expect_end();
  }

  void constraints() {
    while (pos_ < t_.size()) {
      LpRow row;
      row.name = skip_label();
      row.lhs = expr();
      row.sense = sense();
      row.rhs = signed_number();
      m_.rows.push_back(std::move(row));
    }
  }

  void bounds() {
    while (pos_ < t_.size()) {
      if (peek_number_like()) {
        const double lo = signed_number();
        const LpSense s1 = sense();
        const std::string v = name();
        if (s1 == LpSense::Eq) { m_.bounds[v] = {lo, lo}; continue; }
        auto b = m_.bound(v);
        if (s1 == LpSense::Le) b.first = lo; else b.second = lo;
        if (pos_ < t_.size() && t_[pos_].kind == LpToken::Op &&
            (t_[pos_].text == "<=" || t_[pos_].text == ">=")) {
          const LpSense s2 = sense();
          const double hi = signed_number();
          if (s2 == LpSense::Le) b.second = hi; else b.first = hi;
        }
        m_.bounds[v] = b;
      } else {
        const std::string v = name();
        if (pos_ < t_.size() && t_[pos_].kind == LpToken::Name &&
            lower(t_[pos_].text) == "free") {
          ++pos_;
          m_.bounds[v] = {-std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity()};
          continue;
        }
        const LpSense s = sense();
        const double val = signed_number();
        auto b = m_.bound(v);
        if (s == LpSense::Le) b.second = val;
        else if (s == LpSense::Ge) b.first = val;
        else b = {val, val};
        m_.bounds[v] = b;
      }
    }
  }

  void binaries() {
    while (pos_ < t_.size()) {
      const std::string v = name();
      m_.binaries.insert(v);
    }
  }

 private:
  std::vector<LpToken> t_;
  LpModel& m_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("LP: " + what + " at token " + std::to_string(pos_));
  }
  bool at_op(const char* op) const {
    return pos_ < t_.size() && t_[pos_].kind == LpToken::Op && t_[pos_].text == op;
  }
  void expect_end() const {
    if (pos_ != t_.size()) fail("trailing tokens");
  }
  std::string name() {
    if (pos_ >= t_.size() || t_[pos_].kind != LpToken::Name) fail("expected a name");
    m_.variables.insert(t_[pos_].text);
    return t_[pos_++].text;
  }
  bool peek_number_like() const {
    std::size_t p = pos_;
    if (p < t_.size() && t_[p].kind == LpToken::Op && (t_[p].text == "-" || t_[p].text == "+")) ++p;
    return p < t_.size() &&
           (t_[p].kind == LpToken::Number ||
            (t_[p].kind == LpToken::Name && is_infinity(t_[p].text)));
  }
  double signed_number() {
    double sign = 1.0;
    if (at_op("-")) { sign = -1.0; ++pos_; } else if (at_op("+")) { ++pos_; }
    if (pos_ < t_.size() && t_[pos_].kind == LpToken::Number) return sign * t_[pos_++].value;
    if (pos_ < t_.size() && t_[pos_].kind == LpToken::Name && is_infinity(t_[pos_].text)) {
      ++pos_;
      return sign * std::numeric_limits<double>::infinity();
    }
    fail("expected a number");
  }
  LpSense sense() {
    if (pos_ >= t_.size() || t_[pos_].kind != LpToken::Op) fail("expected a sense");
    const std::string op = t_[pos_++].text;
    if (op == "<=") return LpSense::Le;
    if (op == ">=") return LpSense::Ge;
    if (op == "=") return LpSense::Eq;
    fail("expected a sense");
  }
  std::string skip_label() {
    if (pos_ + 1 < t_.size() && t_[pos_].kind == LpToken::Name &&
        t_[pos_ + 1].kind == LpToken::Op && t_[pos_ + 1].text == ":") {
      pos_ += 2;
      return t_[pos_ - 2].text;
    }
    return {};
  }
  bool at_expr_end() const {
    return pos_ >= t_.size() ||
           (t_[pos_].kind == LpToken::Op &&
            (t_[pos_].text == "<=" || t_[pos_].text == ">=" || t_[pos_].text == "=" ||
             t_[pos_].text == "]"));
  }

  // One signed term; returns false at the end of the expression.
  bool term(LpExpr& e, bool in_bracket) {
    if (at_expr_end()) return false;
    double sign = 1.0;
    while (at_op("+") || at_op("-")) {
      if (t_[pos_].text == "-") sign = -sign;
      ++pos_;
    }
    if (!in_bracket && at_op("[")) {
      ++pos_;
      LpExpr q;
      while (term(q, true)) {}
      if (!at_op("]")) fail("expected ]");
      ++pos_;
      double div = 1.0;
      if (at_op("/")) {
        ++pos_;
        if (pos_ >= t_.size() || t_[pos_].kind != LpToken::Number) fail("expected divisor");
        div = t_[pos_++].value;
      }
      for (const auto& [k, c] : q.quadratic) e.quadratic[k] += sign * c / div;
      return true;
    }
    double coef = 1.0;
    bool have_number = false;
    if (pos_ < t_.size() && t_[pos_].kind == LpToken::Number) {
      coef = t_[pos_++].value;
      have_number = true;
    }
    if (pos_ < t_.size() && t_[pos_].kind == LpToken::Name) {
      const std::string v = name();
      if (in_bracket) {
        if (at_op("^")) {
          ++pos_;
          if (pos_ >= t_.size() || t_[pos_].kind != LpToken::Number || t_[pos_].value != 2.0) {
            fail("only squares are supported");
          }
          ++pos_;
          e.quadratic[{v, v}] += sign * coef;
        } else if (at_op("*")) {
          ++pos_;
          std::string w = name();
          e.quadratic[{std::min(v, w), std::max(v, w)}] += sign * coef;
        } else {
          fail("linear term inside quadratic bracket");
        }
      } else {
        e.linear[v] += sign * coef;
      }
      return true;
    }
    if (have_number && !in_bracket) {
      e.constant += sign * coef;
      return true;
    }
    fail("malformed term");
  }

  LpExpr expr() {
    LpExpr e;
    while (term(e, false)) {}
    return e;
  }
};

}  // namespace detail

inline LpModel parse_lp(const std::string& text) {
  enum class Section { None, Objective, Constraints, Bounds, Binary, General, End };
  LpModel model;
  std::map<Section, std::string> body;
  std::vector<Section> order;
  Section current = Section::None;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto c = line.find('\\'); c != std::string::npos) line.erase(c);
    std::string key = detail::lower(line);
    key.erase(0, key.find_first_not_of(" \t\r"));
    key.erase(key.find_last_not_of(" \t\r") + 1);
    Section next = current;
    bool keyword = true;
    if (key == "minimize" || key == "minimise" || key == "min") {
      next = Section::Objective;
    } else if (key == "maximize" || key == "maximise" || key == "max") {
      next = Section::Objective;
      model.minimize = false;
    } else if (key == "subject to" || key == "such that" || key == "st" || key == "s.t.") {
      next = Section::Constraints;
    } else if (key == "bounds" || key == "bound") {
      next = Section::Bounds;
    } else if (key == "binary" || key == "binaries" || key == "bin") {
      next = Section::Binary;
    } else if (key == "general" || key == "generals" || key == "gen") {
      next = Section::General;
    } else if (key == "end") {
      next = Section::End;
    } else {
      keyword = false;
    }
    if (keyword) {
      current = next;
      if (!body.count(current)) order.push_back(current);
      body[current];
      continue;
    }
    if (current == Section::None && !key.empty()) {
      throw std::runtime_error("LP: content before the objective section");
    }
    body[current] += line + "\n";
  }
  for (Section s : order) {
    detail::LpParser p(detail::lex_lp(body[s]), model);
    switch (s) {
      case Section::Objective: p.objective(); break;
      case Section::Constraints: p.constraints(); break;
      case Section::Bounds: p.bounds(); break;
      case Section::Binary: p.binaries(); break;
      default: break;
    }
  }
  return model;
}

}  // namespace ism
