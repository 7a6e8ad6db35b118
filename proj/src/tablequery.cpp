// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

#include <json.hpp>

#include "preact/envs.hpp"
#include "preact/text.hpp"

namespace preact {

namespace {

struct SqlError {
  std::string message;
};

enum class Tok { Ident, QuotedIdent, String, Number, Symbol, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto syntax = [] { return SqlError{"You have an error in your SQL syntax"}; };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      auto start = i;
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      out.push_back({Tok::Ident, std::string(s.substr(start, i - start))});
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      auto start = i++;
      while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
      out.push_back({Tok::Number, std::string(s.substr(start, i - start))});
    } else if (c == '`' || c == '\'' || c == '"') {
      auto close = s.find(c, i + 1);
      if (close == std::string_view::npos) throw syntax();
      out.push_back({c == '`' ? Tok::QuotedIdent : Tok::String, std::string(s.substr(i + 1, close - i - 1))});
      i = close + 1;
    } else if ((c == '<' || c == '>' || c == '!') && i + 1 < s.size() && (s[i + 1] == '=' || s[i + 1] == '>')) {
      out.push_back({Tok::Symbol, std::string(s.substr(i, 2))});
      i += 2;
    } else if (std::string_view("*,=<>();").find(c) != std::string_view::npos) {
      out.push_back({Tok::Symbol, std::string(1, c)});
      ++i;
    } else {
      throw syntax();
    }
  }
  out.push_back({Tok::End, ""});
  return out;
}

std::optional<double> as_number(std::string_view v) {
  v = text::trim(v);
  if (v.empty()) return std::nullopt;
  double d = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || ptr != v.data() + v.size()) return std::nullopt;
  return d;
}

std::string format_number(double d) {
  if (std::floor(d) == d && std::fabs(d) < 1e15) return std::to_string(static_cast<long long>(d));
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, ptr);
}

// Python-style repr of result rows, as the MySQL harness prints them.
std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::string out = "[";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r) out += ", ";
    out += "(";
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c) out += ", ";
      const auto& v = rows[r][c];
      if (as_number(v)) {
        out += v;
      } else {
        std::string escaped;
        for (char ch : v) {
          if (ch == '\'' || ch == '\\') escaped += '\\';
          escaped += ch;
        }
        out += "'" + escaped + "'";
      }
    }
    if (rows[r].size() == 1) out += ",";
    out += ")";
  }
  return out + "]";
}

struct Condition {
  std::size_t column;
  std::string op;
  std::string value;
};

bool compare(const std::string& cell, const std::string& op, const std::string& value) {
  auto a = as_number(cell), b = as_number(value);
  int cmp;
  if (a && b) {
    cmp = *a < *b ? -1 : (*a > *b ? 1 : 0);
  } else {
    auto la = text::to_lower(cell), lb = text::to_lower(value);
    cmp = la < lb ? -1 : (la > lb ? 1 : 0);
  }
  if (op == "=") return cmp == 0;
  if (op == "!=" || op == "<>") return cmp != 0;
  if (op == "<") return cmp < 0;
  if (op == ">") return cmp > 0;
  if (op == "<=") return cmp <= 0;
  if (op == ">=") return cmp >= 0;
  return false;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek() const { return toks_[pos_]; }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool keyword(std::string_view kw) {
    if (peek().kind == Tok::Ident && text::iequals(peek().text, kw)) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool symbol(std::string_view sym) {
    if (peek().kind == Tok::Symbol && peek().text == sym) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect_keyword(std::string_view kw) {
    if (!keyword(kw)) throw syntax();
  }
  void expect_symbol(std::string_view sym) {
    if (!symbol(sym)) throw syntax();
  }
  std::string identifier() {
    auto t = next();
    if (t.kind != Tok::Ident && t.kind != Tok::QuotedIdent) throw syntax();
    return t.text;
  }
  std::string value() {
    auto t = next();
    if (t.kind != Tok::String && t.kind != Tok::Number && t.kind != Tok::Ident) throw syntax();
    return t.text;
  }
  void finish() {
    symbol(";");
    if (peek().kind != Tok::End) throw syntax();
  }
  static SqlError syntax() { return {"You have an error in your SQL syntax"}; }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

Table& find_table(std::vector<Table>& tables, const std::string& name) {
  for (auto& t : tables)
    if (text::iequals(t.name, name)) return t;
  throw SqlError{"Table '" + name + "' doesn't exist"};
}

std::size_t find_column(const Table& t, const std::string& name) {
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    if (text::iequals(t.columns[i], name)) return i;
  throw SqlError{"Unknown column '" + name + "'"};
}

struct SelectItem {
  std::string func;  // empty, COUNT, SUM, MAX, MIN, AVG
  std::string column;  // "*" allowed for COUNT and bare star
};

std::vector<Condition> parse_where(Parser& p, const Table& t) {
  std::vector<Condition> conds;
  if (!p.keyword("WHERE")) return conds;
  do {
    auto col = p.identifier();
    auto op = p.next();
    if (op.kind != Tok::Symbol || std::string_view("= != <> < > <= >=").find(op.text) == std::string_view::npos ||
        op.text == "," || op.text == "*")
      throw Parser::syntax();
    auto val = p.value();
    conds.push_back({find_column(t, col), op.text, val});
  } while (p.keyword("AND"));
  return conds;
}

bool row_matches(const std::vector<std::string>& row, const std::vector<Condition>& conds) {
  return std::all_of(conds.begin(), conds.end(),
                     [&](const Condition& c) { return compare(row[c.column], c.op, c.value); });
}

std::string run_select(Parser& p, std::vector<Table>& tables) {
  std::vector<SelectItem> items;
  do {
    if (p.symbol("*")) {
      items.push_back({"", "*"});
      continue;
    }
    auto name = p.identifier();
    static constexpr std::string_view kFuncs[] = {"COUNT", "SUM", "MAX", "MIN", "AVG"};
    bool is_func = false;
    for (auto f : kFuncs) {
      if (text::iequals(name, f) && p.peek().kind == Tok::Symbol && p.peek().text == "(") {
        p.expect_symbol("(");
        std::string col = p.symbol("*") ? "*" : p.identifier();
        p.expect_symbol(")");
        items.push_back({std::string(f), col});
        is_func = true;
        break;
      }
    }
    if (!is_func) items.push_back({"", name});
  } while (p.symbol(","));
  p.expect_keyword("FROM");
  auto& table = find_table(tables, p.identifier());

  // Column resolution happens in select-list order, then WHERE.
  std::vector<std::size_t> cols;
  for (const auto& it : items) {
    if (it.column == "*") {
      if (!it.func.empty() && it.func != "COUNT") throw Parser::syntax();
      cols.push_back(static_cast<std::size_t>(-1));
    } else {
      cols.push_back(find_column(table, it.column));
    }
  }
  auto conds = parse_where(p, table);
  p.finish();

  std::vector<const std::vector<std::string>*> hits;
  for (const auto& row : table.rows)
    if (row_matches(row, conds)) hits.push_back(&row);

  const bool aggregate = std::any_of(items.begin(), items.end(), [](const SelectItem& i) { return !i.func.empty(); });
  std::vector<std::vector<std::string>> result;
  if (aggregate) {
    std::vector<std::string> row;
    for (std::size_t k = 0; k < items.size(); ++k) {
      const auto& f = items[k].func;
      if (f.empty()) {
        row.push_back(hits.empty() ? "None" : (*hits.front())[cols[k]]);
        continue;
      }
      if (f == "COUNT") {
        row.push_back(std::to_string(hits.size()));
        continue;
      }
      if (hits.empty()) {
        row.push_back("None");
        continue;
      }
      std::vector<std::string> vals;
      for (const auto* h : hits) vals.push_back((*h)[cols[k]]);
      bool numeric = std::all_of(vals.begin(), vals.end(), [](const std::string& v) { return as_number(v).has_value(); });
      if (f == "SUM" || f == "AVG") {
        double sum = 0;
        for (const auto& v : vals) sum += as_number(v).value_or(0.0);
        row.push_back(format_number(f == "SUM" ? sum : sum / static_cast<double>(vals.size())));
      } else if (numeric) {
        auto cmp = [](const std::string& a, const std::string& b) { return *as_number(a) < *as_number(b); };
        row.push_back(f == "MAX" ? *std::max_element(vals.begin(), vals.end(), cmp)
                                 : *std::min_element(vals.begin(), vals.end(), cmp));
      } else {
        row.push_back(f == "MAX" ? *std::max_element(vals.begin(), vals.end())
                                 : *std::min_element(vals.begin(), vals.end()));
      }
    }
    result.push_back(std::move(row));
  } else {
    for (const auto* h : hits) {
      std::vector<std::string> row;
      for (std::size_t k = 0; k < items.size(); ++k) {
        if (cols[k] == static_cast<std::size_t>(-1)) {
          row.insert(row.end(), h->begin(), h->end());
        } else {
          row.push_back((*h)[cols[k]]);
        }
      }
      result.push_back(std::move(row));
    }
  }
  return render_rows(result);
}

std::string run_update(Parser& p, std::vector<Table>& tables) {
  auto& table = find_table(tables, p.identifier());
  p.expect_keyword("SET");
  std::vector<std::pair<std::size_t, std::string>> sets;
  do {
    auto col = p.identifier();
    p.expect_symbol("=");
    auto val = p.value();
    sets.emplace_back(find_column(table, col), val);
  } while (p.symbol(","));
  auto conds = parse_where(p, table);
  p.finish();
  for (auto& row : table.rows)
    if (row_matches(row, conds))
      for (const auto& [c, v] : sets) row[c] = v;
  return "[]";
}

std::vector<std::string> parse_answer(std::string_view body) {
  body = text::trim(body);
  try {
    auto j = nlohmann::json::parse(body);
    std::vector<std::string> out;
    if (j.is_array()) {
      for (const auto& v : j) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    } else {
      out.push_back(j.is_string() ? j.get<std::string>() : j.dump());
    }
    return out;
  } catch (const nlohmann::json::exception&) {
    return {std::string(body)};
  }
}

}  // namespace

TableQueryEnv::TableQueryEnv(const TaskSpec& spec)
    : Environment(spec), world_(std::get<TableWorld>(spec.world)) {}

std::string TableQueryEnv::do_reset(std::uint64_t) {
  tables_ = world_.tables;
  solved_ = false;
  std::string o0 = world_.question;
  for (const auto& t : tables_)
    o0 += "\nThe name of this table is " + t.name + ", and the headers of this table are " +
          text::join(t.display_columns, ", ") + ".";
  return o0;
}

std::string TableQueryEnv::execute(std::string_view sql) {
  try {
    Parser p(tokenize(sql));
    if (p.keyword("SELECT")) return run_select(p, tables_);
    if (p.keyword("UPDATE")) return run_update(p, tables_);
    if (p.keyword("DESCRIBE") || p.keyword("DESC")) {
      auto& t = find_table(tables_, p.identifier());
      p.finish();
      std::vector<std::vector<std::string>> rows;
      for (const auto& c : t.columns) rows.push_back({c, "text"});
      return render_rows(rows);
    }
    if (p.keyword("SHOW")) {
      p.expect_keyword("TABLES");
      p.finish();
      std::vector<std::vector<std::string>> rows;
      for (const auto& t : tables_) rows.push_back({t.name});
      return render_rows(rows);
    }
    throw Parser::syntax();
  } catch (const SqlError& e) {
    return "ERROR: " + e.message;
  }
}

EnvOutcome TableQueryEnv::do_step(std::string_view action) {
  auto a = text::trim(action);
  if (text::istarts_with(a, "Answer:")) {
    auto given = parse_answer(a.substr(std::string_view("Answer:").size()));
    if (world_.expected_table) {
      const auto& want = *world_.expected_table;
      solved_ = false;
      for (const auto& t : tables_)
        if (text::iequals(t.name, want.name)) solved_ = t.rows == want.rows;
    } else {
      std::vector<std::string> want;
      for (const auto& w : world_.answer) want.emplace_back(text::trim(w));
      for (auto& g : given) g = std::string(text::trim(g));
      std::sort(want.begin(), want.end());
      std::sort(given.begin(), given.end());
      solved_ = want == given;
    }
    return {"Your answer has been submitted.", true, solved_ ? 1.0 : 0.0};
  }
  return {execute(a), false, 0.0};
}

}  // namespace preact
