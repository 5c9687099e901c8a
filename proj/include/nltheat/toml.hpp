#pragma once

#include <cctype>
#include <string>

#include "json.hpp"
#include "nltheat/common.hpp"

namespace nlt {

// reader for the TOML subset used by config files: [table] and [a.b] headers, dotted keys,
// strings, integers, floats, booleans, arrays (multi-line) and inline tables
class TomlReader {
 public:
  using json = nlohmann::json;

  static json parse(const std::string& text) {
    TomlReader r(text);
    return r.document();
  }

 private:
  explicit TomlReader(const std::string& s) : s_(s) {}

  const std::string& s_;
  size_t i_ = 0;
  int line_ = 1;

  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("config line " + std::to_string(line_) + ": " + msg);
  }

  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[i_]; }
  char get() {
    char c = s_[i_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++i_;
  }

  void skip_all_ws() {
    while (!eof()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n')
        get();
      else if (c == '#')
        skip_comment();
      else
        break;
    }
  }

  void end_of_line() {
    skip_inline_ws();
    skip_comment();
    if (peek() == '\r') get();
    if (!eof() && peek() != '\n') fail("unexpected trailing characters");
  }

  static bool bare_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

  std::string key_part() {
    skip_inline_ws();
    if (peek() == '"') return basic_string();
    std::string k;
    while (!eof() && bare_char(peek())) k += get();
    if (k.empty()) fail("expected a key");
    return k;
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key_part()};
    skip_inline_ws();
    while (peek() == '.') {
      get();
      parts.push_back(key_part());
      skip_inline_ws();
    }
    return parts;
  }

  json* descend(json* base, const std::vector<std::string>& parts, size_t n) {
    for (size_t k = 0; k < n; ++k) {
      json& next = (*base)[parts[k]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail("key '" + parts[k] + "' is not a table");
      base = &next;
    }
    return base;
  }

  json document() {
    json root = json::object();
    json* cur = &root;
    while (true) {
      skip_all_ws();
      if (eof()) break;
      if (peek() == '[') {
        get();
        if (peek() == '[') fail("arrays of tables are not supported");
        auto parts = dotted_key();
        if (peek() != ']') fail("expected ']'");
        get();
        cur = descend(&root, parts, parts.size());
        end_of_line();
        continue;
      }
      auto parts = dotted_key();
      if (peek() != '=') fail("expected '='");
      get();
      json* tbl = descend(cur, parts, parts.size() - 1);
      if (tbl->contains(parts.back())) fail("duplicate key '" + parts.back() + "'");
      (*tbl)[parts.back()] = value();
      end_of_line();
    }
    return root;
  }

  std::string basic_string() {
    get();
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = get();
      if (c == '"') break;
      if (c == '\\') {
        char e = get();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  std::string literal_string() {
    get();
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = get();
      if (c == '\'') break;
      out += c;
    }
    return out;
  }

  json number() {
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_'))
      tok += get();
    std::string clean;
    for (char c : tok)
      if (c != '_') clean += c;
    if (clean == "inf" || clean == "+inf") return std::numeric_limits<double>::infinity();
    if (clean == "-inf") return -std::numeric_limits<double>::infinity();
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    try {
      size_t used = 0;
      if (is_float) {
        double v = std::stod(clean, &used);
        if (used != clean.size()) fail("bad number '" + tok + "'");
        return v;
      }
      long long v = std::stoll(clean, &used);
      if (used != clean.size()) fail("bad number '" + tok + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad number '" + tok + "'");
    }
  }

  json array() {
    get();
    json arr = json::array();
    while (true) {
      skip_all_ws();
      if (peek() == ']') {
        get();
        return arr;
      }
      arr.push_back(value());
      skip_all_ws();
      if (peek() == ',') {
        get();
        continue;
      }
      if (peek() == ']') {
        get();
        return arr;
      }
      fail("expected ',' or ']' in array");
    }
  }

  json inline_table() {
    get();
    json obj = json::object();
    skip_inline_ws();
    if (peek() == '}') {
      get();
      return obj;
    }
    while (true) {
      auto parts = dotted_key();
      if (peek() != '=') fail("expected '=' in inline table");
      get();
      json* tbl = descend(&obj, parts, parts.size() - 1);
      (*tbl)[parts.back()] = value();
      skip_inline_ws();
      if (peek() == ',') {
        get();
        continue;
      }
      if (peek() == '}') {
        get();
        return obj;
      }
      fail("expected ',' or '}' in inline table");
    }
  }

  json value() {
    skip_inline_ws();
    char c = peek();
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (c == '{') return inline_table();
    if (s_.compare(i_, 4, "true") == 0) {
      i_ += 4;
      return true;
    }
    if (s_.compare(i_, 5, "false") == 0) {
      i_ += 5;
      return false;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == 'i') return number();
    fail("expected a value");
  }
};

}  // namespace nlt
