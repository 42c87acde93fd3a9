#pragma once

// Reader for the small TOML subset used by experiment configs: [section] headers,
// `key = value` pairs, and `#` comments. Values are numbers, booleans, double-quoted strings,
// or single-line arrays of those. The result is a JSON object keyed by section.

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "nlsgibbs/error.hpp"

namespace nlsgibbs {

namespace detail {

class TomlLineParser {
 public:
  TomlLineParser(const std::string& text, int line) : s_(text), line_(line) {}

  nlohmann::json value() {
    skip_space();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return string();
    if (c == '[') return array();
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    return number();
  }

  void expect_end() {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] != '#') fail("unexpected trailing text");
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw InvalidArgument("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  nlohmann::json string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      out += s_[pos_++];
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  nlohmann::json array() {
    ++pos_;
    nlohmann::json out = nlohmann::json::array();
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      out.push_back(value());
      skip_space();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_space();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return out;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      fail("expected ',' or ']' in array");
    }
  }

  nlohmann::json number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                s_[pos_] == '-' || s_[pos_] == '+' || s_[pos_] == '_')) {
      ++pos_;
    }
    std::string tok = s_.substr(start, pos_ - start);
    std::erase(tok, '_');
    if (tok.empty()) fail("expected a value");
    std::size_t used = 0;
    try {
      if (tok.find_first_of(".eE") == std::string::npos && tok != "inf" && tok != "nan") {
        const long long v = std::stoll(tok, &used);
        if (used == tok.size()) return v;
      }
      const double v = std::stod(tok, &used);
      if (used == tok.size()) return v;
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + tok + "'");
  }

  const std::string& s_;
  int line_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Top-level keys land in the root object; keys after `[name]` land in root[name].
inline nlohmann::json parse_toml_subset(std::istream& is) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto first = raw.find_first_not_of(" \t\r");
    if (first == std::string::npos || raw[first] == '#') continue;
    std::string text = raw.substr(first);
    while (!text.empty() && (text.back() == '\r' || text.back() == ' ' || text.back() == '\t')) text.pop_back();
    if (text.front() == '[') {
      const auto close = text.find(']');
      if (close == std::string::npos) throw InvalidArgument("config line " + std::to_string(line) + ": unterminated section");
      const std::string name = text.substr(1, close - 1);
      if (name.empty() || root.contains(name)) {
        throw InvalidArgument("config line " + std::to_string(line) + ": empty or repeated section '" + name + "'");
      }
      root[name] = nlohmann::json::object();
      table = &root[name];
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(line) + ": expected key = value");
    std::string key = text.substr(0, eq);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    if (key.empty()) throw InvalidArgument("config line " + std::to_string(line) + ": empty key");
    if (table->contains(key)) throw InvalidArgument("config line " + std::to_string(line) + ": duplicate key '" + key + "'");
    const std::string rest = text.substr(eq + 1);
    detail::TomlLineParser parser(rest, line);
    (*table)[key] = parser.value();
    parser.expect_end();
  }
  return root;
}

inline nlohmann::json parse_toml_subset(const std::string& text) {
  std::istringstream is(text);
  return parse_toml_subset(is);
}

inline nlohmann::json load_toml_subset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open config file '" + path + "'");
  return parse_toml_subset(is);
}

}  // namespace nlsgibbs
