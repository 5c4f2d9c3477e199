// Copyright 2026 The idocr authors
//
// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License. You may
// obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Project: idocr
// File: include/idocr/toml.hpp
// Purpose: minimal TOML reader covering the subset our config files use
//
// Supported: comments, [tables], [[arrays of tables]], dotted access,
// basic "..." strings with escapes, literal '...' strings, integers,
// floats, booleans, homogeneous arrays. That is the full vocabulary of
// fonts.toml, rules.toml and run configs.

#pragma once

#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idocr/common.hpp"

namespace idocr::toml {

struct Value {
  enum class Kind { Str, Int, Float, Bool, Array };
  Kind kind = Kind::Str;
  std::string str;
  i64 integer = 0;
  double real = 0;
  bool boolean = false;
  std::vector<Value> array;

  double as_number() const {
    if (kind == Kind::Float) return real;
    if (kind == Kind::Int) return static_cast<double>(integer);
    throw Error("toml: value is not a number");
  }
};

using Table = std::map<std::string, Value>;

class Document {
 public:
  // Scalar keys are stored flattened: "section.key".
  const Table& scalars() const { return scalars_; }
  const std::vector<Table>& array_of_tables(const std::string& name) const {
    static const std::vector<Table> kEmpty;
    auto it = arrays_.find(name);
    return it == arrays_.end() ? kEmpty : it->second;
  }

  bool has(const std::string& key) const { return scalars_.count(key) > 0; }

  const Value& at(const std::string& key) const {
    auto it = scalars_.find(key);
    if (it == scalars_.end()) throw Error("toml: missing key '" + key + "'");
    return it->second;
  }

  std::string get_str(const std::string& key) const {
    const Value& v = at(key);
    if (v.kind != Value::Kind::Str) throw Error("toml: '" + key + "' is not a string");
    return v.str;
  }
  i64 get_int(const std::string& key) const {
    const Value& v = at(key);
    if (v.kind != Value::Kind::Int) throw Error("toml: '" + key + "' is not an integer");
    return v.integer;
  }
  double get_float(const std::string& key) const { return at(key).as_number(); }
  bool get_bool(const std::string& key) const {
    const Value& v = at(key);
    if (v.kind != Value::Kind::Bool) throw Error("toml: '" + key + "' is not a boolean");
    return v.boolean;
  }

  std::string get_str_or(const std::string& key, const std::string& dflt) const {
    return has(key) ? get_str(key) : dflt;
  }
  i64 get_int_or(const std::string& key, i64 dflt) const {
    return has(key) ? get_int(key) : dflt;
  }
  double get_float_or(const std::string& key, double dflt) const {
    return has(key) ? get_float(key) : dflt;
  }
  bool get_bool_or(const std::string& key, bool dflt) const {
    return has(key) ? get_bool(key) : dflt;
  }

  void set(const std::string& key, Value v) { scalars_[key] = std::move(v); }

  static Document parse_file(const std::string& path);
  static Document parse(const std::string& text, const std::string& origin = "<string>");

 private:
  Table scalars_;
  std::map<std::string, std::vector<Table>> arrays_;
};

namespace detail {

inline void skip_ws(const std::string& s, size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline Value parse_value(const std::string& s, size_t& i, int line,
                         const std::string& origin);

inline std::string parse_basic_string(const std::string& s, size_t& i, int line,
                                      const std::string& origin) {
  std::string out;
  ++i;  // opening quote
  while (i < s.size() && s[i] != '"') {
    if (s[i] == '\\') {
      ++i;
      if (i >= s.size()) break;
      switch (s[i]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default:
          throw Error(origin + ":" + std::to_string(line) + ": unsupported escape \\" +
                      std::string(1, s[i]));
      }
      ++i;
    } else {
      out += s[i++];
    }
  }
  if (i >= s.size())
    throw Error(origin + ":" + std::to_string(line) + ": unterminated string");
  ++i;  // closing quote
  return out;
}

inline Value parse_value(const std::string& s, size_t& i, int line,
                         const std::string& origin) {
  skip_ws(s, i);
  Value v;
  if (i >= s.size())
    throw Error(origin + ":" + std::to_string(line) + ": missing value");
  char c = s[i];
  if (c == '"') {
    v.kind = Value::Kind::Str;
    v.str = parse_basic_string(s, i, line, origin);
  } else if (c == '\'') {
    size_t end = s.find('\'', i + 1);
    if (end == std::string::npos)
      throw Error(origin + ":" + std::to_string(line) + ": unterminated string");
    v.kind = Value::Kind::Str;
    v.str = s.substr(i + 1, end - i - 1);
    i = end + 1;
  } else if (c == '[') {
    v.kind = Value::Kind::Array;
    ++i;
    skip_ws(s, i);
    while (i < s.size() && s[i] != ']') {
      v.array.push_back(parse_value(s, i, line, origin));
      skip_ws(s, i);
      if (i < s.size() && s[i] == ',') {
        ++i;
        skip_ws(s, i);
      }
    }
    if (i >= s.size())
      throw Error(origin + ":" + std::to_string(line) + ": unterminated array");
    ++i;
  } else if (s.compare(i, 4, "true") == 0) {
    v.kind = Value::Kind::Bool;
    v.boolean = true;
    i += 4;
  } else if (s.compare(i, 5, "false") == 0) {
    v.kind = Value::Kind::Bool;
    v.boolean = false;
    i += 5;
  } else {
    size_t start = i;
    while (i < s.size() && s[i] != ',' && s[i] != ']' && s[i] != '#' &&
           s[i] != ' ' && s[i] != '\t')
      ++i;
    std::string tok = s.substr(start, i - start);
    if (tok.empty())
      throw Error(origin + ":" + std::to_string(line) + ": bad value");
    bool is_float = tok.find_first_of(".eE") != std::string::npos &&
                    tok.find("0x") != 0;
    char* endp = nullptr;
    if (is_float) {
      v.kind = Value::Kind::Float;
      v.real = std::strtod(tok.c_str(), &endp);
    } else {
      v.kind = Value::Kind::Int;
      v.integer = std::strtoll(tok.c_str(), &endp, 0);
    }
    if (endp == tok.c_str() || *endp != '\0')
      throw Error(origin + ":" + std::to_string(line) + ": bad number '" + tok + "'");
  }
  return v;
}

}  // namespace detail

inline Document Document::parse(const std::string& text, const std::string& origin) {
  Document doc;
  std::string prefix;          // current [table] prefix
  Table* array_entry = nullptr;  // current [[entry]], if any
  size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    size_t i = 0;
    detail::skip_ws(line, i);
    if (i >= line.size() || line[i] == '#' || line[i] == '\r') continue;
    if (line[i] == '[') {
      bool is_array = i + 1 < line.size() && line[i + 1] == '[';
      size_t open = i + (is_array ? 2 : 1);
      size_t close = line.find(is_array ? "]]" : "]", open);
      if (close == std::string::npos)
        throw Error(origin + ":" + std::to_string(line_no) + ": bad table header");
      std::string name = line.substr(open, close - open);
      if (is_array) {
        doc.arrays_[name].emplace_back();
        array_entry = &doc.arrays_[name].back();
        prefix.clear();
      } else {
        prefix = name + ".";
        array_entry = nullptr;
      }
      continue;
    }
    size_t eq = line.find('=', i);
    if (eq == std::string::npos)
      throw Error(origin + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = line.substr(i, eq - i);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    size_t vi = eq + 1;
    Value v = detail::parse_value(line, vi, line_no, origin);
    detail::skip_ws(line, vi);
    if (vi < line.size() && line[vi] != '#' && line[vi] != '\r')
      throw Error(origin + ":" + std::to_string(line_no) + ": trailing characters");
    if (array_entry)
      (*array_entry)[key] = std::move(v);
    else
      doc.scalars_[prefix + key] = std::move(v);
  }
  return doc;
}

inline Document Document::parse_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw Error("cannot open: " + path);
  std::string text;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, n);
  std::fclose(f);
  return parse(text, path);
}

}  // namespace idocr::toml
