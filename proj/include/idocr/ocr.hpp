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
// File: include/idocr/ocr.hpp
// Purpose: field recognition and format-rule post-processing
//
// recognize_field chains segmentation, per-patch classification and
// assembly: strings join with single spaces, lines top to bottom. Format
// rules are per-position slots; decoding is a constrained argmax over the
// classifier probabilities, substitution-only. Rules address the classified
// characters in order; spaces come from string separation, are not
// classifier classes and are invisible to rules.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "idocr/charset.hpp"
#include "idocr/classify.hpp"
#include "idocr/common.hpp"
#include "idocr/segment.hpp"
#include "idocr/toml.hpp"
#include "idocr/utf8.hpp"

namespace idocr::ocr {

struct Slot {
  enum class Kind { literal, digits, uppercase, lowercase, alpha, any_of, any };
  Kind kind = Kind::any;
  std::vector<int> allowed;  // class ids, ascending
};

struct FormatRule {
  std::string id;
  std::vector<Slot> slots;  // rule length == slots.size()
};

namespace detail {

inline Slot class_slot(Slot::Kind kind) {
  Slot s;
  s.kind = kind;
  for (int c = 0; c < charset::kNumClasses; ++c) {
    bool in = false;
    switch (kind) {
      case Slot::Kind::digits: in = charset::is_digit_class(c); break;
      case Slot::Kind::uppercase: in = charset::is_upper_class(c); break;
      case Slot::Kind::lowercase: in = charset::is_lower_class(c); break;
      case Slot::Kind::alpha:
        in = charset::is_upper_class(c) || charset::is_lower_class(c);
        break;
      case Slot::Kind::any: in = true; break;
      default: break;
    }
    if (in) s.allowed.push_back(c);
  }
  return s;
}

}  // namespace detail

inline Slot literal_slot(u32 codepoint) {
  Slot s;
  s.kind = Slot::Kind::literal;
  s.allowed = {charset::class_of(codepoint)};
  return s;
}

inline Slot set_slot(const std::vector<u32>& codepoints) {
  if (codepoints.empty()) throw Error("empty symbol set in rule");
  Slot s;
  s.kind = Slot::Kind::any_of;
  for (u32 cp : codepoints) s.allowed.push_back(charset::class_of(cp));
  std::sort(s.allowed.begin(), s.allowed.end());
  s.allowed.erase(std::unique(s.allowed.begin(), s.allowed.end()),
                  s.allowed.end());
  return s;
}

// Pattern tokens: 9 digit, A uppercase, a lowercase, * any, [xyz] explicit
// set, backslash-escaped literal. Anything else is rejected.
inline FormatRule compile_rule(const std::string& id,
                               const std::string& pattern) {
  FormatRule rule;
  rule.id = id;
  auto cps = utf8_decode(pattern);
  for (size_t i = 0; i < cps.size(); ++i) {
    u32 c = cps[i];
    if (c == '9') {
      rule.slots.push_back(detail::class_slot(Slot::Kind::digits));
    } else if (c == 'A') {
      rule.slots.push_back(detail::class_slot(Slot::Kind::uppercase));
    } else if (c == 'a') {
      rule.slots.push_back(detail::class_slot(Slot::Kind::lowercase));
    } else if (c == '*') {
      rule.slots.push_back(detail::class_slot(Slot::Kind::any));
    } else if (c == '\\') {
      if (i + 1 >= cps.size())
        throw Error("rule " + id + ": trailing backslash");
      rule.slots.push_back(literal_slot(cps[++i]));
    } else if (c == '[') {
      std::vector<u32> set;
      ++i;
      while (i < cps.size() && cps[i] != ']') set.push_back(cps[i++]);
      if (i >= cps.size()) throw Error("rule " + id + ": unterminated set");
      rule.slots.push_back(set_slot(set));
    } else {
      throw Error("rule " + id + ": unexpected token '" + utf8_encode(c) +
                  "' (escape literals with backslash)");
    }
  }
  if (rule.slots.empty()) throw Error("rule " + id + ": empty pattern");
  return rule;
}

// rules.toml: [[rule]] tables with id and pattern keys.
inline std::vector<FormatRule> load_rules(const std::string& path) {
  std::vector<FormatRule> out;
  auto doc = toml::Document::parse_file(path);
  for (const auto& entry : doc.array_of_tables("rule")) {
    auto id_it = entry.find("id");
    auto pat_it = entry.find("pattern");
    if (id_it == entry.end() || pat_it == entry.end())
      throw Error("rules.toml entry needs id and pattern keys");
    out.push_back(compile_rule(id_it->second.str, pat_it->second.str));
  }
  return out;
}

inline const FormatRule* find_rule(const std::vector<FormatRule>& rules,
                                   const std::string& id) {
  for (const auto& r : rules)
    if (r.id == id) return &r;
  return nullptr;
}

struct Correction {
  int position = 0;  // index among classified characters, spaces excluded
  std::string from;
  std::string to;
  std::string rule_id;
};

struct RuleOutcome {
  bool applied = false;
  std::string skip_reason;  // set when not applied
  std::vector<int> classes;
  std::vector<Correction> corrections;
};

// Constrained decode: per position take the argmax restricted to the
// slot's allowed set (ties: lowest class id); literal slots force their
// symbol. A correction is recorded whenever the constrained choice differs
// from the unconstrained argmax. Substitution-only by construction.
inline RuleOutcome apply_format_rule(
    const std::vector<std::vector<float>>& char_probs, const FormatRule& rule) {
  RuleOutcome out;
  if (char_probs.size() != rule.slots.size()) {
    out.skip_reason = "rule " + rule.id + " expects " +
                      std::to_string(rule.slots.size()) + " characters, got " +
                      std::to_string(char_probs.size());
    return out;
  }
  out.applied = true;
  for (size_t i = 0; i < char_probs.size(); ++i) {
    const auto& probs = char_probs[i];
    if (probs.size() != static_cast<size_t>(charset::kNumClasses))
      throw Error("probability vector has wrong length");
    int top = 0;
    for (int c = 1; c < charset::kNumClasses; ++c)
      if (probs[c] > probs[top]) top = c;
    const auto& allowed = rule.slots[i].allowed;
    int pick = allowed[0];
    for (int c : allowed)
      if (probs[c] > probs[pick]) pick = c;
    if (pick != top)
      out.corrections.push_back({static_cast<int>(i), charset::symbol_of(top),
                                 charset::symbol_of(pick), rule.id});
    out.classes.push_back(pick);
  }
  return out;
}

struct CharResult {
  std::string symbol;
  float probability = 0;  // 0 for spaces, which are not classified
  Box box;                // zero box for spaces
};

struct FieldResult {
  std::string text;
  std::vector<CharResult> chars;  // one per codepoint of text, spaces included
  std::vector<Correction> corrections;
  bool rule_applied = false;
  std::string rule_warning;  // set when a rule was given but skipped
};

// Full pipeline for one field image. Zero characters found is an empty
// result, not an error.
inline FieldResult recognize_field(const classify::Model& model,
                                   const GrayImage& field,
                                   const segment::SegmentParams& seg_params = {},
                                   const FormatRule* rule = nullptr) {
  if (field.empty()) throw Error("empty input");
  FieldResult res;
  auto seg = segment::segment_field(field, seg_params);
  std::vector<std::vector<float>> probs;  // per classified character
  std::vector<int> classes;
  std::vector<Box> boxes;
  std::vector<size_t> char_slots;  // index into res.chars per classified char
  bool first_string = true;
  for (const auto& line : seg.lines) {
    for (const auto& str : line.strings) {
      if (str.chars.empty()) continue;
      if (!first_string) {
        res.chars.push_back({" ", 0.0f, Box{}});
      }
      first_string = false;
      for (const auto& ch : str.chars) {
        auto pred = classify::forward(model, ch.patch);
        classes.push_back(pred.class_id);
        boxes.push_back(ch.box);
        char_slots.push_back(res.chars.size());
        res.chars.push_back({charset::symbol_of(pred.class_id),
                             pred.probs[pred.class_id], ch.box});
        probs.push_back(std::move(pred.probs));
      }
    }
  }
  if (rule != nullptr) {
    auto outcome = apply_format_rule(probs, *rule);
    if (outcome.applied) {
      res.rule_applied = true;
      res.corrections = std::move(outcome.corrections);
      for (size_t i = 0; i < outcome.classes.size(); ++i) {
        int cls = outcome.classes[i];
        auto& entry = res.chars[char_slots[i]];
        entry.symbol = charset::symbol_of(cls);
        entry.probability = probs[i][cls];
      }
    } else {
      res.rule_warning = outcome.skip_reason;
    }
  }
  for (const auto& ch : res.chars) res.text += ch.symbol;
  return res;
}

}  // namespace idocr::ocr
