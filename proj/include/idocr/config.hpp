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
// File: include/idocr/config.hpp
// Purpose: run configuration: TOML file, IDOCR_ env overrides, validation
//
// Precedence: built-in defaults < TOML file < IDOCR_* environment
// variables < command-line flags. A resolved copy is written next to every
// artifact a command produces, so runs stay auditable. Validation collects
// every problem before failing, not just the first.

#pragma once

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "idocr/bootstrap.hpp"
#include "idocr/classify.hpp"
#include "idocr/common.hpp"
#include "idocr/segment.hpp"
#include "idocr/synthgen.hpp"
#include "idocr/toml.hpp"

namespace idocr::config {

struct RunConfig {
  u64 seed = 1;
  int threads = 0;  // 0 = all logical cores
  std::string fonts_path = "fonts/fonts.toml";
  std::string rules_path;  // optional
  std::string model_spec = "cifarnet-like";
  synthgen::GenParams gen_source = synthgen::GenParams::source_defaults();
  synthgen::GenParams gen_pseudo_real =
      synthgen::GenParams::pseudo_real_defaults();
  classify::TrainConfig train;
  segment::SegmentParams seg;
  bootstrap::AugmentSpec augment_spec;
  int n_stages = 4;
  int quota = 2000;
  double eval_fraction = 0.2;
};

namespace detail {

struct Binding {
  enum class Kind { U64, Int, Double, Str } kind;
  std::string key;  // toml key, env name = IDOCR_ + upper with _ for .
  void* target;
};

inline std::vector<Binding> bindings(RunConfig& c) {
  using K = Binding::Kind;
  std::vector<Binding> b;
  auto add = [&](K k, const std::string& key, void* t) {
    b.push_back({k, key, t});
  };
  add(K::U64, "seed", &c.seed);
  add(K::Int, "threads", &c.threads);
  add(K::Str, "paths.fonts", &c.fonts_path);
  add(K::Str, "paths.rules", &c.rules_path);
  add(K::Str, "train.spec", &c.model_spec);
  for (auto* gp : {&c.gen_source, &c.gen_pseudo_real}) {
    std::string p =
        gp == &c.gen_source ? "gen.source." : "gen.pseudo_real.";
    add(K::Str, p + "pool", &gp->pool);
    add(K::Int, p + "bg_min", &gp->bg_min);
    add(K::Int, p + "bg_max", &gp->bg_max);
    add(K::Int, p + "ink_min", &gp->ink_min);
    add(K::Int, p + "ink_max", &gp->ink_max);
    add(K::Int, p + "blotch_min", &gp->blotch_min);
    add(K::Int, p + "blotch_max", &gp->blotch_max);
    add(K::Double, p + "blotch_r_min", &gp->blotch_r_min);
    add(K::Double, p + "blotch_r_max", &gp->blotch_r_max);
    add(K::Int, p + "blotch_delta", &gp->blotch_delta);
    add(K::Double, p + "size_min", &gp->size_min);
    add(K::Double, p + "size_max", &gp->size_max);
    add(K::Double, p + "rot_deg", &gp->rot_deg);
    add(K::Double, p + "trans_px", &gp->trans_px);
    add(K::Double, p + "gap_min", &gp->gap_min);
    add(K::Double, p + "gap_max", &gp->gap_max);
  }
  add(K::Int, "train.epochs", &c.train.epochs);
  add(K::Int, "train.batch_size", &c.train.batch_size);
  add(K::Double, "train.learning_rate", &c.train.learning_rate);
  add(K::Double, "train.momentum", &c.train.momentum);
  add(K::Double, "train.weight_decay", &c.train.weight_decay);
  add(K::Double, "train.decay_factor", &c.train.decay_factor);
  add(K::Int, "segment.binarize_window", &c.seg.binarize_window);
  add(K::Int, "segment.binarize_offset", &c.seg.binarize_offset);
  add(K::Int, "segment.min_gap", &c.seg.min_gap);
  add(K::Double, "segment.noise_floor", &c.seg.noise_floor);
  add(K::Double, "segment.gap_factor", &c.seg.gap_factor);
  add(K::Double, "augment.rotation_deg", &c.augment_spec.rotation_deg);
  add(K::Double, "augment.translate_px", &c.augment_spec.translate_px);
  add(K::Double, "augment.scale_lo", &c.augment_spec.scale_lo);
  add(K::Double, "augment.scale_hi", &c.augment_spec.scale_hi);
  add(K::Double, "augment.gain_lo", &c.augment_spec.gain_lo);
  add(K::Double, "augment.gain_hi", &c.augment_spec.gain_hi);
  add(K::Double, "augment.bias", &c.augment_spec.bias);
  add(K::Int, "bootstrap.n_stages", &c.n_stages);
  add(K::Int, "bootstrap.quota", &c.quota);
  add(K::Double, "bootstrap.eval_fraction", &c.eval_fraction);
  return b;
}

inline std::string env_name(const std::string& key) {
  std::string out = "IDOCR_";
  for (char ch : key)
    out += ch == '.' ? '_' : static_cast<char>(std::toupper(
                                 static_cast<unsigned char>(ch)));
  return out;
}

inline void assign(const Binding& b, const toml::Value& v) {
  switch (b.kind) {
    case Binding::Kind::U64:
      if (v.kind != toml::Value::Kind::Int)
        throw Error("'" + b.key + "' must be an integer");
      *static_cast<u64*>(b.target) = static_cast<u64>(v.integer);
      break;
    case Binding::Kind::Int:
      if (v.kind != toml::Value::Kind::Int)
        throw Error("'" + b.key + "' must be an integer");
      *static_cast<int*>(b.target) = static_cast<int>(v.integer);
      break;
    case Binding::Kind::Double:
      *static_cast<double*>(b.target) = v.as_number();
      break;
    case Binding::Kind::Str:
      if (v.kind != toml::Value::Kind::Str)
        throw Error("'" + b.key + "' must be a string");
      *static_cast<std::string*>(b.target) = v.str;
      break;
  }
}

inline void assign_env(const Binding& b, const std::string& text) {
  toml::Value v;
  switch (b.kind) {
    case Binding::Kind::U64:
    case Binding::Kind::Int: {
      v.kind = toml::Value::Kind::Int;
      char* end = nullptr;
      v.integer = std::strtoll(text.c_str(), &end, 0);
      if (end == text.c_str() || *end != '\0')
        throw Error(env_name(b.key) + ": bad integer '" + text + "'");
      break;
    }
    case Binding::Kind::Double: {
      v.kind = toml::Value::Kind::Float;
      char* end = nullptr;
      v.real = std::strtod(text.c_str(), &end);
      if (end == text.c_str() || *end != '\0')
        throw Error(env_name(b.key) + ": bad number '" + text + "'");
      break;
    }
    case Binding::Kind::Str:
      v.kind = toml::Value::Kind::Str;
      v.str = text;
      break;
  }
  assign(b, v);
}

inline std::string format_value(const Binding& b) {
  std::ostringstream os;
  switch (b.kind) {
    case Binding::Kind::U64: os << *static_cast<u64*>(b.target); break;
    case Binding::Kind::Int: os << *static_cast<int*>(b.target); break;
    case Binding::Kind::Double: os << *static_cast<double*>(b.target); break;
    case Binding::Kind::Str:
      os << '"' << *static_cast<std::string*>(b.target) << '"';
      break;
  }
  return os.str();
}

}  // namespace detail

// Defaults, overlaid by the TOML file (when given), overlaid by IDOCR_*
// environment variables.
inline RunConfig load_config(const std::string& path = "") {
  RunConfig cfg;
  auto binds = detail::bindings(cfg);
  if (!path.empty()) {
    auto doc = toml::Document::parse_file(path);
    // reject unknown keys so typos fail loudly
    for (const auto& [key, value] : doc.scalars()) {
      if (key == "train.decay_at") continue;
      bool known = false;
      for (const auto& b : binds)
        if (b.key == key) {
          detail::assign(b, value);
          known = true;
          break;
        }
      if (!known) throw Error(path + ": unknown key '" + key + "'");
    }
    if (doc.has("train.decay_at")) {
      const auto& v = doc.at("train.decay_at");
      if (v.kind != toml::Value::Kind::Array)
        throw Error("'train.decay_at' must be an array");
      cfg.train.decay_at.clear();
      for (const auto& e : v.array) cfg.train.decay_at.push_back(e.as_number());
    }
  }
  for (const auto& b : binds) {
    const char* env = std::getenv(detail::env_name(b.key).c_str());
    if (env != nullptr) detail::assign_env(b, env);
  }
  if (const char* env = std::getenv("IDOCR_TRAIN_DECAY_AT")) {
    cfg.train.decay_at.clear();
    std::istringstream ss(env);
    std::string tok;
    while (std::getline(ss, tok, ','))
      cfg.train.decay_at.push_back(std::strtod(tok.c_str(), nullptr));
  }
  return cfg;
}

// Collects every problem; the error message lists them all.
inline void validate_config(const RunConfig& c) {
  std::vector<std::string> problems;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };
  check(std::filesystem::exists(c.fonts_path),
        "fonts file not found: " + c.fonts_path);
  if (!c.rules_path.empty())
    check(std::filesystem::exists(c.rules_path),
          "rules file not found: " + c.rules_path);
  check(c.threads >= 0, "threads must be >= 0");
  check(c.train.epochs >= 0, "train.epochs must be >= 0");
  check(c.train.batch_size >= 1, "train.batch_size must be >= 1");
  check(c.train.learning_rate > 0, "train.learning_rate must be > 0");
  check(c.train.decay_factor > 0, "train.decay_factor must be > 0");
  check(c.model_spec == "cifarnet-like" || c.model_spec == "lenet-like" ||
            c.model_spec == "hog-linear",
        "train.spec must be cifarnet-like, lenet-like or hog-linear");
  check(c.n_stages >= 1, "bootstrap.n_stages must be >= 1");
  check(c.quota >= 1, "bootstrap.quota must be >= 1");
  check(c.eval_fraction > 0 && c.eval_fraction < 1,
        "bootstrap.eval_fraction must be in (0,1)");
  for (const auto* gp : {&c.gen_source, &c.gen_pseudo_real}) {
    try {
      synthgen::validate_params(*gp);
    } catch (const Error& e) {
      problems.push_back(std::string(e.what()) + " (" + gp->pool + ")");
    }
  }
  if (!problems.empty()) {
    std::string all = "config invalid:";
    for (const auto& p : problems) all += "\n  - " + p;
    throw Error(all);
  }
}

// The fully resolved configuration as TOML, grouped by section in binding
// order. Written beside every artifact.
inline std::string resolved_toml(const RunConfig& c) {
  auto binds = detail::bindings(const_cast<RunConfig&>(c));
  std::string out;
  std::string section;
  for (const auto& b : binds) {
    auto dot = b.key.rfind('.');
    std::string sec = dot == std::string::npos ? "" : b.key.substr(0, dot);
    std::string leaf = dot == std::string::npos ? b.key : b.key.substr(dot + 1);
    if (sec != section) {
      section = sec;
      out += "\n[" + sec + "]\n";
    }
    out += leaf + " = " + detail::format_value(b) + "\n";
    if (b.key == "train.decay_factor") {
      out += "decay_at = [";
      for (size_t i = 0; i < c.train.decay_at.size(); ++i) {
        if (i) out += ", ";
        std::ostringstream os;
        os << c.train.decay_at[i];
        out += os.str();
      }
      out += "]\n";
    }
  }
  return out;
}

inline void write_resolved(const RunConfig& c, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto path = std::filesystem::path(dir) / "resolved_config.toml";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write: " + path.string());
  f << resolved_toml(c);
}

}  // namespace idocr::config
