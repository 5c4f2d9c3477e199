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
// File: tools/idocr.cpp
// Purpose: command-line front end: gen, train, bootstrap, ocr, eval,
//          bench, segment
//
// Progress goes to stderr, machine-readable output to stdout or files.
// Every artifact-producing command writes the resolved configuration next
// to its output. All randomness flows from the master seed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "idocr/bootstrap.hpp"
#include "idocr/charset.hpp"
#include "idocr/classify.hpp"
#include "idocr/config.hpp"
#include "idocr/image_io.hpp"
#include "idocr/metrics.hpp"
#include "idocr/model_io.hpp"
#include "idocr/ocr.hpp"
#include "idocr/rng.hpp"
#include "idocr/segment.hpp"
#include "idocr/synthgen.hpp"

namespace {

using namespace idocr;

bool g_verbose = false;

void note(const std::string& msg) {
  if (g_verbose) std::cerr << "idocr: " << msg << "\n";
}

std::vector<int> desk_classes() {
  std::vector<int> out;
  for (int c = 0; c < charset::kDeskClasses; ++c) out.push_back(c);
  return out;
}

std::vector<int> all_classes() {
  std::vector<int> out;
  for (int c = 0; c < charset::kNumClasses; ++c) out.push_back(c);
  return out;
}

const synthgen::GenParams& params_for_pool(const config::RunConfig& cfg,
                                           const std::string& pool) {
  if (pool == "source") return cfg.gen_source;
  if (pool == "pseudo_real") return cfg.gen_pseudo_real;
  throw Error("unknown font pool: " + pool);
}

// Random field texts for a field corpus: words over the desk classes or
// rule-shaped strings when a rules file provides patterns.
std::vector<synthgen::FieldSpec> make_field_specs(int count, u64 seed,
                                                  const std::string& rules_path,
                                                  bool desk_only) {
  std::vector<synthgen::FieldSpec> out;
  Rng rng(derive_seed(seed, "field-texts"));
  std::vector<ocr::FormatRule> rules;
  if (!rules_path.empty()) rules = ocr::load_rules(rules_path);
  for (int i = 0; i < count; ++i) {
    synthgen::FieldSpec spec;
    if (!rules.empty()) {
      const auto& rule = rules[rng.below(rules.size())];
      spec.rule = rule.id;
      for (const auto& slot : rule.slots) {
        int cls = slot.allowed[rng.below(slot.allowed.size())];
        if (desk_only && slot.kind != ocr::Slot::Kind::literal) {
          std::vector<int> desk;
          for (int c : slot.allowed)
            if (c < charset::kDeskClasses) desk.push_back(c);
          if (!desk.empty()) cls = desk[rng.below(desk.size())];
        }
        spec.text += charset::symbol_of(cls);
      }
    } else {
      int words = 1 + static_cast<int>(rng.below(2));
      for (int w = 0; w < words; ++w) {
        if (w) spec.text += " ";
        int len = 3 + static_cast<int>(rng.below(6));
        for (int j = 0; j < len; ++j) {
          int cls = desk_only
                        ? static_cast<int>(rng.below(charset::kDeskClasses))
                        : static_cast<int>(rng.below(charset::kNumClasses));
          spec.text += charset::symbol_of(cls);
        }
      }
    }
    out.push_back(std::move(spec));
  }
  return out;
}

nn::ModelSpec spec_by_name(const std::string& name) {
  return nn::ModelSpec::preset(name);
}

int run(int argc, char** argv) {
  CLI::App app{"step-wise OCR for fixed-layout document text fields"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<u64> seed_flag;
  std::optional<int> threads_flag;
  app.add_option("--config", config_path, "TOML configuration file");
  app.add_option("--seed", seed_flag, "master seed (overrides config)");
  app.add_option("--threads", threads_flag,
                 "worker threads, 0 = all logical cores");
  app.add_flag("--verbose", g_verbose, "progress notes on stderr");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  std::string gen_kind = "chars", gen_out, gen_pool = "source";
  int gen_train = 2000, gen_test = 200, gen_fields = 500;
  bool gen_full_charset = false;
  gen->add_option("--kind", gen_kind, "chars or fields")
      ->check(CLI::IsMember({"chars", "fields"}));
  gen->add_option("--out", gen_out, "corpus root directory")->required();
  gen->add_option("--pool", gen_pool, "font pool")
      ->check(CLI::IsMember({"source", "pseudo_real"}));
  gen->add_option("--train-per-class", gen_train, "train samples per class");
  gen->add_option("--test-per-class", gen_test, "test samples per class");
  gen->add_option("--fields", gen_fields, "field count (kind=fields)");
  gen->add_flag("--full-charset", gen_full_charset,
                "all 74 classes instead of the 36 desk classes");

  // train
  auto* train = app.add_subcommand("train", "train a classifier");
  std::string train_corpus, train_out;
  train->add_option("--corpus", train_corpus, "character corpus root")
      ->required();
  train->add_option("--out", train_out, "output model file")->required();

  // bootstrap
  auto* boot = app.add_subcommand("bootstrap", "iterative fine-tuning run");
  std::string boot_model, boot_corpus, boot_out;
  boot->add_option("--model", boot_model, "initial model file")->required();
  boot->add_option("--corpus", boot_corpus, "field corpus root")->required();
  boot->add_option("--out", boot_out, "run directory")->required();

  // ocr
  auto* ocr_cmd = app.add_subcommand("ocr", "recognize fields");
  std::string ocr_model, ocr_image, ocr_corpus, ocr_out, ocr_rule;
  ocr_cmd->add_option("--model", ocr_model, "model file")->required();
  ocr_cmd->add_option("--image", ocr_image, "single field image");
  ocr_cmd->add_option("--corpus", ocr_corpus, "field corpus root");
  ocr_cmd->add_option("--out", ocr_out, "JSONL output (default stdout)");
  ocr_cmd->add_option("--rule", ocr_rule, "rule id for --image mode");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score results against truth");
  std::string eval_results, eval_corpus, eval_out, eval_csv;
  eval_cmd->add_option("--results", eval_results, "JSONL from ocr")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "field corpus root")
      ->required();
  eval_cmd->add_option("--out", eval_out, "report JSON (default stdout)");
  eval_cmd->add_option("--confusion-csv", eval_csv, "confusion matrix CSV");

  // bench
  auto* bench = app.add_subcommand("bench", "latency benchmark");
  std::string bench_model;
  int bench_n = 1000;
  bench->add_option("--model", bench_model, "model file")->required();
  bench->add_option("--n", bench_n, "timed forward calls");

  // segment (debug dump)
  auto* seg_cmd = app.add_subcommand("segment", "segmentation debug dump");
  std::string seg_image, seg_out;
  seg_cmd->add_option("--image", seg_image, "field image")->required();
  seg_cmd->add_option("--out", seg_out, "patch dump directory");

  CLI11_PARSE(app, argc, argv);

  config::RunConfig cfg = config::load_config(config_path);
  if (seed_flag) cfg.seed = *seed_flag;
  if (threads_flag) cfg.threads = *threads_flag;
  config::validate_config(cfg);
  if (cfg.threads > 0) worker_count() = cfg.threads;

  if (gen->parsed()) {
    auto fonts = synthgen::FontLibrary::load(cfg.fonts_path);
    auto params = params_for_pool(cfg, gen_pool);
    params.pool = gen_pool;
    const auto& pool = fonts.pool(gen_pool);
    if (gen_kind == "chars") {
      synthgen::CorpusSpec spec;
      spec.classes = gen_full_charset ? all_classes() : desk_classes();
      spec.splits = {{"train", gen_train}, {"test", gen_test}};
      note("generating character corpus at " + gen_out);
      synthgen::generate_corpus(gen_out, spec, pool, params, cfg.seed);
    } else {
      auto specs = make_field_specs(gen_fields, cfg.seed, cfg.rules_path,
                                    !gen_full_charset);
      note("generating field corpus at " + gen_out);
      synthgen::generate_field_corpus(gen_out, specs, pool, params, cfg.seed);
    }
    config::write_resolved(cfg, gen_out);
    return 0;
  }

  if (train->parsed()) {
    note("loading corpus " + train_corpus);
    auto train_set = classify::load_dataset(train_corpus, "train");
    auto test_set = classify::load_dataset(train_corpus, "test");
    classify::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "train");
    classify::TrainResult result;
    if (cfg.model_spec == "hog-linear") {
      note("training hog baseline");
      result = classify::train_linear_baseline(train_set, test_set, tc);
    } else {
      note("training " + cfg.model_spec);
      result =
          classify::train(spec_by_name(cfg.model_spec), train_set, test_set, tc);
    }
    model_io::save_model(result.model, train_out);
    config::write_resolved(
        cfg, std::filesystem::path(train_out).parent_path().string());
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& e : result.history)
      hist.push_back({{"train_loss", e.train_loss},
                      {"test_accuracy", e.test_accuracy}});
    std::cout << nlohmann::json{{"model", train_out}, {"history", hist}}.dump()
              << "\n";
    return 0;
  }

  if (boot->parsed()) {
    auto fonts = synthgen::FontLibrary::load(cfg.fonts_path);
    auto initial = model_io::load_model(boot_model);
    bootstrap::RunParams rp;
    rp.corpus_root = boot_corpus;
    rp.out_dir = boot_out;
    rp.n_stages = cfg.n_stages;
    rp.quota = cfg.quota;
    rp.eval_fraction = cfg.eval_fraction;
    rp.seed = cfg.seed;
    rp.seg = cfg.seg;
    rp.gen = cfg.gen_source;
    rp.train = cfg.train;
    rp.augment_spec = cfg.augment_spec;
    note("bootstrap run to " + boot_out);
    auto result = bootstrap::run_bootstrap(initial, fonts, rp);
    model_io::save_model(result.final_model,
                         (std::filesystem::path(boot_out) / "final.ocrm")
                             .string());
    config::write_resolved(cfg, boot_out);
    std::cout << result.summary.to_json().dump() << "\n";
    return 0;
  }

  if (ocr_cmd->parsed()) {
    auto model = model_io::load_model(ocr_model);
    std::vector<ocr::FormatRule> rules;
    if (!cfg.rules_path.empty()) rules = ocr::load_rules(cfg.rules_path);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!ocr_out.empty()) {
      file.open(ocr_out, std::ios::trunc);
      if (!file) throw Error("cannot write: " + ocr_out);
      out = &file;
    }
    auto emit = [&](const std::string& name, const ocr::FieldResult& r,
                    const std::string& truth) {
      nlohmann::json corrections = nlohmann::json::array();
      for (const auto& c : r.corrections)
        corrections.push_back({{"position", c.position},
                               {"from", c.from},
                               {"to", c.to},
                               {"rule", c.rule_id}});
      nlohmann::json row{{"field", name},
                         {"text", r.text},
                         {"rule_applied", r.rule_applied},
                         {"corrections", corrections}};
      if (!truth.empty()) row["truth"] = truth;
      if (!r.rule_warning.empty()) row["rule_warning"] = r.rule_warning;
      *out << row.dump() << "\n";
    };
    if (!ocr_image.empty()) {
      GrayImage img = read_png(ocr_image);
      const ocr::FormatRule* rule =
          ocr_rule.empty() ? nullptr : ocr::find_rule(rules, ocr_rule);
      if (!ocr_rule.empty() && rule == nullptr)
        throw Error("rule not found: " + ocr_rule);
      auto res = ocr::recognize_field(model, img, cfg.seg, rule);
      if (!res.rule_warning.empty())
        std::cerr << "idocr: warning: " << res.rule_warning << "\n";
      emit(ocr_image, res, "");
    } else if (!ocr_corpus.empty()) {
      auto records = synthgen::load_field_corpus(ocr_corpus);
      auto root = std::filesystem::path(ocr_corpus);
      for (const auto& rec : records) {
        GrayImage img = read_png((root / rec.path).string());
        const ocr::FormatRule* rule =
            rec.rule.empty() ? nullptr : ocr::find_rule(rules, rec.rule);
        auto res = ocr::recognize_field(model, img, cfg.seg, rule);
        if (!res.rule_warning.empty())
          std::cerr << "idocr: warning: " << rec.path << ": "
                    << res.rule_warning << "\n";
        emit(rec.path, res, rec.text);
      }
    } else {
      throw Error("ocr needs --image or --corpus");
    }
    return 0;
  }

  if (eval_cmd->parsed()) {
    std::ifstream f(eval_results);
    if (!f) throw Error("cannot open: " + eval_results);
    std::map<std::string, std::string> by_field;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      by_field[j.at("field").get<std::string>()] =
          j.at("text").get<std::string>();
    }
    auto records = synthgen::load_field_corpus(eval_corpus);
    std::vector<std::string> preds, truths;
    for (const auto& rec : records) {
      auto it = by_field.find(rec.path);
      if (it == by_field.end())
        throw Error("results missing field: " + rec.path);
      preds.push_back(it->second);
      truths.push_back(rec.text);
    }
    auto report = metrics::evaluate_fields(preds, truths);
    std::string json = report.to_json().dump(2) + "\n";
    if (eval_out.empty()) {
      std::cout << json;
    } else {
      std::ofstream of(eval_out, std::ios::trunc);
      if (!of) throw Error("cannot write: " + eval_out);
      of << json;
    }
    if (!eval_csv.empty()) {
      std::ofstream of(eval_csv, std::ios::trunc);
      if (!of) throw Error("cannot write: " + eval_csv);
      of << metrics::confusion_csv(report);
    }
    return 0;
  }

  if (bench->parsed()) {
    auto model = model_io::load_model(bench_model);
    auto fonts = synthgen::FontLibrary::load(cfg.fonts_path);
    const auto& pool = fonts.pool(cfg.gen_source.pool);
    std::vector<GrayImage> patches;
    for (int i = 0; i < 32; ++i) {
      int cls = i % charset::kDeskClasses;
      patches.push_back(
          synthgen::render_char_sample(cls, pool, cfg.gen_source,
                                       derive_seed(cfg.seed, "bench/" +
                                                                 std::to_string(i)))
              .image);
    }
    auto stats = metrics::benchmark_latency(model, patches, bench_n);
    std::cout << stats.to_json().dump() << "\n";
    return 0;
  }

  if (seg_cmd->parsed()) {
    GrayImage img = read_png(seg_image);
    auto seg = segment::segment_field(img, cfg.seg);
    nlohmann::json lines = nlohmann::json::array();
    int patch_idx = 0;
    for (const auto& line : seg.lines) {
      nlohmann::json strings = nlohmann::json::array();
      for (const auto& str : line.strings) {
        nlohmann::json chars = nlohmann::json::array();
        for (const auto& ch : str.chars) {
          chars.push_back({{"box", {ch.box.x, ch.box.y, ch.box.w, ch.box.h}}});
          if (!seg_out.empty()) {
            std::filesystem::create_directories(seg_out);
            write_png((std::filesystem::path(seg_out) /
                       ("patch" + std::to_string(patch_idx++) + ".png"))
                          .string(),
                      ch.patch);
          }
        }
        strings.push_back({{"box", {str.box.x, str.box.y, str.box.w, str.box.h}},
                           {"chars", chars}});
      }
      lines.push_back({{"box", {line.box.x, line.box.y, line.box.w, line.box.h}},
                       {"strings", strings}});
    }
    std::cout << nlohmann::json{{"lines", lines}}.dump() << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "idocr: error: " << e.what() << "\n";
    return 1;
  }
}
