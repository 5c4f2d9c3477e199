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
// File: tests/test_bootstrap.cpp
// Purpose: synthetic share schedule, augmentation, patch mining, stage
//          dataset assembly, resumable multi-stage runs

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "idocr/bootstrap.hpp"

using namespace idocr;
using Catch::Approx;

namespace {

const synthgen::FontLibrary& fonts() {
  static synthgen::FontLibrary lib =
      synthgen::FontLibrary::load(IDOCR_SOURCE_DIR "/fonts/fonts.toml");
  return lib;
}

classify::Model zero_linear_model() {
  classify::Model m;
  m.kind = "hog_linear";
  m.lin_w.assign(static_cast<size_t>(m.classes) * 1764, 0.0f);
  m.lin_b.assign(m.classes, 0.0f);
  return m;
}

synthgen::GenParams clean_fields() {
  auto p = synthgen::GenParams::pseudo_real_defaults();
  p.blotch_max = 0;
  return p;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("idocr_bs_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

GrayImage noise_patch(u64 seed) {
  Rng rng(seed);
  GrayImage img(64, 64);
  for (auto& v : img.data) v = static_cast<u8>(rng.below(256));
  return img;
}

}  // namespace

TEST_CASE("synthetic share halves per stage down to the floor") {
  REQUIRE(bootstrap::share_for_stage(0) == Approx(0.5));
  REQUIRE(bootstrap::share_for_stage(1) == Approx(0.25));
  REQUIRE(bootstrap::share_for_stage(2) == Approx(0.125));
  REQUIRE(bootstrap::share_for_stage(3) == Approx(0.0625));
  REQUIRE(bootstrap::share_for_stage(4) == Approx(0.05));
  REQUIRE(bootstrap::share_for_stage(9) == Approx(0.05));
  REQUIRE_THROWS_AS(bootstrap::share_for_stage(-1), Error);
}

TEST_CASE("the identity augmentation returns the input untouched") {
  auto img = noise_patch(1);
  auto out = bootstrap::augment_one(img, bootstrap::AugmentSpec::identity(), 9);
  REQUIRE(out.data == img.data);
}

TEST_CASE("augmentation is deterministic and label preserving") {
  bootstrap::AugmentSpec spec;  // defaults: rotation, shift, scale, gray jitter
  auto img = noise_patch(2);
  auto a = bootstrap::augment_one(img, spec, 5);
  auto b = bootstrap::augment_one(img, spec, 5);
  auto c = bootstrap::augment_one(img, spec, 6);
  REQUIRE(a.data == b.data);
  REQUIRE(a.data != c.data);
  REQUIRE(a.width == img.width);
  REQUIRE(a.height == img.height);

  std::vector<synthgen::CharSample> in(2);
  in[0].image = noise_patch(3);
  in[0].label = 5;
  in[1].image = noise_patch(4);
  in[1].label = 6;
  auto out = bootstrap::augment(in, spec, 7);
  REQUIRE(out.size() == 2);
  REQUIRE(out[0].label == 5);
  REQUIRE(out[1].label == 6);
  for (const auto& s : out)
    REQUIRE(s.provenance == synthgen::Provenance::augmented);
  auto again = bootstrap::augment(in, spec, 7);
  REQUIRE(again[0].image.data == out[0].image.data);
  REQUIRE_THROWS_AS(bootstrap::augment({}, spec, 1), Error);
}

TEST_CASE("mining labels patches by position and logs skipped fields") {
  auto dir = fresh_dir("mine");
  std::vector<synthgen::FieldSpec> specs{{"01 23", ""}, {"AB", ""}};
  synthgen::generate_field_corpus(dir.string(), specs,
                                  fonts().pool("pseudo_real"), clean_fields(),
                                  21);
  auto records = synthgen::load_field_corpus(dir.string());
  // append rows that must be skipped, reusing the second field's image
  {
    std::ofstream f(dir / "fields.jsonl", std::ios::app);
    nlohmann::json wrong_count{{"path", records[1].path},
                               {"text", "ABC"},
                               {"seed", 0},
                               {"boxes", nlohmann::json::array()}};
    nlohmann::json bad_symbol{{"path", records[1].path},
                              {"text", "!?"},
                              {"seed", 0},
                              {"boxes", nlohmann::json::array()}};
    nlohmann::json gone{{"path", "nope.png"},
                        {"text", "A"},
                        {"seed", 0},
                        {"boxes", nlohmann::json::array()}};
    f << wrong_count.dump() << "\n"
      << bad_symbol.dump() << "\n"
      << gone.dump() << "\n";
  }

  auto model = zero_linear_model();
  auto mined = bootstrap::mine_patches(model, dir.string());
  REQUIRE(mined.samples.size() == 6);
  std::vector<int> labels;
  for (const auto& s : mined.samples) {
    labels.push_back(s.label);
    REQUIRE(s.provenance == synthgen::Provenance::mined);
    REQUIRE(s.image.width == 64);
  }
  REQUIRE(labels == std::vector<int>{0, 1, 2, 3, 10, 11});
  REQUIRE(mined.per_class[0] == 1);
  REQUIRE(mined.per_class[10] == 1);
  REQUIRE(mined.per_class[12] == 0);

  REQUIRE(mined.skipped.size() == 3);
  REQUIRE(mined.skipped[0].index == 2);
  REQUIRE(mined.skipped[0].reason == "count mismatch");
  REQUIRE(mined.skipped[1].index == 3);
  REQUIRE(mined.skipped[1].reason == "symbol not in charset");
  REQUIRE(mined.skipped[2].index == 4);
  REQUIRE_FALSE(mined.skipped[2].reason.empty());

  // subsets restrict and validate indices
  std::vector<int> subset{1};
  auto only_b = bootstrap::mine_patches(model, dir.string(), {}, &subset);
  REQUIRE(only_b.samples.size() == 2);
  REQUIRE(only_b.samples[0].label == 10);
  std::vector<int> bad{99};
  REQUIRE_THROWS_AS(bootstrap::mine_patches(model, dir.string(), {}, &bad),
                    Error);

  auto stale = model;
  stale.charset_hash = 0;
  REQUIRE_THROWS_AS(bootstrap::mine_patches(stale, dir.string()), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("stage datasets mix mined, augmented and synthetic per quota") {
  std::vector<synthgen::CharSample> mined;
  for (int i = 0; i < 8; ++i) {
    synthgen::CharSample s;
    s.image = noise_patch(100 + i);
    s.label = 0;
    s.provenance = synthgen::Provenance::mined;
    mined.push_back(std::move(s));
  }
  for (int i = 0; i < 2; ++i) {
    synthgen::CharSample s;
    s.image = noise_patch(200 + i);
    s.label = 1;
    s.provenance = synthgen::Provenance::mined;
    mined.push_back(std::move(s));
  }

  bootstrap::StageConfig cfg;
  cfg.quota = 6;
  cfg.synthetic_share = 0.5;
  auto gen = synthgen::GenParams::source_defaults();
  auto ds = bootstrap::build_stage_dataset(mined, cfg, fonts(), gen, 77);

  // class 0: 3 mined + 3 synthetic; class 1: 2 mined + 1 augmented +
  // 3 synthetic; the other 72 classes: all 6 synthetic
  REQUIRE(ds.real_count == 5);
  REQUIRE(ds.augmented_count == 1);
  REQUIRE(ds.synthetic_count == 3 + 3 + 72 * 6);
  REQUIRE(ds.train.size() + ds.test.size() == 74 * 6);
  REQUIRE(ds.test.size() == 74);  // 90/10 split of six per class
  REQUIRE(ds.manifest.size() == 74 * 6);

  int synth_cls2 = 0;
  for (const auto& row : ds.manifest)
    if (row.at("class") == 2) {
      REQUIRE(row.at("provenance") == "synthetic");
      ++synth_cls2;
    }
  REQUIRE(synth_cls2 == 6);

  auto ds2 = bootstrap::build_stage_dataset(mined, cfg, fonts(), gen, 77);
  REQUIRE(ds2.manifest == ds.manifest);
  for (size_t i = 0; i < ds.train.size(); ++i)
    REQUIRE(ds2.train.images[i].data == ds.train.images[i].data);

  auto bad = cfg;
  bad.quota = 0;
  REQUIRE_THROWS_AS(bootstrap::build_stage_dataset(mined, bad, fonts(), gen, 1),
                    Error);
  bad = cfg;
  bad.synthetic_share = 1.5;
  REQUIRE_THROWS_AS(bootstrap::build_stage_dataset(mined, bad, fonts(), gen, 1),
                    Error);
}

TEST_CASE("stage reports round trip through json") {
  bootstrap::StageReport r;
  r.stage = 2;
  r.mined_count = 123;
  r.per_class_mined.assign(74, 0);
  r.per_class_mined[5] = 123;
  r.real_count = 70;
  r.augmented_count = 30;
  r.synthetic_count = 48;
  r.synthetic_fraction = 48.0 / 148.0;
  r.test_accuracy = 0.91;
  r.pseudo_real_accuracy = 0.77;
  r.skipped_fields = 4;
  r.skip_reasons = {{"count mismatch", 3}, {"symbol not in charset", 1}};
  auto back = bootstrap::StageReport::from_json(r.to_json());
  REQUIRE(back.to_json() == r.to_json());
}

TEST_CASE("the eval split is a deterministic partition") {
  std::vector<int> eval_set, mine_set;
  bootstrap::detail::split_fields(10, 0.2, 4, eval_set, mine_set);
  REQUIRE(eval_set.size() == 2);
  REQUIRE(mine_set.size() == 8);
  std::vector<int> all = eval_set;
  all.insert(all.end(), mine_set.begin(), mine_set.end());
  std::sort(all.begin(), all.end());
  for (int i = 0; i < 10; ++i) REQUIRE(all[i] == i);
  std::vector<int> eval2, mine2;
  bootstrap::detail::split_fields(10, 0.2, 4, eval2, mine2);
  REQUIRE(eval2 == eval_set);
  std::vector<int> eval3, mine3;
  bootstrap::detail::split_fields(10, 0.2, 5, eval3, mine3);
  REQUIRE((eval3 != eval_set || mine3 != mine_set));
}

TEST_CASE("interrupted runs resume to the same summary") {
  auto corpus = fresh_dir("run_corpus");
  Rng rng(31);
  std::vector<synthgen::FieldSpec> specs;
  for (int i = 0; i < 30; ++i) {
    std::string text;
    for (int j = 0; j < 5; ++j)
      text += charset::symbol_of(static_cast<int>(rng.below(10)));
    specs.push_back({text, ""});
  }
  synthgen::generate_field_corpus(corpus.string(), specs,
                                  fonts().pool("pseudo_real"), clean_fields(),
                                  13);

  // a valid but untrained starting model
  classify::Dataset seedset;
  for (int cls : {0, 1, 2, 3}) {
    auto s = synthgen::render_char_sample(
        cls, fonts().pool("source"), synthgen::GenParams::source_defaults(),
        cls + 50);
    seedset.push(std::move(s.image), cls);
  }
  nn::ModelSpec spec;
  spec.layers.push_back({nn::LayerSpec::Kind::conv, 8, 5, 2, 2, 0});
  spec.layers.push_back({nn::LayerSpec::Kind::relu, 0, 0, 1, 0, 0});
  spec.layers.push_back({nn::LayerSpec::Kind::maxpool, 0, 4, 4, 0, 0});
  spec.layers.push_back({nn::LayerSpec::Kind::fully_connected, 0, 0, 1, 0,
                         charset::kNumClasses});
  spec.layers.push_back({nn::LayerSpec::Kind::softmax, 0, 0, 1, 0, 0});
  classify::TrainConfig t0;
  t0.epochs = 0;
  t0.batch_size = 1;
  auto initial = classify::train(spec, seedset, seedset, t0).model;

  bootstrap::RunParams params;
  params.corpus_root = corpus.string();
  params.out_dir = fresh_dir("run_out").string();
  params.n_stages = 2;
  params.quota = 10;
  params.eval_fraction = 0.2;
  params.seed = 3;
  params.train.epochs = 1;
  params.train.batch_size = 32;

  auto first = bootstrap::run_bootstrap(initial, fonts(), params);
  REQUIRE(first.summary.stages.size() == 2);
  REQUIRE(first.summary.frozen_test_chars > 0);
  REQUIRE(first.summary.stages[0].mined_count > 0);
  // mining does not depend on the stage model, so counts stay constant
  REQUIRE(first.summary.stages[0].mined_count ==
          first.summary.stages[1].mined_count);
  // the synthetic share shrinks between stages
  REQUIRE(first.summary.stages[1].synthetic_fraction <
          first.summary.stages[0].synthetic_fraction);
  REQUIRE(first.final_model.lineage.back() == "stage-1");

  for (int k : {0, 1}) {
    auto stage = std::filesystem::path(params.out_dir) /
                 ("stage-" + std::to_string(k));
    REQUIRE(std::filesystem::exists(stage / "model.ocrm"));
    REQUIRE(std::filesystem::exists(stage / "report.json"));
    REQUIRE(std::filesystem::exists(stage / "dataset.jsonl"));
  }
  REQUIRE(std::filesystem::exists(
      std::filesystem::path(params.out_dir) / "summary.json"));

  // a second run over the same directory resumes every stage from disk
  auto second = bootstrap::run_bootstrap(initial, fonts(), params);
  REQUIRE(second.summary.to_json().dump() == first.summary.to_json().dump());

  auto bad = params;
  bad.n_stages = 0;
  REQUIRE_THROWS_AS(bootstrap::run_bootstrap(initial, fonts(), bad), Error);
  bad = params;
  bad.eval_fraction = 0.0;
  REQUIRE_THROWS_AS(bootstrap::run_bootstrap(initial, fonts(), bad), Error);

  std::filesystem::remove_all(corpus);
  std::filesystem::remove_all(params.out_dir);
}
