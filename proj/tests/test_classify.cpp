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
// File: tests/test_classify.cpp
// Purpose: dataset loading, training loop, fine tuning, HOG baseline,
//          model file round trips

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "idocr/classify.hpp"
#include "idocr/model_io.hpp"
#include "idocr/synthgen.hpp"

using namespace idocr;
using Catch::Approx;

namespace {

const synthgen::FontLibrary& fonts() {
  static synthgen::FontLibrary lib =
      synthgen::FontLibrary::load(IDOCR_SOURCE_DIR "/fonts/fonts.toml");
  return lib;
}

// Small corpus shared by the training tests: four well-separated glyphs.
const std::filesystem::path& tiny_corpus() {
  static std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() / "idocr_cls_corpus";
    std::filesystem::remove_all(d);
    synthgen::CorpusSpec spec;
    spec.classes = {0, 1, 10, 35};
    spec.splits = {{"train", 20}, {"test", 5}};
    synthgen::generate_corpus(d.string(), spec, fonts().pool("source"),
                              synthgen::GenParams::source_defaults(), 7);
    return d;
  }();
  return dir;
}

nn::ModelSpec tiny_cnn() {
  nn::ModelSpec spec;
  spec.layers.push_back({nn::LayerSpec::Kind::conv, 8, 5, 2, 2, 0});
  spec.layers.push_back({nn::LayerSpec::Kind::relu, 0, 0, 1, 0, 0});
  spec.layers.push_back({nn::LayerSpec::Kind::maxpool, 0, 4, 4, 0, 0});
  spec.layers.push_back({nn::LayerSpec::Kind::fully_connected, 0, 0, 1, 0,
                         charset::kNumClasses});
  spec.layers.push_back({nn::LayerSpec::Kind::softmax, 0, 0, 1, 0, 0});
  return spec;
}

std::vector<float> flat_params(const classify::Model& m) {
  std::vector<float> out;
  for (auto& p : m.net->named_params())
    out.insert(out.end(), p.tensor->data.begin(), p.tensor->data.end());
  return out;
}

GrayImage flat_image(u8 value) {
  return GrayImage(classify::kPatchSide, classify::kPatchSide, value);
}

}  // namespace

TEST_CASE("load_dataset splits the manifest by path prefix") {
  auto ds = classify::load_dataset(tiny_corpus().string(), "train");
  REQUIRE(ds.size() == 4 * 20);
  auto test = classify::load_dataset(tiny_corpus().string(), "test");
  REQUIRE(test.size() == 4 * 5);
  int count_cls0 = 0;
  for (int l : ds.labels) count_cls0 += l == 0;
  REQUIRE(count_cls0 == 20);
  REQUIRE_THROWS_WITH(classify::load_dataset(tiny_corpus().string(), "dev"),
                      Catch::Matchers::ContainsSubstring("no samples"));
}

TEST_CASE("norm_stats computes pixel mean and spread") {
  classify::Dataset ds;
  ds.push(flat_image(0), 0);
  ds.push(flat_image(255), 1);
  double mean = -1, sd = -1;
  classify::detail::norm_stats(ds, mean, sd);
  REQUIRE(mean == Approx(0.5));
  REQUIRE(sd == Approx(0.5));
}

TEST_CASE("train config validation rejects nonsense values") {
  classify::TrainConfig c;
  REQUIRE_NOTHROW(classify::validate_config(c, 100));
  c.epochs = -1;
  REQUIRE_THROWS_AS(classify::validate_config(c, 100), Error);
  c = {};
  c.batch_size = 0;
  REQUIRE_THROWS_AS(classify::validate_config(c, 100), Error);
  c = {};
  c.batch_size = 200;
  REQUIRE_THROWS_AS(classify::validate_config(c, 100), Error);
  c = {};
  c.learning_rate = 0;
  REQUIRE_THROWS_AS(classify::validate_config(c, 100), Error);
}

TEST_CASE("hog features have the documented layout") {
  auto f = classify::hog_features(flat_image(128));
  REQUIRE(f.size() == 1764);
  for (float v : f) REQUIRE(v == 0.0f);  // constant image has no gradients

  // vertical edge: all gradient energy falls into the horizontal bin
  GrayImage edge(classify::kPatchSide, classify::kPatchSide);
  for (int y = 0; y < edge.height; ++y)
    for (int x = 0; x < edge.width; ++x)
      edge.at(x, y) = x < 32 ? 0 : 255;
  auto fe = classify::hog_features(edge);
  bool any = false;
  for (size_t i = 0; i < fe.size(); ++i) {
    if (fe[i] == 0.0f) continue;
    any = true;
    REQUIRE(i % 9 == 0);
  }
  REQUIRE(any);

  GrayImage small(8, 8);
  REQUIRE_THROWS_AS(classify::hog_features(small), Error);
}

TEST_CASE("forward on an all-zero linear model ties to the lowest class") {
  classify::Model m;
  m.kind = "hog_linear";
  m.lin_w.assign(static_cast<size_t>(m.classes) * 1764, 0.0f);
  m.lin_b.assign(m.classes, 0.0f);
  auto p = classify::forward(m, flat_image(200));
  REQUIRE(p.class_id == 0);
  REQUIRE(static_cast<int>(p.probs.size()) == m.classes);
  double sum = 0;
  for (float q : p.probs) {
    REQUIRE(q == Approx(1.0 / m.classes).epsilon(1e-5));
    sum += q;
  }
  REQUIRE(sum == Approx(1.0).epsilon(1e-5));

  GrayImage small(8, 8);
  REQUIRE_THROWS_AS(classify::forward(m, small), Error);
  m.kind = "mystery";
  REQUIRE_THROWS_AS(classify::forward(m, flat_image(200)), Error);
}

TEST_CASE("a small cnn learns four glyph classes") {
  auto train = classify::load_dataset(tiny_corpus().string(), "train");
  auto test = classify::load_dataset(tiny_corpus().string(), "test");
  classify::TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.02;
  cfg.seed = 1;
  auto r = classify::train(tiny_cnn(), train, test, cfg);

  REQUIRE(r.model.kind == "cnn");
  REQUIRE(r.model.lineage == std::vector<std::string>{"base"});
  REQUIRE(r.history.size() == 20);
  REQUIRE(r.history.back().train_loss < r.history.front().train_loss);
  REQUIRE(r.history.back().test_accuracy >= 0.7);

  double mean = 0, sd = 0;
  classify::detail::norm_stats(train, mean, sd);
  REQUIRE(r.model.norm_mean == Approx(mean));
  REQUIRE(r.model.norm_std == Approx(sd));

  // training twice with the same seed gives the same weights
  auto r2 = classify::train(tiny_cnn(), train, test, cfg);
  REQUIRE(flat_params(r.model) == flat_params(r2.model));
}

TEST_CASE("fine_tune copies weights and leaves the source untouched") {
  auto train = classify::load_dataset(tiny_corpus().string(), "train");
  auto test = classify::load_dataset(tiny_corpus().string(), "test");
  classify::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.seed = 3;
  auto base = classify::train(tiny_cnn(), train, test, cfg);
  auto before = flat_params(base.model);

  classify::TrainConfig ft_cfg = cfg;
  ft_cfg.epochs = 0;
  ft_cfg.stage_id = "stage1";
  auto same = classify::fine_tune(base.model, train, test, ft_cfg);
  REQUIRE(same.history.empty());
  REQUIRE(same.model.net.get() != base.model.net.get());
  REQUIRE(flat_params(same.model) == before);
  REQUIRE(same.model.lineage ==
          std::vector<std::string>{"base", "stage1"});
  REQUIRE(same.model.norm_mean == base.model.norm_mean);

  ft_cfg.epochs = 1;
  auto moved = classify::fine_tune(base.model, train, test, ft_cfg);
  REQUIRE(flat_params(moved.model) != before);
  REQUIRE(flat_params(base.model) == before);  // source model untouched

  classify::Model hog;
  hog.kind = "hog_linear";
  REQUIRE_THROWS_AS(classify::fine_tune(hog, train, test, ft_cfg), Error);
}

TEST_CASE("the linear baseline trains above chance") {
  auto train = classify::load_dataset(tiny_corpus().string(), "train");
  auto test = classify::load_dataset(tiny_corpus().string(), "test");
  classify::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.001;
  cfg.seed = 3;
  auto r = classify::train_linear_baseline(train, test, cfg);
  REQUIRE(r.model.kind == "hog_linear");
  REQUIRE(r.model.lin_w.size() ==
          static_cast<size_t>(r.model.classes) * 1764);
  REQUIRE(r.history.size() == 3);
  REQUIRE(r.history.back().test_accuracy > 0.5);
}

TEST_CASE("cnn model files round trip exactly") {
  auto train = classify::load_dataset(tiny_corpus().string(), "train");
  auto test = classify::load_dataset(tiny_corpus().string(), "test");
  classify::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.seed = 9;
  cfg.stage_id = "unit";
  auto r = classify::train(tiny_cnn(), train, test, cfg);

  auto path = (std::filesystem::temp_directory_path() / "idocr_cls_model.ocrm")
                  .string();
  model_io::save_model(r.model, path);
  auto back = model_io::load_model(path);
  REQUIRE(back.kind == "cnn");
  REQUIRE(back.classes == r.model.classes);
  REQUIRE(back.lineage == r.model.lineage);
  REQUIRE(back.norm_mean == r.model.norm_mean);
  REQUIRE(back.norm_std == r.model.norm_std);
  REQUIRE(flat_params(back) == flat_params(r.model));
  for (int i = 0; i < 5; ++i) {
    auto a = classify::forward(r.model, test.images[i]);
    auto b = classify::forward(back, test.images[i]);
    REQUIRE(a.class_id == b.class_id);
    REQUIRE(a.probs == b.probs);
  }
  std::filesystem::remove(path);
}

TEST_CASE("linear model files round trip exactly") {
  auto train = classify::load_dataset(tiny_corpus().string(), "train");
  auto test = classify::load_dataset(tiny_corpus().string(), "test");
  classify::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.001;
  auto r = classify::train_linear_baseline(train, test, cfg);
  auto path = (std::filesystem::temp_directory_path() / "idocr_cls_lin.ocrm")
                  .string();
  model_io::save_model(r.model, path);
  auto back = model_io::load_model(path);
  REQUIRE(back.kind == "hog_linear");
  REQUIRE(back.lin_w == r.model.lin_w);
  REQUIRE(back.lin_b == r.model.lin_b);
  std::filesystem::remove(path);
}

TEST_CASE("model loading rejects damaged files") {
  auto train = classify::load_dataset(tiny_corpus().string(), "train");
  auto test = classify::load_dataset(tiny_corpus().string(), "test");
  classify::TrainConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 16;
  auto r = classify::train(tiny_cnn(), train, test, cfg);
  auto dir = std::filesystem::temp_directory_path();
  auto good = (dir / "idocr_cls_good.ocrm").string();
  model_io::save_model(r.model, good);

  std::ifstream is(good, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(is)),
                    std::istreambuf_iterator<char>());
  is.close();

  auto write_variant = [&](const std::string& name, const std::string& body) {
    auto p = (dir / name).string();
    std::ofstream os(p, std::ios::binary);
    os.write(body.data(), static_cast<std::streamsize>(body.size()));
    return p;
  };

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  REQUIRE_THROWS_WITH(
      model_io::load_model(write_variant("idocr_cls_m.ocrm", bad_magic)),
      Catch::Matchers::ContainsSubstring("not a model file"));

  auto bad_version = bytes;
  bad_version[4] = 9;
  REQUIRE_THROWS_WITH(
      model_io::load_model(write_variant("idocr_cls_v.ocrm", bad_version)),
      Catch::Matchers::ContainsSubstring("unsupported model version"));

  auto truncated = bytes.substr(0, bytes.size() / 2);
  REQUIRE_THROWS_AS(
      model_io::load_model(write_variant("idocr_cls_t.ocrm", truncated)),
      Error);

  REQUIRE_THROWS_AS(model_io::load_model((dir / "idocr_absent.ocrm").string()),
                    Error);

  for (auto n : {"idocr_cls_good.ocrm", "idocr_cls_m.ocrm", "idocr_cls_v.ocrm",
                 "idocr_cls_t.ocrm"})
    std::filesystem::remove(dir / n);
}
