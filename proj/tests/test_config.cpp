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
// File: tests/test_config.cpp
// Purpose: layered configuration: defaults, TOML files, environment
//          overrides, validation, resolved snapshots

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "idocr/config.hpp"

using namespace idocr;
using Catch::Approx;

namespace {

// every IDOCR_* variable a test might set; cleared around each case
const char* kEnvVars[] = {
    "IDOCR_SEED",          "IDOCR_THREADS",
    "IDOCR_TRAIN_SPEC",    "IDOCR_TRAIN_EPOCHS",
    "IDOCR_TRAIN_DECAY_AT", "IDOCR_GEN_SOURCE_BG_MIN",
    "IDOCR_GEN_PSEUDO_REAL_INK_MAX", "IDOCR_BOOTSTRAP_QUOTA",
};

struct CleanEnv {
  CleanEnv() { clear(); }
  ~CleanEnv() { clear(); }
  static void clear() {
    for (const char* v : kEnvVars) unsetenv(v);
  }
};

std::string write_temp_toml(const std::string& name,
                            const std::string& body) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream f(path, std::ios::trunc);
  f << body;
  return path.string();
}

}  // namespace

TEST_CASE("defaults stand when no file or environment is given") {
  CleanEnv guard;
  auto cfg = config::load_config();
  REQUIRE(cfg.seed == 1);
  REQUIRE(cfg.threads == 0);
  REQUIRE(cfg.model_spec == "cifarnet-like");
  REQUIRE(cfg.n_stages == 4);
  REQUIRE(cfg.quota == 2000);
  REQUIRE(cfg.eval_fraction == Approx(0.2));
  REQUIRE(cfg.gen_source.pool == "source");
  REQUIRE(cfg.gen_pseudo_real.pool == "pseudo_real");
  REQUIRE(cfg.gen_pseudo_real.bg_min == 120);
  REQUIRE(cfg.seg.binarize_window == 25);
  REQUIRE(cfg.seg.binarize_offset == 10);
  REQUIRE(cfg.seg.gap_factor == Approx(2.5));
  REQUIRE(cfg.train.decay_at == std::vector<double>{0.5, 0.75});
}

TEST_CASE("a toml file overlays the defaults") {
  CleanEnv guard;
  auto path = write_temp_toml("idocr_cfg_a.toml",
                              "seed = 42\n"
                              "[train]\n"
                              "spec = \"lenet-like\"\n"
                              "epochs = 3\n"
                              "decay_at = [0.3, 0.6, 0.9]\n"
                              "[gen.source]\n"
                              "bg_min = 150\n"
                              "[bootstrap]\n"
                              "quota = 123\n");
  auto cfg = config::load_config(path);
  REQUIRE(cfg.seed == 42);
  REQUIRE(cfg.model_spec == "lenet-like");
  REQUIRE(cfg.train.epochs == 3);
  REQUIRE(cfg.train.decay_at == std::vector<double>{0.3, 0.6, 0.9});
  REQUIRE(cfg.gen_source.bg_min == 150);
  REQUIRE(cfg.gen_pseudo_real.bg_min == 120);  // untouched section
  REQUIRE(cfg.quota == 123);
  // the rest keeps its defaults
  REQUIRE(cfg.train.batch_size == 64);
  std::filesystem::remove(path);
}

TEST_CASE("unknown keys and wrong types fail loudly") {
  CleanEnv guard;
  auto typo = write_temp_toml("idocr_cfg_typo.toml", "sead = 42\n");
  REQUIRE_THROWS_WITH(config::load_config(typo),
                      Catch::Matchers::ContainsSubstring("unknown key"));
  auto wrong = write_temp_toml("idocr_cfg_wrong.toml", "seed = \"42\"\n");
  REQUIRE_THROWS_WITH(config::load_config(wrong),
                      Catch::Matchers::ContainsSubstring("must be an integer"));
  std::filesystem::remove(typo);
  std::filesystem::remove(wrong);
}

TEST_CASE("environment variables beat the file") {
  CleanEnv guard;
  auto path = write_temp_toml("idocr_cfg_env.toml",
                              "seed = 42\n[bootstrap]\nquota = 50\n");
  setenv("IDOCR_SEED", "99", 1);
  setenv("IDOCR_TRAIN_SPEC", "hog-linear", 1);
  setenv("IDOCR_GEN_SOURCE_BG_MIN", "160", 1);
  setenv("IDOCR_TRAIN_DECAY_AT", "0.25,0.5", 1);
  auto cfg = config::load_config(path);
  REQUIRE(cfg.seed == 99);
  REQUIRE(cfg.quota == 50);  // file value, no env override
  REQUIRE(cfg.model_spec == "hog-linear");
  REQUIRE(cfg.gen_source.bg_min == 160);
  REQUIRE(cfg.train.decay_at == std::vector<double>{0.25, 0.5});
  CleanEnv::clear();

  setenv("IDOCR_SEED", "not-a-number", 1);
  REQUIRE_THROWS_WITH(config::load_config(),
                      Catch::Matchers::ContainsSubstring("bad integer"));
  std::filesystem::remove(path);
}

TEST_CASE("environment names derive from the dotted keys") {
  REQUIRE(config::detail::env_name("seed") == "IDOCR_SEED");
  REQUIRE(config::detail::env_name("gen.pseudo_real.bg_min") ==
          "IDOCR_GEN_PSEUDO_REAL_BG_MIN");
  REQUIRE(config::detail::env_name("train.decay_factor") ==
          "IDOCR_TRAIN_DECAY_FACTOR");
}

TEST_CASE("validation reports every problem at once") {
  CleanEnv guard;
  auto cfg = config::load_config();
  cfg.fonts_path = IDOCR_SOURCE_DIR "/fonts/fonts.toml";
  REQUIRE_NOTHROW(config::validate_config(cfg));

  cfg.threads = -2;
  cfg.quota = 0;
  cfg.model_spec = "resnet";
  cfg.rules_path = "/definitely/missing/rules.toml";
  try {
    config::validate_config(cfg);
    FAIL("expected validation to throw");
  } catch (const Error& e) {
    std::string msg = e.what();
    REQUIRE(msg.find("threads must be >= 0") != std::string::npos);
    REQUIRE(msg.find("bootstrap.quota") != std::string::npos);
    REQUIRE(msg.find("train.spec must be") != std::string::npos);
    REQUIRE(msg.find("rules file not found") != std::string::npos);
  }

  auto bad_gen = config::load_config();
  bad_gen.fonts_path = IDOCR_SOURCE_DIR "/fonts/fonts.toml";
  bad_gen.gen_pseudo_real.bg_min = 300;
  bad_gen.gen_pseudo_real.bg_max = 100;
  REQUIRE_THROWS_WITH(config::validate_config(bad_gen),
                      Catch::Matchers::ContainsSubstring("pseudo_real"));
}

TEST_CASE("the resolved snapshot loads back to the same config") {
  CleanEnv guard;
  auto cfg = config::load_config();
  cfg.seed = 7;
  cfg.quota = 99;
  cfg.train.decay_at = {0.4, 0.8};
  cfg.gen_source.size_min = 30.5;

  auto dir = std::filesystem::temp_directory_path() / "idocr_cfg_resolved";
  std::filesystem::remove_all(dir);
  config::write_resolved(cfg, dir.string());
  auto snapshot = dir / "resolved_config.toml";
  REQUIRE(std::filesystem::exists(snapshot));

  auto back = config::load_config(snapshot.string());
  REQUIRE(back.seed == 7);
  REQUIRE(back.quota == 99);
  REQUIRE(back.train.decay_at == std::vector<double>{0.4, 0.8});
  REQUIRE(back.gen_source.size_min == Approx(30.5));
  REQUIRE(back.model_spec == cfg.model_spec);
  REQUIRE(back.seg.gap_factor == Approx(cfg.seg.gap_factor));
  // writing the reloaded config again reproduces the same bytes
  REQUIRE(config::resolved_toml(back) == config::resolved_toml(cfg));
  std::filesystem::remove_all(dir);
}

TEST_CASE("the shipped default config matches the built-in defaults") {
  CleanEnv guard;
  auto from_file =
      config::load_config(IDOCR_SOURCE_DIR "/configs/default.toml");
  auto builtin = config::load_config();
  builtin.fonts_path = from_file.fonts_path;  // path key is site specific
  builtin.rules_path = from_file.rules_path;
  REQUIRE(config::resolved_toml(from_file) == config::resolved_toml(builtin));
}
