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
// File: include/idocr/bootstrap.hpp
// Purpose: iterative self-labeling: mine field patches, augment, merge
//          with shrinking synthetic share, fine-tune, repeat
//
// Mining is deliberately model-free: a field contributes patches only when
// segmentation yields exactly as many characters as the ground-truth text
// (spaces excluded), and labels are assigned by position from that text, so
// every accepted patch is correctly labeled by construction. The model
// argument is kept for the charset compatibility check. Stage accuracy is
// tracked on a frozen character set mined from held-out fields at run
// start, so numbers stay comparable across stages.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idocr/charset.hpp"
#include "idocr/classify.hpp"
#include "idocr/common.hpp"
#include "idocr/image_io.hpp"
#include "idocr/imaging.hpp"
#include "idocr/model_io.hpp"
#include "idocr/rng.hpp"
#include "idocr/segment.hpp"
#include "idocr/synthgen.hpp"
#include "idocr/utf8.hpp"

namespace idocr::bootstrap {

struct AugmentSpec {
  double rotation_deg = 3.0;
  double translate_px = 3.0;
  double scale_lo = 0.9, scale_hi = 1.1;
  double gain_lo = 0.8, gain_hi = 1.2;
  double bias = 20.0;

  static AugmentSpec identity() {
    AugmentSpec s;
    s.rotation_deg = 0;
    s.translate_px = 0;
    s.scale_lo = s.scale_hi = 1.0;
    s.gain_lo = s.gain_hi = 1.0;
    s.bias = 0;
    return s;
  }
};

// Draw order is fixed: rotation, dx, dy, scale, gain, bias. With the
// identity spec every draw collapses to its neutral value and the output
// equals the input exactly.
inline GrayImage augment_one(const GrayImage& img, const AugmentSpec& spec,
                             u64 seed) {
  Rng rng(seed);
  double rot = rng.range_f(-spec.rotation_deg, spec.rotation_deg);
  double dx = rng.range_f(-spec.translate_px, spec.translate_px);
  double dy = rng.range_f(-spec.translate_px, spec.translate_px);
  double scale = rng.range_f(spec.scale_lo, spec.scale_hi);
  double gain = rng.range_f(spec.gain_lo, spec.gain_hi);
  double bias = rng.range_f(-spec.bias, spec.bias);
  double cx = img.width / 2.0, cy = img.height / 2.0;
  auto warp = AffineTransform::translation(dx, dy)
                  .then(AffineTransform::rotation_about(rot, cx, cy))
                  .then(AffineTransform::scale_about(scale, cx, cy));
  GrayImage out = imaging::warp_affine(img, warp, imaging::border_median(img));
  for (u8& v : out.data) {
    double g = gain * v + bias;
    v = static_cast<u8>(std::clamp<long>(std::lround(g), 0, 255));
  }
  return out;
}

inline std::vector<synthgen::CharSample> augment(
    const std::vector<synthgen::CharSample>& in, const AugmentSpec& spec,
    u64 seed) {
  if (in.empty()) throw Error("no samples to augment");
  std::vector<synthgen::CharSample> out(in.size());
  parallel_for(static_cast<i64>(in.size()), [&](i64 b, i64 e) {
    for (i64 i = b; i < e; ++i) {
      u64 s = derive_seed(seed, "aug/" + std::to_string(i));
      out[i].image = augment_one(in[i].image, spec, s);
      out[i].label = in[i].label;
      out[i].provenance = synthgen::Provenance::augmented;
      out[i].seed = s;
    }
  });
  return out;
}

struct SkippedField {
  int index = 0;
  std::string reason;
};

struct MineResult {
  std::vector<synthgen::CharSample> samples;
  std::vector<SkippedField> skipped;
  std::vector<i64> per_class = std::vector<i64>(charset::kNumClasses, 0);
};

// Extracts labeled patches from every field whose segmentation count
// matches its ground truth. Per-field failures are logged, never fatal.
// `subset` restricts mining to those record indices (in the given order).
inline MineResult mine_patches(const classify::Model& model,
                               const std::string& corpus_root,
                               const segment::SegmentParams& seg_params = {},
                               const std::vector<int>* subset = nullptr) {
  if (model.charset_hash != charset::charset_hash())
    throw Error("model charset hash mismatch");
  auto records = synthgen::load_field_corpus(corpus_root);
  std::vector<int> indices;
  if (subset != nullptr) {
    for (int i : *subset) {
      if (i < 0 || static_cast<size_t>(i) >= records.size())
        throw Error("field index out of range");
      indices.push_back(i);
    }
  } else {
    for (size_t i = 0; i < records.size(); ++i)
      indices.push_back(static_cast<int>(i));
  }

  struct FieldOut {
    std::vector<synthgen::CharSample> samples;
    std::optional<SkippedField> skipped;
  };
  std::vector<FieldOut> per_field(indices.size());
  auto root = std::filesystem::path(corpus_root);
  parallel_for(static_cast<i64>(indices.size()), [&](i64 b, i64 e) {
    for (i64 i = b; i < e; ++i) {
      const auto& rec = records[indices[i]];
      FieldOut& fo = per_field[i];
      try {
        GrayImage field = read_png((root / rec.path).string());
        auto seg = segment::segment_field(field, seg_params);
        std::vector<const segment::CharPatch*> patches;
        for (const auto& line : seg.lines)
          for (const auto& str : line.strings)
            for (const auto& ch : str.chars) patches.push_back(&ch);
        std::vector<u32> truth;
        for (u32 cp : utf8_decode(rec.text))
          if (cp != ' ') truth.push_back(cp);
        if (patches.size() != truth.size()) {
          fo.skipped = SkippedField{indices[i], "count mismatch"};
          continue;
        }
        std::vector<int> labels;
        bool ok = true;
        for (u32 cp : truth) {
          int cls = charset::find_class(cp);
          if (cls < 0) {
            fo.skipped = SkippedField{indices[i], "symbol not in charset"};
            ok = false;
            break;
          }
          labels.push_back(cls);
        }
        if (!ok) continue;
        for (size_t p = 0; p < patches.size(); ++p) {
          synthgen::CharSample s;
          s.image = patches[p]->patch;
          s.label = labels[p];
          s.provenance = synthgen::Provenance::mined;
          s.seed = rec.seed;
          fo.samples.push_back(std::move(s));
        }
      } catch (const std::exception& ex) {
        fo.skipped = SkippedField{indices[i], ex.what()};
      }
    }
  });

  MineResult out;
  for (auto& fo : per_field) {
    if (fo.skipped) out.skipped.push_back(*fo.skipped);
    for (auto& s : fo.samples) {
      ++out.per_class[s.label];
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

// Share of synthetic samples at stage k: halves from 0.5 and never drops
// below 0.05, so every stage keeps a synthetic guard share.
inline double share_for_stage(int stage) {
  if (stage < 0) throw Error("stage must be >= 0");
  return std::max(0.5 * std::pow(0.5, stage), 0.05);
}

struct StageConfig {
  int stage = 0;
  int quota = 2000;
  double synthetic_share = 0.5;
  double train_fraction = 0.9;
  AugmentSpec augment_spec;
  classify::TrainConfig train;
};

struct StageDataset {
  classify::Dataset train, test;
  i64 real_count = 0, augmented_count = 0, synthetic_count = 0;
  nlohmann::json manifest = nlohmann::json::array();
};

// Per class: quota items, synthetic_share of them freshly generated, the
// rest mined samples topped up by augmented copies. A class with nothing
// mined is filled entirely synthetically. Then a class-wise 90/10 split.
inline StageDataset build_stage_dataset(
    const std::vector<synthgen::CharSample>& mined, const StageConfig& cfg,
    const synthgen::FontLibrary& fonts, const synthgen::GenParams& gen,
    u64 seed) {
  if (cfg.quota < 1) throw Error("quota must be positive");
  if (cfg.synthetic_share < 0 || cfg.synthetic_share > 1)
    throw Error("synthetic share must be in [0,1]");
  const auto& pool = fonts.pool(gen.pool);
  std::vector<std::vector<const synthgen::CharSample*>> by_class(
      charset::kNumClasses);
  for (const auto& s : mined) by_class[s.label].push_back(&s);

  StageDataset out;
  for (int cls = 0; cls < charset::kNumClasses; ++cls) {
    const auto& avail = by_class[cls];
    int n_synth = static_cast<int>(
        std::lround(cfg.quota * cfg.synthetic_share));
    int n_real_target = cfg.quota - n_synth;
    int kept = std::min<int>(static_cast<int>(avail.size()), n_real_target);
    if (kept == 0) {
      n_synth = cfg.quota;
      n_real_target = 0;
    }
    int n_aug = n_real_target - kept;

    struct Item {
      GrayImage image;
      synthgen::Provenance prov;
      u64 seed;
      int source = -1;  // index into avail for mined/augmented
    };
    std::vector<Item> items;
    items.reserve(cfg.quota);
    // mined subset: deterministic pick of the first `kept` after a seeded
    // shuffle, so oversupply does not bias toward corpus order
    std::vector<int> pick(avail.size());
    for (size_t i = 0; i < pick.size(); ++i) pick[i] = static_cast<int>(i);
    Rng pick_rng(derive_seed(seed, "pick/" + std::to_string(cls)));
    pick_rng.shuffle(pick);
    for (int i = 0; i < kept; ++i)
      items.push_back(
          {avail[pick[i]]->image, synthgen::Provenance::mined,
           avail[pick[i]]->seed, pick[i]});
    for (int i = 0; i < n_aug; ++i) {
      int src = pick[i % kept];
      u64 s = derive_seed(seed, "aug/" + std::to_string(cls) + "/" +
                                    std::to_string(i));
      items.push_back({augment_one(avail[src]->image, cfg.augment_spec, s),
                       synthgen::Provenance::augmented, s, src});
    }
    for (int i = 0; i < n_synth; ++i) {
      u64 s = derive_seed(seed, "synth/" + std::to_string(cls) + "/" +
                                    std::to_string(i));
      items.push_back({synthgen::render_char_sample(cls, pool, gen, s).image,
                       synthgen::Provenance::synthetic, s, -1});
    }

    std::vector<int> order(items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng split_rng(derive_seed(seed, "split/" + std::to_string(cls)));
    split_rng.shuffle(order);
    int n_train = static_cast<int>(
        std::lround(cfg.train_fraction * static_cast<double>(items.size())));
    for (size_t i = 0; i < order.size(); ++i) {
      Item& it = items[order[i]];
      bool is_train = static_cast<int>(i) < n_train;
      auto& ds = is_train ? out.train : out.test;
      switch (it.prov) {
        case synthgen::Provenance::mined: ++out.real_count; break;
        case synthgen::Provenance::augmented: ++out.augmented_count; break;
        case synthgen::Provenance::synthetic: ++out.synthetic_count; break;
      }
      nlohmann::json row{
          {"class", cls},
          {"provenance", synthgen::provenance_name(it.prov)},
          {"split", is_train ? "train" : "test"},
          {"seed", it.seed},
      };
      if (it.source >= 0) row["source"] = it.source;
      out.manifest.push_back(std::move(row));
      ds.push(std::move(it.image), cls);
    }
  }
  return out;
}

struct StageReport {
  int stage = 0;
  i64 mined_count = 0;
  std::vector<i64> per_class_mined;
  i64 real_count = 0, augmented_count = 0, synthetic_count = 0;
  double synthetic_fraction = 0;
  double test_accuracy = 0;
  double pseudo_real_accuracy = 0;
  i64 skipped_fields = 0;
  std::map<std::string, int> skip_reasons;

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"stage", stage},
        {"mined_count", mined_count},
        {"per_class_mined", per_class_mined},
        {"real_count", real_count},
        {"augmented_count", augmented_count},
        {"synthetic_count", synthetic_count},
        {"synthetic_fraction", synthetic_fraction},
        {"test_accuracy", test_accuracy},
        {"pseudo_real_accuracy", pseudo_real_accuracy},
        {"skipped_fields", skipped_fields},
        {"skip_reasons", skip_reasons},
    };
  }

  static StageReport from_json(const nlohmann::json& j) {
    StageReport r;
    r.stage = j.at("stage").get<int>();
    r.mined_count = j.at("mined_count").get<i64>();
    r.per_class_mined = j.at("per_class_mined").get<std::vector<i64>>();
    r.real_count = j.at("real_count").get<i64>();
    r.augmented_count = j.at("augmented_count").get<i64>();
    r.synthetic_count = j.at("synthetic_count").get<i64>();
    r.synthetic_fraction = j.at("synthetic_fraction").get<double>();
    r.test_accuracy = j.at("test_accuracy").get<double>();
    r.pseudo_real_accuracy = j.at("pseudo_real_accuracy").get<double>();
    r.skipped_fields = j.at("skipped_fields").get<i64>();
    r.skip_reasons =
        j.at("skip_reasons").get<std::map<std::string, int>>();
    return r;
  }
};

struct RunParams {
  std::string corpus_root;
  std::string out_dir;
  int n_stages = 4;
  int quota = 2000;
  double eval_fraction = 0.2;
  u64 seed = 1;
  segment::SegmentParams seg;
  synthgen::GenParams gen = synthgen::GenParams::source_defaults();
  classify::TrainConfig train;  // per-stage fine-tune template
  AugmentSpec augment_spec;
};

struct RunSummary {
  double initial_pseudo_real_accuracy = 0;
  i64 frozen_test_chars = 0;
  std::vector<StageReport> stages;

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : stages) arr.push_back(s.to_json());
    return nlohmann::json{
        {"initial_pseudo_real_accuracy", initial_pseudo_real_accuracy},
        {"frozen_test_chars", frozen_test_chars},
        {"stages", arr},
    };
  }
};

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write: " + path);
  f << text;
  if (!f) throw Error("write failed: " + path);
}

// Deterministic field split: eval_fraction of record indices go to the
// frozen evaluation pool, the rest are the mining pool.
inline void split_fields(size_t n_fields, double eval_fraction, u64 seed,
                         std::vector<int>& eval_set,
                         std::vector<int>& mine_set) {
  std::vector<int> order(n_fields);
  for (size_t i = 0; i < n_fields; ++i) order[i] = static_cast<int>(i);
  Rng rng(derive_seed(seed, "eval-split"));
  rng.shuffle(order);
  size_t n_eval = static_cast<size_t>(
      std::lround(eval_fraction * static_cast<double>(n_fields)));
  eval_set.assign(order.begin(), order.begin() + n_eval);
  mine_set.assign(order.begin() + n_eval, order.end());
  std::sort(eval_set.begin(), eval_set.end());
  std::sort(mine_set.begin(), mine_set.end());
}

}  // namespace detail

struct RunResult {
  RunSummary summary;
  classify::Model final_model;
};

// The full loop. Completed stages (model.ocrm + report.json present) are
// loaded instead of recomputed, so an interrupted run resumes bit-exact:
// every stage input is a pure function of corpus, master seed and the
// previous stage's persisted model.
inline RunResult run_bootstrap(const classify::Model& initial,
                               const synthgen::FontLibrary& fonts,
                               const RunParams& params) {
  if (params.n_stages < 1) throw Error("n_stages must be >= 1");
  if (params.eval_fraction <= 0 || params.eval_fraction >= 1)
    throw Error("eval fraction must be in (0,1)");
  auto out_root = std::filesystem::path(params.out_dir);
  std::filesystem::create_directories(out_root);

  auto records = synthgen::load_field_corpus(params.corpus_root);
  if (records.empty()) throw Error("field corpus is empty");
  std::vector<int> eval_set, mine_set;
  detail::split_fields(records.size(), params.eval_fraction, params.seed,
                       eval_set, mine_set);
  if (eval_set.empty() || mine_set.empty())
    throw Error("field corpus too small for the eval split");

  // frozen character test set, mined once from held-out fields
  auto frozen_mine =
      mine_patches(initial, params.corpus_root, params.seg, &eval_set);
  classify::Dataset frozen;
  for (auto& s : frozen_mine.samples) frozen.push(std::move(s.image), s.label);
  if (frozen.size() == 0)
    throw Error("no characters mined for the frozen test set");

  RunResult result;
  result.summary.frozen_test_chars = static_cast<i64>(frozen.size());
  result.summary.initial_pseudo_real_accuracy =
      classify::evaluate(initial, frozen);
  result.final_model = initial;

  for (int k = 0; k < params.n_stages; ++k) {
    auto stage_dir = out_root / ("stage-" + std::to_string(k));
    auto model_path = stage_dir / "model.ocrm";
    auto report_path = stage_dir / "report.json";
    if (std::filesystem::exists(model_path) &&
        std::filesystem::exists(report_path)) {
      std::ifstream f(report_path);
      nlohmann::json j = nlohmann::json::parse(f);
      result.summary.stages.push_back(StageReport::from_json(j));
      result.final_model = model_io::load_model(model_path.string());
      continue;
    }
    std::filesystem::create_directories(stage_dir);
    u64 stage_seed = derive_seed(params.seed, "stage/" + std::to_string(k));

    auto mined = mine_patches(result.final_model, params.corpus_root,
                              params.seg, &mine_set);

    StageConfig cfg;
    cfg.stage = k;
    cfg.quota = params.quota;
    cfg.synthetic_share = share_for_stage(k);
    cfg.augment_spec = params.augment_spec;
    cfg.train = params.train;
    cfg.train.seed = derive_seed(stage_seed, "train");
    cfg.train.stage_id = "stage-" + std::to_string(k);
    auto ds = build_stage_dataset(mined.samples, cfg, fonts, params.gen,
                                  derive_seed(stage_seed, "data"));

    auto tuned = classify::fine_tune(result.final_model, ds.train, ds.test,
                                     cfg.train);

    StageReport rep;
    rep.stage = k;
    rep.mined_count = static_cast<i64>(mined.samples.size());
    rep.per_class_mined = mined.per_class;
    rep.real_count = ds.real_count;
    rep.augmented_count = ds.augmented_count;
    rep.synthetic_count = ds.synthetic_count;
    i64 total = ds.real_count + ds.augmented_count + ds.synthetic_count;
    rep.synthetic_fraction =
        total ? static_cast<double>(ds.synthetic_count) / total : 0.0;
    rep.test_accuracy = classify::evaluate(tuned.model, ds.test);
    rep.pseudo_real_accuracy = classify::evaluate(tuned.model, frozen);
    rep.skipped_fields = static_cast<i64>(mined.skipped.size());
    for (const auto& s : mined.skipped) rep.skip_reasons[s.reason]++;

    std::string lines;
    for (const auto& row : ds.manifest) lines += row.dump() + "\n";
    detail::write_text((stage_dir / "dataset.jsonl").string(), lines);
    model_io::save_model(tuned.model, model_path.string());
    detail::write_text(report_path.string(), rep.to_json().dump(2) + "\n");

    result.summary.stages.push_back(std::move(rep));
    result.final_model = std::move(tuned.model);
    detail::write_text((out_root / "summary.json").string(),
                       result.summary.to_json().dump(2) + "\n");
  }
  detail::write_text((out_root / "summary.json").string(),
                     result.summary.to_json().dump(2) + "\n");
  return result;
}

}  // namespace idocr::bootstrap
