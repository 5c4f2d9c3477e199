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
// File: include/idocr/classify.hpp
// Purpose: character classifier: CNN training/fine-tuning, HOG baseline
//
// Two classifier kinds share the Model type: "cnn" wraps a Net<float>,
// "hog_linear" is a one-vs-rest hinge classifier over HOG features. Input
// normalization (x/255, then a fixed mean/std computed on the model's first
// training set) travels with the model so inference matches training.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "idocr/charset.hpp"
#include "idocr/common.hpp"
#include "idocr/image.hpp"
#include "idocr/image_io.hpp"
#include "idocr/nn.hpp"
#include "idocr/rng.hpp"
#include "idocr/synthgen.hpp"
#include "idocr/tensor.hpp"

namespace idocr::classify {

constexpr int kPatchSide = 64;
constexpr int kPatchPixels = kPatchSide * kPatchSide;

struct Dataset {
  std::vector<GrayImage> images;
  std::vector<int> labels;

  size_t size() const { return images.size(); }
  void push(GrayImage img, int label) {
    images.push_back(std::move(img));
    labels.push_back(label);
  }
};

inline Dataset load_dataset(const std::string& corpus_root,
                            const std::string& split) {
  Dataset ds;
  auto root = std::filesystem::path(corpus_root);
  const std::string prefix = split + "/";
  for (const auto& rec : synthgen::load_corpus_manifest(corpus_root)) {
    if (rec.path.rfind(prefix, 0) != 0) continue;
    GrayImage img = read_png((root / rec.path).string());
    if (img.width != kPatchSide || img.height != kPatchSide)
      throw Error("sample is not 64x64: " + rec.path);
    ds.push(std::move(img), rec.cls);
  }
  if (ds.size() == 0)
    throw Error("no samples for split '" + split + "' in " + corpus_root);
  return ds;
}

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<double> decay_at = {0.5, 0.75};  // fractions of total epochs
  double decay_factor = 0.1;
  u64 seed = 1;
  bool fine_tune = false;
  std::string stage_id = "base";
};

inline void validate_config(const TrainConfig& c, size_t train_size) {
  if (c.epochs < 0) throw Error("epochs must be >= 0");
  if (c.batch_size < 1) throw Error("batch size must be positive");
  if (static_cast<size_t>(c.batch_size) > train_size)
    throw Error("batch size exceeds dataset size");
  if (c.learning_rate <= 0 || c.momentum < 0 || c.weight_decay < 0 ||
      c.decay_factor <= 0)
    throw Error("train config values must be positive");
}

struct EpochStats {
  double train_loss = 0;
  double test_accuracy = 0;
};

struct Model {
  std::string kind = "cnn";  // "cnn" or "hog_linear"
  nn::ModelSpec spec;        // cnn only
  std::shared_ptr<nn::Net<float>> net;  // cnn only
  std::vector<float> lin_w;  // hog_linear: [classes x feature_dim]
  std::vector<float> lin_b;  // hog_linear: [classes]
  int classes = charset::kNumClasses;
  u64 charset_hash = charset::charset_hash();
  double norm_mean = 0.0;
  double norm_std = 1.0;
  std::vector<std::string> lineage;
};

struct Prediction {
  int class_id = 0;
  std::vector<float> probs;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
};

namespace detail {

// Mean and std of x/255 over every pixel of the set.
inline void norm_stats(const Dataset& ds, double& mean, double& std_out) {
  double sum = 0, sumsq = 0;
  i64 n = 0;
  for (const auto& img : ds.images) {
    for (u8 p : img.data) {
      double v = p / 255.0;
      sum += v;
      sumsq += v * v;
    }
    n += img.data.size();
  }
  mean = n ? sum / n : 0.0;
  double var = n ? sumsq / n - mean * mean : 1.0;
  std_out = std::sqrt(std::max(var, 1e-8));
}

inline void fill_batch(const Dataset& ds, const std::vector<int>& order,
                       size_t from, size_t to, double mean, double stddev,
                       Tensor<float>& x, std::vector<int>& labels) {
  int n = static_cast<int>(to - from);
  x.resize({n, kPatchPixels});
  labels.resize(n);
  float m = static_cast<float>(mean);
  float inv = static_cast<float>(1.0 / stddev);
  for (int s = 0; s < n; ++s) {
    int idx = order[from + s];
    const auto& img = ds.images[idx];
    float* row = x.ptr() + static_cast<i64>(s) * kPatchPixels;
    for (int i = 0; i < kPatchPixels; ++i)
      row[i] = (img.data[i] / 255.0f - m) * inv;
    labels[s] = ds.labels[idx];
  }
}

inline int argmax_lowest(const float* v, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace detail

inline std::vector<float> hog_features(const GrayImage& patch);

// Softmax probabilities and argmax (ties: lowest class id) over one patch.
inline Prediction forward(const Model& model, const GrayImage& patch) {
  if (patch.width != kPatchSide || patch.height != kPatchSide)
    throw Error("patch must be 64x64");
  std::vector<float> scores(model.classes, 0.0f);
  if (model.kind == "cnn") {
    Tensor<float> x({1, kPatchPixels});
    float m = static_cast<float>(model.norm_mean);
    float inv = static_cast<float>(1.0 / model.norm_std);
    for (int i = 0; i < kPatchPixels; ++i)
      x.data[i] = (patch.data[i] / 255.0f - m) * inv;
    auto logits = model.net->forward(x, false);
    std::copy(logits.data.begin(), logits.data.end(), scores.begin());
  } else if (model.kind == "hog_linear") {
    auto f = hog_features(patch);
    int d = static_cast<int>(f.size());
    for (int c = 0; c < model.classes; ++c) {
      float acc = model.lin_b[c];
      const float* w = model.lin_w.data() + static_cast<i64>(c) * d;
      for (int i = 0; i < d; ++i) acc += w[i] * f[i];
      scores[c] = acc;
    }
  } else {
    throw Error("unknown model kind: " + model.kind);
  }
  Prediction p;
  p.class_id = detail::argmax_lowest(scores.data(), model.classes);
  // softmax via log-sum-exp; for the linear model this is a monotone
  // squashing of margins, preserving the argmax
  float mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0;
  for (float s : scores) sum += std::exp(static_cast<double>(s - mx));
  p.probs.resize(model.classes);
  for (int i = 0; i < model.classes; ++i)
    p.probs[i] = static_cast<float>(std::exp(scores[i] - mx) / sum);
  return p;
}

inline double evaluate(const Model& model, const Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  i64 correct = 0;
  if (model.kind == "cnn") {
    std::vector<int> order(ds.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    const size_t kChunk = 256;
    Tensor<float> x;
    std::vector<int> labels;
    for (size_t from = 0; from < ds.size(); from += kChunk) {
      size_t to = std::min(ds.size(), from + kChunk);
      detail::fill_batch(ds, order, from, to, model.norm_mean, model.norm_std,
                         x, labels);
      auto logits = model.net->forward(x, false);
      int n = logits.shape[0], k = logits.shape[1];
      for (int s = 0; s < n; ++s)
        correct += detail::argmax_lowest(
                       logits.ptr() + static_cast<i64>(s) * k, k) == labels[s];
    }
  } else {
    for (size_t i = 0; i < ds.size(); ++i)
      correct += forward(model, ds.images[i]).class_id == ds.labels[i];
  }
  return static_cast<double>(correct) / ds.size();
}

namespace detail {

// Shared epoch loop for train and fine_tune. The model carries its norm
// stats already; weights are updated in place.
inline std::vector<EpochStats> run_epochs(Model& model, const Dataset& train,
                                          const Dataset& test,
                                          const TrainConfig& cfg) {
  auto& net = *model.net;
  double base_lr = cfg.fine_tune ? cfg.learning_rate * 0.1 : cfg.learning_rate;
  std::vector<EpochStats> history;
  std::vector<int> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Tensor<float> x, dlogits;
  std::vector<int> labels;
  for (int e = 0; e < cfg.epochs; ++e) {
    double lr = base_lr;
    for (double frac : cfg.decay_at)
      if (e >= static_cast<int>(cfg.epochs * frac)) lr *= cfg.decay_factor;
    Rng rng(derive_seed(cfg.seed, "epoch/" + std::to_string(e)));
    rng.shuffle(order);
    double loss_sum = 0;
    i64 seen = 0;
    for (size_t from = 0; from < train.size();
         from += static_cast<size_t>(cfg.batch_size)) {
      size_t to = std::min(train.size(),
                           from + static_cast<size_t>(cfg.batch_size));
      fill_batch(train, order, from, to, model.norm_mean, model.norm_std, x,
                 labels);
      net.zero_grads();
      auto logits = net.forward(x, true);
      double loss = nn::softmax_cross_entropy(logits, labels, dlogits);
      if (!std::isfinite(loss))
        throw Error("diverged at epoch " + std::to_string(e));
      net.backward(dlogits);
      net.step(lr, cfg.momentum, cfg.weight_decay);
      loss_sum += loss * static_cast<double>(to - from);
      seen += static_cast<i64>(to - from);
    }
    EpochStats st;
    st.train_loss = seen ? loss_sum / seen : 0.0;
    st.test_accuracy = evaluate(model, test);
    history.push_back(st);
  }
  net.release_caches();
  return history;
}

}  // namespace detail

inline TrainResult train(const nn::ModelSpec& spec, const Dataset& train_set,
                         const Dataset& test_set, const TrainConfig& cfg) {
  if (train_set.size() == 0) throw Error("training set is empty");
  validate_config(cfg, train_set.size());
  nn::validate_spec(spec, charset::kNumClasses);
  TrainResult r;
  r.model.kind = "cnn";
  r.model.spec = spec;
  r.model.net = std::make_shared<nn::Net<float>>(spec);
  r.model.net->init_params(cfg.seed);
  detail::norm_stats(train_set, r.model.norm_mean, r.model.norm_std);
  r.model.lineage = {cfg.stage_id};
  TrainConfig c = cfg;
  c.fine_tune = false;
  r.history = detail::run_epochs(r.model, train_set, test_set, c);
  return r;
}

// Same loop, initialized from the given weights, effective LR x0.1. The
// normalization stats stay those of the model's first training set.
inline TrainResult fine_tune(const Model& model, const Dataset& train_set,
                             const Dataset& test_set, const TrainConfig& cfg) {
  if (model.kind != "cnn") throw Error("fine_tune requires a cnn model");
  if (train_set.size() == 0) throw Error("training set is empty");
  if (model.charset_hash != charset::charset_hash())
    throw Error("model charset hash mismatch");
  validate_config(cfg, train_set.size());
  TrainResult r;
  r.model = model;
  r.model.net = std::make_shared<nn::Net<float>>(*model.net);
  r.model.lineage.push_back(cfg.stage_id);
  TrainConfig c = cfg;
  c.fine_tune = true;
  r.history = detail::run_epochs(r.model, train_set, test_set, c);
  return r;
}

// HOG: 9 unsigned orientation bins, 8x8 cells, 2x2-cell blocks, one-cell
// block stride, zero-safe L2 per block: 7x7 blocks x 36 = 1764 values.
inline std::vector<float> hog_features(const GrayImage& patch) {
  if (patch.width != kPatchSide || patch.height != kPatchSide)
    throw Error("patch must be 64x64");
  constexpr int kCell = 8, kBins = 9, kCells = kPatchSide / kCell;
  constexpr int kBlocks = kCells - 1;
  std::vector<double> cells(kCells * kCells * kBins, 0.0);
  auto px = [&](int x, int y) {
    x = std::clamp(x, 0, kPatchSide - 1);
    y = std::clamp(y, 0, kPatchSide - 1);
    return static_cast<double>(patch.data[y * kPatchSide + x]);
  };
  for (int y = 0; y < kPatchSide; ++y)
    for (int x = 0; x < kPatchSide; ++x) {
      double gx = px(x + 1, y) - px(x - 1, y);
      double gy = px(x, y + 1) - px(x, y - 1);
      double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      double theta = std::atan2(gy, gx) * 180.0 / 3.14159265358979323846;
      if (theta < 0) theta += 180.0;
      if (theta >= 180.0) theta -= 180.0;
      int bin = std::min(kBins - 1, static_cast<int>(theta / 20.0));
      int cx = x / kCell, cy = y / kCell;
      cells[(cy * kCells + cx) * kBins + bin] += mag;
    }
  std::vector<float> out;
  out.reserve(kBlocks * kBlocks * 4 * kBins);
  for (int by = 0; by < kBlocks; ++by)
    for (int bx = 0; bx < kBlocks; ++bx) {
      double normsq = 0;
      for (int cy = 0; cy < 2; ++cy)
        for (int cx = 0; cx < 2; ++cx)
          for (int b = 0; b < kBins; ++b) {
            double v = cells[((by + cy) * kCells + bx + cx) * kBins + b];
            normsq += v * v;
          }
      double inv = normsq > 0 ? 1.0 / std::sqrt(normsq) : 0.0;
      for (int cy = 0; cy < 2; ++cy)
        for (int cx = 0; cx < 2; ++cx)
          for (int b = 0; b < kBins; ++b)
            out.push_back(static_cast<float>(
                cells[((by + cy) * kCells + bx + cx) * kBins + b] * inv));
    }
  return out;
}

// One-vs-rest hinge loss over HOG features, plain SGD, sample at a time.
// Features are computed lazily and kept for later epochs.
inline TrainResult train_linear_baseline(const Dataset& train_set,
                                         const Dataset& test_set,
                                         const TrainConfig& cfg) {
  if (train_set.size() == 0) throw Error("training set is empty");
  validate_config(cfg, train_set.size());
  const int dim = 1764;
  TrainResult r;
  r.model.kind = "hog_linear";
  r.model.lin_w.assign(static_cast<size_t>(r.model.classes) * dim, 0.0f);
  r.model.lin_b.assign(r.model.classes, 0.0f);
  r.model.lineage = {cfg.stage_id};
  // cache features once per sample index on first touch
  std::vector<std::vector<float>> cache(train_set.size());
  std::vector<int> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (int e = 0; e < cfg.epochs; ++e) {
    double lr = cfg.learning_rate;
    for (double frac : cfg.decay_at)
      if (e >= static_cast<int>(cfg.epochs * frac)) lr *= cfg.decay_factor;
    Rng rng(derive_seed(cfg.seed, "epoch/" + std::to_string(e)));
    rng.shuffle(order);
    double loss_sum = 0;
    for (int idx : order) {
      if (cache[idx].empty()) cache[idx] = hog_features(train_set.images[idx]);
      const auto& f = cache[idx];
      int y = train_set.labels[idx];
      double shrink = 1.0 - lr * cfg.weight_decay;
      for (int c = 0; c < r.model.classes; ++c) {
        float* w = r.model.lin_w.data() + static_cast<i64>(c) * dim;
        double s = r.model.lin_b[c];
        for (int i = 0; i < dim; ++i) s += w[i] * f[i];
        double t = c == y ? 1.0 : -1.0;
        double margin = t * s;
        for (int i = 0; i < dim; ++i) w[i] = static_cast<float>(w[i] * shrink);
        if (margin < 1.0) {
          loss_sum += 1.0 - margin;
          float step = static_cast<float>(lr * t);
          for (int i = 0; i < dim; ++i) w[i] += step * f[i];
          r.model.lin_b[c] += step;
        }
      }
    }
    EpochStats st;
    st.train_loss = loss_sum / (static_cast<double>(train_set.size()) *
                                r.model.classes);
    st.test_accuracy = evaluate(r.model, test_set);
    r.history.push_back(st);
  }
  return r;
}

}  // namespace idocr::classify
