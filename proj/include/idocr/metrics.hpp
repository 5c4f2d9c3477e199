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
// File: include/idocr/metrics.hpp
// Purpose: edit distance, field/class accuracy reports, latency benchmark

#pragma once

#include <algorithm>
#include <chrono>
#include <string>
#include <vector>

#include <json.hpp>

#include "idocr/charset.hpp"
#include "idocr/classify.hpp"
#include "idocr/common.hpp"
#include "idocr/utf8.hpp"

namespace idocr::metrics {

// Unit-cost edit distance over codepoints, two-row dynamic program so
// memory stays O(min(|a|, |b|)).
inline int levenshtein(const std::string& a, const std::string& b) {
  std::vector<u32> ca = utf8_decode(a);
  std::vector<u32> cb = utf8_decode(b);
  if (ca.size() < cb.size()) std::swap(ca, cb);
  std::vector<int> prev(cb.size() + 1), cur(cb.size() + 1);
  for (size_t j = 0; j <= cb.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= ca.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= cb.size(); ++j) {
      int sub = prev[j - 1] + (ca[i - 1] != cb[j - 1]);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[cb.size()];
}

struct EvalReport {
  int field_count = 0;
  int correct_count = 0;
  double correct_rate = 0;
  double mean_edit_distance = 0;
  int aligned_field_count = 0;  // fields with matching decoded length
  int skipped_field_count = 0;  // length mismatch, no positional stats
  i64 aligned_chars = 0;
  double char_accuracy = 0;  // confusion trace / total
  double avg_class_accuracy = 0;  // unweighted mean over classes with support
  std::vector<i64> class_support;   // 74
  std::vector<double> class_accuracy;  // 74, 0 where support is 0
  std::vector<i64> confusion;  // 74*74 row-major, row = truth

  nlohmann::json to_json() const {
    nlohmann::json j{
        {"field_count", field_count},
        {"correct_count", correct_count},
        {"correct_rate", correct_rate},
        {"mean_edit_distance", mean_edit_distance},
        {"aligned_field_count", aligned_field_count},
        {"skipped_field_count", skipped_field_count},
        {"aligned_chars", aligned_chars},
        {"char_accuracy", char_accuracy},
        {"avg_class_accuracy", avg_class_accuracy},
        {"class_support", class_support},
        {"class_accuracy", class_accuracy},
    };
    return j;
  }
};

// Field-level scores over all pairs; positional class stats only where the
// decoded lengths match, since alignment is undefined otherwise. Positions
// whose truth or prediction is outside the charset (spaces) are skipped in
// the positional stats but still count toward edit distance.
inline EvalReport evaluate_fields(const std::vector<std::string>& predictions,
                                  const std::vector<std::string>& truths) {
  if (predictions.size() != truths.size())
    throw Error("prediction and truth counts differ");
  EvalReport r;
  int k = charset::kNumClasses;
  r.class_support.assign(k, 0);
  r.class_accuracy.assign(k, 0.0);
  r.confusion.assign(static_cast<size_t>(k) * k, 0);
  r.field_count = static_cast<int>(predictions.size());
  double dist_sum = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    int d = levenshtein(predictions[i], truths[i]);
    dist_sum += d;
    r.correct_count += d == 0;
    auto cp = utf8_decode(predictions[i]);
    auto ct = utf8_decode(truths[i]);
    if (cp.size() != ct.size()) {
      ++r.skipped_field_count;
      continue;
    }
    ++r.aligned_field_count;
    for (size_t p = 0; p < ct.size(); ++p) {
      int truth_cls = charset::find_class(ct[p]);
      int pred_cls = charset::find_class(cp[p]);
      if (truth_cls < 0 || pred_cls < 0) continue;
      ++r.confusion[static_cast<size_t>(truth_cls) * k + pred_cls];
    }
  }
  i64 trace = 0, total = 0;
  for (int t = 0; t < k; ++t) {
    i64 row = 0;
    for (int p = 0; p < k; ++p) row += r.confusion[static_cast<size_t>(t) * k + p];
    r.class_support[t] = row;
    total += row;
    i64 hit = r.confusion[static_cast<size_t>(t) * k + t];
    trace += hit;
    if (row > 0) r.class_accuracy[t] = static_cast<double>(hit) / row;
  }
  r.aligned_chars = total;
  r.char_accuracy = total ? static_cast<double>(trace) / total : 0.0;
  int classes_with_support = 0;
  double acc_sum = 0;
  for (int t = 0; t < k; ++t)
    if (r.class_support[t] > 0) {
      ++classes_with_support;
      acc_sum += r.class_accuracy[t];
    }
  r.avg_class_accuracy =
      classes_with_support ? acc_sum / classes_with_support : 0.0;
  r.correct_rate =
      r.field_count ? static_cast<double>(r.correct_count) / r.field_count : 0.0;
  r.mean_edit_distance = r.field_count ? dist_sum / r.field_count : 0.0;
  return r;
}

inline std::string confusion_csv(const EvalReport& r) {
  int k = charset::kNumClasses;
  std::string out = "truth\\pred";
  for (int p = 0; p < k; ++p) out += "," + charset::symbol_of(p);
  out += "\n";
  for (int t = 0; t < k; ++t) {
    out += charset::symbol_of(t);
    for (int p = 0; p < k; ++p)
      out += "," + std::to_string(r.confusion[static_cast<size_t>(t) * k + p]);
    out += "\n";
  }
  return out;
}

struct LatencyStats {
  double mean_ms = 0;
  double p95_ms = 0;
  double min_ms = 0;
  double max_ms = 0;
  int samples = 0;

  nlohmann::json to_json() const {
    return nlohmann::json{{"mean_ms", mean_ms},
                          {"p95_ms", p95_ms},
                          {"min_ms", min_ms},
                          {"max_ms", max_ms},
                          {"samples", samples}};
  }
};

// Wall clock per forward call, forced single-threaded, 10 warmup calls
// first. Patches are cycled when n exceeds the pool.
inline LatencyStats benchmark_latency(const classify::Model& model,
                                      const std::vector<GrayImage>& patches,
                                      int n) {
  if (n < 100) throw Error("insufficient samples");
  if (patches.empty()) throw Error("insufficient samples");
  int saved_workers = worker_count();
  worker_count() = 1;
  std::vector<double> ms;
  ms.reserve(n);
  try {
    for (int i = 0; i < 10; ++i)
      classify::forward(model, patches[i % patches.size()]);
    for (int i = 0; i < n; ++i) {
      auto t0 = std::chrono::steady_clock::now();
      classify::forward(model, patches[i % patches.size()]);
      auto t1 = std::chrono::steady_clock::now();
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  } catch (...) {
    worker_count() = saved_workers;
    throw;
  }
  worker_count() = saved_workers;
  LatencyStats s;
  s.samples = n;
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0;
  for (double v : ms) sum += v;
  s.mean_ms = sum / n;
  size_t idx = static_cast<size_t>(std::ceil(0.95 * n)) - 1;
  s.p95_ms = sorted[std::min(idx, sorted.size() - 1)];
  s.min_ms = sorted.front();
  s.max_ms = sorted.back();
  return s;
}

}  // namespace idocr::metrics
