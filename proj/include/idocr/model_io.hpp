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
// File: include/idocr/model_io.hpp
// Purpose: model file serialization (OCRM container)
//
// Layout: magic "OCRM", format version u32 LE, u32-LE-length-prefixed UTF-8
// JSON header (kind, spec, charset hash, normalization stats, lineage),
// then per tensor: u32-length-prefixed name, rank u32, dims u32 each, raw
// little-endian f32 data. All integers little endian; byte order is written
// explicitly so files are bit-identical across platforms.

#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "idocr/charset.hpp"
#include "idocr/classify.hpp"
#include "idocr/common.hpp"
#include "idocr/nn.hpp"

namespace idocr::model_io {

constexpr u32 kFormatVersion = 1;

namespace detail {

inline void wr_u32(std::ostream& os, u32 v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
               static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
  os.write(b, 4);
}

inline u32 rd_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw Error("model file truncated");
  return static_cast<u32>(b[0]) | static_cast<u32>(b[1]) << 8 |
         static_cast<u32>(b[2]) << 16 | static_cast<u32>(b[3]) << 24;
}

inline void wr_f32s(std::ostream& os, const float* v, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    u32 bits;
    std::memcpy(&bits, &v[i], 4);
    wr_u32(os, bits);
  }
}

inline void rd_f32s(std::istream& is, float* v, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    u32 bits = rd_u32(is);
    std::memcpy(&v[i], &bits, 4);
  }
}

inline void wr_str(std::ostream& os, const std::string& s) {
  wr_u32(os, static_cast<u32>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string rd_str(std::istream& is) {
  u32 n = rd_u32(is);
  if (n > (1u << 28)) throw Error("model file corrupt: string too long");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw Error("model file truncated");
  return s;
}

inline std::string hash_hex(u64 h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

inline u64 hash_from_hex(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

struct NamedView {
  std::string name;
  std::vector<u32> dims;
  const float* data;
  size_t count;
};

inline std::vector<NamedView> tensor_views(const classify::Model& m) {
  std::vector<NamedView> out;
  if (m.kind == "cnn") {
    auto params = const_cast<nn::Net<float>&>(*m.net).named_params();
    for (auto& p : params) {
      NamedView v;
      v.name = p.name;
      for (int d : p.tensor->shape) v.dims.push_back(static_cast<u32>(d));
      v.data = p.tensor->ptr();
      v.count = static_cast<size_t>(p.tensor->numel());
      out.push_back(std::move(v));
    }
  } else {
    out.push_back({"linear.weight",
                   {static_cast<u32>(m.classes),
                    static_cast<u32>(m.lin_w.size() / m.classes)},
                   m.lin_w.data(), m.lin_w.size()});
    out.push_back({"linear.bias", {static_cast<u32>(m.classes)},
                   m.lin_b.data(), m.lin_b.size()});
  }
  return out;
}

}  // namespace detail

inline void save_model(const classify::Model& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write model file: " + path);
  auto views = detail::tensor_views(m);
  nlohmann::json header{
      {"kind", m.kind},
      {"classes", m.classes},
      {"charset_hash", detail::hash_hex(m.charset_hash)},
      {"norm_mean", m.norm_mean},
      {"norm_std", m.norm_std},
      {"lineage", m.lineage},
  };
  if (m.kind == "cnn") header["spec"] = m.spec.to_json();
  nlohmann::json names = nlohmann::json::array();
  for (const auto& v : views) names.push_back(v.name);
  header["tensors"] = names;
  std::string hs = header.dump();
  os.write("OCRM", 4);
  detail::wr_u32(os, kFormatVersion);
  detail::wr_str(os, hs);
  for (const auto& v : views) {
    detail::wr_str(os, v.name);
    detail::wr_u32(os, static_cast<u32>(v.dims.size()));
    for (u32 d : v.dims) detail::wr_u32(os, d);
    detail::wr_f32s(os, v.data, v.count);
  }
  if (!os) throw Error("write failed: " + path);
}

inline classify::Model load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open model file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "OCRM")
    throw Error("not a model file: " + path);
  u32 version = detail::rd_u32(is);
  if (version != kFormatVersion)
    throw Error("unsupported model version " + std::to_string(version));
  nlohmann::json header = nlohmann::json::parse(detail::rd_str(is));

  classify::Model m;
  m.kind = header.at("kind").get<std::string>();
  m.classes = header.at("classes").get<int>();
  m.charset_hash = detail::hash_from_hex(
      header.at("charset_hash").get<std::string>());
  m.norm_mean = header.at("norm_mean").get<double>();
  m.norm_std = header.at("norm_std").get<double>();
  m.lineage = header.at("lineage").get<std::vector<std::string>>();
  if (m.charset_hash != charset::charset_hash())
    throw Error("model charset hash mismatch");

  std::vector<std::string> names =
      header.at("tensors").get<std::vector<std::string>>();
  struct Loaded {
    std::vector<u32> dims;
    std::vector<float> data;
  };
  std::vector<Loaded> tensors;
  for (const auto& expected : names) {
    std::string name = detail::rd_str(is);
    if (name != expected) throw Error("model tensor order mismatch: " + name);
    u32 rank = detail::rd_u32(is);
    if (rank > 8) throw Error("model file corrupt: rank too large");
    Loaded t;
    size_t count = 1;
    for (u32 i = 0; i < rank; ++i) {
      u32 d = detail::rd_u32(is);
      if (d == 0 || count > (1u << 30) / std::max<u32>(d, 1))
        throw Error("model file corrupt: bad dims");
      t.dims.push_back(d);
      count *= d;
    }
    t.data.resize(count);
    detail::rd_f32s(is, t.data.data(), count);
    tensors.push_back(std::move(t));
  }

  if (m.kind == "cnn") {
    m.spec = nn::ModelSpec::from_json(header.at("spec"));
    m.net = std::make_shared<nn::Net<float>>(m.spec);
    auto params = m.net->named_params();
    if (params.size() != tensors.size())
      throw Error("model tensor count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
      auto& dst = *params[i].tensor;
      const auto& src = tensors[i];
      if (src.dims.size() != dst.shape.size())
        throw Error("tensor shape mismatch: " + params[i].name);
      for (size_t d = 0; d < src.dims.size(); ++d)
        if (static_cast<int>(src.dims[d]) != dst.shape[d])
          throw Error("tensor shape mismatch: " + params[i].name);
      dst.data = src.data;
    }
  } else if (m.kind == "hog_linear") {
    if (tensors.size() != 2) throw Error("model tensor count mismatch");
    m.lin_w = std::move(tensors[0].data);
    m.lin_b = std::move(tensors[1].data);
    if (static_cast<int>(m.lin_b.size()) != m.classes ||
        m.lin_w.size() % m.classes != 0)
      throw Error("tensor shape mismatch: linear");
  } else {
    throw Error("unknown model kind: " + m.kind);
  }
  return m;
}

}  // namespace idocr::model_io
