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
// File: include/idocr/nn.hpp
// Purpose: small CNN: layer specs, shape inference, forward/backward, SGD
//
// Convolutions run as im2col plus GEMM. Every accumulation has a fixed
// iteration order and parallel work is partitioned over independent output
// rows, so results are bit-identical at any worker count. Layers are
// templated on the scalar so gradient checks can run in double with the
// same code that trains in float.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "idocr/common.hpp"
#include "idocr/rng.hpp"
#include "idocr/tensor.hpp"

namespace idocr::nn {

struct LayerSpec {
  enum class Kind { conv, relu, maxpool, fully_connected, softmax };
  Kind kind = Kind::relu;
  int out_channels = 0;  // conv
  int kernel = 0;        // conv, maxpool
  int stride = 1;        // conv, maxpool
  int padding = 0;       // conv
  int out_dim = 0;       // fully_connected
};

struct ModelSpec {
  std::vector<LayerSpec> layers;

  static ModelSpec preset(const std::string& name);
  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

inline const char* kind_name(LayerSpec::Kind k) {
  switch (k) {
    case LayerSpec::Kind::conv: return "conv";
    case LayerSpec::Kind::relu: return "relu";
    case LayerSpec::Kind::maxpool: return "maxpool";
    case LayerSpec::Kind::fully_connected: return "fully_connected";
    default: return "softmax";
  }
}

inline LayerSpec::Kind kind_from(const std::string& s) {
  if (s == "conv") return LayerSpec::Kind::conv;
  if (s == "relu") return LayerSpec::Kind::relu;
  if (s == "maxpool") return LayerSpec::Kind::maxpool;
  if (s == "fully_connected") return LayerSpec::Kind::fully_connected;
  if (s == "softmax") return LayerSpec::Kind::softmax;
  throw Error("unknown layer kind: " + s);
}

inline nlohmann::json ModelSpec::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json j{{"kind", kind_name(l.kind)}};
    switch (l.kind) {
      case LayerSpec::Kind::conv:
        j["out_channels"] = l.out_channels;
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        j["padding"] = l.padding;
        break;
      case LayerSpec::Kind::maxpool:
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        break;
      case LayerSpec::Kind::fully_connected:
        j["out_dim"] = l.out_dim;
        break;
      default:
        break;
    }
    arr.push_back(std::move(j));
  }
  return nlohmann::json{{"layers", arr}};
}

inline ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec spec;
  for (const auto& e : j.at("layers")) {
    LayerSpec l;
    l.kind = kind_from(e.at("kind").get<std::string>());
    switch (l.kind) {
      case LayerSpec::Kind::conv:
        l.out_channels = e.at("out_channels").get<int>();
        l.kernel = e.at("kernel").get<int>();
        l.stride = e.at("stride").get<int>();
        l.padding = e.at("padding").get<int>();
        break;
      case LayerSpec::Kind::maxpool:
        l.kernel = e.at("kernel").get<int>();
        l.stride = e.at("stride").get<int>();
        break;
      case LayerSpec::Kind::fully_connected:
        l.out_dim = e.at("out_dim").get<int>();
        break;
      default:
        break;
    }
    spec.layers.push_back(l);
  }
  return spec;
}

inline ModelSpec ModelSpec::preset(const std::string& name) {
  using K = LayerSpec::Kind;
  auto conv = [](int oc, int k, int s, int p) {
    LayerSpec l;
    l.kind = K::conv;
    l.out_channels = oc;
    l.kernel = k;
    l.stride = s;
    l.padding = p;
    return l;
  };
  auto pool = [](int k, int s) {
    LayerSpec l;
    l.kind = K::maxpool;
    l.kernel = k;
    l.stride = s;
    return l;
  };
  auto fc = [](int d) {
    LayerSpec l;
    l.kind = K::fully_connected;
    l.out_dim = d;
    return l;
  };
  LayerSpec relu;
  relu.kind = K::relu;
  LayerSpec softmax;
  softmax.kind = K::softmax;
  ModelSpec spec;
  if (name == "cifarnet-like") {
    spec.layers = {conv(32, 5, 2, 2), relu, pool(2, 2), conv(32, 5, 1, 2),
                   relu, pool(2, 2),  conv(64, 3, 1, 1), relu, pool(2, 2),
                   fc(128), relu, fc(74), softmax};
  } else if (name == "lenet-like") {
    spec.layers = {conv(6, 5, 1, 0),  relu, pool(2, 2), conv(16, 5, 1, 0),
                   relu, pool(2, 2),  fc(120), relu, fc(84), relu, fc(74),
                   softmax};
  } else {
    throw Error("unknown preset: " + name);
  }
  return spec;
}

struct Dims {
  int c = 0, h = 0, w = 0;
  i64 count() const { return static_cast<i64>(c) * h * w; }
};

// Per-layer output dims for a 1x64x64 input (index i = output of layer i).
// Throws when a layer cannot apply to its input shape.
inline std::vector<Dims> infer_shapes(const ModelSpec& spec,
                                      Dims in = {1, 64, 64}) {
  std::vector<Dims> out;
  Dims d = in;
  bool flattened = false;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    switch (l.kind) {
      case LayerSpec::Kind::conv: {
        if (flattened) throw Error("conv after fully_connected");
        if (l.kernel < 1 || l.stride < 1 || l.padding < 0 || l.out_channels < 1)
          throw Error("bad conv parameters");
        int h = (d.h + 2 * l.padding - l.kernel) / l.stride + 1;
        int w = (d.w + 2 * l.padding - l.kernel) / l.stride + 1;
        if (h < 1 || w < 1) throw Error("conv output is empty");
        d = {l.out_channels, h, w};
        break;
      }
      case LayerSpec::Kind::maxpool: {
        if (flattened) throw Error("maxpool after fully_connected");
        if (l.kernel < 1 || l.stride < 1) throw Error("bad maxpool parameters");
        int h = (d.h - l.kernel) / l.stride + 1;
        int w = (d.w - l.kernel) / l.stride + 1;
        if (h < 1 || w < 1) throw Error("maxpool output is empty");
        d = {d.c, h, w};
        break;
      }
      case LayerSpec::Kind::fully_connected: {
        if (l.out_dim < 1) throw Error("bad fully_connected parameters");
        d = {l.out_dim, 1, 1};
        flattened = true;
        break;
      }
      case LayerSpec::Kind::relu:
        break;
      case LayerSpec::Kind::softmax:
        if (i + 1 != spec.layers.size())
          throw Error("softmax must be the final layer");
        break;
    }
    out.push_back(d);
  }
  return out;
}

inline void validate_spec(const ModelSpec& spec, int num_classes = 74) {
  if (spec.layers.empty()) throw Error("empty model spec");
  auto shapes = infer_shapes(spec);
  if (shapes.back().count() != num_classes)
    throw Error("model output dimension must be " + std::to_string(num_classes));
}

// C[m,n] += A[m,k] * B[k,n], all row-major. Rows of C are partitioned over
// workers; the k loop order is fixed, so sums are bit-stable.
template <typename T>
inline void gemm_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  parallel_for(m, [&](i64 r0, i64 r1) {
    for (i64 i = r0; i < r1; ++i) {
      T* crow = c + i * n;
      const T* arow = a + i * k;
      for (int kk = 0; kk < k; ++kk) {
        T av = arow[kk];
        const T* brow = b + static_cast<i64>(kk) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

template <typename T>
inline void transpose(const T* src, T* dst, int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) dst[static_cast<i64>(j) * rows + i] = src[static_cast<i64>(i) * cols + j];
}

// x: [c,h,w] -> cols: [c*k*k, oh*ow]; out-of-image taps read zero.
template <typename T>
inline void im2col(const T* x, int c, int h, int w, int k, int stride, int pad,
                   int oh, int ow, T* cols) {
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + (static_cast<i64>(ch) * k * k + ky * k + kx) *
                            (static_cast<i64>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride - pad + kx;
            row[static_cast<i64>(oy) * ow + ox] =
                (iy >= 0 && iy < h && ix >= 0 && ix < w)
                    ? x[(static_cast<i64>(ch) * h + iy) * w + ix]
                    : T(0);
          }
        }
      }
}

// Adjoint of im2col: scatter-add with the identical fixed loop order.
template <typename T>
inline void col2im_acc(const T* cols, int c, int h, int w, int k, int stride,
                       int pad, int oh, int ow, T* x) {
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + (static_cast<i64>(ch) * k * k + ky * k + kx) *
                                  (static_cast<i64>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            x[(static_cast<i64>(ch) * h + iy) * w + ix] +=
                row[static_cast<i64>(oy) * ow + ox];
          }
        }
      }
}

template <typename T>
class Net {
 public:
  explicit Net(const ModelSpec& spec, Dims input = {1, 64, 64})
      : spec_(spec), input_(input) {
    shapes_ = infer_shapes(spec, input);
    layers_.resize(spec.layers.size());
    Dims in = input;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
      const LayerSpec& l = spec.layers[i];
      Layer& st = layers_[i];
      if (l.kind == LayerSpec::Kind::conv) {
        st.w.resize({l.out_channels, in.c, l.kernel, l.kernel});
        st.b.resize({l.out_channels});
      } else if (l.kind == LayerSpec::Kind::fully_connected) {
        st.w.resize({l.out_dim, static_cast<int>(in.count())});
        st.b.resize({l.out_dim});
      }
      st.gw.resize(st.w.shape.empty() ? std::vector<int>{1} : st.w.shape);
      st.gb.resize(st.b.shape.empty() ? std::vector<int>{1} : st.b.shape);
      if (st.w.empty()) {
        st.gw = Tensor<T>();
        st.gb = Tensor<T>();
      }
      in = shapes_[i];
    }
  }

  const ModelSpec& spec() const { return spec_; }
  Dims input_dims() const { return input_; }
  int num_classes() const { return static_cast<int>(shapes_.back().count()); }

  // Kaiming-uniform weights, zero biases. Each layer draws from its own
  // derived stream so adding layers does not shift earlier ones.
  void init_params(u64 seed) {
    for (size_t i = 0; i < layers_.size(); ++i) {
      Layer& st = layers_[i];
      if (st.w.empty()) continue;
      i64 fan_in = st.w.numel() / st.w.shape[0];
      double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      Rng rng(derive_seed(seed, "layer/" + std::to_string(i) + "/w"));
      for (T& v : st.w.data)
        v = static_cast<T>(rng.range_f(-bound, bound));
      st.b.fill(T(0));
    }
  }

  struct NamedTensor {
    std::string name;
    Tensor<T>* tensor;
  };
  std::vector<NamedTensor> named_params() {
    std::vector<NamedTensor> out;
    for (size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].w.empty()) continue;
      out.push_back({"layer" + std::to_string(i) + ".weight", &layers_[i].w});
      out.push_back({"layer" + std::to_string(i) + ".bias", &layers_[i].b});
    }
    return out;
  }
  std::vector<NamedTensor> named_grads() {
    std::vector<NamedTensor> out;
    for (size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].w.empty()) continue;
      out.push_back({"layer" + std::to_string(i) + ".weight", &layers_[i].gw});
      out.push_back({"layer" + std::to_string(i) + ".bias", &layers_[i].gb});
    }
    return out;
  }

  // x: [n, input.count()] -> logits [n, classes]. With train=true the
  // intermediate activations stay cached for backward().
  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (x.shape.size() != 2 || x.shape[1] != input_.count())
      throw Error("input shape mismatch");
    int n = x.shape[0];
    const Tensor<T>* cur = &x;
    if (train) x_in_ = x;
    Dims in = input_;
    for (size_t i = 0; i < layers_.size(); ++i) {
      const LayerSpec& l = spec_.layers[i];
      Layer& st = layers_[i];
      Dims out = shapes_[i];
      switch (l.kind) {
        case LayerSpec::Kind::conv:
          conv_forward(*cur, st, l, in, out, n, train);
          break;
        case LayerSpec::Kind::relu:
          st.y.resize({n, static_cast<int>(out.count())});
          for (i64 j = 0; j < cur->numel(); ++j)
            st.y.data[j] = cur->data[j] > T(0) ? cur->data[j] : T(0);
          break;
        case LayerSpec::Kind::maxpool:
          pool_forward(*cur, st, l, in, out, n);
          break;
        case LayerSpec::Kind::fully_connected:
          fc_forward(*cur, st, l, out, n);
          break;
        case LayerSpec::Kind::softmax:
          st.y = *cur;  // identity here; the loss applies softmax
          break;
      }
      cur = &st.y;
      in = out;
    }
    return *cur;
  }

  // dlogits: [n, classes]. Accumulates parameter gradients (callers zero
  // them between steps) and returns nothing; input gradients are discarded.
  void backward(const Tensor<T>& dlogits) {
    Tensor<T> grad = dlogits;
    for (size_t ii = layers_.size(); ii-- > 0;) {
      const LayerSpec& l = spec_.layers[ii];
      Layer& st = layers_[ii];
      Dims in = ii == 0 ? input_ : shapes_[ii - 1];
      Dims out = shapes_[ii];
      const Tensor<T>& x = ii == 0 ? x_in_ : layers_[ii - 1].y;
      int n = grad.shape[0];
      switch (l.kind) {
        case LayerSpec::Kind::conv:
          grad = conv_backward(grad, x, st, l, in, out, n, ii > 0);
          break;
        case LayerSpec::Kind::relu: {
          for (i64 j = 0; j < grad.numel(); ++j)
            if (st.y.data[j] <= T(0)) grad.data[j] = T(0);
          break;
        }
        case LayerSpec::Kind::maxpool:
          grad = pool_backward(grad, st, in, out, n);
          break;
        case LayerSpec::Kind::fully_connected:
          grad = fc_backward(grad, x, st, l, n, ii > 0);
          break;
        case LayerSpec::Kind::softmax:
          break;  // loss already differentiated through softmax
      }
    }
  }

  void zero_grads() {
    for (Layer& st : layers_) {
      if (st.w.empty()) continue;
      st.gw.fill(T(0));
      st.gb.fill(T(0));
    }
  }

  // SGD with momentum; weight decay applies to weights, not biases.
  void step(double lr, double momentum, double weight_decay) {
    for (Layer& st : layers_) {
      if (st.w.empty()) continue;
      if (st.vw.numel() != st.w.numel()) {
        st.vw.resize(st.w.shape);
        st.vb.resize(st.b.shape);
      }
      for (i64 j = 0; j < st.w.numel(); ++j) {
        T g = st.gw.data[j] + static_cast<T>(weight_decay) * st.w.data[j];
        st.vw.data[j] = static_cast<T>(momentum) * st.vw.data[j] -
                        static_cast<T>(lr) * g;
        st.w.data[j] += st.vw.data[j];
      }
      for (i64 j = 0; j < st.b.numel(); ++j) {
        st.vb.data[j] = static_cast<T>(momentum) * st.vb.data[j] -
                        static_cast<T>(lr) * st.gb.data[j];
        st.b.data[j] += st.vb.data[j];
      }
    }
  }

  // Drops activation and optimizer caches; parameters stay.
  void release_caches() {
    x_in_ = Tensor<T>();
    for (Layer& st : layers_) {
      st.y = Tensor<T>();
      st.cols = Tensor<T>();
      st.argmax.clear();
      st.vw = Tensor<T>();
      st.vb = Tensor<T>();
    }
  }

 private:
  struct Layer {
    Tensor<T> w, b, gw, gb, vw, vb;
    Tensor<T> y;     // output cache
    Tensor<T> cols;  // conv: im2col cache [n, ckk, ohw]
    std::vector<int> argmax;  // maxpool winners
  };

  void conv_forward(const Tensor<T>& x, Layer& st, const LayerSpec& l, Dims in,
                    Dims out, int n, bool train) {
    i64 ckk = static_cast<i64>(in.c) * l.kernel * l.kernel;
    i64 ohw = static_cast<i64>(out.h) * out.w;
    st.y.resize({n, static_cast<int>(out.count())});
    st.cols.resize({n, static_cast<int>(ckk), static_cast<int>(ohw)});
    for (int s = 0; s < n; ++s) {
      T* cols = st.cols.ptr() + static_cast<i64>(s) * ckk * ohw;
      im2col(x.ptr() + static_cast<i64>(s) * in.count(), in.c, in.h, in.w,
             l.kernel, l.stride, l.padding, out.h, out.w, cols);
      T* y = st.y.ptr() + static_cast<i64>(s) * out.count();
      for (int oc = 0; oc < out.c; ++oc)
        std::fill(y + oc * ohw, y + (oc + 1) * ohw, st.b.data[oc]);
      gemm_acc(st.w.ptr(), cols, y, out.c, static_cast<int>(ckk),
               static_cast<int>(ohw));
    }
    if (!train) st.cols = Tensor<T>();
  }

  Tensor<T> conv_backward(const Tensor<T>& dy, const Tensor<T>& x, Layer& st,
                          const LayerSpec& l, Dims in, Dims out, int n,
                          bool need_dx) {
    i64 ckk = static_cast<i64>(in.c) * l.kernel * l.kernel;
    i64 ohw = static_cast<i64>(out.h) * out.w;
    (void)x;
    // bias grads: fixed (sample, channel, position) order
    for (int s = 0; s < n; ++s) {
      const T* d = dy.ptr() + static_cast<i64>(s) * out.count();
      for (int oc = 0; oc < out.c; ++oc) {
        T acc = T(0);
        for (i64 p = 0; p < ohw; ++p) acc += d[oc * ohw + p];
        st.gb.data[oc] += acc;
      }
    }
    // weight grads: per sample dW += dy_s * cols_s^T, samples in order
    std::vector<T> colsT(static_cast<size_t>(ohw) * ckk);
    for (int s = 0; s < n; ++s) {
      const T* cols = st.cols.ptr() + static_cast<i64>(s) * ckk * ohw;
      transpose(cols, colsT.data(), static_cast<int>(ckk), static_cast<int>(ohw));
      gemm_acc(dy.ptr() + static_cast<i64>(s) * out.count(), colsT.data(),
               st.gw.ptr(), out.c, static_cast<int>(ohw), static_cast<int>(ckk));
    }
    Tensor<T> dx;
    if (need_dx) {
      dx.resize({n, static_cast<int>(in.count())});
      std::vector<T> wT(static_cast<size_t>(ckk) * out.c);
      transpose(st.w.ptr(), wT.data(), out.c, static_cast<int>(ckk));
      std::vector<T> dcols(static_cast<size_t>(ckk) * ohw);
      for (int s = 0; s < n; ++s) {
        std::fill(dcols.begin(), dcols.end(), T(0));
        gemm_acc(wT.data(), dy.ptr() + static_cast<i64>(s) * out.count(),
                 dcols.data(), static_cast<int>(ckk), out.c,
                 static_cast<int>(ohw));
        col2im_acc(dcols.data(), in.c, in.h, in.w, l.kernel, l.stride,
                   l.padding, out.h, out.w,
                   dx.ptr() + static_cast<i64>(s) * in.count());
      }
    }
    return dx;
  }

  void pool_forward(const Tensor<T>& x, Layer& st, const LayerSpec& l, Dims in,
                    Dims out, int n) {
    st.y.resize({n, static_cast<int>(out.count())});
    st.argmax.assign(static_cast<size_t>(n) * out.count(), 0);
    parallel_for(n, [&](i64 s0, i64 s1) {
      for (i64 s = s0; s < s1; ++s) {
        const T* xs = x.ptr() + s * in.count();
        T* ys = st.y.ptr() + s * out.count();
        int* am = st.argmax.data() + s * out.count();
        for (int c = 0; c < in.c; ++c)
          for (int oy = 0; oy < out.h; ++oy)
            for (int ox = 0; ox < out.w; ++ox) {
              int best = -1;
              T bv = T(0);
              for (int ky = 0; ky < l.kernel; ++ky)
                for (int kx = 0; kx < l.kernel; ++kx) {
                  int iy = oy * l.stride + ky, ix = ox * l.stride + kx;
                  int idx = (c * in.h + iy) * in.w + ix;
                  if (best < 0 || xs[idx] > bv) {
                    best = idx;
                    bv = xs[idx];
                  }
                }
              i64 o = (static_cast<i64>(c) * out.h + oy) * out.w + ox;
              ys[o] = bv;
              am[o] = best;
            }
      }
    });
  }

  Tensor<T> pool_backward(const Tensor<T>& dy, Layer& st, Dims in, Dims out,
                          int n) {
    Tensor<T> dx({n, static_cast<int>(in.count())});
    parallel_for(n, [&](i64 s0, i64 s1) {
      for (i64 s = s0; s < s1; ++s) {
        const T* d = dy.ptr() + s * out.count();
        T* g = dx.ptr() + s * in.count();
        const int* am = st.argmax.data() + s * out.count();
        for (i64 o = 0; o < out.count(); ++o) g[am[o]] += d[o];
      }
    });
    return dx;
  }

  void fc_forward(const Tensor<T>& x, Layer& st, const LayerSpec& l, Dims out,
                  int n) {
    int in_dim = st.w.shape[1];
    if (x.shape[1] != in_dim) throw Error("input shape mismatch");
    st.y.resize({n, l.out_dim});
    for (int s = 0; s < n; ++s)
      for (int o = 0; o < l.out_dim; ++o)
        st.y.data[static_cast<i64>(s) * l.out_dim + o] = st.b.data[o];
    // y += x * w^T via the j-vectorizable form: fixed i order
    std::vector<T> wT(static_cast<size_t>(in_dim) * l.out_dim);
    transpose(st.w.ptr(), wT.data(), l.out_dim, in_dim);
    gemm_acc(x.ptr(), wT.data(), st.y.ptr(), n, in_dim, l.out_dim);
    (void)out;
  }

  Tensor<T> fc_backward(const Tensor<T>& dy, const Tensor<T>& x, Layer& st,
                        const LayerSpec& l, int n, bool need_dx) {
    int in_dim = st.w.shape[1];
    for (int s = 0; s < n; ++s)
      for (int o = 0; o < l.out_dim; ++o)
        st.gb.data[o] += dy.data[static_cast<i64>(s) * l.out_dim + o];
    // dW += dy^T * x, samples accumulated in fixed order per row
    parallel_for(l.out_dim, [&](i64 o0, i64 o1) {
      for (i64 o = o0; o < o1; ++o) {
        T* grow = st.gw.ptr() + o * in_dim;
        for (int s = 0; s < n; ++s) {
          T d = dy.data[static_cast<i64>(s) * l.out_dim + o];
          const T* xrow = x.ptr() + static_cast<i64>(s) * in_dim;
          for (int i = 0; i < in_dim; ++i) grow[i] += d * xrow[i];
        }
      }
    });
    Tensor<T> dx;
    if (need_dx) {
      dx.resize({n, in_dim});
      gemm_acc(dy.ptr(), st.w.ptr(), dx.ptr(), n, l.out_dim, in_dim);
    }
    return dx;
  }

  ModelSpec spec_;
  Dims input_;
  std::vector<Dims> shapes_;
  std::vector<Layer> layers_;
  Tensor<T> x_in_;
};

// Mean softmax cross-entropy with the log-sum-exp trick. Fills dloss/dlogits
// and optionally the per-sample probabilities.
template <typename T>
inline double softmax_cross_entropy(const Tensor<T>& logits,
                                    const std::vector<int>& labels,
                                    Tensor<T>& dlogits,
                                    Tensor<T>* probs = nullptr) {
  int n = logits.shape[0], k = logits.shape[1];
  if (static_cast<int>(labels.size()) != n) throw Error("label count mismatch");
  dlogits.resize(logits.shape);
  if (probs) probs->resize(logits.shape);
  double total = 0;
  for (int s = 0; s < n; ++s) {
    const T* z = logits.ptr() + static_cast<i64>(s) * k;
    T m = z[0];
    for (int i = 1; i < k; ++i) m = std::max(m, z[i]);
    double sum = 0;
    for (int i = 0; i < k; ++i) sum += std::exp(static_cast<double>(z[i] - m));
    double lse = static_cast<double>(m) + std::log(sum);
    int label = labels[static_cast<size_t>(s)];
    if (label < 0 || label >= k) throw Error("label out of range");
    total += lse - static_cast<double>(z[label]);
    T* d = dlogits.ptr() + static_cast<i64>(s) * k;
    for (int i = 0; i < k; ++i) {
      double p = std::exp(static_cast<double>(z[i]) - lse);
      if (probs) probs->data[static_cast<i64>(s) * k + i] = static_cast<T>(p);
      d[i] = static_cast<T>((p - (i == label ? 1.0 : 0.0)) / n);
    }
  }
  return total / n;
}

}  // namespace idocr::nn
