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
// File: tests/test_nn.cpp
// Purpose: GEMM and im2col oracles, shape inference, gradient checks,
//          update rule, thread determinism

#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "idocr/nn.hpp"
#include "idocr/rng.hpp"

using namespace idocr;
using Catch::Approx;

namespace {

std::vector<float> random_vec(size_t n, u64 seed, float lo = -1, float hi = 1) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.range_f(lo, hi));
  return v;
}

// Triple-loop matrix multiply oracle.
template <typename T>
std::vector<T> gemm_oracle(const std::vector<T>& a, const std::vector<T>& b,
                           int m, int k, int n) {
  std::vector<T> c(static_cast<size_t>(m) * n, T(0));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[static_cast<size_t>(i) * n + j] = acc;
    }
  return c;
}

nn::ModelSpec tiny_spec() {
  nn::ModelSpec spec;
  spec.layers.push_back({nn::LayerSpec::Kind::conv, 2, 3, 1, 1, 0});
  spec.layers.push_back({nn::LayerSpec::Kind::relu, 0, 0, 1, 0, 0});
  spec.layers.push_back({nn::LayerSpec::Kind::maxpool, 0, 2, 2, 0, 0});
  spec.layers.push_back({nn::LayerSpec::Kind::fully_connected, 0, 0, 1, 0, 6});
  spec.layers.push_back({nn::LayerSpec::Kind::relu, 0, 0, 1, 0, 0});
  spec.layers.push_back({nn::LayerSpec::Kind::fully_connected, 0, 0, 1, 0, 4});
  spec.layers.push_back({nn::LayerSpec::Kind::softmax, 0, 0, 1, 0, 0});
  return spec;
}

template <typename T>
Tensor<T> make_input(const std::vector<T>& flat, int n, int dim) {
  Tensor<T> x({n, dim});
  x.data = flat;
  return x;
}

}  // namespace

TEST_CASE("gemm_acc equals the triple loop at any worker count") {
  for (auto [m, k, n] :
       {std::tuple{1, 1, 1}, std::tuple{3, 5, 4}, std::tuple{17, 9, 23},
        std::tuple{32, 64, 10}}) {
    auto a = random_vec(static_cast<size_t>(m) * k, 100 + m);
    auto b = random_vec(static_cast<size_t>(k) * n, 200 + n);
    auto want = gemm_oracle(a, b, m, k, n);
    for (int workers : {1, 4}) {
      worker_count() = workers;
      std::vector<float> c(static_cast<size_t>(m) * n, 0.0f);
      nn::gemm_acc(a.data(), b.data(), c.data(), m, k, n);
      for (size_t i = 0; i < want.size(); ++i)
        REQUIRE(c[i] == Approx(want[i]).margin(1e-4));
    }
  }
  worker_count() = 0;
}

TEST_CASE("gemm_acc accumulates into the output") {
  std::vector<float> a{1, 2}, b{3, 4};
  std::vector<float> c{5};
  nn::gemm_acc(a.data(), b.data(), c.data(), 1, 2, 1);
  REQUIRE(c[0] == Approx(5 + 1 * 3 + 2 * 4));
}

TEST_CASE("gemm results are bitwise identical across worker counts") {
  const int m = 29, k = 31, n = 37;
  auto a = random_vec(static_cast<size_t>(m) * k, 11);
  auto b = random_vec(static_cast<size_t>(k) * n, 13);
  std::vector<std::vector<float>> results;
  for (int workers : {1, 2, 7}) {
    worker_count() = workers;
    std::vector<float> c(static_cast<size_t>(m) * n, 0.0f);
    nn::gemm_acc(a.data(), b.data(), c.data(), m, k, n);
    results.push_back(std::move(c));
  }
  worker_count() = 0;
  REQUIRE(results[0] == results[1]);
  REQUIRE(results[0] == results[2]);
}

TEST_CASE("im2col and col2im are adjoint") {
  // <im2col(x), y> == <x, col2im(y)> for random x, y
  const int c = 3, h = 7, w = 6, kernel = 3, stride = 2, pad = 1;
  const int oh = (h + 2 * pad - kernel) / stride + 1;
  const int ow = (w + 2 * pad - kernel) / stride + 1;
  const size_t rows = static_cast<size_t>(c) * kernel * kernel;
  const size_t cols_n = static_cast<size_t>(oh) * ow;

  auto x = random_vec(static_cast<size_t>(c) * h * w, 21);
  auto y = random_vec(rows * cols_n, 22);

  std::vector<float> cols_buf(rows * cols_n, 0.0f);
  nn::im2col(x.data(), c, h, w, kernel, stride, pad, oh, ow, cols_buf.data());
  double lhs = 0;
  for (size_t i = 0; i < cols_buf.size(); ++i)
    lhs += double(cols_buf[i]) * y[i];

  std::vector<float> back(x.size(), 0.0f);
  nn::col2im_acc(y.data(), c, h, w, kernel, stride, pad, oh, ow, back.data());
  double rhs = 0;
  for (size_t i = 0; i < back.size(); ++i) rhs += double(x[i]) * back[i];

  REQUIRE(lhs == Approx(rhs).epsilon(1e-4));
}

TEST_CASE("im2col reproduces hand-computed patches") {
  // 1 channel, 3x3 image, 2x2 kernel, stride 1, no padding
  std::vector<float> x{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<float> cols(4 * 4, 0.0f);
  nn::im2col(x.data(), 1, 3, 3, 2, 1, 0, 2, 2, cols.data());
  // rows: kernel positions (ky,kx); cols: output positions (oy,ox)
  std::vector<float> want{1, 2, 4, 5,   // ky=0 kx=0
                          2, 3, 5, 6,   // ky=0 kx=1
                          4, 5, 7, 8,   // ky=1 kx=0
                          5, 6, 8, 9};  // ky=1 kx=1
  REQUIRE(cols == want);
}

TEST_CASE("shape inference matches hand checks and rejects bad specs") {
  auto shapes = nn::infer_shapes(nn::ModelSpec::preset("cifarnet-like"),
                                 nn::Dims{1, 64, 64});
  // conv s2 p2 k5: (64+4-5)/2+1 = 32
  REQUIRE(shapes[0].c == 32);
  REQUIRE(shapes[0].h == 32);
  // final layer is the class distribution
  REQUIRE(shapes.back().c == 74);
  REQUIRE(shapes.back().h == 1);

  nn::ModelSpec bad = tiny_spec();
  bad.layers.push_back({nn::LayerSpec::Kind::relu, 0, 0, 1, 0, 0});
  REQUIRE_THROWS_AS(nn::validate_spec(bad, 4), Error);  // softmax not last

  nn::ModelSpec wrong = tiny_spec();
  wrong.layers[wrong.layers.size() - 2] =
      {nn::LayerSpec::Kind::fully_connected, 0, 0, 1, 0, 9};
  REQUIRE_THROWS_AS(nn::validate_spec(wrong, 4), Error);
}

TEST_CASE("spec serialization round trips") {
  auto spec = nn::ModelSpec::preset("lenet-like");
  auto j = spec.to_json();
  auto back = nn::ModelSpec::from_json(j);
  REQUIRE(back.layers.size() == spec.layers.size());
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    REQUIRE(back.layers[i].kind == spec.layers[i].kind);
    REQUIRE(back.layers[i].out_channels == spec.layers[i].out_channels);
    REQUIRE(back.layers[i].kernel == spec.layers[i].kernel);
  }
  REQUIRE_THROWS_AS(nn::ModelSpec::preset("unknown"), Error);
}

TEST_CASE("softmax cross entropy matches a hand-computed case") {
  // two samples, three classes
  Tensor<float> logits({2, 3});
  logits.data = {1, 2, 3, 0, 0, 0};
  std::vector<int> labels{2, 0};
  Tensor<float> dlogits, probs;
  double loss = nn::softmax_cross_entropy(logits, labels, dlogits, &probs);
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  double want = (-std::log(std::exp(3.0) / z) - std::log(1.0 / 3.0)) / 2.0;
  REQUIRE(loss == Approx(want).epsilon(1e-6));
  REQUIRE(probs.data[2] == Approx(std::exp(3.0) / z).epsilon(1e-5));
  // gradient: (p - onehot) / n
  REQUIRE(dlogits.data[2] == Approx((std::exp(3.0) / z - 1.0) / 2.0).epsilon(1e-5));
  REQUIRE(dlogits.data[3] == Approx((1.0 / 3.0 - 1.0) / 2.0).epsilon(1e-5));
  REQUIRE(dlogits.data[4] == Approx((1.0 / 3.0) / 2.0).epsilon(1e-5));
  // labels out of range are rejected
  std::vector<int> bad{0, 9};
  REQUIRE_THROWS_AS(nn::softmax_cross_entropy(logits, bad, dlogits),
                    Error);
}

TEST_CASE("analytic gradients match finite differences in double") {
  auto spec = tiny_spec();
  nn::validate_spec(spec, 4);
  for (u64 seed : {1ull, 2ull, 3ull}) {
    nn::Net<double> net(spec, nn::Dims{1, 8, 8});
    net.init_params(seed);
    const int n = 2;
    Rng rng(derive_seed(seed, "x"));
    Tensor<double> x({n, 64});
    for (auto& v : x.data) v = rng.range_f(-1, 1);
    std::vector<int> labels{int(seed % 4), int((seed + 2) % 4)};

    auto loss_of = [&]() {
      auto logits = net.forward(x, false);
      Tensor<double> dl;
      return nn::softmax_cross_entropy(logits, labels, dl);
    };

    net.zero_grads();
    auto logits = net.forward(x, true);
    Tensor<double> dl;
    nn::softmax_cross_entropy(logits, labels, dl);
    net.backward(dl);

    auto params = net.named_params();
    auto grads = net.named_grads();
    double worst = 0;
    for (size_t t = 0; t < params.size(); ++t) {
      auto& pt = *params[t].tensor;
      auto& gt = *grads[t].tensor;
      size_t count = static_cast<size_t>(pt.numel());
      for (size_t i = 0; i < count; i += std::max<size_t>(1, count / 17)) {
        double keep = pt.data[i];
        double h = 1e-5 * std::max(1.0, std::abs(keep));
        pt.data[i] = keep + h;
        double up = loss_of();
        pt.data[i] = keep - h;
        double down = loss_of();
        pt.data[i] = keep;
        double fd = (up - down) / (2 * h);
        double denom = std::max({std::abs(fd), std::abs(gt.data[i]), 1e-8});
        worst = std::max(worst, std::abs(fd - gt.data[i]) / denom);
      }
    }
    INFO("seed " << seed);
    REQUIRE(worst < 1e-5);
  }
}

TEST_CASE("sgd momentum update matches the hand-derived recurrence") {
  // single fully connected layer, known gradient
  nn::ModelSpec spec;
  spec.layers.push_back({nn::LayerSpec::Kind::fully_connected, 0, 0, 1, 0, 2});
  spec.layers.push_back({nn::LayerSpec::Kind::softmax, 0, 0, 1, 0, 0});
  nn::Net<float> net(spec, nn::Dims{1, 1, 2});
  net.init_params(5);
  float w0 = net.named_params()[0].tensor->data[0];

  Tensor<float> x({1, 2});
  x.data = {1.0f, 0.0f};
  std::vector<int> label{0};
  auto grad_step = [&]() {
    net.zero_grads();
    auto logits = net.forward(x, true);
    Tensor<float> dl;
    nn::softmax_cross_entropy(logits, label, dl);
    net.backward(dl);
    return net.named_grads()[0].tensor->data[0];
  };

  const float lr = 0.1f, mu = 0.9f, wd = 0.01f;
  float g0 = grad_step();
  net.step(lr, mu, wd);
  // v1 = -lr * (g + wd * w); w1 = w0 + v1
  float v1 = -lr * (g0 + wd * w0);
  REQUIRE(net.named_params()[0].tensor->data[0] == Approx(w0 + v1).epsilon(1e-5));

  float g1 = grad_step();
  float w1 = w0 + v1;
  net.step(lr, mu, wd);
  float v2 = mu * v1 - lr * (g1 + wd * w1);
  REQUIRE(net.named_params()[0].tensor->data[0] == Approx(w1 + v2).epsilon(1e-5));
}

TEST_CASE("bias stays exempt from weight decay") {
  nn::ModelSpec spec;
  spec.layers.push_back({nn::LayerSpec::Kind::fully_connected, 0, 0, 1, 0, 2});
  spec.layers.push_back({nn::LayerSpec::Kind::softmax, 0, 0, 1, 0, 0});
  nn::Net<float> net(spec, nn::Dims{1, 1, 2});
  net.init_params(5);
  // force a known bias, zero grads, large decay: bias must not move
  net.named_params()[1].tensor->data[0] = 0.5f;
  net.zero_grads();
  net.step(0.1, 0.0, 10.0);
  REQUIRE(net.named_params()[1].tensor->data[0] == Approx(0.5f));
  // while the weight decays
  float w_before = net.named_params()[0].tensor->data[0];
  if (w_before != 0.0f) {
    REQUIRE(std::abs(net.named_params()[0].tensor->data[0]) <=
            std::abs(w_before));
  }
}

TEST_CASE("training forward/backward is deterministic across threads") {
  auto spec = tiny_spec();
  std::vector<std::vector<float>> snapshots;
  for (int workers : {1, 3}) {
    worker_count() = workers;
    nn::Net<float> net(spec, nn::Dims{1, 8, 8});
    net.init_params(77);
    Rng rng(5);
    Tensor<float> x({4, 64});
    for (auto& v : x.data) v = static_cast<float>(rng.range_f(0, 1));
    std::vector<int> labels{0, 1, 2, 3};
    for (int step = 0; step < 5; ++step) {
      net.zero_grads();
      auto logits = net.forward(x, true);
      Tensor<float> dl;
      nn::softmax_cross_entropy(logits, labels, dl);
      net.backward(dl);
      net.step(0.05, 0.9, 0.0005);
    }
    std::vector<float> flat;
    for (auto& p : net.named_params())
      flat.insert(flat.end(), p.tensor->data.begin(), p.tensor->data.end());
    snapshots.push_back(std::move(flat));
  }
  worker_count() = 0;
  REQUIRE(snapshots[0] == snapshots[1]);
}

TEST_CASE("a tiny net overfits a toy problem") {
  auto spec = tiny_spec();
  nn::Net<float> net(spec, nn::Dims{1, 8, 8});
  net.init_params(3);
  // four distinguishable patterns
  Tensor<float> x({4, 64});
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < 16; ++i) x.data[s * 64 + s * 16 + i] = 1.0f;
  std::vector<int> labels{0, 1, 2, 3};
  double loss = 0;
  for (int step = 0; step < 300; ++step) {
    net.zero_grads();
    auto logits = net.forward(x, true);
    Tensor<float> dl;
    loss = nn::softmax_cross_entropy(logits, labels, dl);
    net.backward(dl);
    net.step(0.05, 0.9, 0.0);
  }
  REQUIRE(loss < 0.01);
  auto logits = net.forward(x, false);
  for (int s = 0; s < 4; ++s) {
    int arg = 0;
    for (int c = 1; c < 4; ++c)
      if (logits.data[s * 4 + c] > logits.data[s * 4 + arg]) arg = c;
    REQUIRE(arg == s);
  }
}
