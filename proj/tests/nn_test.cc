// Copyright 2026 Convturn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "convturn/common/error.h"
#include "convturn/nn/adam.h"
#include "convturn/nn/checkpoint.h"
#include "convturn/nn/gradcheck.h"
#include "convturn/nn/ops.h"
#include "convturn/nn/param_store.h"
#include "convturn/nn/rng.h"
#include "convturn/nn/tensor.h"

using namespace convturn;

namespace {

Tensor<double> RandomTensor(const std::vector<int>& shape, Rng* rng,
                            double scale = 1.0) {
  Tensor<double> t(shape);
  for (std::size_t i = 0; i < t.Numel(); ++i) {
    t[i] = rng->Uniform(-scale, scale);
  }
  return t;
}

}  // namespace

TEST_CASE("tensor shape and element access") {
  Tensor<float> t({2, 3});
  CHECK(t.Numel() == 6);
  CHECK(t.Dim(0) == 2);
  CHECK(t.Dim(1) == 3);
  t.At(1, 2) = 5.0f;
  CHECK(t[5] == 5.0f);
  CHECK_THROWS_AS(Tensor<float>({2, -1}), ConfigError);
  CHECK_THROWS_AS(Tensor<float>({2}, {1.0f, 2.0f, 3.0f}), ConfigError);
  Tensor<double> d = t.Cast<double>();
  CHECK(d.At(1, 2) == 5.0);
}

TEST_CASE("rng determinism and stream derivation") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const double va = a.UniformUnit();
    CHECK(va == b.UniformUnit());
    CHECK(va >= 0.0);
    CHECK(va < 1.0);
  }
  CHECK(a.UniformUnit() != c.UniformUnit());
  Rng d1(Rng::Derive(7, 1, 0));
  Rng d2(Rng::Derive(7, 1, 1));
  Rng d3(Rng::Derive(7, 2, 0));
  CHECK(d1.Next() != d2.Next());
  CHECK(d1.Next() != d3.Next());
  Rng e(99);
  int lo_count = 0;
  for (int i = 0; i < 2000; ++i) {
    const int v = e.UniformInt(0, 3);
    CHECK(v >= 0);
    CHECK(v <= 3);
    if (v == 0) ++lo_count;
  }
  // Roughly a quarter of draws on {0,1,2,3}.
  CHECK(lo_count > 350);
  CHECK(lo_count < 650);
}

TEST_CASE("affine identity and zero-weight cases") {
  Tensor<float> w({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
  Tensor<float> b({2}, {0.0f, 0.0f});
  Tensor<float> x({2}, {3.0f, 4.0f});
  Tensor<float> y = AffineForward(w, b, x);
  CHECK(y[0] == 3.0f);
  CHECK(y[1] == 4.0f);

  Tensor<float> w0({2, 2});
  Tensor<float> b2({2}, {1.0f, 2.0f});
  Tensor<float> y2 = AffineForward(w0, b2, x);
  CHECK(y2[0] == 1.0f);
  CHECK(y2[1] == 2.0f);

  Tensor<float> bad({3}, {1.0f, 2.0f, 3.0f});
  CHECK_THROWS_AS(AffineForward(w, b, bad), ConfigError);
}

TEST_CASE("affine gradient matches finite differences") {
  Rng rng(11);
  ParamStore<double> store;
  Param<double>* w = store.CreateInit("w", {3, 4}, 3, &rng);
  Param<double>* b = store.CreateInit("b", {4}, 3, &rng);
  Tensor<double> x = RandomTensor({2, 3}, &rng);
  Tensor<double> probe = RandomTensor({2, 4}, &rng);

  auto loss = [&](bool grad) {
    Tensor<double> y = AffineForward(w->value, b->value, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.Numel(); ++i) acc += y[i] * y[i] * probe[i];
    if (grad) {
      Tensor<double> dy({2, 4});
      for (std::size_t i = 0; i < y.Numel(); ++i) {
        dy[i] = 2.0 * y[i] * probe[i];
      }
      AffineBackward(w->value, x, dy, &w->grad, &b->grad);
    }
    return acc;
  };
  GradCheckReport report = FiniteDiffCheck(&store, loss);
  INFO(report.Summary());
  CHECK(report.Pass(1e-4));
}

TEST_CASE("gated recurrent step zero case and determinism") {
  Rng rng(5);
  ParamStore<float> store;
  GruParams<float> p = GruParams<float>::Create(&store, "gru", 3, 4, &rng);
  for (std::size_t i = 0; i < store.NumParams(); ++i) {
    store.At(i).value.SetZero();
  }
  Tensor<float> state({4});
  Tensor<float> x({3});
  Tensor<float> h = GruStepForward(p, state, x);
  // z = 0.5, c = tanh(0) = 0, h' = 0.5*0 + 0.5*0 = 0 exactly.
  for (int i = 0; i < 4; ++i) CHECK(h[i] == 0.0f);

  Rng rng2(6);
  ParamStore<float> store2;
  GruParams<float> q = GruParams<float>::Create(&store2, "gru", 3, 4, &rng2);
  Tensor<float> s2({4}, {0.1f, -0.2f, 0.3f, 0.0f});
  Tensor<float> x2({3}, {1.0f, -1.0f, 0.5f});
  Tensor<float> h1 = GruStepForward(q, s2, x2);
  Tensor<float> h2 = GruStepForward(q, s2, x2);
  for (int i = 0; i < 4; ++i) CHECK(h1[i] == h2[i]);

  Tensor<float> nan_x({3}, {1.0f, std::nanf(""), 0.0f});
  CHECK_THROWS_AS(GruStepForward(q, s2, nan_x), NumericError);
}

TEST_CASE("gated recurrent step gradient matches finite differences") {
  Rng rng(21);
  ParamStore<double> store;
  GruParams<double> p = GruParams<double>::Create(&store, "gru", 3, 4, &rng);
  Tensor<double> state = RandomTensor({4}, &rng);
  Tensor<double> x = RandomTensor({3}, &rng);
  Tensor<double> probe = RandomTensor({4}, &rng);

  auto loss = [&](bool grad) {
    GruCache<double> cache;
    Tensor<double> h = GruStepForward(p, state, x, &cache);
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) acc += h[i] * probe[i];
    if (grad) {
      GruStepBackward(p, cache, probe);
    }
    return acc;
  };
  GradCheckReport report = FiniteDiffCheck(&store, loss);
  INFO(report.Summary());
  CHECK(report.Pass(1e-4));
}

TEST_CASE("log_softmax golden values and properties") {
  Tensor<double> two({2}, {0.0, 0.0});
  Tensor<double> out = LogSoftmax(two, -1);
  CHECK(out[0] == doctest::Approx(-0.6931471805599453).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(-0.6931471805599453).epsilon(1e-12));

  Tensor<double> peaked({2}, {1000.0, 0.0});
  Tensor<double> pout = LogSoftmax(peaked, 0);
  CHECK(pout[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(pout[1] == doctest::Approx(-1000.0).epsilon(1e-12));

  // Shift invariance and normalization over random shapes and axes.
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int na = rng.UniformInt(1, 3);
    std::vector<int> shape;
    for (int a = 0; a < na; ++a) shape.push_back(rng.UniformInt(1, 8));
    Tensor<double> x = RandomTensor(shape, &rng, 1e4);
    const int axis = rng.UniformInt(0, na - 1);
    Tensor<double> y = LogSoftmax(x, axis);
    Tensor<double> shifted = x;
    for (std::size_t i = 0; i < shifted.Numel(); ++i) shifted[i] += 123.5;
    Tensor<double> y2 = LogSoftmax(shifted, axis);
    for (std::size_t i = 0; i < y.Numel(); ++i) {
      CHECK(std::fabs(y[i] - y2[i]) < 1e-9);
    }
    // Sum exp along the axis.
    std::size_t inner = 1;
    for (int a = axis + 1; a < na; ++a) inner *= shape[a];
    std::size_t outer = 1;
    for (int a = 0; a < axis; ++a) outer *= shape[a];
    const int n = shape[axis];
    for (std::size_t ou = 0; ou < outer; ++ou) {
      for (std::size_t in = 0; in < inner; ++in) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
          total += std::exp(y[ou * n * inner + i * inner + in]);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("cross entropy from logits") {
  Tensor<double> logits({2}, {0.0, 0.0});
  Tensor<double> d;
  const double loss = CrossEntropyFromLogits(logits, 0, &d);
  CHECK(loss == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(d[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(CrossEntropyFromLogits(logits, 2), ConfigError);
}

TEST_CASE("log add") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(LogAdd(-inf, -1.5) == -1.5);
  CHECK(LogAdd(-1.5, -inf) == -1.5);
  CHECK(LogAdd(std::log(0.25), std::log(0.75)) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("adam hand-computed first step") {
  ParamStore<double> store;
  Param<double>* p = store.Create("p", {1});
  p->value[0] = 1.0;
  AdamOptions opts;
  opts.lr = 0.1;
  Adam<double> adam(&store, opts);
  p->grad[0] = 1.0;
  adam.Step();
  // m_hat = v_hat = 1 after bias correction, so the step is lr/(1+eps).
  const double expected = 1.0 - 0.1 / (1.0 + 1e-8);
  CHECK(p->value[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(p->grad[0] == 0.0);
}

TEST_CASE("adam freeze contract and zero-grad no-op") {
  Rng rng(3);
  ParamStore<float> store;
  Param<float>* free = store.CreateInit("head.w", {4}, 4, &rng);
  Param<float>* frozen = store.CreateInit("enc.w", {4}, 4, &rng);
  store.SetFrozenByPrefix("enc.");
  CHECK(frozen->frozen);
  CHECK(!free->frozen);

  const Tensor<float> frozen_before = frozen->value;
  const Tensor<float> free_before = free->value;
  Adam<float> adam(&store, AdamOptions{});

  // Zero gradients: nothing moves.
  adam.Step();
  for (int i = 0; i < 4; ++i) CHECK(free->value[i] == free_before[i]);

  // Nonzero gradients on both: frozen stays bit-identical.
  for (int step = 0; step < 5; ++step) {
    for (int i = 0; i < 4; ++i) {
      free->grad[i] = 0.3f;
      frozen->grad[i] = 0.3f;
    }
    adam.Step();
  }
  bool moved = false;
  for (int i = 0; i < 4; ++i) {
    if (free->value[i] != free_before[i]) moved = true;
    CHECK(std::memcmp(frozen->value.Data() + i, frozen_before.Data() + i,
                      sizeof(float)) == 0);
    CHECK(frozen->grad[i] == 0.0f);
  }
  CHECK(moved);
}

TEST_CASE("gradient clipping") {
  ParamStore<double> store;
  Param<double>* p = store.Create("p", {2});
  p->grad[0] = 3.0;
  p->grad[1] = 4.0;
  const double norm = ClipGradNorm(&store, 1.0);
  CHECK(norm == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(p->grad[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(p->grad[1] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("finite difference harness on exact linear model") {
  ParamStore<double> store;
  Param<double>* w = store.Create("w", {2});
  w->value[0] = 0.5;
  w->value[1] = -1.25;
  const double x0 = 2.0, x1 = 0.25, target = 1.0;
  auto loss = [&](bool grad) {
    const double pred = w->value[0] * x0 + w->value[1] * x1;
    const double diff = pred - target;
    if (grad) {
      w->grad[0] += 2.0 * diff * x0;
      w->grad[1] += 2.0 * diff * x1;
    }
    return diff * diff;
  };
  GradCheckReport report = FiniteDiffCheck(&store, loss);
  INFO(report.Summary());
  CHECK(report.max_rel_err < 1e-8);
}

TEST_CASE("finite difference harness flags corrupted gradient") {
  ParamStore<double> store;
  Param<double>* w = store.Create("good", {1});
  Param<double>* bad = store.Create("bad", {1});
  w->value[0] = 0.7;
  bad->value[0] = -0.4;
  auto loss = [&](bool grad) {
    const double v = w->value[0] * w->value[0] + bad->value[0] * bad->value[0];
    if (grad) {
      w->grad[0] += 2.0 * w->value[0];
      bad->grad[0] += 2.0 * bad->value[0] + 1.0;  // deliberate corruption
    }
    return v;
  };
  GradCheckReport report = FiniteDiffCheck(&store, loss);
  CHECK(!report.Pass(1e-4));
  CHECK(report.worst_param == "bad");
}

TEST_CASE("checkpoint round trip and validation") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "convturn_ckpt_test.bin")
          .string();
  Rng rng(9);
  ParamStore<float> store;
  store.CreateInit("enc.w", {3, 2}, 3, &rng);
  store.CreateInit("enc.b", {2}, 3, &rng);
  store.CreateInit("joint.w", {2, 5}, 2, &rng);
  SaveCheckpoint(store, path);

  ParamStore<float> loaded;
  Rng rng2(1234);
  loaded.CreateInit("enc.w", {3, 2}, 3, &rng2);
  loaded.CreateInit("enc.b", {2}, 3, &rng2);
  loaded.CreateInit("joint.w", {2, 5}, 2, &rng2);
  LoadCheckpoint(&loaded, path);
  for (std::size_t i = 0; i < store.NumParams(); ++i) {
    const Param<float>& a = store.At(i);
    const Param<float>& b = loaded.At(i);
    for (std::size_t k = 0; k < a.value.Numel(); ++k) {
      CHECK(a.value[k] == b.value[k]);
    }
  }
  std::vector<std::string> names = CheckpointParamNames(path);
  REQUIRE(names.size() == 3);
  CHECK(names[0] == "enc.w");
  CHECK(names[2] == "joint.w");

  // Name mismatch.
  ParamStore<float> other;
  other.Create("enc.w", {3, 2});
  other.Create("enc.bias", {2});
  other.Create("joint.w", {2, 5});
  CHECK_THROWS_AS(LoadCheckpoint(&other, path), IoError);

  // Shape mismatch.
  ParamStore<float> shaped;
  shaped.Create("enc.w", {3, 2});
  shaped.Create("enc.b", {2});
  shaped.Create("joint.w", {5, 2});
  CHECK_THROWS_AS(LoadCheckpoint(&shaped, path), IoError);

  // Truncation.
  {
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
    ParamStore<float> trunc;
    trunc.Create("enc.w", {3, 2});
    trunc.Create("enc.b", {2});
    trunc.Create("joint.w", {2, 5});
    CHECK_THROWS_AS(LoadCheckpoint(&trunc, path), IoError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("param store contracts") {
  ParamStore<float> store;
  store.Create("a", {2});
  CHECK_THROWS_AS(store.Create("a", {2}), ConfigError);
  CHECK(store.Find("missing") == nullptr);
  CHECK_THROWS_AS(store.Get("missing"), ConfigError);
  Rng rng(1);
  Param<float>* init = store.CreateInit("b", {100}, 25, &rng);
  const float bound = 1.0f / 5.0f;
  for (int i = 0; i < 100; ++i) {
    CHECK(std::fabs(init->value[i]) <= bound);
  }
}
