#include <cmath>
#include <fstream>

#include "doctest.h"
#include "nar/checkpoint.hpp"
#include "nar/optim.hpp"
#include "nar/tape.hpp"

using namespace nar;

TEST_CASE("clip scales by c/g above the bound and is identity below") {
  std::map<std::string, Tensor> grads;
  grads.emplace("a", Tensor({2}, {1.2, 1.6}));  // norm 2.0
  clip_by_global_norm(grads, 1.0);
  CHECK(grads.at("a")[0] == doctest::Approx(0.6));
  CHECK(grads.at("a")[1] == doctest::Approx(0.8));

  std::map<std::string, Tensor> small;
  small.emplace("a", Tensor({2}, {0.3, 0.4}));  // norm 0.5
  clip_by_global_norm(small, 1.0);
  CHECK(small.at("a")[0] == 0.3);
  CHECK(small.at("a")[1] == 0.4);
}

TEST_CASE("clip law: post-clip norm bounded, direction preserved") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::string, Tensor> grads;
    double dot = 0, na = 0, nb = 0;
    std::map<std::string, Tensor> orig;
    for (int t = 0; t < 3; ++t) {
      Tensor g({4});
      for (int i = 0; i < 4; ++i) g[i] = rng.uniform(-3.0, 3.0);
      orig.emplace("p" + std::to_string(t), g);
      grads.emplace("p" + std::to_string(t), g);
    }
    clip_by_global_norm(grads, 1.0);
    CHECK(global_norm(grads) <= 1.0 + 1e-12);
    for (auto& [name, g] : grads)
      for (int i = 0; i < 4; ++i) {
        dot += g[i] * orig.at(name)[i];
        na += g[i] * g[i];
        nb += orig.at(name)[i] * orig.at(name)[i];
      }
    const double cos = dot / std::sqrt(na * nb);
    CHECK(std::abs(cos - 1.0) < 1e-12);
  }
}

TEST_CASE("first adam step with unit gradient moves by about -lr") {
  ParamStore store;
  store.create("w", Tensor({3}, {1.0, 1.0, 1.0}));
  std::map<std::string, Tensor> grads;
  grads.emplace("w", Tensor::full({3}, 1.0));
  adam_step(store, grads, OptimConfig{});
  for (int i = 0; i < 3; ++i)
    CHECK(store.get("w").value[i] == doctest::Approx(1.0 - 0.001).epsilon(1e-7));
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  ParamStore store;
  store.create("w", Tensor({2}, {0.5, -0.5}));
  std::map<std::string, Tensor> grads;
  grads.emplace("w", Tensor({2}));
  adam_step(store, grads, OptimConfig{});
  CHECK(store.get("w").value[0] == 0.5);
  CHECK(store.get("w").value[1] == -0.5);
}

TEST_CASE("adam rejects non-finite gradients with the parameter name") {
  ParamStore store;
  store.create("broken", Tensor({1}, {0.0}));
  std::map<std::string, Tensor> grads;
  grads.emplace("broken", Tensor({1}, {std::nan("")}));
  try {
    adam_step(store, grads, OptimConfig{});
    FAIL("expected error");
  } catch (const NarError& e) {
    CHECK(std::string(e.what()).find("broken") != std::string::npos);
  }
}

TEST_CASE("adam is deterministic over repeated runs") {
  auto run = []() {
    Rng rng(99);
    ParamStore store;
    store.create("w", init_linear(4, 4, InitScheme::LECUN, rng));
    for (int step = 0; step < 100; ++step) {
      std::map<std::string, Tensor> grads;
      Tensor g({4, 4});
      for (int64_t i = 0; i < g.numel(); ++i) g[i] = rng.uniform(-1.0, 1.0);
      grads.emplace("w", g);
      clip_by_global_norm(grads, 1.0);
      adam_step(store, grads, OptimConfig{});
    }
    return store.get("w").value;
  };
  Tensor a = run();
  Tensor b = run();
  CHECK(a.vec() == b.vec());  // bit-identical
}

TEST_CASE("xavier uniform bound") {
  Rng rng(5);
  // fan_in=1, fan_out=128: b = sqrt(6/129)
  const double b = std::sqrt(6.0 / 129.0);
  Tensor w = init_linear(1, 128, InitScheme::XAVIER_UNIFORM, rng);
  for (int64_t i = 0; i < w.numel(); ++i) {
    CHECK(w[i] >= -b);
    CHECK(w[i] <= b);
  }
  // fan_in == fan_out: bound is sqrt(3/fan).
  Tensor w2 = init_linear(8, 8, InitScheme::XAVIER_UNIFORM, rng);
  const double b2 = std::sqrt(3.0 / 8.0);
  double mx = 0;
  for (int64_t i = 0; i < w2.numel(); ++i) mx = std::max(mx, std::abs(w2[i]));
  CHECK(mx <= b2);
}

TEST_CASE("lecun init std matches 1/sqrt(fan_in) within 5 percent") {
  Rng rng(17);
  Tensor w = init_linear(1, 100000, InitScheme::LECUN, rng);
  double m = 0;
  for (int64_t i = 0; i < w.numel(); ++i) m += w[i];
  m /= static_cast<double>(w.numel());
  double var = 0;
  for (int64_t i = 0; i < w.numel(); ++i) var += (w[i] - m) * (w[i] - m);
  var /= static_cast<double>(w.numel());
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(3);
  ParamStore store;
  store.create("enc/w", init_linear(3, 5, InitScheme::LECUN, rng));
  store.create("enc/b", Tensor({5}, {0.1, -0.2, 0.3, 0, 1e-300}));
  store.create("scalar", Tensor::scalar(3.14159));
  const std::string path = "/tmp/nar_test_ckpt.bin";
  save_checkpoint(store, path);
  ParamStore loaded = load_checkpoint(path);
  CHECK(loaded.all().size() == 3);
  CHECK(loaded.get("enc/w").value.vec() == store.get("enc/w").value.vec());
  CHECK(loaded.get("enc/b").value.vec() == store.get("enc/b").value.vec());
  CHECK(loaded.get("scalar").value[0] == 3.14159);
}

TEST_CASE("corrupted checkpoint reports the failing tensor") {
  Rng rng(3);
  ParamStore store;
  store.create("good", Tensor({2}, {1, 2}));
  store.create("victim", Tensor({64}));
  const std::string path = "/tmp/nar_test_ckpt_corrupt.bin";
  save_checkpoint(store, path);
  // Truncate the file inside the second tensor's data block.
  {
    std::string buf;
    {
      std::ifstream f(path, std::ios::binary);
      buf.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size() - 100));
  }
  try {
    load_checkpoint(path);
    FAIL("expected error");
  } catch (const NarError& e) {
    CHECK(std::string(e.what()).find("victim") != std::string::npos);
  }
}
