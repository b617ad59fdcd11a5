#include <cmath>

#include "doctest.h"
#include "nar/processor.hpp"
#include "nar/selfcheck.hpp"

using namespace nar;

namespace {

struct Fixture {
  ParamStore store;
  ProcessorConfig cfg;
  ProcessorParams params;

  Fixture(int hidden, bool gated, bool triplets, uint64_t seed) {
    cfg.hidden = hidden;
    cfg.gated = gated;
    cfg.triplets = triplets;
    Rng rng(seed);
    params = make_processor(store, cfg, rng);
  }
};

Tensor random_state(Shape s, Rng& rng) {
  Tensor t(s);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("single-node aggregation reduces over the node itself only") {
  Fixture fx(6, false, false, 1);
  Rng rng(2);
  Tape tp;
  LatentState st;
  st.x = tp.leaf(random_state({1, 1, 6}, rng));
  st.e = tp.leaf(random_state({1, 1, 1, 6}, rng));
  st.g = tp.leaf(random_state({1, 6}, rng));
  Val h_prev = tp.leaf(Tensor({1, 1, 6}));
  ProcessorStep step = mpnn_step(tp, fx.store, fx.params, fx.cfg, st, h_prev);
  CHECK(tp.value(step.node).shape() == Shape{1, 1, 6});
  CHECK(tp.value(step.node).all_finite());
}

TEST_CASE("initial gate value is sigmoid(-3) for zero inputs") {
  Fixture fx(16, true, false, 3);
  Tape tp;
  LatentState st;
  st.x = tp.leaf(Tensor({1, 4, 16}));
  st.e = tp.leaf(Tensor({1, 4, 4, 16}));
  st.g = tp.leaf(Tensor({1, 16}));
  Val h_prev = tp.leaf(Tensor({1, 4, 16}));
  ProcessorStep step = mpnn_step(tp, fx.store, fx.params, fx.cfg, st, h_prev);
  REQUIRE(step.gate.valid());
  const double expect = 1.0 / (1.0 + std::exp(3.0));
  CHECK(std::abs(expect - 0.047425873177566781) < 1e-15);
  const Tensor& g = tp.value(step.gate);
  for (int64_t i = 0; i < g.numel(); ++i) CHECK(std::abs(g[i] - expect) < 1e-12);
}

TEST_CASE("closed gate reproduces the previous embeddings exactly") {
  Fixture fx(8, true, true, 4);
  fx.cfg.force_gate_zero = true;
  Rng rng(5);
  Tape tp;
  LatentState st;
  st.x = tp.leaf(random_state({2, 3, 8}, rng));
  st.e = tp.leaf(random_state({2, 3, 3, 8}, rng));
  st.g = tp.leaf(random_state({2, 8}, rng));
  Tensor prev = random_state({2, 3, 8}, rng);
  Val h_prev = tp.leaf(prev);
  ProcessorStep step = mpnn_step(tp, fx.store, fx.params, fx.cfg, st, h_prev);
  CHECK(tp.value(step.node).vec() == prev.vec());  // bitwise
}

TEST_CASE("full step is node-permutation equivariant") {
  const int n = 5, h = 8;
  Fixture fx(h, true, true, 6);
  Rng rng(7);

  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_state({1, n, h}, rng);
    Tensor e = random_state({1, n, n, h}, rng);
    Tensor g = random_state({1, h}, rng);
    Tensor hp = random_state({1, n, h}, rng);

    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(rng.uniform_int(i + 1))]);

    auto run = [&](const Tensor& xi, const Tensor& ei, const Tensor& gi, const Tensor& hi) {
      Tape tp(false);
      LatentState st;
      st.x = tp.leaf(xi);
      st.e = tp.leaf(ei);
      st.g = tp.leaf(gi);
      ProcessorStep step = mpnn_step(tp, fx.store, fx.params, fx.cfg, st, tp.leaf(hi));
      return std::pair<Tensor, Tensor>(tp.value(step.node), tp.value(step.edge));
    };

    Tensor px({1, n, h}), pe({1, n, n, h}), php({1, n, h});
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < h; ++c) {
        px[static_cast<int64_t>(perm[static_cast<size_t>(i)]) * h + c] =
            x[static_cast<int64_t>(i) * h + c];
        php[static_cast<int64_t>(perm[static_cast<size_t>(i)]) * h + c] =
            hp[static_cast<int64_t>(i) * h + c];
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < h; ++c)
          pe[(static_cast<int64_t>(perm[static_cast<size_t>(i)]) * n +
              perm[static_cast<size_t>(j)]) *
                 h +
             c] = e[(static_cast<int64_t>(i) * n + j) * h + c];

    auto [node, edge] = run(x, e, g, hp);
    auto [pnode, pedge] = run(px, pe, g, php);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < h; ++c)
        CHECK(std::abs(pnode[static_cast<int64_t>(perm[static_cast<size_t>(i)]) * h + c] -
                       node[static_cast<int64_t>(i) * h + c]) < 1e-9);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < h; ++c)
          CHECK(std::abs(pedge[(static_cast<int64_t>(perm[static_cast<size_t>(i)]) * n +
                                perm[static_cast<size_t>(j)]) *
                                   h +
                               c] -
                         edge[(static_cast<int64_t>(i) * n + j) * h + c]) < 1e-9);
  }
}

TEST_CASE("triplet counting oracle: max over the middle node selects k = n-1") {
  // Plant h_k = k * ones and make the third node projection the identity;
  // every other projection is zero, so t_ijk = k and the max picks n-1.
  const int n = 3, h = 8;
  Fixture fx(h, false, true, 8);
  for (auto& [name, p] : fx.store.all())
    for (int64_t i = 0; i < p.value.numel(); ++i) p.value[i] = 0.0;
  // tri_n3: h -> 8 identity on the first 8 channels.
  Tensor& w3 = fx.store.get("proc/tri/n3/w").value;
  for (int c = 0; c < 8; ++c) w3[static_cast<int64_t>(c) * 8 + c] = 1.0;
  // tri_up: 8 -> h passthrough of channel 0.
  fx.store.get("proc/tri/up/w").value[0] = 1.0;

  Tape tp;
  Tensor hplanted({1, n, h});
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < h; ++c) hplanted[static_cast<int64_t>(k) * h + c] = k;
  Val hval = tp.leaf(hplanted);
  Val e = tp.leaf(Tensor({1, n, n, h}));
  Val g = tp.leaf(Tensor({1, h}));
  Val out = triplet_edge_latents(tp, fx.store, fx.params, fx.cfg, hval, e, g);
  const Tensor& ov = tp.value(out);
  CHECK(ov.shape() == Shape{1, n, n, h});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      CHECK(ov[(static_cast<int64_t>(i) * n + j) * h + 0] == doctest::Approx(n - 1.0));
      CHECK(ov[(static_cast<int64_t>(i) * n + j) * h + 1] == 0.0);
    }
}

TEST_CASE("triplet tensor has the documented intermediate shape") {
  const int n = 4, h = 8;
  Fixture fx(h, false, true, 9);
  Rng rng(10);
  Tape tp;
  Val hval = tp.leaf(random_state({1, n, h}, rng));
  Val e = tp.leaf(random_state({1, n, n, h}, rng));
  Val g = tp.leaf(random_state({1, h}, rng));
  const int before = tp.size();
  Val out = triplet_edge_latents(tp, fx.store, fx.params, fx.cfg, hval, e, g);
  CHECK(tp.value(out).shape() == Shape{1, n, n, h});
  // The broadcast-summed triplet tensor itself is (1, n, n, n, 8).
  bool found = false;
  for (int id = before; id < tp.size(); ++id)
    if (tp.value(Val{id}).shape() == Shape{1, n, n, n, 8}) found = true;
  CHECK(found);
}

TEST_CASE("layer norm statistics inside the step are standardised") {
  const int n = 6, h = 16;
  Fixture fx(h, false, false, 11);
  Rng rng(12);
  Tape tp;
  LatentState st;
  st.x = tp.leaf(random_state({2, n, h}, rng));
  st.e = tp.leaf(random_state({2, n, n, h}, rng));
  st.g = tp.leaf(random_state({2, h}, rng));
  Val h_prev = tp.leaf(random_state({2, n, h}, rng));
  ProcessorStep step = mpnn_step(tp, fx.store, fx.params, fx.cfg, st, h_prev);
  // With identity affine parameters the output is the normalised tensor.
  const Tensor& out = tp.value(step.node);
  for (int64_t row = 0; row < out.numel() / h; ++row) {
    double m = 0, v = 0;
    for (int c = 0; c < h; ++c) m += out[row * h + c];
    m /= h;
    for (int c = 0; c < h; ++c) {
      const double d = out[row * h + c] - m;
      v += d * d;
    }
    v /= h;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(v - 1.0) < 1e-6);
  }
}

TEST_CASE("gradients through one full gated triplet step pass finite differences") {
  const int n = 3, h = 4;
  Fixture fx(h, true, true, 13);
  Rng rng(14);
  Tensor x = random_state({1, n, h}, rng);
  Tensor e = random_state({1, n, n, h}, rng);
  Tensor g = random_state({1, h}, rng);
  Tensor hp = random_state({1, n, h}, rng);
  Rng wr(rng.next_u64());

  const double err = selfcheck::fd_max_rel_err(
      [&](Tape& tp, const std::vector<Val>& in) {
        LatentState st;
        st.x = in[0];
        st.e = in[1];
        st.g = in[2];
        ProcessorStep step = mpnn_step(tp, fx.store, fx.params, fx.cfg, st, in[3]);
        Rng wcopy = wr;
        Tensor wn(tp.value(step.node).shape());
        for (int64_t i = 0; i < wn.numel(); ++i) wn[i] = wcopy.uniform(0.2, 1.0);
        Tensor we(tp.value(step.edge).shape());
        for (int64_t i = 0; i < we.numel(); ++i) we[i] = wcopy.uniform(0.2, 1.0);
        return tp.add(tp.reduce_sum_all(tp.mul(step.node, tp.leaf(wn))),
                      tp.reduce_sum_all(tp.mul(step.edge, tp.leaf(we))));
      },
      {x, e, g, hp}, 1e-6);
  CHECK(err < 1e-3);
}
