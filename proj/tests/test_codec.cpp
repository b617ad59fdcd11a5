#include <cmath>

#include "doctest.h"
#include "nar/codec.hpp"
#include "nar/selfcheck.hpp"

using namespace nar;

namespace {

TaskCodec minimum_codec(ParamStore& store, int hidden, uint64_t seed) {
  Rng rng(seed);
  CodecConfig cfg;
  cfg.hidden = hidden;
  return make_task_codec(store, problem_spec(AlgorithmId::MINIMUM), cfg, rng);
}

}  // namespace

TEST_CASE("all-zero encoder weights give a zero latent state") {
  ParamStore store;
  TaskCodec codec = minimum_codec(store, 8, 1);
  for (auto& [name, p] : store.all())
    for (int64_t i = 0; i < p.value.numel(); ++i) p.value[i] = 0.0;

  Tape tp;
  FeedDict in, hints;
  in.emplace("pos", tp.leaf(Tensor({2, 3, 1}, {0.1, 0.2, 0.3, 0.1, 0.2, 0.3})));
  in.emplace("key", tp.leaf(Tensor::full({2, 3, 1}, 0.5)));
  hints.emplace("pred_h", tp.leaf(Tensor::full({2, 3, 3, 1}, 0.3)));
  hints.emplace("min_h", tp.leaf(Tensor::full({2, 3, 1}, 0.5)));
  hints.emplace("i", tp.leaf(Tensor::full({2, 3, 1}, 0.5)));
  LatentState st = encode_step(tp, store, codec, 2, 3, in, hints);
  CHECK(sum_all(tp.value(st.x)) == 0.0);
  CHECK(sum_all(tp.value(st.e)) == 0.0);
  CHECK(sum_all(tp.value(st.g)) == 0.0);
}

TEST_CASE("encoding features separately then summing equals joint encoding") {
  ParamStore store;
  TaskCodec codec = minimum_codec(store, 16, 2);
  Rng rng(5);
  auto rnd = [&](Shape s) {
    Tensor t(s);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform();
    return t;
  };
  Tensor pos = rnd({1, 4, 1}), key = rnd({1, 4, 1});
  Tensor pred = rnd({1, 4, 4, 1}), min_h = rnd({1, 4, 1}), i_h = rnd({1, 4, 1});

  auto encode = [&](bool zero_key) {
    Tape tp;
    FeedDict in, hints;
    in.emplace("pos", tp.leaf(pos));
    in.emplace("key", tp.leaf(zero_key ? Tensor({1, 4, 1}) : key));
    hints.emplace("pred_h", tp.leaf(pred));
    hints.emplace("min_h", tp.leaf(min_h));
    hints.emplace("i", tp.leaf(i_h));
    LatentState st = encode_step(tp, store, codec, 1, 4, in, hints);
    return tp.value(st.x);
  };

  // Zero the key-encoder bias contribution trick: compare joint vs
  // (zero-key) + key-only by linearity of the sum of encoders.
  Tensor joint = encode(false);
  Tensor without_key = encode(true);
  Tape tp;
  Val key_emb = apply_linear(tp, store, codec.encoders.at("key"), tp.leaf(key));
  // Subtracting the zero-input encoding removes the shared bias term.
  Val zero_emb = apply_linear(tp, store, codec.encoders.at("key"), tp.leaf(Tensor({1, 4, 1})));
  Tensor key_only = binary_bcast(tp.value(key_emb), tp.value(zero_emb), BinaryOp::SUB);
  for (int64_t i = 0; i < joint.numel(); ++i)
    CHECK(joint[i] - without_key[i] == doctest::Approx(key_only[i]).epsilon(1e-12));
}

TEST_CASE("encoders are node-permutation equivariant") {
  ParamStore store;
  TaskCodec codec = minimum_codec(store, 12, 3);
  Rng rng(9);
  const int n = 5;
  Tensor pos({1, n, 1}), key({1, n, 1}), pred({1, n, n, 1}), min_h({1, n, 1}), i_h({1, n, 1});
  for (int64_t i = 0; i < pos.numel(); ++i) pos[i] = rng.uniform();
  for (int64_t i = 0; i < key.numel(); ++i) key[i] = rng.uniform();
  for (int64_t i = 0; i < pred.numel(); ++i) pred[i] = rng.uniform();
  for (int64_t i = 0; i < min_h.numel(); ++i) min_h[i] = rng.uniform();
  for (int64_t i = 0; i < i_h.numel(); ++i) i_h[i] = rng.uniform();

  std::vector<int> perm = {3, 0, 4, 1, 2};
  auto permute_node = [&](const Tensor& t) {
    Tensor out(t.shape());
    for (int i = 0; i < n; ++i) out[perm[static_cast<size_t>(i)]] = t[i];
    return out;
  };
  auto permute_edge = [&](const Tensor& t) {
    Tensor out(t.shape());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out[static_cast<int64_t>(perm[static_cast<size_t>(i)]) * n +
            perm[static_cast<size_t>(j)]] = t[static_cast<int64_t>(i) * n + j];
    return out;
  };

  auto encode = [&](const Tensor& p, const Tensor& k, const Tensor& pr, const Tensor& mh,
                    const Tensor& ih) {
    Tape tp;
    FeedDict in, hints;
    in.emplace("pos", tp.leaf(p));
    in.emplace("key", tp.leaf(k));
    hints.emplace("pred_h", tp.leaf(pr));
    hints.emplace("min_h", tp.leaf(mh));
    hints.emplace("i", tp.leaf(ih));
    LatentState st = encode_step(tp, store, codec, 1, n, in, hints);
    return std::pair<Tensor, Tensor>(tp.value(st.x), tp.value(st.e));
  };

  auto [x, e] = encode(pos, key, pred, min_h, i_h);
  auto [xp, ep] = encode(permute_node(pos), permute_node(key), permute_edge(pred),
                         permute_node(min_h), permute_node(i_h));
  const int h = 12;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < h; ++c)
      CHECK(xp[(static_cast<int64_t>(perm[static_cast<size_t>(i)])) * h + c] ==
            doctest::Approx(x[static_cast<int64_t>(i) * h + c]).epsilon(1e-12));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < h; ++c)
        CHECK(ep[((static_cast<int64_t>(perm[static_cast<size_t>(i)])) * n +
                  perm[static_cast<size_t>(j)]) *
                     h +
                 c] == doctest::Approx(e[(static_cast<int64_t>(i) * n + j) * h + c])
                           .epsilon(1e-12));
}

TEST_CASE("pointer decode: argmax row and softmax normalisation") {
  Tape tp;
  FeatureSpec f;
  f.name = "p";
  f.stage = Stage::HINT;
  f.location = Location::NODE;
  f.type = FType::POINTER;
  Tensor scores({1, 3, 3}, {5, 1, 1, 0, 2, 0, 0, 0, 3});
  Tensor hard = hard_decode(f, scores, 3);
  CHECK(hard[0] == 0.0);
  CHECK(hard[1] == 1.0);
  CHECK(hard[2] == 2.0);

  DecodedFeature dec;
  dec.main = tp.leaf(scores);
  Val soft = prediction_to_feed(tp, f, dec, FeedbackMode::SOFT);
  const Tensor& sv = tp.value(soft);
  for (int i = 0; i < 3; ++i) {
    double row = 0;
    for (int j = 0; j < 3; ++j) row += sv[(static_cast<int64_t>(0) * 3 + i) * 3 + j];
    CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("planted-channel fixture: decode recovers what encode wrote") {
  // Encoder weights copy a mask hint into latent channel 0; a decoder that
  // reads channel 0 reproduces the planted values.
  ParamStore store;
  TaskCodec codec = minimum_codec(store, 8, 4);
  for (auto& [name, p] : store.all())
    for (int64_t i = 0; i < p.value.numel(); ++i) p.value[i] = 0.0;
  store.get("task/minimum/enc/min_h/w").value[0] = 1.0;  // 1x8 weight, channel 0
  store.get("task/minimum/dec/min_h/w").value[0] = 1.0;  // 8x1 weight, channel 0

  Tape tp;
  FeedDict in, hints;
  in.emplace("pos", tp.leaf(Tensor({1, 4, 1})));
  in.emplace("key", tp.leaf(Tensor({1, 4, 1})));
  Tensor planted({1, 4, 1}, {0.0, 1.0, 0.0, 0.25});
  hints.emplace("pred_h", tp.leaf(Tensor({1, 4, 4, 1})));
  hints.emplace("min_h", tp.leaf(planted));
  hints.emplace("i", tp.leaf(Tensor({1, 4, 1})));
  LatentState st = encode_step(tp, store, codec, 1, 4, in, hints);
  auto dec = decode_step(tp, store, codec, Stage::HINT, st.x, st.e, st.g);
  const Tensor& got = tp.value(dec.at("min_h").main);
  for (int64_t i = 0; i < planted.numel(); ++i) CHECK(got[i] == doctest::Approx(planted[i]));
}

TEST_CASE("soft hint feedback values and gradient flow") {
  FeatureSpec mask;
  mask.name = "m";
  mask.stage = Stage::HINT;
  mask.location = Location::NODE;
  mask.type = FType::MASK;

  // sigmoid(0) = 0.5
  {
    Tape tp;
    DecodedFeature dec;
    dec.main = tp.leaf(Tensor({1, 2, 1}), true);
    Val feed = prediction_to_feed(tp, mask, dec, FeedbackMode::SOFT);
    CHECK(tp.value(feed)[0] == 0.5);
    Val loss = tp.reduce_sum_all(feed);
    tp.backward(loss);
    CHECK(tp.grad(dec.main)[0] != 0.0);  // gradients flow in soft mode
  }
  // Hard mode: thresholded and detached.
  {
    Tape tp;
    DecodedFeature dec;
    dec.main = tp.leaf(Tensor({1, 2, 1}, {0.3, -0.3}), true);
    Val feed = prediction_to_feed(tp, mask, dec, FeedbackMode::HARD);
    CHECK(tp.value(feed)[0] == 1.0);
    CHECK(tp.value(feed)[1] == 0.0);
    Val loss = tp.reduce_sum_all(feed);
    tp.backward(loss);
    CHECK(tp.grad(dec.main)[0] == 0.0);  // no gradient in hard mode
  }
}

TEST_CASE("teacher forcing replaces predictions with ground truth") {
  Tape tp;
  FeatureSpec f;
  f.type = FType::SCALAR;
  Val pred = tp.leaf(Tensor({2, 2, 1}, {1, 1, 1, 1}));
  Val truth = tp.leaf(Tensor({2, 2, 1}, {7, 7, 9, 9}));
  Val fed = teacher_force(tp, f, pred, truth, {1, 0});
  CHECK(tp.value(fed)[0] == 7.0);
  CHECK(tp.value(fed)[2] == 1.0);
  Val all = teacher_force(tp, f, pred, truth, {1, 1});
  CHECK(tp.value(all).vec() == tp.value(truth).vec());
}

TEST_CASE("sinkhorn fixed points") {
  // n=2, zero off-diagonal scores, masked diagonal: the anti-diagonal
  // permutation is a fixed point.
  {
    Tape tp;
    SinkhornOptions opt;
    opt.iterations = 10;
    Val y = tp.leaf(Tensor({1, 2, 2}));
    Val s = sinkhorn(tp, y, opt, nullptr);
    const Tensor& sv = tp.value(s);
    CHECK(sv[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sv[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sv[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sv[3] == doctest::Approx(0.0).epsilon(1e-12));
  }
  // n=3, all-zero scores, no mask: the uniform 1/3 matrix.
  {
    Tape tp;
    SinkhornOptions opt;
    opt.iterations = 5;
    opt.mask_diagonal = false;
    Val y = tp.leaf(Tensor({1, 3, 3}));
    Val s = sinkhorn(tp, y, opt, nullptr);
    for (int64_t i = 0; i < 9; ++i)
      CHECK(tp.value(s)[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("sinkhorn convergence: effective logits in [-5,5] normalise within 1e-3") {
  // The operator applied to scores whose temperature-divided logits span
  // [-5, 5]; 60 iterations bring both marginals within tolerance.
  Rng rng(77);
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = 8;
    Tensor y({1, n, n});
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = rng.uniform(-5.0, 5.0);
    Tape tp(false);
    SinkhornOptions opt;
    opt.iterations = 60;
    opt.temperature = 1.0;
    opt.mask_diagonal = false;
    Val s = sinkhorn(tp, tp.leaf(y), opt, nullptr);
    const Tensor& sv = tp.value(s);
    double worst = 0;
    for (int i = 0; i < n; ++i) {
      double row = 0, colsum = 0;
      for (int j = 0; j < n; ++j) {
        row += sv[static_cast<int64_t>(i) * n + j];
        colsum += sv[static_cast<int64_t>(j) * n + i];
      }
      worst = std::max({worst, std::abs(row - 1.0), std::abs(colsum - 1.0)});
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("sinkhorn argmax recovers a margin-bearing permutation") {
  // Scores with an implanted assignment margin (what a trained decoder
  // emits): the row-argmax after 60 iterations at tau=0.1 is always the
  // planted permutation.
  Rng rng(78);
  int valid = 0, recovered = 0;
  const int trials = 200;
  const int n = 8;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<int> sigma(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) sigma[static_cast<size_t>(i)] = i;
    bool has_fixed = true;
    while (has_fixed) {
      for (int i = n - 1; i > 0; --i)
        std::swap(sigma[static_cast<size_t>(i)],
                  sigma[static_cast<size_t>(rng.uniform_int(i + 1))]);
      has_fixed = false;
      for (int i = 0; i < n; ++i)
        if (sigma[static_cast<size_t>(i)] == i) has_fixed = true;
    }
    Tensor y({1, n, n});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        y[static_cast<int64_t>(i) * n + j] =
            2.0 * (sigma[static_cast<size_t>(i)] == j ? 1.0 : -1.0) + rng.uniform(-1.0, 1.0);
    Tape tp(false);
    SinkhornOptions opt;
    opt.iterations = 60;
    Val s = sinkhorn(tp, tp.leaf(y), opt, nullptr);
    const Tensor& sv = tp.value(s);
    double worst = 0;
    for (int i = 0; i < n; ++i) {
      double row = 0, colsum = 0;
      for (int j = 0; j < n; ++j) {
        row += sv[static_cast<int64_t>(i) * n + j];
        colsum += sv[static_cast<int64_t>(j) * n + i];
      }
      worst = std::max({worst, std::abs(row - 1.0), std::abs(colsum - 1.0)});
    }
    CHECK(worst < 1e-3);
    std::vector<int> targets;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      for (int j = 1; j < n; ++j)
        if (sv[static_cast<int64_t>(i) * n + j] > sv[static_cast<int64_t>(i) * n + best]) best = j;
      targets.push_back(best);
    }
    valid += rows_form_permutation(targets) ? 1 : 0;
    recovered += targets == sigma ? 1 : 0;
  }
  CHECK(valid == trials);
  CHECK(recovered == trials);
}

TEST_CASE("sinkhorn gradients pass finite differences at l=10") {
  Rng rng(31);
  Tensor y({1, 4, 4});
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = rng.uniform(-1.5, 1.5);
  Rng wr(rng.next_u64());
  const double err = selfcheck::fd_max_rel_err(
      [&wr](Tape& tp, const std::vector<Val>& in) {
        SinkhornOptions opt;
        opt.iterations = 10;
        Val s = sinkhorn(tp, in[0], opt, nullptr);
        Tensor w({1, 4, 4});
        Rng wcopy = wr;
        for (int64_t i = 0; i < w.numel(); ++i) w[i] = wcopy.uniform(0.2, 1.0);
        return tp.reduce_sum_all(tp.mul(s, tp.leaf(w)));
      },
      {y}, 1e-6);
  CHECK(err < 1e-3);
}

TEST_CASE("permutation rewiring round trip") {
  // Sorted order nodes 1,2,0 -> pointers [2,1,1]; permutation closes the
  // cycle by pointing the first node (1) at the last (0).
  Tensor perm;
  int first = -1;
  pointers_to_permutation({2, 1, 1}, &perm, &first);
  CHECK(first == 1);
  CHECK(perm.at({1, 0}) == 1.0);  // first -> last
  CHECK(perm.at({2, 1}) == 1.0);
  CHECK(perm.at({0, 2}) == 1.0);

  // Inverse rewiring restores the pointers.
  std::vector<int> targets = {2, 0, 1};  // row argmaxes of perm
  CHECK(permutation_rewire(targets, 1) == std::vector<int>{2, 1, 1});

  // Singleton.
  Tensor p1;
  int f1 = -1;
  pointers_to_permutation({0}, &p1, &f1);
  CHECK(f1 == 0);
  CHECK(p1[0] == 1.0);
  CHECK(permutation_rewire({0}, 0) == std::vector<int>{0});
}

TEST_CASE("permutation round trip over random permutations") {
  Rng rng(123);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(10));
    // Random sorted order -> pointers.
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(rng.uniform_int(i + 1))]);
    std::vector<int> pred(static_cast<size_t>(n));
    for (int p = 0; p < n; ++p)
      pred[static_cast<size_t>(order[static_cast<size_t>(p)])] =
          p == 0 ? order[0] : order[static_cast<size_t>(p - 1)];

    Tensor perm;
    int first = -1;
    pointers_to_permutation(pred, &perm, &first);
    std::vector<int> targets(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j)
        if (perm[static_cast<int64_t>(i) * n + j] > 0.5) targets[static_cast<size_t>(i)] = j;
    }
    REQUIRE(rows_form_permutation(targets));
    CHECK(permutation_rewire(targets, first) == pred);
  }
}

TEST_CASE("invalid row targets are rejected") {
  CHECK(!rows_form_permutation({0, 0, 1}));
  CHECK_THROWS_AS(permutation_rewire({0, 0, 1}, 0), NarError);
}
