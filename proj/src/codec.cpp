#include "nar/codec.hpp"

#include <algorithm>
#include <cmath>

namespace nar {

namespace {

// Trailing feed width per feature (see the header comment).
int feed_width(const FeatureSpec& f) {
  if (f.type == FType::CATEGORICAL) return f.num_categories;
  return 1;
}

bool is_node_pointer(const FeatureSpec& f) {
  return f.type == FType::POINTER && f.location == Location::NODE;
}

bool is_edge_pointer(const FeatureSpec& f) {
  return f.type == FType::POINTER && f.location == Location::EDGE;
}

}  // namespace

TaskCodec make_task_codec(ParamStore& store, const ProblemSpec& staged_spec,
                          const CodecConfig& cfg, Rng& rng) {
  TaskCodec codec;
  codec.prefix = "task/" + staged_spec.algorithm_id;
  codec.spec = staged_spec;
  codec.cfg = cfg;
  const int h = cfg.hidden;

  for (const auto& f : staged_spec.features) {
    const std::string ename = codec.prefix + "/enc/" + f.name;
    const std::string dname = codec.prefix + "/dec/" + f.name;

    if (f.stage == Stage::INPUT || f.stage == Stage::HINT) {
      // Scalar hints are re-encoded from the model's own unbounded
      // predictions each step; Xavier keeps their initial weights small.
      const bool xavier = cfg.xavier_scalar_hints && f.stage == Stage::HINT &&
                          f.type == FType::SCALAR;
      codec.encoders.emplace(
          f.name, make_linear(store, ename, feed_width(f), h,
                              xavier ? InitScheme::XAVIER_UNIFORM : InitScheme::LECUN, rng));
    }

    if (f.stage == Stage::HINT || f.stage == Stage::OUTPUT) {
      if (is_node_pointer(f) || is_edge_pointer(f)) {
        codec.pointer_u.emplace(f.name,
                                make_linear(store, dname + "/u", h, h, InitScheme::LECUN, rng));
        codec.pointer_v.emplace(f.name,
                                make_linear(store, dname + "/v", h, h, InitScheme::LECUN, rng));
      } else {
        codec.decoders.emplace(
            f.name, make_linear(store, dname, h, f.width(), InitScheme::LECUN, rng));
      }
    }
  }

  if (staged_spec.family == Family::SORTING && cfg.sinkhorn) {
    const FeatureSpec* out = nullptr;
    for (const auto& f : staged_spec.features)
      if (f.stage == Stage::OUTPUT && is_node_pointer(f)) out = &f;
    check(out != nullptr, "sorting spec lacks a pointer output");
    codec.permutation_output = true;
    codec.first_node_head = make_linear(store, codec.prefix + "/dec/" + out->name + "/first", h,
                                        1, InitScheme::LECUN, rng);
  }
  return codec;
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

LatentState encode_step(Tape& tp, ParamStore& store, const TaskCodec& codec, int batch, int n,
                        const FeedDict& input_feeds, const FeedDict& hint_feeds) {
  const int h = codec.cfg.hidden;
  LatentState st;
  st.x = tp.leaf(Tensor({batch, n, h}));
  st.e = tp.leaf(Tensor({batch, n, n, h}));
  st.g = tp.leaf(Tensor({batch, h}));

  auto feed_of = [&](const FeatureSpec& f) -> Val {
    const FeedDict& pool = f.stage == Stage::INPUT ? input_feeds : hint_feeds;
    auto it = pool.find(f.name);
    check(it != pool.end(), "missing feed for feature " + f.name);
    return it->second;
  };

  for (const auto& f : codec.spec.features) {
    if (f.stage == Stage::OUTPUT) continue;
    const Linear& enc = codec.encoders.at(f.name);
    Val feed = feed_of(f);
    Val emb = apply_linear(tp, store, enc, feed);
    if (f.location == Location::GRAPH) {
      st.g = tp.add(st.g, emb);
    } else if (f.location == Location::EDGE || is_node_pointer(f)) {
      // Node pointers enter as (B,n,n,1) one-hot rows, i.e. edge channels.
      st.e = tp.add(st.e, emb);
    } else {
      st.x = tp.add(st.x, emb);
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

std::map<std::string, DecodedFeature> decode_step(Tape& tp, ParamStore& store,
                                                  const TaskCodec& codec, Stage stage, Val h,
                                                  Val edge_latents, Val graph_latent) {
  std::map<std::string, DecodedFeature> out;
  const Shape hs = tp.value(h).shape();
  const int B = hs[0];
  const int n = hs[1];
  const int hidden = hs[2];

  for (const auto& f : codec.spec.features) {
    if (f.stage != stage) continue;
    DecodedFeature dec;
    if (is_node_pointer(f)) {
      // Pairwise scores s_ij = <U h_i, V h_j>.
      Val u = apply_linear(tp, store, codec.pointer_u.at(f.name), h);
      Val v = apply_linear(tp, store, codec.pointer_v.at(f.name), h);
      dec.main = tp.bmm(u, tp.transpose(v, {0, 2, 1}));  // (B,n,n)
      if (codec.permutation_output && f.stage == Stage::OUTPUT) {
        dec.first_logits = apply_linear(tp, store, *codec.first_node_head, h);  // (B,n,1)
        dec.has_first = true;
      }
    } else if (is_edge_pointer(f)) {
      // s[i,j,k] = <A e_ij, B h_k>.
      Val a = apply_linear(tp, store, codec.pointer_u.at(f.name), edge_latents);  // (B,n,n,h)
      Val b = apply_linear(tp, store, codec.pointer_v.at(f.name), h);             // (B,n,h)
      Val a2 = tp.reshape(a, {B, n * n, hidden});
      Val s = tp.bmm(a2, tp.transpose(b, {0, 2, 1}));  // (B,n*n,n)
      dec.main = tp.reshape(s, {B, n, n, n});
    } else {
      Val src = f.location == Location::EDGE ? edge_latents
                : f.location == Location::GRAPH ? graph_latent
                                                : h;
      dec.main = apply_linear(tp, store, codec.decoders.at(f.name), src);
    }
    out.emplace(f.name, dec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feedback transforms
// ---------------------------------------------------------------------------

namespace {

// Soft feed from decoded logits/scores, gradients flowing.
Val soft_feed(Tape& tp, const FeatureSpec& f, const DecodedFeature& dec) {
  const Shape s = tp.value(dec.main).shape();
  switch (f.type) {
    case FType::SCALAR:
      return dec.main;
    case FType::MASK:
      return tp.sigmoid(dec.main);
    case FType::MASK_ONE:
      // One distribution over the node axis.
      return tp.softmax(dec.main, 1);
    case FType::CATEGORICAL:
      return tp.softmax(dec.main, static_cast<int>(s.size()) - 1);
    case FType::POINTER:
      if (f.location == Location::NODE) {
        Val p = tp.softmax(dec.main, 2);  // (B,n,n) row distributions
        return tp.reshape(p, {s[0], s[1], s[2], 1});
      } else {
        // (B,n,n,n) scores over k -> mean over i of row distributions,
        // laid out as (B,k,j,1).
        Val p = tp.softmax(dec.main, 3);
        Val m = tp.reduce_sum(p, 1, /*keepdims=*/false);  // (B,j,k), summed over i
        Val mt = tp.transpose(tp.scale(m, 1.0 / s[1]), {0, 2, 1});
        return tp.reshape(mt, {s[0], s[3], s[2], 1});
      }
  }
  fail("bad feature type");
}

}  // namespace

Tensor hard_decode(const FeatureSpec& f, const Tensor& decoded, int n) {
  const Shape& s = decoded.shape();
  const int B = s[0];
  switch (f.type) {
    case FType::SCALAR:
      return decoded;
    case FType::MASK: {
      Tensor out(s);
      for (int64_t i = 0; i < decoded.numel(); ++i) out[i] = decoded[i] > 0.0 ? 1.0 : 0.0;
      return out;
    }
    case FType::MASK_ONE: {
      Tensor out(s);
      for (int b = 0; b < B; ++b) {
        int best = 0;
        for (int i = 1; i < n; ++i)
          if (decoded[static_cast<int64_t>(b) * n + i] > decoded[static_cast<int64_t>(b) * n + best])
            best = i;
        out[static_cast<int64_t>(b) * n + best] = 1.0;
      }
      return out;
    }
    case FType::CATEGORICAL: {
      const int k = s.back();
      const int64_t cells = decoded.numel() / k;
      Tensor out(s);
      for (int64_t c = 0; c < cells; ++c) {
        int best = 0;
        for (int i = 1; i < k; ++i)
          if (decoded[c * k + i] > decoded[c * k + best]) best = i;
        out[c * k + best] = 1.0;
      }
      return out;
    }
    case FType::POINTER: {
      if (f.location == Location::NODE) {
        // (B,n,n) scores -> (B,n,1) target indices.
        Tensor out({B, n, 1});
        for (int b = 0; b < B; ++b)
          for (int i = 0; i < n; ++i) {
            const double* row = decoded.data() + (static_cast<int64_t>(b) * n + i) * n;
            int best = 0;
            for (int j = 1; j < n; ++j)
              if (row[j] > row[best]) best = j;
            out[static_cast<int64_t>(b) * n + i] = best;
          }
        return out;
      }
      // (B,n,n,n) scores -> (B,n,n,1) target indices.
      Tensor out({B, n, n, 1});
      const int64_t cells = static_cast<int64_t>(B) * n * n;
      for (int64_t c = 0; c < cells; ++c) {
        const double* row = decoded.data() + c * n;
        int best = 0;
        for (int j = 1; j < n; ++j)
          if (row[j] > row[best]) best = j;
        out[c] = best;
      }
      return out;
    }
  }
  fail("bad feature type");
}

Tensor truth_to_feed(const FeatureSpec& f, const Tensor& truth, int n) {
  if (f.type != FType::POINTER) return truth;
  if (f.location == Location::NODE) {
    // (n,1) indices -> (n,n,1) one-hot rows.
    Tensor out({n, n, 1});
    for (int i = 0; i < n; ++i) {
      const int j = static_cast<int>(std::llround(truth[i]));
      out[static_cast<int64_t>(i) * n + j] = 1.0;
    }
    return out;
  }
  // (n,n,1) indices -> (n,n,1) aggregated mass q[k,j].
  Tensor out({n, n, 1});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int k = static_cast<int>(std::llround(truth[static_cast<int64_t>(i) * n + j]));
      out[static_cast<int64_t>(k) * n + j] += 1.0 / n;
    }
  return out;
}

Val prediction_to_feed(Tape& tp, const FeatureSpec& f, const DecodedFeature& dec,
                       FeedbackMode mode) {
  if (mode == FeedbackMode::SOFT) return soft_feed(tp, f, dec);

  // HARD: collapse to the ground-truth format without gradients, then map to
  // feed format.
  const Tensor& raw = tp.value(dec.main);
  const Shape& s = raw.shape();
  const int B = s[0];
  const int n = s.size() >= 2 ? s[1] : 1;
  Tensor hard = hard_decode(f, raw, n);
  if (f.type == FType::POINTER) {
    // Stack per-sample feeds.
    const int64_t cell = hard.numel() / B;
    Shape one(s.begin() + 1, s.end());
    Shape feed_shape;
    Tensor out;
    for (int b = 0; b < B; ++b) {
      Tensor slice(f.location == Location::NODE ? Shape{n, 1} : Shape{n, n, 1});
      std::copy(hard.data() + b * cell, hard.data() + (b + 1) * cell, slice.data());
      Tensor feed = truth_to_feed(f, slice, n);
      if (b == 0) {
        feed_shape = feed.shape();
        feed_shape.insert(feed_shape.begin(), B);
        out = Tensor(feed_shape);
      }
      std::copy(feed.data(), feed.data() + feed.numel(), out.data() + b * feed.numel());
    }
    return tp.leaf(out);
  }
  return tp.leaf(hard);
}

Val teacher_force(Tape& tp, const FeatureSpec& f, Val pred_feed, Val truth_feed,
                  const std::vector<char>& coins) {
  (void)f;
  const Shape& s = tp.value(pred_feed).shape();
  check(tp.value(truth_feed).shape() == s, "teacher_force shape mismatch");
  check(static_cast<int>(coins.size()) == s[0], "teacher_force coin count mismatch");
  bool any = false, all = true;
  for (char c : coins) {
    any = any || c;
    all = all && c;
  }
  if (!any) return pred_feed;
  if (all) return truth_feed;
  Shape mask_shape(s.size(), 1);
  mask_shape[0] = s[0];
  Tensor m(mask_shape);
  for (size_t b = 0; b < coins.size(); ++b) m[static_cast<int64_t>(b)] = coins[b] ? 1.0 : 0.0;
  Val mv = tp.leaf(m);
  Val inv = tp.leaf([&] {
    Tensor t(mask_shape);
    for (size_t b = 0; b < coins.size(); ++b) t[static_cast<int64_t>(b)] = coins[b] ? 0.0 : 1.0;
    return t;
  }());
  return tp.add(tp.mul(truth_feed, mv), tp.mul(pred_feed, inv));
}

// ---------------------------------------------------------------------------
// Sinkhorn
// ---------------------------------------------------------------------------

Val sinkhorn(Tape& tp, Val scores, const SinkhornOptions& opt, Rng* rng) {
  const Shape s = tp.value(scores).shape();
  check(s.size() == 3 && s[1] == s[2], "sinkhorn expects (B,n,n) scores");
  check(opt.temperature > 0.0, "sinkhorn temperature must be positive");
  const int B = s[0], n = s[1];

  Val y = scores;
  if (opt.mask_diagonal) {
    // No node points to itself: diagonal forced to a large negative value
    // before the temperature division so exp() underflows to exactly zero.
    Tensor off(s), diag(s);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const int64_t e = (static_cast<int64_t>(b) * n + i) * n + j;
          off[e] = i == j ? 0.0 : 1.0;
          diag[e] = i == j ? -1e9 : 0.0;
        }
    y = tp.add(tp.mul(y, tp.leaf(off)), tp.leaf(diag));
  }
  if (opt.gumbel) {
    check(rng != nullptr, "gumbel noise requires an rng");
    Tensor noise(s);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double g = rng->gumbel() * opt.gumbel_scale;
          noise[(static_cast<int64_t>(b) * n + i) * n + j] =
              (opt.mask_diagonal && i == j) ? 0.0 : g;
        }
    y = tp.add(y, tp.leaf(noise));
  }

  Val m = tp.exp(tp.scale(y, 1.0 / opt.temperature));
  for (int l = 0; l < opt.iterations; ++l) {
    Val rows = tp.reduce_sum(m, 2, /*keepdims=*/true);
    for (int64_t i = 0; i < tp.value(rows).numel(); ++i)
      check(tp.value(rows)[i] > 0.0, "sinkhorn row sum underflowed to zero");
    m = tp.div(m, rows);
    Val cols = tp.reduce_sum(m, 1, /*keepdims=*/true);
    for (int64_t i = 0; i < tp.value(cols).numel(); ++i)
      check(tp.value(cols)[i] > 0.0, "sinkhorn column sum underflowed to zero");
    m = tp.div(m, cols);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Permutation representation
// ---------------------------------------------------------------------------

void pointers_to_permutation(const std::vector<int>& pred, Tensor* perm, int* first) {
  const int n = static_cast<int>(pred.size());
  int first_node = -1;
  std::vector<char> is_target(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    check(pred[static_cast<size_t>(i)] >= 0 && pred[static_cast<size_t>(i)] < n,
          "pointer out of range");
    if (pred[static_cast<size_t>(i)] == i) {
      check(first_node < 0, "pointer chain has more than one self-pointer");
      first_node = i;
    } else {
      is_target[static_cast<size_t>(pred[static_cast<size_t>(i)])] = 1;
    }
  }
  check(first_node >= 0, "pointer chain has no self-pointer");
  // The last node in sorted order is nobody's predecessor.
  int last = -1;
  for (int i = 0; i < n; ++i)
    if (!is_target[static_cast<size_t>(i)] && i != first_node) {
      check(last < 0, "pointer chain is not a single chain");
      last = i;
    }
  if (last < 0) last = first_node;  // n == 1

  *perm = Tensor({n, n});
  for (int i = 0; i < n; ++i) {
    const int target = i == first_node ? last : pred[static_cast<size_t>(i)];
    (*perm)[static_cast<int64_t>(i) * n + target] = 1.0;
  }
  *first = first_node;
}

bool rows_form_permutation(const std::vector<int>& row_targets) {
  std::vector<char> seen(row_targets.size(), 0);
  for (int t : row_targets) {
    if (t < 0 || t >= static_cast<int>(row_targets.size())) return false;
    if (seen[static_cast<size_t>(t)]) return false;
    seen[static_cast<size_t>(t)] = 1;
  }
  return true;
}

std::vector<int> permutation_rewire(const std::vector<int>& row_targets, int first) {
  check(rows_form_permutation(row_targets), "row targets do not form a permutation");
  check(first >= 0 && first < static_cast<int>(row_targets.size()), "first node out of range");
  std::vector<int> pred = row_targets;
  pred[static_cast<size_t>(first)] = first;
  return pred;
}

}  // namespace nar
