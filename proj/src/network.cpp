#include "nar/network.hpp"

#include <algorithm>
#include <cmath>

namespace nar {

TaskModel make_task_model(ParamStore& store, AlgorithmId id, const ModelConfig& cfg,
                          const std::vector<Trajectory>& probe_traces, bool static_hint_elim,
                          Rng& rng) {
  TaskModel tm;
  if (static_hint_elim) {
    tm.staged = static_hint_to_input(problem_spec(id), probe_traces);
  } else {
    tm.staged.spec = problem_spec(id);
  }
  tm.codec = make_task_codec(store, tm.staged.spec, cfg.codec, rng);
  return tm;
}

// ---------------------------------------------------------------------------
// Batch preparation
// ---------------------------------------------------------------------------

namespace {

Tensor stack(const std::vector<Tensor>& parts) {
  check(!parts.empty(), "stack of nothing");
  Shape s = parts[0].shape();
  s.insert(s.begin(), static_cast<int>(parts.size()));
  Tensor out(s);
  const int64_t stride = parts[0].numel();
  for (size_t i = 0; i < parts.size(); ++i) {
    check(parts[i].numel() == stride, "stack shape mismatch");
    std::copy(parts[i].data(), parts[i].data() + stride, out.data() + i * stride);
  }
  return out;
}

int pointer_output_name(const ProblemSpec& spec, std::string* name) {
  for (const auto& f : spec.features)
    if (f.stage == Stage::OUTPUT && f.type == FType::POINTER && f.location == Location::NODE) {
      *name = f.name;
      return 1;
    }
  return 0;
}

}  // namespace

Batch make_batch(const TaskModel& task, const std::vector<Trajectory>& trajs, bool for_eval,
                 bool with_truth_feeds) {
  check(!trajs.empty(), "empty batch");
  Batch b;
  b.n = trajs[0].n;
  b.batch = static_cast<int>(trajs.size());
  b.steps = 1;
  for (const auto& t : trajs) {
    check(t.n == b.n, "batch mixes node counts");
    b.num_hint_steps.push_back(t.num_steps);
    b.steps = std::max(b.steps, std::max(t.num_steps - 1, 1));
  }

  const ProblemSpec& spec = task.staged.spec;

  for (const auto& f : spec.features) {
    if (f.stage == Stage::INPUT) {
      std::vector<Tensor> feeds;
      for (const auto& t : trajs) feeds.push_back(truth_to_feed(f, t.input(f.name), b.n));
      b.input_feeds.emplace(f.name, stack(feeds));
    } else if (f.stage == Stage::HINT) {
      std::vector<Tensor> init;
      for (const auto& t : trajs) init.push_back(truth_to_feed(f, t.hint_slice(f.name, 0), b.n));
      b.initial_hints.emplace(f.name, stack(init));
      if (!for_eval) {
        std::vector<Tensor> targets, truth_feeds;
        std::vector<Tensor> per_step;
        for (int s = 1; s <= b.steps; ++s) {
          std::vector<Tensor> slices, feed_slices;
          for (const auto& t : trajs) {
            const int at = std::min(s, std::max(t.num_steps - 1, 0));
            Tensor slice = t.hint_slice(f.name, at);
            if (with_truth_feeds) feed_slices.push_back(truth_to_feed(f, slice, b.n));
            slices.push_back(std::move(slice));
          }
          per_step.push_back(stack(slices));
          if (with_truth_feeds) truth_feeds.push_back(stack(feed_slices));
        }
        b.hint_targets.emplace(f.name, std::move(per_step));
        if (with_truth_feeds) b.hint_truth_feeds.emplace(f.name, std::move(truth_feeds));
      }
    } else {
      std::vector<Tensor> outs;
      for (const auto& t : trajs) outs.push_back(t.output(f.name));
      b.output_targets.emplace(f.name, stack(outs));
    }
  }

  for (int s = 1; s <= b.steps; ++s) {
    std::vector<char> act, sup;
    for (const auto& t : trajs) {
      const int steps_i = std::max(t.num_steps - 1, 1);
      act.push_back(s <= steps_i ? 1 : 0);
      sup.push_back(s <= t.num_steps - 1 ? 1 : 0);
    }
    b.active.push_back(std::move(act));
    b.supervise.push_back(std::move(sup));
  }

  // Permutation representation of the sorting output.
  std::string pname;
  if (task.codec.permutation_output && pointer_output_name(spec, &pname)) {
    b.has_perm = true;
    std::vector<Tensor> perms;
    Tensor firsts({b.batch, b.n});
    for (int i = 0; i < b.batch; ++i) {
      const Tensor& out = trajs[static_cast<size_t>(i)].output(pname);
      std::vector<int> pred(static_cast<size_t>(b.n));
      for (int v = 0; v < b.n; ++v)
        pred[static_cast<size_t>(v)] = static_cast<int>(std::llround(out[v]));
      Tensor perm;
      int first = -1;
      pointers_to_permutation(pred, &perm, &first);
      perms.push_back(std::move(perm));
      firsts[static_cast<int64_t>(i) * b.n + first] = 1.0;
    }
    b.perm_target = stack(perms);
    b.first_target = firsts;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Unroll building blocks
// ---------------------------------------------------------------------------

StepResult unroll_step(UnrollContext& ctx, int batch, int n, const FeedDict& input_feeds,
                       const FeedDict& hint_feeds, Val h_prev, Val edge_carry,
                       const std::vector<char>& active_mask) {
  Tape& tp = *ctx.tp;
  LatentState st = encode_step(tp, *ctx.store, ctx.task->codec, batch, n, input_feeds,
                               hint_feeds);
  if (edge_carry.valid()) st.e = tp.add(st.e, edge_carry);

  ProcessorStep step = mpnn_step(tp, *ctx.store, *ctx.proc, ctx.cfg->proc, st, h_prev);

  // Activity blend: inactive samples keep their previous state bit for bit.
  bool all_active = true;
  for (char c : active_mask) all_active = all_active && c;
  Val h_new = step.node;
  Val e_new = step.edge;
  if (!all_active) {
    Tensor am({batch, 1, 1}), im({batch, 1, 1});
    for (int i = 0; i < batch; ++i) {
      am[i] = active_mask[static_cast<size_t>(i)] ? 1.0 : 0.0;
      im[i] = active_mask[static_cast<size_t>(i)] ? 0.0 : 1.0;
    }
    Val a = tp.leaf(am), inv = tp.leaf(im);
    h_new = tp.add(tp.mul(a, step.node), tp.mul(inv, h_prev));
    if (step.edge.valid()) {
      Tensor am4 = am.reshaped({batch, 1, 1, 1});
      Tensor im4 = im.reshaped({batch, 1, 1, 1});
      Val prev_edge = edge_carry.valid()
                          ? edge_carry
                          : tp.leaf(Tensor(tp.value(step.edge).shape()));
      e_new = tp.add(tp.mul(tp.leaf(am4), step.edge), tp.mul(tp.leaf(im4), prev_edge));
    }
  }

  StepResult out;
  out.h = h_new;
  out.edge_carry = e_new;
  out.enc_e = st.e;
  out.enc_g = st.g;
  Val decode_edges = e_new.valid() ? e_new : st.e;
  out.hint_decs =
      decode_step(tp, *ctx.store, ctx.task->codec, Stage::HINT, h_new, decode_edges, st.g);
  return out;
}

FeedDict next_hint_feeds(UnrollContext& ctx, const std::map<std::string, DecodedFeature>& decs,
                         const std::map<std::string, Val>& truth_feeds,
                         const std::vector<char>& forced) {
  Tape& tp = *ctx.tp;
  const FeedbackMode mode = ctx.cfg->soft_hints ? FeedbackMode::SOFT : FeedbackMode::HARD;
  FeedDict out;
  bool any_forced = false;
  for (char c : forced) any_forced = any_forced || c;
  for (const auto& f : ctx.task->staged.spec.features) {
    if (f.stage != Stage::HINT) continue;
    Val feed = prediction_to_feed(tp, f, decs.at(f.name), mode);
    if (any_forced) feed = teacher_force(tp, f, feed, truth_feeds.at(f.name), forced);
    out.emplace(f.name, feed);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

namespace {

// Stable elementwise binary cross-entropy from logits:
// bce = relu(x) - x*y + log(1 + exp(-|x|)).
Val bce_logits(Tape& tp, Val logits, Val targets) {
  Val ax = tp.add(tp.relu(logits), tp.relu(tp.scale(logits, -1.0)));  // |x|
  Val soft = tp.log(tp.add_const(tp.exp(tp.scale(ax, -1.0)), 1.0));
  return tp.add(tp.sub(tp.relu(logits), tp.mul(logits, targets)), soft);
}

// Mean over all non-batch axes -> (B,).
Val mean_per_sample(Tape& tp, Val x) {
  const Shape s = tp.value(x).shape();
  int64_t count = 1;
  Val cur = x;
  for (int axis = static_cast<int>(s.size()) - 1; axis >= 1; --axis) {
    count *= s[static_cast<size_t>(axis)];
    cur = tp.reduce_sum(cur, axis, /*keepdims=*/false);
  }
  return tp.scale(cur, 1.0 / static_cast<double>(count));
}

Val sum_per_sample(Tape& tp, Val x) {
  const Shape s = tp.value(x).shape();
  Val cur = x;
  for (int axis = static_cast<int>(s.size()) - 1; axis >= 1; --axis)
    cur = tp.reduce_sum(cur, axis, /*keepdims=*/false);
  return cur;
}

}  // namespace

Val feature_loss(Tape& tp, const FeatureSpec& f, const DecodedFeature& dec, const Tensor& target,
                 int n) {
  Val t = tp.leaf(target);
  switch (f.type) {
    case FType::SCALAR: {
      Val d = tp.sub(dec.main, t);
      return mean_per_sample(tp, tp.mul(d, d));
    }
    case FType::MASK:
      return mean_per_sample(tp, bce_logits(tp, dec.main, t));
    case FType::MASK_ONE: {
      // One distribution across nodes per sample.
      Val logp = tp.log_softmax(dec.main, 1);
      return tp.scale(sum_per_sample(tp, tp.mul(logp, t)), -1.0);
    }
    case FType::CATEGORICAL: {
      const int axis = f.location == Location::EDGE ? 3 : 2;
      Val logp = tp.log_softmax(dec.main, axis);
      Val ce = tp.scale(sum_per_sample(tp, tp.mul(logp, t)), -1.0);
      const int64_t cells = f.location == Location::EDGE ? static_cast<int64_t>(n) * n : n;
      return tp.scale(ce, 1.0 / static_cast<double>(cells));
    }
    case FType::POINTER: {
      if (f.location == Location::NODE) {
        // target (B,n,1) indices -> one-hot rows; CE per row, mean over rows.
        const Shape s = tp.value(dec.main).shape();
        const int B = s[0];
        Tensor onehot({B, n, n});
        for (int b = 0; b < B; ++b)
          for (int i = 0; i < n; ++i) {
            const int j = static_cast<int>(std::llround(target[static_cast<int64_t>(b) * n + i]));
            onehot[(static_cast<int64_t>(b) * n + i) * n + j] = 1.0;
          }
        Val logp = tp.log_softmax(dec.main, 2);
        Val ce = tp.scale(sum_per_sample(tp, tp.mul(logp, tp.leaf(onehot))), -1.0);
        return tp.scale(ce, 1.0 / static_cast<double>(n));
      }
      // Edge pointer: target (B,n,n,1) indices; CE over the last axis.
      const Shape s = tp.value(dec.main).shape();
      const int B = s[0];
      Tensor onehot({B, n, n, n});
      for (int b = 0; b < B; ++b)
        for (int64_t cell = 0; cell < static_cast<int64_t>(n) * n; ++cell) {
          const int k = static_cast<int>(
              std::llround(target[static_cast<int64_t>(b) * n * n + cell]));
          onehot[(static_cast<int64_t>(b) * n * n + cell) * n + k] = 1.0;
        }
      Val logp = tp.log_softmax(dec.main, 3);
      Val ce = tp.scale(sum_per_sample(tp, tp.mul(logp, tp.leaf(onehot))), -1.0);
      return tp.scale(ce, 1.0 / static_cast<double>(static_cast<int64_t>(n) * n));
    }
  }
  fail("bad feature type");
}

PermLoss permutation_loss(UnrollContext& ctx, const DecodedFeature& dec,
                          const Tensor& perm_target, const Tensor& first_target, Rng* rng) {
  Tape& tp = *ctx.tp;
  const CodecConfig& cc = ctx.task->codec.cfg;
  SinkhornOptions opt;
  opt.iterations = cc.sinkhorn_train_iters;
  opt.temperature = cc.sinkhorn_temperature;
  opt.mask_diagonal = true;
  opt.gumbel = cc.gumbel && rng != nullptr;
  opt.gumbel_scale = cc.gumbel_scale;

  const int n = perm_target.dim(1);
  Val ds = sinkhorn(tp, dec.main, opt, rng);
  // Row-wise cross-entropy against the doubly stochastic output. The tiny
  // offset keeps log() finite on masked-diagonal zeros (their targets are 0).
  Val logp = tp.log(tp.add_const(ds, 1e-300));
  PermLoss out;
  out.perm = tp.scale(sum_per_sample(tp, tp.mul(logp, tp.leaf(perm_target))),
                      -1.0 / static_cast<double>(n));
  check(dec.has_first, "permutation loss needs the first-node head");
  Val flat = tp.reshape(dec.first_logits, {perm_target.dim(0), n});
  Val logf = tp.log_softmax(flat, 1);
  out.first = tp.scale(sum_per_sample(tp, tp.mul(logf, tp.leaf(first_target))), -1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Training unroll
// ---------------------------------------------------------------------------

TrainOutcome run_train_batch(Tape& tp, ParamStore& store, const TaskModel& task,
                             const ProcessorParams& proc, const ModelConfig& cfg,
                             const Batch& batch, Rng& rng) {
  UnrollContext ctx{&tp, &store, &task, &proc, &cfg};
  const int B = batch.batch, n = batch.n;
  const ProblemSpec& spec = task.staged.spec;

  FeedDict input_feeds;
  for (const auto& [name, t] : batch.input_feeds) input_feeds.emplace(name, tp.leaf(t));
  FeedDict hint_feeds;
  for (const auto& [name, t] : batch.initial_hints) hint_feeds.emplace(name, tp.leaf(t));

  const int h = cfg.codec.hidden;
  Val h_prev = tp.leaf(Tensor({B, n, h}));
  Val edge_carry;  // starts empty; triplets populate it

  // Per-sample accumulated hint loss and term counts.
  Val hint_acc = tp.leaf(Tensor({B}));
  std::vector<double> hint_terms(static_cast<size_t>(B), 0.0);

  std::vector<const FeatureSpec*> hint_features = spec.by_stage(Stage::HINT);

  StepResult last;
  for (int s = 1; s <= batch.steps; ++s) {
    last = unroll_step(ctx, B, n, input_feeds, hint_feeds, h_prev, edge_carry,
                       batch.active[static_cast<size_t>(s - 1)]);
    h_prev = last.h;
    edge_carry = last.edge_carry;

    // Hint supervision for samples whose trajectory still runs.
    const std::vector<char>& sup = batch.supervise[static_cast<size_t>(s - 1)];
    bool any_sup = false;
    for (char c : sup) any_sup = any_sup || c;
    if (any_sup && !hint_features.empty()) {
      Tensor mask({B});
      for (int i = 0; i < B; ++i) mask[i] = sup[static_cast<size_t>(i)] ? 1.0 : 0.0;
      Val maskv = tp.leaf(mask);
      for (const FeatureSpec* f : hint_features) {
        Val term = feature_loss(tp, *f, last.hint_decs.at(f->name),
                                batch.hint_targets.at(f->name)[static_cast<size_t>(s - 1)], n);
        hint_acc = tp.add(hint_acc, tp.mul(term, maskv));
      }
      for (int i = 0; i < B; ++i)
        if (sup[static_cast<size_t>(i)])
          hint_terms[static_cast<size_t>(i)] += static_cast<double>(hint_features.size());
    }

    // Feedback for the next step (teacher forcing coins per sample, step).
    if (s < batch.steps) {
      std::vector<char> forced(static_cast<size_t>(B), 0);
      if (cfg.teacher_forcing > 0.0) {
        for (int i = 0; i < B; ++i)
          forced[static_cast<size_t>(i)] = rng.bernoulli(cfg.teacher_forcing) ? 1 : 0;
      }
      std::map<std::string, Val> truth_feeds;
      bool any_forced = false;
      for (char c : forced) any_forced = any_forced || c;
      if (any_forced) {
        for (const FeatureSpec* f : hint_features)
          truth_feeds.emplace(f->name,
                              tp.leaf(batch.hint_truth_feeds.at(f->name)[static_cast<size_t>(
                                  std::min(s, batch.steps) - 1)]));
      }
      hint_feeds = next_hint_feeds(ctx, last.hint_decs, truth_feeds, forced);
    }
  }

  // Hint loss: per-sample mean over (features x supervised steps).
  Tensor inv_counts({B});
  for (int i = 0; i < B; ++i)
    inv_counts[i] = hint_terms[static_cast<size_t>(i)] > 0.0
                        ? 1.0 / hint_terms[static_cast<size_t>(i)]
                        : 0.0;
  Val hint_per_sample = tp.mul(hint_acc, tp.leaf(inv_counts));

  // Output decoding from the final state.
  Val decode_edges = edge_carry.valid() ? edge_carry : last.enc_e;
  auto out_decs = decode_step(tp, store, task.codec, Stage::OUTPUT, h_prev, decode_edges,
                              last.enc_g);

  Val out_acc = tp.leaf(Tensor({B}));
  double out_features = 0.0;
  std::string perm_name;
  pointer_output_name(spec, &perm_name);
  for (const auto& f : spec.features) {
    if (f.stage != Stage::OUTPUT) continue;
    if (batch.has_perm && f.name == perm_name) {
      PermLoss pl = permutation_loss(ctx, out_decs.at(f.name), batch.perm_target,
                                     batch.first_target, &rng);
      out_acc = tp.add(out_acc, tp.add(pl.perm, pl.first));
      out_features += 2.0;  // the first-node head counts as one more output
    } else {
      out_acc = tp.add(out_acc, feature_loss(tp, f, out_decs.at(f.name),
                                             batch.output_targets.at(f.name), n));
      out_features += 1.0;
    }
  }
  Val out_per_sample = tp.scale(out_acc, 1.0 / std::max(out_features, 1.0));

  TrainOutcome outcome;
  outcome.hint_loss = tp.reduce_mean_all(hint_per_sample);
  outcome.output_loss = tp.reduce_mean_all(out_per_sample);
  outcome.total = tp.add(outcome.hint_loss, outcome.output_loss);
  return outcome;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

void score_elements(const FeatureSpec& f, const Tensor& hard, const Tensor& truth, int n, int B,
                    EvalCounts& counts) {
  switch (f.type) {
    case FType::SCALAR: {
      for (int64_t i = 0; i < hard.numel(); ++i) {
        if (std::abs(hard[i] - truth[i]) <= 1e-3)
          counts.tp += 1;
        else {
          counts.fp += 1;
          counts.fn += 1;
        }
      }
      break;
    }
    case FType::MASK: {
      for (int64_t i = 0; i < hard.numel(); ++i) {
        const bool p = hard[i] > 0.5, t = truth[i] > 0.5;
        if (p && t)
          counts.tp += 1;
        else if (p && !t)
          counts.fp += 1;
        else if (!p && t)
          counts.fn += 1;
      }
      break;
    }
    case FType::MASK_ONE: {
      // One multiclass element per sample: the selected node.
      for (int b = 0; b < B; ++b) {
        int ph = 0, th = 0;
        for (int i = 0; i < n; ++i) {
          if (hard[static_cast<int64_t>(b) * n + i] > hard[static_cast<int64_t>(b) * n + ph])
            ph = i;
          if (truth[static_cast<int64_t>(b) * n + i] > truth[static_cast<int64_t>(b) * n + th])
            th = i;
        }
        if (ph == th)
          counts.tp += 1;
        else {
          counts.fp += 1;
          counts.fn += 1;
        }
      }
      break;
    }
    case FType::CATEGORICAL: {
      const int k = f.num_categories;
      const int64_t cells = hard.numel() / k;
      for (int64_t c = 0; c < cells; ++c) {
        int ph = 0, th = 0;
        for (int i = 0; i < k; ++i) {
          if (hard[c * k + i] > hard[c * k + ph]) ph = i;
          if (truth[c * k + i] > truth[c * k + th]) th = i;
        }
        if (ph == th)
          counts.tp += 1;
        else {
          counts.fp += 1;
          counts.fn += 1;
        }
      }
      break;
    }
    case FType::POINTER: {
      for (int64_t i = 0; i < hard.numel(); ++i) {
        if (std::llround(hard[i]) == std::llround(truth[i]))
          counts.tp += 1;
        else {
          counts.fp += 1;
          counts.fn += 1;
        }
      }
      break;
    }
  }
}

}  // namespace

EvalCounts evaluate_samples(ParamStore& store, const TaskModel& task,
                            const ProcessorParams& proc, const ModelConfig& cfg,
                            const std::vector<Trajectory>& samples, int sub_batch,
                            bool hard_hints) {
  EvalCounts counts;
  const ProblemSpec& spec = task.staged.spec;
  ModelConfig eval_cfg = cfg;
  eval_cfg.teacher_forcing = 0.0;
  eval_cfg.soft_hints = !hard_hints;  // the model's own predictions either way

  // Group same-size samples into sub-batches.
  std::map<int, std::vector<const Trajectory*>> by_n;
  for (const auto& t : samples) by_n[t.n].push_back(&t);

  for (auto& [n, group] : by_n) {
    for (size_t start = 0; start < group.size(); start += static_cast<size_t>(sub_batch)) {
      std::vector<Trajectory> chunk;
      for (size_t i = start; i < std::min(group.size(), start + static_cast<size_t>(sub_batch));
           ++i)
        chunk.push_back(*group[i]);
      for (auto& t : chunk) t.lock_hints_beyond_initial();

      Batch batch = make_batch(task, chunk, /*for_eval=*/true, /*with_truth_feeds=*/false);
      const int B = batch.batch;

      Tape tp(/*grad_enabled=*/false);
      UnrollContext ctx{&tp, &store, &task, &proc, &eval_cfg};
      FeedDict input_feeds;
      for (const auto& [name, t] : batch.input_feeds) input_feeds.emplace(name, tp.leaf(t));
      FeedDict hint_feeds;
      for (const auto& [name, t] : batch.initial_hints) hint_feeds.emplace(name, tp.leaf(t));

      Val h_prev = tp.leaf(Tensor({B, n, cfg.codec.hidden}));
      Val edge_carry;
      StepResult last;
      for (int s = 1; s <= batch.steps; ++s) {
        last = unroll_step(ctx, B, n, input_feeds, hint_feeds, h_prev, edge_carry,
                           batch.active[static_cast<size_t>(s - 1)]);
        h_prev = last.h;
        edge_carry = last.edge_carry;
        if (s < batch.steps)
          hint_feeds = next_hint_feeds(ctx, last.hint_decs, {}, std::vector<char>(B, 0));

        // Bound memory on long unrolls: drop everything but the live state.
        std::vector<Val> keep = {h_prev, last.enc_e, last.enc_g};
        if (edge_carry.valid()) keep.push_back(edge_carry);
        for (const auto& [name, v] : input_feeds) keep.push_back(v);
        for (const auto& [name, v] : hint_feeds) keep.push_back(v);
        if (s == batch.steps) break;  // keep the last step's tape for decoding
        tp.release_values(keep);
      }

      Val decode_edges = edge_carry.valid() ? edge_carry : last.enc_e;
      auto out_decs =
          decode_step(tp, store, task.codec, Stage::OUTPUT, h_prev, decode_edges, last.enc_g);

      std::string perm_name;
      pointer_output_name(spec, &perm_name);
      for (const auto& f : spec.features) {
        if (f.stage != Stage::OUTPUT) continue;
        const Tensor& truth = batch.output_targets.at(f.name);
        if (batch.has_perm && f.name == perm_name) {
          // Sinkhorn hard decoding back to the pointer representation.
          SinkhornOptions opt;
          opt.iterations = task.codec.cfg.sinkhorn_eval_iters;
          opt.temperature = task.codec.cfg.sinkhorn_temperature;
          Val ds = sinkhorn(tp, out_decs.at(f.name).main, opt, nullptr);
          const Tensor& dsv = tp.value(ds);
          const Tensor& firstv = tp.value(out_decs.at(f.name).first_logits);
          Tensor hard({B, n, 1});
          for (int b = 0; b < B; ++b) {
            std::vector<int> targets(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) {
              int best = 0;
              for (int j = 1; j < n; ++j)
                if (dsv[(static_cast<int64_t>(b) * n + i) * n + j] >
                    dsv[(static_cast<int64_t>(b) * n + i) * n + best])
                  best = j;
              targets[static_cast<size_t>(i)] = best;
            }
            int first = 0;
            for (int i = 1; i < n; ++i)
              if (firstv[static_cast<int64_t>(b) * n + i] >
                  firstv[static_cast<int64_t>(b) * n + first])
                first = i;
            counts.perm_total += 1;
            std::vector<int> pointers;
            if (rows_form_permutation(targets)) {
              counts.perm_valid += 1;
              pointers = permutation_rewire(targets, first);
            } else {
              // Validity violation: score the raw row argmaxes.
              pointers = targets;
              pointers[static_cast<size_t>(first)] = first;
            }
            for (int i = 0; i < n; ++i)
              hard[static_cast<int64_t>(b) * n + i] = pointers[static_cast<size_t>(i)];
          }
          score_elements(f, hard, truth, n, B, counts);
        } else {
          Tensor hard = hard_decode(f, tp.value(out_decs.at(f.name).main), n);
          score_elements(f, hard, truth, n, B, counts);
        }
      }
    }
  }
  return counts;
}

}  // namespace nar
