#include "nar/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nar {

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.codec.hidden = hidden;
  m.codec.sinkhorn = sinkhorn;
  m.codec.gumbel = gumbel;
  m.codec.xavier_scalar_hints = xavier_scalar;
  m.proc.hidden = hidden;
  m.proc.gated = gated;
  m.proc.triplets = triplets;
  m.soft_hints = soft_hints;
  m.teacher_forcing = teacher_forcing;
  return m;
}

SamplerConfig RunConfig::sampler_config(AlgorithmId id) const {
  SamplerConfig s;
  s.algorithm = id;
  if (augment) {
    s.n_min = 4;
    s.n_max = 16;  // sizes are pinned per batch from the cycle anyway
    s.needle_min = 1;
    s.needle_max = 8;
  } else {
    // No augmentation: the original fixed-distribution regime.
    s.n_min = std::max(4, eval_n);
    s.n_max = std::max(4, eval_n);
    s.p_set = {0.5};
    s.needle_min = 4;
    s.needle_max = 4;
  }
  return s;
}

SamplerConfig RunConfig::eval_sampler_config(AlgorithmId id, bool ood) const {
  SamplerConfig s;
  s.algorithm = id;
  const int n = eval_size(id, ood);
  s.n_min = std::max(4, n);
  s.n_max = std::max(4, n);
  s.p_set = {0.5};
  // The needle scales with the evaluation size (fourfold at OOD).
  s.needle_min = ood ? 16 : 4;
  s.needle_max = ood ? 16 : 4;
  return s;
}

int RunConfig::eval_size(AlgorithmId id, bool ood) const {
  if (is_string_task(id)) return ood ? 80 : 20;
  return ood ? ood_n : eval_n;
}

std::string format_metric(const MetricRecord& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "step=%lld algorithm=%s split=%s micro_f1=%.17g hint_loss=%.17g "
                "output_loss=%.17g",
                static_cast<long long>(m.step), m.algorithm.c_str(), m.split.c_str(), m.micro_f1,
                m.hint_loss, m.output_loss);
  return std::string(buf);
}

std::vector<Trajectory> probe_traces_for(AlgorithmId id, int count) {
  SamplerConfig cfg;
  cfg.algorithm = id;
  Rng rng(mix_seed(0xC0FFEEULL, std::string("probe/") + to_string(id)));
  std::vector<Trajectory> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(sample_problem(cfg, rng));
  return out;
}

SingleTaskSetup make_single_task_setup(const RunConfig& cfg) {
  check(cfg.algorithms.size() == 1, "single-task setup needs exactly one algorithm");
  SingleTaskSetup setup;
  Rng init_rng(mix_seed(cfg.seed, "init"));
  ModelConfig mcfg = cfg.model_config();
  setup.proc = make_processor(setup.store, mcfg.proc, init_rng);
  auto probes = probe_traces_for(cfg.algorithms[0], cfg.probe_traces);
  setup.task = make_task_model(setup.store, cfg.algorithms[0], mcfg, probes,
                               cfg.static_hint_elim, init_rng);
  return setup;
}

void load_params_into(ParamStore& store, const ParamStore& loaded) {
  check(store.all().size() == loaded.all().size(),
        "checkpoint parameter count mismatch: expected " +
            std::to_string(store.all().size()) + ", got " +
            std::to_string(loaded.all().size()));
  for (auto& [name, p] : store.all()) {
    check(loaded.contains(name), "checkpoint missing parameter " + name);
    const Tensor& v = loaded.get(name).value;
    check(v.shape() == p.value.shape(), "checkpoint shape mismatch for " + name);
    p.value = v;
  }
}

AlgorithmId task_algorithm(const TaskModel& task) {
  return algorithm_from_string(task.staged.spec.algorithm_id);
}

EvalCounts evaluate_algorithm(ParamStore& store, const TaskModel& task,
                              const ProcessorParams& proc, const ModelConfig& mcfg,
                              const RunConfig& cfg, bool ood, Rng& sample_rng) {
  const AlgorithmId id = task_algorithm(task);
  SamplerConfig scfg = cfg.eval_sampler_config(id, ood);
  const int n = cfg.eval_size(id, ood);
  std::vector<Trajectory> samples;
  samples.reserve(static_cast<size_t>(cfg.eval_samples));
  for (int i = 0; i < cfg.eval_samples; ++i)
    samples.push_back(restage_trajectory(task.staged, sample_problem(scfg, sample_rng, n)));
  return evaluate_samples(store, task, proc, mcfg, samples, cfg.eval_sub_batch);
}

namespace {

// Draws one training batch (same-size samples) for the given batch index.
std::vector<Trajectory> draw_batch(const RunConfig& cfg, const TaskModel& task,
                                   const SamplerConfig& scfg, int64_t batch_index, Rng& rng,
                                   const std::vector<Trajectory>* pool) {
  std::vector<Trajectory> out;
  out.reserve(static_cast<size_t>(cfg.batch_size));
  if (pool) {
    for (int i = 0; i < cfg.batch_size; ++i)
      out.push_back((*pool)[static_cast<size_t>(rng.uniform_int(
          static_cast<int64_t>(pool->size())))]);
    return out;
  }
  const AlgorithmId id = scfg.algorithm;
  int n;
  if (is_string_task(id))
    n = 20;
  else
    n = cfg.size_cycle[static_cast<size_t>(batch_index % cfg.size_cycle.size())];
  for (int i = 0; i < cfg.batch_size; ++i)
    out.push_back(restage_trajectory(task.staged, sample_problem(scfg, rng, n)));
  return out;
}

}  // namespace

TrainResult train_single_task(const RunConfig& cfg, const MetricSink& sink) {
  check(cfg.algorithms.size() == 1, "train_single_task needs exactly one algorithm");
  const AlgorithmId id = cfg.algorithms[0];
  SingleTaskSetup setup = make_single_task_setup(cfg);
  ModelConfig mcfg = cfg.model_config();
  OptimConfig ocfg;
  ocfg.lr = cfg.lr;

  Rng train_rng(mix_seed(cfg.seed, "train"));
  Rng fwd_rng(mix_seed(cfg.seed, "fwd"));
  Rng eval_rng(mix_seed(cfg.seed, "eval"));
  Rng ood_rng(mix_seed(cfg.seed, "ood"));

  SamplerConfig scfg = cfg.sampler_config(id);

  // Fixed training pool when augmentation is off (the easy-to-overfit
  // fixed-dataset regime).
  std::optional<std::vector<Trajectory>> pool;
  if (!cfg.augment) {
    pool.emplace();
    Rng pool_rng(mix_seed(cfg.seed, "pool"));
    const int n = is_string_task(id) ? 20 : std::max(4, cfg.eval_n);
    for (int i = 0; i < cfg.fixed_pool; ++i)
      pool->push_back(restage_trajectory(setup.task.staged, sample_problem(scfg, pool_rng, n)));
  }

  TrainResult res;
  res.best_params = setup.store;  // snapshot of the initial parameters

  double run_hint = 0.0, run_out = 0.0;
  int64_t run_count = 0;
  int consecutive_bad = 0;

  auto emit = [&](MetricRecord m) {
    if (sink) sink(m);
    res.metrics.push_back(std::move(m));
  };

  auto eval_event = [&](int64_t step, bool final_event) {
    const double mh = run_count ? run_hint / static_cast<double>(run_count) : 0.0;
    const double mo = run_count ? run_out / static_cast<double>(run_count) : 0.0;
    run_hint = run_out = 0.0;
    run_count = 0;

    EvalCounts in_dist =
        evaluate_algorithm(setup.store, setup.task, setup.proc, mcfg, cfg, false, eval_rng);
    const double f1 = in_dist.micro_f1();
    emit({step, to_string(id), "in_dist", f1, mh, mo});

    const bool improved = step > 0 && f1 > res.best_in_dist;
    if (step == 0 || improved) {
      res.best_in_dist = std::max(res.best_in_dist, f1);
      res.best_params = setup.store;
    }
    if ((improved || final_event) && step > 0) {
      EvalCounts ood = evaluate_algorithm(res.best_params, setup.task, setup.proc, mcfg, cfg,
                                          true, ood_rng);
      res.best_ood = ood.micro_f1();
      emit({step, to_string(id), "ood", res.best_ood, mh, mo});
    }
  };

  eval_event(0, cfg.steps == 0);

  for (int64_t step = 1; step <= cfg.steps; ++step) {
    std::vector<Trajectory> batch_trajs =
        draw_batch(cfg, setup.task, scfg, step - 1, train_rng, pool ? &*pool : nullptr);
    bool stepped = false;
    std::string what;
    try {
      Batch batch = make_batch(setup.task, batch_trajs, /*for_eval=*/false,
                               /*with_truth_feeds=*/cfg.teacher_forcing > 0.0);
      Tape tp;
      TrainOutcome out = run_train_batch(tp, setup.store, setup.task, setup.proc, mcfg, batch,
                                         fwd_rng);
      const double total = tp.value(out.total)[0];
      if (std::isfinite(total)) {
        tp.backward(out.total);
        auto grads = tp.param_grads();
        if (cfg.clip) clip_by_global_norm(grads, cfg.clip_norm);
        adam_step(setup.store, grads, ocfg);
        run_hint += tp.value(out.hint_loss)[0];
        run_out += tp.value(out.output_loss)[0];
        run_count += 1;
        stepped = true;
      } else {
        what = "non-finite loss";
      }
    } catch (const NarError& e) {
      what = e.what();
    }

    if (stepped) {
      consecutive_bad = 0;
    } else {
      res.nonfinite_steps += 1;
      consecutive_bad += 1;
      if (consecutive_bad >= cfg.max_nonfinite) {
        res.aborted = true;
        res.abort_reason = "aborted after " + std::to_string(consecutive_bad) +
                           " consecutive non-finite training steps (" + what + ") at step " +
                           std::to_string(step);
        break;
      }
    }

    if (step % cfg.eval_every == 0 || step == cfg.steps) eval_event(step, step == cfg.steps);
  }

  res.params = setup.store;
  return res;
}

}  // namespace nar
