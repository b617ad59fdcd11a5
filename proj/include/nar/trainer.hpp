#pragma once

// Single-task training: size-cycled online batches, loss assembly, clipped
// Adam updates, periodic in-distribution evaluation with best-checkpoint
// selection, and OOD evaluation of the best checkpoint.

#include <functional>
#include <optional>

#include "nar/network.hpp"
#include "nar/optim.hpp"

namespace nar {

struct RunConfig {
  std::vector<AlgorithmId> algorithms = {AlgorithmId::BFS};
  uint64_t seed = 1;

  // Model
  int hidden = 128;
  bool gated = true;     // single-task default; multi-task runs disable it
  bool triplets = true;
  bool sinkhorn = true;
  bool gumbel = true;

  // Training regime
  int steps = 10000;  // batches for single-task; cycles for multi-task
  int batch_size = 32;
  std::vector<int> size_cycle = {4, 7, 11, 13, 16};
  double teacher_forcing = 0.0;
  bool soft_hints = true;
  bool augment = true;
  bool static_hint_elim = true;
  bool xavier_scalar = true;
  bool clip = true;
  double clip_norm = 1.0;
  double lr = 0.001;

  // Evaluation
  int eval_n = 16;  // string tasks pin 20
  int ood_n = 64;   // string tasks pin 80
  int eval_every = 100;
  int eval_samples = 32;
  int eval_sub_batch = 32;

  // Multi-task
  bool chunked = true;
  int chunk_len = 16;
  bool shuffle_tasks = false;

  // Plumbing
  int probe_traces = 100;
  int fixed_pool = 1000;  // dataset size when augmentation is off
  int max_nonfinite = 50;

  ModelConfig model_config() const;
  SamplerConfig sampler_config(AlgorithmId id) const;  // training distribution
  // Evaluation distribution: fixed p=0.5, fixed needle (4 in-dist, 16 OOD).
  SamplerConfig eval_sampler_config(AlgorithmId id, bool ood) const;
  int eval_size(AlgorithmId id, bool ood) const;
};

struct MetricRecord {
  int64_t step = 0;
  std::string algorithm;
  std::string split;  // "in_dist" | "ood"
  double micro_f1 = 0;
  double hint_loss = 0;
  double output_loss = 0;
};
std::string format_metric(const MetricRecord& m);

struct TrainResult {
  ParamStore params;       // final parameters
  ParamStore best_params;  // best in-distribution checkpoint
  double best_in_dist = -1.0;
  double best_ood = -1.0;     // OOD score of the best checkpoint (last OOD eval)
  std::vector<MetricRecord> metrics;
  int nonfinite_steps = 0;  // skipped updates
  bool aborted = false;
  std::string abort_reason;
};

// Probe traces for static-hint detection use a fixed seed independent of the
// run seed, so feature staging never varies across runs.
std::vector<Trajectory> probe_traces_for(AlgorithmId id, int count);

// Builds the task model + processor for a config (deterministic given seed).
struct SingleTaskSetup {
  ParamStore store;
  ProcessorParams proc;
  TaskModel task;
};
SingleTaskSetup make_single_task_setup(const RunConfig& cfg);

using MetricSink = std::function<void(const MetricRecord&)>;

TrainResult train_single_task(const RunConfig& cfg, const MetricSink& sink = nullptr);

// Evaluation of given parameters on freshly drawn samples; returns counters
// so callers can pool or inspect permutation validity.
EvalCounts evaluate_algorithm(ParamStore& store, const TaskModel& task,
                              const ProcessorParams& proc, const ModelConfig& mcfg,
                              const RunConfig& cfg, bool ood, Rng& sample_rng);

// Replaces parameter values in `store` with those from `loaded`. Fails if the
// name sets or shapes differ.
void load_params_into(ParamStore& store, const ParamStore& loaded);

AlgorithmId task_algorithm(const TaskModel& task);

}  // namespace nar
