#pragma once

// Full-model plumbing: batched trajectory unrolls through the
// encode-process-decode loop, per-type losses, hint feedback wiring, and
// hard-decoded evaluation with pooled micro-F1.
//
// Batches hold same-size samples. Trajectories of different lengths are
// unrolled together to the longest length; a per-(sample, step) activity
// mask freezes a sample's node/edge state once its own trajectory ends, so
// the batched computation equals the per-sample one exactly. (Edge-located
// outputs never need the freeze: their trajectory lengths are determined by
// n, which is constant within a batch.)

#include <optional>

#include "nar/codec.hpp"
#include "nar/feature.hpp"
#include "nar/processor.hpp"
#include "nar/sampler.hpp"

namespace nar {

struct ModelConfig {
  CodecConfig codec;
  ProcessorConfig proc;
  bool soft_hints = true;          // SOFT vs HARD training feedback
  double teacher_forcing = 0.0;    // probability of feeding ground truth
};

// One task wired to the shared processor.
struct TaskModel {
  StagedProblem staged;
  TaskCodec codec;
};

TaskModel make_task_model(ParamStore& store, AlgorithmId id, const ModelConfig& cfg,
                          const std::vector<Trajectory>& probe_traces, bool static_hint_elim,
                          Rng& rng);

// ---------------------------------------------------------------------------
// Batch preparation
// ---------------------------------------------------------------------------

struct Batch {
  int n = 0;
  int batch = 0;
  int steps = 0;                     // processor steps = max(T_i - 1, 1)
  std::vector<int> num_hint_steps;   // T_i per sample
  std::map<std::string, Tensor> input_feeds;    // stacked feed format
  std::map<std::string, Tensor> initial_hints;  // slice-0 feeds
  // Ground-truth hint slices per step s (1-based), ground-truth format,
  // stacked (B, ...); padded samples repeat their final slice.
  std::map<std::string, std::vector<Tensor>> hint_targets;
  // Same slices in feed format (for teacher forcing).
  std::map<std::string, std::vector<Tensor>> hint_truth_feeds;
  std::vector<std::vector<char>> active;     // [s-1][b]: step runs for sample b
  std::vector<std::vector<char>> supervise;  // [s-1][b]: hint loss counts
  std::map<std::string, Tensor> output_targets;  // ground-truth format
  // Sorting permutation representation of the pointer output.
  Tensor perm_target;   // (B,n,n)
  Tensor first_target;  // (B,n) one-hot
  bool has_perm = false;
};

// `for_eval` skips ground-truth hint material beyond the initial slice, so
// it is safe on hint-locked trajectories.
Batch make_batch(const TaskModel& task, const std::vector<Trajectory>& trajs, bool for_eval,
                 bool with_truth_feeds);

// ---------------------------------------------------------------------------
// Unroll building blocks (shared by the trainers and the chunked mode)
// ---------------------------------------------------------------------------

struct UnrollContext {
  Tape* tp = nullptr;
  ParamStore* store = nullptr;
  const TaskModel* task = nullptr;
  const ProcessorParams* proc = nullptr;
  const ModelConfig* cfg = nullptr;
};

struct StepResult {
  Val h;           // (B,n,h) frozen-blended node state
  Val edge_carry;  // (B,n,n,h) carried edge latents (triplets) or invalid
  Val enc_e;       // encoder edge embeddings incl. carry (decoder input when
                   // triplets are off)
  Val enc_g;       // (B,h) graph latent
  std::map<std::string, DecodedFeature> hint_decs;
};

// One processor step: encode current feeds, message-pass, blend with the
// activity mask, decode next-step hints.
StepResult unroll_step(UnrollContext& ctx, int batch, int n, const FeedDict& input_feeds,
                       const FeedDict& hint_feeds, Val h_prev, Val edge_carry,
                       const std::vector<char>& active_mask);

// Next-step hint feeds from decoded hints (SOFT/HARD per config), with
// optional teacher forcing against the ground-truth feeds.
FeedDict next_hint_feeds(UnrollContext& ctx, const std::map<std::string, DecodedFeature>& decs,
                         const std::map<std::string, Val>& truth_feeds,
                         const std::vector<char>& forced);

// Per-sample loss (B,) of one decoded hint/output feature against a
// ground-truth-format target.
Val feature_loss(Tape& tp, const FeatureSpec& f, const DecodedFeature& dec, const Tensor& target,
                 int n);

// Sorting permutation loss: row-wise cross-entropy of the doubly stochastic
// matrix against the permutation target plus the first-node head.
struct PermLoss {
  Val perm;   // (B,)
  Val first;  // (B,)
};
PermLoss permutation_loss(UnrollContext& ctx, const DecodedFeature& dec,
                          const Tensor& perm_target, const Tensor& first_target, Rng* rng);

// ---------------------------------------------------------------------------
// Whole-trajectory runners
// ---------------------------------------------------------------------------

struct TrainOutcome {
  Val total;        // scalar: mean over samples of (hint + output)
  Val hint_loss;    // scalar component
  Val output_loss;  // scalar component
};

// Unrolls the batch, assembles hint and output losses. `rng` drives teacher
// forcing coins and Gumbel noise.
TrainOutcome run_train_batch(Tape& tp, ParamStore& store, const TaskModel& task,
                             const ProcessorParams& proc, const ModelConfig& cfg,
                             const Batch& batch, Rng& rng);

// Evaluation counters pooled over output elements.
struct EvalCounts {
  double tp = 0, fp = 0, fn = 0;
  int64_t perm_total = 0;
  int64_t perm_valid = 0;
  double micro_f1() const {
    const double denom = 2 * tp + fp + fn;
    return denom == 0.0 ? 1.0 : 2 * tp / denom;
  }
};

// Hard-decoded evaluation: hints fed back from the model's own predictions
// (ground truth locked), outputs compared elementwise. Processes the samples
// in sub-batches of equal size grouping. `hard_hints` switches the feedback
// of the model's own hint predictions between argmax and soft form.
EvalCounts evaluate_samples(ParamStore& store, const TaskModel& task,
                            const ProcessorParams& proc, const ModelConfig& cfg,
                            const std::vector<Trajectory>& samples, int sub_batch = 32,
                            bool hard_hints = true);

}  // namespace nar
