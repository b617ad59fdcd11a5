#pragma once

// Task-specific encoders and decoders around the shared latent space, plus
// the Sinkhorn permutation decoder and hint feedback transforms.
//
// Feed format (batched, B leading): the dense representation hints travel in
// between steps, whether ground truth or fed-back predictions:
//   NODE scalar/mask/mask_one  (B,n,1)      NODE categorical (B,n,k)
//   NODE pointer               (B,n,n,1)    row i holds a distribution over j
//   EDGE scalar/mask           (B,n,n,1)    EDGE categorical (B,n,n,k)
//   EDGE pointer               (B,n,n,1)    cell (k,j) holds the mean mass of
//                                           pointers at (i,j) targeting k
//   GRAPH scalar               (B,1)
//
// Decoded format (what decode_step emits per feature):
//   NODE scalar (B,n,1) value; NODE mask/mask_one (B,n,1) logits;
//   NODE categorical (B,n,k) logits; NODE pointer (B,n,n) pair scores;
//   EDGE scalar/mask/categorical (B,n,n,f); EDGE pointer (B,n,n,n) scores
//   over the target node. Sorting outputs additionally decode a first-node
//   logit head (B,n,1) used by the permutation representation.

#include <map>
#include <optional>
#include <string>

#include "nar/feature.hpp"
#include "nar/tape.hpp"

namespace nar {

struct CodecConfig {
  int hidden = 128;
  bool sinkhorn = true;  // permutation decoder for sorting outputs
  int sinkhorn_train_iters = 10;
  int sinkhorn_eval_iters = 60;
  double sinkhorn_temperature = 0.1;
  bool gumbel = true;  // training-only noise on the permutation scores
  double gumbel_scale = 1.0;
  bool xavier_scalar_hints = true;  // Xavier init for scalar hint encoders
};

// Per-feature linear encoders/decoders for one task. Parameters live in the
// ParamStore under "task/<algorithm>/...".
struct TaskCodec {
  std::string prefix;
  ProblemSpec spec;  // staged spec (after static-hint elimination)
  CodecConfig cfg;
  bool permutation_output = false;  // sorting output decoded through Sinkhorn

  std::map<std::string, Linear> encoders;
  std::map<std::string, Linear> decoders;        // plain linear heads
  std::map<std::string, Linear> pointer_u;       // pointer score factors
  std::map<std::string, Linear> pointer_v;
  std::optional<Linear> first_node_head;         // sorting + sinkhorn only
};

TaskCodec make_task_codec(ParamStore& store, const ProblemSpec& staged_spec,
                          const CodecConfig& cfg, Rng& rng);

struct LatentState {
  Val x;  // (B,n,h)
  Val e;  // (B,n,n,h)
  Val g;  // (B,h)
};

using FeedDict = std::map<std::string, Val>;

// Embeds inputs and current hint feeds, summing per location.
LatentState encode_step(Tape& tp, ParamStore& store, const TaskCodec& codec, int batch, int n,
                        const FeedDict& input_feeds, const FeedDict& hint_feeds);

struct DecodedFeature {
  Val main;             // type-dependent, see header comment
  Val first_logits;     // only for the sinkhorn-decoded sorting output
  bool has_first = false;
};

// Decodes all features of the given stage from processed node embeddings,
// edge latents and the graph latent.
std::map<std::string, DecodedFeature> decode_step(Tape& tp, ParamStore& store,
                                                  const TaskCodec& codec, Stage stage, Val h,
                                                  Val edge_latents, Val graph_latent);

// --- hint feedback ----------------------------------------------------------

enum class FeedbackMode { SOFT, HARD };

// Converts a decoded hint prediction into feed format. SOFT applies
// softmax/sigmoid with gradients flowing; HARD applies argmax/thresholding
// and detaches.
Val prediction_to_feed(Tape& tp, const FeatureSpec& f, const DecodedFeature& dec,
                       FeedbackMode mode);

// Ground truth (unbatched, ground-truth format) into unbatched feed format.
Tensor truth_to_feed(const FeatureSpec& f, const Tensor& truth, int n);

// Blends prediction feeds with ground-truth feeds per sample: feed_b =
// coin_b * truth_b + (1 - coin_b) * pred_b, where coin ~ Bernoulli(tf).
Val teacher_force(Tape& tp, const FeatureSpec& f, Val pred_feed, Val truth_feed,
                  const std::vector<char>& coins);

// --- hard decoding (ground-truth format) ------------------------------------

// Collapses a decoded prediction (plain value tensor) to the ground-truth
// format: argmax for one-hot types, 0.5 threshold for masks, identity for
// scalars, row argmax for pointers.
Tensor hard_decode(const FeatureSpec& f, const Tensor& decoded, int n);

// --- Sinkhorn operator ------------------------------------------------------

struct SinkhornOptions {
  int iterations = 10;
  double temperature = 0.1;
  bool mask_diagonal = true;
  bool gumbel = false;
  double gumbel_scale = 1.0;
};

// Projects (B,n,n) scores towards a doubly stochastic matrix by temperature
// exponentiation and alternating row/column normalisation. Differentiable;
// fails if a row or column sum underflows to zero.
Val sinkhorn(Tape& tp, Val scores, const SinkhornOptions& opt, Rng* rng);

// --- permutation representation ---------------------------------------------

// CLRS predecessor pointers -> permutation matrix plus first-node index, by
// rewiring the first node (the self-pointer) to point at the last node in
// sorted order.
void pointers_to_permutation(const std::vector<int>& pred, Tensor* perm, int* first);

// Inverse rewiring: per-row argmax targets plus the first node back to
// predecessor pointers. Fails unless the targets form a permutation.
std::vector<int> permutation_rewire(const std::vector<int>& row_targets, int first);

bool rows_form_permutation(const std::vector<int>& row_targets);

}  // namespace nar
