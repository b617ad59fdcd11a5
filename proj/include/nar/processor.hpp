#pragma once

// The shared processor: one message-passing step over the fully connected
// graph, with optional per-node update gates and triplet edge reasoning
// (Triplet-GMPNN). Parameters are task-independent and live under "proc/".

#include "nar/codec.hpp"
#include "nar/tape.hpp"

namespace nar {

struct ProcessorConfig {
  int hidden = 128;
  bool gated = true;
  bool triplets = true;
  int triplet_dim = 8;
  // Diagnostic switch: forces the gate to exactly zero so the step must
  // reproduce the previous embeddings bit for bit.
  bool force_gate_zero = false;
};

struct ProcessorParams {
  // Message MLP f_m, layer 1 decomposed into per-argument projections.
  Linear msg_zi, msg_zj, msg_e, msg_g;
  Linear msg_l2, msg_l3;
  // Readout f_r: one linear (+ReLU) over [z, m].
  Linear readout_z, readout_m;
  // Update gate f_g: hidden layer + sigmoid output (bias starts at -3).
  Linear gate_z, gate_m, gate_out;
  // Triplet projections to a small feature space and the edge upscale.
  Linear tri_n1, tri_n2, tri_n3, tri_e1, tri_e2, tri_e3, tri_g;
  Linear tri_up;
};

ProcessorParams make_processor(ParamStore& store, const ProcessorConfig& cfg, Rng& rng);

struct ProcessorStep {
  Val node;  // (B,n,h) processed (and possibly gated) node embeddings
  Val edge;  // (B,n,n,h) triplet edge latents; invalid when triplets are off
  Val gate;  // (B,n,h) gate values; invalid when gating is off
};

// One step: z_i = x_i || h_prev_i; messages max-aggregated over all j;
// readout + layer norm; then triplet edge latents from the normalised nodes
// and the gate blend against h_prev.
ProcessorStep mpnn_step(Tape& tp, ParamStore& store, const ProcessorParams& params,
                        const ProcessorConfig& cfg, const LatentState& state, Val h_prev);

// Edge latents from node triples, max-reduced over the intermediate node.
Val triplet_edge_latents(Tape& tp, ParamStore& store, const ProcessorParams& params,
                         const ProcessorConfig& cfg, Val h, Val e, Val g);

}  // namespace nar
