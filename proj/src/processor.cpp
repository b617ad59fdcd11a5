#include "nar/processor.hpp"

namespace nar {

ProcessorParams make_processor(ParamStore& store, const ProcessorConfig& cfg, Rng& rng) {
  const int h = cfg.hidden;
  const int t = cfg.triplet_dim;
  ProcessorParams p;
  // One bias per MLP layer: it lives on the first projection of each sum.
  p.msg_zi = make_linear(store, "proc/msg/zi", 2 * h, h, InitScheme::LECUN, rng);
  p.msg_zj = make_linear(store, "proc/msg/zj", 2 * h, h, InitScheme::LECUN, rng, false);
  p.msg_e = make_linear(store, "proc/msg/e", h, h, InitScheme::LECUN, rng, false);
  p.msg_g = make_linear(store, "proc/msg/g", h, h, InitScheme::LECUN, rng, false);
  p.msg_l2 = make_linear(store, "proc/msg/l2", h, h, InitScheme::LECUN, rng);
  p.msg_l3 = make_linear(store, "proc/msg/l3", h, h, InitScheme::LECUN, rng);
  p.readout_z = make_linear(store, "proc/readout/z", 2 * h, h, InitScheme::LECUN, rng);
  p.readout_m = make_linear(store, "proc/readout/m", h, h, InitScheme::LECUN, rng, false);
  p.gate_z = make_linear(store, "proc/gate/z", 2 * h, h, InitScheme::LECUN, rng);
  p.gate_m = make_linear(store, "proc/gate/m", h, h, InitScheme::LECUN, rng, false);
  // Output bias of -3 keeps gates nearly closed at initialisation.
  p.gate_out = make_linear(store, "proc/gate/out", h, h, InitScheme::LECUN, rng, true, -3.0);
  p.tri_n1 = make_linear(store, "proc/tri/n1", h, t, InitScheme::LECUN, rng);
  p.tri_n2 = make_linear(store, "proc/tri/n2", h, t, InitScheme::LECUN, rng, false);
  p.tri_n3 = make_linear(store, "proc/tri/n3", h, t, InitScheme::LECUN, rng, false);
  p.tri_e1 = make_linear(store, "proc/tri/e1", h, t, InitScheme::LECUN, rng, false);
  p.tri_e2 = make_linear(store, "proc/tri/e2", h, t, InitScheme::LECUN, rng, false);
  p.tri_e3 = make_linear(store, "proc/tri/e3", h, t, InitScheme::LECUN, rng, false);
  p.tri_g = make_linear(store, "proc/tri/g", h, t, InitScheme::LECUN, rng, false);
  p.tri_up = make_linear(store, "proc/tri/up", t, h, InitScheme::LECUN, rng);
  store.create("proc/ln/gamma", Tensor::full({h}, 1.0));
  store.create("proc/ln/beta", Tensor({h}));
  return p;
}

Val triplet_edge_latents(Tape& tp, ParamStore& store, const ProcessorParams& params,
                         const ProcessorConfig& cfg, Val h, Val e, Val g) {
  const Shape hs = tp.value(h).shape();
  const int B = hs[0], n = hs[1];
  const int t = cfg.triplet_dim;

  // t_ijk = W1 h_i + W2 h_j + W3 h_k + We1 e_ij + We2 e_ik + We3 e_kj + Wg g,
  // realised as broadcast projections so only the (B,n,n,n,t) sum is ever
  // materialised.
  Val n1 = tp.reshape(apply_linear(tp, store, params.tri_n1, h), {B, n, 1, 1, t});
  Val n2 = tp.reshape(apply_linear(tp, store, params.tri_n2, h), {B, 1, n, 1, t});
  Val n3 = tp.reshape(apply_linear(tp, store, params.tri_n3, h), {B, 1, 1, n, t});
  Val e1 = tp.reshape(apply_linear(tp, store, params.tri_e1, e), {B, n, n, 1, t});
  Val e2 = tp.reshape(apply_linear(tp, store, params.tri_e2, e), {B, n, 1, n, t});  // e_ik
  // e_kj enters at triple position (j,k), so swap the edge axes first.
  Val e3v = apply_linear(tp, store, params.tri_e3, e);
  Val e3 = tp.reshape(tp.transpose(e3v, {0, 2, 1, 3}), {B, 1, n, n, t});
  Val gg = tp.reshape(apply_linear(tp, store, params.tri_g, g), {B, 1, 1, 1, t});

  Val tri = tp.broadcast_sum({n1, n2, n3, e1, e2, e3, gg}, {B, n, n, n, t});
  Val agg = tp.reduce_max(tri, 3, /*keepdims=*/false);  // max over the middle node k
  return apply_linear(tp, store, params.tri_up, agg);   // (B,n,n,h)
}

ProcessorStep mpnn_step(Tape& tp, ParamStore& store, const ProcessorParams& params,
                        const ProcessorConfig& cfg, const LatentState& state, Val h_prev) {
  const Shape xs = tp.value(state.x).shape();
  const int B = xs[0], n = xs[1], h = xs[2];
  check(tp.value(state.x).all_finite() && tp.value(state.e).all_finite() &&
            tp.value(state.g).all_finite() && tp.value(h_prev).all_finite(),
        "non-finite processor input");

  Val z = tp.concat({state.x, h_prev}, 2);  // (B,n,2h)

  // Message MLP layer 1 as a broadcast sum of per-argument projections.
  Val zi = tp.reshape(apply_linear(tp, store, params.msg_zi, z), {B, n, 1, h});
  Val zj = tp.reshape(apply_linear(tp, store, params.msg_zj, z), {B, 1, n, h});
  Val ee = apply_linear(tp, store, params.msg_e, state.e);
  Val gg = tp.reshape(apply_linear(tp, store, params.msg_g, state.g), {B, 1, 1, h});
  Val m1 = tp.relu(tp.broadcast_sum({zi, zj, ee, gg}, {B, n, n, h}));
  Val m2 = tp.relu(apply_linear(tp, store, params.msg_l2, m1));
  Val m3 = apply_linear(tp, store, params.msg_l3, m2);

  // Messages arrive at i from every j (fully connected): m3 is indexed
  // (b, i, j, c), so the max-aggregation runs over axis 2.
  Val m = tp.reduce_max(m3, 2, /*keepdims=*/false);  // (B,n,h)
  check(tp.value(m).all_finite(), "non-finite message aggregation");

  Val h_raw = tp.relu(tp.add(apply_linear(tp, store, params.readout_z, z),
                             apply_linear(tp, store, params.readout_m, m)));
  Val h_norm = tp.layer_norm(h_raw, tp.param(store, "proc/ln/gamma"),
                             tp.param(store, "proc/ln/beta"));
  check(tp.value(h_norm).all_finite(), "non-finite processed embeddings");

  ProcessorStep out;
  if (cfg.triplets) {
    out.edge = triplet_edge_latents(tp, store, params, cfg, h_norm, state.e, state.g);
    check(tp.value(out.edge).all_finite(), "non-finite triplet edge latents");
  }

  if (cfg.gated || cfg.force_gate_zero) {
    Val gate;
    if (cfg.force_gate_zero) {
      gate = tp.leaf(Tensor({B, n, h}));
    } else {
      Val g1 = tp.relu(tp.add(apply_linear(tp, store, params.gate_z, z),
                              apply_linear(tp, store, params.gate_m, m)));
      gate = tp.sigmoid(apply_linear(tp, store, params.gate_out, g1));
    }
    Val one_minus = tp.add_const(tp.scale(gate, -1.0), 1.0);
    out.node = tp.add(tp.mul(gate, h_norm), tp.mul(one_minus, h_prev));
    out.gate = gate;
  } else {
    out.node = h_norm;
  }
  return out;
}

}  // namespace nar
