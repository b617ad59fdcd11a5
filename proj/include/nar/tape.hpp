#pragma once

// Eager reverse-mode differentiation over Tensor. Every operation appends a
// node holding its forward value and a backward closure; backward() walks the
// nodes in reverse. Parameters are injected per tape through a ParamStore so
// their gradients can be collected by name afterwards.

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nar/common.hpp"
#include "nar/tensor.hpp"

namespace nar {

// Learnable tensor with Adam moment buffers and a per-parameter step count
// (per-task optimiser stepping updates disjoint subsets at different rates).
struct ParamTensor {
  Tensor value;
  Tensor m;
  Tensor v;
  int64_t steps = 0;
};

class ParamStore {
 public:
  // Creates a parameter; fails if the name already exists.
  ParamTensor& create(const std::string& name, Tensor init);
  ParamTensor& get(const std::string& name);
  const ParamTensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  // Sorted by name; iteration order is deterministic.
  std::map<std::string, ParamTensor>& all() { return params_; }
  const std::map<std::string, ParamTensor>& all() const { return params_; }

  int64_t total_elements() const;

 private:
  std::map<std::string, ParamTensor> params_;
};

struct Val {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  // --- graph construction -------------------------------------------------
  Val leaf(Tensor value, bool needs_grad = false);
  Val constant(double v) { return leaf(Tensor::scalar(v)); }
  // Injects (or reuses) a parameter leaf for this tape.
  Val param(ParamStore& store, const std::string& name);

  Val add(Val a, Val b);
  Val sub(Val a, Val b);
  Val mul(Val a, Val b);
  Val div(Val a, Val b);
  Val scale(Val a, double c);
  Val add_const(Val a, double c);
  Val matmul(Val a, Val b);
  // Batched matmul over a leading batch axis: (B,m,k) x (B,k,n).
  Val bmm(Val a, Val b);
  Val relu(Val a);
  Val sigmoid(Val a);
  Val exp(Val a);
  Val log(Val a);
  Val softmax(Val a, int axis);
  Val log_softmax(Val a, int axis);
  Val reduce_sum(Val a, int axis, bool keepdims);
  Val reduce_max(Val a, int axis, bool keepdims);
  Val reduce_mean_all(Val a);
  Val reduce_sum_all(Val a);
  Val reshape(Val a, Shape shape);
  Val transpose(Val a, std::vector<int> perm);
  Val broadcast(Val a, Shape shape);
  Val concat(const std::vector<Val>& parts, int axis);
  // Sum of mutually broadcastable operands materialised as one tensor of
  // `shape`; cheaper than chained add() for wide broadcasts.
  Val broadcast_sum(const std::vector<Val>& parts, Shape shape);
  // Layer normalisation over the last axis with learned affine rescale.
  Val layer_norm(Val a, Val gamma, Val beta, double eps = 1e-8);
  Val stop_gradient(Val a);

  // --- access ---------------------------------------------------------------
  const Tensor& value(Val v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  // Runs reverse accumulation from a scalar loss. Fails on non-finite loss.
  void backward(Val loss);

  // Gradient of the given node after backward(); zero tensor if unreached.
  Tensor grad(Val v) const;
  // Gradients of all parameters touched by this tape, keyed by name.
  std::map<std::string, Tensor> param_grads() const;

  // Releases stored values of all nodes except `keep` (only when gradients
  // are disabled); used to run long evaluation unrolls in bounded memory.
  void release_values(const std::vector<Val>& keep);

 private:
  struct Node {
    Tensor value;
    bool released = false;
    bool needs_grad = false;
    std::vector<int> parents;
    // Accumulates into grads given the node's own output gradient.
    std::function<void(Tape&, const Tensor&)> backprop;
  };

  Val push(Tensor value, std::vector<int> parents, std::function<void(Tape&, const Tensor&)> bp);
  bool any_needs_grad(const std::vector<int>& parents) const;
  void accum_grad(int id, const Tensor& g);

  bool grad_enabled_ = true;
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<char> grad_set_;
  std::map<std::string, int> param_ids_;
};

// ---------------------------------------------------------------------------
// Linear layer helpers
// ---------------------------------------------------------------------------

// A named linear map living in a ParamStore ("<name>/w", "<name>/b").
struct Linear {
  std::string name;
  int in = 0;
  int out = 0;
  bool has_bias = true;
};

enum class InitScheme { XAVIER_UNIFORM, LECUN };

// Creates weight (and bias) parameters for a linear layer.
Linear make_linear(ParamStore& store, const std::string& name, int in, int out, InitScheme scheme,
                   Rng& rng, bool has_bias = true, double bias_init = 0.0);

// Applies y = x W + b, where x has shape (..., in).
Val apply_linear(Tape& tp, ParamStore& store, const Linear& lin, Val x);

// Draws an (in, out) weight matrix. XAVIER_UNIFORM: U(-b, b) with
// b = sqrt(6 / (in + out)). LECUN: truncated normal (|z| <= 2) rescaled so the
// post-truncation standard deviation is 1/sqrt(in).
Tensor init_linear(int fan_in, int fan_out, InitScheme scheme, Rng& rng);

}  // namespace nar
