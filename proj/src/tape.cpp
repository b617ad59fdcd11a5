#include "nar/tape.hpp"

#include <algorithm>
#include <cmath>

namespace nar {

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

ParamTensor& ParamStore::create(const std::string& name, Tensor init) {
  check(!contains(name), "duplicate parameter: " + name);
  ParamTensor p;
  p.m = Tensor(init.shape());
  p.v = Tensor(init.shape());
  p.value = std::move(init);
  auto [it, ok] = params_.emplace(name, std::move(p));
  (void)ok;
  return it->second;
}

ParamTensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  check(it != params_.end(), "unknown parameter: " + name);
  return it->second;
}

const ParamTensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  check(it != params_.end(), "unknown parameter: " + name);
  return it->second;
}

int64_t ParamStore::total_elements() const {
  int64_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.numel();
  return n;
}

// ---------------------------------------------------------------------------
// Tape core
// ---------------------------------------------------------------------------

Val Tape::push(Tensor value, std::vector<int> parents,
               std::function<void(Tape&, const Tensor&)> bp) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.needs_grad = grad_enabled_ && any_needs_grad(n.parents);
  if (n.needs_grad) n.backprop = std::move(bp);
  nodes_.push_back(std::move(n));
  return Val{static_cast<int>(nodes_.size()) - 1};
}

bool Tape::any_needs_grad(const std::vector<int>& parents) const {
  for (int p : parents)
    if (nodes_[static_cast<size_t>(p)].needs_grad) return true;
  return false;
}

Val Tape::leaf(Tensor value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = grad_enabled_ && needs_grad;
  nodes_.push_back(std::move(n));
  return Val{static_cast<int>(nodes_.size()) - 1};
}

Val Tape::param(ParamStore& store, const std::string& name) {
  auto it = param_ids_.find(name);
  if (it != param_ids_.end()) return Val{it->second};
  Val v = leaf(store.get(name).value, /*needs_grad=*/true);
  param_ids_.emplace(name, v.id);
  return v;
}

const Tensor& Tape::value(Val v) const {
  check(v.valid() && v.id < size(), "invalid tape value");
  const Node& n = nodes_[static_cast<size_t>(v.id)];
  check(!n.released, "tape value was released");
  return n.value;
}

void Tape::accum_grad(int id, const Tensor& g) {
  if (!nodes_[static_cast<size_t>(id)].needs_grad) return;
  if (!grad_set_[static_cast<size_t>(id)]) {
    grads_[static_cast<size_t>(id)] = g;
    grad_set_[static_cast<size_t>(id)] = 1;
  } else {
    add_inplace(grads_[static_cast<size_t>(id)], g);
  }
}

void Tape::backward(Val loss) {
  check(grad_enabled_, "backward on a no-grad tape");
  check(loss.valid() && loss.id < size(), "invalid loss value");
  const Tensor& lv = value(loss);
  check(lv.numel() == 1, "loss must be scalar");
  check(std::isfinite(lv[0]), "non-finite loss");

  grads_.assign(nodes_.size(), Tensor());
  grad_set_.assign(nodes_.size(), 0);
  grads_[static_cast<size_t>(loss.id)] = Tensor::full(lv.shape(), 1.0);
  grad_set_[static_cast<size_t>(loss.id)] = 1;

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad || !grad_set_[static_cast<size_t>(id)] || !n.backprop) continue;
    n.backprop(*this, grads_[static_cast<size_t>(id)]);
  }
}

Tensor Tape::grad(Val v) const {
  check(v.valid() && v.id < size(), "invalid tape value");
  if (!grad_set_.empty() && grad_set_[static_cast<size_t>(v.id)])
    return grads_[static_cast<size_t>(v.id)];
  return Tensor(nodes_[static_cast<size_t>(v.id)].value.shape());
}

std::map<std::string, Tensor> Tape::param_grads() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : param_ids_) out.emplace(name, grad(Val{id}));
  return out;
}

void Tape::release_values(const std::vector<Val>& keep) {
  check(!grad_enabled_, "release_values requires a no-grad tape");
  std::vector<char> pinned(nodes_.size(), 0);
  for (Val v : keep)
    if (v.valid()) pinned[static_cast<size_t>(v.id)] = 1;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (pinned[i] || nodes_[i].released) continue;
    nodes_[i].value = Tensor();
    nodes_[i].released = true;
  }
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

namespace {
double relu_fn(double x) { return x > 0.0 ? x : 0.0; }
double sigmoid_fn(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double exp_fn(double x) { return std::exp(x); }
double log_fn(double x) { return std::log(x); }
}  // namespace

Val Tape::add(Val a, Val b) {
  Tensor out = binary_bcast(value(a), value(b), BinaryOp::ADD);
  Shape sa = value(a).shape(), sb = value(b).shape();
  return push(std::move(out), {a.id, b.id}, [a, b, sa, sb](Tape& tp, const Tensor& g) {
    tp.accum_grad(a.id, reduce_to_shape(g, sa));
    tp.accum_grad(b.id, reduce_to_shape(g, sb));
  });
}

Val Tape::sub(Val a, Val b) {
  Tensor out = binary_bcast(value(a), value(b), BinaryOp::SUB);
  Shape sa = value(a).shape(), sb = value(b).shape();
  return push(std::move(out), {a.id, b.id}, [a, b, sa, sb](Tape& tp, const Tensor& g) {
    tp.accum_grad(a.id, reduce_to_shape(g, sa));
    tp.accum_grad(b.id, reduce_to_shape(nar::scale(g, -1.0), sb));
  });
}

Val Tape::mul(Val a, Val b) {
  Tensor out = binary_bcast(value(a), value(b), BinaryOp::MUL);
  Shape sa = value(a).shape(), sb = value(b).shape();
  return push(std::move(out), {a.id, b.id}, [a, b, sa, sb](Tape& tp, const Tensor& g) {
    tp.accum_grad(a.id, reduce_to_shape(binary_bcast(g, tp.value(b), BinaryOp::MUL), sa));
    tp.accum_grad(b.id, reduce_to_shape(binary_bcast(g, tp.value(a), BinaryOp::MUL), sb));
  });
}

Val Tape::div(Val a, Val b) {
  Tensor out = binary_bcast(value(a), value(b), BinaryOp::DIV);
  Shape sa = value(a).shape(), sb = value(b).shape();
  return push(std::move(out), {a.id, b.id}, [a, b, sa, sb](Tape& tp, const Tensor& g) {
    const Tensor& bv = tp.value(b);
    tp.accum_grad(a.id, reduce_to_shape(binary_bcast(g, bv, BinaryOp::DIV), sa));
    // d/db (a/b) = -a / b^2
    Tensor gb = binary_bcast(binary_bcast(g, tp.value(a), BinaryOp::MUL),
                             binary_bcast(bv, bv, BinaryOp::MUL), BinaryOp::DIV);
    tp.accum_grad(b.id, reduce_to_shape(nar::scale(gb, -1.0), sb));
  });
}

Val Tape::scale(Val a, double c) {
  return push(nar::scale(value(a), c), {a.id},
              [a, c](Tape& tp, const Tensor& g) { tp.accum_grad(a.id, nar::scale(g, c)); });
}

Val Tape::add_const(Val a, double c) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += c;
  return push(std::move(out), {a.id},
              [a](Tape& tp, const Tensor& g) { tp.accum_grad(a.id, g); });
}

Val Tape::matmul(Val a, Val b) {
  Tensor out = matmul2d(value(a), value(b));
  return push(std::move(out), {a.id, b.id}, [a, b](Tape& tp, const Tensor& g) {
    tp.accum_grad(a.id, matmul2d_nt(g, tp.value(b)));
    tp.accum_grad(b.id, matmul2d_tn(tp.value(a), g));
  });
}

Val Tape::bmm(Val a, Val b) {
  Tensor out = batched_matmul(value(a), value(b), false, false);
  return push(std::move(out), {a.id, b.id}, [a, b](Tape& tp, const Tensor& g) {
    tp.accum_grad(a.id, batched_matmul(g, tp.value(b), false, true));
    tp.accum_grad(b.id, batched_matmul(tp.value(a), g, true, false));
  });
}

Val Tape::relu(Val a) {
  Val out = push(unary_map(value(a), relu_fn), {a.id}, nullptr);
  Node& n = nodes_[static_cast<size_t>(out.id)];
  if (n.needs_grad)
    n.backprop = [a, out](Tape& tp, const Tensor& g) {
      const Tensor& x = tp.value(a);
      Tensor gx(g.shape());
      for (int64_t i = 0; i < g.numel(); ++i) gx[i] = x[i] > 0.0 ? g[i] : 0.0;
      tp.accum_grad(a.id, gx);
    };
  return out;
}

Val Tape::sigmoid(Val a) {
  Val out = push(unary_map(value(a), sigmoid_fn), {a.id}, nullptr);
  Node& n = nodes_[static_cast<size_t>(out.id)];
  if (n.needs_grad)
    n.backprop = [a, out](Tape& tp, const Tensor& g) {
      const Tensor& y = tp.value(out);
      Tensor gx(g.shape());
      for (int64_t i = 0; i < g.numel(); ++i) gx[i] = g[i] * y[i] * (1.0 - y[i]);
      tp.accum_grad(a.id, gx);
    };
  return out;
}

Val Tape::exp(Val a) {
  Val out = push(unary_map(value(a), exp_fn), {a.id}, nullptr);
  Node& n = nodes_[static_cast<size_t>(out.id)];
  if (n.needs_grad)
    n.backprop = [a, out](Tape& tp, const Tensor& g) {
      tp.accum_grad(a.id, binary_bcast(g, tp.value(out), BinaryOp::MUL));
    };
  return out;
}

Val Tape::log(Val a) {
  Val out = push(unary_map(value(a), log_fn), {a.id}, nullptr);
  Node& n = nodes_[static_cast<size_t>(out.id)];
  if (n.needs_grad)
    n.backprop = [a](Tape& tp, const Tensor& g) {
      tp.accum_grad(a.id, binary_bcast(g, tp.value(a), BinaryOp::DIV));
    };
  return out;
}

Val Tape::softmax(Val a, int axis) {
  Val out = push(softmax_axis(value(a), axis), {a.id}, nullptr);
  Node& n = nodes_[static_cast<size_t>(out.id)];
  if (n.needs_grad)
    n.backprop = [a, out, axis](Tape& tp, const Tensor& g) {
      // dx = y * (g - sum(g * y, axis))
      const Tensor& y = tp.value(out);
      Tensor gy = binary_bcast(g, y, BinaryOp::MUL);
      Tensor s = reduce_sum_axis(gy, axis, /*keepdims=*/true);
      Tensor gx = binary_bcast(binary_bcast(g, s, BinaryOp::SUB), y, BinaryOp::MUL);
      tp.accum_grad(a.id, gx);
    };
  return out;
}

Val Tape::log_softmax(Val a, int axis) {
  Val out = push(log_softmax_axis(value(a), axis), {a.id}, nullptr);
  Node& n = nodes_[static_cast<size_t>(out.id)];
  if (n.needs_grad)
    n.backprop = [a, out, axis](Tape& tp, const Tensor& g) {
      // dx = g - softmax(x) * sum(g, axis)
      Tensor y = unary_map(tp.value(out), exp_fn);
      Tensor s = reduce_sum_axis(g, axis, /*keepdims=*/true);
      Tensor gx = binary_bcast(g, binary_bcast(y, s, BinaryOp::MUL), BinaryOp::SUB);
      tp.accum_grad(a.id, gx);
    };
  return out;
}

Val Tape::reduce_sum(Val a, int axis, bool keepdims) {
  Tensor out = reduce_sum_axis(value(a), axis, keepdims);
  Shape sa = value(a).shape();
  return push(std::move(out), {a.id}, [a, sa, axis, keepdims](Tape& tp, const Tensor& g) {
    Tensor gk = g;
    if (!keepdims) {
      Shape ks = sa;
      ks[static_cast<size_t>(axis)] = 1;
      gk = g.reshaped(ks);
    }
    tp.accum_grad(a.id, nar::broadcast_to(gk, sa));
  });
}

Val Tape::reduce_max(Val a, int axis, bool keepdims) {
  auto argmax = std::make_shared<std::vector<int64_t>>();
  Tensor out = reduce_max_axis(value(a), axis, keepdims, argmax.get());
  Shape sa = value(a).shape();
  return push(std::move(out), {a.id}, [a, sa, axis, argmax](Tape& tp, const Tensor& g) {
    // Route the gradient to the (first) argmax element along the axis.
    Tensor gx(sa);
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= sa[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < sa.size(); ++i) inner *= sa[i];
    const int64_t len = sa[static_cast<size_t>(axis)];
    const double* pg = g.data();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < inner; ++i) {
        const int64_t l = (*argmax)[static_cast<size_t>(o * inner + i)];
        gx[(o * len + l) * inner + i] = pg[o * inner + i];
      }
    tp.accum_grad(a.id, gx);
  });
}

Val Tape::reduce_mean_all(Val a) {
  const Tensor& av = value(a);
  const double inv = av.numel() > 0 ? 1.0 / static_cast<double>(av.numel()) : 0.0;
  Tensor out = Tensor::scalar(sum_all(av) * inv);
  Shape sa = av.shape();
  return push(std::move(out), {a.id}, [a, sa, inv](Tape& tp, const Tensor& g) {
    tp.accum_grad(a.id, Tensor::full(sa, g[0] * inv));
  });
}

Val Tape::reduce_sum_all(Val a) {
  Tensor out = Tensor::scalar(sum_all(value(a)));
  Shape sa = value(a).shape();
  return push(std::move(out), {a.id}, [a, sa](Tape& tp, const Tensor& g) {
    tp.accum_grad(a.id, Tensor::full(sa, g[0]));
  });
}

Val Tape::reshape(Val a, Shape shape) {
  Tensor out = value(a).reshaped(shape);
  Shape sa = value(a).shape();
  return push(std::move(out), {a.id},
              [a, sa](Tape& tp, const Tensor& g) { tp.accum_grad(a.id, g.reshaped(sa)); });
}

Val Tape::transpose(Val a, std::vector<int> perm) {
  Tensor out = nar::transpose(value(a), perm);
  std::vector<int> inv(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) inv[static_cast<size_t>(perm[i])] = static_cast<int>(i);
  return push(std::move(out), {a.id}, [a, inv](Tape& tp, const Tensor& g) {
    tp.accum_grad(a.id, nar::transpose(g, inv));
  });
}

Val Tape::broadcast(Val a, Shape shape) {
  Tensor out = nar::broadcast_to(value(a), shape);
  Shape sa = value(a).shape();
  return push(std::move(out), {a.id}, [a, sa](Tape& tp, const Tensor& g) {
    tp.accum_grad(a.id, reduce_to_shape(g, sa));
  });
}

Val Tape::concat(const std::vector<Val>& parts, int axis) {
  std::vector<const Tensor*> ptrs;
  std::vector<int> ids;
  std::vector<Shape> shapes;
  ptrs.reserve(parts.size());
  for (Val p : parts) {
    ptrs.push_back(&value(p));
    ids.push_back(p.id);
    shapes.push_back(value(p).shape());
  }
  Tensor out = nar::concat(ptrs, axis);
  return push(std::move(out), ids, [ids, shapes, axis](Tape& tp, const Tensor& g) {
    std::vector<Tensor> gs = split_like(g, shapes, axis);
    for (size_t i = 0; i < ids.size(); ++i) tp.accum_grad(ids[i], gs[i]);
  });
}

Val Tape::broadcast_sum(const std::vector<Val>& parts, Shape shape) {
  check(!parts.empty(), "broadcast_sum of nothing");
  Tensor out(shape);
  std::vector<int> ids;
  std::vector<Shape> shapes;
  for (Val p : parts) {
    add_broadcast_inplace(out, value(p));
    ids.push_back(p.id);
    shapes.push_back(value(p).shape());
  }
  return push(std::move(out), ids, [ids, shapes](Tape& tp, const Tensor& g) {
    for (size_t i = 0; i < ids.size(); ++i) {
      Shape aligned = shapes[i];
      // reduce_to_shape aligns trailing axes, matching broadcast semantics.
      tp.accum_grad(ids[i], reduce_to_shape(g, aligned).reshaped(shapes[i]));
    }
  });
}

Val Tape::layer_norm(Val a, Val gamma, Val beta, double eps) {
  auto mean = std::make_shared<Tensor>();
  auto inv_std = std::make_shared<Tensor>();
  Tensor xhat = layer_norm_last(value(a), eps, mean.get(), inv_std.get());
  Val xh = push(std::move(xhat), {a.id}, nullptr);
  Node& n = nodes_[static_cast<size_t>(xh.id)];
  if (n.needs_grad)
    n.backprop = [a, xh, inv_std](Tape& tp, const Tensor& g) {
      // dx = inv_std * (g - mean(g) - xhat * mean(g * xhat)), per instance.
      const Tensor& xhat_v = tp.value(xh);
      const Shape& s = xhat_v.shape();
      const int64_t len = s.back();
      const int64_t outer = xhat_v.numel() / len;
      Tensor gx(s);
      for (int64_t o = 0; o < outer; ++o) {
        const double* pg = g.data() + o * len;
        const double* px = xhat_v.data() + o * len;
        double m1 = 0.0, m2 = 0.0;
        for (int64_t l = 0; l < len; ++l) {
          m1 += pg[l];
          m2 += pg[l] * px[l];
        }
        m1 /= static_cast<double>(len);
        m2 /= static_cast<double>(len);
        const double is = (*inv_std)[o];
        double* pgx = gx.data() + o * len;
        for (int64_t l = 0; l < len; ++l) pgx[l] = is * (pg[l] - m1 - px[l] * m2);
      }
      tp.accum_grad(a.id, gx);
    };
  // Affine rescale as ordinary ops.
  return add(mul(xh, gamma), beta);
}

Val Tape::stop_gradient(Val a) {
  return leaf(value(a), /*needs_grad=*/false);
}

// ---------------------------------------------------------------------------
// Linear layers and initialisation
// ---------------------------------------------------------------------------

Tensor init_linear(int fan_in, int fan_out, InitScheme scheme, Rng& rng) {
  check(fan_in >= 1 && fan_out >= 1, "init_linear fans must be >= 1");
  Tensor w({fan_in, fan_out});
  if (scheme == InitScheme::XAVIER_UNIFORM) {
    const double b = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-b, b);
  } else {
    // Truncation at 2 sigma shrinks the std by ~0.87962566; divide it back out
    // so the realised std is exactly 1/sqrt(fan_in).
    const double kTruncStdCorrection = 0.879625662334023;
    const double std = 1.0 / std::sqrt(static_cast<double>(fan_in)) / kTruncStdCorrection;
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.truncated_normal(2.0) * std;
  }
  return w;
}

Linear make_linear(ParamStore& store, const std::string& name, int in, int out, InitScheme scheme,
                   Rng& rng, bool has_bias, double bias_init) {
  Linear lin{name, in, out, has_bias};
  store.create(name + "/w", init_linear(in, out, scheme, rng));
  if (has_bias) store.create(name + "/b", Tensor::full({out}, bias_init));
  return lin;
}

Val apply_linear(Tape& tp, ParamStore& store, const Linear& lin, Val x) {
  const Shape xs = tp.value(x).shape();
  check(!xs.empty() && xs.back() == lin.in,
        "linear " + lin.name + " expects input dim " + std::to_string(lin.in) + ", got " +
            shape_str(xs));
  const int64_t rows = tp.value(x).numel() / lin.in;
  Val flat = tp.reshape(x, {static_cast<int>(rows), lin.in});
  Val w = tp.param(store, lin.name + "/w");
  Val y = tp.matmul(flat, w);
  if (lin.has_bias) y = tp.add(y, tp.param(store, lin.name + "/b"));
  Shape out_shape = xs;
  out_shape.back() = lin.out;
  return tp.reshape(y, out_shape);
}

}  // namespace nar
