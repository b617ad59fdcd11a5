#include "nar/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef NAR_USE_BLAS
#include <cblas.h>
#endif

namespace nar {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) {
    check(d >= 0, "negative dimension");
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check(static_cast<int64_t>(data_.size()) == shape_numel(shape_),
        "tensor data length does not match shape " + shape_str(shape_));
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), v);
  return t;
}

double& Tensor::at(std::initializer_list<int> idx) {
  check(static_cast<int>(idx.size()) == rank(), "index rank mismatch");
  int64_t flat = 0;
  auto strides = row_major_strides(shape_);
  size_t i = 0;
  for (int v : idx) flat += strides[i++] * v;
  return data_[static_cast<size_t>(flat)];
}

double Tensor::at(std::initializer_list<int> idx) const {
  return const_cast<Tensor*>(this)->at(idx);
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::reshaped(Shape shape) const {
  check(shape_numel(shape) == numel(), "reshape element count mismatch");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

std::vector<int64_t> row_major_strides(const Shape& s) {
  std::vector<int64_t> strides(s.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    strides[static_cast<size_t>(i)] = acc;
    acc *= s[static_cast<size_t>(i)];
  }
  return strides;
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (size_t i = 0; i < r; ++i) {
    const int da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const int db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    check(da == db || da == 1 || db == 1,
          "shapes not broadcastable: " + shape_str(a) + " vs " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

namespace {

// Strides of `s` viewed as shape `target` (zero stride on broadcast dims).
std::vector<int64_t> bcast_strides(const Shape& s, const Shape& target) {
  auto base = row_major_strides(s);
  std::vector<int64_t> out(target.size(), 0);
  const size_t off = target.size() - s.size();
  for (size_t i = 0; i < s.size(); ++i)
    out[off + i] = (s[i] == 1 && target[off + i] != 1) ? 0 : base[i];
  return out;
}

template <typename F>
void bcast_loop(const Tensor& a, const Tensor& b, Tensor& out, F&& f) {
  const Shape& os = out.shape();
  const auto sa = bcast_strides(a.shape(), os);
  const auto sb = bcast_strides(b.shape(), os);
  const int r = static_cast<int>(os.size());
  const int64_t n = out.numel();
  if (n == 0) return;

  // Fast path: both operands already have the output shape.
  if (a.shape() == os && b.shape() == os) {
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
    return;
  }

  std::vector<int> idx(static_cast<size_t>(r), 0);
  int64_t oa = 0, ob = 0;
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  // Innermost dimension handled in a tight loop.
  const int last = r - 1;
  const int64_t inner = r > 0 ? os[static_cast<size_t>(last)] : 1;
  const int64_t sal = r > 0 ? sa[static_cast<size_t>(last)] : 0;
  const int64_t sbl = r > 0 ? sb[static_cast<size_t>(last)] : 0;
  const int64_t outer = n / std::max<int64_t>(inner, 1);
  for (int64_t o = 0; o < outer; ++o) {
    int64_t ia = oa, ib = ob;
    for (int64_t i = 0; i < inner; ++i) {
      *po++ = f(pa[ia], pb[ib]);
      ia += sal;
      ib += sbl;
    }
    // Advance the outer multi-index.
    for (int d = last - 1; d >= 0; --d) {
      oa += sa[static_cast<size_t>(d)];
      ob += sb[static_cast<size_t>(d)];
      if (++idx[static_cast<size_t>(d)] < os[static_cast<size_t>(d)]) break;
      oa -= sa[static_cast<size_t>(d)] * os[static_cast<size_t>(d)];
      ob -= sb[static_cast<size_t>(d)] * os[static_cast<size_t>(d)];
      idx[static_cast<size_t>(d)] = 0;
    }
  }
}

}  // namespace

Tensor binary_bcast(const Tensor& a, const Tensor& b, BinaryOp op) {
  Tensor out(broadcast_shapes(a.shape(), b.shape()));
  switch (op) {
    case BinaryOp::ADD:
      bcast_loop(a, b, out, [](double x, double y) { return x + y; });
      break;
    case BinaryOp::SUB:
      bcast_loop(a, b, out, [](double x, double y) { return x - y; });
      break;
    case BinaryOp::MUL:
      bcast_loop(a, b, out, [](double x, double y) { return x * y; });
      break;
    case BinaryOp::DIV:
      bcast_loop(a, b, out, [](double x, double y) { return x / y; });
      break;
  }
  return out;
}

Tensor reduce_to_shape(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor out(target);
  const auto st = bcast_strides(target, g.shape());
  const Shape& gs = g.shape();
  const int r = static_cast<int>(gs.size());
  std::vector<int> idx(static_cast<size_t>(r), 0);
  int64_t ot = 0;
  const double* pg = g.data();
  double* po = out.data();
  const int64_t n = g.numel();
  for (int64_t flat = 0; flat < n; ++flat) {
    po[ot] += pg[flat];
    for (int d = r - 1; d >= 0; --d) {
      ot += st[static_cast<size_t>(d)];
      if (++idx[static_cast<size_t>(d)] < gs[static_cast<size_t>(d)]) break;
      ot -= st[static_cast<size_t>(d)] * gs[static_cast<size_t>(d)];
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.numel(); ++i) po[i] = pa[i] * c;
  return out;
}

Tensor unary_map(const Tensor& a, double (*fn)(double)) {
  Tensor out(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.numel(); ++i) po[i] = fn(pa[i]);
  return out;
}

namespace {

void gemm(bool ta, bool tb, int m, int n, int k, const double* a, const double* b, double* c) {
#ifdef NAR_USE_BLAS
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, 1.0, a, ta ? m : k, b, tb ? k : n, 0.0, c, n);
#else
  // Portable fallback; fine for tests, slow for training.
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) {
        const double av = ta ? a[p * m + i] : a[i * k + p];
        const double bv = tb ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
#endif
}

}  // namespace

Tensor matmul2d(const Tensor& a, const Tensor& b) {
  check(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
        "matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor out({a.dim(0), b.dim(1)});
  gemm(false, false, a.dim(0), b.dim(1), a.dim(1), a.data(), b.data(), out.data());
  return out;
}

Tensor matmul2d_tn(const Tensor& a, const Tensor& b) {
  check(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0), "matmul_tn shape mismatch");
  Tensor out({a.dim(1), b.dim(1)});
  gemm(true, false, a.dim(1), b.dim(1), a.dim(0), a.data(), b.data(), out.data());
  return out;
}

Tensor matmul2d_nt(const Tensor& a, const Tensor& b) {
  check(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1), "matmul_nt shape mismatch");
  Tensor out({a.dim(0), b.dim(0)});
  gemm(false, true, a.dim(0), b.dim(0), a.dim(1), a.data(), b.data(), out.data());
  return out;
}

Tensor batched_matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  check(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0), "batched_matmul rank mismatch");
  const int B = a.dim(0);
  const int m = ta ? a.dim(2) : a.dim(1);
  const int ka = ta ? a.dim(1) : a.dim(2);
  const int kb = tb ? b.dim(2) : b.dim(1);
  const int n = tb ? b.dim(1) : b.dim(2);
  check(ka == kb, "batched_matmul inner dim mismatch");
  Tensor out({B, m, n});
  const int64_t sa = static_cast<int64_t>(a.dim(1)) * a.dim(2);
  const int64_t sb = static_cast<int64_t>(b.dim(1)) * b.dim(2);
  const int64_t so = static_cast<int64_t>(m) * n;
  for (int i = 0; i < B; ++i)
    gemm(ta, tb, m, n, ka, a.data() + i * sa, b.data() + i * sb, out.data() + i * so);
  return out;
}

namespace {

// Views shape as (outer, axis, inner) around `axis`.
void axis_split(const Shape& s, int axis, int64_t& outer, int64_t& len, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
  len = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
}

Shape drop_or_keep_axis(const Shape& s, int axis, bool keepdims) {
  Shape out = s;
  if (keepdims)
    out[static_cast<size_t>(axis)] = 1;
  else
    out.erase(out.begin() + axis);
  return out;
}

}  // namespace

Tensor reduce_sum_axis(const Tensor& a, int axis, bool keepdims) {
  check(axis >= 0 && axis < a.rank(), "reduce axis out of range");
  int64_t outer, len, inner;
  axis_split(a.shape(), axis, outer, len, inner);
  Tensor out(drop_or_keep_axis(a.shape(), axis, keepdims));
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      double acc = 0.0;
      const double* base = pa + (o * len) * inner + i;
      for (int64_t l = 0; l < len; ++l) acc += base[l * inner];
      po[o * inner + i] = acc;
    }
  return out;
}

Tensor reduce_max_axis(const Tensor& a, int axis, bool keepdims, std::vector<int64_t>* argmax) {
  check(axis >= 0 && axis < a.rank(), "reduce axis out of range");
  check(a.dim(axis) > 0, "max over empty axis");
  int64_t outer, len, inner;
  axis_split(a.shape(), axis, outer, len, inner);
  Tensor out(drop_or_keep_axis(a.shape(), axis, keepdims));
  if (argmax) argmax->assign(static_cast<size_t>(outer * inner), 0);
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      const double* base = pa + (o * len) * inner + i;
      double best = base[0];
      int64_t bi = 0;
      for (int64_t l = 1; l < len; ++l) {
        const double v = base[l * inner];
        if (v > best) {
          best = v;
          bi = l;
        }
      }
      po[o * inner + i] = best;
      if (argmax) (*argmax)[static_cast<size_t>(o * inner + i)] = bi;
    }
  return out;
}

double sum_all(const Tensor& a) {
  double acc = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) acc += a[i];
  return acc;
}

double max_all(const Tensor& a) {
  check(a.numel() > 0, "max of empty tensor");
  double best = a[0];
  for (int64_t i = 1; i < a.numel(); ++i) best = std::max(best, a[i]);
  return best;
}

Tensor broadcast_to(const Tensor& a, const Shape& target) {
  check(broadcast_shapes(a.shape(), target) == target,
        "cannot broadcast " + shape_str(a.shape()) + " to " + shape_str(target));
  Tensor out(target);
  bcast_loop(a, out, out, [](double x, double) { return x; });
  return out;
}

Tensor transpose(const Tensor& a, const std::vector<int>& perm) {
  check(static_cast<int>(perm.size()) == a.rank(), "transpose perm rank mismatch");
  Shape os(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) os[i] = a.dim(perm[i]);
  Tensor out(os);
  const auto sa = row_major_strides(a.shape());
  std::vector<int64_t> stride_for_out(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) stride_for_out[i] = sa[static_cast<size_t>(perm[i])];
  const int r = a.rank();
  std::vector<int> idx(static_cast<size_t>(r), 0);
  const double* pa = a.data();
  double* po = out.data();
  int64_t src = 0;
  const int64_t n = a.numel();
  for (int64_t flat = 0; flat < n; ++flat) {
    po[flat] = pa[src];
    for (int d = r - 1; d >= 0; --d) {
      src += stride_for_out[static_cast<size_t>(d)];
      if (++idx[static_cast<size_t>(d)] < os[static_cast<size_t>(d)]) break;
      src -= stride_for_out[static_cast<size_t>(d)] * os[static_cast<size_t>(d)];
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  return out;
}

Tensor concat(const std::vector<const Tensor*>& parts, int axis) {
  check(!parts.empty(), "concat of nothing");
  const int r = parts[0]->rank();
  check(axis >= 0 && axis < r, "concat axis out of range");
  Shape os = parts[0]->shape();
  int total = 0;
  for (const Tensor* p : parts) {
    check(p->rank() == r, "concat rank mismatch");
    for (int d = 0; d < r; ++d)
      if (d != axis) check(p->dim(d) == os[static_cast<size_t>(d)], "concat shape mismatch");
    total += p->dim(axis);
  }
  os[static_cast<size_t>(axis)] = total;
  Tensor out(os);
  int64_t outer, len, inner;
  axis_split(os, axis, outer, len, inner);
  double* po = out.data();
  for (int64_t o = 0; o < outer; ++o) {
    int64_t written = 0;
    for (const Tensor* p : parts) {
      const int64_t plen = p->dim(axis);
      const double* src = p->data() + o * plen * inner;
      std::copy(src, src + plen * inner, po + (o * len + written) * inner);
      written += plen;
    }
  }
  return out;
}

std::vector<Tensor> split_like(const Tensor& whole, const std::vector<Shape>& parts, int axis) {
  std::vector<Tensor> out;
  out.reserve(parts.size());
  int64_t outer, len, inner;
  axis_split(whole.shape(), axis, outer, len, inner);
  int64_t offset = 0;
  for (const Shape& ps : parts) {
    Tensor t(ps);
    const int64_t plen = ps[static_cast<size_t>(axis)];
    for (int64_t o = 0; o < outer; ++o) {
      const double* src = whole.data() + (o * len + offset) * inner;
      std::copy(src, src + plen * inner, t.data() + o * plen * inner);
    }
    offset += plen;
    out.push_back(std::move(t));
  }
  check(offset == len, "split sizes do not cover the axis");
  return out;
}

Tensor softmax_axis(const Tensor& a, int axis) {
  check(axis >= 0 && axis < a.rank(), "softmax axis out of range");
  int64_t outer, len, inner;
  axis_split(a.shape(), axis, outer, len, inner);
  Tensor out(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      const double* src = pa + o * len * inner + i;
      double* dst = po + o * len * inner + i;
      double mx = src[0];
      for (int64_t l = 1; l < len; ++l) mx = std::max(mx, src[l * inner]);
      double z = 0.0;
      for (int64_t l = 0; l < len; ++l) {
        const double e = std::exp(src[l * inner] - mx);
        dst[l * inner] = e;
        z += e;
      }
      for (int64_t l = 0; l < len; ++l) dst[l * inner] /= z;
    }
  return out;
}

Tensor log_softmax_axis(const Tensor& a, int axis) {
  check(axis >= 0 && axis < a.rank(), "log_softmax axis out of range");
  int64_t outer, len, inner;
  axis_split(a.shape(), axis, outer, len, inner);
  Tensor out(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      const double* src = pa + o * len * inner + i;
      double* dst = po + o * len * inner + i;
      double mx = src[0];
      for (int64_t l = 1; l < len; ++l) mx = std::max(mx, src[l * inner]);
      double z = 0.0;
      for (int64_t l = 0; l < len; ++l) z += std::exp(src[l * inner] - mx);
      const double lz = mx + std::log(z);
      for (int64_t l = 0; l < len; ++l) dst[l * inner] = src[l * inner] - lz;
    }
  return out;
}

Tensor layer_norm_last(const Tensor& a, double eps, Tensor* mean, Tensor* inv_std) {
  check(a.rank() >= 1, "layer_norm needs rank >= 1");
  const int64_t len = a.dim(a.rank() - 1);
  const int64_t outer = a.numel() / std::max<int64_t>(len, 1);
  Shape stat_shape = a.shape();
  stat_shape.back() = 1;
  if (mean) *mean = Tensor(stat_shape);
  if (inv_std) *inv_std = Tensor(stat_shape);
  Tensor out(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t o = 0; o < outer; ++o) {
    const double* src = pa + o * len;
    double* dst = po + o * len;
    double mu = 0.0;
    for (int64_t l = 0; l < len; ++l) mu += src[l];
    mu /= static_cast<double>(len);
    double var = 0.0;
    for (int64_t l = 0; l < len; ++l) {
      const double d = src[l] - mu;
      var += d * d;
    }
    var /= static_cast<double>(len);
    const double is = 1.0 / std::sqrt(var + eps);
    for (int64_t l = 0; l < len; ++l) dst[l] = (src[l] - mu) * is;
    if (mean) (*mean)[o] = mu;
    if (inv_std) (*inv_std)[o] = is;
  }
  return out;
}

void add_inplace(Tensor& dst, const Tensor& src) {
  check(dst.same_shape(src), "add_inplace shape mismatch");
  double* pd = dst.data();
  const double* ps = src.data();
  for (int64_t i = 0; i < dst.numel(); ++i) pd[i] += ps[i];
}

void add_broadcast_inplace(Tensor& dst, const Tensor& src) {
  check(broadcast_shapes(src.shape(), dst.shape()) == dst.shape(),
        "cannot broadcast " + shape_str(src.shape()) + " into " + shape_str(dst.shape()));
  if (dst.same_shape(src)) {
    add_inplace(dst, src);
    return;
  }
  const Shape& os = dst.shape();
  const auto ss = bcast_strides(src.shape(), os);
  const int r = static_cast<int>(os.size());
  std::vector<int> idx(static_cast<size_t>(r), 0);
  int64_t si = 0;
  double* pd = dst.data();
  const double* ps = src.data();
  const int64_t n = dst.numel();
  const int last = r - 1;
  const int64_t inner = r > 0 ? os[static_cast<size_t>(last)] : 1;
  const int64_t ssl = r > 0 ? ss[static_cast<size_t>(last)] : 0;
  const int64_t outer = n / std::max<int64_t>(inner, 1);
  for (int64_t o = 0; o < outer; ++o) {
    int64_t s = si;
    for (int64_t i = 0; i < inner; ++i) {
      *pd++ += ps[s];
      s += ssl;
    }
    for (int d = last - 1; d >= 0; --d) {
      si += ss[static_cast<size_t>(d)];
      if (++idx[static_cast<size_t>(d)] < os[static_cast<size_t>(d)]) break;
      si -= ss[static_cast<size_t>(d)] * os[static_cast<size_t>(d)];
      idx[static_cast<size_t>(d)] = 0;
    }
  }
}

}  // namespace nar
