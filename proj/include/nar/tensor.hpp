#pragma once

// Dense row-major tensor of doubles plus the raw numeric kernels the
// autodiff tape is built from. Kernels are pure functions; nothing here
// records gradients.

#include <cstdint>
#include <string>
#include <vector>

#include "nar/common.hpp"

namespace nar {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v) { return Tensor({}, {v}); }

  int rank() const { return static_cast<int>(shape_.size()); }
  const Shape& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Multi-index access, rank checked.
  double& at(std::initializer_list<int> idx);
  double at(std::initializer_list<int> idx) const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

  // Returns a copy with a new shape of equal element count.
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Shape utilities
// ---------------------------------------------------------------------------

// Row-major strides; size-1 dims get their natural stride.
std::vector<int64_t> row_major_strides(const Shape& s);

// Numpy-style broadcast of two shapes; fails on incompatible dims.
Shape broadcast_shapes(const Shape& a, const Shape& b);

// ---------------------------------------------------------------------------
// Kernels. Out-of-place unless suffixed _inplace.
// ---------------------------------------------------------------------------

enum class BinaryOp { ADD, SUB, MUL, DIV };

Tensor binary_bcast(const Tensor& a, const Tensor& b, BinaryOp op);
// Sum-reduces `g` (shaped like the broadcast output) back down to `target`.
Tensor reduce_to_shape(const Tensor& g, const Shape& target);

Tensor scale(const Tensor& a, double c);
Tensor unary_map(const Tensor& a, double (*fn)(double));

// 2-D matrix multiply (m,k)x(k,n). Uses BLAS when available.
Tensor matmul2d(const Tensor& a, const Tensor& b);
// C += A^T * B and C += A * B^T helpers for backward passes.
Tensor matmul2d_tn(const Tensor& a, const Tensor& b);  // (k,m)^T x (k,n) -> (m,n)
Tensor matmul2d_nt(const Tensor& a, const Tensor& b);  // (m,k) x (n,k)^T -> (m,n)

// Batched matrix multiply (B,m,k)x(B,k,n) -> (B,m,n), with optional
// transposes of the trailing two axes.
Tensor batched_matmul(const Tensor& a, const Tensor& b, bool ta, bool tb);

// Reduction over one axis. keepdims keeps a size-1 axis in place.
Tensor reduce_sum_axis(const Tensor& a, int axis, bool keepdims);
// Max over one axis; argmax (first index on ties) returned through out param.
Tensor reduce_max_axis(const Tensor& a, int axis, bool keepdims, std::vector<int64_t>* argmax);

double sum_all(const Tensor& a);
double max_all(const Tensor& a);

Tensor broadcast_to(const Tensor& a, const Shape& target);
Tensor transpose(const Tensor& a, const std::vector<int>& perm);
Tensor concat(const std::vector<const Tensor*>& parts, int axis);
std::vector<Tensor> split_like(const Tensor& whole, const std::vector<Shape>& parts, int axis);

// Softmax / log-softmax over the given axis.
Tensor softmax_axis(const Tensor& a, int axis);
Tensor log_softmax_axis(const Tensor& a, int axis);

// Layer normalisation over the last axis; returns the normalised tensor and
// fills mean/inv_std (shape = a with last dim 1) for the backward pass.
Tensor layer_norm_last(const Tensor& a, double eps, Tensor* mean, Tensor* inv_std);

// Elementwise accumulate: dst += src (same shape).
void add_inplace(Tensor& dst, const Tensor& src);

// dst += src with numpy broadcasting of src to dst's shape.
void add_broadcast_inplace(Tensor& dst, const Tensor& src);

}  // namespace nar
