#include "doctest.h"
#include "nar/tensor.hpp"

using namespace nar;

TEST_CASE("shape utilities") {
  CHECK(shape_numel({2, 3, 4}) == 24);
  CHECK(shape_numel({}) == 1);
  CHECK(broadcast_shapes({2, 1, 4}, {3, 1}) == Shape{2, 3, 4});
  CHECK(broadcast_shapes({}, {5}) == Shape{5});
  CHECK_THROWS_AS(broadcast_shapes({2, 3}, {4, 3}), NarError);
}

TEST_CASE("binary broadcast matches manual computation") {
  Tensor a({2, 1}, {1.0, 2.0});
  Tensor b({1, 3}, {10.0, 20.0, 30.0});
  Tensor c = binary_bcast(a, b, BinaryOp::ADD);
  CHECK(c.shape() == Shape{2, 3});
  CHECK(c.at({0, 0}) == 11.0);
  CHECK(c.at({0, 2}) == 31.0);
  CHECK(c.at({1, 1}) == 22.0);

  Tensor d = binary_bcast(a, b, BinaryOp::MUL);
  CHECK(d.at({1, 2}) == 60.0);
}

TEST_CASE("reduce_to_shape sums over broadcast axes") {
  Tensor g({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = reduce_to_shape(g, {2, 1});
  CHECK(r.at({0, 0}) == 6.0);
  CHECK(r.at({1, 0}) == 15.0);
  Tensor r2 = reduce_to_shape(g, {3});
  CHECK(r2[0] == 5.0);
  CHECK(r2[2] == 9.0);
}

TEST_CASE("matmul agrees with hand computation") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor c = matmul2d(a, b);
  CHECK(c.at({0, 0}) == doctest::Approx(58.0));
  CHECK(c.at({0, 1}) == doctest::Approx(64.0));
  CHECK(c.at({1, 0}) == doctest::Approx(139.0));
  CHECK(c.at({1, 1}) == doctest::Approx(154.0));
}

TEST_CASE("axis reductions") {
  Tensor a({2, 3}, {1, 5, 3, 2, 4, 6});
  Tensor s = reduce_sum_axis(a, 1, false);
  CHECK(s.shape() == Shape{2});
  CHECK(s[0] == 9.0);
  CHECK(s[1] == 12.0);

  std::vector<int64_t> arg;
  Tensor m = reduce_max_axis(a, 1, false, &arg);
  CHECK(m[0] == 5.0);
  CHECK(m[1] == 6.0);
  CHECK(arg[0] == 1);
  CHECK(arg[1] == 2);

  // Ties resolve to the first index.
  Tensor t({3}, {2.0, 2.0, 1.0});
  reduce_max_axis(t, 0, false, &arg);
  CHECK(arg[0] == 0);
}

TEST_CASE("transpose and concat") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor at = transpose(a, {1, 0});
  CHECK(at.shape() == Shape{3, 2});
  CHECK(at.at({0, 1}) == 4.0);
  CHECK(at.at({2, 0}) == 3.0);

  Tensor b({2, 2}, {9, 9, 9, 9});
  Tensor c = concat({&a, &b}, 1);
  CHECK(c.shape() == Shape{2, 5});
  CHECK(c.at({0, 3}) == 9.0);
  CHECK(c.at({1, 2}) == 6.0);

  auto parts = split_like(c, {{2, 3}, {2, 2}}, 1);
  CHECK(parts[0].vec() == a.vec());
  CHECK(parts[1].vec() == b.vec());
}

TEST_CASE("softmax rows sum to one") {
  Tensor a({2, 4}, {0.5, -1.0, 2.0, 0.0, 3.0, 3.0, 3.0, 3.0});
  Tensor s = softmax_axis(a, 1);
  for (int r = 0; r < 2; ++r) {
    double z = 0;
    for (int c = 0; c < 4; ++c) z += s.at({r, c});
    CHECK(z == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(s.at({1, 0}) == doctest::Approx(0.25));
}

TEST_CASE("layer norm statistics are standardised") {
  Rng rng(7);
  Tensor a({5, 16});
  for (int64_t i = 0; i < a.numel(); ++i) a[i] = rng.uniform(-3.0, 3.0);
  Tensor mean, inv_std;
  Tensor y = layer_norm_last(a, 1e-8, &mean, &inv_std);
  for (int r = 0; r < 5; ++r) {
    double m = 0, v = 0;
    for (int c = 0; c < 16; ++c) m += y.at({r, c});
    m /= 16;
    for (int c = 0; c < 16; ++c) {
      const double d = y.at({r, c}) - m;
      v += d * d;
    }
    v /= 16;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(v - 1.0) < 1e-6);
  }
}
