#include "doctest.h"
#include "nar/algorithms.hpp"
#include "nar/sampler.hpp"
#include "nar/selfcheck.hpp"

using namespace nar;

namespace {

std::vector<int> ptrs(const Tensor& t) {
  std::vector<int> v;
  for (int64_t i = 0; i < t.numel(); ++i) v.push_back(static_cast<int>(std::llround(t[i])));
  return v;
}

int one_index(const Tensor& t) {
  for (int64_t i = 0; i < t.numel(); ++i)
    if (t[i] > 0.5) return static_cast<int>(i);
  return -1;
}

}  // namespace

TEST_CASE("insertion sort pointer example") {
  std::map<std::string, Tensor> in;
  in.emplace("pos", node_scalar({0.1, 0.5, 0.9}));
  in.emplace("key", node_scalar({0.3, 0.1, 0.2}));
  Trajectory t = run_algorithm(AlgorithmId::INSERTION_SORT, 3, in);
  // Sorted order is nodes 1,2,0; the first sorted node points to itself.
  CHECK(ptrs(t.output("pred")) == std::vector<int>{2, 1, 1});
  CHECK(t.num_steps == 3);
}

TEST_CASE("bellman-ford worked example") {
  std::map<std::string, Tensor> in;
  in.emplace("pos", node_scalar({0.1, 0.5, 0.9}));
  in.emplace("s", node_mask_one(3, 0));
  Tensor adj({3, 3, 1}), w({3, 3, 1});
  adj.at({0, 1, 0}) = 1;
  w.at({0, 1, 0}) = 1.0;
  adj.at({1, 2, 0}) = 1;
  w.at({1, 2, 0}) = 2.0;
  adj.at({0, 2, 0}) = 1;
  w.at({0, 2, 0}) = 4.0;
  in.emplace("adj", adj);
  in.emplace("w", w);
  Trajectory t = run_algorithm(AlgorithmId::BELLMAN_FORD, 3, in);
  const Tensor d = t.hint_slice("d_h", t.num_steps - 1);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 1.0);
  CHECK(d[2] == 3.0);
  CHECK(ptrs(t.output("pi")) == std::vector<int>{0, 0, 1});
}

TEST_CASE("bellman-ford rejects negative cycles but allows negative edges") {
  std::map<std::string, Tensor> in;
  in.emplace("pos", node_scalar({0.1, 0.9}));
  in.emplace("s", node_mask_one(2, 0));
  Tensor adj({2, 2, 1}), w({2, 2, 1});
  adj.at({0, 1, 0}) = 1;
  w.at({0, 1, 0}) = -1.0;  // single negative edge: fine
  in.emplace("adj", adj);
  in.emplace("w", w);
  Trajectory ok = run_algorithm(AlgorithmId::BELLMAN_FORD, 2, in);
  CHECK(ok.hint_slice("d_h", ok.num_steps - 1)[1] == -1.0);

  adj.at({1, 0, 0}) = 1;
  w.at({1, 0, 0}) = 0.5;  // cycle 0->1->0 with total -0.5
  in.erase("adj");
  in.erase("w");
  in.emplace("adj", adj);
  in.emplace("w", w);
  CHECK_THROWS_AS(run_algorithm(AlgorithmId::BELLMAN_FORD, 2, in), NarError);
}

TEST_CASE("minimum on a single node is a one-step trajectory") {
  std::map<std::string, Tensor> in;
  in.emplace("pos", node_scalar({0.5}));
  in.emplace("key", node_scalar({0.7}));
  Trajectory t = run_algorithm(AlgorithmId::MINIMUM, 1, in);
  CHECK(t.num_steps == 1);
  CHECK(one_index(t.output("min")) == 0);
}

TEST_CASE("sorting a single node gives the trivial trajectory") {
  std::map<std::string, Tensor> in;
  in.emplace("pos", node_scalar({0.5}));
  in.emplace("key", node_scalar({0.7}));
  Trajectory t = run_algorithm(AlgorithmId::INSERTION_SORT, 1, in);
  CHECK(t.num_steps == 1);
  CHECK(ptrs(t.output("pred")) == std::vector<int>{0});
}

TEST_CASE("binary search answers the largest index with key <= target") {
  std::map<std::string, Tensor> in;
  in.emplace("pos", node_scalar({0.1, 0.3, 0.5, 0.7}));
  in.emplace("key", node_scalar({0.1, 0.4, 0.6, 0.9}));
  in.emplace("target", graph_scalar(0.5));
  Trajectory t = run_algorithm(AlgorithmId::BINARY_SEARCH, 4, in);
  CHECK(one_index(t.output("return")) == 1);

  // All keys above the target resolve to node 0.
  in.erase("target");
  in.emplace("target", graph_scalar(0.05));
  Trajectory t2 = run_algorithm(AlgorithmId::BINARY_SEARCH, 4, in);
  CHECK(one_index(t2.output("return")) == 0);

  // Unsorted keys are a malformed instance.
  in.erase("key");
  in.emplace("key", node_scalar({0.9, 0.1, 0.6, 0.4}));
  CHECK_THROWS_AS(run_algorithm(AlgorithmId::BINARY_SEARCH, 4, in), NarError);
}

TEST_CASE("graham scan rejects collinear instances") {
  std::map<std::string, Tensor> in;
  in.emplace("pos", node_scalar({0.1, 0.3, 0.5, 0.9}));
  in.emplace("x", node_scalar({0.0, 0.5, 1.0, 0.3}));
  in.emplace("y", node_scalar({0.0, 0.5, 1.0, 0.9}));  // first three collinear
  CHECK_THROWS_AS(run_algorithm(AlgorithmId::GRAHAM_SCAN, 4, in), NarError);
}

TEST_CASE("naive string matcher finds the first occurrence or the sentinel") {
  // haystack = a b a b  (nodes 0..3), needle = a b (nodes 4..5)
  std::map<std::string, Tensor> in;
  in.emplace("pos", node_scalar({0.05, 0.2, 0.4, 0.6, 0.8, 0.95}));
  in.emplace("needle", node_mask({0, 0, 0, 0, 1, 1}));
  in.emplace("key", node_categorical({0, 1, 0, 1, 0, 1}, 4));
  Trajectory t = run_algorithm(AlgorithmId::NAIVE_STRING_MATCHER, 6, in);
  CHECK(one_index(t.output("match")) == 0);

  in.erase("key");
  in.emplace("key", node_categorical({2, 2, 2, 2, 0, 1}, 4));  // no occurrence
  Trajectory t2 = run_algorithm(AlgorithmId::NAIVE_STRING_MATCHER, 6, in);
  CHECK(one_index(t2.output("match")) == 4);  // first needle node
}

TEST_CASE("oracle battery over random instances") {
  // The full 1000-instance battery runs in the acceptance suite; this keeps
  // the unit tests quick while still exercising every executor.
  auto res = selfcheck::oracle_suite_all(/*instances=*/40, /*seed=*/123);
  INFO(res.name << ": " << res.detail);
  CHECK(res.pass);
}

TEST_CASE("executors are deterministic given identical instances") {
  SamplerConfig cfg;
  cfg.algorithm = AlgorithmId::FLOYD_WARSHALL;
  Rng r1(77), r2(77);
  Trajectory a = sample_problem(cfg, r1);
  Trajectory b = sample_problem(cfg, r2);
  CHECK(a.n == b.n);
  CHECK(a.num_steps == b.num_steps);
  for (const auto& [name, arr] : a.hints) CHECK(b.hint(name).vec() == arr.vec());
  for (const auto& [name, arr] : a.outputs) CHECK(b.output(name).vec() == arr.vec());
}
