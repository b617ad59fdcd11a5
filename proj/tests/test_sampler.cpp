#include <cmath>
#include <set>

#include "doctest.h"
#include "nar/container.hpp"
#include "nar/sampler.hpp"

using namespace nar;

TEST_CASE("er graph extremes") {
  Rng rng(1);
  Tensor none = sample_er_graph(5, 0.0, false, rng);
  for (int64_t i = 0; i < none.numel(); ++i) CHECK(none[i] == 0.0);

  Tensor full = sample_er_graph(5, 1.0, false, rng);
  int edges = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      if (i == j) {
        CHECK(full[static_cast<int64_t>(i) * 5 + j] == 0.0);  // no self loops
      } else {
        CHECK(full[static_cast<int64_t>(i) * 5 + j] == 1.0);
        ++edges;
      }
    }
  CHECK(edges == 20);  // 10 undirected edges
}

TEST_CASE("er graph edge count matches the binomial expectation") {
  // n=16, p=0.5: 120 pairs, mean 60, sd sqrt(30). Mean over N draws has
  // sd sqrt(30)/sqrt(N); require |mean - 60| < 3 sd_mean.
  Rng rng(20240601);
  const int N = 10000;
  double total = 0;
  for (int d = 0; d < N; ++d) {
    Tensor adj = sample_er_graph(16, 0.5, false, rng);
    double count = 0;
    for (int i = 0; i < 16; ++i)
      for (int j = i + 1; j < 16; ++j) count += adj[static_cast<int64_t>(i) * 16 + j];
    total += count;
  }
  const double mean = total / N;
  const double sd_mean = std::sqrt(30.0) / std::sqrt(static_cast<double>(N));
  CHECK(std::abs(mean - 60.0) < 3.0 * sd_mean);
}

TEST_CASE("positions are strictly increasing") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor pos = sample_positions(12, rng);
    for (int i = 1; i < 12; ++i) CHECK(pos[i] > pos[i - 1]);
  }
}

TEST_CASE("string tasks are pinned to n = 20") {
  SamplerConfig cfg;
  cfg.algorithm = AlgorithmId::NAIVE_STRING_MATCHER;
  Rng rng(9);
  for (int i = 0; i < 10; ++i) {
    Trajectory t = sample_problem(cfg, rng);
    CHECK(t.n == 20);
  }
}

TEST_CASE("sampled sizes cover the whole range") {
  SamplerConfig cfg;
  cfg.algorithm = AlgorithmId::BFS;
  cfg.p_set = {0.5};
  Rng rng(31);
  std::set<int> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(sample_problem(cfg, rng).n);
  for (int n = 4; n <= 16; ++n) CHECK(seen.count(n) == 1);
}

TEST_CASE("identical config and seed give bit-identical trajectories") {
  SamplerConfig cfg;
  cfg.algorithm = AlgorithmId::GRAHAM_SCAN;
  auto draw = [&]() {
    Rng rng(424242);
    std::vector<Trajectory> ts;
    for (int i = 0; i < 5; ++i) ts.push_back(sample_problem(cfg, rng));
    return encode_trajectories(problem_spec(cfg.algorithm), ts);
  };
  CHECK(draw() == draw());
}

TEST_CASE("needle length respects the configured range") {
  SamplerConfig cfg;
  cfg.algorithm = AlgorithmId::NAIVE_STRING_MATCHER;
  cfg.needle_min = 4;
  cfg.needle_max = 4;
  Rng rng(8);
  Trajectory t = sample_problem(cfg, rng);
  double m = 0;
  for (int64_t i = 0; i < t.input("needle").numel(); ++i) m += t.input("needle")[i];
  CHECK(m == 4.0);
}

TEST_CASE("sampler config invariants are enforced") {
  SamplerConfig cfg;
  cfg.n_min = 2;  // below the minimum of 4
  Rng rng(1);
  CHECK_THROWS_AS(sample_problem(cfg, rng), NarError);
  cfg.n_min = 4;
  cfg.p_set = {0.0};  // zero excluded from the set
  CHECK_THROWS_AS(sample_problem(cfg, rng), NarError);
}
