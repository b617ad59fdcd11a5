#pragma once

// Problem-instance samplers. Samplers are pure functions of (config, rng
// state); the training pipeline treats them as infinite iterators and never
// materialises a dataset unless asked to dump one.

#include <optional>
#include <vector>

#include "nar/algorithms.hpp"

namespace nar {

struct SamplerConfig {
  AlgorithmId algorithm = AlgorithmId::BFS;
  int n_min = 4;
  int n_max = 16;
  std::vector<double> p_set = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int needle_min = 1;
  int needle_max = 8;
  uint64_t seed = 0;

  void validate() const;
};

// Erdos-Renyi adjacency: each pair connected independently with probability p;
// no self-loops; symmetric unless directed (then each direction sampled
// independently). Returns an (n, n, 1) mask.
Tensor sample_er_graph(int n, double p, bool directed, Rng& rng);

// Draws one full trajectory: size, connectivity/needle randomisation, inputs,
// then execution of the reference algorithm. `forced_n` pins the size (used
// by evaluation and tests); string tasks are fixed at n = 20 otherwise.
Trajectory sample_problem(const SamplerConfig& cfg, Rng& rng,
                          std::optional<int> forced_n = std::nullopt);

// Position scalar: n values uniform in [0,1], sorted ascending, re-drawn on
// ties so monotonicity is strict.
Tensor sample_positions(int n, Rng& rng);

}  // namespace nar
