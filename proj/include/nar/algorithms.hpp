#pragma once

// Reference executors for the in-scope classical algorithms. Each executor
// runs the textbook algorithm on a concrete instance and records a typed
// hint snapshot per documented step. Schemas and per-step semantics are
// described in docs/hint_schemas.md.

#include <map>
#include <string>
#include <vector>

#include "nar/feature.hpp"

namespace nar {

enum class AlgorithmId {
  INSERTION_SORT,
  BUBBLE_SORT,
  BINARY_SEARCH,
  MINIMUM,
  BFS,
  BELLMAN_FORD,
  FLOYD_WARSHALL,
  ACTIVITY_SELECTOR,
  LCS_LENGTH,
  NAIVE_STRING_MATCHER,
  GRAHAM_SCAN,
};

const std::vector<AlgorithmId>& all_algorithms();
const char* to_string(AlgorithmId id);
AlgorithmId algorithm_from_string(const std::string& s);

// The raw schema (before static-hint elimination).
const ProblemSpec& problem_spec(AlgorithmId id);

bool is_graph_task(AlgorithmId id);    // samples an adjacency structure
bool is_string_task(AlgorithmId id);   // fixed n, needle/haystack split
bool is_directed_graph(AlgorithmId id);
bool is_sorting_task(AlgorithmId id);  // outputs a predecessor permutation

// Executes the algorithm on the given inputs (matching the spec's INPUT
// features plus, where applicable, the deterministic initial hint state).
// Fails on malformed instances and on exceeding the step budget of 4*n^2
// recorded snapshots.
Trajectory run_algorithm(AlgorithmId id, int n, const std::map<std::string, Tensor>& inputs);

// --- small encoding helpers shared with the samplers and tests -------------

Tensor node_scalar(const std::vector<double>& v);
Tensor node_mask(const std::vector<double>& v);
Tensor node_mask_one(int n, int index);
Tensor node_pointer(const std::vector<int>& v);
Tensor node_categorical(const std::vector<int>& v, int num_categories);
Tensor edge_mask(int n);    // zero (n,n,1)
Tensor edge_scalar(int n);  // zero (n,n,1)
Tensor graph_scalar(double v);

// Predecessor chain in node-index order: node 0 points to itself, node i to
// i-1. This is the fixed-ordering hint that static elimination removes.
Tensor index_chain_pointer(int n);

}  // namespace nar
