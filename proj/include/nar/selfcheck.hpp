#pragma once

// Independent verification suites: finite-difference gradient checks and
// brute-force algorithm oracles. Everything here recomputes expected results
// through a separate code path from the implementation it checks; it is used
// by the test binaries and the `selftest` CLI verb, never by training.

#include <functional>
#include <string>
#include <vector>

#include "nar/algorithms.hpp"
#include "nar/tape.hpp"
#include "nar/tensor.hpp"

namespace nar::selfcheck {

// Builds a scalar loss from leaf values (one per input tensor). Called many
// times with perturbed inputs, so it must be deterministic.
using LossBuilder = std::function<Val(Tape&, const std::vector<Val>&)>;

// Central finite differences against the tape's analytic gradients.
// Returns the max relative error over all input elements,
// |fd - an| / max(1, |fd|, |an|).
double fd_max_rel_err(const LossBuilder& build, std::vector<Tensor> inputs, double h = 1e-5);

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Every tape op over randomly shaped inputs; pass threshold 1e-4.
SuiteResult gradient_suite(int shapes_per_op, uint64_t seed);

// Random instances of one algorithm checked against a brute-force oracle
// written independently of the executor (sorted permutation, Dijkstra,
// min-plus powering, DP table, exhaustive scans, orientation hull).
SuiteResult oracle_suite(AlgorithmId id, int instances, uint64_t seed);

// All in-scope algorithms; stops at the first failing suite.
SuiteResult oracle_suite_all(int instances, uint64_t seed);

}  // namespace nar::selfcheck
