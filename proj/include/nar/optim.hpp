#pragma once

// Adam optimisation with global-norm gradient clipping.

#include <map>
#include <string>

#include "nar/tape.hpp"
#include "nar/tensor.hpp"

namespace nar {

struct OptimConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Global L2 norm over all gradients (sorted by name for a fixed summation
// order).
double global_norm(const std::map<std::string, Tensor>& grads);

// Scales all gradients by c/g when the global norm g exceeds c.
void clip_by_global_norm(std::map<std::string, Tensor>& grads, double c);

// One Adam step over the named gradients. Parameters not present in `grads`
// are untouched (their moments and step counts do not advance), which is what
// per-task stepping requires. Fails on non-finite gradients, naming the
// parameter.
void adam_step(ParamStore& params, const std::map<std::string, Tensor>& grads,
               const OptimConfig& cfg);

}  // namespace nar
