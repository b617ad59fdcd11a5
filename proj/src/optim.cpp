#include "nar/optim.hpp"

#include <cmath>

namespace nar {

double global_norm(const std::map<std::string, Tensor>& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (int64_t i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
  return std::sqrt(sq);
}

void clip_by_global_norm(std::map<std::string, Tensor>& grads, double c) {
  check(c > 0.0, "clip bound must be positive");
  const double norm = global_norm(grads);
  if (norm <= c) return;
  const double s = c / norm;
  for (auto& [name, g] : grads)
    for (int64_t i = 0; i < g.numel(); ++i) g[i] *= s;
}

void adam_step(ParamStore& params, const std::map<std::string, Tensor>& grads,
               const OptimConfig& cfg) {
  for (const auto& [name, g] : grads) {
    ParamTensor& p = params.get(name);
    check(g.same_shape(p.value), "gradient shape mismatch for " + name);
    if (!g.all_finite()) fail("non-finite gradient for parameter " + name);
    p.steps += 1;
    const double t = static_cast<double>(p.steps);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (int64_t i = 0; i < g.numel(); ++i) {
      p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g[i];
      p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = p.m[i] / bc1;
      const double vhat = p.v[i] / bc2;
      p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace nar
