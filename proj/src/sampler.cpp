#include "nar/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace nar {

void SamplerConfig::validate() const {
  check(n_min >= 4 && n_min <= n_max, "sampler size range must satisfy 4 <= n_min <= n_max");
  check(!p_set.empty(), "p_set must not be empty");
  for (double p : p_set) check(p > 0.0 && p <= 1.0, "p values must lie in (0, 1]");
  check(needle_min >= 1 && needle_min <= needle_max, "needle range must satisfy 1 <= min <= max");
}

Tensor sample_er_graph(int n, double p, bool directed, Rng& rng) {
  check(p >= 0.0 && p <= 1.0, "edge probability out of [0, 1]");
  Tensor adj({n, n, 1});
  for (int i = 0; i < n; ++i)
    for (int j = directed ? 0 : i + 1; j < n; ++j) {
      if (i == j) continue;
      if (rng.bernoulli(p)) {
        adj[static_cast<int64_t>(i) * n + j] = 1.0;
        if (!directed) adj[static_cast<int64_t>(j) * n + i] = 1.0;
      }
    }
  return adj;
}

Tensor sample_positions(int n, Rng& rng) {
  std::vector<double> pos(static_cast<size_t>(n));
  bool distinct = false;
  while (!distinct) {
    for (auto& v : pos) v = rng.uniform();
    std::sort(pos.begin(), pos.end());
    distinct = true;
    for (int i = 1; i < n; ++i)
      if (pos[static_cast<size_t>(i)] == pos[static_cast<size_t>(i - 1)]) distinct = false;
  }
  return node_scalar(pos);
}

namespace {

std::vector<double> uniform_vec(int n, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.uniform();
  return v;
}

std::vector<int> uniform_categories(int n, int k, Rng& rng) {
  std::vector<int> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<int>(rng.uniform_int(k));
  return v;
}

Tensor symmetric_weights(const Tensor& adj, int n, Rng& rng) {
  Tensor w({n, n, 1});
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (adj[static_cast<int64_t>(i) * n + j] > 0.5) {
        const double v = rng.uniform();
        w[static_cast<int64_t>(i) * n + j] = v;
        w[static_cast<int64_t>(j) * n + i] = v;
      }
  return w;
}

bool has_collinear_triple(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = b + 1; c < n; ++c) {
        const double o = (x[static_cast<size_t>(b)] - x[static_cast<size_t>(a)]) *
                             (y[static_cast<size_t>(c)] - y[static_cast<size_t>(a)]) -
                         (y[static_cast<size_t>(b)] - y[static_cast<size_t>(a)]) *
                             (x[static_cast<size_t>(c)] - x[static_cast<size_t>(a)]);
        if (std::abs(o) <= 1e-12) return true;
      }
  return false;
}

}  // namespace

Trajectory sample_problem(const SamplerConfig& cfg, Rng& rng, std::optional<int> forced_n) {
  cfg.validate();
  const AlgorithmId id = cfg.algorithm;

  int n;
  if (forced_n.has_value())
    n = *forced_n;
  else if (is_string_task(id))
    n = 20;  // string tasks have a fixed node count; the needle varies instead
  else
    n = static_cast<int>(rng.uniform_int(cfg.n_min, cfg.n_max));
  check(n >= 1, "sampled size must be positive");

  std::map<std::string, Tensor> in;
  in.emplace("pos", sample_positions(n, rng));

  switch (id) {
    case AlgorithmId::INSERTION_SORT:
    case AlgorithmId::BUBBLE_SORT:
    case AlgorithmId::MINIMUM:
      in.emplace("key", node_scalar(uniform_vec(n, rng)));
      break;
    case AlgorithmId::BINARY_SEARCH: {
      auto keys = uniform_vec(n, rng);
      std::sort(keys.begin(), keys.end());
      in.emplace("key", node_scalar(keys));
      in.emplace("target", graph_scalar(rng.uniform()));
      break;
    }
    case AlgorithmId::BFS: {
      const double p = cfg.p_set[static_cast<size_t>(rng.uniform_int(
          static_cast<int64_t>(cfg.p_set.size())))];
      in.emplace("adj", sample_er_graph(n, p, /*directed=*/false, rng));
      in.emplace("s", node_mask_one(n, static_cast<int>(rng.uniform_int(n))));
      break;
    }
    case AlgorithmId::BELLMAN_FORD: {
      const double p = cfg.p_set[static_cast<size_t>(rng.uniform_int(
          static_cast<int64_t>(cfg.p_set.size())))];
      Tensor adj = sample_er_graph(n, p, /*directed=*/true, rng);
      Tensor w({n, n, 1});
      for (int64_t e = 0; e < adj.numel(); ++e)
        if (adj[e] > 0.5) w[e] = rng.uniform();
      in.emplace("adj", std::move(adj));
      in.emplace("w", std::move(w));
      in.emplace("s", node_mask_one(n, static_cast<int>(rng.uniform_int(n))));
      break;
    }
    case AlgorithmId::FLOYD_WARSHALL: {
      const double p = cfg.p_set[static_cast<size_t>(rng.uniform_int(
          static_cast<int64_t>(cfg.p_set.size())))];
      Tensor adj = sample_er_graph(n, p, /*directed=*/false, rng);
      in.emplace("w", symmetric_weights(adj, n, rng));
      in.emplace("adj", std::move(adj));
      break;
    }
    case AlgorithmId::ACTIVITY_SELECTOR: {
      std::vector<double> s(static_cast<size_t>(n)), f(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        double a = rng.uniform(), b = rng.uniform();
        s[static_cast<size_t>(i)] = std::min(a, b);
        f[static_cast<size_t>(i)] = std::max(a, b);
      }
      in.emplace("start", node_scalar(s));
      in.emplace("finish", node_scalar(f));
      break;
    }
    case AlgorithmId::LCS_LENGTH: {
      const int l1 = (n + 1) / 2;
      std::vector<double> seg(static_cast<size_t>(n), 0.0);
      for (int i = l1; i < n; ++i) seg[static_cast<size_t>(i)] = 1.0;
      check(n >= 2, "lcs_length needs n >= 2");
      in.emplace("seg", node_mask(seg));
      in.emplace("key", node_categorical(uniform_categories(n, 4, rng), 4));
      break;
    }
    case AlgorithmId::NAIVE_STRING_MATCHER: {
      const int m_cap = std::min(cfg.needle_max, n / 2);
      check(m_cap >= cfg.needle_min, "needle range incompatible with n");
      const int m = static_cast<int>(rng.uniform_int(cfg.needle_min, m_cap));
      std::vector<double> needle(static_cast<size_t>(n), 0.0);
      for (int i = n - m; i < n; ++i) needle[static_cast<size_t>(i)] = 1.0;
      in.emplace("needle", node_mask(needle));
      in.emplace("key", node_categorical(uniform_categories(n, 4, rng), 4));
      break;
    }
    case AlgorithmId::GRAHAM_SCAN: {
      std::vector<double> x, y;
      do {
        x = uniform_vec(n, rng);
        y = uniform_vec(n, rng);
      } while (n >= 3 && has_collinear_triple(x, y));
      in.emplace("x", node_scalar(x));
      in.emplace("y", node_scalar(y));
      break;
    }
  }

  return run_algorithm(id, n, in);
}

}  // namespace nar
