#include "nar/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include "nar/sampler.hpp"

namespace nar::selfcheck {

double fd_max_rel_err(const LossBuilder& build, std::vector<Tensor> inputs, double h) {
  // Analytic gradients.
  std::vector<Tensor> analytic;
  {
    Tape tp;
    std::vector<Val> vals;
    vals.reserve(inputs.size());
    for (const Tensor& t : inputs) vals.push_back(tp.leaf(t, /*needs_grad=*/true));
    Val loss = build(tp, vals);
    tp.backward(loss);
    for (Val v : vals) analytic.push_back(tp.grad(v));
  }

  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape tp(/*grad_enabled=*/false);
    std::vector<Val> vals;
    vals.reserve(xs.size());
    for (const Tensor& t : xs) vals.push_back(tp.leaf(t));
    return tp.value(build(tp, vals))[0];
  };

  double max_err = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    for (int64_t i = 0; i < inputs[k].numel(); ++i) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + h;
      const double fp = eval(inputs);
      inputs[k][i] = orig - h;
      const double fm = eval(inputs);
      inputs[k][i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = analytic[k][i];
      const double err = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

namespace {

Tensor random_tensor(const Shape& s, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(s);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Random tensor whose elements are separated enough that relu kinks and
// max-reduction ties stay away from the finite-difference step.
Tensor random_tensor_no_ties(const Shape& s, Rng& rng) {
  Tensor t(s);
  for (int64_t i = 0; i < t.numel(); ++i) {
    double v;
    do {
      v = rng.uniform(-2.0, 2.0);
    } while (std::abs(v) < 2e-3);
    t[i] = v;
  }
  for (int64_t i = 0; i < t.numel(); ++i)
    for (int64_t j = i + 1; j < t.numel(); ++j)
      if (std::abs(t[i] - t[j]) < 2e-3) t[j] += 5e-3 * static_cast<double>(j % 7 + 1);
  return t;
}

// Weighted sum against fixed weights so every output element matters.
Val weighted_sum(Tape& tp, Val x, Rng& rng) {
  Tensor w(tp.value(x).shape());
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(0.2, 1.0) * (i % 2 ? 1.0 : -1.0);
  return tp.reduce_sum_all(tp.mul(x, tp.leaf(w)));
}

Shape random_shape(Rng& rng, int max_rank = 3, int max_dim = 5) {
  const int r = static_cast<int>(rng.uniform_int(1, max_rank));
  Shape s(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i)
    s[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(1, max_dim));
  return s;
}

struct OpCase {
  std::string name;
  std::function<double(Rng&)> run;  // max rel err for one random shape draw
};

}  // namespace

SuiteResult gradient_suite(int shapes_per_op, uint64_t seed) {
  Rng rng(seed);
  std::vector<OpCase> cases;

  auto unary_case = [&cases](const std::string& name, auto apply, bool no_ties = false,
                             double lo = -2.0, double hi = 2.0) {
    cases.push_back({name, [=](Rng& r) {
                       Shape s = random_shape(r);
                       Tensor x =
                           no_ties ? random_tensor_no_ties(s, r) : random_tensor(s, r, lo, hi);
                       Rng wr(r.next_u64());
                       return fd_max_rel_err(
                           [&wr, apply](Tape& tp, const std::vector<Val>& in) {
                             Rng wcopy = wr;
                             return weighted_sum(tp, apply(tp, in[0]), wcopy);
                           },
                           {x});
                     }});
  };

  unary_case("relu", [](Tape& tp, Val v) { return tp.relu(v); }, /*no_ties=*/true);
  unary_case("sigmoid", [](Tape& tp, Val v) { return tp.sigmoid(v); });
  unary_case("exp", [](Tape& tp, Val v) { return tp.exp(v); });
  unary_case("log", [](Tape& tp, Val v) { return tp.log(v); }, false, 0.2, 3.0);
  unary_case("scale", [](Tape& tp, Val v) { return tp.scale(v, -1.7); });
  unary_case("add_const", [](Tape& tp, Val v) { return tp.add_const(v, 0.31); });
  unary_case("reduce_mean_all", [](Tape& tp, Val v) { return tp.reduce_mean_all(v); });
  unary_case("reduce_sum_all", [](Tape& tp, Val v) { return tp.reduce_sum_all(v); });

  auto binary_case = [&cases](const std::string& name, auto apply, double lo = -2.0,
                              double hi = 2.0) {
    cases.push_back({name, [=](Rng& r) {
                       Shape sb = random_shape(r);
                       Shape sa = sb;
                       if (r.bernoulli(0.5))
                         sa[static_cast<size_t>(r.uniform_int(static_cast<int64_t>(sa.size())))] =
                             1;
                       Tensor a = random_tensor(sa, r, lo, hi);
                       Tensor b = random_tensor(sb, r, lo, hi);
                       Rng wr(r.next_u64());
                       return fd_max_rel_err(
                           [&wr, apply](Tape& tp, const std::vector<Val>& in) {
                             Rng wcopy = wr;
                             return weighted_sum(tp, apply(tp, in[0], in[1]), wcopy);
                           },
                           {a, b});
                     }});
  };

  binary_case("add", [](Tape& tp, Val a, Val b) { return tp.add(a, b); });
  binary_case("sub", [](Tape& tp, Val a, Val b) { return tp.sub(a, b); });
  binary_case("mul", [](Tape& tp, Val a, Val b) { return tp.mul(a, b); });
  binary_case("div", [](Tape& tp, Val a, Val b) { return tp.div(a, b); }, 0.4, 2.0);

  cases.push_back({"matmul", [](Rng& r) {
                     const int m = static_cast<int>(r.uniform_int(1, 5));
                     const int k = static_cast<int>(r.uniform_int(1, 5));
                     const int n = static_cast<int>(r.uniform_int(1, 5));
                     Tensor a = random_tensor({m, k}, r);
                     Tensor b = random_tensor({k, n}, r);
                     Rng wr(r.next_u64());
                     return fd_max_rel_err(
                         [&wr](Tape& tp, const std::vector<Val>& in) {
                           Rng wcopy = wr;
                           return weighted_sum(tp, tp.matmul(in[0], in[1]), wcopy);
                         },
                         {a, b});
                   }});

  cases.push_back({"bmm", [](Rng& r) {
                     const int bsz = static_cast<int>(r.uniform_int(1, 3));
                     const int m = static_cast<int>(r.uniform_int(1, 4));
                     const int k = static_cast<int>(r.uniform_int(1, 4));
                     const int n = static_cast<int>(r.uniform_int(1, 4));
                     Tensor a = random_tensor({bsz, m, k}, r);
                     Tensor b = random_tensor({bsz, k, n}, r);
                     Rng wr(r.next_u64());
                     return fd_max_rel_err(
                         [&wr](Tape& tp, const std::vector<Val>& in) {
                           Rng wcopy = wr;
                           return weighted_sum(tp, tp.bmm(in[0], in[1]), wcopy);
                         },
                         {a, b});
                   }});

  auto axis_case = [&cases](const std::string& name, auto apply, bool no_ties) {
    cases.push_back({name, [=](Rng& r) {
                       Shape s = random_shape(r);
                       const int axis =
                           static_cast<int>(r.uniform_int(static_cast<int64_t>(s.size())));
                       Tensor x = no_ties ? random_tensor_no_ties(s, r) : random_tensor(s, r);
                       const bool keepdims = r.bernoulli(0.5);
                       Rng wr(r.next_u64());
                       return fd_max_rel_err(
                           [&wr, apply, axis, keepdims](Tape& tp, const std::vector<Val>& in) {
                             Rng wcopy = wr;
                             return weighted_sum(tp, apply(tp, in[0], axis, keepdims), wcopy);
                           },
                           {x});
                     }});
  };

  axis_case("softmax", [](Tape& tp, Val v, int axis, bool) { return tp.softmax(v, axis); },
            false);
  axis_case("log_softmax",
            [](Tape& tp, Val v, int axis, bool) { return tp.log_softmax(v, axis); }, false);
  axis_case("reduce_sum",
            [](Tape& tp, Val v, int axis, bool kd) { return tp.reduce_sum(v, axis, kd); }, false);
  axis_case("reduce_max",
            [](Tape& tp, Val v, int axis, bool kd) { return tp.reduce_max(v, axis, kd); },
            /*no_ties=*/true);

  cases.push_back({"reshape", [](Rng& r) {
                     Tensor x = random_tensor({2, 6}, r);
                     Rng wr(r.next_u64());
                     return fd_max_rel_err(
                         [&wr](Tape& tp, const std::vector<Val>& in) {
                           Rng wcopy = wr;
                           return weighted_sum(tp, tp.reshape(in[0], {3, 2, 2}), wcopy);
                         },
                         {x});
                   }});

  cases.push_back({"transpose", [](Rng& r) {
                     Shape s = {static_cast<int>(r.uniform_int(2, 4)),
                                static_cast<int>(r.uniform_int(2, 4)),
                                static_cast<int>(r.uniform_int(2, 4))};
                     Tensor x = random_tensor(s, r);
                     Rng wr(r.next_u64());
                     return fd_max_rel_err(
                         [&wr](Tape& tp, const std::vector<Val>& in) {
                           Rng wcopy = wr;
                           return weighted_sum(tp, tp.transpose(in[0], {2, 0, 1}), wcopy);
                         },
                         {x});
                   }});

  cases.push_back({"broadcast", [](Rng& r) {
                     const int n = static_cast<int>(r.uniform_int(2, 4));
                     Tensor x = random_tensor({n, 1}, r);
                     Rng wr(r.next_u64());
                     return fd_max_rel_err(
                         [&wr, n](Tape& tp, const std::vector<Val>& in) {
                           Rng wcopy = wr;
                           return weighted_sum(tp, tp.broadcast(in[0], {n, 3}), wcopy);
                         },
                         {x});
                   }});

  cases.push_back({"concat", [](Rng& r) {
                     const int n = static_cast<int>(r.uniform_int(1, 3));
                     Tensor a = random_tensor({n, 2}, r);
                     Tensor b = random_tensor({n, 3}, r);
                     Rng wr(r.next_u64());
                     return fd_max_rel_err(
                         [&wr](Tape& tp, const std::vector<Val>& in) {
                           Rng wcopy = wr;
                           return weighted_sum(tp, tp.concat({in[0], in[1]}, 1), wcopy);
                         },
                         {a, b});
                   }});

  cases.push_back({"layer_norm", [](Rng& r) {
                     const int n = static_cast<int>(r.uniform_int(1, 4));
                     const int h = static_cast<int>(r.uniform_int(3, 8));
                     Tensor x = random_tensor({n, h}, r);
                     Tensor gamma = random_tensor({h}, r, 0.5, 1.5);
                     Tensor beta = random_tensor({h}, r);
                     Rng wr(r.next_u64());
                     return fd_max_rel_err(
                         [&wr](Tape& tp, const std::vector<Val>& in) {
                           Rng wcopy = wr;
                           return weighted_sum(tp, tp.layer_norm(in[0], in[1], in[2]), wcopy);
                         },
                         {x, gamma, beta});
                   }});

  double worst = 0.0;
  std::string worst_op;
  for (auto& c : cases) {
    for (int i = 0; i < shapes_per_op; ++i) {
      const double err = c.run(rng);
      if (err > worst) {
        worst = err;
        worst_op = c.name;
      }
    }
  }

  SuiteResult res;
  res.name = "gradient";
  res.pass = worst < 1e-4;
  std::ostringstream os;
  os << cases.size() << " ops x " << shapes_per_op << " shapes, max rel err " << worst << " ("
     << worst_op << ")";
  res.detail = os.str();
  return res;
}

// ---------------------------------------------------------------------------
// Brute-force trace oracles
// ---------------------------------------------------------------------------

namespace {

constexpr double kDistTol = 1e-9;

std::vector<double> col(const Tensor& t) {
  std::vector<double> v(static_cast<size_t>(t.numel()));
  std::copy(t.data(), t.data() + t.numel(), v.begin());
  return v;
}

std::vector<int> ptr_col(const Tensor& t) {
  std::vector<int> v(static_cast<size_t>(t.numel()));
  for (int64_t i = 0; i < t.numel(); ++i)
    v[static_cast<size_t>(i)] = static_cast<int>(std::llround(t[i]));
  return v;
}

int argmax_node(const Tensor& mask_one) {
  int best = 0;
  for (int64_t i = 1; i < mask_one.numel(); ++i)
    if (mask_one[i] > mask_one[best]) best = static_cast<int>(i);
  return best;
}

// Predecessor chain expected for a fully sorted array, built from scratch:
// stable argsort by key, first node in sorted order points to itself.
std::vector<int> oracle_sorted_pred(const std::vector<double>& key) {
  const int n = static_cast<int>(key.size());
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return key[static_cast<size_t>(a)] < key[static_cast<size_t>(b)];
  });
  std::vector<int> pred(static_cast<size_t>(n));
  for (int p = 0; p < n; ++p)
    pred[static_cast<size_t>(idx[static_cast<size_t>(p)])] =
        p == 0 ? idx[0] : idx[static_cast<size_t>(p - 1)];
  return pred;
}

bool check_sorting(const Trajectory& traj, std::string& why) {
  const auto key = col(traj.input("key"));
  const auto expect = oracle_sorted_pred(key);
  const auto got = ptr_col(traj.output("pred"));
  if (got != expect) {
    why = "output pred differs from brute-force sorted chain";
    return false;
  }
  return true;
}

bool check_minimum(const Trajectory& traj, std::string& why) {
  const auto key = col(traj.input("key"));
  int best = 0;
  for (size_t i = 1; i < key.size(); ++i)
    if (key[i] < key[static_cast<size_t>(best)]) best = static_cast<int>(i);
  if (argmax_node(traj.output("min")) != best) {
    why = "minimum index mismatch";
    return false;
  }
  return true;
}

bool check_binary_search(const Trajectory& traj, std::string& why) {
  const auto key = col(traj.input("key"));
  const double target = traj.input("target")[0];
  int expect = 0;
  for (size_t i = 0; i < key.size(); ++i)
    if (key[i] <= target) expect = static_cast<int>(i);
  if (argmax_node(traj.output("return")) != expect) {
    why = "bisection answer differs from exhaustive scan";
    return false;
  }
  return true;
}

bool check_bfs(const Trajectory& traj, std::string& why) {
  const int n = traj.n;
  const Tensor& adj = traj.input("adj");
  const int s = argmax_node(traj.input("s"));
  // Layer-by-layer BFS with an explicit queue.
  std::vector<int> dist(static_cast<size_t>(n), -1);
  std::queue<int> q;
  dist[static_cast<size_t>(s)] = 0;
  q.push(s);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v = 0; v < n; ++v)
      if (adj[static_cast<int64_t>(u) * n + v] > 0.5 && dist[static_cast<size_t>(v)] < 0) {
        dist[static_cast<size_t>(v)] = dist[static_cast<size_t>(u)] + 1;
        q.push(v);
      }
  }
  // Canonical parent: lowest-index neighbour one layer closer.
  std::vector<int> expect(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) {
    expect[static_cast<size_t>(v)] = v;
    if (v == s || dist[static_cast<size_t>(v)] < 0) continue;
    for (int u = 0; u < n; ++u)
      if (adj[static_cast<int64_t>(u) * n + v] > 0.5 &&
          dist[static_cast<size_t>(u)] == dist[static_cast<size_t>(v)] - 1) {
        expect[static_cast<size_t>(v)] = u;
        break;
      }
  }
  if (ptr_col(traj.output("pi")) != expect) {
    why = "bfs parents differ from layer-by-layer oracle";
    return false;
  }
  return true;
}

bool check_bellman_ford(const Trajectory& traj, std::string& why) {
  const int n = traj.n;
  const Tensor& adj = traj.input("adj");
  const Tensor& w = traj.input("w");
  const int s = argmax_node(traj.input("s"));
  for (int64_t e = 0; e < w.numel(); ++e)
    if (w[e] < 0.0) {
      why = "oracle requires non-negative weights";
      return false;
    }
  // O(n^2) Dijkstra.
  constexpr double kInf = 1e100;
  std::vector<double> d(static_cast<size_t>(n), kInf);
  std::vector<char> done(static_cast<size_t>(n), 0);
  d[static_cast<size_t>(s)] = 0.0;
  for (int it = 0; it < n; ++it) {
    int u = -1;
    for (int v = 0; v < n; ++v)
      if (!done[static_cast<size_t>(v)] && d[static_cast<size_t>(v)] < kInf &&
          (u < 0 || d[static_cast<size_t>(v)] < d[static_cast<size_t>(u)]))
        u = v;
    if (u < 0) break;
    done[static_cast<size_t>(u)] = 1;
    for (int v = 0; v < n; ++v)
      if (adj[static_cast<int64_t>(u) * n + v] > 0.5)
        d[static_cast<size_t>(v)] =
            std::min(d[static_cast<size_t>(v)],
                     d[static_cast<size_t>(u)] + w[static_cast<int64_t>(u) * n + v]);
  }

  const int T = traj.num_steps;
  const Tensor d_final = traj.hint_slice("d_h", T - 1);
  const Tensor msk_final = traj.hint_slice("msk_h", T - 1);
  const auto pi = ptr_col(traj.output("pi"));
  for (int v = 0; v < n; ++v) {
    const bool reach = d[static_cast<size_t>(v)] < kInf;
    if ((msk_final[v] > 0.5) != reach) {
      why = "reachability mask mismatch at node " + std::to_string(v);
      return false;
    }
    if (reach && std::abs(d_final[v] - d[static_cast<size_t>(v)]) > kDistTol) {
      why = "distance mismatch at node " + std::to_string(v);
      return false;
    }
    const int p = pi[static_cast<size_t>(v)];
    if (v == s || !reach) {
      if (p != v) {
        why = "pi must be self for source/unreachable node " + std::to_string(v);
        return false;
      }
    } else {
      // Parent edge must exist and lie on a shortest path.
      if (p == v || adj[static_cast<int64_t>(p) * n + v] < 0.5 ||
          std::abs(d[static_cast<size_t>(p)] + w[static_cast<int64_t>(p) * n + v] -
                   d[static_cast<size_t>(v)]) > kDistTol) {
        why = "pi edge not on a shortest path at node " + std::to_string(v);
        return false;
      }
    }
  }
  return true;
}

bool check_floyd_warshall(const Trajectory& traj, std::string& why) {
  const int n = traj.n;
  const Tensor& adj = traj.input("adj");
  const Tensor& w = traj.input("w");
  constexpr double kInf = 1e100;
  // Min-plus powering to a fixpoint (independent of the pivot recurrence).
  std::vector<double> d(static_cast<size_t>(n) * n, kInf);
  for (int i = 0; i < n; ++i) {
    d[static_cast<size_t>(i) * n + i] = 0.0;
    for (int j = 0; j < n; ++j)
      if (i != j && adj[static_cast<int64_t>(i) * n + j] > 0.5)
        d[static_cast<size_t>(i) * n + j] = w[static_cast<int64_t>(i) * n + j];
  }
  for (int round = 0; round < n; ++round) {
    bool changed = false;
    std::vector<double> nd = d;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const double cand = d[static_cast<size_t>(i) * n + k] + d[static_cast<size_t>(k) * n + j];
          if (cand < nd[static_cast<size_t>(i) * n + j] - 1e-15) {
            nd[static_cast<size_t>(i) * n + j] = cand;
            changed = true;
          }
        }
    d = nd;
    if (!changed) break;
  }

  const int T = traj.num_steps;
  const Tensor D = traj.hint_slice("D_h", T - 1);
  const Tensor msk = traj.hint_slice("msk_h", T - 1);
  const Tensor& Pi = traj.output("Pi");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int64_t e = static_cast<int64_t>(i) * n + j;
      const bool reach = d[static_cast<size_t>(i) * n + j] < kInf;
      if ((msk[e] > 0.5) != reach) {
        why = "pair reachability mismatch";
        return false;
      }
      if (reach && std::abs(D[e] - d[static_cast<size_t>(i) * n + j]) > kDistTol) {
        why = "pair distance mismatch";
        return false;
      }
      const int p = static_cast<int>(std::llround(Pi[e]));
      if (i == j) {
        if (p != i) {
          why = "diagonal Pi must be the node itself";
          return false;
        }
      } else if (!reach) {
        if (p != j) {
          why = "unreachable Pi must use the column sentinel";
          return false;
        }
      } else {
        // Predecessor on a shortest i->j path: d(i,p) + w(p,j) = d(i,j).
        if (p == j || adj[static_cast<int64_t>(p) * n + j] < 0.5 ||
            std::abs(d[static_cast<size_t>(i) * n + p] + w[static_cast<int64_t>(p) * n + j] -
                     d[static_cast<size_t>(i) * n + j]) > kDistTol) {
          why = "Pi predecessor not on a shortest path";
          return false;
        }
      }
    }
  return true;
}

bool check_activity_selector(const Trajectory& traj, std::string& why) {
  const auto s = col(traj.input("start"));
  const auto f = col(traj.input("finish"));
  const int n = traj.n;
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (f[static_cast<size_t>(a)] != f[static_cast<size_t>(b)])
      return f[static_cast<size_t>(a)] < f[static_cast<size_t>(b)];
    return a < b;
  });
  // Independent greedy pass.
  std::vector<double> expect(static_cast<size_t>(n), 0.0);
  double horizon = -1.0;
  int count = 0;
  for (int a : order)
    if (horizon < 0.0 || s[static_cast<size_t>(a)] >= horizon) {
      expect[static_cast<size_t>(a)] = 1.0;
      horizon = f[static_cast<size_t>(a)];
      ++count;
    }
  if (col(traj.output("sel")) != expect) {
    why = "selection mask differs from independent greedy";
    return false;
  }
  // Optimality check: interval-scheduling DP over the finish-sorted order.
  std::vector<int> dp(static_cast<size_t>(n), 1);
  int best = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j)
      if (f[static_cast<size_t>(order[static_cast<size_t>(j)])] <=
          s[static_cast<size_t>(order[static_cast<size_t>(i)])])
        dp[static_cast<size_t>(i)] = std::max(dp[static_cast<size_t>(i)],
                                              dp[static_cast<size_t>(j)] + 1);
    best = std::max(best, dp[static_cast<size_t>(i)]);
  }
  if (count != best) {
    why = "greedy selection is not optimal per the DP oracle";
    return false;
  }
  return true;
}

bool check_lcs(const Trajectory& traj, std::string& why) {
  const int n = traj.n;
  const auto seg = col(traj.input("seg"));
  const Tensor& key = traj.input("key");
  int L1 = 0;
  while (L1 < n && seg[static_cast<size_t>(L1)] < 0.5) ++L1;
  const int L2 = n - L1;
  auto sym = [&](int node) {
    for (int k = 0; k < 4; ++k)
      if (key[static_cast<int64_t>(node) * 4 + k] > 0.5) return k;
    return -1;
  };
  // Fresh DP with the documented tie rule (diag, then up on >=, else left).
  std::vector<std::vector<int>> cdp(static_cast<size_t>(L1 + 1),
                                    std::vector<int>(static_cast<size_t>(L2 + 1), 0));
  const Tensor& b = traj.output("b");
  for (int i = 1; i <= L1; ++i)
    for (int j = 1; j <= L2; ++j) {
      int arrow;
      if (sym(i - 1) == sym(L1 + j - 1)) {
        cdp[static_cast<size_t>(i)][static_cast<size_t>(j)] =
            cdp[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)] + 1;
        arrow = 1;
      } else if (cdp[static_cast<size_t>(i - 1)][static_cast<size_t>(j)] >=
                 cdp[static_cast<size_t>(i)][static_cast<size_t>(j - 1)]) {
        cdp[static_cast<size_t>(i)][static_cast<size_t>(j)] =
            cdp[static_cast<size_t>(i - 1)][static_cast<size_t>(j)];
        arrow = 2;
      } else {
        cdp[static_cast<size_t>(i)][static_cast<size_t>(j)] =
            cdp[static_cast<size_t>(i)][static_cast<size_t>(j - 1)];
        arrow = 3;
      }
      const int64_t cell = static_cast<int64_t>(i - 1) * n + (L1 + j - 1);
      for (int k = 0; k < 4; ++k)
        if ((b[cell * 4 + k] > 0.5) != (k == arrow)) {
          why = "arrow table mismatch at DP cell";
          return false;
        }
    }
  // Final hint row must carry the DP values.
  const Tensor c_final = traj.hint_slice("c_h", traj.num_steps - 1);
  for (int i = 1; i <= L1; ++i)
    for (int j = 1; j <= L2; ++j) {
      const int64_t cell = static_cast<int64_t>(i - 1) * n + (L1 + j - 1);
      if (std::llround(c_final[cell]) != cdp[static_cast<size_t>(i)][static_cast<size_t>(j)]) {
        why = "DP value table mismatch";
        return false;
      }
    }
  return true;
}

bool check_matcher(const Trajectory& traj, std::string& why) {
  const int n = traj.n;
  const auto needle = col(traj.input("needle"));
  const Tensor& key = traj.input("key");
  int H = 0;
  while (H < n && needle[static_cast<size_t>(H)] < 0.5) ++H;
  const int m = n - H;
  auto sym = [&](int node) {
    for (int k = 0; k < 4; ++k)
      if (key[static_cast<int64_t>(node) * 4 + k] > 0.5) return k;
    return -1;
  };
  // Exhaustive substring scan.
  int expect = H;  // sentinel: first needle node
  for (int s = 0; s + m <= H; ++s) {
    bool match = true;
    for (int j = 0; j < m && match; ++j) match = sym(s + j) == sym(H + j);
    if (match) {
      expect = s;
      break;
    }
  }
  if (argmax_node(traj.output("match")) != expect) {
    why = "match position differs from exhaustive scan";
    return false;
  }
  return true;
}

bool check_graham(const Trajectory& traj, std::string& why) {
  const int n = traj.n;
  const auto x = col(traj.input("x"));
  const auto y = col(traj.input("y"));
  // Exhaustive orientation test: (a, b) is a hull edge iff every other point
  // lies strictly to its left; hull vertices are the edge endpoints.
  std::vector<double> expect(static_cast<size_t>(n), 0.0);
  if (n <= 2) {
    std::fill(expect.begin(), expect.end(), 1.0);
  } else {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (a == b) continue;
        bool edge = true;
        for (int c = 0; c < n && edge; ++c) {
          if (c == a || c == b) continue;
          const double o = (x[static_cast<size_t>(b)] - x[static_cast<size_t>(a)]) *
                               (y[static_cast<size_t>(c)] - y[static_cast<size_t>(a)]) -
                           (y[static_cast<size_t>(b)] - y[static_cast<size_t>(a)]) *
                               (x[static_cast<size_t>(c)] - x[static_cast<size_t>(a)]);
          if (o <= 0.0) edge = false;
        }
        if (edge) {
          expect[static_cast<size_t>(a)] = 1.0;
          expect[static_cast<size_t>(b)] = 1.0;
        }
      }
  }
  if (col(traj.output("in_hull")) != expect) {
    why = "hull membership differs from orientation oracle";
    return false;
  }
  return true;
}

bool dispatch_check(AlgorithmId id, const Trajectory& traj, std::string& why) {
  switch (id) {
    case AlgorithmId::INSERTION_SORT:
    case AlgorithmId::BUBBLE_SORT: return check_sorting(traj, why);
    case AlgorithmId::BINARY_SEARCH: return check_binary_search(traj, why);
    case AlgorithmId::MINIMUM: return check_minimum(traj, why);
    case AlgorithmId::BFS: return check_bfs(traj, why);
    case AlgorithmId::BELLMAN_FORD: return check_bellman_ford(traj, why);
    case AlgorithmId::FLOYD_WARSHALL: return check_floyd_warshall(traj, why);
    case AlgorithmId::ACTIVITY_SELECTOR: return check_activity_selector(traj, why);
    case AlgorithmId::LCS_LENGTH: return check_lcs(traj, why);
    case AlgorithmId::NAIVE_STRING_MATCHER: return check_matcher(traj, why);
    case AlgorithmId::GRAHAM_SCAN: return check_graham(traj, why);
  }
  why = "unknown algorithm";
  return false;
}

}  // namespace

SuiteResult oracle_suite(AlgorithmId id, int instances, uint64_t seed) {
  SuiteResult res;
  res.name = std::string("oracle/") + to_string(id);
  SamplerConfig cfg;
  cfg.algorithm = id;
  Rng rng(mix_seed(seed, res.name));
  const ProblemSpec& spec = problem_spec(id);
  for (int i = 0; i < instances; ++i) {
    Trajectory traj = sample_problem(cfg, rng);
    ValidationReport rep = validate_trajectory(spec, traj);
    if (!rep.ok()) {
      res.detail = "instance " + std::to_string(i) + " failed validation: " + rep.to_string();
      return res;
    }
    std::string why;
    if (!dispatch_check(id, traj, why)) {
      res.detail = "instance " + std::to_string(i) + ": " + why;
      return res;
    }
  }
  res.pass = true;
  res.detail = std::to_string(instances) + " instances matched the oracle";
  return res;
}

SuiteResult oracle_suite_all(int instances, uint64_t seed) {
  for (AlgorithmId id : all_algorithms()) {
    SuiteResult r = oracle_suite(id, instances, seed);
    if (!r.pass) return r;
  }
  SuiteResult res;
  res.name = "oracle/all";
  res.pass = true;
  res.detail = std::to_string(instances) + " instances per algorithm matched";
  return res;
}

}  // namespace nar::selfcheck
