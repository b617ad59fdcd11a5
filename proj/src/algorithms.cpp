#include "nar/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nar {

const std::vector<AlgorithmId>& all_algorithms() {
  static const std::vector<AlgorithmId> ids = {
      AlgorithmId::INSERTION_SORT, AlgorithmId::BUBBLE_SORT,    AlgorithmId::BINARY_SEARCH,
      AlgorithmId::MINIMUM,        AlgorithmId::BFS,            AlgorithmId::BELLMAN_FORD,
      AlgorithmId::FLOYD_WARSHALL, AlgorithmId::ACTIVITY_SELECTOR, AlgorithmId::LCS_LENGTH,
      AlgorithmId::NAIVE_STRING_MATCHER, AlgorithmId::GRAHAM_SCAN,
  };
  return ids;
}

const char* to_string(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::INSERTION_SORT: return "insertion_sort";
    case AlgorithmId::BUBBLE_SORT: return "bubble_sort";
    case AlgorithmId::BINARY_SEARCH: return "binary_search";
    case AlgorithmId::MINIMUM: return "minimum";
    case AlgorithmId::BFS: return "bfs";
    case AlgorithmId::BELLMAN_FORD: return "bellman_ford";
    case AlgorithmId::FLOYD_WARSHALL: return "floyd_warshall";
    case AlgorithmId::ACTIVITY_SELECTOR: return "activity_selector";
    case AlgorithmId::LCS_LENGTH: return "lcs_length";
    case AlgorithmId::NAIVE_STRING_MATCHER: return "naive_string_matcher";
    case AlgorithmId::GRAHAM_SCAN: return "graham_scan";
  }
  return "?";
}

AlgorithmId algorithm_from_string(const std::string& s) {
  for (AlgorithmId id : all_algorithms())
    if (s == to_string(id)) return id;
  fail("unknown algorithm: " + s);
}

bool is_graph_task(AlgorithmId id) {
  return id == AlgorithmId::BFS || id == AlgorithmId::BELLMAN_FORD ||
         id == AlgorithmId::FLOYD_WARSHALL;
}

bool is_string_task(AlgorithmId id) { return id == AlgorithmId::NAIVE_STRING_MATCHER; }

bool is_directed_graph(AlgorithmId id) { return id == AlgorithmId::BELLMAN_FORD; }

bool is_sorting_task(AlgorithmId id) {
  return id == AlgorithmId::INSERTION_SORT || id == AlgorithmId::BUBBLE_SORT;
}

// ---------------------------------------------------------------------------
// Schemas
// ---------------------------------------------------------------------------

namespace {

FeatureSpec feat(const char* name, Stage st, Location loc, FType ty, int cats = 0) {
  FeatureSpec f;
  f.name = name;
  f.stage = st;
  f.location = loc;
  f.type = ty;
  f.num_categories = cats;
  return f;
}

ProblemSpec build_spec(AlgorithmId id) {
  using S = Stage;
  using L = Location;
  using T = FType;
  ProblemSpec spec;
  spec.algorithm_id = to_string(id);
  auto& fs = spec.features;
  fs.push_back(feat("pos", S::INPUT, L::NODE, T::SCALAR));
  switch (id) {
    case AlgorithmId::INSERTION_SORT:
    case AlgorithmId::BUBBLE_SORT:
      spec.family = Family::SORTING;
      fs.push_back(feat("key", S::INPUT, L::NODE, T::SCALAR));
      fs.push_back(feat("pred_h", S::HINT, L::NODE, T::POINTER));
      fs.push_back(feat("i", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("j", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("pred", S::OUTPUT, L::NODE, T::POINTER));
      break;
    case AlgorithmId::BINARY_SEARCH:
      spec.family = Family::SEARCH;
      fs.push_back(feat("key", S::INPUT, L::NODE, T::SCALAR));
      fs.push_back(feat("target", S::INPUT, L::GRAPH, T::SCALAR));
      fs.push_back(feat("pred_h", S::HINT, L::NODE, T::POINTER));
      fs.push_back(feat("low", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("high", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("mid", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("return", S::OUTPUT, L::NODE, T::MASK_ONE));
      break;
    case AlgorithmId::MINIMUM:
      spec.family = Family::SEARCH;
      fs.push_back(feat("key", S::INPUT, L::NODE, T::SCALAR));
      fs.push_back(feat("pred_h", S::HINT, L::NODE, T::POINTER));
      fs.push_back(feat("min_h", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("i", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("min", S::OUTPUT, L::NODE, T::MASK_ONE));
      break;
    case AlgorithmId::BFS:
      spec.family = Family::GRAPH;
      fs.push_back(feat("s", S::INPUT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("adj", S::INPUT, L::EDGE, T::MASK));
      fs.push_back(feat("reach_h", S::HINT, L::NODE, T::MASK));
      fs.push_back(feat("pi_h", S::HINT, L::NODE, T::POINTER));
      fs.push_back(feat("pi", S::OUTPUT, L::NODE, T::POINTER));
      break;
    case AlgorithmId::BELLMAN_FORD:
      spec.family = Family::GRAPH;
      fs.push_back(feat("s", S::INPUT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("adj", S::INPUT, L::EDGE, T::MASK));
      fs.push_back(feat("w", S::INPUT, L::EDGE, T::SCALAR));
      fs.push_back(feat("d_h", S::HINT, L::NODE, T::SCALAR));
      fs.push_back(feat("msk_h", S::HINT, L::NODE, T::MASK));
      fs.push_back(feat("pi_h", S::HINT, L::NODE, T::POINTER));
      fs.push_back(feat("pi", S::OUTPUT, L::NODE, T::POINTER));
      break;
    case AlgorithmId::FLOYD_WARSHALL:
      spec.family = Family::GRAPH;
      fs.push_back(feat("adj", S::INPUT, L::EDGE, T::MASK));
      fs.push_back(feat("w", S::INPUT, L::EDGE, T::SCALAR));
      fs.push_back(feat("D_h", S::HINT, L::EDGE, T::SCALAR));
      fs.push_back(feat("msk_h", S::HINT, L::EDGE, T::MASK));
      fs.push_back(feat("k_h", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("Pi_h", S::HINT, L::EDGE, T::POINTER));
      fs.push_back(feat("Pi", S::OUTPUT, L::EDGE, T::POINTER));
      break;
    case AlgorithmId::ACTIVITY_SELECTOR:
      spec.family = Family::GREEDY;
      fs.push_back(feat("start", S::INPUT, L::NODE, T::SCALAR));
      fs.push_back(feat("finish", S::INPUT, L::NODE, T::SCALAR));
      fs.push_back(feat("pred_h", S::HINT, L::NODE, T::POINTER));
      fs.push_back(feat("sel_h", S::HINT, L::NODE, T::MASK));
      fs.push_back(feat("m_h", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("k_h", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("sel", S::OUTPUT, L::NODE, T::MASK));
      break;
    case AlgorithmId::LCS_LENGTH:
      spec.family = Family::DP;
      fs.push_back(feat("seg", S::INPUT, L::NODE, T::MASK));
      fs.push_back(feat("key", S::INPUT, L::NODE, T::CATEGORICAL, 4));
      fs.push_back(feat("pred_h", S::HINT, L::NODE, T::POINTER));
      fs.push_back(feat("c_h", S::HINT, L::EDGE, T::SCALAR));
      fs.push_back(feat("b_h", S::HINT, L::EDGE, T::CATEGORICAL, 4));
      fs.push_back(feat("b", S::OUTPUT, L::EDGE, T::CATEGORICAL, 4));
      break;
    case AlgorithmId::NAIVE_STRING_MATCHER:
      spec.family = Family::STRINGS;
      fs.push_back(feat("needle", S::INPUT, L::NODE, T::MASK));
      fs.push_back(feat("key", S::INPUT, L::NODE, T::CATEGORICAL, 4));
      fs.push_back(feat("pred_h", S::HINT, L::NODE, T::POINTER));
      fs.push_back(feat("shift_h", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("j_h", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("match", S::OUTPUT, L::NODE, T::MASK_ONE));
      break;
    case AlgorithmId::GRAHAM_SCAN:
      spec.family = Family::GEOMETRY;
      fs.push_back(feat("x", S::INPUT, L::NODE, T::SCALAR));
      fs.push_back(feat("y", S::INPUT, L::NODE, T::SCALAR));
      fs.push_back(feat("pivot_h", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("stack_h", S::HINT, L::NODE, T::POINTER));
      fs.push_back(feat("cur_h", S::HINT, L::NODE, T::MASK_ONE));
      fs.push_back(feat("in_hull_h", S::HINT, L::NODE, T::MASK));
      fs.push_back(feat("in_hull", S::OUTPUT, L::NODE, T::MASK));
      break;
  }
  spec.validate();
  return spec;
}

}  // namespace

const ProblemSpec& problem_spec(AlgorithmId id) {
  static std::map<AlgorithmId, ProblemSpec> cache = [] {
    std::map<AlgorithmId, ProblemSpec> m;
    for (AlgorithmId a : all_algorithms()) m.emplace(a, build_spec(a));
    return m;
  }();
  return cache.at(id);
}

// ---------------------------------------------------------------------------
// Encoding helpers
// ---------------------------------------------------------------------------

Tensor node_scalar(const std::vector<double>& v) {
  Tensor t({static_cast<int>(v.size()), 1});
  std::copy(v.begin(), v.end(), t.data());
  return t;
}

Tensor node_mask(const std::vector<double>& v) { return node_scalar(v); }

Tensor node_mask_one(int n, int index) {
  check(index >= 0 && index < n, "mask_one index out of range");
  Tensor t({n, 1});
  t[index] = 1.0;
  return t;
}

Tensor node_pointer(const std::vector<int>& v) {
  Tensor t({static_cast<int>(v.size()), 1});
  for (size_t i = 0; i < v.size(); ++i) t[static_cast<int64_t>(i)] = v[i];
  return t;
}

Tensor node_categorical(const std::vector<int>& v, int num_categories) {
  Tensor t({static_cast<int>(v.size()), num_categories});
  for (size_t i = 0; i < v.size(); ++i) {
    check(v[i] >= 0 && v[i] < num_categories, "category out of range");
    t[static_cast<int64_t>(i) * num_categories + v[i]] = 1.0;
  }
  return t;
}

Tensor edge_mask(int n) { return Tensor({n, n, 1}); }
Tensor edge_scalar(int n) { return Tensor({n, n, 1}); }
Tensor graph_scalar(double v) { return Tensor({1}, {v}); }

Tensor index_chain_pointer(int n) {
  std::vector<int> p(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i == 0 ? 0 : i - 1;
  return node_pointer(p);
}

// ---------------------------------------------------------------------------
// Trace recording
// ---------------------------------------------------------------------------

namespace {

class TraceRecorder {
 public:
  TraceRecorder(const ProblemSpec& spec, int n) : spec_(spec), n_(n) {
    budget_ = 4 * n * n + 1;
    for (const auto& f : spec.features)
      if (f.stage == Stage::HINT) hint_names_.push_back(f.name);
  }

  // Appends one snapshot; must contain every hint feature exactly once.
  void snapshot(std::map<std::string, Tensor> slice) {
    check(static_cast<int>(slices_.size()) < budget_,
          spec_.algorithm_id + ": trajectory exceeded the step budget of " +
              std::to_string(budget_ - 1) + " steps");
    for (const auto& name : hint_names_)
      check(slice.count(name) == 1, spec_.algorithm_id + ": snapshot missing hint " + name);
    slices_.push_back(std::move(slice));
  }

  int steps() const { return static_cast<int>(slices_.size()); }

  // Stacks slices into time-major hint arrays.
  std::map<std::string, Tensor> stacked() const {
    check(!slices_.empty(), "trajectory recorded no steps");
    std::map<std::string, Tensor> out;
    const int T = steps();
    for (const auto& name : hint_names_) {
      const Tensor& first = slices_[0].at(name);
      Shape s = first.shape();
      s.insert(s.begin(), T);
      Tensor whole(s);
      const int64_t stride = first.numel();
      for (int t = 0; t < T; ++t) {
        const Tensor& sl = slices_[static_cast<size_t>(t)].at(name);
        check(sl.numel() == stride, "hint slice shape changed over time: " + name);
        std::copy(sl.data(), sl.data() + stride, whole.data() + t * stride);
      }
      out.emplace(name, std::move(whole));
    }
    return out;
  }

 private:
  const ProblemSpec& spec_;
  int n_;
  int budget_;
  std::vector<std::string> hint_names_;
  std::vector<std::map<std::string, Tensor>> slices_;
};

std::vector<double> column(const Tensor& t) {
  std::vector<double> v(static_cast<size_t>(t.numel()));
  std::copy(t.data(), t.data() + t.numel(), v.begin());
  return v;
}

std::vector<int> pointer_column(const Tensor& t) {
  std::vector<int> v(static_cast<size_t>(t.numel()));
  for (int64_t i = 0; i < t.numel(); ++i) v[static_cast<size_t>(i)] = static_cast<int>(std::llround(t[i]));
  return v;
}

int mask_one_index(const Tensor& t) {
  for (int64_t i = 0; i < t.numel(); ++i)
    if (t[i] > 0.5) return static_cast<int>(i);
  fail("mask_one with no set bit");
}

// Predecessor chain for an explicit node order: first node points to itself.
Tensor order_chain(const std::vector<int>& order) {
  const int n = static_cast<int>(order.size());
  std::vector<int> pred(static_cast<size_t>(n), 0);
  for (int p = 0; p < n; ++p)
    pred[static_cast<size_t>(order[static_cast<size_t>(p)])] =
        p == 0 ? order[0] : order[static_cast<size_t>(p - 1)];
  return node_pointer(pred);
}

double orient(double ax, double ay, double bx, double by, double cx, double cy) {
  return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

// ---------------------------------------------------------------------------
// Executors
// ---------------------------------------------------------------------------

struct Ctx {
  const ProblemSpec& spec;
  int n;
  const std::map<std::string, Tensor>& in;
  TraceRecorder rec;

  Ctx(const ProblemSpec& s, int n_, const std::map<std::string, Tensor>& inputs)
      : spec(s), n(n_), in(inputs), rec(s, n_) {}

  const Tensor& get(const std::string& name) const {
    auto it = in.find(name);
    check(it != in.end(), spec.algorithm_id + ": instance missing input " + name);
    return it->second;
  }
};

void run_insertion_sort(Ctx& c, std::map<std::string, Tensor>& outputs) {
  const auto key = column(c.get("key"));
  const int n = c.n;
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  auto record = [&](int i_node, int j_node) {
    c.rec.snapshot({{"pred_h", order_chain(order)},
                    {"i", node_mask_one(n, i_node)},
                    {"j", node_mask_one(n, j_node)}});
  };

  record(0, 0);  // initial array order
  for (int k = 1; k < n; ++k) {
    // Stable insertion of order[k] into the sorted prefix.
    const int node = order[static_cast<size_t>(k)];
    int p = k - 1;
    while (p >= 0 && key[static_cast<size_t>(order[static_cast<size_t>(p)])] >
                         key[static_cast<size_t>(node)]) {
      order[static_cast<size_t>(p + 1)] = order[static_cast<size_t>(p)];
      --p;
    }
    order[static_cast<size_t>(p + 1)] = node;
    const int j_node = p >= 0 ? order[static_cast<size_t>(p)] : node;
    record(node, j_node);
  }
  outputs.emplace("pred", order_chain(order));
}

void run_bubble_sort(Ctx& c, std::map<std::string, Tensor>& outputs) {
  const auto key = column(c.get("key"));
  const int n = c.n;
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  auto record = [&](int left, int right) {
    c.rec.snapshot({{"pred_h", order_chain(order)},
                    {"i", node_mask_one(n, left)},
                    {"j", node_mask_one(n, right)}});
  };

  record(0, 0);
  for (int pass = 0; pass < n - 1; ++pass)
    for (int p = 0; p < n - 1 - pass; ++p) {
      int a = order[static_cast<size_t>(p)];
      int b = order[static_cast<size_t>(p + 1)];
      if (key[static_cast<size_t>(a)] > key[static_cast<size_t>(b)])
        std::swap(order[static_cast<size_t>(p)], order[static_cast<size_t>(p + 1)]);
      record(order[static_cast<size_t>(p)], order[static_cast<size_t>(p + 1)]);
    }
  outputs.emplace("pred", order_chain(order));
}

void run_binary_search(Ctx& c, std::map<std::string, Tensor>& outputs) {
  const auto key = column(c.get("key"));
  const double target = c.get("target")[0];
  const int n = c.n;
  for (int i = 1; i < n; ++i)
    check(key[static_cast<size_t>(i - 1)] <= key[static_cast<size_t>(i)],
          "binary_search: keys must be sorted ascending");

  const Tensor chain = index_chain_pointer(n);
  int low = 0, high = n - 1;
  auto record = [&](int mid) {
    c.rec.snapshot({{"pred_h", chain},
                    {"low", node_mask_one(n, low)},
                    {"high", node_mask_one(n, high)},
                    {"mid", node_mask_one(n, mid)}});
  };

  record(0);
  while (low < high) {
    const int mid = (low + high + 1) / 2;
    if (key[static_cast<size_t>(mid)] <= target)
      low = mid;
    else
      high = mid - 1;
    record(mid);
  }
  // Answer: largest index whose key <= target, or node 0 when all exceed it.
  outputs.emplace("return", node_mask_one(n, low));
}

void run_minimum(Ctx& c, std::map<std::string, Tensor>& outputs) {
  const auto key = column(c.get("key"));
  const int n = c.n;
  const Tensor chain = index_chain_pointer(n);
  int best = 0;
  auto record = [&](int i) {
    c.rec.snapshot(
        {{"pred_h", chain}, {"min_h", node_mask_one(n, best)}, {"i", node_mask_one(n, i)}});
  };
  record(0);
  for (int i = 1; i < n; ++i) {
    if (key[static_cast<size_t>(i)] < key[static_cast<size_t>(best)]) best = i;
    record(i);
  }
  outputs.emplace("min", node_mask_one(n, best));
}

void run_bfs(Ctx& c, std::map<std::string, Tensor>& outputs) {
  const int n = c.n;
  const int s = mask_one_index(c.get("s"));
  const Tensor& adj = c.get("adj");
  std::vector<char> reach(static_cast<size_t>(n), 0);
  std::vector<int> pi(static_cast<size_t>(n));
  std::iota(pi.begin(), pi.end(), 0);
  reach[static_cast<size_t>(s)] = 1;

  auto record = [&]() {
    std::vector<double> rm(reach.begin(), reach.end());
    c.rec.snapshot({{"reach_h", node_mask(rm)}, {"pi_h", node_pointer(pi)}});
  };
  record();

  while (true) {
    // One layer: every unreached node adjacent to the reached set joins it,
    // with the lowest-index reached neighbour as its parent.
    std::vector<int> newly;
    for (int v = 0; v < n; ++v) {
      if (reach[static_cast<size_t>(v)]) continue;
      for (int u = 0; u < n; ++u) {
        if (reach[static_cast<size_t>(u)] && adj[static_cast<int64_t>(u) * n + v] > 0.5) {
          newly.push_back(v);
          pi[static_cast<size_t>(v)] = u;  // lowest u wins: loop is ascending
          break;
        }
      }
    }
    if (newly.empty()) break;
    for (int v : newly) reach[static_cast<size_t>(v)] = 1;
    record();
  }
  outputs.emplace("pi", node_pointer(pi));
}

void run_bellman_ford(Ctx& c, std::map<std::string, Tensor>& outputs) {
  const int n = c.n;
  const int s = mask_one_index(c.get("s"));
  const Tensor& adj = c.get("adj");
  const Tensor& w = c.get("w");
  std::vector<double> d(static_cast<size_t>(n), 0.0);
  std::vector<char> msk(static_cast<size_t>(n), 0);
  std::vector<int> pi(static_cast<size_t>(n));
  std::iota(pi.begin(), pi.end(), 0);
  msk[static_cast<size_t>(s)] = 1;

  auto record = [&]() {
    std::vector<double> mm(msk.begin(), msk.end());
    c.rec.snapshot(
        {{"d_h", node_scalar(d)}, {"msk_h", node_mask(mm)}, {"pi_h", node_pointer(pi)}});
  };
  record();

  // Synchronous relaxation rounds until a fixpoint; one extra round implies a
  // negative cycle.
  for (int round = 0; round < n + 1; ++round) {
    bool changed = false;
    std::vector<double> nd = d;
    std::vector<char> nmsk = msk;
    std::vector<int> npi = pi;
    for (int v = 0; v < n; ++v) {
      for (int u = 0; u < n; ++u) {
        if (u == v || !msk[static_cast<size_t>(u)]) continue;
        if (adj[static_cast<int64_t>(u) * n + v] < 0.5) continue;
        const double cand = d[static_cast<size_t>(u)] + w[static_cast<int64_t>(u) * n + v];
        if (!nmsk[static_cast<size_t>(v)] || cand < nd[static_cast<size_t>(v)]) {
          nd[static_cast<size_t>(v)] = cand;
          nmsk[static_cast<size_t>(v)] = 1;
          npi[static_cast<size_t>(v)] = u;
          changed = true;
        }
      }
    }
    // The source never relaxes away from distance zero on non-negative
    // instances; with negative cycles it can, which the guard below catches.
    if (!changed) break;
    check(round < n, "bellman_ford: negative cycle detected");
    d = nd;
    msk = nmsk;
    pi = npi;
    record();
  }
  outputs.emplace("pi", node_pointer(pi));
}

void run_floyd_warshall(Ctx& c, std::map<std::string, Tensor>& outputs) {
  const int n = c.n;
  const Tensor& adj = c.get("adj");
  const Tensor& w = c.get("w");
  Tensor D = edge_scalar(n);
  Tensor msk = edge_mask(n);
  Tensor Pi({n, n, 1});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int64_t e = static_cast<int64_t>(i) * n + j;
      if (i == j) {
        msk[e] = 1.0;
        Pi[e] = i;
      } else if (adj[e] > 0.5) {
        D[e] = w[e];
        msk[e] = 1.0;
        Pi[e] = i;
      } else {
        Pi[e] = j;  // no-path sentinel: points at the column node
      }
    }

  auto record = [&](int k) {
    c.rec.snapshot({{"D_h", D}, {"msk_h", msk}, {"k_h", node_mask_one(n, k)}, {"Pi_h", Pi}});
  };
  record(0);

  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const int64_t ij = static_cast<int64_t>(i) * n + j;
        const int64_t ik = static_cast<int64_t>(i) * n + k;
        const int64_t kj = static_cast<int64_t>(k) * n + j;
        if (msk[ik] < 0.5 || msk[kj] < 0.5 || i == j) continue;
        const double cand = D[ik] + D[kj];
        if (msk[ij] < 0.5 || cand < D[ij]) {
          D[ij] = cand;
          msk[ij] = 1.0;
          Pi[ij] = Pi[kj];
        }
      }
    record(k);
  }
  outputs.emplace("Pi", Pi);
}

void run_activity_selector(Ctx& c, std::map<std::string, Tensor>& outputs) {
  const auto start = column(c.get("start"));
  const auto finish = column(c.get("finish"));
  const int n = c.n;
  for (int i = 0; i < n; ++i)
    check(start[static_cast<size_t>(i)] <= finish[static_cast<size_t>(i)],
          "activity_selector: start must not exceed finish");

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (finish[static_cast<size_t>(a)] != finish[static_cast<size_t>(b)])
      return finish[static_cast<size_t>(a)] < finish[static_cast<size_t>(b)];
    return a < b;
  });

  const Tensor chain = index_chain_pointer(n);
  std::vector<double> sel(static_cast<size_t>(n), 0.0);
  int last = order[0], cur = order[0];
  auto record = [&]() {
    c.rec.snapshot({{"pred_h", chain},
                    {"sel_h", node_mask(sel)},
                    {"m_h", node_mask_one(n, last)},
                    {"k_h", node_mask_one(n, cur)}});
  };
  record();
  for (int t = 0; t < n; ++t) {
    cur = order[static_cast<size_t>(t)];
    if (t == 0 || start[static_cast<size_t>(cur)] >= finish[static_cast<size_t>(last)]) {
      sel[static_cast<size_t>(cur)] = 1.0;
      last = cur;
    }
    record();
  }
  outputs.emplace("sel", node_mask(sel));
}

void run_lcs_length(Ctx& c, std::map<std::string, Tensor>& outputs) {
  const int n = c.n;
  const auto seg = column(c.get("seg"));
  const Tensor& key = c.get("key");
  // Nodes [0, L1) hold the first string, [L1, n) the second.
  int L1 = 0;
  while (L1 < n && seg[static_cast<size_t>(L1)] < 0.5) ++L1;
  const int L2 = n - L1;
  check(L1 >= 1 && L2 >= 1, "lcs_length: both segments must be non-empty");
  for (int i = L1; i < n; ++i)
    check(seg[static_cast<size_t>(i)] > 0.5, "lcs_length: seg mask must be contiguous");

  auto sym = [&](int node) {
    for (int k = 0; k < 4; ++k)
      if (key[static_cast<int64_t>(node) * 4 + k] > 0.5) return k;
    fail("lcs_length: key row not one-hot");
  };

  // b categories: 0 none, 1 diagonal, 2 up, 3 left.
  std::vector<std::vector<int>> cdp(static_cast<size_t>(L1 + 1),
                                    std::vector<int>(static_cast<size_t>(L2 + 1), 0));
  Tensor c_h = edge_scalar(n);
  Tensor b_h({n, n, 4});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b_h[(static_cast<int64_t>(i) * n + j) * 4 + 0] = 1.0;

  const Tensor chain = index_chain_pointer(n);
  auto record = [&]() { c.rec.snapshot({{"pred_h", chain}, {"c_h", c_h}, {"b_h", b_h}}); };
  record();

  for (int i = 1; i <= L1; ++i) {
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
      c_h[cell] = cdp[static_cast<size_t>(i)][static_cast<size_t>(j)];
      for (int k = 0; k < 4; ++k) b_h[cell * 4 + k] = k == arrow ? 1.0 : 0.0;
    }
    record();  // one snapshot per filled DP row
  }
  outputs.emplace("b", b_h);
}

void run_naive_string_matcher(Ctx& c, std::map<std::string, Tensor>& outputs) {
  const int n = c.n;
  const auto needle = column(c.get("needle"));
  const Tensor& key = c.get("key");
  int H = 0;
  while (H < n && needle[static_cast<size_t>(H)] < 0.5) ++H;
  const int m = n - H;
  check(H >= 1 && m >= 1, "naive_string_matcher: both segments must be non-empty");
  for (int i = H; i < n; ++i)
    check(needle[static_cast<size_t>(i)] > 0.5,
          "naive_string_matcher: needle mask must be contiguous");

  auto sym = [&](int node) {
    for (int k = 0; k < 4; ++k)
      if (key[static_cast<int64_t>(node) * 4 + k] > 0.5) return k;
    fail("naive_string_matcher: key row not one-hot");
  };

  const Tensor chain = index_chain_pointer(n);
  int s = 0, j = 0;
  auto record = [&]() {
    c.rec.snapshot({{"pred_h", chain},
                    {"shift_h", node_mask_one(n, std::min(s, H - 1))},
                    {"j_h", node_mask_one(n, H + std::min(j, m - 1))}});
  };
  record();

  int found = -1;
  while (m <= H && s + m <= H) {
    if (sym(s + j) == sym(H + j)) {
      ++j;
      if (j == m) {
        found = s;
        record();
        break;
      }
    } else {
      j = 0;
      ++s;
    }
    record();
  }
  // Sentinel for "no occurrence": the first needle node.
  outputs.emplace("match", node_mask_one(n, found >= 0 ? found : H));
}

void run_graham_scan(Ctx& c, std::map<std::string, Tensor>& outputs) {
  const int n = c.n;
  const auto px = column(c.get("x"));
  const auto py = column(c.get("y"));

  std::vector<int> self(static_cast<size_t>(n));
  std::iota(self.begin(), self.end(), 0);

  if (n <= 2) {
    // Degenerate hull: every point is on it.
    c.rec.snapshot({{"pivot_h", node_mask_one(n, 0)},
                    {"stack_h", node_pointer(self)},
                    {"cur_h", node_mask_one(n, 0)},
                    {"in_hull_h", node_mask(std::vector<double>(static_cast<size_t>(n), 1.0))}});
    outputs.emplace("in_hull", node_mask(std::vector<double>(static_cast<size_t>(n), 1.0)));
    return;
  }

  // Degenerate (collinear or duplicate) point sets have no canonical trace;
  // the sampler resamples them away and direct callers must not pass them.
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int d = b + 1; d < n; ++d)
        check(std::abs(orient(px[static_cast<size_t>(a)], py[static_cast<size_t>(a)],
                              px[static_cast<size_t>(b)], py[static_cast<size_t>(b)],
                              px[static_cast<size_t>(d)], py[static_cast<size_t>(d)])) > 1e-12,
              "graham_scan: collinear points in instance");

  int pivot = 0;
  for (int i = 1; i < n; ++i) {
    if (py[static_cast<size_t>(i)] < py[static_cast<size_t>(pivot)] ||
        (py[static_cast<size_t>(i)] == py[static_cast<size_t>(pivot)] &&
         px[static_cast<size_t>(i)] < px[static_cast<size_t>(pivot)]))
      pivot = i;
  }

  std::vector<int> order;
  for (int i = 0; i < n; ++i)
    if (i != pivot) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double o = orient(px[static_cast<size_t>(pivot)], py[static_cast<size_t>(pivot)],
                            px[static_cast<size_t>(a)], py[static_cast<size_t>(a)],
                            px[static_cast<size_t>(b)], py[static_cast<size_t>(b)]);
    if (o != 0.0) return o > 0.0;  // counterclockwise first
    const double da = std::hypot(px[static_cast<size_t>(a)] - px[static_cast<size_t>(pivot)],
                                 py[static_cast<size_t>(a)] - py[static_cast<size_t>(pivot)]);
    const double db = std::hypot(px[static_cast<size_t>(b)] - px[static_cast<size_t>(pivot)],
                                 py[static_cast<size_t>(b)] - py[static_cast<size_t>(pivot)]);
    if (da != db) return da < db;
    return a < b;
  });

  std::vector<int> stack = {pivot, order[0]};
  auto record = [&](int cur) {
    std::vector<int> chain = self;
    for (size_t idx = 1; idx < stack.size(); ++idx)
      chain[static_cast<size_t>(stack[idx])] = stack[idx - 1];
    chain[static_cast<size_t>(stack[0])] = stack[0];
    std::vector<double> member(static_cast<size_t>(n), 0.0);
    for (int node : stack) member[static_cast<size_t>(node)] = 1.0;
    c.rec.snapshot({{"pivot_h", node_mask_one(n, pivot)},
                    {"stack_h", node_pointer(chain)},
                    {"cur_h", node_mask_one(n, cur)},
                    {"in_hull_h", node_mask(member)}});
  };
  record(order[0]);

  for (size_t t = 1; t < order.size(); ++t) {
    const int cand = order[t];
    while (stack.size() >= 2) {
      const int top = stack[stack.size() - 1];
      const int below = stack[stack.size() - 2];
      const double o = orient(px[static_cast<size_t>(below)], py[static_cast<size_t>(below)],
                              px[static_cast<size_t>(top)], py[static_cast<size_t>(top)],
                              px[static_cast<size_t>(cand)], py[static_cast<size_t>(cand)]);
      if (o > 0.0) break;  // strict left turn keeps the top
      stack.pop_back();
    }
    stack.push_back(cand);
    record(cand);
  }

  std::vector<double> member(static_cast<size_t>(n), 0.0);
  for (int node : stack) member[static_cast<size_t>(node)] = 1.0;
  outputs.emplace("in_hull", node_mask(member));
}

}  // namespace

Trajectory run_algorithm(AlgorithmId id, int n, const std::map<std::string, Tensor>& inputs) {
  check(n >= 1, "instance needs at least one node");
  const ProblemSpec& spec = problem_spec(id);

  // Malformed-instance guard: every INPUT feature present, right shape, typed
  // invariants hold.
  {
    Trajectory probe;
    probe.n = n;
    probe.num_steps = 0;
    probe.inputs = inputs;
    ProblemSpec inputs_only;
    inputs_only.algorithm_id = spec.algorithm_id;
    inputs_only.family = spec.family;
    for (const auto& f : spec.features)
      if (f.stage == Stage::INPUT) inputs_only.features.push_back(f);
    ValidationReport rep = validate_trajectory(inputs_only, probe);
    check(rep.ok(), spec.algorithm_id + ": malformed instance:\n" + rep.to_string());
  }

  Ctx ctx(spec, n, inputs);
  std::map<std::string, Tensor> outputs;
  switch (id) {
    case AlgorithmId::INSERTION_SORT: run_insertion_sort(ctx, outputs); break;
    case AlgorithmId::BUBBLE_SORT: run_bubble_sort(ctx, outputs); break;
    case AlgorithmId::BINARY_SEARCH: run_binary_search(ctx, outputs); break;
    case AlgorithmId::MINIMUM: run_minimum(ctx, outputs); break;
    case AlgorithmId::BFS: run_bfs(ctx, outputs); break;
    case AlgorithmId::BELLMAN_FORD: run_bellman_ford(ctx, outputs); break;
    case AlgorithmId::FLOYD_WARSHALL: run_floyd_warshall(ctx, outputs); break;
    case AlgorithmId::ACTIVITY_SELECTOR: run_activity_selector(ctx, outputs); break;
    case AlgorithmId::LCS_LENGTH: run_lcs_length(ctx, outputs); break;
    case AlgorithmId::NAIVE_STRING_MATCHER: run_naive_string_matcher(ctx, outputs); break;
    case AlgorithmId::GRAHAM_SCAN: run_graham_scan(ctx, outputs); break;
  }

  Trajectory traj;
  traj.n = n;
  traj.num_steps = ctx.rec.steps();
  traj.inputs = inputs;
  traj.hints = ctx.rec.stacked();
  traj.outputs = std::move(outputs);

  ValidationReport rep = validate_trajectory(spec, traj);
  check(rep.ok(), spec.algorithm_id + ": executor produced an invalid trajectory:\n" +
                      rep.to_string());
  return traj;
}

}  // namespace nar
