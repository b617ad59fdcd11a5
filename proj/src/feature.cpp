#include "nar/feature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nar {

const char* to_string(Stage s) {
  switch (s) {
    case Stage::INPUT: return "input";
    case Stage::HINT: return "hint";
    case Stage::OUTPUT: return "output";
  }
  return "?";
}

const char* to_string(Location l) {
  switch (l) {
    case Location::NODE: return "node";
    case Location::EDGE: return "edge";
    case Location::GRAPH: return "graph";
  }
  return "?";
}

const char* to_string(FType t) {
  switch (t) {
    case FType::SCALAR: return "scalar";
    case FType::CATEGORICAL: return "categorical";
    case FType::MASK: return "mask";
    case FType::MASK_ONE: return "mask_one";
    case FType::POINTER: return "pointer";
  }
  return "?";
}

Stage stage_from_string(const std::string& s) {
  if (s == "input") return Stage::INPUT;
  if (s == "hint") return Stage::HINT;
  if (s == "output") return Stage::OUTPUT;
  fail("unknown stage: " + s);
}

Location location_from_string(const std::string& s) {
  if (s == "node") return Location::NODE;
  if (s == "edge") return Location::EDGE;
  if (s == "graph") return Location::GRAPH;
  fail("unknown location: " + s);
}

FType ftype_from_string(const std::string& s) {
  if (s == "scalar") return FType::SCALAR;
  if (s == "categorical") return FType::CATEGORICAL;
  if (s == "mask") return FType::MASK;
  if (s == "mask_one") return FType::MASK_ONE;
  if (s == "pointer") return FType::POINTER;
  fail("unknown feature type: " + s);
}

const char* to_string(Family f) {
  switch (f) {
    case Family::SORTING: return "sorting";
    case Family::SEARCH: return "search";
    case Family::GRAPH: return "graph";
    case Family::GREEDY: return "greedy";
    case Family::DP: return "dp";
    case Family::STRINGS: return "strings";
    case Family::GEOMETRY: return "geometry";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "sorting") return Family::SORTING;
  if (s == "search") return Family::SEARCH;
  if (s == "graph") return Family::GRAPH;
  if (s == "greedy") return Family::GREEDY;
  if (s == "dp") return Family::DP;
  if (s == "strings") return Family::STRINGS;
  if (s == "geometry") return Family::GEOMETRY;
  fail("unknown family: " + s);
}

Shape FeatureSpec::array_shape(int n) const {
  switch (location) {
    case Location::NODE: return {n, width()};
    case Location::EDGE: return {n, n, width()};
    case Location::GRAPH: return {width()};
  }
  fail("bad location");
}

const FeatureSpec* ProblemSpec::find(const std::string& name) const {
  for (const auto& f : features)
    if (f.name == name) return &f;
  return nullptr;
}

std::vector<const FeatureSpec*> ProblemSpec::by_stage(Stage s) const {
  std::vector<const FeatureSpec*> out;
  for (const auto& f : features)
    if (f.stage == s) out.push_back(&f);
  return out;
}

void ProblemSpec::validate() const {
  int pos_count = 0;
  int output_count = 0;
  for (const auto& f : features) {
    if (f.name == "pos") {
      check(f.stage == Stage::INPUT && f.location == Location::NODE && f.type == FType::SCALAR,
            algorithm_id + ": pos must be a NODE/SCALAR input");
      ++pos_count;
    }
    if (f.stage == Stage::OUTPUT) ++output_count;
    if (f.type == FType::CATEGORICAL)
      check(f.num_categories >= 1,
            algorithm_id + ": categorical feature " + f.name + " needs num_categories >= 1");
    if (f.type == FType::POINTER)
      check(f.location != Location::GRAPH,
            algorithm_id + ": pointer feature " + f.name + " must be node- or edge-located");
  }
  check(pos_count == 1, algorithm_id + ": spec must contain exactly one pos input");
  check(output_count >= 1, algorithm_id + ": spec needs at least one output");
}

const Tensor& Trajectory::input(const std::string& name) const {
  auto it = inputs.find(name);
  check(it != inputs.end(), "missing input feature: " + name);
  return it->second;
}

const Tensor& Trajectory::output(const std::string& name) const {
  auto it = outputs.find(name);
  check(it != outputs.end(), "missing output feature: " + name);
  return it->second;
}

const Tensor& Trajectory::hint(const std::string& name) const {
  check(!hints_locked_, "ground-truth hints are locked during evaluation");
  auto it = hints.find(name);
  check(it != hints.end(), "missing hint feature: " + name);
  return it->second;
}

Tensor Trajectory::hint_slice(const std::string& name, int t) const {
  check(!hints_locked_ || t == 0,
        "ground-truth hint step " + std::to_string(t) + " read during evaluation");
  auto it = hints.find(name);
  check(it != hints.end(), "missing hint feature: " + name);
  const Tensor& whole = it->second;
  check(t >= 0 && t < whole.dim(0), "hint step out of range");
  Shape slice_shape(whole.shape().begin() + 1, whole.shape().end());
  const int64_t stride = shape_numel(slice_shape);
  Tensor out(slice_shape);
  std::copy(whole.data() + t * stride, whole.data() + (t + 1) * stride, out.data());
  return out;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& v : violations) {
    os << v.feature;
    if (v.step >= 0) os << "[t=" << v.step << "]";
    os << ": " << v.what << "\n";
  }
  return os.str();
}

namespace {

constexpr double kTol = 1e-9;

bool is_integral_value(double v) { return std::abs(v - std::round(v)) < kTol; }

// Checks the typed invariants of one time slice (or static array).
void check_typed(const FeatureSpec& f, const Tensor& arr, int n, int step,
                 std::vector<Violation>& out) {
  auto violate = [&](const std::string& what) { out.push_back({f.name, step, what}); };

  const int64_t cells = f.location == Location::GRAPH
                            ? 1
                            : (f.location == Location::NODE ? n : static_cast<int64_t>(n) * n);
  const int w = f.width();

  switch (f.type) {
    case FType::SCALAR:
      for (int64_t i = 0; i < arr.numel(); ++i)
        if (!std::isfinite(arr[i])) {
          violate("non-finite scalar value");
          return;
        }
      break;
    case FType::MASK:
      for (int64_t i = 0; i < arr.numel(); ++i)
        if (std::abs(arr[i]) > kTol && std::abs(arr[i] - 1.0) > kTol) {
          violate("mask value not in {0,1} at cell " + std::to_string(i));
          return;
        }
      break;
    case FType::MASK_ONE: {
      double s = 0.0;
      for (int64_t i = 0; i < arr.numel(); ++i) {
        if (std::abs(arr[i]) > kTol && std::abs(arr[i] - 1.0) > kTol) {
          violate("mask_one value not in {0,1} at cell " + std::to_string(i));
          return;
        }
        s += arr[i];
      }
      if (std::abs(s - 1.0) > kTol)
        violate("mask_one sums to " + std::to_string(s) + ", expected 1");
      break;
    }
    case FType::CATEGORICAL:
      for (int64_t c = 0; c < cells; ++c) {
        double s = 0.0;
        bool binary = true;
        for (int k = 0; k < w; ++k) {
          const double v = arr[c * w + k];
          if (std::abs(v) > kTol && std::abs(v - 1.0) > kTol) binary = false;
          s += v;
        }
        if (!binary || std::abs(s - 1.0) > kTol) {
          violate("categorical row not one-hot at cell " + std::to_string(c));
          return;
        }
      }
      break;
    case FType::POINTER:
      for (int64_t c = 0; c < cells; ++c) {
        const double v = arr[c];
        if (!is_integral_value(v) || v < -kTol || v > n - 1 + kTol) {
          violate("pointer value " + std::to_string(v) + " out of [0," + std::to_string(n) +
                  ") at cell " + std::to_string(c));
          return;
        }
      }
      break;
  }
}

}  // namespace

ValidationReport validate_trajectory(const ProblemSpec& spec, const Trajectory& traj) {
  ValidationReport rep;
  const int n = traj.n;

  auto check_static = [&](const FeatureSpec& f, const std::map<std::string, Tensor>& pool) {
    auto it = pool.find(f.name);
    if (it == pool.end()) {
      rep.violations.push_back({f.name, -1, "feature missing from trajectory"});
      return;
    }
    const Shape want = f.array_shape(n);
    if (it->second.shape() != want) {
      rep.violations.push_back({f.name, -1,
                                "shape " + shape_str(it->second.shape()) + " != expected " +
                                    shape_str(want)});
      return;
    }
    check_typed(f, it->second, n, -1, rep.violations);
  };

  for (const auto& f : spec.features) {
    switch (f.stage) {
      case Stage::INPUT:
        check_static(f, traj.inputs);
        break;
      case Stage::OUTPUT:
        check_static(f, traj.outputs);
        break;
      case Stage::HINT: {
        auto it = traj.hints.find(f.name);
        if (it == traj.hints.end()) {
          rep.violations.push_back({f.name, -1, "hint missing from trajectory"});
          break;
        }
        Shape want = f.array_shape(n);
        want.insert(want.begin(), traj.num_steps);
        if (it->second.shape() != want) {
          rep.violations.push_back({f.name, -1,
                                    "hint shape " + shape_str(it->second.shape()) +
                                        " != expected " + shape_str(want)});
          break;
        }
        for (int t = 0; t < traj.num_steps; ++t)
          check_typed(f, traj.hint_slice(f.name, t), n, t, rep.violations);
        break;
      }
    }
  }

  // Surplus arrays are schema violations too.
  auto surplus = [&](const std::map<std::string, Tensor>& pool, Stage stage) {
    for (const auto& [name, arr] : pool) {
      const FeatureSpec* f = spec.find(name);
      if (!f || f->stage != stage)
        rep.violations.push_back({name, -1, "unexpected array for stage"});
    }
  };
  surplus(traj.inputs, Stage::INPUT);
  surplus(traj.hints, Stage::HINT);
  surplus(traj.outputs, Stage::OUTPUT);

  return rep;
}

namespace {

bool hint_constant_over_time(const Tensor& whole) {
  const int T = whole.dim(0);
  if (T <= 1) return true;
  const int64_t stride = whole.numel() / T;
  for (int t = 1; t < T; ++t)
    for (int64_t i = 0; i < stride; ++i)
      if (whole[t * stride + i] != whole[i]) return false;
  return true;
}

}  // namespace

StagedProblem static_hint_to_input(const ProblemSpec& spec,
                                   const std::vector<Trajectory>& probe_traces) {
  StagedProblem out;
  out.spec = spec;
  for (auto& f : out.spec.features) {
    if (f.stage != Stage::HINT || f.type != FType::POINTER) continue;
    bool constant = !probe_traces.empty();
    for (const Trajectory& traj : probe_traces) {
      auto it = traj.hints.find(f.name);
      check(it != traj.hints.end(), "probe trace lacks hint " + f.name);
      if (!hint_constant_over_time(it->second)) {
        constant = false;
        break;
      }
    }
    if (constant) {
      f.stage = Stage::INPUT;
      out.eliminated.push_back(f.name);
    }
  }
  return out;
}

Trajectory restage_trajectory(const StagedProblem& staged, Trajectory traj) {
  for (const std::string& name : staged.eliminated) {
    auto it = traj.hints.find(name);
    check(it != traj.hints.end(), "trajectory lacks re-staged hint " + name);
    check(hint_constant_over_time(it->second),
          "re-staged hint " + name + " varies over time in a trajectory");
    const Tensor& whole = it->second;
    Shape slice_shape(whole.shape().begin() + 1, whole.shape().end());
    Tensor slice(slice_shape);
    std::copy(whole.data(), whole.data() + slice.numel(), slice.data());
    traj.inputs.emplace(name, std::move(slice));
    traj.hints.erase(it);
  }
  return traj;
}

}  // namespace nar
