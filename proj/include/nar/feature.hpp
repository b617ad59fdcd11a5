#pragma once

// Typed feature system: problem schemas and trajectory containers shared by
// the samplers, codecs and trainers. All types are immutable once built.
//
// Array layout per location (f = feature width):
//   NODE  -> (n, f)       EDGE -> (n, n, f)      GRAPH -> (f)
// with a leading time axis T for hints. Widths per type: SCALAR, MASK,
// MASK_ONE and POINTER store one value per cell (POINTER stores the target
// node index); CATEGORICAL stores a one-hot row of num_categories.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nar/common.hpp"
#include "nar/tensor.hpp"

namespace nar {

enum class Stage { INPUT, HINT, OUTPUT };
enum class Location { NODE, EDGE, GRAPH };
enum class FType { SCALAR, CATEGORICAL, MASK, MASK_ONE, POINTER };

const char* to_string(Stage s);
const char* to_string(Location l);
const char* to_string(FType t);
Stage stage_from_string(const std::string& s);
Location location_from_string(const std::string& s);
FType ftype_from_string(const std::string& s);

struct FeatureSpec {
  std::string name;
  Stage stage = Stage::INPUT;
  Location location = Location::NODE;
  FType type = FType::SCALAR;
  int num_categories = 0;  // CATEGORICAL only

  // Trailing feature width of the dense array.
  int width() const { return type == FType::CATEGORICAL ? num_categories : 1; }
  // Expected array shape (without time axis) at node count n.
  Shape array_shape(int n) const;
};

enum class Family { SORTING, SEARCH, GRAPH, GREEDY, DP, STRINGS, GEOMETRY };
const char* to_string(Family f);
Family family_from_string(const std::string& s);

struct ProblemSpec {
  std::string algorithm_id;
  Family family = Family::SORTING;
  std::vector<FeatureSpec> features;

  const FeatureSpec* find(const std::string& name) const;
  std::vector<const FeatureSpec*> by_stage(Stage s) const;
  // Structural checks: exactly one NODE/SCALAR INPUT named "pos", at least
  // one OUTPUT, valid category counts.
  void validate() const;
};

struct Trajectory {
  int n = 0;
  int num_steps = 0;  // hint time steps T (0 when the schema has no hints)
  std::map<std::string, Tensor> inputs;
  std::map<std::string, Tensor> hints;  // time-major: (T, ...)
  std::map<std::string, Tensor> outputs;

  const Tensor& input(const std::string& name) const;
  const Tensor& output(const std::string& name) const;
  // Full time-major hint array. Respects the evaluation taint guard.
  const Tensor& hint(const std::string& name) const;
  // One time slice of a hint, shaped like the static array.
  Tensor hint_slice(const std::string& name, int t) const;

  // Evaluation taint guard: while locked, reading hint steps t > 0 fails.
  // The initial slice stays readable because it is part of the problem setup.
  void lock_hints_beyond_initial() const { hints_locked_ = true; }
  void unlock_hints() const { hints_locked_ = false; }

 private:
  mutable bool hints_locked_ = false;
};

struct Violation {
  std::string feature;
  int step = -1;  // -1 for inputs/outputs
  std::string what;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

// Checks every schema and type invariant of the trajectory against the spec.
ValidationReport validate_trajectory(const ProblemSpec& spec, const Trajectory& traj);

// Re-stages every POINTER hint that is constant across all steps of all given
// trajectories from HINT to INPUT, and rewrites the trajectories accordingly.
// Fails when a re-staged hint varies inside one of the given trajectories.
struct StagedProblem {
  ProblemSpec spec;
  std::vector<std::string> eliminated;  // hint names turned into inputs
};
StagedProblem static_hint_to_input(const ProblemSpec& spec,
                                   const std::vector<Trajectory>& probe_traces);

// Applies a previously computed re-staging to a fresh trajectory.
// Fails if a re-staged hint varies over time in `traj`.
Trajectory restage_trajectory(const StagedProblem& staged, Trajectory traj);

}  // namespace nar
