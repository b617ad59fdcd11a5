#include "doctest.h"
#include "nar/algorithms.hpp"
#include "nar/feature.hpp"
#include "nar/sampler.hpp"

using namespace nar;

namespace {

Trajectory bfs_example() {
  // 3-node path 0-1-2, source 0.
  std::map<std::string, Tensor> in;
  in.emplace("pos", node_scalar({0.1, 0.5, 0.9}));
  in.emplace("s", node_mask_one(3, 0));
  Tensor adj({3, 3, 1});
  adj.at({0, 1, 0}) = 1;
  adj.at({1, 0, 0}) = 1;
  adj.at({1, 2, 0}) = 1;
  adj.at({2, 1, 0}) = 1;
  in.emplace("adj", adj);
  return run_algorithm(AlgorithmId::BFS, 3, in);
}

}  // namespace

TEST_CASE("valid trajectory yields an empty report") {
  Trajectory traj = bfs_example();
  ValidationReport rep = validate_trajectory(problem_spec(AlgorithmId::BFS), traj);
  CHECK(rep.ok());
}

TEST_CASE("mask_one summing to two is reported with feature and step") {
  Trajectory traj = bfs_example();
  // Corrupt a pi_h? pi_h is a pointer; corrupt reach-style by making a
  // mask_one-ish hint invalid: use minimum's min_h instead.
  std::map<std::string, Tensor> in;
  in.emplace("pos", node_scalar({0.2, 0.4, 0.6}));
  in.emplace("key", node_scalar({0.5, 0.1, 0.9}));
  Trajectory mt = run_algorithm(AlgorithmId::MINIMUM, 3, in);
  mt.hints.at("min_h")[0] = 1.0;
  mt.hints.at("min_h")[1] = 1.0;  // step 0 now sums to 2
  ValidationReport rep = validate_trajectory(problem_spec(AlgorithmId::MINIMUM), mt);
  REQUIRE(!rep.ok());
  bool found = false;
  for (const auto& v : rep.violations)
    if (v.feature == "min_h" && v.step == 0) found = true;
  CHECK(found);
}

TEST_CASE("pointer value n is a range violation") {
  Trajectory traj = bfs_example();
  traj.outputs.at("pi")[0] = 3.0;  // out of [0, 3)
  ValidationReport rep = validate_trajectory(problem_spec(AlgorithmId::BFS), traj);
  REQUIRE(!rep.ok());
  CHECK(rep.violations[0].feature == "pi");
}

TEST_CASE("static hint elimination restages constant pointer hints") {
  SamplerConfig cfg;
  cfg.algorithm = AlgorithmId::BINARY_SEARCH;
  Rng rng(7);
  std::vector<Trajectory> probes;
  for (int i = 0; i < 20; ++i) probes.push_back(sample_problem(cfg, rng));
  StagedProblem staged = static_hint_to_input(problem_spec(AlgorithmId::BINARY_SEARCH), probes);
  REQUIRE(staged.eliminated == std::vector<std::string>{"pred_h"});
  CHECK(staged.spec.find("pred_h")->stage == Stage::INPUT);
  // Retagged trajectories carry the chain as an input now.
  Trajectory t = restage_trajectory(staged, probes[0]);
  CHECK(t.inputs.count("pred_h") == 1);
  CHECK(t.hints.count("pred_h") == 0);
  CHECK(validate_trajectory(staged.spec, t).ok());
}

TEST_CASE("bfs has no static hints") {
  SamplerConfig cfg;
  cfg.algorithm = AlgorithmId::BFS;
  cfg.p_set = {0.5};
  Rng rng(3);
  std::vector<Trajectory> probes;
  for (int i = 0; i < 20; ++i) probes.push_back(sample_problem(cfg, rng));
  StagedProblem staged = static_hint_to_input(problem_spec(AlgorithmId::BFS), probes);
  CHECK(staged.eliminated.empty());
}

TEST_CASE("hint constant in one trace but varying in another is not restaged") {
  // Two hand-built traces for the sorting spec: pred_h constant in the first,
  // varying at one step in the second.
  const ProblemSpec& spec = problem_spec(AlgorithmId::INSERTION_SORT);
  auto make = [&](bool vary) {
    std::map<std::string, Tensor> in;
    in.emplace("pos", node_scalar({0.1, 0.2}));
    in.emplace("key", vary ? node_scalar({0.9, 0.1}) : node_scalar({0.1, 0.9}));
    return run_algorithm(AlgorithmId::INSERTION_SORT, 2, in);
  };
  Trajectory constant = make(false);   // already sorted: pred_h never changes
  Trajectory varying = make(true);     // swap happens: pred_h changes
  StagedProblem staged = static_hint_to_input(spec, {constant, varying});
  CHECK(staged.eliminated.empty());
  // With only the constant probe the hint (vacuously) retags, and applying
  // the staging to the varying trace must fail.
  StagedProblem bad = static_hint_to_input(spec, {constant});
  REQUIRE(bad.eliminated == std::vector<std::string>{"pred_h"});
  CHECK_THROWS_AS(restage_trajectory(bad, varying), NarError);
}

TEST_CASE("the paper's static-hint set within the in-scope algorithms") {
  // Exactly these five of the eleven in-scope algorithms carry a fixed
  // node-order pointer hint.
  const std::vector<AlgorithmId> expect_static = {
      AlgorithmId::BINARY_SEARCH, AlgorithmId::MINIMUM, AlgorithmId::ACTIVITY_SELECTOR,
      AlgorithmId::LCS_LENGTH, AlgorithmId::NAIVE_STRING_MATCHER};
  for (AlgorithmId id : all_algorithms()) {
    SamplerConfig cfg;
    cfg.algorithm = id;
    Rng rng(mix_seed(0xC0FFEE, to_string(id)));
    std::vector<Trajectory> probes;
    for (int i = 0; i < 10; ++i) probes.push_back(sample_problem(cfg, rng));
    StagedProblem staged = static_hint_to_input(problem_spec(id), probes);
    const bool expect =
        std::find(expect_static.begin(), expect_static.end(), id) != expect_static.end();
    INFO(to_string(id));
    CHECK(staged.eliminated.size() == (expect ? 1u : 0u));
  }
}

TEST_CASE("evaluation taint guard blocks hint reads beyond the initial step") {
  Trajectory traj = bfs_example();
  traj.lock_hints_beyond_initial();
  CHECK_NOTHROW(traj.hint_slice("reach_h", 0));
  CHECK_THROWS_AS(traj.hint_slice("reach_h", 1), NarError);
  CHECK_THROWS_AS(traj.hint("reach_h"), NarError);
  traj.unlock_hints();
  CHECK_NOTHROW(traj.hint_slice("reach_h", 1));
}
