#include "doctest.h"
#include "nar/container.hpp"
#include "nar/sampler.hpp"

using namespace nar;

TEST_CASE("spec text round trip") {
  const ProblemSpec& spec = problem_spec(AlgorithmId::LCS_LENGTH);
  ProblemSpec back = spec_from_text(spec_to_text(spec));
  CHECK(back.algorithm_id == spec.algorithm_id);
  CHECK(back.family == spec.family);
  REQUIRE(back.features.size() == spec.features.size());
  for (size_t i = 0; i < spec.features.size(); ++i) {
    CHECK(back.features[i].name == spec.features[i].name);
    CHECK(back.features[i].stage == spec.features[i].stage);
    CHECK(back.features[i].location == spec.features[i].location);
    CHECK(back.features[i].type == spec.features[i].type);
    CHECK(back.features[i].num_categories == spec.features[i].num_categories);
  }
}

TEST_CASE("trajectory container round trip is bit exact") {
  SamplerConfig cfg;
  cfg.algorithm = AlgorithmId::BELLMAN_FORD;
  Rng rng(11);
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 5; ++i) trajs.push_back(sample_problem(cfg, rng));

  const ProblemSpec& spec = problem_spec(cfg.algorithm);
  const std::string bytes = encode_trajectories(spec, trajs);
  TrajectoryFile file = decode_trajectories(bytes);
  REQUIRE(file.trajectories.size() == trajs.size());
  for (size_t i = 0; i < trajs.size(); ++i) {
    const Trajectory& a = trajs[i];
    const Trajectory& b = file.trajectories[i];
    CHECK(a.n == b.n);
    CHECK(a.num_steps == b.num_steps);
    for (const auto& [name, arr] : a.inputs) CHECK(b.input(name).vec() == arr.vec());
    for (const auto& [name, arr] : a.hints) CHECK(b.hint(name).vec() == arr.vec());
    for (const auto& [name, arr] : a.outputs) CHECK(b.output(name).vec() == arr.vec());
  }
  // Re-encoding reproduces the same bytes.
  CHECK(encode_trajectories(file.spec, file.trajectories) == bytes);
}

TEST_CASE("container rejects corrupted payloads") {
  SamplerConfig cfg;
  cfg.algorithm = AlgorithmId::MINIMUM;
  Rng rng(2);
  std::vector<Trajectory> trajs = {sample_problem(cfg, rng)};
  std::string bytes = encode_trajectories(problem_spec(cfg.algorithm), trajs);
  bytes.resize(bytes.size() - 9);
  CHECK_THROWS_AS(decode_trajectories(bytes), NarError);
}
