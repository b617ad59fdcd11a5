#include "nar/container.hpp"

#include <fstream>
#include <sstream>

namespace nar {

namespace {
constexpr char kMagic[8] = {'N', 'A', 'R', 'T', 'R', 'A', 'J', '1'};

void put_shape(std::string& out, const Shape& s) {
  put_u64(out, static_cast<uint64_t>(s.size()));
  for (int d : s) put_u64(out, static_cast<uint64_t>(d));
}

Shape get_shape(ByteReader& r) {
  const uint64_t rank = r.get_u64();
  check(rank <= 8, "implausible array rank in container");
  Shape s(rank);
  for (uint64_t i = 0; i < rank; ++i) s[i] = static_cast<int>(r.get_u64());
  return s;
}

void put_array(std::string& out, const Tensor& t) {
  put_shape(out, t.shape());
  for (int64_t i = 0; i < t.numel(); ++i) put_f64(out, t[i]);
}

Tensor get_array(ByteReader& r) {
  Tensor t(get_shape(r));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = r.get_f64();
  return t;
}

}  // namespace

std::string spec_to_text(const ProblemSpec& spec) {
  std::ostringstream os;
  os << "algorithm " << spec.algorithm_id << "\n";
  os << "family " << to_string(spec.family) << "\n";
  for (const auto& f : spec.features) {
    os << "feature " << f.name << " " << to_string(f.stage) << " " << to_string(f.location)
       << " " << to_string(f.type);
    if (f.type == FType::CATEGORICAL) os << " " << f.num_categories;
    os << "\n";
  }
  return os.str();
}

ProblemSpec spec_from_text(const std::string& text) {
  ProblemSpec spec;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "algorithm") {
      ls >> spec.algorithm_id;
    } else if (kind == "family") {
      std::string fam;
      ls >> fam;
      spec.family = family_from_string(fam);
    } else if (kind == "feature") {
      FeatureSpec f;
      std::string stage, loc, type;
      ls >> f.name >> stage >> loc >> type;
      check(!ls.fail(), "malformed feature line: " + line);
      f.stage = stage_from_string(stage);
      f.location = location_from_string(loc);
      f.type = ftype_from_string(type);
      if (f.type == FType::CATEGORICAL) {
        ls >> f.num_categories;
        check(!ls.fail(), "categorical feature missing num_categories: " + line);
      }
      spec.features.push_back(std::move(f));
    } else {
      fail("unknown spec line: " + line);
    }
  }
  spec.validate();
  return spec;
}

std::string encode_trajectories(const ProblemSpec& spec, const std::vector<Trajectory>& trajs) {
  std::string out;
  out.append(kMagic, 8);
  const std::string spec_text = spec_to_text(spec);
  put_u64(out, spec_text.size());
  out.append(spec_text);
  put_u64(out, trajs.size());
  for (const Trajectory& traj : trajs) {
    put_u64(out, static_cast<uint64_t>(traj.n));
    put_u64(out, static_cast<uint64_t>(traj.num_steps));
    // Arrays follow spec order; the stage decides which pool they live in.
    for (const auto& f : spec.features) {
      switch (f.stage) {
        case Stage::INPUT: put_array(out, traj.input(f.name)); break;
        case Stage::HINT: put_array(out, traj.hint(f.name)); break;
        case Stage::OUTPUT: put_array(out, traj.output(f.name)); break;
      }
    }
  }
  return out;
}

TrajectoryFile decode_trajectories(const std::string& bytes) {
  check(bytes.size() >= 8 && bytes.compare(0, 8, kMagic, 8) == 0, "not a trajectory container");
  ByteReader r(bytes.data() + 8, bytes.size() - 8);
  TrajectoryFile file;
  const uint64_t spec_len = r.get_u64();
  file.spec = spec_from_text(r.get_bytes(spec_len));
  const uint64_t count = r.get_u64();
  for (uint64_t i = 0; i < count; ++i) {
    Trajectory traj;
    traj.n = static_cast<int>(r.get_u64());
    traj.num_steps = static_cast<int>(r.get_u64());
    for (const auto& f : file.spec.features) {
      Tensor arr = get_array(r);
      switch (f.stage) {
        case Stage::INPUT: traj.inputs.emplace(f.name, std::move(arr)); break;
        case Stage::HINT: traj.hints.emplace(f.name, std::move(arr)); break;
        case Stage::OUTPUT: traj.outputs.emplace(f.name, std::move(arr)); break;
      }
    }
    ValidationReport rep = validate_trajectory(file.spec, traj);
    check(rep.ok(), "container trajectory " + std::to_string(i) +
                        " violates its spec:\n" + rep.to_string());
    file.trajectories.push_back(std::move(traj));
  }
  check(r.at_end(), "trailing bytes after last trajectory");
  return file;
}

void save_trajectories(const ProblemSpec& spec, const std::vector<Trajectory>& trajs,
                       const std::string& path) {
  const std::string bytes = encode_trajectories(spec, trajs);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  check(f.good(), "cannot open container for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  check(f.good(), "failed writing container: " + path);
}

TrajectoryFile load_trajectories(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "cannot open container: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_trajectories(bytes);
}

}  // namespace nar
