#include "nar/checkpoint.hpp"

#include <fstream>

namespace nar {

namespace {
constexpr char kMagic[8] = {'N', 'A', 'R', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const ParamStore& params, const std::string& path) {
  std::string buf;
  buf.append(kMagic, 8);
  put_u64(buf, params.all().size());
  for (const auto& [name, p] : params.all()) {
    put_u64(buf, name.size());
    buf.append(name);
    put_u64(buf, static_cast<uint64_t>(p.value.rank()));
    for (int d : p.value.shape()) put_u64(buf, static_cast<uint64_t>(d));
    for (int64_t i = 0; i < p.value.numel(); ++i) put_f64(buf, p.value[i]);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  check(f.good(), "cannot open checkpoint for writing: " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check(f.good(), "failed writing checkpoint: " + path);
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  check(buf.size() >= 16 && buf.compare(0, 8, kMagic, 8) == 0,
        "not a checkpoint file: " + path);
  ByteReader r(buf.data() + 8, buf.size() - 8);
  const uint64_t count = r.get_u64();
  ParamStore store;
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = "<header>";
    try {
      const uint64_t name_len = r.get_u64();
      name = r.get_bytes(name_len);
      const uint64_t rank = r.get_u64();
      check(rank <= 8, "implausible tensor rank");
      Shape shape(rank);
      for (uint64_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(r.get_u64());
      Tensor t(shape);
      for (int64_t e = 0; e < t.numel(); ++e) t[e] = r.get_f64();
      store.create(name, std::move(t));
    } catch (const NarError& e) {
      fail("corrupted checkpoint at tensor '" + name + "': " + e.what());
    }
  }
  return store;
}

}  // namespace nar
