#pragma once

// Shared primitives: error type, deterministic RNG, seed mixing, and
// little-endian byte IO used by the on-disk formats.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace nar {

class NarError : public std::runtime_error {
 public:
  explicit NarError(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw NarError(msg); }

inline void check(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

// ---------------------------------------------------------------------------
// RNG. A thin wrapper over splitmix64/xoshiro256** with hand-rolled
// conversions so that streams are reproducible independent of the standard
// library implementation.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a child seed from a parent seed and a stream label.
inline uint64_t mix_seed(uint64_t seed, const std::string& label) {
  uint64_t h = seed ^ 0x51c7b1a2de934f1dULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  splitmix64(h);
  return splitmix64(h);
}

inline uint64_t mix_seed(uint64_t seed, const std::string& label, uint64_t index) {
  uint64_t h = mix_seed(seed, label) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return splitmix64(h);
}

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& s : s_) s = splitmix64(sm);
    gauss_cached_ = false;
  }

  uint64_t next_u64() {
    auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int64_t uniform_int(int64_t n) {
    // Rejection sampling to avoid modulo bias.
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<int64_t>(x % un);
  }

  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) { return lo + uniform_int(hi - lo + 1); }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (gauss_cached_) {
      gauss_cached_ = false;
      return gauss_spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 1e-300);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    gauss_spare_ = r * std::sin(theta);
    gauss_cached_ = true;
    return r * std::cos(theta);
  }

  // Normal truncated to [-bound, bound] standard deviations, by resampling.
  double truncated_normal(double bound = 2.0) {
    double z;
    do {
      z = normal();
    } while (z < -bound || z > bound);
    return z;
  }

  // Standard Gumbel(0, 1).
  double gumbel() {
    double u;
    do {
      u = uniform();
    } while (u <= 1e-300);
    return -std::log(-std::log(u));
  }

 private:
  uint64_t s_[4] = {};
  bool gauss_cached_ = false;
  double gauss_spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Little-endian byte IO for file formats.
// ---------------------------------------------------------------------------

inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

class ByteReader {
 public:
  ByteReader(const char* data, size_t size) : data_(data), size_(size) {}

  uint64_t get_u64() {
    check(pos_ + 8 <= size_, "byte stream truncated");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  double get_f64() {
    const uint64_t bits = get_u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string get_bytes(size_t count) {
    check(pos_ + count <= size_, "byte stream truncated");
    std::string s(data_ + pos_, count);
    pos_ += count;
    return s;
  }

  bool at_end() const { return pos_ == size_; }
  size_t remaining() const { return size_ - pos_; }

 private:
  const char* data_;
  size_t size_;
  size_t pos_ = 0;
};

}  // namespace nar
