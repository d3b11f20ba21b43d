#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgep {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// FNV-1a, used for stable content hashes and per-instance seed derivation.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic RNG with platform-independent sampling helpers.
// std::mt19937_64 output is fully specified by the standard; the std
// distributions are not, so bounded draws are done by rejection here.
class DetRng {
 public:
  explicit DetRng(uint64_t seed) : state_(splitmix64(seed ^ 0x6a09e667f3bcc908ULL)) {
    // splitmix-seeded xoshiro-style warmup keeps short seeds well mixed
    for (int i = 0; i < 4; ++i) next();
  }

  uint64_t next() {
    state_ = splitmix64(state_);
    return state_;
  }

  // uniform in [0, n)
  uint64_t bounded(uint64_t n) {
    if (n == 0) throw Error("DetRng::bounded: n must be positive");
    uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  double uniform01() {
    return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
  }

  // standard normal via Box-Muller (deterministic given the stream)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-12) u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // k distinct indices from [0, n), order = draw order
  std::vector<size_t> sample_indices(size_t n, size_t k) {
    if (k > n) throw Error("DetRng::sample_indices: k exceeds population");
    std::vector<size_t> pool(n);
    for (size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<size_t> out;
    out.reserve(k);
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + static_cast<size_t>(bounded(n - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Seed for one dataset instance, derived from the global seed and the
// instance id so builds are reproducible regardless of worker order.
inline uint64_t derive_seed(uint64_t global_seed, const std::string& key) {
  return splitmix64(fnv1a64(key) ^ splitmix64(global_seed));
}

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);
uint64_t hash_file(const std::filesystem::path& path);

// Stable hash of every regular file under dir (sorted by relative path).
uint64_t hash_tree(const std::filesystem::path& dir);

std::string hex64(uint64_t v);

}  // namespace cgep
