#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace evobo {

// Stable 64-bit FNV-1a. std::hash is not stable across implementations.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named sub-stream seed: derive_seed(run_seed, "noise", round, ...).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view name) {
  return splitmix64(base ^ fnv1a64(name));
}

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view name,
                                    std::uint64_t first, Rest... rest) {
  std::uint64_t s = splitmix64(derive_seed(base, name) ^ splitmix64(first));
  ((s = splitmix64(s ^ splitmix64(static_cast<std::uint64_t>(rest)))), ...);
  return s;
}

using Engine = std::mt19937_64;

// Counter-based normal stream: the i-th draw depends only on (key, i).
// Portable across standard libraries, unlike std::normal_distribution.
class CounterNormal {
 public:
  explicit CounterNormal(std::uint64_t key) : key_(key) {}

  double uniform_open(std::uint64_t counter) const;
  double normal(std::uint64_t index) const;

 private:
  std::uint64_t key_;
};

}  // namespace evobo
