#pragma once

#include <cstdint>
#include <limits>

namespace mnsid {

enum class StreamRole : std::uint64_t {
  InitialState = 1,
  Input = 2,
  NoiseA = 3,
  NoiseB = 4,
  Design = 5,
  Experiment = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ splitmix64(v + 0x632be59bd9b4e019ULL));
}

// Counter-based generator: output i of a stream is splitmix64(key + i * golden).
// Every (seed, rollout, time, role) tuple gets its own key, so draws never depend
// on evaluation order.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t k, std::uint64_t t, StreamRole role)
      : key_(hash_combine(hash_combine(hash_combine(splitmix64(seed), k), t),
                          static_cast<std::uint64_t>(role))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return splitmix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

  std::uint64_t draws() const { return counter_; }
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mnsid
