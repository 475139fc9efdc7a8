#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace pfkd {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Deterministic named RNG stream. Every source of randomness in a run is a
// stream keyed by (run_seed, name), so independent components can draw
// without coordinating and any one of them can be replayed in isolation.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name)
      : seed_(seed), name_(name), eng_(detail::splitmix64(seed ^ detail::fnv1a64(name))) {}

  // Child stream keyed by "<name>/<suffix>".
  RngStream derive(std::string_view suffix) const {
    std::string child = name_;
    child += '/';
    child += suffix;
    return RngStream(seed_, child);
  }

  std::uint64_t seed() const { return seed_; }
  const std::string& name() const { return name_; }

  std::uint64_t u64() { return eng_(); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }

  // Inclusive bounds.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
  }

  double normal() { return norm_(eng_); }

  // Standard truncated normal: resample draws with |z| > cut sigmas.
  double truncated_normal(double stddev, double cut = 2.0) {
    double z = norm_(eng_);
    while (z < -cut || z > cut) z = norm_(eng_);
    return z * stddev;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates, fully specified by uniform_int so the permutation depends
  // only on this stream's state.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::string name_;
  std::mt19937_64 eng_;
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace pfkd
