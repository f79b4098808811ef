#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace stylo {

// Counter-based splitmix64 stream. State is (seed, stream, counter), so a
// generator can be serialized into checkpoint headers and replayed exactly,
// and independent child streams can be split off per worker.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))), counter_(0) {}

  static const char* algorithm() { return "splitmix64"; }

  std::uint64_t next_u64() { return mix(seed_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // Box-Muller, no caching so the stream position stays predictable.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  Rng split(std::uint64_t stream) const { return Rng(seed_, mix(stream + 0x632be59bd9b4e019ULL)); }

  template <class V>
  void shuffle(V& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t state_seed() const { return seed_; }
  std::uint64_t state_counter() const { return counter_; }
  void restore(std::uint64_t seed, std::uint64_t counter) {
    seed_ = seed;
    counter_ = counter;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace stylo
