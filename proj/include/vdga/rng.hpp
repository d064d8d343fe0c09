#pragma once

#include <cstdint>
#include <random>

namespace vdga {

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded generator with portable draws. std::mt19937_64's output sequence is
// fixed by the standard, but the std distributions are not, so the
// conversions to doubles and bounded integers are done here.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent child stream; deterministic in (seed, stream).
  static Rng stream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix_seed(seed ^ mix_seed(stream + 0x51ed270b27aa5c4dULL)));
  }

  std::uint64_t next() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // (0, 1)
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n); n must be > 0.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

private:
  std::mt19937_64 engine_;
};

}  // namespace vdga
