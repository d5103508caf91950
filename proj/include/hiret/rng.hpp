#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace hiret {

// Seeded generator with portable transforms. The std distributions are
// implementation-defined, so uniform/normal/shuffle are computed here from the
// raw 64-bit engine output to keep corpora and initializations identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; the second variate is discarded so each call consumes exactly
  // two engine outputs.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

  // Stage-local seed derived from the global seed and a label, so that every
  // stage is reproducible on its own.
  static std::uint64_t derive(std::uint64_t seed, std::string_view label);

 private:
  std::mt19937_64 engine_;
};

}  // namespace hiret
