#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace vlqa {

// mt19937_64 bits with hand-rolled transforms: the standard distributions are
// implementation-defined, which would break byte-reproducible corpora across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double Uniform();                      // [0, 1)
  double Uniform(double lo, double hi);  // [lo, hi)
  double Normal();                       // N(0, 1), Box-Muller
  std::size_t Index(std::size_t n);      // [0, n)
  bool Bernoulli(double p) { return Uniform() < p; }

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[Index(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives independent stream seeds (shards, epochs) from a base seed.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream);

}  // namespace vlqa
