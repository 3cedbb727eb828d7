#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace immf {

std::uint64_t splitmix64(std::uint64_t x);

/// Mixes a base seed with stream identifiers into an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Deterministic random source. The conversions to real and normal variates
/// are written out here instead of using <random> distributions so that the
/// whole state lives in the engine and can be saved and restored exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();   // Box-Muller, one pair consumed per call
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace immf
