#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace braids {

// Seeds for independent substreams. A component derives its own stream from
// the root seed and a name (or a replication index), so results do not
// depend on the order in which components or threads consume randomness.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double uniform();  // [0, 1)
  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  double exponential(double scale);
  double gamma(double shape, double scale);
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index(std::size_t n);  // uniform on {0, ..., n-1}

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace braids
