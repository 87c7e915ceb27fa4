#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace slidepp {

std::uint64_t splitmix64(std::uint64_t x);
// FNV-1a, for keying streams by name.
std::uint64_t hash_name(std::string_view s);

// mt19937_64 with stream derivation. All variates are produced by code in this
// library (not <random> distributions), so a seed gives the same numbers with
// every standard library.
class SeededRng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+splitmix64";

  explicit SeededRng(std::uint64_t seed = 1, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Independent child stream for work item `index`.
  SeededRng derive(std::uint64_t index) const;

  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);  // uniform on [0, n)
  double normal();
  std::uint64_t poisson(double mean);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace slidepp
