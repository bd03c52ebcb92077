#pragma once

// Project-wide random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; every distribution on top of it is
// implemented here because the std:: distributions are not portable across
// standard libraries.

#include <cstdint>
#include <random>
#include <vector>

namespace eraloc {

std::uint64_t splitmix64(std::uint64_t x);

// Independent stream seed for (seed, stream) pairs.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); unbiased by rejection.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via the polar method.
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);
  // k distinct indices from [0, n), returned in ascending order.
  std::vector<std::size_t> sample(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace eraloc
