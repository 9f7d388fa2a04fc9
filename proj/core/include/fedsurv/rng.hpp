#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fedsurv {

/// Deterministic random stream. Streams are derived from a master seed
/// plus a purpose label and indices, so parallel schedules and call
/// order elsewhere cannot change the draws of any one stream.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  /// Counter-based split: hash (master, purpose, indices) into a fresh
  /// stream. Identical arguments always yield identical streams.
  static Rng derive(uint64_t master, std::string_view purpose,
                    std::initializer_list<uint64_t> indices = {});

  /// The mixed seed behind derive(), for components that take a seed.
  static uint64_t derive_seed(uint64_t master, std::string_view purpose,
                              std::initializer_list<uint64_t> indices = {});

  uint64_t next_u64() { return gen_(); }
  double uniform();                               // [0, 1)
  double normal(double mean = 0.0, double sd = 1.0);
  double exponential(double rate);
  double weibull(double shape, double scale);
  bool bernoulli(double prob);
  int uniform_int(int n);                         // [0, n)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(uniform_int(i + 1))]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace fedsurv
