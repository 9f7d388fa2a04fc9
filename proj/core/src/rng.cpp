#include "fedsurv/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsurv {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(uint64_t seed) : gen_(splitmix64(seed)) {}

Rng Rng::derive(uint64_t master, std::string_view purpose, std::initializer_list<uint64_t> indices) {
  return Rng(derive_seed(master, purpose, indices));
}

uint64_t Rng::derive_seed(uint64_t master, std::string_view purpose,
                          std::initializer_list<uint64_t> indices) {
  uint64_t s = splitmix64(master ^ fnv1a(purpose));
  for (uint64_t idx : indices) s = splitmix64(s ^ idx);
  return s;
}

double Rng::uniform() {
  // 53-bit mantissa in [0, 1).
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::normal(double mean, double sd) {
  // Box-Muller; the second variate is discarded so the stream position
  // is a fixed function of the call count.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be > 0");
  return -std::log(1.0 - uniform()) / rate;
}

double Rng::weibull(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw std::invalid_argument("weibull: shape and scale must be > 0");
  return scale * std::pow(-std::log(1.0 - uniform()), 1.0 / shape);
}

bool Rng::bernoulli(double prob) { return uniform() < prob; }

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be > 0");
  return static_cast<int>(gen_() % static_cast<uint64_t>(n));
}

}  // namespace fedsurv
