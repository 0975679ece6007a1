#include "tdr/random.hpp"

#include <cmath>
#include <limits>

#include "tdr/errors.hpp"

namespace tdr {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : engine_(mix64(seed)) {}

RandomStream::RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(seed);
  for (auto label : path) h = mix64(h ^ mix64(label + 0x632be59bd9b4e019ULL));
  engine_.seed(h);
}

std::uint64_t RandomStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw InvalidInput("uniform_index: empty range");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

int RandomStream::poisson(double rate) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw InvalidInput("poisson: rate must be finite and >= 0");
  const double u = uniform01();
  double pmf = std::exp(-rate);
  double cdf = pmf;
  int k = 0;
  while (u >= cdf) {
    ++k;
    pmf *= rate / k;
    if (pmf == 0.0) break;  // cdf saturated below u through rounding
    cdf += pmf;
  }
  return k;
}

}  // namespace tdr
