#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace qmimo {

using cplx = std::complex<double>;

constexpr double kPi = 3.141592653589793238462643383279502884;

// splitmix64; used to derive independent RNG substreams from (seed, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based substream: trials seeded from (seed, index, purpose) are
// order-independent.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index,
                                 std::uint64_t purpose = 0) {
  std::uint64_t s = splitmix64(seed ^ splitmix64(index ^ splitmix64(purpose)));
  return std::mt19937_64(s);
}

inline cplx randn_c(std::mt19937_64& rng) {
  // CN(0,1): independent N(0,1/2) per real dimension.
  std::normal_distribution<double> nd(0.0, 0.7071067811865476);
  double re = nd(rng);
  double im = nd(rng);
  return {re, im};
}

}  // namespace qmimo
