#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qmimo/constellation.hpp"
#include "qmimo/ofdm.hpp"

namespace qmimo {

// Constraint-length-7 (133,171) convolutional code punctured to rate 5/6,
// zero-terminated with 6 tail bits.
struct CodeConfig {
  int constraint_length = 7;
  std::array<unsigned, 2> generators = {0133, 0171};  // octal
  // Puncturing period of 5 info bits: kept outputs per step for (A, B).
  std::array<std::array<int, 5>, 2> puncture = {{{1, 0, 1, 0, 1},
                                                 {1, 1, 0, 1, 0}}};
  int tail_bits = 6;
};

// Per-user packet geometry for D data OFDM symbols.
struct PacketPlan {
  int info_bits = 0;   // K
  int coded_bits = 0;  // N_c = |data tones| * bits/symbol * D
  static PacketPlan make(const TonePlan& plan, int bits_per_symbol, int d);
};

// Terminated and punctured encoding of exactly plan.info_bits bits; output
// has plan.coded_bits entries (zero-padded when the puncturing period does
// not divide the terminated length).
std::vector<std::uint8_t> encode(std::span<const std::uint8_t> bits,
                                 const CodeConfig& code,
                                 const PacketPlan& plan);

std::vector<int> random_permutation(int n, std::mt19937_64& rng);

template <typename T>
std::vector<T> interleave(std::span<const T> v, std::span<const int> perm) {
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[perm[i]] = v[i];
  return out;
}

template <typename T>
std::vector<T> deinterleave(std::span<const T> v, std::span<const int> perm) {
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[perm[i]];
  return out;
}

// Gray mapping of a bit stream (length divisible by bits/symbol).
std::vector<cplx> map_bits(std::span<const std::uint8_t> bits,
                           const Constellation& c);

// Max-log soft-input Viterbi over the terminated trellis.  Takes the
// plan.coded_bits LLRs (positive = bit 1); punctured positions are restored
// as erasures internally.  Returns plan.info_bits decoded bits.
std::vector<std::uint8_t> viterbi_soft(std::span<const double> llrs,
                                       const CodeConfig& code,
                                       const PacketPlan& plan);

}  // namespace qmimo
