#include "qmimo/phycode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qmimo {

namespace {

int parity(unsigned x) { return __builtin_popcount(x) & 1; }

}  // namespace

PacketPlan PacketPlan::make(const TonePlan& plan, int bits_per_symbol, int d) {
  PacketPlan p;
  p.coded_bits = static_cast<int>(plan.data.size()) * bits_per_symbol * d;
  p.info_bits = (p.coded_bits * 5) / 6 - 6;
  if (p.info_bits < 1)
    throw std::invalid_argument("PacketPlan: frame too small for the code");
  return p;
}

std::vector<std::uint8_t> encode(std::span<const std::uint8_t> bits,
                                 const CodeConfig& code,
                                 const PacketPlan& plan) {
  if (static_cast<int>(bits.size()) != plan.info_bits)
    throw std::invalid_argument("encode: length mismatch");
  const int n = plan.info_bits + code.tail_bits;
  const unsigned mask = (1u << code.constraint_length) - 1;

  std::vector<std::uint8_t> out;
  out.reserve(plan.coded_bits);
  unsigned reg = 0;
  for (int i = 0; i < n; ++i) {
    unsigned in = (i < plan.info_bits) ? bits[i] : 0u;
    reg = ((reg << 1) | in) & mask;
    int phase = i % 5;
    if (code.puncture[0][phase]) out.push_back(parity(reg & code.generators[0]));
    if (code.puncture[1][phase]) out.push_back(parity(reg & code.generators[1]));
  }
  if (static_cast<int>(out.size()) > plan.coded_bits)
    throw std::logic_error("encode: punctured stream exceeds frame");
  out.resize(plan.coded_bits, 0);  // filler bits when the period is partial
  return out;
}

std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> d(0, i);
    std::swap(perm[i], perm[d(rng)]);
  }
  return perm;
}

std::vector<cplx> map_bits(std::span<const std::uint8_t> bits,
                           const Constellation& c) {
  const int m = c.bits_per_symbol;
  if (bits.size() % m != 0)
    throw std::invalid_argument("map_bits: length not a multiple of bits/symbol");
  std::vector<cplx> out;
  out.reserve(bits.size() / m);
  for (std::size_t i = 0; i < bits.size(); i += m) {
    unsigned label = 0;
    for (int b = 0; b < m; ++b) label = (label << 1) | bits[i + b];
    out.push_back(c.points[c.index_of_label(label)]);
  }
  return out;
}

std::vector<std::uint8_t> viterbi_soft(std::span<const double> llrs,
                                       const CodeConfig& code,
                                       const PacketPlan& plan) {
  if (static_cast<int>(llrs.size()) != plan.coded_bits)
    throw std::invalid_argument("viterbi_soft: length mismatch");
  const int n = plan.info_bits + code.tail_bits;
  const int n_states = 1 << (code.constraint_length - 1);
  const unsigned mask = (1u << code.constraint_length) - 1;

  // Restore erasures at punctured positions.
  std::vector<std::array<double, 2>> step_llr(n, {0.0, 0.0});
  std::size_t pos = 0;
  for (int i = 0; i < n; ++i) {
    int phase = i % 5;
    for (int j = 0; j < 2; ++j)
      if (code.puncture[j][phase])
        step_llr[i][j] = (pos < llrs.size()) ? llrs[pos++] : 0.0;
  }

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> metric(n_states, kNegInf), next(n_states, kNegInf);
  metric[0] = 0.0;
  std::vector<std::uint8_t> back(static_cast<std::size_t>(n) * n_states);

  for (int i = 0; i < n; ++i) {
    std::fill(next.begin(), next.end(), kNegInf);
    const int max_in = (i < plan.info_bits) ? 1 : 0;  // tail forces zeros
    for (int s = 0; s < n_states; ++s) {
      if (metric[s] == kNegInf) continue;
      for (int in = 0; in <= max_in; ++in) {
        unsigned reg = ((static_cast<unsigned>(s) << 1) | in) & mask;
        int ns = static_cast<int>(reg) & (n_states - 1);
        double m = metric[s];
        // Correlation metric: +L/2 for an emitted 1, -L/2 for a 0.
        int c0 = parity(reg & code.generators[0]);
        int c1 = parity(reg & code.generators[1]);
        m += 0.5 * step_llr[i][0] * (2 * c0 - 1);
        m += 0.5 * step_llr[i][1] * (2 * c1 - 1);
        if (m > next[ns]) {
          next[ns] = m;
          // The transition drops the predecessor's oldest bit; keep it for
          // traceback (prev = (ns >> 1) | (dropped << (K-2))).
          back[static_cast<std::size_t>(i) * n_states + ns] =
              static_cast<std::uint8_t>((s >> (code.constraint_length - 2)) & 1);
        }
      }
    }
    std::swap(metric, next);
  }

  // Traceback from the zero state.
  std::vector<std::uint8_t> decoded(plan.info_bits);
  int state = 0;
  for (int i = n - 1; i >= 0; --i) {
    int dropped = back[static_cast<std::size_t>(i) * n_states + state];
    int in = state & 1;  // newest input sits in the state's low bit
    if (i < plan.info_bits) decoded[i] = static_cast<std::uint8_t>(in);
    state = (state >> 1) | (dropped << (code.constraint_length - 2));
  }
  return decoded;
}

}  // namespace qmimo
