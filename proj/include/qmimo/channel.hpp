#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "qmimo/ofdm.hpp"
#include "qmimo/quant.hpp"

namespace qmimo {

struct SystemConfig {
  int users = 8;
  int antennas = 64;
  int subcarriers = 128;
  int taps = 4;        // L
  int cp_support = 16; // P
  int qbits = 4;       // per real dimension; 0 = infinite precision
  double es = 1.0;
  double n0 = 0.1;
  int data_symbols = 6;  // D
  std::uint64_t seed = 0;

  int t_total() const { return users + data_symbols; }
};

void validate(const SystemConfig& cfg);

// Time-domain taps (zero beyond L) and the matching frequency response.
struct ChannelRealization {
  MatSeq taps;  // W matrices, B x U
  MatSeq freq;  // W matrices, B x U
};

// Per-antenna label matrices for a received frame (time domain, W x T).
struct LabelFrame {
  Eigen::MatrixXi re;
  Eigen::MatrixXi im;
};

struct RxFrame {
  std::vector<LabelFrame> labels;            // size B; empty if infinite precision
  std::vector<Eigen::MatrixXcd> unquantized; // size B when stored, else empty
  QuantizerSpec spec;
  int t_total = 0;

  bool has_unquantized() const { return !unquantized.empty(); }
};

ChannelRealization draw_channel(const SystemConfig& cfg, std::mt19937_64& rng);

// Forward simulation: per-tone mixing Z_w = H_w S_w, reorientation, inverse
// DFT per antenna and OFDM symbol, CN(0, N0) noise, entry-wise quantization.
// `frames` must be in per-frequency orientation with U x T slices.
RxFrame transmit(const FrameCube& frames, const ChannelRealization& channel,
                 const SystemConfig& cfg, const QuantizerSpec& spec,
                 std::mt19937_64& rng, bool store_unquantized = false);

// N0 = U Es L / (W 10^{snr/10}); receive SNR is defined against the mean
// per-antenna per-sample signal power of unit-variance taps.
double snr_to_n0(const SystemConfig& cfg, double snr_db);

}  // namespace qmimo
