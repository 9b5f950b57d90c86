#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qmimo/common.hpp"

namespace qmimo {

// Partition of the W subcarriers into data, pilot, and guard sets.
// Indices are 0-based array positions; position j carries frequency offset
// j - W/2, so DC sits at j = W/2.
struct TonePlan {
  int w = 0;
  std::vector<int> data;
  std::vector<int> pilot;
  std::vector<int> guard;
};

// W = 128 reproduces the 802.11n 40 MHz layout (108 data / 6 pilot / 14
// guard); other sizes use a proportionally scaled layout.  W < 8 throws.
TonePlan build_tone_plan(int w);

// Unitary DFT (1/sqrt(n) both ways).  Radix-2 for powers of two, naive
// summation otherwise.
Eigen::VectorXcd dft(const Eigen::VectorXcd& x);
Eigen::VectorXcd idft(const Eigen::VectorXcd& x);
void dft_cols_inplace(Eigen::MatrixXcd& m);
void idft_cols_inplace(Eigen::MatrixXcd& m);

enum class Orientation { PerFrequency, PerAntenna };

// Data cube (frequency x antenna-or-user x OFDM symbol) stored as one matrix
// per leading index: per-frequency keeps W matrices of rows x T, per-antenna
// keeps `rows` matrices of W x T.
struct FrameCube {
  std::vector<Eigen::MatrixXcd> slices;
  Orientation orient = Orientation::PerFrequency;
  int t_total = 0;
};

// Index identity [X_w]_{b,l} = [X'_b]_{w,l}; an involution.
FrameCube reorient(const FrameCube& cube);

// W matrices of identical shape, indexed by tap (time) or tone (frequency).
using MatSeq = std::vector<Eigen::MatrixXcd>;

// H_w = W^{-1/2} sum_t H_t exp(-i 2 pi (t-1)(w-1-W/2)/W) and its inverse;
// the -W/2 offset appears as a (-1)^{t-1} modulation of the taps.
MatSeq taps_to_freq(const MatSeq& taps);
MatSeq freq_to_taps(const MatSeq& freq);
Eigen::VectorXcd taps_to_freq_vec(const Eigen::VectorXcd& taps);
Eigen::VectorXcd freq_to_taps_vec(const Eigen::VectorXcd& freq);

}  // namespace qmimo
