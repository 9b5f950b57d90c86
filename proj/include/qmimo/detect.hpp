#pragma once

#include "qmimo/channel.hpp"
#include "qmimo/chest.hpp"
#include "qmimo/constellation.hpp"
#include "qmimo/fbs.hpp"

namespace qmimo {

struct DetectOptions {
  ReceiverKind kind = ReceiverKind::Exact;
  double tol = 1e-6;
  int max_iter = 500;
};

struct DetectionResult {
  Eigen::MatrixXcd s_hat;  // U x W soft symbol estimates
  Eigen::MatrixXd rho;     // U x W post-equalization SINR; 1 where not filled
  int iterations = 0;
  bool converged = true;
  bool regularized = false;  // per-tone system needed a regularization floor
};

// One-OFDM-symbol data detection.  Exact solves (Q-DET) jointly over all
// tones with the quantized likelihood; Mismatch1 substitutes the per-label
// Gaussian likelihood; Mismatch2 runs per-tone linear MMSE on centroid
// observations with total noise N0 + mean quantization variance and fills
// per-stream unbiased SINR; Unquantized is the Mismatch2 path with zero
// quantization variance on the stored pre-quantizer samples.  `pilots` is the
// known U x W frequency-domain transmit matrix for this symbol (read on pilot
// tones only).
DetectionResult detect(const RxFrame& rx, int symbol, const MatSeq& h_freq,
                       const SystemConfig& cfg, const TonePlan& plan,
                       const Eigen::MatrixXcd& pilots,
                       const DetectOptions& opt);

// Max-log LLRs L_{u,w,b} = rho_{u,w} (min_{O_b^0} - min_{O_b^1}) |s - a|^2;
// positive means bit 1 is more likely.  One U x W matrix per bit position.
std::vector<Eigen::MatrixXd> llr_maxlog(const Eigen::MatrixXcd& s_hat,
                                        const Eigen::MatrixXd& rho,
                                        const Constellation& c);

// Exhaustive quantized-MAP oracle over the finite alphabet; tiny instances
// only (|O|^(U |data|) <= 1e6).  Returns point indices on data tones, -1
// elsewhere.
Eigen::MatrixXi brute_force_map(const RxFrame& rx, int symbol,
                                const MatSeq& h_freq, const SystemConfig& cfg,
                                const TonePlan& plan,
                                const Eigen::MatrixXcd& pilots,
                                const Constellation& c);

}  // namespace qmimo
