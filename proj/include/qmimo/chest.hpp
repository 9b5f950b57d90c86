#pragma once

#include "qmimo/channel.hpp"
#include "qmimo/fbs.hpp"

namespace qmimo {

enum class ReceiverKind { Exact, Mismatch1, Mismatch2, Unquantized };

const char* receiver_name(ReceiverKind kind);
ReceiverKind receiver_from_name(const std::string& name);

// Per-tone U x U training matrices with T_w T_w^H = (U Es) I; guard tones
// hold zero matrices.
struct PilotBook {
  std::vector<Eigen::MatrixXcd> tones;  // size W
  double es = 1.0;
  bool hadamard = true;  // false: seeded random unitary fallback
};

// Scaled Hadamard with independent random row/column sign flips per tone;
// falls back to a seeded random unitary when U is not a power of two.  With
// qpsk_rotate the flips are drawn from {+-1, +-i}.
PilotBook gen_pilots(int users, const TonePlan& plan, double es,
                     std::mt19937_64& rng, bool qpsk_rotate = false);

struct ChestConfig {
  ReceiverKind kind = ReceiverKind::Exact;
  int support = 16;             // P
  double prior_variance = 0.0;  // C0 Gaussian ridge; 0 = disabled
  double tol = 1e-6;
  int max_iter = 500;
};

struct ChestResult {
  MatSeq h_freq;  // W matrices, B x U
  int iterations = 0;
  bool converged = false;
};

// Channel estimation from the U-symbol training block.  `rx` must hold
// exactly the training symbols.  Kinds: Exact solves the joint quantized MAP
// problem, Mismatch1 the same geometry with the per-label Gaussian model,
// Mismatch2 runs B*U independent per-link least-squares problems on
// frequency-domain centroid observations, Unquantized uses the Gaussian
// likelihood of the pre-quantizer samples.
ChestResult estimate(const RxFrame& rx, const PilotBook& pilots,
                     const SystemConfig& cfg, const ChestConfig& chest,
                     const TonePlan& plan);

double chest_mse(const MatSeq& estimate, const MatSeq& truth);

}  // namespace qmimo
