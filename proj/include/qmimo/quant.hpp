#pragma once

#include <span>
#include <vector>

#include "qmimo/common.hpp"

namespace qmimo {

struct NoiseModel {
  double n0;     // total complex noise variance
  double sigma;  // per-dimension standard deviation, sigma = sqrt(n0/2)
  explicit NoiseModel(double n0_in);
};

// One complex sample maps to a pair of per-dimension labels in {1..Q}.
struct QuantLabel {
  int re = 1;
  int im = 1;
};

// Scalar quantizer for one real dimension: Q = 2^bits bins with boundaries
// b_1 = -inf < b_2 < ... < b_Q < b_{Q+1} = +inf, per-bin centroids y_q and
// conditional variances gamma2_q.  bits == 0 encodes infinite precision.
struct QuantizerSpec {
  int bits = 0;
  std::vector<double> boundaries;  // Q+1 entries
  std::vector<double> centroids;   // Q entries
  std::vector<double> variances;   // Q entries, per real dimension

  int levels() const { return 1 << bits; }
  bool infinite() const { return bits == 0; }
  double lower(int q) const { return boundaries[q - 1]; }
  double upper(int q) const { return boundaries[q]; }
};

// Lloyd-Max design against an empirical sample set.  Fills centroids and
// variances with the conditional sample moments.  Throws on a degenerate
// (single-point) density.
QuantizerSpec design_lloyd_max(std::span<const double> samples, int bits);

// Replace centroids/variances with the exact conditional moments of a
// zero-mean Gaussian with the given per-dimension deviation.
void fill_moments_gaussian(QuantizerSpec& spec, double sigma);

// Uniform-density approximation: midpoint / width^2/12 on finite bins.
// Unbounded outer bins are left untouched.
void fill_moments_uniform(QuantizerSpec& spec);

// Lower-closed half-open bins: returns m with b_m <= v < b_{m+1}.
int quantize_real(double v, const QuantizerSpec& spec);
QuantLabel quantize(cplx sample, const QuantizerSpec& spec);

// Exact quantized-observation negative log-likelihood -log p(q | z) and its
// gradient (d/dRe + i d/dIm).  Evaluation is tail-stable: CDF differences are
// formed in the log domain; if the NLL still exceeds the cap, the value is
// clamped to 700 per real dimension, the gradient falls back to the asymptote
// (z - nearest boundary)/sigma^2, and *capped is set.
double nll_exact(QuantLabel q, cplx z, const NoiseModel& noise,
                 const QuantizerSpec& spec, bool* capped = nullptr);
cplx nll_gradient_exact(QuantLabel q, cplx z, const NoiseModel& noise,
                        const QuantizerSpec& spec);
// Fused value+gradient; this is the hot path of the exact receivers.
double nll_and_grad_exact(QuantLabel q, cplx z, const NoiseModel& noise,
                          const QuantizerSpec& spec, cplx& grad);

// Per-dimension building block (m is the label for one real dimension).
double real_nll(int m, double v, double sigma, const QuantizerSpec& spec,
                bool* capped = nullptr);
double real_nll_and_grad(int m, double v, double sigma,
                         const QuantizerSpec& spec, double& grad);

// Mismatch-1 reconstruction: complex centroid and complex variance
// gamma^2(q^R) + gamma^2(q^I) of a label.
struct Mismatch1Obs {
  cplx y;
  double gamma2;
};
Mismatch1Obs mismatch1_observe(QuantLabel q, const QuantizerSpec& spec);

// |z - y(q)|^2/(N0 + gamma^2(q)) + log(pi (N0 + gamma^2(q))) and its gradient
// 2 (z - y(q))/(N0 + gamma^2(q)).
double nll_mismatch1(QuantLabel q, cplx z, const NoiseModel& noise,
                     const QuantizerSpec& spec);
cplx nll_gradient_mismatch1(QuantLabel q, cplx z, const NoiseModel& noise,
                            const QuantizerSpec& spec);

// Mean complex quantization variance over a label multiset.
double average_quant_variance(std::span<const QuantLabel> labels,
                              const QuantizerSpec& spec);

// log Phi(x) for a standard normal, stable for large negative x.
double log_ndtr(double x);

}  // namespace qmimo
