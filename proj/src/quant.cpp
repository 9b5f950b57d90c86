#include "qmimo/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qmimo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNllCap = 700.0;
constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kSqrt2Pi = 2.5066282746310002;

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

// Far-tail fallback once the NLL is capped: quadratic growth toward the
// nearest finite boundary keeps the descent direction.
double asymptotic_tail_grad(double alpha, double beta, double v, double sigma,
                            double lo, double hi) {
  double b_near;
  if (!std::isinf(lo) && alpha > 0.0)
    b_near = lo;  // sample far below the bin
  else if (!std::isinf(hi) && beta < 0.0)
    b_near = hi;  // sample far above the bin
  else
    b_near = std::isinf(lo) ? hi : lo;
  return (v - b_near) / (sigma * sigma);
}

}  // namespace

NoiseModel::NoiseModel(double n0_in) : n0(n0_in), sigma(std::sqrt(n0_in / 2.0)) {
  if (!(n0_in > 0.0)) throw std::invalid_argument("NoiseModel: n0 must be positive");
}

double log_ndtr(double x) {
  if (x > -8.0) {
    // erfc is well conditioned here and does not underflow.
    return std::log(0.5 * std::erfc(-x * kInvSqrt2));
  }
  // Asymptotic expansion of the lower tail.
  double x2 = x * x;
  double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x * kSqrt2Pi) + std::log(series);
}

int quantize_real(double v, const QuantizerSpec& spec) {
  // b_m <= v < b_{m+1}; upper_bound over the interior boundaries.
  const auto& b = spec.boundaries;
  auto it = std::upper_bound(b.begin() + 1, b.end() - 1, v);
  return static_cast<int>(it - b.begin());
}

QuantLabel quantize(cplx sample, const QuantizerSpec& spec) {
  return {quantize_real(sample.real(), spec), quantize_real(sample.imag(), spec)};
}

QuantizerSpec design_lloyd_max(std::span<const double> samples, int bits) {
  if (bits < 1 || bits > 12)
    throw std::invalid_argument("design_lloyd_max: bits must be in 1..12");
  const int q = 1 << bits;
  if (static_cast<int>(samples.size()) < 10 * q)
    throw std::invalid_argument("design_lloyd_max: need at least 10*2^bits samples");

  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  if (s.front() == s.back())
    throw std::invalid_argument("degenerate density");

  QuantizerSpec spec;
  spec.bits = bits;
  spec.boundaries.assign(q + 1, 0.0);
  spec.centroids.assign(q, 0.0);
  spec.variances.assign(q, 0.0);
  spec.boundaries.front() = -kInf;
  spec.boundaries.back() = kInf;

  // Equal-probability quantile initialization.
  const std::size_t n = s.size();
  for (int m = 1; m < q; ++m)
    spec.boundaries[m] = s[(n * m) / q];

  // Prefix sums for O(1) conditional means over sorted samples.
  std::vector<double> ps(n + 1, 0.0), ps2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    ps[i + 1] = ps[i] + s[i];
    ps2[i + 1] = ps2[i] + s[i] * s[i];
  }

  double prev_mse = kInf;
  for (int iter = 0; iter < 500; ++iter) {
    // Centroid step: conditional mean per bin.
    std::size_t lo = 0;
    double mse = 0.0;
    for (int m = 0; m < q; ++m) {
      std::size_t hi = (m == q - 1)
                           ? n
                           : static_cast<std::size_t>(
                                 std::lower_bound(s.begin(), s.end(),
                                                  spec.boundaries[m + 1]) -
                                 s.begin());
      if (hi > lo) {
        double cnt = static_cast<double>(hi - lo);
        double mean = (ps[hi] - ps[lo]) / cnt;
        spec.centroids[m] = mean;
        double var = (ps2[hi] - ps2[lo]) / cnt - mean * mean;
        spec.variances[m] = std::max(0.0, var);
        mse += (ps2[hi] - ps2[lo]) - 2.0 * mean * (ps[hi] - ps[lo]) +
               cnt * mean * mean;
      }
      // Empty bin: keep the previous centroid.
      lo = hi;
    }
    mse /= static_cast<double>(n);

    // Boundary step: midpoints of adjacent centroids.
    double max_shift = 0.0;
    for (int m = 1; m < q; ++m) {
      double nb = 0.5 * (spec.centroids[m - 1] + spec.centroids[m]);
      max_shift = std::max(max_shift, std::abs(nb - spec.boundaries[m]));
      spec.boundaries[m] = nb;
    }
    if (max_shift < 1e-12 || std::abs(prev_mse - mse) < 1e-14) break;
    prev_mse = mse;
  }
  return spec;
}

void fill_moments_gaussian(QuantizerSpec& spec, double sigma) {
  // Truncated-normal conditional moments of N(0, sigma^2) on [a, b).
  const int q = spec.levels();
  for (int m = 0; m < q; ++m) {
    double alpha = spec.boundaries[m] / sigma;
    double beta = spec.boundaries[m + 1] / sigma;
    double pa = std::isinf(alpha) ? 0.0 : norm_pdf(alpha);
    double pb = std::isinf(beta) ? 0.0 : norm_pdf(beta);
    double apa = std::isinf(alpha) ? 0.0 : alpha * pa;
    double bpb = std::isinf(beta) ? 0.0 : beta * pb;
    double za = std::isinf(alpha) ? (alpha < 0 ? 0.0 : 1.0)
                                  : 0.5 * std::erfc(-alpha * kInvSqrt2);
    double zb = std::isinf(beta) ? (beta < 0 ? 0.0 : 1.0)
                                 : 0.5 * std::erfc(-beta * kInvSqrt2);
    double z = zb - za;
    if (z <= 0.0) continue;  // numerically empty bin; keep previous moments
    double r = (pa - pb) / z;
    spec.centroids[m] = sigma * r;
    double var = sigma * sigma * (1.0 + (apa - bpb) / z - r * r);
    spec.variances[m] = std::max(0.0, var);
  }
}

void fill_moments_uniform(QuantizerSpec& spec) {
  const int q = spec.levels();
  for (int m = 0; m < q; ++m) {
    double a = spec.boundaries[m];
    double b = spec.boundaries[m + 1];
    if (std::isinf(a) || std::isinf(b)) continue;
    spec.centroids[m] = 0.5 * (a + b);
    spec.variances[m] = (b - a) * (b - a) / 12.0;
  }
}

double real_nll(int m, double v, double sigma, const QuantizerSpec& spec,
                bool* capped) {
  double grad;
  bool cap = false;
  double val = real_nll_and_grad(m, v, sigma, spec, grad);
  if (val >= kNllCap) cap = true;
  if (capped) *capped = *capped || cap;
  return val;
}

double real_nll_and_grad(int m, double v, double sigma,
                         const QuantizerSpec& spec, double& grad) {
  const double lo = spec.lower(m);
  const double hi = spec.upper(m);
  const double inv_s = 1.0 / sigma;
  const double alpha = std::isinf(lo) ? -kInf : (lo - v) * inv_s;
  const double beta = std::isinf(hi) ? kInf : (hi - v) * inv_s;

  // Fast path: CDF difference in whichever tail avoids cancellation.
  double p;
  if (std::isinf(alpha)) {
    p = 0.5 * std::erfc(-beta * kInvSqrt2);  // bottom bin: Phi(beta)
  } else if (std::isinf(beta)) {
    p = 0.5 * std::erfc(alpha * kInvSqrt2);  // top bin: 1 - Phi(alpha)
  } else if (alpha + beta <= 0.0) {
    p = 0.5 * std::erfc(-beta * kInvSqrt2) -
        0.5 * std::erfc(-alpha * kInvSqrt2);
  } else {
    // Both bounds in the upper tail; use complementary form.
    double ca = 0.5 * std::erfc(alpha * kInvSqrt2);
    double cb = std::isinf(beta) ? 0.0 : 0.5 * std::erfc(beta * kInvSqrt2);
    p = ca - cb;
  }

  const double ea = std::isinf(alpha) ? 0.0 : std::exp(-0.5 * alpha * alpha);
  const double eb = std::isinf(beta) ? 0.0 : std::exp(-0.5 * beta * beta);

  if (p > 1e-300) {
    grad = (eb - ea) / (kSqrt2Pi * sigma * p);
    double val = -std::log(p);
    if (val >= kNllCap) {
      // Honor the cap even when the log-domain value is representable.
      grad = asymptotic_tail_grad(alpha, beta, v, sigma, lo, hi);
      return kNllCap;
    }
    return val;
  }

  // Tail path: log-domain difference of CDFs.
  double la, lb;  // log Phi at the (sign-adjusted) bounds, lower tail form
  if (alpha + beta > 0.0) {
    la = log_ndtr(-beta);  // smaller
    lb = log_ndtr(-alpha);
  } else {
    la = log_ndtr(alpha);
    lb = log_ndtr(beta);
  }
  double logp = lb + std::log1p(-std::exp(std::min(la - lb, -1e-17)));
  double val = -logp;
  if (!(val < kNllCap)) {
    grad = asymptotic_tail_grad(alpha, beta, v, sigma, lo, hi);
    return kNllCap;
  }
  double m1 = std::max(-0.5 * alpha * alpha, -0.5 * beta * beta);
  double num = std::exp(-0.5 * beta * beta - m1) - std::exp(-0.5 * alpha * alpha - m1);
  grad = num * std::exp(m1 - logp) / (kSqrt2Pi * sigma);
  return val;
}

double nll_exact(QuantLabel q, cplx z, const NoiseModel& noise,
                 const QuantizerSpec& spec, bool* capped) {
  bool cap = false;
  double r = real_nll(q.re, z.real(), noise.sigma, spec, &cap);
  double i = real_nll(q.im, z.imag(), noise.sigma, spec, &cap);
  if (capped) *capped = cap;
  return r + i;
}

cplx nll_gradient_exact(QuantLabel q, cplx z, const NoiseModel& noise,
                        const QuantizerSpec& spec) {
  cplx g;
  nll_and_grad_exact(q, z, noise, spec, g);
  return g;
}

double nll_and_grad_exact(QuantLabel q, cplx z, const NoiseModel& noise,
                          const QuantizerSpec& spec, cplx& grad) {
  double gr, gi;
  double vr = real_nll_and_grad(q.re, z.real(), noise.sigma, spec, gr);
  double vi = real_nll_and_grad(q.im, z.imag(), noise.sigma, spec, gi);
  grad = {gr, gi};
  return vr + vi;
}

Mismatch1Obs mismatch1_observe(QuantLabel q, const QuantizerSpec& spec) {
  return {cplx(spec.centroids[q.re - 1], spec.centroids[q.im - 1]),
          spec.variances[q.re - 1] + spec.variances[q.im - 1]};
}

double nll_mismatch1(QuantLabel q, cplx z, const NoiseModel& noise,
                     const QuantizerSpec& spec) {
  auto obs = mismatch1_observe(q, spec);
  double denom = noise.n0 + obs.gamma2;
  return std::norm(z - obs.y) / denom + std::log(kPi * denom);
}

cplx nll_gradient_mismatch1(QuantLabel q, cplx z, const NoiseModel& noise,
                            const QuantizerSpec& spec) {
  auto obs = mismatch1_observe(q, spec);
  return 2.0 * (z - obs.y) / (noise.n0 + obs.gamma2);
}

double average_quant_variance(std::span<const QuantLabel> labels,
                              const QuantizerSpec& spec) {
  if (labels.empty())
    throw std::invalid_argument("average_quant_variance: empty label sequence");
  double acc = 0.0;
  for (const auto& q : labels)
    acc += spec.variances[q.re - 1] + spec.variances[q.im - 1];
  return acc / static_cast<double>(labels.size());
}

}  // namespace qmimo
