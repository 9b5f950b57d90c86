#include "qmimo/ofdm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace qmimo {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

struct FftPlan {
  int n = 0;
  std::vector<int> rev;
  std::vector<cplx> tw;  // forward twiddles, grouped by stage

  explicit FftPlan(int n_in) : n(n_in) {
    rev.resize(n);
    int lg = 0;
    while ((1 << lg) < n) ++lg;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < lg; ++b)
        if (i & (1 << b)) r |= 1 << (lg - 1 - b);
      rev[i] = r;
    }
    for (int len = 2; len <= n; len <<= 1)
      for (int j = 0; j < len / 2; ++j)
        tw.push_back(std::polar(1.0, -2.0 * kPi * j / len));
  }

  void run(cplx* x, bool inverse) const {
    for (int i = 0; i < n; ++i)
      if (i < rev[i]) std::swap(x[i], x[rev[i]]);
    const cplx* w = tw.data();
    for (int len = 2; len <= n; len <<= 1) {
      int half = len / 2;
      for (int i = 0; i < n; i += len) {
        for (int j = 0; j < half; ++j) {
          cplx t = inverse ? std::conj(w[j]) : w[j];
          cplx u = x[i + j];
          cplx v = x[i + j + half] * t;
          x[i + j] = u + v;
          x[i + j + half] = u - v;
        }
      }
      w += half;
    }
  }
};

const FftPlan& plan_for(int n) {
  static std::map<int, FftPlan> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, FftPlan(n)).first;
  return it->second;
}

void transform_inplace(cplx* x, int n, bool inverse) {
  if (is_pow2(n)) {
    plan_for(n).run(x, inverse);
  } else {
    std::vector<cplx> out(n, cplx(0.0, 0.0));
    double sgn = inverse ? 1.0 : -1.0;
    for (int k = 0; k < n; ++k)
      for (int t = 0; t < n; ++t)
        out[k] += x[t] * std::polar(1.0, sgn * 2.0 * kPi * k * t / n);
    std::copy(out.begin(), out.end(), x);
  }
  double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) x[i] *= scale;
}

}  // namespace

TonePlan build_tone_plan(int w) {
  if (w < 8) throw std::invalid_argument("build_tone_plan: W must be >= 8");
  TonePlan plan;
  plan.w = w;
  auto idx = [w](int offset) { return offset + w / 2; };

  if (w == 128) {
    // 802.11n 40 MHz: used offsets -58..-2 and 2..58, pilots at +-11,25,53.
    std::vector<int> pilots_off = {-53, -25, -11, 11, 25, 53};
    for (int off = -64; off < 64; ++off) {
      bool used = (off >= -58 && off <= -2) || (off >= 2 && off <= 58);
      if (!used) {
        plan.guard.push_back(idx(off));
      } else if (std::find(pilots_off.begin(), pilots_off.end(), off) !=
                 pilots_off.end()) {
        plan.pilot.push_back(idx(off));
      } else {
        plan.data.push_back(idx(off));
      }
    }
    return plan;
  }

  // Scaled layout: guard tones at DC and the band edges, pilots spread
  // evenly over the used tones, everything else data.
  int n_guard = std::max(1, (14 * w + 64) / 128);
  int n_pilot = (6 * w + 64) / 128;
  if (w - n_guard - n_pilot < 4)
    throw std::invalid_argument("build_tone_plan: W too small for layout");

  std::vector<bool> is_guard(w, false);
  is_guard[idx(0)] = true;
  int placed = 1;
  int lo = -w / 2, hi = w / 2 - 1;
  while (placed < n_guard) {
    is_guard[idx(lo++)] = true;
    ++placed;
    if (placed < n_guard) {
      is_guard[idx(hi--)] = true;
      ++placed;
    }
  }
  std::vector<int> used;
  for (int j = 0; j < w; ++j) {
    if (is_guard[j])
      plan.guard.push_back(j);
    else
      used.push_back(j);
  }
  std::vector<bool> is_pilot(w, false);
  for (int p = 0; p < n_pilot; ++p) {
    int pos = static_cast<int>((p + 0.5) * used.size() / n_pilot);
    is_pilot[used[std::min<std::size_t>(pos, used.size() - 1)]] = true;
  }
  for (int j : used)
    (is_pilot[j] ? plan.pilot : plan.data).push_back(j);
  return plan;
}

Eigen::VectorXcd dft(const Eigen::VectorXcd& x) {
  Eigen::VectorXcd y = x;
  transform_inplace(y.data(), static_cast<int>(y.size()), false);
  return y;
}

Eigen::VectorXcd idft(const Eigen::VectorXcd& x) {
  Eigen::VectorXcd y = x;
  transform_inplace(y.data(), static_cast<int>(y.size()), true);
  return y;
}

void dft_cols_inplace(Eigen::MatrixXcd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    transform_inplace(m.col(c).data(), static_cast<int>(m.rows()), false);
}

void idft_cols_inplace(Eigen::MatrixXcd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    transform_inplace(m.col(c).data(), static_cast<int>(m.rows()), true);
}

FrameCube reorient(const FrameCube& cube) {
  FrameCube out;
  out.t_total = cube.t_total;
  out.orient = cube.orient == Orientation::PerFrequency
                   ? Orientation::PerAntenna
                   : Orientation::PerFrequency;
  if (cube.slices.empty()) return out;
  const int n_old = static_cast<int>(cube.slices.size());
  const int n_new = static_cast<int>(cube.slices[0].rows());
  const int t = static_cast<int>(cube.slices[0].cols());
  out.slices.assign(n_new, Eigen::MatrixXcd(n_old, t));
  for (int a = 0; a < n_old; ++a)
    for (int b = 0; b < n_new; ++b)
      out.slices[b].row(a) = cube.slices[a].row(b);
  return out;
}

namespace {

// Shared tap/tone transform: modulate by (-1)^t in the tap domain, unitary
// DFT across the sequence index.
void seq_transform(MatSeq& m, bool to_freq) {
  const int w = static_cast<int>(m.size());
  const int r = static_cast<int>(m[0].rows());
  const int c = static_cast<int>(m[0].cols());
  Eigen::MatrixXcd buf(w, r * c);
  for (int t = 0; t < w; ++t) {
    double mod = (!to_freq || (t % 2 == 0)) ? 1.0 : -1.0;
    if (to_freq)
      buf.row(t) = Eigen::Map<const Eigen::VectorXcd>(m[t].data(), r * c) * mod;
    else
      buf.row(t) = Eigen::Map<const Eigen::VectorXcd>(m[t].data(), r * c);
  }
  if (to_freq)
    dft_cols_inplace(buf);
  else
    idft_cols_inplace(buf);
  for (int t = 0; t < w; ++t) {
    double mod = (to_freq || (t % 2 == 0)) ? 1.0 : -1.0;
    Eigen::Map<Eigen::VectorXcd>(m[t].data(), r * c) =
        buf.row(t).transpose() * mod;
  }
}

}  // namespace

MatSeq taps_to_freq(const MatSeq& taps) {
  MatSeq out = taps;
  seq_transform(out, true);
  return out;
}

MatSeq freq_to_taps(const MatSeq& freq) {
  MatSeq out = freq;
  seq_transform(out, false);
  return out;
}

Eigen::VectorXcd taps_to_freq_vec(const Eigen::VectorXcd& taps) {
  const int w = static_cast<int>(taps.size());
  Eigen::VectorXcd mod = taps;
  for (int t = 1; t < w; t += 2) mod[t] = -mod[t];
  return dft(mod);
}

Eigen::VectorXcd freq_to_taps_vec(const Eigen::VectorXcd& freq) {
  Eigen::VectorXcd taps = idft(freq);
  const int w = static_cast<int>(taps.size());
  for (int t = 1; t < w; t += 2) taps[t] = -taps[t];
  return taps;
}

}  // namespace qmimo
