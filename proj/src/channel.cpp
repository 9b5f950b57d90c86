#include "qmimo/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace qmimo {

void validate(const SystemConfig& cfg) {
  if (cfg.users < 1 || cfg.antennas < cfg.users)
    throw std::invalid_argument("config: need 1 <= U <= B");
  if (!(cfg.taps <= cfg.cp_support && cfg.cp_support < cfg.subcarriers))
    throw std::invalid_argument("config: need L <= P < W");
  if (cfg.qbits < 0 || cfg.qbits > 12)
    throw std::invalid_argument("config: qbits must be 0 (infinite) or 1..12");
  if (cfg.data_symbols < 1)
    throw std::invalid_argument("config: need D >= 1");
  if (!(cfg.es > 0.0) || !(cfg.n0 > 0.0))
    throw std::invalid_argument("config: Es and N0 must be positive");
}

ChannelRealization draw_channel(const SystemConfig& cfg, std::mt19937_64& rng) {
  ChannelRealization ch;
  ch.taps.assign(cfg.subcarriers,
                 Eigen::MatrixXcd::Zero(cfg.antennas, cfg.users));
  for (int t = 0; t < cfg.taps; ++t)
    for (int u = 0; u < cfg.users; ++u)
      for (int b = 0; b < cfg.antennas; ++b)
        ch.taps[t](b, u) = randn_c(rng);
  ch.freq = taps_to_freq(ch.taps);
  return ch;
}

RxFrame transmit(const FrameCube& frames, const ChannelRealization& channel,
                 const SystemConfig& cfg, const QuantizerSpec& spec,
                 std::mt19937_64& rng, bool store_unquantized) {
  if (frames.orient != Orientation::PerFrequency ||
      static_cast<int>(frames.slices.size()) != cfg.subcarriers)
    throw std::invalid_argument("transmit: expected per-frequency U x T frames");
  const int w = cfg.subcarriers;
  const int b_ant = cfg.antennas;
  const int t = frames.t_total;
  if (frames.slices[0].rows() != cfg.users || frames.slices[0].cols() != t)
    throw std::invalid_argument("transmit: frame dimension mismatch");

  FrameCube z;
  z.orient = Orientation::PerFrequency;
  z.t_total = t;
  z.slices.reserve(w);
  for (int k = 0; k < w; ++k)
    z.slices.push_back(channel.freq[k] * frames.slices[k]);
  FrameCube za = reorient(z);  // B slices of W x T

  RxFrame rx;
  rx.spec = spec;
  rx.t_total = t;
  const bool infinite = spec.infinite();
  const double noise_sd = std::sqrt(cfg.n0 / 2.0);
  std::normal_distribution<double> nd(0.0, noise_sd);
  if (!infinite) rx.labels.resize(b_ant);
  if (infinite || store_unquantized) rx.unquantized.resize(b_ant);

  for (int b = 0; b < b_ant; ++b) {
    Eigen::MatrixXcd y = za.slices[b];
    idft_cols_inplace(y);
    for (int l = 0; l < t; ++l)
      for (int k = 0; k < w; ++k)
        y(k, l) += cplx(nd(rng), nd(rng));
    if (infinite || store_unquantized) rx.unquantized[b] = y;
    if (!infinite) {
      LabelFrame& lf = rx.labels[b];
      lf.re.resize(w, t);
      lf.im.resize(w, t);
      for (int l = 0; l < t; ++l)
        for (int k = 0; k < w; ++k) {
          lf.re(k, l) = quantize_real(y(k, l).real(), spec);
          lf.im(k, l) = quantize_real(y(k, l).imag(), spec);
        }
    }
  }
  return rx;
}

double snr_to_n0(const SystemConfig& cfg, double snr_db) {
  double snr = std::pow(10.0, snr_db / 10.0);
  return cfg.users * cfg.es * cfg.taps /
         (cfg.subcarriers * snr);
}

}  // namespace qmimo
