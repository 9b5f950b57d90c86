#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "qmimo/detect.hpp"

using namespace qmimo;

namespace {

TonePlan all_data_plan(int w) {
  TonePlan p;
  p.w = w;
  for (int k = 0; k < w; ++k) p.data.push_back(k);
  return p;
}

QuantizerSpec gaussian_spec(int bits, double sigma, std::uint64_t seed) {
  if (bits == 0) return QuantizerSpec{};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> s(std::max(20000, 20 << bits));
  for (auto& v : s) v = g(rng);
  QuantizerSpec spec = design_lloyd_max(s, bits);
  fill_moments_gaussian(spec, sigma);
  return spec;
}

double receive_sigma(const SystemConfig& cfg) {
  return std::sqrt(
      (cfg.users * cfg.es * cfg.taps / cfg.subcarriers + cfg.n0) / 2.0);
}

struct SymbolRun {
  ChannelRealization channel;
  Eigen::MatrixXcd s_true;   // U x W transmitted symbols
  Eigen::MatrixXi idx_true;  // constellation indices on data tones
  Eigen::MatrixXcd pilots;   // U x W pilot values
  RxFrame rx;
};

SymbolRun make_symbol(const SystemConfig& cfg, const TonePlan& plan,
                      const Constellation& c, const QuantizerSpec& spec,
                      std::uint64_t seed) {
  SymbolRun run;
  auto r1 = substream(seed, 0, 1);
  auto r2 = substream(seed, 0, 2);
  run.channel = draw_channel(cfg, r1);

  std::uniform_int_distribution<int> pick(0, c.size() - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  run.s_true = Eigen::MatrixXcd::Zero(cfg.users, cfg.subcarriers);
  run.idx_true = Eigen::MatrixXi::Constant(cfg.users, cfg.subcarriers, -1);
  run.pilots = Eigen::MatrixXcd::Zero(cfg.users, cfg.subcarriers);
  for (int k : plan.data)
    for (int u = 0; u < cfg.users; ++u) {
      int idx = pick(r2);
      run.idx_true(u, k) = idx;
      run.s_true(u, k) = c.points[idx];
    }
  for (int k : plan.pilot)
    for (int u = 0; u < cfg.users; ++u) {
      run.pilots(u, k) = std::sqrt(cfg.es) * (coin(r2) ? 1.0 : -1.0);
      run.s_true(u, k) = run.pilots(u, k);
    }

  FrameCube frames;
  frames.orient = Orientation::PerFrequency;
  frames.t_total = 1;
  frames.slices.assign(cfg.subcarriers, Eigen::MatrixXcd(cfg.users, 1));
  for (int k = 0; k < cfg.subcarriers; ++k)
    frames.slices[k].col(0) = run.s_true.col(k);
  run.rx = transmit(frames, run.channel, cfg, spec, r2, spec.infinite());
  return run;
}

}  // namespace

TEST_CASE("detect: noiseless perfect-CSI recovery") {
  SystemConfig cfg;
  cfg.users = 2;
  cfg.antennas = 8;
  cfg.subcarriers = 16;
  cfg.taps = 2;
  cfg.cp_support = 4;
  cfg.qbits = 0;
  cfg.n0 = 1e-10;
  cfg.data_symbols = 1;
  TonePlan plan = build_tone_plan(cfg.subcarriers);
  Constellation c = Constellation::qam(16, cfg.es);
  SymbolRun run = make_symbol(cfg, plan, c, QuantizerSpec{}, 1);

  DetectOptions opt;
  opt.kind = ReceiverKind::Unquantized;
  DetectionResult det =
      detect(run.rx, 0, run.channel.freq, cfg, plan, run.pilots, opt);
  Eigen::MatrixXi sliced = slice_hard(det.s_hat, c);
  for (int k : plan.data)
    for (int u = 0; u < cfg.users; ++u)
      CHECK(sliced(u, k) == run.idx_true(u, k));
}

TEST_CASE("detect: mismatch2 matches a dense per-tone oracle") {
  SystemConfig cfg;
  cfg.users = 2;
  cfg.antennas = 4;
  cfg.subcarriers = 16;
  cfg.taps = 2;
  cfg.cp_support = 4;
  cfg.qbits = 4;
  cfg.n0 = 0.05;
  cfg.data_symbols = 1;
  TonePlan plan = build_tone_plan(cfg.subcarriers);
  Constellation c = Constellation::qam(16, cfg.es);
  QuantizerSpec spec = gaussian_spec(cfg.qbits, receive_sigma(cfg), 2);
  SymbolRun run = make_symbol(cfg, plan, c, spec, 3);

  DetectOptions opt;
  opt.kind = ReceiverKind::Mismatch2;
  DetectionResult det =
      detect(run.rx, 0, run.channel.freq, cfg, plan, run.pilots, opt);

  // Oracle: centroid observations per antenna, unitary DFT, dense MMSE with
  // unbiased per-stream scaling.
  int w = cfg.subcarriers, b = cfg.antennas, u = cfg.users;
  Eigen::MatrixXcd y(w, b);
  std::vector<QuantLabel> all;
  for (int a = 0; a < b; ++a) {
    Eigen::VectorXcd col(w);
    for (int k = 0; k < w; ++k) {
      QuantLabel q{run.rx.labels[a].re(k, 0), run.rx.labels[a].im(k, 0)};
      all.push_back(q);
      col[k] = mismatch1_observe(q, spec).y;
    }
    y.col(a) = dft(col);
  }
  double gbar = average_quant_variance(all, spec);
  double alpha = (cfg.n0 + gbar) / cfg.es;
  for (int k : plan.data) {
    Eigen::MatrixXcd h = run.channel.freq[k];
    Eigen::VectorXcd yk = y.row(k).transpose();
    Eigen::MatrixXcd g = h.adjoint() * h;
    Eigen::MatrixXcd a =
        g + alpha * Eigen::MatrixXcd::Identity(u, u);
    Eigen::VectorXcd s = a.ldlt().solve(h.adjoint() * yk);
    Eigen::MatrixXcd mu = a.ldlt().solve(g);
    for (int uu = 0; uu < u; ++uu) {
      double m = mu(uu, uu).real();
      CHECK(std::abs(det.s_hat(uu, k) - s[uu] / m) < 1e-8);
      double rho = m / (1.0 - m);
      CHECK(det.rho(uu, k) == doctest::Approx(rho).epsilon(1e-8));
    }
  }
}

TEST_CASE("detect: pilot pinning and guard zeros on the joint solver") {
  SystemConfig cfg;
  cfg.users = 2;
  cfg.antennas = 4;
  cfg.subcarriers = 16;
  cfg.taps = 2;
  cfg.cp_support = 4;
  cfg.qbits = 3;
  cfg.n0 = 0.1;
  cfg.data_symbols = 1;
  TonePlan plan = build_tone_plan(cfg.subcarriers);
  Constellation c = Constellation::qam(16, cfg.es);
  QuantizerSpec spec = gaussian_spec(cfg.qbits, receive_sigma(cfg), 4);
  SymbolRun run = make_symbol(cfg, plan, c, spec, 5);

  for (ReceiverKind kind : {ReceiverKind::Exact, ReceiverKind::Mismatch1}) {
    DetectOptions opt;
    opt.kind = kind;
    DetectionResult det =
        detect(run.rx, 0, run.channel.freq, cfg, plan, run.pilots, opt);
    for (int k : plan.pilot)
      CHECK((det.s_hat.col(k) - run.pilots.col(k)).norm() == 0.0);
    for (int k : plan.guard) CHECK(det.s_hat.col(k).norm() == 0.0);
    CHECK((det.rho.array() == 1.0).all());
  }
}

TEST_CASE("detect: joint objective is convex along random lines") {
  SystemConfig cfg;
  cfg.users = 1;
  cfg.antennas = 2;
  cfg.subcarriers = 4;
  cfg.taps = 2;
  cfg.cp_support = 2;
  cfg.qbits = 3;
  cfg.n0 = 0.1;
  cfg.data_symbols = 1;
  TonePlan plan = all_data_plan(4);
  Constellation c = Constellation::qam(4, cfg.es);
  QuantizerSpec spec = gaussian_spec(cfg.qbits, receive_sigma(cfg), 6);
  SymbolRun run = make_symbol(cfg, plan, c, spec, 7);
  NoiseModel noise(cfg.n0);

  auto objective = [&](const Eigen::MatrixXcd& s) {
    double val = 0.0;
    Eigen::MatrixXcd z(cfg.subcarriers, cfg.antennas);
    for (int k = 0; k < cfg.subcarriers; ++k)
      z.row(k) = (run.channel.freq[k] * s.col(k)).transpose();
    idft_cols_inplace(z);
    for (int a = 0; a < cfg.antennas; ++a)
      for (int k = 0; k < cfg.subcarriers; ++k)
        val += nll_exact({run.rx.labels[a].re(k, 0), run.rx.labels[a].im(k, 0)},
                         z(k, a), noise, spec);
    for (int k : plan.data) val += s.col(k).squaredNorm() / cfg.es;
    return val;
  };

  std::mt19937_64 rng(8);
  for (int it = 0; it < 200; ++it) {
    Eigen::MatrixXcd s0(1, 4), d(1, 4);
    for (int k = 0; k < 4; ++k) {
      s0(0, k) = 2.0 * randn_c(rng);
      d(0, k) = randn_c(rng);
    }
    d /= std::sqrt(d.squaredNorm());
    const double h = 1e-3;
    double f0 = objective(s0 - h * d);
    double f1 = objective(s0);
    double f2 = objective(s0 + h * d);
    CHECK(f0 - 2 * f1 + f2 >= -1e-8);
  }
}

TEST_CASE("llr_maxlog: signs, scaling, exhaustive oracle") {
  Constellation c = Constellation::qam(16, 1.0);
  Eigen::MatrixXcd s(1, c.size());
  Eigen::MatrixXd rho = Eigen::MatrixXd::Ones(1, c.size());
  for (int i = 0; i < c.size(); ++i) s(0, i) = c.points[i];
  auto llrs = llr_maxlog(s, rho, c);
  REQUIRE(static_cast<int>(llrs.size()) == c.bits_per_symbol);
  for (int i = 0; i < c.size(); ++i)
    for (int b = 0; b < c.bits_per_symbol; ++b) {
      CHECK((llrs[b](0, i) > 0) == (c.bit(i, b) == 1));
    }

  std::mt19937_64 rng(9);
  Eigen::MatrixXcd z(1, 50);
  Eigen::MatrixXd r1 = Eigen::MatrixXd::Ones(1, 50), r2(1, 50);
  for (int i = 0; i < 50; ++i) {
    z(0, i) = 2.0 * randn_c(rng);
    r2(0, i) = 3.5;
  }
  auto base = llr_maxlog(z, r1, c);
  auto scaled = llr_maxlog(z, r2, c);
  for (int b = 0; b < c.bits_per_symbol; ++b)
    CHECK((scaled[b] - 3.5 * base[b]).norm() < 1e-12);

  for (int i = 0; i < 50; ++i)
    for (int b = 0; b < c.bits_per_symbol; ++b) {
      double m0 = 1e300, m1 = 1e300;
      for (int p = 0; p < c.size(); ++p) {
        double d = std::norm(z(0, i) - c.points[p]);
        if (c.bit(p, b) == 0) m0 = std::min(m0, d);
        else m1 = std::min(m1, d);
      }
      CHECK(std::abs(base[b](0, i) - (m0 - m1)) < 1e-12);
    }
}

TEST_CASE("slice_hard: identity, midpoint ties, exhaustive oracle") {
  Constellation c = Constellation::qam(16, 1.0);
  for (int i = 0; i < c.size(); ++i) CHECK(slice_hard(c.points[i], c) == i);

  // Midpoint between two real-adjacent points ties toward the smaller index.
  int a = 0;
  double best = 1e300;
  int bnext = -1;
  for (int i = 1; i < c.size(); ++i) {
    double d = std::abs(c.points[i] - c.points[0]);
    if (d < best) { best = d; bnext = i; }
  }
  cplx mid = 0.5 * (c.points[a] + c.points[bnext]);
  CHECK(slice_hard(mid, c) == std::min(a, bnext));

  std::mt19937_64 rng(10);
  for (int it = 0; it < 1000; ++it) {
    cplx z = 2.0 * randn_c(rng);
    int got = slice_hard(z, c);
    int want = 0;
    double bd = 1e300;
    for (int p = 0; p < c.size(); ++p) {
      double d = std::norm(z - c.points[p]);
      if (d < bd - 1e-15) { bd = d; want = p; }
    }
    CHECK(got == want);
  }
}

TEST_CASE("llr/hard consistency at constellation points") {
  Constellation c = Constellation::qam(16, 1.0);
  Eigen::MatrixXcd s(1, 1);
  Eigen::MatrixXd rho = Eigen::MatrixXd::Ones(1, 1);
  for (int i = 0; i < c.size(); ++i) {
    s(0, 0) = c.points[i];
    int idx = slice_hard(s(0, 0), c);
    auto llrs = llr_maxlog(s, rho, c);
    for (int b = 0; b < c.bits_per_symbol; ++b)
      CHECK((llrs[b](0, 0) > 0) == (c.bit(idx, b) == 1));
  }
}

TEST_CASE("brute_force_map: noiseless recovery and determinism") {
  SystemConfig cfg;
  cfg.users = 1;
  cfg.antennas = 2;
  cfg.subcarriers = 4;
  cfg.taps = 2;
  cfg.cp_support = 2;
  cfg.qbits = 6;
  cfg.n0 = 1e-6;
  cfg.data_symbols = 1;
  TonePlan plan = all_data_plan(4);
  Constellation c = Constellation::qam(4, cfg.es);
  QuantizerSpec spec = gaussian_spec(cfg.qbits, receive_sigma(cfg), 11);
  SymbolRun run = make_symbol(cfg, plan, c, spec, 12);

  Eigen::MatrixXi map1 = brute_force_map(run.rx, 0, run.channel.freq, cfg,
                                         plan, run.pilots, c);
  Eigen::MatrixXi map2 = brute_force_map(run.rx, 0, run.channel.freq, cfg,
                                         plan, run.pilots, c);
  CHECK(map1 == map2);
  for (int k : plan.data) CHECK(map1(0, k) == run.idx_true(0, k));
}

TEST_CASE("brute_force_map: agrees with direct enumeration on W=2") {
  SystemConfig cfg;
  cfg.users = 1;
  cfg.antennas = 1;
  cfg.subcarriers = 2;
  cfg.taps = 1;
  cfg.cp_support = 1;
  cfg.qbits = 2;
  cfg.n0 = 0.5;
  cfg.data_symbols = 1;
  TonePlan plan = all_data_plan(2);
  Constellation c = Constellation::qam(4, cfg.es);
  QuantizerSpec spec = gaussian_spec(cfg.qbits, receive_sigma(cfg), 13);
  NoiseModel noise(cfg.n0);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SymbolRun run = make_symbol(cfg, plan, c, spec, 100 + seed);
    Eigen::MatrixXi got = brute_force_map(run.rx, 0, run.channel.freq, cfg,
                                          plan, run.pilots, c);
    // Independent enumeration.
    double best = 1e300;
    int bi = -1, bj = -1;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        Eigen::MatrixXcd s(1, 2);
        s(0, 0) = c.points[i];
        s(0, 1) = c.points[j];
        Eigen::MatrixXcd z(2, 1);
        for (int k = 0; k < 2; ++k)
          z.row(k) = (run.channel.freq[k] * s.col(k)).transpose();
        idft_cols_inplace(z);
        double val = 0.0;
        for (int k = 0; k < 2; ++k)
          val += nll_exact(
              {run.rx.labels[0].re(k, 0), run.rx.labels[0].im(k, 0)},
              z(k, 0), noise, spec);
        if (val < best) { best = val; bi = i; bj = j; }
      }
    CHECK(got(0, 0) == bi);
    CHECK(got(0, 1) == bj);
  }
}

TEST_CASE("high-SNR symbol error rate of exact and mismatch2") {
  SystemConfig cfg;
  cfg.users = 2;
  cfg.antennas = 8;
  cfg.subcarriers = 16;
  cfg.taps = 2;
  cfg.cp_support = 4;
  cfg.qbits = 6;
  cfg.data_symbols = 1;
  SystemConfig ref = cfg;
  cfg.n0 = snr_to_n0(ref, 25.0);
  TonePlan plan = build_tone_plan(cfg.subcarriers);
  Constellation c = Constellation::qam(16, cfg.es);
  QuantizerSpec spec = gaussian_spec(cfg.qbits, receive_sigma(cfg), 14);

  int errors_exact = 0, errors_mm2 = 0, symbols = 0;
  std::uint64_t seed = 0;
  while (symbols < 10000) {
    SymbolRun run = make_symbol(cfg, plan, c, spec, 1000 + seed++);
    for (ReceiverKind kind : {ReceiverKind::Exact, ReceiverKind::Mismatch2}) {
      DetectOptions opt;
      opt.kind = kind;
      DetectionResult det =
          detect(run.rx, 0, run.channel.freq, cfg, plan, run.pilots, opt);
      Eigen::MatrixXi sliced = slice_hard(det.s_hat, c);
      for (int k : plan.data)
        for (int u = 0; u < cfg.users; ++u)
          if (sliced(u, k) != run.idx_true(u, k))
            (kind == ReceiverKind::Exact ? errors_exact : errors_mm2)++;
    }
    symbols += cfg.users * static_cast<int>(plan.data.size());
  }
  CHECK(errors_exact <= symbols / 1000);
  CHECK(errors_mm2 <= symbols / 1000);
}
