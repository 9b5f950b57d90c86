#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "qmimo/chest.hpp"

using namespace qmimo;

namespace {

struct TrainingRun {
  PilotBook book;
  ChannelRealization channel;
  RxFrame rx;
};

FrameCube training_frames(const PilotBook& book, int u, int w) {
  FrameCube f;
  f.orient = Orientation::PerFrequency;
  f.t_total = u;
  f.slices.assign(w, Eigen::MatrixXcd::Zero(u, u));
  for (int k = 0; k < w; ++k) f.slices[k] = book.tones[k];
  return f;
}

TrainingRun make_training(const SystemConfig& cfg, const TonePlan& plan,
                          const QuantizerSpec& spec, std::uint64_t seed) {
  TrainingRun tr;
  auto r1 = substream(seed, 0, 1);
  auto r2 = substream(seed, 0, 2);
  auto r3 = substream(seed, 0, 3);
  tr.book = gen_pilots(cfg.users, plan, cfg.es, r1);
  tr.channel = draw_channel(cfg, r2);
  FrameCube frames = training_frames(tr.book, cfg.users, cfg.subcarriers);
  tr.rx = transmit(frames, tr.channel, cfg, spec, r3, spec.infinite());
  return tr;
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

}  // namespace

TEST_CASE("gen_pilots: scaling and orthogonality") {
  TonePlan plan = build_tone_plan(16);
  std::mt19937_64 rng(1);
  PilotBook one = gen_pilots(1, plan, 2.0, rng);
  for (int k : plan.data)
    CHECK(std::abs(std::abs(one.tones[k](0, 0)) - std::sqrt(2.0)) < 1e-12);

  for (int u : {2, 4, 3}) {
    PilotBook book = gen_pilots(u, plan, 1.5, rng);
    CHECK(book.hadamard == (u != 3));
    for (int k : plan.data) {
      Eigen::MatrixXcd gram = book.tones[k] * book.tones[k].adjoint();
      CHECK((gram - u * 1.5 * Eigen::MatrixXcd::Identity(u, u)).norm() < 1e-10);
    }
    for (int k : plan.guard) CHECK(book.tones[k].norm() == 0.0);
  }
}

TEST_CASE("gen_pilots: per-tone randomization gives distinct matrices") {
  TonePlan plan = build_tone_plan(128);
  std::mt19937_64 rng(2);
  // U=8: 2^15 distinct sign patterns, so collisions among 100 tones are rare.
  PilotBook book = gen_pilots(8, plan, 1.0, rng);
  int collisions = 0;
  const auto& active = plan.data;
  for (int i = 0; i < 100; ++i)
    for (int j = i + 1; j < 100; ++j)
      if ((book.tones[active[i]] - book.tones[active[j]]).norm() < 1e-12)
        ++collisions;
  CHECK(collisions <= 2);
}

TEST_CASE("estimate: noiseless identification at infinite precision") {
  SystemConfig cfg;
  cfg.users = 1;
  cfg.antennas = 1;
  cfg.subcarriers = 16;
  cfg.taps = 1;
  cfg.cp_support = 2;
  cfg.qbits = 0;
  cfg.n0 = 1e-10;
  cfg.data_symbols = 1;
  TonePlan plan = build_tone_plan(cfg.subcarriers);
  TrainingRun tr = make_training(cfg, plan, QuantizerSpec{}, 3);

  ChestConfig cc;
  cc.kind = ReceiverKind::Unquantized;
  cc.support = cfg.cp_support;
  ChestResult res = estimate(tr.rx, tr.book, cfg, cc, plan);
  CHECK(res.converged);
  CHECK(chest_mse(res.h_freq, tr.channel.freq) < 1e-8);
}

TEST_CASE("estimate: every kind returns a P-tap supported estimate") {
  SystemConfig cfg;
  cfg.users = 2;
  cfg.antennas = 2;
  cfg.subcarriers = 16;
  cfg.taps = 2;
  cfg.cp_support = 4;
  cfg.qbits = 3;
  cfg.n0 = 0.05;
  cfg.data_symbols = 1;
  TonePlan plan = build_tone_plan(cfg.subcarriers);
  QuantizerSpec spec = gaussian_spec(cfg.qbits, receive_sigma(cfg), 4);
  TrainingRun tr = make_training(cfg, plan, spec, 5);

  for (ReceiverKind kind : {ReceiverKind::Exact, ReceiverKind::Mismatch1,
                            ReceiverKind::Mismatch2}) {
    ChestConfig cc;
    cc.kind = kind;
    cc.support = cfg.cp_support;
    ChestResult res = estimate(tr.rx, tr.book, cfg, cc, plan);
    MatSeq taps = freq_to_taps(res.h_freq);
    for (int t = cfg.cp_support; t < cfg.subcarriers; ++t)
      CHECK(taps[t].norm() < 1e-10);
  }
}

TEST_CASE("estimate: mismatch2 approaches exact at high resolution") {
  SystemConfig cfg;
  cfg.users = 2;
  cfg.antennas = 2;
  cfg.subcarriers = 16;
  cfg.taps = 2;
  cfg.cp_support = 4;
  cfg.qbits = 10;
  cfg.data_symbols = 1;
  SystemConfig snr_ref = cfg;
  cfg.n0 = snr_to_n0(snr_ref, 10.0);
  TonePlan plan = build_tone_plan(cfg.subcarriers);
  QuantizerSpec spec = gaussian_spec(cfg.qbits, receive_sigma(cfg), 6);
  TrainingRun tr = make_training(cfg, plan, spec, 7);

  ChestConfig cc;
  cc.support = cfg.cp_support;
  cc.kind = ReceiverKind::Exact;
  ChestResult exact = estimate(tr.rx, tr.book, cfg, cc, plan);
  cc.kind = ReceiverKind::Mismatch2;
  ChestResult mm2 = estimate(tr.rx, tr.book, cfg, cc, plan);
  CHECK(chest_mse(exact.h_freq, mm2.h_freq) < 1e-2);
}

TEST_CASE("estimate: unquantized baseline needs stored samples") {
  SystemConfig cfg;
  cfg.users = 1;
  cfg.antennas = 1;
  cfg.subcarriers = 16;
  cfg.taps = 2;
  cfg.cp_support = 4;
  cfg.qbits = 3;
  cfg.n0 = 0.1;
  cfg.data_symbols = 1;
  TonePlan plan = build_tone_plan(cfg.subcarriers);
  QuantizerSpec spec = gaussian_spec(cfg.qbits, receive_sigma(cfg), 8);
  TrainingRun tr = make_training(cfg, plan, spec, 9);  // labels only

  ChestConfig cc;
  cc.kind = ReceiverKind::Unquantized;
  cc.support = cfg.cp_support;
  CHECK_THROWS(estimate(tr.rx, tr.book, cfg, cc, plan));
}

TEST_CASE("chest_mse") {
  std::mt19937_64 rng(10);
  int w = 8, b = 2, u = 3;
  MatSeq h(w);
  for (auto& m : h) {
    m.resize(b, u);
    for (int j = 0; j < u; ++j)
      for (int i = 0; i < b; ++i) m(i, j) = randn_c(rng);
  }
  CHECK(chest_mse(h, h) == 0.0);

  double alpha = 0.8;
  MatSeq hs(w);
  double pow = 0.0;
  for (int k = 0; k < w; ++k) {
    hs[k] = alpha * h[k];
    pow += h[k].squaredNorm();
  }
  CHECK(chest_mse(hs, h) ==
        doctest::Approx((1 - alpha) * (1 - alpha) * pow / (b * u * w))
            .epsilon(1e-10));

  MatSeq g = h;
  g[3](1, 2) += cplx(0.5, -0.25);
  double naive = 0.0;
  for (int k = 0; k < w; ++k) naive += (g[k] - h[k]).squaredNorm();
  CHECK(chest_mse(g, h) == doctest::Approx(naive / (b * u * w)).epsilon(1e-12));
}

TEST_CASE("receiver names round-trip") {
  for (ReceiverKind k : {ReceiverKind::Exact, ReceiverKind::Mismatch1,
                         ReceiverKind::Mismatch2, ReceiverKind::Unquantized})
    CHECK(receiver_from_name(receiver_name(k)) == k);
  CHECK_THROWS(receiver_from_name("bogus"));
}
