#include "qmimo/sim.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qmimo {

namespace {

// Substream purposes; trials derive disjoint streams from (seed, trial, tag).
enum RngTag : std::uint64_t {
  kTagChannel = 1,
  kTagNoise = 2,
  kTagBits = 3,
  kTagPilotBook = 4,
  kTagPilotBpsk = 5,
  kTagInterleaver = 100,  // + user index
  kTagQuantDesign = 0xABCD,
};

struct TrialFrames {
  FrameCube frames;  // per-frequency U x T
  std::vector<std::vector<std::uint8_t>> info_bits;  // per user
  std::vector<std::vector<int>> perms;               // per user
  Eigen::MatrixXcd data_pilots;                      // U x W (data-phase BPSK)
  PilotBook book;
};

TrialFrames build_trial_frames(const SystemConfig& cfg, const TonePlan& plan,
                               const CodeConfig& code, const PacketPlan& pplan,
                               const Constellation& constel,
                               std::uint64_t seed, std::uint64_t trial) {
  const int u = cfg.users;
  const int d = cfg.data_symbols;
  const int t = cfg.t_total();
  const int w = cfg.subcarriers;

  TrialFrames out;
  auto rng_book = substream(seed, trial, kTagPilotBook);
  out.book = gen_pilots(u, plan, cfg.es, rng_book);

  out.frames.orient = Orientation::PerFrequency;
  out.frames.t_total = t;
  out.frames.slices.assign(w, Eigen::MatrixXcd::Zero(u, t));

  // Training phase: symbol l carries column l of each tone's pilot matrix.
  for (int k = 0; k < w; ++k)
    out.frames.slices[k].leftCols(u) = out.book.tones[k];

  // Data-phase pilot tones: known per-user BPSK.
  auto rng_bpsk = substream(seed, trial, kTagPilotBpsk);
  std::uniform_int_distribution<int> coin(0, 1);
  out.data_pilots = Eigen::MatrixXcd::Zero(u, w);
  const double amp = std::sqrt(cfg.es);
  for (int k : plan.pilot)
    for (int uu = 0; uu < u; ++uu)
      out.data_pilots(uu, k) = coin(rng_bpsk) ? amp : -amp;
  for (int l = 0; l < d; ++l)
    for (int k : plan.pilot)
      for (int uu = 0; uu < u; ++uu)
        out.frames.slices[k](uu, u + l) = out.data_pilots(uu, k);

  // Per-user coded payload.
  auto rng_bits = substream(seed, trial, kTagBits);
  out.info_bits.resize(u);
  out.perms.resize(u);
  const int n_data = static_cast<int>(plan.data.size());
  for (int uu = 0; uu < u; ++uu) {
    out.info_bits[uu].resize(pplan.info_bits);
    for (auto& b : out.info_bits[uu])
      b = static_cast<std::uint8_t>(coin(rng_bits));
    auto coded = encode(out.info_bits[uu], code, pplan);
    auto rng_perm = substream(seed, trial, kTagInterleaver + uu);
    out.perms[uu] = random_permutation(pplan.coded_bits, rng_perm);
    auto inter = interleave<std::uint8_t>(coded, out.perms[uu]);
    auto symbols = map_bits(inter, constel);
    for (int l = 0; l < d; ++l)
      for (int di = 0; di < n_data; ++di)
        out.frames.slices[plan.data[di]](uu, u + l) =
            symbols[static_cast<std::size_t>(l) * n_data + di];
  }
  return out;
}

RxFrame slice_symbols(const RxFrame& rx, int begin, int count) {
  RxFrame out;
  out.spec = rx.spec;
  out.t_total = count;
  out.labels.reserve(rx.labels.size());
  for (const auto& lf : rx.labels)
    out.labels.push_back({lf.re.middleCols(begin, count),
                          lf.im.middleCols(begin, count)});
  out.unquantized.reserve(rx.unquantized.size());
  for (const auto& y : rx.unquantized)
    out.unquantized.push_back(y.middleCols(begin, count));
  return out;
}

}  // namespace

QuantizerSpec quantizer_for_config(const SystemConfig& cfg, const TonePlan& plan,
                                   std::uint64_t seed) {
  if (cfg.qbits == 0) return QuantizerSpec{};

  const CodeConfig code;
  const PacketPlan pplan = PacketPlan::make(plan, 4, cfg.data_symbols);
  const Constellation constel = Constellation::qam(16, cfg.es);

  // Offline density acquisition: synthetic received samples from the same
  // frame generator, real and imaginary parts pooled.
  std::vector<double> samples;
  const std::size_t want = 100000;
  samples.reserve(want + 2ull * cfg.antennas * cfg.subcarriers * cfg.t_total());
  std::uint64_t trial = 0;
  while (samples.size() < want) {
    auto tf = build_trial_frames(cfg, plan, code, pplan, constel, seed,
                                 kTagQuantDesign + trial);
    auto rng_ch = substream(seed, kTagQuantDesign + trial, kTagChannel);
    auto rng_noise = substream(seed, kTagQuantDesign + trial, kTagNoise);
    auto channel = draw_channel(cfg, rng_ch);
    QuantizerSpec inf_spec;  // infinite precision: keep raw samples
    RxFrame rx = transmit(tf.frames, channel, cfg, inf_spec, rng_noise, true);
    for (const auto& y : rx.unquantized)
      for (Eigen::Index j = 0; j < y.cols(); ++j)
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
          samples.push_back(y(i, j).real());
          samples.push_back(y(i, j).imag());
        }
    ++trial;
  }

  QuantizerSpec spec = design_lloyd_max(samples, cfg.qbits);
  // Conditional moments under the Gaussian received density.
  double rx_power = cfg.users * cfg.es * cfg.taps / cfg.subcarriers + cfg.n0;
  fill_moments_gaussian(spec, std::sqrt(rx_power / 2.0));
  return spec;
}

PerResult run_per_point(const SystemConfig& cfg_in, ReceiverKind receiver,
                        double snr_db, const SimOptions& opt) {
  auto t_start = std::chrono::steady_clock::now();
  SystemConfig cfg = cfg_in;
  cfg.seed = opt.seed;
  cfg.n0 = snr_to_n0(cfg, snr_db);
  if (receiver == ReceiverKind::Unquantized) cfg.qbits = 0;
  validate(cfg);

  const TonePlan plan = build_tone_plan(cfg.subcarriers);
  const CodeConfig code;
  const PacketPlan pplan = PacketPlan::make(plan, 4, cfg.data_symbols);
  const Constellation constel = Constellation::qam(16, cfg.es);
  const QuantizerSpec spec = quantizer_for_config(cfg, plan, opt.seed);
  const int n_data = static_cast<int>(plan.data.size());
  const bool store_unq =
      cfg.qbits == 0 || receiver == ReceiverKind::Unquantized;

  PerResult res;
  res.receiver = receiver;
  res.cfg = cfg;
  res.snr_db = snr_db;
  res.per_user_errors.assign(cfg.users, 0);

  int trial = 0;
  for (; trial < opt.trials; ++trial) {
    auto tf = build_trial_frames(cfg, plan, code, pplan, constel, opt.seed,
                                 static_cast<std::uint64_t>(trial));
    auto rng_ch = substream(opt.seed, trial, kTagChannel);
    auto rng_noise = substream(opt.seed, trial, kTagNoise);
    auto channel = draw_channel(cfg, rng_ch);
    RxFrame rx = transmit(tf.frames, channel, cfg, spec, rng_noise, store_unq);

    ChestConfig chest;
    chest.kind = receiver;
    chest.support = cfg.cp_support;
    chest.prior_variance = opt.prior_variance;
    chest.tol = opt.tol;
    chest.max_iter = opt.max_iter;
    RxFrame train = slice_symbols(rx, 0, cfg.users);
    ChestResult ch = estimate(train, tf.book, cfg, chest, plan);
    if (!ch.converged) ++res.nonconverged_solves;

    // Per-user LLR streams across the D data symbols.
    std::vector<std::vector<double>> llr(cfg.users,
                                         std::vector<double>(pplan.coded_bits));
    DetectOptions dopt{receiver, opt.tol, opt.max_iter};
    for (int l = 0; l < cfg.data_symbols; ++l) {
      DetectionResult det = detect(rx, cfg.users + l, ch.h_freq, cfg, plan,
                                   tf.data_pilots, dopt);
      if (!det.converged) ++res.nonconverged_solves;
      auto llrs = llr_maxlog(det.s_hat, det.rho, constel);
      for (int uu = 0; uu < cfg.users; ++uu)
        for (int di = 0; di < n_data; ++di)
          for (int b = 0; b < constel.bits_per_symbol; ++b)
            llr[uu][(static_cast<std::size_t>(l) * n_data + di) *
                        constel.bits_per_symbol +
                    b] = llrs[b](uu, plan.data[di]);
    }

    for (int uu = 0; uu < cfg.users; ++uu) {
      auto deint = deinterleave<double>(llr[uu], tf.perms[uu]);
      auto decoded = viterbi_soft(deint, code, pplan);
      if (decoded != tf.info_bits[uu]) {
        ++res.per_user_errors[uu];
        ++res.packet_errors;
      }
    }
    if (opt.early_stop_errors > 0 &&
        res.packet_errors >= opt.early_stop_errors)
      break;
  }
  res.trials = std::min(trial + 1, opt.trials);

  const double n = static_cast<double>(res.trials) * cfg.users;
  res.per = res.packet_errors / n;
  res.stderr_ = std::sqrt(std::max(res.per * (1.0 - res.per), 0.0) / n);
  res.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return res;
}

OperatingPoint bisect_operating_point(
    const std::function<PerResult(double, bool)>& eval, double snr_lo,
    double snr_hi, double target, double resolution) {
  if (!(snr_lo < snr_hi))
    throw std::invalid_argument("operating point: need snr_lo < snr_hi");

  OperatingPoint op;
  op.lower = eval(snr_lo, true);
  if (!(op.lower.per > target))
    throw std::runtime_error("bracket invalid: PER(snr_lo) <= target");
  op.upper = eval(snr_hi, false);
  if (!(op.upper.per <= target))
    throw std::runtime_error("bracket invalid: PER(snr_hi) > target");

  double lo = snr_lo, hi = snr_hi;
  while (hi - lo > resolution) {
    double mid = 0.5 * (lo + hi);
    PerResult r = eval(mid, true);
    if (r.per > target) {
      lo = mid;
      op.lower = r;
    } else {
      // Re-measure without early stopping so the retained bracket is exact.
      if (r.trials != op.upper.trials) r = eval(mid, false);
      hi = mid;
      op.upper = r;
    }
  }
  op.snr_db = hi;
  // Brackets closer than two standard errors are statistically ambiguous.
  double sep = op.lower.per - op.upper.per;
  if (sep < 2.0 * (op.lower.stderr_ + op.upper.stderr_)) op.bracket_warning = true;
  return op;
}

OperatingPoint snr_operating_point(const SystemConfig& cfg,
                                   ReceiverKind receiver, double snr_lo,
                                   double snr_hi, const SimOptions& opt,
                                   double target, double resolution) {
  SimOptions fast = opt;
  if (opt.early_stop_errors == 0) {
    // PER > target is already certain once this many errors accumulate.
    fast.early_stop_errors =
        static_cast<int>(std::floor(target * opt.trials * cfg.users)) + 1;
  }
  auto eval = [&](double snr, bool quick) {
    return run_per_point(cfg, receiver, snr, quick ? fast : opt);
  };
  OperatingPoint op =
      bisect_operating_point(eval, snr_lo, snr_hi, target, resolution);
  op.receiver = receiver;
  op.qbits = receiver == ReceiverKind::Unquantized ? 0 : cfg.qbits;
  return op;
}

std::string csv_header() {
  return "receiver,B,U,W,L,P,D,qbits,snr_db,trials,packet_errors,per,stderr,seed";
}

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string csv_row(const PerResult& r) {
  std::ostringstream os;
  os << receiver_name(r.receiver) << ',' << r.cfg.antennas << ','
     << r.cfg.users << ',' << r.cfg.subcarriers << ',' << r.cfg.taps << ','
     << r.cfg.cp_support << ',' << r.cfg.data_symbols << ',' << r.cfg.qbits
     << ',' << fmt6(r.snr_db) << ',' << r.trials << ',' << r.packet_errors
     << ',' << fmt6(r.per) << ',' << fmt6(r.stderr_) << ',' << r.cfg.seed;
  return os.str();
}

int run_tradeoff(const SystemConfig& cfg,
                 const std::vector<ReceiverKind>& receivers,
                 const std::vector<int>& qbits_list, const std::string& out_path,
                 const SimOptions& opt, double snr_lo, double snr_hi) {
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("run_tradeoff: cannot open " + out_path);
  out << csv_header() << '\n';

  int rows = 0;
  for (ReceiverKind receiver : receivers) {
    for (int qb : qbits_list) {
      SystemConfig c = cfg;
      c.qbits = qb;
      OperatingPoint op =
          snr_operating_point(c, receiver, snr_lo, snr_hi, opt);
      PerResult row = op.upper;
      row.snr_db = op.snr_db;
      out << csv_row(row) << '\n';
      out.flush();
      ++rows;
    }
  }
  if (!qbits_list.empty()) {
    SystemConfig c = cfg;
    c.qbits = 0;
    OperatingPoint op = snr_operating_point(c, ReceiverKind::Unquantized,
                                            snr_lo, snr_hi, opt);
    PerResult row = op.upper;
    row.snr_db = op.snr_db;
    out << csv_row(row) << '\n';
    ++rows;
  }
  if (!out) throw std::runtime_error("run_tradeoff: write failed");
  return rows;
}

SystemConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  SystemConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (eq == std::string::npos) {
      if (!trim(line).empty())
        throw std::runtime_error("config: bad line " + std::to_string(lineno));
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "users") cfg.users = std::stoi(val);
      else if (key == "antennas") cfg.antennas = std::stoi(val);
      else if (key == "subcarriers") cfg.subcarriers = std::stoi(val);
      else if (key == "taps") cfg.taps = std::stoi(val);
      else if (key == "cp_support") cfg.cp_support = std::stoi(val);
      else if (key == "qbits") cfg.qbits = std::stoi(val);
      else if (key == "es") cfg.es = std::stod(val);
      else if (key == "n0") cfg.n0 = std::stod(val);
      else if (key == "data_symbols") cfg.data_symbols = std::stoi(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else throw std::runtime_error("config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("config: bad value for '" + key + "'");
    }
  }
  return cfg;
}

}  // namespace qmimo
