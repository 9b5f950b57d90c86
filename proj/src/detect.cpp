#include "qmimo/detect.hpp"

#include <cmath>
#include <memory>
#include <limits>
#include <stdexcept>

namespace qmimo {

namespace {

// Joint (Q-DET) solve: variables are the per-tone U-vectors s_w stacked as a
// U x W matrix.  EntryFn maps one time-domain sample (antenna, row) to the
// nll value and gradient.
template <typename EntryFn>
DetectionResult solve_joint_det(const RxFrame& rx, int symbol,
                                const MatSeq& h_freq, const SystemConfig& cfg,
                                const TonePlan& plan,
                                const Eigen::MatrixXcd& pilots,
                                const DetectOptions& opt, EntryFn fn) {
  const int w = cfg.subcarriers;
  const int b_ant = cfg.antennas;
  const int u = cfg.users;
  const double inv_es = 1.0 / cfg.es;

  std::vector<char> is_data(w, 0);
  for (int wi : plan.data) is_data[wi] = 1;

  // Scratch: time/frequency samples, one column per antenna.
  auto ant = std::make_shared<Eigen::MatrixXcd>(w, b_ant);

  auto eval = [&rx, &h_freq, &cfg, fn = std::move(fn), ant, is_data, inv_es,
               symbol, w, b_ant, u](const Eigen::VectorXcd& x,
                                    Eigen::VectorXcd* grad) -> double {
    Eigen::Map<const Eigen::MatrixXcd> s(x.data(), u, w);
    for (int k = 0; k < w; ++k)
      ant->row(k) = (h_freq[k] * s.col(k)).transpose();
    idft_cols_inplace(*ant);
    double value = 0.0;
    for (int b = 0; b < b_ant; ++b)
      for (int k = 0; k < w; ++k) {
        cplx g;
        value += fn(b, k, (*ant)(k, b), grad != nullptr, g);
        if (grad) (*ant)(k, b) = g;
      }
    if (grad) {
      dft_cols_inplace(*ant);
      grad->resize(x.size());
      Eigen::Map<Eigen::MatrixXcd> gs(grad->data(), u, w);
      for (int k = 0; k < w; ++k)
        gs.col(k) = h_freq[k].adjoint() * ant->row(k).transpose();
    }
    for (int k = 0; k < w; ++k) {
      if (!is_data[k]) continue;
      value += s.col(k).squaredNorm() * inv_es;
      if (grad)
        Eigen::Map<Eigen::MatrixXcd>(grad->data(), u, w).col(k) +=
            2.0 * inv_es * s.col(k);
    }
    (void)symbol;
    return value;
  };

  FbsProblem p;
  p.dim = static_cast<Eigen::Index>(u) * w;
  p.tol = opt.tol;
  p.max_iter = opt.max_iter;
  p.value = [eval](const Eigen::VectorXcd& x) { return eval(x, nullptr); };
  p.value_and_grad = [eval](const Eigen::VectorXcd& x, Eigen::VectorXcd& g) {
    return eval(x, &g);
  };
  p.prox = [&pilots, &plan, u, w](const Eigen::VectorXcd& x, double) {
    Eigen::Map<const Eigen::MatrixXcd> s(x.data(), u, w);
    Eigen::MatrixXcd out = prox_pin_pilots(s, pilots, plan);
    return Eigen::VectorXcd(Eigen::Map<Eigen::VectorXcd>(out.data(), out.size()));
  };
  p.x0 = p.prox(Eigen::VectorXcd::Zero(p.dim), 1.0);

  FbsReport rep = fbs_solve(p);
  DetectionResult res;
  res.s_hat = Eigen::Map<const Eigen::MatrixXcd>(rep.x.data(), u, w);
  res.rho = Eigen::MatrixXd::Ones(u, w);
  res.iterations = rep.iterations;
  res.converged = rep.converged;
  return res;
}

DetectionResult solve_mmse_per_tone(const RxFrame& rx, int symbol,
                                    const MatSeq& h_freq,
                                    const SystemConfig& cfg,
                                    const TonePlan& plan,
                                    const Eigen::MatrixXcd& pilots,
                                    bool from_labels) {
  const int w = cfg.subcarriers;
  const int b_ant = cfg.antennas;
  const int u = cfg.users;

  // Frequency-domain observations for this symbol, one column per antenna.
  Eigen::MatrixXcd obs(w, b_ant);
  double gamma_bar = 0.0;
  if (from_labels) {
    double acc = 0.0;
    for (int b = 0; b < b_ant; ++b)
      for (int k = 0; k < w; ++k) {
        QuantLabel q{rx.labels[b].re(k, symbol), rx.labels[b].im(k, symbol)};
        auto o = mismatch1_observe(q, rx.spec);
        obs(k, b) = o.y;
        acc += o.gamma2;
      }
    gamma_bar = acc / static_cast<double>(w * b_ant);
  } else {
    for (int b = 0; b < b_ant; ++b) obs.col(b) = rx.unquantized[b].col(symbol);
  }
  dft_cols_inplace(obs);

  DetectionResult res;
  res.s_hat = Eigen::MatrixXcd::Zero(u, w);
  res.rho = Eigen::MatrixXd::Ones(u, w);
  for (int wi : plan.pilot) res.s_hat.col(wi) = pilots.col(wi);

  const double alpha = (cfg.n0 + gamma_bar) / cfg.es;
  Eigen::MatrixXcd gram(u, u), reg(u, u);
  for (int k : plan.data) {
    const Eigen::MatrixXcd& h = h_freq[k];
    gram.noalias() = h.adjoint() * h;
    double a = alpha;
    reg = gram + a * Eigen::MatrixXcd::Identity(u, u);
    Eigen::LDLT<Eigen::MatrixXcd> ldlt(reg);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      a = alpha + 1e-9 * std::max(1.0, gram.real().trace());
      reg = gram + a * Eigen::MatrixXcd::Identity(u, u);
      ldlt.compute(reg);
      res.regularized = true;
    }
    Eigen::VectorXcd yk = obs.row(k).transpose();
    Eigen::VectorXcd shat = ldlt.solve(h.adjoint() * yk);
    // Unbiased per-stream estimate and SINR from the MMSE filter.
    Eigen::MatrixXcd bias = ldlt.solve(gram);
    for (int uu = 0; uu < u; ++uu) {
      double mu = std::max(1e-12, std::min(1.0 - 1e-12, bias(uu, uu).real()));
      res.s_hat(uu, k) = shat[uu] / mu;
      res.rho(uu, k) = mu / (1.0 - mu);
    }
  }
  return res;
}

}  // namespace

DetectionResult detect(const RxFrame& rx, int symbol, const MatSeq& h_freq,
                       const SystemConfig& cfg, const TonePlan& plan,
                       const Eigen::MatrixXcd& pilots,
                       const DetectOptions& opt) {
  if (symbol < 0 || symbol >= rx.t_total)
    throw std::invalid_argument("detect: symbol index out of range");
  const bool infinite = rx.spec.infinite();
  const NoiseModel noise(cfg.n0);

  switch (opt.kind) {
    case ReceiverKind::Exact:
    case ReceiverKind::Mismatch1: {
      if (infinite) {
        // Joint geometry with the Gaussian likelihood of the raw samples.
        double inv_n0 = 1.0 / cfg.n0;
        auto fn = [&rx, symbol, inv_n0](int b, int k, cplx z, bool want_grad,
                                        cplx& g) {
          cplx r = z - rx.unquantized[b](k, symbol);
          if (want_grad) g = 2.0 * inv_n0 * r;
          return std::norm(r) * inv_n0;
        };
        return solve_joint_det(rx, symbol, h_freq, cfg, plan, pilots, opt, fn);
      }
      if (opt.kind == ReceiverKind::Exact) {
        const QuantizerSpec& spec = rx.spec;
        auto fn = [&rx, &spec, noise, symbol](int b, int k, cplx z,
                                              bool want_grad, cplx& g) {
          QuantLabel q{rx.labels[b].re(k, symbol), rx.labels[b].im(k, symbol)};
          if (want_grad) return nll_and_grad_exact(q, z, noise, spec, g);
          return nll_exact(q, z, noise, spec);
        };
        return solve_joint_det(rx, symbol, h_freq, cfg, plan, pilots, opt, fn);
      }
      const QuantizerSpec& spec = rx.spec;
      auto fn = [&rx, &spec, noise, symbol](int b, int k, cplx z,
                                            bool want_grad, cplx& g) {
        QuantLabel q{rx.labels[b].re(k, symbol), rx.labels[b].im(k, symbol)};
        auto o = mismatch1_observe(q, spec);
        double iv = 1.0 / (noise.n0 + o.gamma2);
        cplx r = z - o.y;
        if (want_grad) g = 2.0 * iv * r;
        return std::norm(r) * iv + std::log(kPi / iv);
      };
      return solve_joint_det(rx, symbol, h_freq, cfg, plan, pilots, opt, fn);
    }
    case ReceiverKind::Mismatch2:
      if (infinite)
        return solve_mmse_per_tone(rx, symbol, h_freq, cfg, plan, pilots, false);
      return solve_mmse_per_tone(rx, symbol, h_freq, cfg, plan, pilots, true);
    case ReceiverKind::Unquantized:
      if (!rx.has_unquantized())
        throw std::invalid_argument("detect: baseline requires stored samples");
      return solve_mmse_per_tone(rx, symbol, h_freq, cfg, plan, pilots, false);
  }
  throw std::logic_error("detect: unreachable");
}

std::vector<Eigen::MatrixXd> llr_maxlog(const Eigen::MatrixXcd& s_hat,
                                        const Eigen::MatrixXd& rho,
                                        const Constellation& c) {
  const int nb = c.bits_per_symbol;
  std::vector<Eigen::MatrixXd> llrs(nb,
                                    Eigen::MatrixXd::Zero(s_hat.rows(),
                                                          s_hat.cols()));
  for (Eigen::Index j = 0; j < s_hat.cols(); ++j)
    for (Eigen::Index i = 0; i < s_hat.rows(); ++i) {
      cplx s = s_hat(i, j);
      for (int b = 0; b < nb; ++b) {
        double m0 = std::numeric_limits<double>::infinity();
        double m1 = m0;
        for (int k = 0; k < c.size(); ++k) {
          double d = std::norm(s - c.points[k]);
          if (c.bit(k, b) == 0)
            m0 = std::min(m0, d);
          else
            m1 = std::min(m1, d);
        }
        llrs[b](i, j) = rho(i, j) * (m0 - m1);
      }
    }
  return llrs;
}

Eigen::MatrixXi brute_force_map(const RxFrame& rx, int symbol,
                                const MatSeq& h_freq, const SystemConfig& cfg,
                                const TonePlan& plan,
                                const Eigen::MatrixXcd& pilots,
                                const Constellation& c) {
  const int w = cfg.subcarriers;
  const int b_ant = cfg.antennas;
  const int u = cfg.users;
  const NoiseModel noise(cfg.n0);
  const int slots = u * static_cast<int>(plan.data.size());
  double combos = std::pow(static_cast<double>(c.size()), slots);
  if (combos > 1e6)
    throw std::invalid_argument("brute_force_map: instance too large");

  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(u, w);
  for (int wi : plan.pilot) s.col(wi) = pilots.col(wi);

  std::vector<int> assign(slots, 0);
  Eigen::MatrixXcd ant(w, b_ant);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_assign(slots, 0);

  const long total = static_cast<long>(combos);
  for (long it = 0; it < total; ++it) {
    for (int sl = 0; sl < slots; ++sl)
      s(sl % u, plan.data[sl / u]) = c.points[assign[sl]];
    for (int k = 0; k < w; ++k)
      ant.row(k) = (h_freq[k] * s.col(k)).transpose();
    idft_cols_inplace(ant);
    double obj = 0.0;
    for (int b = 0; b < b_ant && obj < best; ++b)
      for (int k = 0; k < w; ++k) {
        QuantLabel q{rx.labels[b].re(k, symbol), rx.labels[b].im(k, symbol)};
        obj += nll_exact(q, ant(k, b), noise, rx.spec);
      }
    if (obj < best) {
      best = obj;
      best_assign = assign;
    }
    // odometer
    for (int sl = 0; sl < slots; ++sl) {
      if (++assign[sl] < c.size()) break;
      assign[sl] = 0;
    }
  }

  Eigen::MatrixXi out = Eigen::MatrixXi::Constant(u, w, -1);
  for (int sl = 0; sl < slots; ++sl)
    out(sl % u, plan.data[sl / u]) = best_assign[sl];
  return out;
}

}  // namespace qmimo
