#include "qmimo/chest.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace qmimo {

const char* receiver_name(ReceiverKind kind) {
  switch (kind) {
    case ReceiverKind::Exact: return "quantizer";
    case ReceiverKind::Mismatch1: return "mismatch1";
    case ReceiverKind::Mismatch2: return "mismatch2";
    case ReceiverKind::Unquantized: return "unquantized";
  }
  return "?";
}

ReceiverKind receiver_from_name(const std::string& name) {
  if (name == "quantizer") return ReceiverKind::Exact;
  if (name == "mismatch1") return ReceiverKind::Mismatch1;
  if (name == "mismatch2") return ReceiverKind::Mismatch2;
  if (name == "unquantized") return ReceiverKind::Unquantized;
  throw std::invalid_argument("unknown receiver: " + name);
}

namespace {

Eigen::MatrixXcd hadamard(int u) {
  Eigen::MatrixXcd h(1, 1);
  h(0, 0) = 1.0;
  while (h.rows() < u) {
    Eigen::MatrixXcd next(2 * h.rows(), 2 * h.cols());
    next << h, h, h, -h;
    h = std::move(next);
  }
  return h;
}

}  // namespace

PilotBook gen_pilots(int users, const TonePlan& plan, double es,
                     std::mt19937_64& rng, bool qpsk_rotate) {
  PilotBook book;
  book.es = es;
  book.tones.assign(plan.w, Eigen::MatrixXcd::Zero(users, users));
  const bool pow2 = (users & (users - 1)) == 0;
  book.hadamard = pow2;

  Eigen::MatrixXcd base;
  if (pow2) {
    base = hadamard(users) * std::sqrt(es);
  } else {
    // Random unitary scaled so that T T^H = (U Es) I still holds.
    Eigen::MatrixXcd g(users, users);
    for (int j = 0; j < users; ++j)
      for (int i = 0; i < users; ++i) g(i, j) = randn_c(rng);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    base = qr.householderQ() * Eigen::MatrixXcd::Identity(users, users);
    base *= std::sqrt(static_cast<double>(users) * es);
  }

  auto flip = [&](int n) {
    Eigen::VectorXcd d(n);
    std::uniform_int_distribution<int> coin(0, qpsk_rotate ? 3 : 1);
    static const cplx phases[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (int i = 0; i < n; ++i) d[i] = phases[coin(rng)];
    return d;
  };

  auto fill = [&](int wi) {
    book.tones[wi] =
        flip(users).asDiagonal() * base * flip(users).asDiagonal();
  };
  for (int wi : plan.pilot) fill(wi);
  for (int wi : plan.data) fill(wi);
  return book;
}

namespace {

// Shared joint-FBS geometry of (Q-CHE): variables are all W per-tone B x U
// matrices, the forward map is per-tone right-multiplication by T_w followed
// by reorientation and an inverse DFT per antenna/symbol.  EntryFn maps one
// time-domain sample to (nll value, gradient); it sees (antenna, sample row,
// symbol col, z).
template <typename EntryFn>
class JointChestOracle {
 public:
  JointChestOracle(const PilotBook& pilots, const SystemConfig& cfg,
                   int t_train, double prior_c0, EntryFn fn)
      : pilots_(pilots), cfg_(cfg), t_train_(t_train), c0_(prior_c0),
        fn_(std::move(fn)),
        ant_(cfg.antennas, Eigen::MatrixXcd(cfg.subcarriers, t_train)),
        zw_(cfg.antennas, t_train), gw_(cfg.antennas, t_train) {}

  double operator()(const Eigen::VectorXcd& x, Eigen::VectorXcd* grad) {
    const int w = cfg_.subcarriers;
    const int b_ant = cfg_.antennas;
    const int u = cfg_.users;
    for (int k = 0; k < w; ++k) {
      Eigen::Map<const Eigen::MatrixXcd> hk(x.data() + k * b_ant * u, b_ant, u);
      zw_.noalias() = hk * pilots_.tones[k];
      for (int b = 0; b < b_ant; ++b) ant_[b].row(k) = zw_.row(b);
    }
    double value = 0.0;
    for (int b = 0; b < b_ant; ++b) {
      idft_cols_inplace(ant_[b]);
      for (int l = 0; l < t_train_; ++l)
        for (int k = 0; k < w; ++k) {
          cplx g;
          value += fn_(b, k, l, ant_[b](k, l), grad != nullptr, g);
          if (grad) ant_[b](k, l) = g;
        }
      if (grad) dft_cols_inplace(ant_[b]);
    }
    if (grad) {
      for (int k = 0; k < w; ++k) {
        for (int b = 0; b < b_ant; ++b) gw_.row(b) = ant_[b].row(k);
        Eigen::Map<Eigen::MatrixXcd> gk(grad->data() + k * b_ant * u, b_ant, u);
        gk.noalias() = gw_ * pilots_.tones[k].adjoint();
      }
    }
    if (c0_ > 0.0) {
      value += x.squaredNorm() / c0_;
      if (grad) *grad += (2.0 / c0_) * x;
    }
    return value;
  }

 private:
  const PilotBook& pilots_;
  const SystemConfig& cfg_;
  int t_train_;
  double c0_;
  EntryFn fn_;
  std::vector<Eigen::MatrixXcd> ant_;
  Eigen::MatrixXcd zw_;
  Eigen::MatrixXcd gw_;
};

template <typename EntryFn>
ChestResult solve_joint(const RxFrame& rx, const PilotBook& pilots,
                        const SystemConfig& cfg, const ChestConfig& chest,
                        EntryFn fn) {
  const int w = cfg.subcarriers;
  const int bu = cfg.antennas * cfg.users;
  auto oracle = std::make_shared<JointChestOracle<EntryFn>>(
      pilots, cfg, rx.t_total, chest.prior_variance, std::move(fn));
  // Pre-size the per-tone scratch.
  FbsProblem p;
  p.dim = static_cast<Eigen::Index>(w) * bu;
  p.x0 = Eigen::VectorXcd::Zero(p.dim);
  p.tol = chest.tol;
  p.max_iter = chest.max_iter;
  p.value = [oracle](const Eigen::VectorXcd& x) { return (*oracle)(x, nullptr); };
  p.value_and_grad = [oracle](const Eigen::VectorXcd& x, Eigen::VectorXcd& g) {
    g.resize(x.size());
    return (*oracle)(x, &g);
  };
  p.prox = [&cfg, &chest, w, bu](const Eigen::VectorXcd& x, double) {
    MatSeq h(w);
    for (int k = 0; k < w; ++k)
      h[k] = Eigen::Map<const Eigen::MatrixXcd>(x.data() + k * bu,
                                                cfg.antennas, cfg.users);
    MatSeq out = prox_time_support(h, chest.support);
    Eigen::VectorXcd y(x.size());
    for (int k = 0; k < w; ++k)
      Eigen::Map<Eigen::MatrixXcd>(y.data() + k * bu, cfg.antennas,
                                   cfg.users) = out[k];
    return y;
  };
  FbsReport rep = fbs_solve(p);

  ChestResult res;
  res.iterations = rep.iterations;
  res.converged = rep.converged;
  res.h_freq.resize(w);
  for (int k = 0; k < w; ++k)
    res.h_freq[k] = Eigen::Map<const Eigen::MatrixXcd>(
        rep.x.data() + k * bu, cfg.antennas, cfg.users);
  return res;
}

ChestResult solve_mismatch2(const RxFrame& rx, const PilotBook& pilots,
                            const SystemConfig& cfg, const ChestConfig& chest,
                            const TonePlan& plan) {
  const int w = cfg.subcarriers;
  const int b_ant = cfg.antennas;
  const int u = cfg.users;
  const int t = rx.t_total;
  const bool from_labels = !rx.spec.infinite();

  // Frequency-domain centroid observations, then per-tone unmixing.  With
  // infinite precision the samples themselves are the observations.
  std::vector<Eigen::MatrixXcd> freq(b_ant);
  for (int b = 0; b < b_ant; ++b) {
    Eigen::MatrixXcd y(w, t);
    if (from_labels) {
      for (int l = 0; l < t; ++l)
        for (int k = 0; k < w; ++k) {
          QuantLabel q{rx.labels[b].re(k, l), rx.labels[b].im(k, l)};
          y(k, l) = mismatch1_observe(q, rx.spec).y;
        }
    } else {
      y = rx.unquantized[b];
    }
    dft_cols_inplace(y);
    freq[b] = std::move(y);
  }
  std::vector<char> observed(w, 0);
  for (int wi : plan.pilot) observed[wi] = 1;
  for (int wi : plan.data) observed[wi] = 1;

  MatSeq raw(w, Eigen::MatrixXcd::Zero(b_ant, u));
  const double unmix = 1.0 / (u * pilots.es);
  for (int k = 0; k < w; ++k) {
    if (!observed[k]) continue;
    Eigen::MatrixXcd yw(b_ant, t);
    for (int b = 0; b < b_ant; ++b) yw.row(b) = freq[b].row(k);
    raw[k].noalias() = yw * pilots.tones[k].adjoint() * unmix;
  }

  // One P-tap-constrained least-squares solve per (antenna, user) link.
  ChestResult res;
  res.h_freq.assign(w, Eigen::MatrixXcd::Zero(b_ant, u));
  res.converged = true;
  for (int b = 0; b < b_ant; ++b) {
    for (int uu = 0; uu < u; ++uu) {
      Eigen::VectorXcd v(w);
      for (int k = 0; k < w; ++k) v[k] = raw[k](b, uu);
      FbsProblem p;
      p.dim = w;
      p.x0 = Eigen::VectorXcd::Zero(w);
      p.tol = chest.tol;
      p.max_iter = chest.max_iter;
      p.value = [&](const Eigen::VectorXcd& x) {
        double acc = 0.0;
        for (int k = 0; k < w; ++k)
          if (observed[k]) acc += std::norm(x[k] - v[k]);
        return acc;
      };
      p.grad = [&](const Eigen::VectorXcd& x) {
        Eigen::VectorXcd g = Eigen::VectorXcd::Zero(w);
        for (int k = 0; k < w; ++k)
          if (observed[k]) g[k] = 2.0 * (x[k] - v[k]);
        return g;
      };
      p.prox = [&](const Eigen::VectorXcd& x, double) {
        return prox_time_support_vec(x, chest.support);
      };
      FbsReport rep = fbs_solve(p);
      res.converged = res.converged && rep.converged;
      res.iterations = std::max(res.iterations, rep.iterations);
      for (int k = 0; k < w; ++k) res.h_freq[k](b, uu) = rep.x[k];
    }
  }
  return res;
}

}  // namespace

ChestResult estimate(const RxFrame& rx, const PilotBook& pilots,
                     const SystemConfig& cfg, const ChestConfig& chest,
                     const TonePlan& plan) {
  if (rx.t_total != cfg.users)
    throw std::invalid_argument("estimate: training block must have U symbols");
  const NoiseModel noise(cfg.n0);
  const bool infinite = rx.spec.infinite();

  ReceiverKind kind = chest.kind;
  if (infinite && kind != ReceiverKind::Mismatch2) kind = ReceiverKind::Unquantized;

  switch (kind) {
    case ReceiverKind::Exact: {
      const QuantizerSpec& spec = rx.spec;
      auto fn = [&rx, &spec, noise](int b, int k, int l, cplx z, bool want_grad,
                                    cplx& g) {
        QuantLabel q{rx.labels[b].re(k, l), rx.labels[b].im(k, l)};
        if (want_grad) return nll_and_grad_exact(q, z, noise, spec, g);
        return nll_exact(q, z, noise, spec);
      };
      return solve_joint(rx, pilots, cfg, chest, fn);
    }
    case ReceiverKind::Mismatch1: {
      // Labels are fixed over the solve; precompute per-sample moments.
      const int b_ant = cfg.antennas;
      std::vector<Eigen::MatrixXcd> y(b_ant);
      std::vector<Eigen::MatrixXd> inv(b_ant), logc(b_ant);
      for (int b = 0; b < b_ant; ++b) {
        y[b].resize(cfg.subcarriers, rx.t_total);
        inv[b].resize(cfg.subcarriers, rx.t_total);
        logc[b].resize(cfg.subcarriers, rx.t_total);
        for (int l = 0; l < rx.t_total; ++l)
          for (int k = 0; k < cfg.subcarriers; ++k) {
            QuantLabel q{rx.labels[b].re(k, l), rx.labels[b].im(k, l)};
            auto obs = mismatch1_observe(q, rx.spec);
            double denom = cfg.n0 + obs.gamma2;
            y[b](k, l) = obs.y;
            inv[b](k, l) = 1.0 / denom;
            logc[b](k, l) = std::log(kPi * denom);
          }
      }
      auto fn = [y = std::move(y), inv = std::move(inv), logc = std::move(logc)](
                    int b, int k, int l, cplx z, bool want_grad, cplx& g) {
        cplx r = z - y[b](k, l);
        double iv = inv[b](k, l);
        if (want_grad) g = 2.0 * iv * r;
        return std::norm(r) * iv + logc[b](k, l);
      };
      return solve_joint(rx, pilots, cfg, chest, fn);
    }
    case ReceiverKind::Unquantized: {
      if (!rx.has_unquantized())
        throw std::invalid_argument(
            "estimate: unquantized baseline requires stored samples");
      double inv_n0 = 1.0 / cfg.n0;
      auto fn = [&rx, inv_n0](int b, int k, int l, cplx z, bool want_grad,
                              cplx& g) {
        cplx r = z - rx.unquantized[b](k, l);
        if (want_grad) g = 2.0 * inv_n0 * r;
        return std::norm(r) * inv_n0;
      };
      return solve_joint(rx, pilots, cfg, chest, fn);
    }
    case ReceiverKind::Mismatch2:
      if (infinite && !rx.has_unquantized())
        throw std::invalid_argument(
            "estimate: unquantized baseline requires stored samples");
      return solve_mismatch2(rx, pilots, cfg, chest, plan);
  }
  throw std::logic_error("estimate: unreachable");
}

double chest_mse(const MatSeq& estimate, const MatSeq& truth) {
  if (estimate.size() != truth.size())
    throw std::invalid_argument("chest_mse: shape mismatch");
  double acc = 0.0;
  double n = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (estimate[k].rows() != truth[k].rows() ||
        estimate[k].cols() != truth[k].cols())
      throw std::invalid_argument("chest_mse: shape mismatch");
    acc += (estimate[k] - truth[k]).squaredNorm();
    n += static_cast<double>(truth[k].size());
  }
  return acc / n;
}

}  // namespace qmimo
