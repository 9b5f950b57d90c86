#include "qmimo/fbs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

namespace qmimo {

namespace {

constexpr int kLineSearchWindow = 10;
constexpr double kShrink = 0.5;

void check_finite(const Eigen::VectorXcd& x, const char* where) {
  if (!x.allFinite())
    throw std::runtime_error(std::string("fbs_solve: non-finite iterate in ") +
                             where);
}

}  // namespace

FbsReport fbs_solve(const FbsProblem& p) {
  auto eval = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& g) -> double {
    if (p.value_and_grad) return p.value_and_grad(x, g);
    g = p.grad(x);
    return p.value(x);
  };
  auto eval_value = [&](const Eigen::VectorXcd& x) -> double {
    if (p.value) return p.value(x);
    Eigen::VectorXcd g;
    return p.value_and_grad(x, g);
  };

  Eigen::VectorXcd x = p.x0;
  Eigen::VectorXcd g(x.size());
  double fx = eval(x, g);

  double tau = p.step0;
  if (tau <= 0.0) {
    // Lipschitz probe on two nearby points.
    std::mt19937_64 rng(0x9d5ad1fULL);
    Eigen::VectorXcd d(x.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = randn_c(rng);
    double scale = 1e-3 * std::max(1.0, x.norm()) / d.norm();
    d *= scale;
    Eigen::VectorXcd g2(x.size());
    eval(x + d, g2);
    double lhat = (g2 - g).norm() / d.norm();
    tau = (lhat > 1e-12) ? 10.0 / lhat : 1.0;
  }

  FbsReport rep;
  rep.objective.push_back(fx);
  std::deque<double> window{fx};

  for (int k = 0; k < p.max_iter; ++k) {
    double fmax = *std::max_element(window.begin(), window.end());
    Eigen::VectorXcd x_new;
    Eigen::VectorXcd dx;
    double f_new = 0.0;
    for (int bt = 0;; ++bt) {
      x_new = p.prox(x - tau * g, tau);
      dx = x_new - x;
      f_new = eval_value(x_new);
      double quad = fmax + (g.dot(dx)).real() + dx.squaredNorm() / (2.0 * tau);
      if (f_new <= quad + 1e-12 * std::abs(fmax) + 1e-300) break;
      tau *= kShrink;
      if (bt > 60 || tau < 1e-20)
        throw std::runtime_error("fbs_solve: line search failed");
    }
    check_finite(x_new, "iterate");

    double residual = dx.norm() / std::max(1.0, x.norm());
    Eigen::VectorXcd g_new(x.size());
    double f_chk = eval(x_new, g_new);
    (void)f_chk;

    // Spectral (Barzilai-Borwein) step for the next iteration.
    Eigen::VectorXcd dg = g_new - g;
    double sy = (dx.dot(dg)).real();
    if (sy > 1e-30) {
      double ss = dx.squaredNorm();
      double yy = dg.squaredNorm();
      double tau_s = ss / sy;      // steepest descent
      double tau_m = sy / yy;      // minimum residual
      double t = (2.0 * tau_m > tau_s) ? tau_m : tau_s - 0.5 * tau_m;
      if (std::isfinite(t) && t > 0.0) tau = t;
    } else {
      tau *= 1.5;
    }

    x = std::move(x_new);
    g = std::move(g_new);
    rep.objective.push_back(f_new);
    window.push_back(f_new);
    if (static_cast<int>(window.size()) > kLineSearchWindow) window.pop_front();
    rep.iterations = k + 1;
    rep.residual = residual;
    if (residual <= p.tol) {
      rep.converged = true;
      break;
    }
  }
  rep.x = std::move(x);
  return rep;
}

MatSeq prox_time_support(const MatSeq& h_freq, int p) {
  MatSeq taps = freq_to_taps(h_freq);
  const int w = static_cast<int>(taps.size());
  for (int t = p; t < w; ++t) taps[t].setZero();
  return taps_to_freq(taps);
}

Eigen::VectorXcd prox_time_support_vec(const Eigen::VectorXcd& h_freq, int p) {
  Eigen::VectorXcd taps = freq_to_taps_vec(h_freq);
  taps.tail(taps.size() - p).setZero();
  return taps_to_freq_vec(taps);
}

Eigen::MatrixXcd prox_pin_pilots(const Eigen::MatrixXcd& s_freq,
                                 const Eigen::MatrixXcd& pilots,
                                 const TonePlan& plan) {
  Eigen::MatrixXcd out = s_freq;
  for (int wi : plan.pilot) out.col(wi) = pilots.col(wi);
  for (int wi : plan.guard) out.col(wi).setZero();
  return out;
}

}  // namespace qmimo
