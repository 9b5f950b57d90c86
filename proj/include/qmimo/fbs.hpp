#pragma once

#include <Eigen/Dense>
#include <functional>

#include "qmimo/ofdm.hpp"

namespace qmimo {

// One convex solve: smooth part h(Ax) supplied as fused value/gradient
// oracles (the composite A^H grad h(Ax) is the caller's job), plus a proximal
// oracle for the non-smooth part.
struct FbsProblem {
  Eigen::Index dim = 0;
  std::function<double(const Eigen::VectorXcd&)> value;
  std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)> grad;
  // Optional fused oracle; when set it is preferred over value+grad.
  std::function<double(const Eigen::VectorXcd&, Eigen::VectorXcd&)> value_and_grad;
  std::function<Eigen::VectorXcd(const Eigen::VectorXcd&, double)> prox;
  Eigen::VectorXcd x0;
  double tol = 1e-6;
  int max_iter = 500;
  double step0 = 0.0;  // 0 = estimate 10/L from a gradient difference
};

struct FbsReport {
  Eigen::VectorXcd x;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> objective;  // smooth-part trace
  bool converged = false;
};

FbsReport fbs_solve(const FbsProblem& problem);

// Projection onto the set of frequency responses supported on at most p taps.
MatSeq prox_time_support(const MatSeq& h_freq, int p);
Eigen::VectorXcd prox_time_support_vec(const Eigen::VectorXcd& h_freq, int p);

// Pin pilot-tone columns of a U x W symbol matrix to the known pilots and
// zero the guard tones; data tones pass through.
Eigen::MatrixXcd prox_pin_pilots(const Eigen::MatrixXcd& s_freq,
                                 const Eigen::MatrixXcd& pilots,
                                 const TonePlan& plan);

}  // namespace qmimo
