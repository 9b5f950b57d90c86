#pragma once

#include <functional>
#include <string>

#include "qmimo/chest.hpp"
#include "qmimo/detect.hpp"
#include "qmimo/phycode.hpp"

namespace qmimo {

struct PerResult {
  ReceiverKind receiver = ReceiverKind::Exact;
  SystemConfig cfg;
  double snr_db = 0.0;
  int trials = 0;
  int packet_errors = 0;  // total over users
  std::vector<int> per_user_errors;
  double per = 0.0;
  double stderr_ = 0.0;  // binomial standard error
  int nonconverged_solves = 0;
  double wall_time = 0.0;
};

struct OperatingPoint {
  ReceiverKind receiver = ReceiverKind::Exact;
  int qbits = 0;
  double snr_db = 0.0;
  PerResult lower;  // PER > target
  PerResult upper;  // PER <= target
  bool bracket_warning = false;
};

struct SimOptions {
  int trials = 1000;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  int max_iter = 500;
  double prior_variance = 0.0;
  // Stop a PER point early once the error count already proves PER > the
  // bisection target regardless of the remaining trials (search use only).
  int early_stop_errors = 0;  // 0 = disabled
};

// Lloyd-Max design against synthetic received samples drawn with the same
// frame generator as the simulator, then Gaussian conditional moments at the
// configured receive power.  qbits == 0 returns an infinite-precision spec.
QuantizerSpec quantizer_for_config(const SystemConfig& cfg, const TonePlan& plan,
                                   std::uint64_t seed);

PerResult run_per_point(const SystemConfig& cfg, ReceiverKind receiver,
                        double snr_db, const SimOptions& opt);

// Bisection core over an arbitrary PER evaluator; `fast` marks probes whose
// exact PER does not matter once it is provably above the target.
OperatingPoint bisect_operating_point(
    const std::function<PerResult(double snr_db, bool fast)>& eval,
    double snr_lo, double snr_hi, double target, double resolution);

// Bisection for the SNR achieving `target` PER at the given resolution.
// Requires PER(snr_lo) > target >= PER(snr_hi).
OperatingPoint snr_operating_point(const SystemConfig& cfg,
                                   ReceiverKind receiver, double snr_lo,
                                   double snr_hi, const SimOptions& opt,
                                   double target = 0.01,
                                   double resolution = 0.25);

// One CSV row per (receiver, qbits) operating point plus an
// infinite-precision baseline row.  Returns the rows written.
int run_tradeoff(const SystemConfig& cfg,
                 const std::vector<ReceiverKind>& receivers,
                 const std::vector<int>& qbits_list, const std::string& out_path,
                 const SimOptions& opt, double snr_lo, double snr_hi);

std::string csv_header();
std::string csv_row(const PerResult& r);

// Flat `key = value` config file; unknown keys are errors.
SystemConfig parse_config_file(const std::string& path);

}  // namespace qmimo
