// Command-line front end: single PER points and rate-distortion sweeps.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qmimo/sim.hpp"

namespace {

int cmd_simulate(const std::string& config_path, const std::string& receiver,
                 int qbits, double snr_db, int trials, std::uint64_t seed,
                 const std::string& out_path) {
  qmimo::SystemConfig cfg = qmimo::parse_config_file(config_path);
  cfg.qbits = qbits;
  qmimo::ReceiverKind kind = qmimo::receiver_from_name(receiver);

  qmimo::SimOptions opt;
  opt.trials = trials;
  opt.seed = seed;
  qmimo::PerResult res = qmimo::run_per_point(cfg, kind, snr_db, opt);

  std::string row = qmimo::csv_row(res);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "cannot open output file: " << out_path << "\n";
      return 1;
    }
    out << qmimo::csv_header() << '\n' << row << '\n';
  }
  std::cout << qmimo::csv_header() << '\n' << row << '\n';
  if (res.nonconverged_solves > 0)
    std::cerr << "warning: " << res.nonconverged_solves
              << " solver runs hit the iteration cap\n";
  return 0;
}

int cmd_tradeoff(const std::string& config_path, const std::string& out_path,
                 const std::vector<std::string>& receivers,
                 std::vector<int> qbits_list, int trials, std::uint64_t seed,
                 double snr_lo, double snr_hi) {
  qmimo::SystemConfig cfg = qmimo::parse_config_file(config_path);
  std::vector<qmimo::ReceiverKind> kinds;
  for (const auto& r : receivers) kinds.push_back(qmimo::receiver_from_name(r));

  qmimo::SimOptions opt;
  opt.trials = trials;
  opt.seed = seed;
  int rows = qmimo::run_tradeoff(cfg, kinds, qbits_list, out_path, opt,
                                 snr_lo, snr_hi);
  std::cout << "wrote " << rows << " rows to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized multi-user MIMO-OFDM uplink simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, receiver = "quantizer";
  int qbits = 4, trials = 1000;
  double snr_db = 10.0, snr_lo = -10.0, snr_hi = 20.0;
  std::uint64_t seed = 0;
  std::vector<std::string> receivers = {"quantizer", "mismatch2"};
  std::vector<int> qbits_list = {3, 4, 5, 6, 8};

  auto* sim = app.add_subcommand("simulate", "One PER point");
  sim->add_option("--config", config_path, "flat key=value config file")
      ->required();
  sim->add_option("--receiver", receiver,
                  "quantizer|mismatch1|mismatch2|unquantized");
  sim->add_option("--qbits", qbits, "bits per real dimension (0 = infinite)");
  sim->add_option("--snr-db", snr_db, "receive SNR in dB");
  sim->add_option("--trials", trials, "Monte-Carlo trials");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--out", out_path, "CSV output file");

  auto* tr = app.add_subcommand("tradeoff", "SNR operating points vs qbits");
  tr->add_option("--config", config_path, "flat key=value config file")
      ->required();
  tr->add_option("--out", out_path, "CSV output file")->required();
  tr->add_option("--receivers", receivers, "receiver list");
  tr->add_option("--qbits-list", qbits_list, "quantizer resolutions to sweep");
  tr->add_option("--trials", trials, "Monte-Carlo trials per PER point");
  tr->add_option("--seed", seed, "RNG seed");
  tr->add_option("--snr-lo", snr_lo, "lower SNR bracket (dB)");
  tr->add_option("--snr-hi", snr_hi, "upper SNR bracket (dB)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(config_path, receiver, qbits, snr_db, trials, seed,
                          out_path);
    return cmd_tradeoff(config_path, out_path, receivers, qbits_list, trials,
                        seed, snr_lo, snr_hi);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
