// Command-line front end: run, sweep, oracle, validate.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "lpcsim/harness.hpp"

namespace {

using namespace lpcsim;

enum ExitCode { kOk = 0, kRunError = 1, kConfigError = 2, kPartialFailure = 3 };

ExperimentConfig load_or_die(const std::string& path) {
  try {
    auto cfg = load_config(path);
    cfg.validate();
    return cfg;
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& scheme, const std::optional<double>& power,
            const std::optional<std::uint64_t>& seed, const std::optional<double>& pre_edc, const std::optional<std::string>& out) {
  const auto cfg = load_or_die(config_path);
  PointSpec spec{scheme.value_or(cfg.schemes.front()), power.value_or(cfg.launch_dbm.front()), pre_edc.value_or(cfg.pre_edc.front()),
                 seed.value_or(cfg.seeds.front())};
  const auto r = simulate_point(cfg, spec);
  std::cout << kMetricsCsvHeader << '\n' << to_csv_row(r.record) << '\n';
  if (r.record.low_confidence()) std::clog << "note: fewer than " << kMinStableErrors << " bit errors; BER estimate is low-confidence\n";
  if (out) {
    std::filesystem::create_directories(*out);
    write_metrics_csv({r.record}, *out + "/results.csv");
    if (cfg.cpe) write_phase_trace(r.phase, *out + "/phase_" + spec.key() + ".csv");
    if (cfg.dump_constellations) dump_point_constellations(r, spec, *out + "/constellations");
  }
  return kOk;
}

int cmd_sweep(const std::string& config_path, const std::optional<std::string>& out) {
  const auto cfg = load_or_die(config_path);
  const auto res = run_sweep(cfg, out.value_or(cfg.output_dir), &std::clog);
  std::clog << res.records.size() << " points (" << res.resumed << " resumed), " << res.failures.size() << " failed\n";
  for (const auto& f : res.failures) std::cerr << "error: " << f.spec.key() << ": " << f.message << '\n';
  return res.failures.empty() ? kOk : kPartialFailure;
}

int cmd_oracle(const std::string& config_path, const std::optional<std::string>& out) {
  const auto cfg = load_or_die(config_path);
  const std::string dir = out.value_or(cfg.output_dir + "/oracle");
  const auto reports = write_oracle_outputs(cfg, dir);
  std::cout << "pre_edc,corr_re,residual_ratio,l2_error_vs_split_step\n";
  for (const auto& r : reports)
    std::cout << format_double(r.pre_edc) << ',' << r.anti.corr.real() << ',' << r.anti.residual_ratio << ',' << r.l2_error << '\n';
  return kOk;
}

int cmd_validate(const std::string& config_path) {
  const auto cfg = load_or_die(config_path);
  const auto& f = cfg.link.fiber;
  std::cout << "config ok: " << config_path << '\n'
            << "  points            " << sweep_points(cfg).size() << '\n'
            << "  net bit rate      " << net_bit_rate(cfg.ofdm) / 1e9 << " Gb/s\n"
            << "  occupied band     " << cfg.ofdm.occupied_bandwidth() / 1e9 << " GHz\n"
            << "  link length       " << cfg.link.total_length() / 1e3 << " km\n"
            << "  gamma             " << f.gamma() * 1e3 << " 1/(W km)\n"
            << "  beta2             " << f.beta2() * 1e27 << " ps^2/km\n"
            << "  ASE PSD           " << cfg.link.amp.ase_psd() << " W/Hz\n";
  const auto memory = dispersion_memory_samples(cfg.link.total_dispersion(), cfg.ofdm.occupied_bandwidth(), cfg.ofdm.waveform_rate());
  std::cout << "  dispersion memory " << memory << " samples (overlap " << cfg.eq.overlap << ")\n";
  if (!cfg.eq.full_frame() && cfg.eq.overlap < memory) std::cout << "warning: equalizer overlap is below the dispersion memory\n";
  if (auto w = cfg.link.amp.warning()) std::cout << "warning: " << *w << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LPC-PCTS CO-OFDM fiber nonlinearity simulator"};
  app.require_subcommand(1);
  std::string config;

  auto* run = app.add_subcommand("run", "simulate one experiment point");
  std::optional<std::string> scheme, out_run;
  std::optional<double> power, pre_edc;
  std::optional<std::uint64_t> seed;
  run->add_option("--config", config, "experiment config file")->required();
  run->add_option("--scheme", scheme, "lpc-pcts | pcsc | pctw-16qam | pdm-4qam");
  run->add_option("--power", power, "launch power, dBm");
  run->add_option("--seed", seed, "random seed");
  run->add_option("--pre-edc", pre_edc, "pre-compensated dispersion fraction");
  run->add_option("--out", out_run, "output directory");

  auto* sweep = app.add_subcommand("sweep", "run the configured launch-power sweep");
  std::optional<std::string> out_sweep;
  sweep->add_option("--config", config, "experiment config file")->required();
  sweep->add_option("--out", out_sweep, "output directory (default: [output] dir)");

  auto* oracle = app.add_subcommand("oracle", "first-order perturbation reports");
  std::optional<std::string> out_oracle;
  oracle->add_option("--config", config, "experiment config file")->required();
  oracle->add_option("--out", out_oracle, "output directory (default: <[output] dir>/oracle)");

  auto* validate = app.add_subcommand("validate", "check the config against all invariants");
  validate->add_option("--config", config, "experiment config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) return cmd_run(config, scheme, power, seed, pre_edc, out_run);
    if (*sweep) return cmd_sweep(config, out_sweep);
    if (*oracle) return cmd_oracle(config, out_oracle);
    if (*validate) return cmd_validate(config);
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.stage() == "config" ? kConfigError : kRunError;
  } catch (const std::exception& e) {
    std::cerr << "error: [internal] " << e.what() << '\n';
    return kRunError;
  }
  return kOk;
}
