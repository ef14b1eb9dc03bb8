// End-to-end experiment points, launch-power sweeps and the perturbation
// oracle report.
#pragma once

#include <atomic>
#include <filesystem>
#include <mutex>
#include <thread>

#include "lpcsim/channel.hpp"
#include "lpcsim/coding.hpp"
#include "lpcsim/config.hpp"
#include "lpcsim/metrics.hpp"
#include "lpcsim/ofdm.hpp"
#include "lpcsim/perturbation.hpp"
#include "lpcsim/rx_dsp.hpp"

namespace lpcsim {

inline constexpr const char* kVersion = "1.0.0";

/// Error raised inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

namespace detail {

template <class F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace detail

/// One experiment point: scheme, launch power, pre-EDC fraction and seed.
struct PointSpec {
  std::string scheme;
  double launch_dbm = 0.0;
  double pre_edc = 0.0;
  std::uint64_t seed = 1;

  /// File-name-safe identifier.
  std::string key() const {
    return scheme + "_p" + format_double(launch_dbm) + "_e" + format_double(pre_edc) + "_s" + std::to_string(seed);
  }
};

/// Received data symbols at the decision stages, for constellation dumps.
struct PointSymbols {
  CVec tx_x, tx_y;
  CVec rx_x_nocpe, rx_y_nocpe;
  CVec rx_x, rx_y;  // after CPE when enabled
};

struct PointResult {
  MetricsRecord record;
  ErrorStats stats;
  PhaseTrace phase;
  PointSymbols symbols;
};

/// Runs the full chain: bits, encoding, framing, modulation, launch scaling,
/// pre-EDC, link, CD compensation, demodulation, channel estimation, CPE,
/// combining, detection and error counting. Deterministic in (cfg, spec).
inline PointResult simulate_point(const ExperimentConfig& cfg, const PointSpec& spec) {
  const auto scheme = detail::run_stage("config", [&] { return make_scheme(spec.scheme); });
  LinkConfig link = cfg.link;
  link.pre_edc_fraction = spec.pre_edc;
  const FrameLayout layout = detail::run_stage("config", [&] {
    link.validate();
    cfg.eq.validate();
    const auto l = FrameLayout::build(cfg.ofdm);
    if (l.data_columns.size() % scheme->subcarrier_granularity() != 0) throw Error("n_data incompatible with " + spec.scheme);
    return l;
  });
  const OfdmParams& p = cfg.ofdm;
  const RandomSource root(spec.seed);

  // Transmitter.
  const std::size_t n_rows = data_symbol_count(p, cfg.n_ofdm_symbols);
  const std::size_t n_sc = layout.data_columns.size() * n_rows;
  RandomSource bit_rng = root.split(1);
  const BitStream bits = prbs_generate(bit_rng.next_u64(), n_sc * CodingScheme::kBitsPerSubcarrier);
  const PolSymbols tx = detail::run_stage("coding", [&] { return scheme->encode(bits.bits); });

  const CVec pilots_x = default_pilots(p.n_pilots);
  CVec pilots_y = pilots_x;
  const SymbolGrid training_x = make_training(layout, p.training_symbols, spec.seed);
  SymbolGrid training_y;
  if (scheme->conjugate_twin()) {
    for (auto& v : pilots_y) v = std::conj(v);
    training_y = conjugated(training_x);
  } else {
    training_y = make_training(layout, p.training_symbols, splitmix64(spec.seed));
  }

  DualPolWaveform wave = detail::run_stage("ofdm-tx", [&] {
    DualPolGrid grid{insert_pilots_and_training(place_data(layout, tx.x), p, pilots_x, training_x),
                     insert_pilots_and_training(place_data(layout, tx.y), p, pilots_y, training_y)};
    return ofdm_modulate(grid, p);
  });

  // Channel.
  wave = detail::run_stage("launch", [&] { return set_launch_power(std::move(wave), spec.launch_dbm); });
  RandomSource noise = root.split(2);
  wave = detail::run_stage("channel", [&] { return propagate_link(std::move(wave), link, noise); });

  // Receiver.
  const double residual = (1.0 - spec.pre_edc) * link.total_dispersion();
  wave = detail::run_stage("cd-compensate", [&] { return cd_compensate(std::move(wave), residual, cfg.eq, p.occupied_bandwidth()); });
  DualPolGrid rx = detail::run_stage("ofdm-rx", [&] { return ofdm_demodulate(wave, p, layout); });
  detail::run_stage("equalize", [&] {
    rx.x = equalize(std::move(rx.x), training_x);
    rx.y = equalize(std::move(rx.y), training_y);
    return 0;
  });

  PointResult result;
  result.symbols.tx_x = tx.x;
  result.symbols.tx_y = tx.y;
  result.symbols.rx_x_nocpe = extract_data(rx.x);
  result.symbols.rx_y_nocpe = extract_data(rx.y);
  if (cfg.cpe) result.phase = detail::run_stage("cpe", [&] { return cpe_correct(rx, pilots_x, pilots_y, cfg.cpe_tied); });
  result.symbols.rx_x = extract_data(rx.x);
  result.symbols.rx_y = extract_data(rx.y);

  const auto decoded = detail::run_stage("decode", [&] { return scheme->decode(result.symbols.rx_x, result.symbols.rx_y); });
  detail::run_stage("metrics", [&] {
    const auto count = count_ber(bits.bits, decoded);
    result.stats = error_vector_stats(result.symbols.rx_x, result.symbols.rx_y, tx.x, tx.y);
    result.record = MetricsRecord::from_counts(spec.scheme, spec.launch_dbm, spec.pre_edc, spec.seed, bits.bits.size(), count.n_errors,
                                               result.stats.evm);
    return 0;
  });
  return result;
}

inline MetricsRecord run_point(const ExperimentConfig& cfg, const PointSpec& spec) { return simulate_point(cfg, spec).record; }

/// Writes the four constellation stages of a point into `dir`:
/// {nocpe,cpe} x {single,superposed}.
inline void dump_point_constellations(const PointResult& r, const PointSpec& spec, const std::string& dir) {
  const auto scheme = make_scheme(spec.scheme);
  std::filesystem::create_directories(dir);
  auto write = [&](const CVec& x, const CVec& y, const char* cpe) {
    DumpHeader h{{"scheme", spec.scheme}, {"launch_dbm", format_double(spec.launch_dbm)},
                 {"pre_edc", format_double(spec.pre_edc)}, {"seed", std::to_string(spec.seed)}, {"cpe", cpe}};
    h["stage"] = "single";
    dump_constellation(x, h, dir + "/" + spec.key() + "_" + cpe + "_single.txt");
    h["stage"] = "superposed";
    dump_constellation(scheme->combine(x, y), h, dir + "/" + spec.key() + "_" + cpe + "_superposed.txt");
  };
  write(r.symbols.rx_x_nocpe, r.symbols.rx_y_nocpe, "off");
  write(r.symbols.rx_x, r.symbols.rx_y, "on");
}

/// All (scheme x power x seed x pre-EDC) points in canonical order.
inline std::vector<PointSpec> sweep_points(const ExperimentConfig& cfg) {
  std::vector<PointSpec> pts;
  for (const auto& s : cfg.schemes)
    for (double p : cfg.launch_dbm)
      for (auto seed : cfg.seeds)
        for (double f : cfg.pre_edc) pts.push_back({s, p, f, seed});
  return pts;
}

struct PointFailure {
  PointSpec spec;
  std::string message;
};

struct SweepResult {
  std::vector<MetricsRecord> records;  // sorted
  std::vector<PointFailure> failures;
  std::size_t resumed = 0;  // points reused from a previous run
};

namespace detail {

inline std::optional<MetricsRecord> load_point(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) return std::nullopt;
  try {
    auto rows = read_metrics_csv(file.string());
    if (rows.size() == 1) return rows.front();
  } catch (const Error&) {
  }
  return std::nullopt;
}

inline void write_manifest(const ExperimentConfig& cfg, const SweepResult& res, const std::filesystem::path& dir) {
  std::ofstream os(dir / "manifest.txt");
  if (!os) throw Error("cannot write manifest in " + dir.string());
  os << "version = " << kVersion << '\n';
  os << "config_hash = " << std::hex << config_hash(cfg) << std::dec << '\n';
  os << "seeds = " << detail::join(cfg.seeds, [](std::uint64_t s) { return std::to_string(s); }) << '\n';
  os << "points = " << res.records.size() << '\n';
  os << "failures = " << res.failures.size() << '\n';
  os << "resumed = " << res.resumed << '\n';
  os << "fftw = " << fftw_version << '\n';
}

}  // namespace detail

/// Executes every sweep point on a bounded worker pool. Each finished point
/// is persisted under <out>/points/, so an interrupted sweep resumes where it
/// stopped; results.csv, failures.txt and manifest.txt summarize the run.
inline SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream* log = nullptr) {
  detail::run_stage("config", [&] {
    cfg.validate();
    return 0;
  });
  const std::filesystem::path out(out_dir);
  const auto points_dir = out / "points";
  std::filesystem::create_directories(points_dir);
  {
    std::ofstream cfg_out(out / "config.ini");
    cfg_out << serialize_config(cfg);
  }

  // Per-point files are reusable when everything but the point list matches.
  {
    ExperimentConfig physics = cfg;
    physics.output_dir.clear();
    physics.threads = 0;
    physics.dump_constellations = false;
    physics.schemes = {};
    physics.launch_dbm = {};
    physics.pre_edc = {};
    physics.seeds = {};
    std::ostringstream hash;
    hash << std::hex << config_hash(physics);
    const auto stamp = points_dir / "config_hash";
    if (std::ifstream prev(stamp); prev) {
      std::string old;
      prev >> old;
      if (old != hash.str())
        throw StageError("resume", out_dir + " holds points from a different config (hash " + old + "); use a fresh output directory");
    } else {
      std::ofstream(stamp) << hash.str() << '\n';
    }
  }

  const auto points = sweep_points(cfg);
  SweepResult res;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      const auto& spec = points[i];
      const auto file = points_dir / (spec.key() + ".csv");
      if (auto prev = detail::load_point(file)) {
        std::lock_guard lock(mu);
        res.records.push_back(*prev);
        ++res.resumed;
        continue;
      }
      try {
        const auto r = simulate_point(cfg, spec);
        if (cfg.dump_constellations) dump_point_constellations(r, spec, (out / "constellations").string());
        const auto tmp = file.string() + ".tmp";
        write_metrics_csv({r.record}, tmp);
        std::filesystem::rename(tmp, file);
        std::lock_guard lock(mu);
        res.records.push_back(r.record);
        if (log) *log << to_csv_row(r.record) << std::endl;
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        res.failures.push_back({spec, e.what()});
        if (log) *log << "failed " << spec.key() << ": " << e.what() << std::endl;
      }
    }
  };
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t n_threads = std::min(points.size(), cfg.threads ? cfg.threads : hw);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  sort_records(res.records);
  write_metrics_csv(res.records, (out / "results.csv").string());
  {
    std::ofstream fail(out / "failures.txt");
    for (const auto& f : res.failures) fail << f.spec.key() << ": " << f.message << '\n';
  }
  detail::write_manifest(cfg, res, out);
  return res;
}

// ---------------------------------------------------------------------------
// Perturbation oracle report
// ---------------------------------------------------------------------------

/// One periodic OFDM symbol of LPC-PCTS data on the oracle grid, at launch
/// power, with y = conj(x) per subcarrier.
inline DualPolWaveform oracle_frame(const OracleConfig& oc, double sample_rate) {
  oc.validate();
  const LpcPctsScheme scheme;
  const auto bits = prbs_generate(oc.seed, oc.n_subcarriers * CodingScheme::kBitsPerSubcarrier);
  const auto tx = scheme.encode(bits.bits);
  const std::size_t n = oc.grid_bins;
  DualPolWaveform wave;
  wave.sample_rate = sample_rate;
  wave.x.assign(n, Complex{});
  wave.y.assign(n, Complex{});
  const auto first = static_cast<std::ptrdiff_t>(oc.n_subcarriers / 2);
  for (std::size_t i = 0; i < oc.n_subcarriers; ++i) {
    const auto f = static_cast<std::ptrdiff_t>(i) - first;
    const std::size_t bin = f >= 0 ? static_cast<std::size_t>(f) : n - static_cast<std::size_t>(-f);
    wave.x[bin] = tx.x[i];
    wave.y[bin] = tx.y[i];
  }
  fft::inverse(wave.x);
  fft::inverse(wave.y);
  return set_launch_power(std::move(wave), oc.launch_dbm);
}

/// Centered spectrum with e(t_n) = sum_k E_k exp(i w_k t_n).
inline CVec centered_spectrum(CVec samples) {
  const std::size_t n = samples.size();
  fft::forward(samples);
  CVec out(n);
  const auto half = static_cast<std::ptrdiff_t>(n / 2);
  for (std::size_t c = 0; c < n; ++c) {
    const auto f = static_cast<std::ptrdiff_t>(c) - half;
    const std::size_t bin = f >= 0 ? static_cast<std::size_t>(f) : n - static_cast<std::size_t>(-f);
    out[c] = samples[bin] / static_cast<double>(n);
  }
  return out;
}

/// Split-step reference distortion: (nonlinear - linear) output, noise off,
/// with the full accumulated dispersion removed so it is referred to the
/// link input. Returned as centered spectra.
inline std::pair<CVec, CVec> split_step_distortion(const DualPolWaveform& launch, LinkConfig link) {
  link.amp.ase = false;
  RandomSource unused(0);
  const auto nl = propagate_link(launch, link, unused);
  LinkConfig lin = link;
  lin.fiber.gamma_override = 0.0;
  const auto ref = propagate_link(launch, lin, unused);
  DualPolWaveform diff = nl;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff.x[i] -= ref.x[i];
    diff.y[i] -= ref.y[i];
  }
  const double accumulated = (1.0 - link.pre_edc_fraction) * link.total_dispersion();
  diff = apply_dispersion(std::move(diff), -accumulated);
  return {centered_spectrum(diff.x), centered_spectrum(diff.y)};
}

inline double relative_l2(std::span<const Complex> a, std::span<const Complex> ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - ref[i]);
    den += std::norm(ref[i]);
  }
  return std::sqrt(num / den);
}

struct OracleReport {
  double pre_edc = 0.0;
  AntiCorrelation anti{};
  double l2_error = 0.0;  // oracle vs split-step, x and y together
  double dispersion_asymmetry = 0.0;
  DistortionField field;
};

/// Oracle evaluation on the configured small frame and short link for one
/// pre-EDC fraction.
inline OracleReport oracle_report(const ExperimentConfig& cfg, double pre_edc) {
  const OracleConfig& oc = cfg.oracle;
  LinkConfig link = cfg.link;
  link.n_spans = oc.n_spans;
  link.pre_edc_fraction = pre_edc;
  const auto frame = detail::run_stage("oracle-frame", [&] { return oracle_frame(oc, cfg.ofdm.sample_rate); });
  OracleReport rep;
  rep.pre_edc = pre_edc;
  const auto profile = LinkProfile::lumped(link, oc.dz);
  rep.dispersion_asymmetry = profile.dispersion_asymmetry();
  rep.field = detail::run_stage("oracle", [&] {
    return first_order_distortion(centered_spectrum(frame.x), centered_spectrum(frame.y), frame.sample_rate, profile, link.fiber);
  });
  rep.anti = anti_correlation_check(rep.field.delta_x, rep.field.delta_y);
  const auto [sx, sy] = detail::run_stage("split-step", [&] { return split_step_distortion(frame, link); });
  CVec both_oracle = rep.field.delta_x, both_ref = sx;
  both_oracle.insert(both_oracle.end(), rep.field.delta_y.begin(), rep.field.delta_y.end());
  both_ref.insert(both_ref.end(), sy.begin(), sy.end());
  rep.l2_error = relative_l2(both_oracle, both_ref);
  return rep;
}

/// Writes oracle_summary.csv, per-pre-EDC distortion spectra and an eta grid.
inline std::vector<OracleReport> write_oracle_outputs(const ExperimentConfig& cfg, const std::string& out_dir) {
  detail::run_stage("config", [&] {
    cfg.validate();
    return 0;
  });
  std::filesystem::create_directories(out_dir);
  std::vector<OracleReport> reports;
  std::ofstream summary(out_dir + "/oracle_summary.csv");
  if (!summary) throw StageError("output", "cannot write " + out_dir + "/oracle_summary.csv");
  summary << "pre_edc,corr_re,corr_im,residual_ratio,l2_error_vs_split_step,dispersion_asymmetry\n";
  for (double f : cfg.pre_edc) {
    auto rep = oracle_report(cfg, f);
    summary << format_double(f) << ',' << format_double(rep.anti.corr.real()) << ',' << format_double(rep.anti.corr.imag()) << ','
            << format_double(rep.anti.residual_ratio) << ',' << format_double(rep.l2_error) << ','
            << format_double(rep.dispersion_asymmetry) << '\n';
    std::ofstream spec(out_dir + "/distortion_e" + format_double(f) + ".csv");
    spec << "bin,re_dx,im_dx,re_dy,im_dy\n";
    const auto half = static_cast<std::ptrdiff_t>(rep.field.delta_x.size() / 2);
    for (std::size_t c = 0; c < rep.field.delta_x.size(); ++c)
      spec << static_cast<std::ptrdiff_t>(c) - half << ',' << format_double(rep.field.delta_x[c].real()) << ','
           << format_double(rep.field.delta_x[c].imag()) << ',' << format_double(rep.field.delta_y[c].real()) << ','
           << format_double(rep.field.delta_y[c].imag()) << '\n';

    LinkConfig link = cfg.link;
    link.n_spans = cfg.oracle.n_spans;
    link.pre_edc_fraction = f;
    const double dw = 2.0 * kPi * cfg.ofdm.sample_rate / static_cast<double>(cfg.oracle.grid_bins);
    std::vector<double> omegas;
    const auto n_sc = static_cast<std::ptrdiff_t>(cfg.oracle.n_subcarriers);
    for (std::ptrdiff_t k = -n_sc / 2; k <= n_sc / 2; k += std::max<std::ptrdiff_t>(1, n_sc / 16)) omegas.push_back(static_cast<double>(k) * dw);
    write_eta_grid(LinkProfile::lumped(link, cfg.oracle.dz), omegas, out_dir + "/eta_e" + format_double(f) + ".csv");
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace lpcsim
