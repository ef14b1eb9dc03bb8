// Experiment configuration: a flat "key = value" text format with [section]
// headers. Parsing starts from the reference defaults, so a file only needs
// the keys it changes. Unknown sections or keys are rejected.
#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lpcsim/channel.hpp"
#include "lpcsim/coding.hpp"
#include "lpcsim/metrics.hpp"
#include "lpcsim/ofdm.hpp"
#include "lpcsim/perturbation.hpp"
#include "lpcsim/rx_dsp.hpp"

namespace lpcsim {

/// Settings of the perturbation-oracle report (small frame, short link).
struct OracleConfig {
  std::size_t n_subcarriers = 64;
  std::size_t grid_bins = 256;
  std::size_t n_spans = 2;
  double launch_dbm = -6.0;
  double dz = 100.0;  // m, profile sampling
  std::uint64_t seed = 1;

  void validate() const {
    if (n_subcarriers == 0 || n_subcarriers > grid_bins) throw Error("oracle: need 0 < n_subcarriers <= grid_bins");
    if (grid_bins > kOracleMaxBins) throw Error("oracle: grid_bins exceeds " + std::to_string(kOracleMaxBins));
    if (n_spans == 0) throw Error("oracle: n_spans must be positive");
    if (!(dz > 0.0)) throw Error("oracle: dz must be positive");
  }
};

struct ExperimentConfig {
  std::vector<std::string> schemes{"lpc-pcts", "pcsc", "pctw-16qam", "pdm-4qam"};
  std::vector<double> launch_dbm{-6, -5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 6};
  std::vector<double> pre_edc{0.0, 0.5};
  std::vector<std::uint64_t> seeds{1};
  std::size_t n_ofdm_symbols = 200;
  std::size_t threads = 0;  // 0 = hardware concurrency

  OfdmParams ofdm;
  LinkConfig link;
  EqualizerConfig eq;
  bool cpe = true;
  bool cpe_tied = false;

  OracleConfig oracle;

  std::string output_dir = "out";
  bool dump_constellations = false;

  bool operator==(const ExperimentConfig& o) const;

  /// Checks every module invariant; throws on the first violation.
  void validate() const {
    if (schemes.empty()) throw Error("config: no schemes");
    const FrameLayout layout = FrameLayout::build(ofdm);  // validates ofdm
    for (const auto& s : schemes) {
      const auto scheme = make_scheme(s);
      if (layout.data_columns.size() % scheme->subcarrier_granularity() != 0)
        throw Error("config: n_data must be a multiple of " + std::to_string(scheme->subcarrier_granularity()) + " for " + s);
    }
    if (launch_dbm.empty()) throw Error("config: empty launch power sweep");
    for (double p : launch_dbm)
      if (!std::isfinite(p)) throw Error("config: launch powers must be finite");
    if (pre_edc.empty()) throw Error("config: empty pre_edc list");
    for (double f : pre_edc)
      if (!(f >= 0.0 && f <= 1.0)) throw Error("config: pre_edc values must lie in [0, 1]");
    if (seeds.empty()) throw Error("config: no seeds");
    if (n_ofdm_symbols <= ofdm.training_symbols) throw Error("config: n_ofdm_symbols must exceed the training block");
    link.validate();
    eq.validate();
    oracle.validate();
  }
};

/// The reference system: 35 x 80 km SSMF, 64 GSa/s, 4096-point FFT.
inline ExperimentConfig full_preset() { return ExperimentConfig{}; }

/// Reduced system for quick runs: 10 spans, 256 data subcarriers on a
/// 512-point FFT.
inline ExperimentConfig scaled_preset() {
  ExperimentConfig c;
  c.link.n_spans = 10;
  c.ofdm.fft_size = 512;
  c.ofdm.n_data = 256;
  c.eq.block_size = 4096;
  c.eq.overlap = 1024;
  c.n_ofdm_symbols = 100;
  c.seeds = {1, 2, 3};
  return c;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::uint64_t parse_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw Error("not a non-negative integer: '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw Error("not a boolean: '" + s + "'");
}

inline std::string join(const auto& items, auto&& fmt) {
  std::string out;
  for (const auto& v : items) {
    if (!out.empty()) out += ", ";
    out += fmt(v);
  }
  return out;
}

/// Binding of one key to a field: parse into it and format it back.
struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

using Schema = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>;

#define LPCSIM_REAL(expr) \
  Field { [](ExperimentConfig& c, const std::string& v) { c.expr = parse_double(v); }, [](const ExperimentConfig& c) { return format_double(c.expr); } }
#define LPCSIM_UINT(expr)                                                                              \
  Field {                                                                                              \
    [](ExperimentConfig& c, const std::string& v) { c.expr = static_cast<decltype(c.expr)>(parse_uint(v)); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.expr); }                               \
  }
#define LPCSIM_BOOL(expr) \
  Field { [](ExperimentConfig& c, const std::string& v) { c.expr = parse_bool(v); }, [](const ExperimentConfig& c) { return std::string(c.expr ? "true" : "false"); } }

inline const Schema& schema() {
  static const Schema s = {
      {"sweep",
       {{"schemes", Field{[](ExperimentConfig& c, const std::string& v) {
                            c.schemes = split_list(v);
                            for (const auto& n : c.schemes) parse_scheme(n);
                          },
                          [](const ExperimentConfig& c) { return join(c.schemes, [](const std::string& x) { return x; }); }}},
        {"launch_dbm", Field{[](ExperimentConfig& c, const std::string& v) {
                               c.launch_dbm.clear();
                               for (const auto& x : split_list(v)) c.launch_dbm.push_back(parse_double(x));
                             },
                             [](const ExperimentConfig& c) { return join(c.launch_dbm, format_double); }}},
        {"pre_edc", Field{[](ExperimentConfig& c, const std::string& v) {
                            c.pre_edc.clear();
                            for (const auto& x : split_list(v)) c.pre_edc.push_back(parse_double(x));
                          },
                          [](const ExperimentConfig& c) { return join(c.pre_edc, format_double); }}},
        {"seeds", Field{[](ExperimentConfig& c, const std::string& v) {
                          c.seeds.clear();
                          for (const auto& x : split_list(v)) c.seeds.push_back(parse_uint(x));
                        },
                        [](const ExperimentConfig& c) { return join(c.seeds, [](std::uint64_t x) { return std::to_string(x); }); }}},
        {"n_ofdm_symbols", LPCSIM_UINT(n_ofdm_symbols)},
        {"threads", LPCSIM_UINT(threads)}}},
      {"ofdm",
       {{"fft_size", LPCSIM_UINT(ofdm.fft_size)},
        {"n_data", LPCSIM_UINT(ofdm.n_data)},
        {"n_pilots", LPCSIM_UINT(ofdm.n_pilots)},
        {"cp_fraction", LPCSIM_REAL(ofdm.cp_fraction)},
        {"sample_rate", LPCSIM_REAL(ofdm.sample_rate)},
        {"oversampling", LPCSIM_UINT(ofdm.oversampling)},
        {"training_period", LPCSIM_UINT(ofdm.training_period)},
        {"training_symbols", LPCSIM_UINT(ofdm.training_symbols)}}},
      {"fiber",
       {{"alpha_db_per_km", LPCSIM_REAL(link.fiber.alpha_db_per_km)},
        {"dispersion_ps_nm_km", LPCSIM_REAL(link.fiber.dispersion_ps_nm_km)},
        {"wavelength_nm", LPCSIM_REAL(link.fiber.wavelength_nm)},
        {"n2", LPCSIM_REAL(link.fiber.n2)},
        {"effective_area_um2", LPCSIM_REAL(link.fiber.effective_area_um2)},
        {"span_length_km", LPCSIM_REAL(link.fiber.span_length_km)},
        {"gamma", Field{[](ExperimentConfig& c, const std::string& v) {
                          if (v == "auto") c.link.fiber.gamma_override.reset();
                          else c.link.fiber.gamma_override = parse_double(v);
                        },
                        [](const ExperimentConfig& c) {
                          return c.link.fiber.gamma_override ? format_double(*c.link.fiber.gamma_override) : std::string("auto");
                        }}}}},
      {"amplifier",
       {{"gain_db", LPCSIM_REAL(link.amp.gain_db)},
        {"noise_figure_db", LPCSIM_REAL(link.amp.noise_figure_db)},
        {"center_frequency", LPCSIM_REAL(link.amp.center_frequency)},
        {"ase", LPCSIM_BOOL(link.amp.ase)}}},
      {"link",
       {{"n_spans", LPCSIM_UINT(link.n_spans)},
        {"max_nonlinear_phase", LPCSIM_REAL(link.step.max_nonlinear_phase)},
        {"max_step_km", LPCSIM_REAL(link.step.max_step_km)}}},
      {"equalizer", {{"block_size", LPCSIM_UINT(eq.block_size)}, {"overlap", LPCSIM_UINT(eq.overlap)}}},
      {"rx", {{"cpe", LPCSIM_BOOL(cpe)}, {"cpe_tied", LPCSIM_BOOL(cpe_tied)}}},
      {"oracle",
       {{"n_subcarriers", LPCSIM_UINT(oracle.n_subcarriers)},
        {"grid_bins", LPCSIM_UINT(oracle.grid_bins)},
        {"n_spans", LPCSIM_UINT(oracle.n_spans)},
        {"launch_dbm", LPCSIM_REAL(oracle.launch_dbm)},
        {"dz", LPCSIM_REAL(oracle.dz)},
        {"seed", LPCSIM_UINT(oracle.seed)}}},
      {"output", {{"dir", Field{[](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }, [](const ExperimentConfig& c) { return c.output_dir; }}},
                  {"dump_constellations", LPCSIM_BOOL(dump_constellations)}}},
  };
  return s;
}

#undef LPCSIM_REAL
#undef LPCSIM_UINT
#undef LPCSIM_BOOL

inline const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& [name, fields] : schema()) {
    if (name != section) continue;
    for (const auto& [k, f] : fields)
      if (k == key) return &f;
  }
  return nullptr;
}

}  // namespace detail

inline std::string serialize_config(const ExperimentConfig& c) {
  std::string out;
  for (const auto& [section, fields] : detail::schema()) {
    out += '[' + section + "]\n";
    for (const auto& [key, field] : fields) out += key + " = " + field.get(c) + '\n';
    out += '\n';
  }
  return out;
}

inline bool ExperimentConfig::operator==(const ExperimentConfig& o) const { return serialize_config(*this) == serialize_config(o); }

/// Parses config text over `base`. '#' and ';' start comments. Errors carry
/// the source name and line number.
inline ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = full_preset(), const std::string& source = "<config>") {
  std::istringstream is{std::string(text)};
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(where + "malformed section header");
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      bool known = false;
      for (const auto& s : detail::schema()) known = known || s.first == section;
      if (!known) throw Error(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(where + "expected key = value");
    if (section.empty()) throw Error(where + "key outside of any section");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    const auto* field = detail::find_field(section, key);
    if (!field) throw Error(where + "unknown key '" + key + "' in [" + section + "]");
    try {
      field->set(base, value);
    } catch (const std::exception& e) {
      throw Error(where + key + ": " + e.what());
    }
  }
  return base;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), full_preset(), path);
}

/// FNV-1a hash of the serialized config.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace lpcsim
