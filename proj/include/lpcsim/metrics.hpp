// Bit-error counting, Q-factor, error-vector statistics and the result/
// constellation file formats.
#pragma once

#include <boost/math/special_functions/erf.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <tuple>

#include "lpcsim/signal_core.hpp"

namespace lpcsim {

struct BerCount {
  std::size_t n_errors = 0;
  double ber = 0.0;
};

inline BerCount count_ber(std::span<const std::uint8_t> tx, std::span<const std::uint8_t> rx) {
  if (tx.size() != rx.size()) throw Error("count_ber: stream lengths differ");
  if (tx.empty()) throw Error("count_ber: empty streams");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < tx.size(); ++i) errors += (tx[i] != rx[i]) ? 1 : 0;
  return {errors, static_cast<double>(errors) / static_cast<double>(tx.size())};
}

inline BerCount count_ber(const BitStream& tx, const BitStream& rx) { return count_ber(tx.bits, rx.bits); }

/// Q (dB) = 20 log10(sqrt2 * erfcinv(2 BER)); defined for 0 < BER < 0.5.
inline double q_from_ber(double ber) {
  if (!(ber > 0.0 && ber < 0.5)) throw Error("q_from_ber: BER " + std::to_string(ber) + " outside (0, 0.5); Q undefined");
  return 20.0 * std::log10(std::sqrt(2.0) * boost::math::erfc_inv(2.0 * ber));
}

/// Error statistics of received against transmitted data symbols.
struct ErrorStats {
  double evm = 0.0;  // rms |e_x| relative to rms |tx_x|
  double variance_x = 0.0;
  double variance_y = 0.0;
  /// <e_x, -conj(e_y)> / (|e_x| |e_y|); +1 for perfectly anti-correlated errors.
  Complex anti_correlation{};
  /// Variance of (e_x + conj(e_y)) / 2, the error left after coherent superposition.
  double superposed_variance = 0.0;
};

inline ErrorStats error_vector_stats(std::span<const Complex> rx_x, std::span<const Complex> rx_y, std::span<const Complex> tx_x,
                                     std::span<const Complex> tx_y) {
  const std::size_t n = tx_x.size();
  if (rx_x.size() != n || rx_y.size() != n || tx_y.size() != n) throw Error("error_vector_stats: shape mismatch");
  if (n == 0) throw Error("error_vector_stats: no symbols");
  double ex2 = 0.0, ey2 = 0.0, ref2 = 0.0, sup = 0.0;
  Complex inner{};
  for (std::size_t i = 0; i < n; ++i) {
    const Complex ex = rx_x[i] - tx_x[i];
    const Complex ey = rx_y[i] - tx_y[i];
    ex2 += std::norm(ex);
    ey2 += std::norm(ey);
    ref2 += std::norm(tx_x[i]);
    inner += ex * std::conj(-std::conj(ey));
    sup += std::norm(0.5 * (ex + std::conj(ey)));
  }
  const double inv = 1.0 / static_cast<double>(n);
  ErrorStats s;
  s.variance_x = ex2 * inv;
  s.variance_y = ey2 * inv;
  s.superposed_variance = sup * inv;
  s.evm = ref2 > 0.0 ? std::sqrt(ex2 / ref2) : 0.0;
  s.anti_correlation = (ex2 > 0.0 && ey2 > 0.0) ? inner / std::sqrt(ex2 * ey2) : Complex{};
  return s;
}

/// rms error relative to rms reference.
inline double evm(std::span<const Complex> rx, std::span<const Complex> ref) {
  if (rx.size() != ref.size() || rx.empty()) throw Error("evm: shape mismatch");
  double e = 0.0, r = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    e += std::norm(rx[i] - ref[i]);
    r += std::norm(ref[i]);
  }
  return r > 0.0 ? std::sqrt(e / r) : 0.0;
}

/// Minimum number of errors for a BER estimate to count as stable.
inline constexpr std::size_t kMinStableErrors = 100;

struct MetricsRecord {
  std::string scheme;
  double launch_dbm = 0.0;
  double pre_edc = 0.0;
  std::size_t n_bits = 0;
  std::size_t n_errors = 0;
  double ber = 0.0;
  std::optional<double> q_db;
  double evm = 0.0;
  std::uint64_t seed = 0;

  bool low_confidence() const { return n_errors < kMinStableErrors; }

  static MetricsRecord from_counts(std::string scheme, double launch_dbm, double pre_edc, std::uint64_t seed, std::size_t n_bits,
                                   std::size_t n_errors, double evm) {
    MetricsRecord r{std::move(scheme), launch_dbm, pre_edc, n_bits, n_errors, 0.0, std::nullopt, evm, seed};
    r.ber = n_bits ? static_cast<double>(n_errors) / static_cast<double>(n_bits) : 0.0;
    if (r.ber > 0.0 && r.ber < 0.5) r.q_db = q_from_ber(r.ber);
    return r;
  }

  bool operator==(const MetricsRecord&) const = default;
};

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw Error("not a number: '" + std::string(s) + "'");
  return v;
}

inline constexpr const char* kMetricsCsvHeader = "scheme,pre_edc,launch_dbm,seed,n_bits,n_errors,ber,q_db,evm";

inline std::string to_csv_row(const MetricsRecord& r) {
  std::string row = r.scheme;
  row += ',' + format_double(r.pre_edc);
  row += ',' + format_double(r.launch_dbm);
  row += ',' + std::to_string(r.seed);
  row += ',' + std::to_string(r.n_bits);
  row += ',' + std::to_string(r.n_errors);
  row += ',' + format_double(r.ber);
  row += ',' + (r.q_db ? format_double(*r.q_db) : std::string("nan"));
  row += ',' + format_double(r.evm);
  return row;
}

inline MetricsRecord parse_csv_row(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    f.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (f.size() != 9) throw Error("metrics csv: expected 9 fields, got " + std::to_string(f.size()));
  MetricsRecord r;
  r.scheme = f[0];
  r.pre_edc = parse_double(f[1]);
  r.launch_dbm = parse_double(f[2]);
  r.seed = std::stoull(f[3]);
  r.n_bits = std::stoull(f[4]);
  r.n_errors = std::stoull(f[5]);
  r.ber = parse_double(f[6]);
  if (f[7] != "nan") r.q_db = parse_double(f[7]);
  r.evm = parse_double(f[8]);
  return r;
}

/// Canonical row order: scheme, launch power, seed, then pre-EDC fraction.
inline void sort_records(std::vector<MetricsRecord>& records) {
  std::sort(records.begin(), records.end(), [](const MetricsRecord& a, const MetricsRecord& b) {
    return std::tie(a.scheme, a.launch_dbm, a.seed, a.pre_edc) < std::tie(b.scheme, b.launch_dbm, b.seed, b.pre_edc);
  });
}

inline void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path);
  os << kMetricsCsvHeader << '\n';
  for (const auto& r : records) os << to_csv_row(r) << '\n';
  if (!os) throw Error("write failed: " + path);
}

inline std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != kMetricsCsvHeader) throw Error("metrics csv: bad header in " + path);
  std::vector<MetricsRecord> out;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(parse_csv_row(line));
  return out;
}

// ---------------------------------------------------------------------------
// Constellation dumps: '#'-prefixed "key=value" header lines, then one
// "re,im" pair per line.
// ---------------------------------------------------------------------------

using DumpHeader = std::map<std::string, std::string>;

inline void dump_constellation(std::span<const Complex> points, const DumpHeader& header, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("dump_constellation: cannot open " + path);
  for (const auto& [k, v] : header) os << "# " << k << '=' << v << '\n';
  for (const auto& p : points) os << format_double(p.real()) << ',' << format_double(p.imag()) << '\n';
  if (!os) throw Error("dump_constellation: write failed for " + path);
}

struct ConstellationDump {
  DumpHeader header;
  CVec points;
};

inline ConstellationDump read_constellation(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  ConstellationDump dump;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) dump.header[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(path + ":" + std::to_string(line_no) + ": malformed point");
    dump.points.emplace_back(parse_double(line.substr(0, comma)), parse_double(line.substr(comma + 1)));
  }
  return dump;
}

}  // namespace lpcsim
