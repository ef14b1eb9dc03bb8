// Receiver DSP: overlap-save chromatic dispersion compensation, training-based
// one-tap channel estimation and pilot-aided common phase error correction.
#pragma once

#include <fstream>
#include <iostream>
#include <optional>

#include "lpcsim/channel.hpp"
#include "lpcsim/fft.hpp"
#include "lpcsim/ofdm.hpp"

namespace lpcsim {

/// block_size == 0 selects a single transform over the whole frame.
struct EqualizerConfig {
  std::size_t block_size = 16384;
  std::size_t overlap = 4096;

  bool full_frame() const { return block_size == 0; }

  void validate() const {
    if (full_frame()) return;
    if (!std::has_single_bit(block_size)) throw Error("equalizer: block_size must be a power of two");
    if (overlap >= block_size) throw Error("equalizer: overlap must be smaller than block_size");
    if (overlap % 2 != 0) throw Error("equalizer: overlap must be even");
  }
};

/// Samples spanned by the group-delay spread 2 pi |beta2| L B.
inline std::size_t dispersion_memory_samples(double accumulated_dispersion, double bandwidth, double sample_rate) {
  return static_cast<std::size_t>(std::ceil(2.0 * kPi * std::abs(accumulated_dispersion) * bandwidth * sample_rate));
}

/// Removes `accumulated` (integral of beta2, s^2) of dispersion with an
/// overlap-save frequency-domain equalizer. The frame is treated as periodic,
/// so the first block is primed with the frame tail.
inline DualPolWaveform cd_compensate(DualPolWaveform wave, double accumulated, const EqualizerConfig& eq,
                                     std::optional<double> signal_bandwidth = std::nullopt) {
  eq.validate();
  wave.validate();
  if (accumulated == 0.0) return wave;
  if (eq.full_frame()) return apply_dispersion(std::move(wave), -accumulated);

  const double bandwidth = signal_bandwidth.value_or(wave.sample_rate);
  const std::size_t memory = dispersion_memory_samples(accumulated, bandwidth, wave.sample_rate);
  if (eq.overlap < memory)
    std::clog << "warning: cd_compensate overlap " << eq.overlap << " is below the dispersion memory of " << memory
              << " samples; block edges will be corrupted\n";

  const std::size_t b = eq.block_size;
  const std::size_t hop = b - eq.overlap;
  const std::size_t pre = eq.overlap / 2;
  const std::size_t n = wave.size();
  const auto w = fft::angular_frequencies(b, wave.sample_rate);
  CVec response(b);
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t k = 0; k < b; ++k) response[k] = std::polar(inv_b, -0.5 * accumulated * w[k] * w[k]);

  CVec block(b);
  for (CVec* pol : {&wave.x, &wave.y}) {
    const CVec& in = *pol;
    CVec out(n);
    for (std::size_t start = 0; start < n; start += hop) {
      // block[j] <- in[start - pre + j], wrapped around the periodic frame
      for (std::size_t j = 0; j < b; ++j) block[j] = in[(start + n * (1 + b / n) - pre + j) % n];
      fft::forward(block);
      for (std::size_t k = 0; k < b; ++k) block[k] *= response[k];
      fft::inverse(block);
      const std::size_t count = std::min(hop, n - start);
      std::copy_n(block.begin() + static_cast<std::ptrdiff_t>(pre), count, out.begin() + static_cast<std::ptrdiff_t>(start));
    }
    *pol = std::move(out);
  }
  return wave;
}

/// One complex tap per subcarrier (centered columns; null columns hold 1).
struct ChannelEstimate {
  CVec taps;
  std::size_t staleness = 0;  // data symbols since the last training block
};

/// Per-subcarrier average of received / known over the training rows.
inline ChannelEstimate estimate_channel(const SymbolGrid& rx_training, const SymbolGrid& known_training) {
  if (rx_training.width != known_training.width || rx_training.n_symbols() != known_training.n_symbols())
    throw Error("estimate_channel: grid shape mismatch");
  if (rx_training.n_symbols() == 0) throw Error("estimate_channel: need at least one training symbol");
  ChannelEstimate est;
  est.taps.assign(rx_training.width, Complex{1.0, 0.0});
  const double inv = 1.0 / static_cast<double>(rx_training.n_symbols());
  for (std::size_t c = 0; c < rx_training.width; ++c) {
    if (rx_training.roles[c] == SubcarrierRole::null) continue;
    Complex acc{};
    for (std::size_t r = 0; r < rx_training.n_symbols(); ++r) {
      const Complex known = known_training.at(r, c);
      if (std::abs(known) == 0.0) throw Error("estimate_channel: known training symbol is zero on an active subcarrier");
      acc += rx_training.at(r, c) / known;
    }
    est.taps[c] = acc * inv;
  }
  return est;
}

/// Re-estimates the channel at every training block (rows flagged training,
/// matched in order against `known`, cycled) and divides the following data
/// rows by it. Training rows are left untouched.
inline SymbolGrid equalize(SymbolGrid grid, const SymbolGrid& known) {
  std::optional<ChannelEstimate> est;
  std::size_t r = 0;
  std::size_t known_row = 0;
  while (r < grid.n_symbols()) {
    if (grid.training[r]) {
      std::size_t end = r;
      while (end < grid.n_symbols() && grid.training[end]) ++end;
      SymbolGrid rx_block, known_block;
      rx_block.width = known_block.width = grid.width;
      rx_block.roles = known_block.roles = grid.roles;
      for (std::size_t i = r; i < end; ++i) {
        const auto rr = grid.row(i);
        const auto kr = known.row(known_row++ % known.n_symbols());
        rx_block.symbols.insert(rx_block.symbols.end(), rr.begin(), rr.end());
        known_block.symbols.insert(known_block.symbols.end(), kr.begin(), kr.end());
        rx_block.training.push_back(true);
        known_block.training.push_back(true);
      }
      est = estimate_channel(rx_block, known_block);
      r = end;
      continue;
    }
    if (!est) throw Error("equalize: data symbol precedes the first training block");
    auto row = grid.row(r);
    for (std::size_t c = 0; c < grid.width; ++c)
      if (grid.roles[c] != SubcarrierRole::null) row[c] /= est->taps[c];
    ++est->staleness;
    ++r;
  }
  return grid;
}

/// Per-data-symbol phase estimates (unwrapped) for each polarization.
struct PhaseTrace {
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline Complex pilot_correlation(std::span<const Complex> row, std::span<const std::size_t> pilot_cols, std::span<const Complex> pilots) {
  Complex acc{};
  for (std::size_t i = 0; i < pilot_cols.size(); ++i) acc += row[pilot_cols[i]] * std::conj(pilots[i]);
  return acc;
}

inline double unwrap_near(double phi, double previous) {
  return phi - 2.0 * kPi * std::round((phi - previous) / (2.0 * kPi));
}

inline std::vector<std::size_t> pilot_columns(const SymbolGrid& grid) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < grid.width; ++c)
    if (grid.roles[c] == SubcarrierRole::pilot) cols.push_back(c);
  return cols;
}

}  // namespace detail

/// Common phase error correction of one polarization: each data symbol is
/// derotated by arg(sum_pilots rx * conj(known)). Returns the unwrapped trace.
inline std::vector<double> cpe_correct(SymbolGrid& grid, std::span<const Complex> pilot_values) {
  const auto cols = detail::pilot_columns(grid);
  if (cols.empty()) throw Error("cpe_correct: grid has no pilot subcarriers");
  if (cols.size() != pilot_values.size()) throw Error("cpe_correct: pilot value count mismatch");
  std::vector<double> trace;
  double previous = 0.0;
  for (std::size_t r = 0; r < grid.n_symbols(); ++r) {
    if (grid.training[r]) continue;
    auto row = grid.row(r);
    const Complex corr = detail::pilot_correlation(row, cols, pilot_values);
    if (std::abs(corr) == 0.0) throw Error("cpe_correct: zero pilot energy");
    const double phi = detail::unwrap_near(std::arg(corr), previous);
    previous = phi;
    trace.push_back(phi);
    const Complex rot = std::polar(1.0, -phi);
    for (auto& s : row) s *= rot;
  }
  return trace;
}

/// Dual-polarization CPE. With `tied`, one estimate is formed from both
/// polarizations assuming the y rotation is the negative of x (conjugate twins).
inline PhaseTrace cpe_correct(DualPolGrid& grid, std::span<const Complex> pilots_x, std::span<const Complex> pilots_y, bool tied) {
  if (!tied) return {cpe_correct(grid.x, pilots_x), cpe_correct(grid.y, pilots_y)};
  const auto cols = detail::pilot_columns(grid.x);
  if (cols.empty()) throw Error("cpe_correct: grid has no pilot subcarriers");
  PhaseTrace trace;
  double previous = 0.0;
  for (std::size_t r = 0; r < grid.x.n_symbols(); ++r) {
    if (grid.x.training[r]) continue;
    auto rx = grid.x.row(r);
    auto ry = grid.y.row(r);
    const Complex corr = detail::pilot_correlation(rx, cols, pilots_x) + std::conj(detail::pilot_correlation(ry, cols, pilots_y));
    if (std::abs(corr) == 0.0) throw Error("cpe_correct: zero pilot energy");
    const double phi = detail::unwrap_near(std::arg(corr), previous);
    previous = phi;
    trace.x.push_back(phi);
    trace.y.push_back(-phi);
    const Complex rot = std::polar(1.0, -phi);
    for (auto& s : rx) s *= rot;
    for (auto& s : ry) s *= std::conj(rot);
  }
  return trace;
}

inline void write_phase_trace(const PhaseTrace& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path);
  os << std::setprecision(12) << "symbol,phi_x,phi_y\n";
  for (std::size_t i = 0; i < trace.x.size(); ++i) os << i << ',' << trace.x[i] << ',' << trace.y[i] << '\n';
}

}  // namespace lpcsim
