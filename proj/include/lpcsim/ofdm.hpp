// OFDM framing: subcarrier layout, pilots and training, CP-OFDM modulation.
#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "lpcsim/fft.hpp"
#include "lpcsim/signal_core.hpp"

namespace lpcsim {

struct OfdmParams {
  std::size_t fft_size = 4096;
  std::size_t n_data = 3300;
  std::size_t n_pilots = 4;
  double cp_fraction = 0.03;
  double sample_rate = 64e9;
  /// Zero-padding factor of the transform (1 = no extra oversampling).
  std::size_t oversampling = 1;
  /// Training symbols at the start of every period.
  std::size_t training_period = 100;
  std::size_t training_symbols = 2;

  std::size_t n_active() const { return n_data + n_pilots; }
  std::size_t cp_samples() const { return static_cast<std::size_t>(std::llround(cp_fraction * static_cast<double>(fft_size))); }
  std::size_t transform_size() const { return fft_size * oversampling; }
  std::size_t symbol_samples() const { return (fft_size + cp_samples()) * oversampling; }
  double waveform_rate() const { return sample_rate * static_cast<double>(oversampling); }
  double subcarrier_spacing() const { return sample_rate / static_cast<double>(fft_size); }
  double occupied_bandwidth() const { return static_cast<double>(n_active()) * subcarrier_spacing(); }

  bool is_training(std::size_t symbol) const { return symbol % training_period < training_symbols; }

  void validate() const {
    if (fft_size == 0) throw Error("ofdm: fft_size must be positive");
    if (n_data == 0) throw Error("ofdm: n_data must be positive");
    if (n_active() > fft_size) throw Error("ofdm: n_data + n_pilots exceeds fft_size");
    if (!(cp_fraction >= 0.0 && cp_fraction < 1.0)) throw Error("ofdm: cp_fraction must lie in [0, 1)");
    if (!(sample_rate > 0.0)) throw Error("ofdm: sample_rate must be positive");
    if (oversampling == 0) throw Error("ofdm: oversampling must be >= 1");
    if (training_period == 0 || training_symbols == 0 || training_symbols >= training_period)
      throw Error("ofdm: need 0 < training_symbols < training_period");
  }
};

/// Data-carrying bit rate for a scheme with the given bits per data subcarrier.
inline double net_bit_rate(const OfdmParams& p, double bits_per_subcarrier = 4.0) {
  const double symbol_rate = p.sample_rate / static_cast<double>(p.fft_size + p.cp_samples());
  const double training_efficiency =
      static_cast<double>(p.training_period - p.training_symbols) / static_cast<double>(p.training_period);
  return symbol_rate * static_cast<double>(p.n_data) * bits_per_subcarrier * training_efficiency;
}

enum class SubcarrierRole : std::uint8_t { null, data, pilot };

/// Subcarrier role map in centered order: column c sits at frequency
/// (c - fft_size/2) * spacing. The active band is centered on DC; pilots are
/// spread evenly across it.
struct FrameLayout {
  std::size_t fft_size = 0;
  std::vector<SubcarrierRole> roles;
  std::vector<std::size_t> data_columns;
  std::vector<std::size_t> pilot_columns;

  static FrameLayout build(const OfdmParams& p) {
    p.validate();
    FrameLayout layout;
    layout.fft_size = p.fft_size;
    layout.roles.assign(p.fft_size, SubcarrierRole::null);
    const std::size_t active = p.n_active();
    const std::size_t first = p.fft_size / 2 - active / 2;
    std::vector<bool> is_pilot(active, false);
    for (std::size_t i = 0; i < p.n_pilots; ++i) {
      const auto pos = static_cast<std::size_t>((static_cast<double>(i) + 0.5) * static_cast<double>(active) / static_cast<double>(p.n_pilots));
      is_pilot[pos] = true;
    }
    for (std::size_t a = 0; a < active; ++a) {
      const std::size_t col = first + a;
      if (is_pilot[a]) {
        layout.roles[col] = SubcarrierRole::pilot;
        layout.pilot_columns.push_back(col);
      } else {
        layout.roles[col] = SubcarrierRole::data;
        layout.data_columns.push_back(col);
      }
    }
    return layout;
  }

  /// Signed frequency index of a centered column.
  std::ptrdiff_t frequency_index(std::size_t column) const {
    return static_cast<std::ptrdiff_t>(column) - static_cast<std::ptrdiff_t>(fft_size / 2);
  }

  bool active(std::size_t column) const { return roles[column] != SubcarrierRole::null; }
};

/// Frequency-domain payload of one polarization: rows are OFDM symbols,
/// columns are centered subcarriers.
struct SymbolGrid {
  std::size_t width = 0;
  std::vector<Complex> symbols;  // row-major, n_symbols x width
  std::vector<SubcarrierRole> roles;
  std::vector<bool> training;  // per row

  SymbolGrid() = default;
  SymbolGrid(const FrameLayout& layout, std::size_t n_symbols)
      : width(layout.fft_size), symbols(n_symbols * layout.fft_size, Complex{}), roles(layout.roles), training(n_symbols, false) {}

  std::size_t n_symbols() const { return width == 0 ? 0 : symbols.size() / width; }
  std::size_t n_data() const { return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), SubcarrierRole::data)); }

  std::span<Complex> row(std::size_t i) { return {symbols.data() + i * width, width}; }
  std::span<const Complex> row(std::size_t i) const { return {symbols.data() + i * width, width}; }
  Complex& at(std::size_t r, std::size_t c) { return symbols[r * width + c]; }
  const Complex& at(std::size_t r, std::size_t c) const { return symbols[r * width + c]; }

  double energy() const {
    double e = 0.0;
    for (const auto& s : symbols) e += std::norm(s);
    return e;
  }
};

struct DualPolGrid {
  SymbolGrid x;
  SymbolGrid y;
};

/// Grid with data rows only (no training), filled from `data` in row-major
/// data-column order.
inline SymbolGrid place_data(const FrameLayout& layout, std::span<const Complex> data) {
  const std::size_t per_row = layout.data_columns.size();
  if (data.size() % per_row != 0) throw Error("place_data: data count is not a whole number of OFDM symbols");
  SymbolGrid grid(layout, data.size() / per_row);
  std::size_t k = 0;
  for (std::size_t r = 0; r < grid.n_symbols(); ++r)
    for (auto col : layout.data_columns) grid.at(r, col) = data[k++];
  return grid;
}

/// Data-subcarrier values of the non-training rows, row-major.
inline CVec extract_data(const SymbolGrid& grid) {
  CVec out;
  for (std::size_t r = 0; r < grid.n_symbols(); ++r) {
    if (grid.training[r]) continue;
    for (std::size_t c = 0; c < grid.width; ++c)
      if (grid.roles[c] == SubcarrierRole::data) out.push_back(grid.at(r, c));
  }
  return out;
}

/// Number of data rows in a frame of `total` OFDM symbols.
inline std::size_t data_symbol_count(const OfdmParams& p, std::size_t total) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < total; ++i) n += p.is_training(i) ? 0 : 1;
  return n;
}

/// Writes the known pilot values into every data row and interleaves the
/// training rows (cycled from `training`) at the configured period. The input
/// grid holds data rows only; anything already present on a pilot column is a
/// collision.
inline SymbolGrid insert_pilots_and_training(const SymbolGrid& data_grid, const OfdmParams& p,
                                             std::span<const Complex> pilot_values, const SymbolGrid& training) {
  if (pilot_values.size() != p.n_pilots) throw Error("insert_pilots_and_training: pilot count mismatch");
  if (training.n_symbols() == 0 || training.width != data_grid.width)
    throw Error("insert_pilots_and_training: training grid shape mismatch");
  std::vector<std::size_t> pilot_cols;
  for (std::size_t c = 0; c < data_grid.width; ++c)
    if (data_grid.roles[c] == SubcarrierRole::pilot) pilot_cols.push_back(c);
  if (pilot_cols.size() != p.n_pilots) throw Error("insert_pilots_and_training: grid does not have n_pilots pilot columns");

  const std::size_t n_data_rows = data_grid.n_symbols();
  std::size_t total = 0;
  for (std::size_t placed = 0; placed < n_data_rows; ++total)
    if (!p.is_training(total)) ++placed;

  SymbolGrid out;
  out.width = data_grid.width;
  out.roles = data_grid.roles;
  out.symbols.assign(total * out.width, Complex{});
  out.training.assign(total, false);

  std::size_t src = 0;
  std::size_t train_row = 0;
  for (std::size_t r = 0; r < total; ++r) {
    auto dst = out.row(r);
    if (p.is_training(r)) {
      out.training[r] = true;
      const auto t = training.row(train_row++ % training.n_symbols());
      std::copy(t.begin(), t.end(), dst.begin());
      continue;
    }
    const auto s = data_grid.row(src++);
    std::copy(s.begin(), s.end(), dst.begin());
    for (std::size_t i = 0; i < pilot_cols.size(); ++i) {
      if (dst[pilot_cols[i]] != Complex{}) throw Error("insert_pilots_and_training: pilot position collides with data");
      dst[pilot_cols[i]] = pilot_values[i];
    }
  }
  return out;
}

/// Known QPSK training rows (unit power) on every active subcarrier.
inline SymbolGrid make_training(const FrameLayout& layout, std::size_t n_rows, std::uint64_t seed) {
  SymbolGrid grid(layout, n_rows);
  RandomSource rng(seed, 0x7a1);
  const double a = 1.0 / std::sqrt(2.0);
  for (std::size_t r = 0; r < n_rows; ++r) {
    grid.training[r] = true;
    for (std::size_t c = 0; c < layout.fft_size; ++c) {
      if (!layout.active(c)) continue;
      const auto bits = rng.next_u64();
      grid.at(r, c) = Complex{(bits & 1U) ? -a : a, (bits & 2U) ? -a : a};
    }
  }
  return grid;
}

/// Fixed unit-power pilot pattern cycling through the QPSK points.
inline CVec default_pilots(std::size_t n) {
  const double a = 1.0 / std::sqrt(2.0);
  const Complex pattern[] = {{a, a}, {-a, a}, {-a, -a}, {a, -a}};
  CVec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = pattern[i % 4];
  return out;
}

inline SymbolGrid conjugated(SymbolGrid grid) {
  for (auto& s : grid.symbols) s = std::conj(s);
  return grid;
}

namespace detail {

inline void modulate_pol(const SymbolGrid& grid, const OfdmParams& p, CVec& out) {
  const std::size_t m = p.transform_size();
  const std::size_t cp = p.cp_samples() * p.oversampling;
  const std::size_t half = grid.width / 2;
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  out.assign(grid.n_symbols() * p.symbol_samples(), Complex{});
  CVec buf(m);
  for (std::size_t r = 0; r < grid.n_symbols(); ++r) {
    std::fill(buf.begin(), buf.end(), Complex{});
    const auto row = grid.row(r);
    for (std::size_t c = 0; c < grid.width; ++c) {
      const auto f = static_cast<std::ptrdiff_t>(c) - static_cast<std::ptrdiff_t>(half);
      const std::size_t bin = f >= 0 ? static_cast<std::size_t>(f) : m - static_cast<std::size_t>(-f);
      buf[bin] = row[c];
    }
    fft::inverse(buf);
    auto dst = out.begin() + static_cast<std::ptrdiff_t>(r * p.symbol_samples());
    for (std::size_t i = 0; i < cp; ++i) *dst++ = buf[m - cp + i] * scale;
    for (std::size_t i = 0; i < m; ++i) *dst++ = buf[i] * scale;
  }
}

inline SymbolGrid demodulate_pol(std::span<const Complex> samples, const OfdmParams& p, const FrameLayout& layout) {
  const std::size_t m = p.transform_size();
  const std::size_t cp = p.cp_samples() * p.oversampling;
  const std::size_t n_sym = samples.size() / p.symbol_samples();
  const std::size_t half = layout.fft_size / 2;
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  SymbolGrid grid(layout, n_sym);
  CVec buf(m);
  for (std::size_t r = 0; r < n_sym; ++r) {
    grid.training[r] = p.is_training(r);
    const auto src = samples.subspan(r * p.symbol_samples() + cp, m);
    std::copy(src.begin(), src.end(), buf.begin());
    fft::forward(buf);
    for (std::size_t c = 0; c < layout.fft_size; ++c) {
      const auto f = static_cast<std::ptrdiff_t>(c) - static_cast<std::ptrdiff_t>(half);
      const std::size_t bin = f >= 0 ? static_cast<std::size_t>(f) : m - static_cast<std::size_t>(-f);
      grid.at(r, c) = buf[bin] * scale;
    }
  }
  return grid;
}

}  // namespace detail

/// Unitary inverse transform per OFDM symbol with cyclic prefix; both
/// polarizations are processed identically.
inline DualPolWaveform ofdm_modulate(const DualPolGrid& grid, const OfdmParams& p) {
  p.validate();
  if (grid.x.width != p.fft_size || grid.y.width != p.fft_size) throw Error("ofdm_modulate: grid width differs from fft_size");
  if (grid.x.n_symbols() != grid.y.n_symbols()) throw Error("ofdm_modulate: polarizations have different symbol counts");
  if (grid.x.n_symbols() == 0) throw Error("ofdm_modulate: empty grid");
  DualPolWaveform wave;
  wave.sample_rate = p.waveform_rate();
  detail::modulate_pol(grid.x, p, wave.x);
  detail::modulate_pol(grid.y, p, wave.y);
  return wave;
}

/// Strips the cyclic prefix and transforms each symbol back to the grid.
/// Training flags are reconstructed from the configured period.
inline DualPolGrid ofdm_demodulate(const DualPolWaveform& wave, const OfdmParams& p, const FrameLayout& layout) {
  p.validate();
  if (wave.size() == 0 || wave.size() % p.symbol_samples() != 0)
    throw Error("ofdm_demodulate: waveform length is not a multiple of the OFDM symbol length");
  return {detail::demodulate_pol(wave.x, p, layout), detail::demodulate_pol(wave.y, p, layout)};
}

/// Text manifest of the subcarrier role map.
inline void write_layout_manifest(const FrameLayout& layout, const OfdmParams& p, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path);
  os << "# fft_size=" << p.fft_size << " n_data=" << p.n_data << " n_pilots=" << p.n_pilots << " cp_samples=" << p.cp_samples()
     << " sample_rate=" << p.sample_rate << " training=" << p.training_symbols << "/" << p.training_period << '\n';
  os << "column,frequency_index,role\n";
  static constexpr const char* names[] = {"null", "data", "pilot"};
  for (std::size_t c = 0; c < layout.fft_size; ++c)
    os << c << ',' << layout.frequency_index(c) << ',' << names[static_cast<int>(layout.roles[c])] << '\n';
}

}  // namespace lpcsim
