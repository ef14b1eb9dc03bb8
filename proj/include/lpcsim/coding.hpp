// Constellations and the four polarization/subcarrier coding schemes.
//
// Raw alphabets are kept on their natural integer grids (QPSK on {+-1 +- i},
// 16-QAM on {+-1, +-3}^2); the CodingScheme implementations scale every
// transmitted alphabet to unit mean power per polarization.
#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "lpcsim/signal_core.hpp"

namespace lpcsim {

/// Points ordered by label: points[i] carries the bit pattern of i, MSB first.
struct Constellation {
  CVec points;
  unsigned bits_per_symbol = 0;

  std::size_t size() const { return points.size(); }

  double mean_power() const {
    double acc = 0.0;
    for (const auto& p : points) acc += std::norm(p);
    return acc / static_cast<double>(points.size());
  }

  double min_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t j = i + 1; j < points.size(); ++j) best = std::min(best, std::abs(points[i] - points[j]));
    return best;
  }

  Constellation scaled(double factor) const {
    Constellation out = *this;
    for (auto& p : out.points) p *= factor;
    return out;
  }

  /// Copy rescaled to unit mean power.
  Constellation normalized() const { return scaled(1.0 / std::sqrt(mean_power())); }
};

/// Gray QPSK: 00 -> +1+i, 01 -> -1+i, 11 -> -1-i, 10 -> +1-i.
inline const Constellation& qpsk_constellation() {
  static const Constellation c{{{1, 1}, {-1, 1}, {1, -1}, {-1, -1}}, 2};
  return c;
}

/// Gray square 16-QAM. The first bit pair selects the in-phase level
/// (00 -3, 01 -1, 11 +1, 10 +3), the second the quadrature level
/// (00 +3, 01 +1, 11 -1, 10 -3); 0000 -> -3+3i.
inline const Constellation& qam16_constellation() {
  static const Constellation c = [] {
    constexpr std::array<double, 4> in_phase{-3, -1, 3, 1};     // index = 2-bit label
    constexpr std::array<double, 4> quadrature{3, 1, -3, -1};
    Constellation out;
    out.bits_per_symbol = 4;
    for (unsigned label = 0; label < 16; ++label)
      out.points.emplace_back(in_phase[label >> 2], quadrature[label & 3U]);
    return out;
  }();
  return c;
}

namespace detail {

inline unsigned read_label(std::span<const std::uint8_t> bits, std::size_t offset, unsigned width) {
  unsigned label = 0;
  for (unsigned b = 0; b < width; ++b) {
    const auto bit = bits[offset + b];
    if (bit > 1) throw Error("bit stream contains a value other than 0/1");
    label = (label << 1U) | bit;
  }
  return label;
}

inline void write_label(std::vector<std::uint8_t>& out, unsigned label, unsigned width) {
  for (unsigned b = width; b-- > 0;) out.push_back(static_cast<std::uint8_t>((label >> b) & 1U));
}

inline CVec map_bits(std::span<const std::uint8_t> bits, const Constellation& c, const char* what) {
  if (bits.size() % c.bits_per_symbol != 0)
    throw Error(std::string(what) + ": bit count not divisible by " + std::to_string(c.bits_per_symbol));
  CVec out;
  out.reserve(bits.size() / c.bits_per_symbol);
  for (std::size_t i = 0; i < bits.size(); i += c.bits_per_symbol) out.push_back(c.points[read_label(bits, i, c.bits_per_symbol)]);
  return out;
}

}  // namespace detail

inline CVec qpsk_map(std::span<const std::uint8_t> bits) { return detail::map_bits(bits, qpsk_constellation(), "qpsk_map"); }

inline CVec qam16_map(std::span<const std::uint8_t> bits) { return detail::map_bits(bits, qam16_constellation(), "qam16_map"); }

/// Nearest alphabet point; ties resolve to the lowest index.
inline std::size_t ml_detect(Complex received, const Constellation& alphabet) {
  if (alphabet.points.empty()) throw Error("ml_detect: empty alphabet");
  std::size_t best = 0;
  double best_d = std::norm(received - alphabet.points[0]);
  for (std::size_t i = 1; i < alphabet.points.size(); ++i) {
    const double d = std::norm(received - alphabet.points[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

/// Hard decision of every symbol, concatenating the detected labels.
inline std::vector<std::uint8_t> demap(std::span<const Complex> symbols, const Constellation& alphabet) {
  std::vector<std::uint8_t> bits;
  bits.reserve(symbols.size() * alphabet.bits_per_symbol);
  for (const auto& s : symbols) detail::write_label(bits, static_cast<unsigned>(ml_detect(s, alphabet)), alphabet.bits_per_symbol);
  return bits;
}

// ---------------------------------------------------------------------------
// Linear polarization coding
// ---------------------------------------------------------------------------

/// 16-point alphabet {a + ratio * b : a, b in QPSK}. Label = label(a) << 2 | label(b).
inline Constellation lpc_alphabet(double ratio = 0.5) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error("lpc_alphabet: ratio must lie in (0, 1)");
  const auto& q = qpsk_constellation();
  Constellation out;
  out.bits_per_symbol = 4;
  for (const auto& a : q.points)
    for (const auto& b : q.points) out.points.push_back(a + ratio * b);
  return out;
}

/// Transmitted x/y polarization symbol sequences.
struct PolSymbols {
  CVec x;
  CVec y;
};

namespace detail {

inline bool is_raw_qpsk(Complex a) {
  constexpr double tol = 1e-12;
  return std::abs(std::abs(a.real()) - 1.0) < tol && std::abs(std::abs(a.imag()) - 1.0) < tol;
}

}  // namespace detail

/// Pairs consecutive QPSK symbols (full, half amplitude) into one codeword and
/// transmits it with its conjugate on the orthogonal polarization.
inline PolSymbols lpc_encode(std::span<const Complex> qpsk_symbols) {
  if (qpsk_symbols.size() % 2 != 0) throw Error("lpc_encode: odd number of QPSK symbols");
  PolSymbols out;
  out.x.reserve(qpsk_symbols.size() / 2);
  out.y.reserve(qpsk_symbols.size() / 2);
  for (std::size_t i = 0; i < qpsk_symbols.size(); i += 2) {
    const Complex a = qpsk_symbols[i];
    const Complex b = qpsk_symbols[i + 1];
    if (!detail::is_raw_qpsk(a) || !detail::is_raw_qpsk(b)) throw Error("lpc_encode: input is not a QPSK symbol");
    const Complex s = a + b / 2.0;
    out.x.push_back(s);
    out.y.push_back(std::conj(s));
  }
  return out;
}

/// Received pair (Bx, By) -> (Rx, Ry) with Ry = conj(Rx).
inline std::pair<Complex, Complex> coherent_superpose(Complex bx, Complex by) {
  const Complex rx = (bx + std::conj(by)) / 2.0;
  return {rx, std::conj(rx)};
}

/// Inverse of the codeword construction: index -> (full-amplitude, half-amplitude) QPSK pair.
inline std::pair<Complex, Complex> lut_decode(std::size_t codeword) {
  if (codeword >= 16) throw Error("lut_decode: codeword index out of range");
  const auto& q = qpsk_constellation();
  return {q.points[codeword >> 2U], q.points[codeword & 3U]};
}

// ---------------------------------------------------------------------------
// Phase-conjugated twin waves and phase-conjugated subcarrier coding
// ---------------------------------------------------------------------------

inline PolSymbols pctw_encode(std::span<const Complex> symbols) {
  PolSymbols out{CVec(symbols.begin(), symbols.end()), CVec(symbols.size())};
  std::transform(symbols.begin(), symbols.end(), out.y.begin(), [](Complex s) { return std::conj(s); });
  return out;
}

/// Adjacent-subcarrier pair transform on one polarization:
///   S(2k-1) = (A(2k-1) + A(2k)) / sqrt2,  S(2k) = (A*(2k-1) - A*(2k)) / sqrt2.
inline CVec pcsc_encode(std::span<const Complex> symbols) {
  if (symbols.size() % 2 != 0) throw Error("pcsc_encode: odd data count");
  const double r = 1.0 / std::sqrt(2.0);
  CVec out(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); i += 2) {
    const Complex a = symbols[i];
    const Complex b = symbols[i + 1];
    out[i] = (a + b) * r;
    out[i + 1] = std::conj(a - b) * r;
  }
  return out;
}

inline CVec pcsc_decode(std::span<const Complex> received) {
  if (received.size() % 2 != 0) throw Error("pcsc_decode: odd data count");
  const double r = 1.0 / std::sqrt(2.0);
  CVec out(received.size());
  for (std::size_t i = 0; i < received.size(); i += 2) {
    const Complex first = received[i];
    const Complex second_conj = std::conj(received[i + 1]);
    out[i] = (first + second_conj) * r;
    out[i + 1] = (first - second_conj) * r;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scheme interface
// ---------------------------------------------------------------------------

enum class SchemeId { lpc_pcts, pcsc, pctw_16qam, pdm_4qam };

inline std::string_view scheme_name(SchemeId id) {
  switch (id) {
    case SchemeId::lpc_pcts: return "lpc-pcts";
    case SchemeId::pcsc: return "pcsc";
    case SchemeId::pctw_16qam: return "pctw-16qam";
    case SchemeId::pdm_4qam: return "pdm-4qam";
  }
  return "?";
}

inline SchemeId parse_scheme(std::string_view name) {
  for (auto id : {SchemeId::lpc_pcts, SchemeId::pcsc, SchemeId::pctw_16qam, SchemeId::pdm_4qam})
    if (scheme_name(id) == name) return id;
  throw Error("unknown scheme '" + std::string(name) + "'");
}

/// Maps a bit stream onto x/y data-subcarrier symbols and back. Every scheme
/// carries four bits per data subcarrier summed over both polarizations and
/// transmits unit mean power per polarization.
class CodingScheme {
 public:
  static constexpr std::size_t kBitsPerSubcarrier = 4;

  virtual ~CodingScheme() = default;

  virtual SchemeId id() const = 0;
  std::string_view name() const { return scheme_name(id()); }

  /// y-polarization carries the conjugate of x (pilots and training included).
  virtual bool conjugate_twin() const = 0;

  /// Data subcarriers per OFDM symbol must be a multiple of this.
  virtual std::size_t subcarrier_granularity() const { return 1; }

  /// bits.size() must be 4 * n; returns n symbols per polarization.
  virtual PolSymbols encode(std::span<const std::uint8_t> bits) const = 0;

  /// Receiver combining into the decision domain (superposition, pair decoding).
  virtual CVec combine(std::span<const Complex> bx, std::span<const Complex> by) const = 0;

  /// Hard decisions on combined symbols; inverse of encode's bit layout.
  virtual std::vector<std::uint8_t> decide(std::span<const Complex> combined) const = 0;

  std::vector<std::uint8_t> decode(std::span<const Complex> bx, std::span<const Complex> by) const {
    if (bx.size() != by.size()) throw Error("decode: polarization lengths differ");
    return decide(combine(bx, by));
  }

 protected:
  static void check_bits(std::span<const std::uint8_t> bits, std::size_t granularity) {
    if (bits.size() % (kBitsPerSubcarrier * granularity) != 0) throw Error("encode: bit count does not fill whole subcarrier groups");
  }
};

class LpcPctsScheme final : public CodingScheme {
 public:
  LpcPctsScheme() : alphabet_(lpc_alphabet(0.5)), scale_(1.0 / std::sqrt(alphabet_.mean_power())), normalized_(alphabet_.scaled(scale_)) {}

  SchemeId id() const override { return SchemeId::lpc_pcts; }
  bool conjugate_twin() const override { return true; }

  PolSymbols encode(std::span<const std::uint8_t> bits) const override {
    check_bits(bits, 1);
    const CVec qpsk = qpsk_map(bits);
    PolSymbols out = lpc_encode(qpsk);
    for (auto& s : out.x) s *= scale_;
    for (auto& s : out.y) s *= scale_;
    return out;
  }

  CVec combine(std::span<const Complex> bx, std::span<const Complex> by) const override {
    CVec out(bx.size());
    for (std::size_t i = 0; i < bx.size(); ++i) out[i] = coherent_superpose(bx[i], by[i]).first;
    return out;
  }

  std::vector<std::uint8_t> decide(std::span<const Complex> combined) const override {
    std::vector<std::uint8_t> bits;
    bits.reserve(combined.size() * 4);
    for (const auto& r : combined) {
      const auto [a, b] = lut_decode(ml_detect(r, normalized_));
      detail::write_label(bits, static_cast<unsigned>(ml_detect(a, qpsk_constellation())), 2);
      detail::write_label(bits, static_cast<unsigned>(ml_detect(b, qpsk_constellation())), 2);
    }
    return bits;
  }

  const Constellation& alphabet() const { return normalized_; }

 private:
  Constellation alphabet_;
  double scale_;
  Constellation normalized_;
};

class Pctw16QamScheme final : public CodingScheme {
 public:
  Pctw16QamScheme() : normalized_(qam16_constellation().normalized()) {}

  SchemeId id() const override { return SchemeId::pctw_16qam; }
  bool conjugate_twin() const override { return true; }

  PolSymbols encode(std::span<const std::uint8_t> bits) const override {
    check_bits(bits, 1);
    return pctw_encode(detail::map_bits(bits, normalized_, "pctw-16qam"));
  }

  CVec combine(std::span<const Complex> bx, std::span<const Complex> by) const override {
    CVec out(bx.size());
    for (std::size_t i = 0; i < bx.size(); ++i) out[i] = coherent_superpose(bx[i], by[i]).first;
    return out;
  }

  std::vector<std::uint8_t> decide(std::span<const Complex> combined) const override { return demap(combined, normalized_); }

 private:
  Constellation normalized_;
};

class PdmQpskScheme final : public CodingScheme {
 public:
  PdmQpskScheme() : normalized_(qpsk_constellation().normalized()) {}

  SchemeId id() const override { return SchemeId::pdm_4qam; }
  bool conjugate_twin() const override { return false; }

  PolSymbols encode(std::span<const std::uint8_t> bits) const override {
    check_bits(bits, 1);
    const CVec all = detail::map_bits(bits, normalized_, "pdm-4qam");
    PolSymbols out;
    out.x.reserve(all.size() / 2);
    out.y.reserve(all.size() / 2);
    for (std::size_t i = 0; i < all.size(); i += 2) {
      out.x.push_back(all[i]);
      out.y.push_back(all[i + 1]);
    }
    return out;
  }

  CVec combine(std::span<const Complex> bx, std::span<const Complex> by) const override {
    CVec out;
    out.reserve(2 * bx.size());
    for (std::size_t i = 0; i < bx.size(); ++i) {
      out.push_back(bx[i]);
      out.push_back(by[i]);
    }
    return out;
  }

  std::vector<std::uint8_t> decide(std::span<const Complex> combined) const override { return demap(combined, normalized_); }

 private:
  Constellation normalized_;
};

/// Independent data on both polarizations, each coded pairwise over adjacent
/// subcarriers. Bits of pair k: [a_x, b_x, a_y, b_y], two bits each.
class PcscScheme final : public CodingScheme {
 public:
  PcscScheme() : normalized_(qpsk_constellation().normalized()) {}

  SchemeId id() const override { return SchemeId::pcsc; }
  bool conjugate_twin() const override { return false; }
  std::size_t subcarrier_granularity() const override { return 2; }

  PolSymbols encode(std::span<const std::uint8_t> bits) const override {
    check_bits(bits, 2);
    const CVec all = detail::map_bits(bits, normalized_, "pcsc");
    CVec ax, ay;
    ax.reserve(all.size() / 2);
    ay.reserve(all.size() / 2);
    for (std::size_t i = 0; i < all.size(); i += 4) {
      ax.push_back(all[i]);
      ax.push_back(all[i + 1]);
      ay.push_back(all[i + 2]);
      ay.push_back(all[i + 3]);
    }
    return {pcsc_encode(ax), pcsc_encode(ay)};
  }

  CVec combine(std::span<const Complex> bx, std::span<const Complex> by) const override {
    const CVec ax = pcsc_decode(bx);
    const CVec ay = pcsc_decode(by);
    CVec out;
    out.reserve(2 * bx.size());
    for (std::size_t i = 0; i < ax.size(); i += 2) {
      out.push_back(ax[i]);
      out.push_back(ax[i + 1]);
      out.push_back(ay[i]);
      out.push_back(ay[i + 1]);
    }
    return out;
  }

  std::vector<std::uint8_t> decide(std::span<const Complex> combined) const override { return demap(combined, normalized_); }

 private:
  Constellation normalized_;
};

inline std::unique_ptr<CodingScheme> make_scheme(SchemeId id) {
  switch (id) {
    case SchemeId::lpc_pcts: return std::make_unique<LpcPctsScheme>();
    case SchemeId::pcsc: return std::make_unique<PcscScheme>();
    case SchemeId::pctw_16qam: return std::make_unique<Pctw16QamScheme>();
    case SchemeId::pdm_4qam: return std::make_unique<PdmQpskScheme>();
  }
  throw Error("make_scheme: invalid id");
}

inline std::unique_ptr<CodingScheme> make_scheme(std::string_view name) { return make_scheme(parse_scheme(name)); }

/// Label tables as a plain-text fixture: "<label bits> <re> <im>" per line.
inline std::string constellation_table(const Constellation& c, std::string_view title) {
  std::ostringstream os;
  os << "# " << title << " bits_per_symbol=" << c.bits_per_symbol << " mean_power=" << std::setprecision(17) << c.mean_power() << '\n';
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    for (unsigned b = c.bits_per_symbol; b-- > 0;) os << ((i >> b) & 1U);
    os << ' ' << c.points[i].real() << ' ' << c.points[i].imag() << '\n';
  }
  return os.str();
}

}  // namespace lpcsim
