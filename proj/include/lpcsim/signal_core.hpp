// Core numeric types, reproducible random sources and the dual-polarization
// waveform container.
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpcsim {

using Complex = std::complex<double>;
using CVec = std::vector<Complex>;

/// Base exception for all simulator errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

/// Sampled complex baseband fields of both polarizations, in sqrt(W).
struct DualPolWaveform {
  CVec x;
  CVec y;
  double sample_rate = 0.0;  // samples per second

  DualPolWaveform() = default;
  DualPolWaveform(CVec x_pol, CVec y_pol, double rate)
      : x(std::move(x_pol)), y(std::move(y_pol)), sample_rate(rate) {
    validate();
  }

  std::size_t size() const { return x.size(); }

  /// mean(|x|^2 + |y|^2)
  double mean_power() const {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::norm(x[i]) + std::norm(y[i]);
    return acc / static_cast<double>(x.size());
  }

  double peak_power() const {
    double peak = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) peak = std::max(peak, std::norm(x[i]) + std::norm(y[i]));
    return peak;
  }

  bool all_finite() const {
    auto finite = [](const Complex& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); };
    return std::all_of(x.begin(), x.end(), finite) && std::all_of(y.begin(), y.end(), finite);
  }

  void validate() const {
    if (x.empty() || x.size() != y.size())
      throw Error("waveform: polarizations must have equal, non-zero length");
    if (!(sample_rate > 0.0)) throw Error("waveform: sample_rate must be positive");
  }
};

struct BitStream {
  std::vector<std::uint8_t> bits;
  std::uint64_t seed = 0;

  std::size_t size() const { return bits.size(); }
};

/// SplitMix64 finalizer, used to derive independent engine seeds.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seeded random source. Distinct (seed, stream) pairs give statistically
/// independent sequences; split() derives child streams without touching the
/// parent's state.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), engine_(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

  RandomSource split(std::uint64_t child) const {
    return RandomSource(seed_, splitmix64(stream_) ^ splitmix64(child + 1));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  /// Number of engine words consumed so far.
  std::uint64_t draws() const { return draws_; }

  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }

  /// Standard normal deviate.
  double normal() {
    // normal_distribution caches its second polar sample; account for engine use
    // through the wrapper so draws() stays meaningful.
    struct Counting {
      using result_type = std::mt19937_64::result_type;
      RandomSource* self;
      static constexpr result_type min() { return std::mt19937_64::min(); }
      static constexpr result_type max() { return std::mt19937_64::max(); }
      result_type operator()() { return self->next_u64(); }
    } gen{this};
    return normal_(gen);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Uniform i.i.d. bit source standing in for the transmitter PRBS.
inline BitStream prbs_generate(std::uint64_t seed, std::size_t n) {
  BitStream out;
  out.seed = seed;
  out.bits.resize(n);
  RandomSource rng(seed, 0x9b5);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 64 == 0) word = rng.next_u64();
    out.bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
  }
  return out;
}

/// Circular complex Gaussian samples; real and imaginary parts each have
/// the given variance.
inline CVec gaussian_noise(RandomSource& rng, std::size_t n, double variance_per_component) {
  if (!(variance_per_component >= 0.0)) throw Error("gaussian_noise: variance must be non-negative");
  CVec out(n, Complex{0.0, 0.0});
  if (variance_per_component == 0.0) return out;
  const double sigma = std::sqrt(variance_per_component);
  for (auto& v : out) {
    const double re = rng.normal();
    const double im = rng.normal();
    v = Complex{sigma * re, sigma * im};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Waveform dump format
//
// Binary (little-endian):
//   "DPWF" | u32 version=1 | f64 sample_rate | u64 length | length x (f64 re, f64 im) for x |
//   same for y
// Text:
//   # dpwf sample_rate=<Hz> length=<n>
//   x re,im re,im ...
//   y re,im re,im ...
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> buf{};
  std::memcpy(buf.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  os.write(buf.data(), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  std::array<char, sizeof(T)> buf{};
  if (!is.read(buf.data(), sizeof(T))) throw Error("waveform dump: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  T value;
  std::memcpy(&value, buf.data(), sizeof(T));
  return value;
}

}  // namespace detail

inline void write_waveform_binary(const DualPolWaveform& wave, const std::string& path) {
  wave.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  os.write("DPWF", 4);
  detail::put_le<std::uint32_t>(os, 1);
  detail::put_le<double>(os, wave.sample_rate);
  detail::put_le<std::uint64_t>(os, wave.size());
  for (const CVec* pol : {&wave.x, &wave.y}) {
    for (const auto& s : *pol) {
      detail::put_le<double>(os, s.real());
      detail::put_le<double>(os, s.imag());
    }
  }
  if (!os) throw Error("write failed: " + path);
}

inline void write_waveform_text(const DualPolWaveform& wave, const std::string& path) {
  wave.validate();
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << std::setprecision(17);
  os << "# dpwf sample_rate=" << wave.sample_rate << " length=" << wave.size() << '\n';
  const char* tags[] = {"x", "y"};
  const CVec* pols[] = {&wave.x, &wave.y};
  for (int p = 0; p < 2; ++p) {
    os << tags[p];
    for (const auto& s : *pols[p]) os << ' ' << s.real() << ',' << s.imag();
    os << '\n';
  }
  if (!os) throw Error("write failed: " + path);
}

/// Reads either dump flavour (detected from the first bytes).
inline DualPolWaveform read_waveform(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (is && std::memcmp(magic, "DPWF", 4) == 0) {
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != 1) throw Error("waveform dump: unsupported version");
    const double rate = detail::get_le<double>(is);
    const auto n = detail::get_le<std::uint64_t>(is);
    CVec x(n), y(n);
    for (CVec* pol : {&x, &y}) {
      for (auto& s : *pol) {
        const double re = detail::get_le<double>(is);
        const double im = detail::get_le<double>(is);
        s = Complex{re, im};
      }
    }
    return DualPolWaveform(std::move(x), std::move(y), rate);
  }

  is.clear();
  is.seekg(0);
  std::string header;
  std::getline(is, header);
  double rate = 0.0;
  std::size_t length = 0;
  {
    std::istringstream hs(header);
    std::string tok;
    hs >> tok;
    if (tok != "#") throw Error("waveform dump: missing header");
    while (hs >> tok) {
      if (tok.rfind("sample_rate=", 0) == 0) rate = std::stod(tok.substr(12));
      if (tok.rfind("length=", 0) == 0) length = std::stoull(tok.substr(7));
    }
  }
  auto read_pol = [&](const char* tag) {
    std::string line;
    if (!std::getline(is, line)) throw Error("waveform dump: missing polarization line");
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok != tag) throw Error(std::string("waveform dump: expected polarization ") + tag);
    CVec out;
    out.reserve(length);
    while (ls >> tok) {
      const auto comma = tok.find(',');
      if (comma == std::string::npos) throw Error("waveform dump: malformed sample '" + tok + "'");
      out.emplace_back(std::stod(tok.substr(0, comma)), std::stod(tok.substr(comma + 1)));
    }
    if (out.size() != length) throw Error("waveform dump: length mismatch");
    return out;
  };
  CVec x = read_pol("x");
  CVec y = read_pol("y");
  return DualPolWaveform(std::move(x), std::move(y), rate);
}

}  // namespace lpcsim
