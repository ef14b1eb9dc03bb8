// First-order perturbation model of Manakov propagation.
//
// With the transmitted spectrum E(w) (periodic frame, e(t_n) = sum_k E_k e^{i w_k t_n})
// and the linear solution E(z,w) = exp(G(z)/2 + i w^2 C(z)/2) E(w), the
// first-order distortion referred back to the link input is
//
//   dE_x(w) = i (8/9) gamma  sum_{w1,w2} eta((w1-w)(w2-w))
//             [ E_x(w1) E_x(w2) E_x*(w1+w2-w) + E_y(w1) E_x(w2) E_y*(w1+w2-w) ]
//   eta(p)  = int_0^L exp(G(z) - i p C(z)) dz
//
// and likewise for y with the roles swapped. C(z) includes any transmitter
// pre-compensation, so a 50% pre-EDC link has C(z) = -C(L-z).
#pragma once

#include <fstream>
#include <optional>
#include <unordered_map>

#include "lpcsim/channel.hpp"
#include "lpcsim/signal_core.hpp"

namespace lpcsim {

/// Sampled power (G) and cumulative dispersion (C) maps over z in [0, L].
/// Lumped gain makes G discontinuous; such points appear twice in `z` so the
/// trapezoidal rule never integrates across a jump.
struct LinkProfile {
  std::vector<double> z;
  std::vector<double> G;  // log power evolution
  std::vector<double> C;  // cumulative dispersion incl. pre-compensation, s^2

  double length() const { return z.empty() ? 0.0 : z.back(); }

  /// Lumped-amplifier (sawtooth) power map of a configured link.
  static LinkProfile lumped(const LinkConfig& link, double dz = 100.0) {
    return build(link, dz, /*distributed=*/false);
  }

  /// Same dispersion map with ideal distributed gain (G == 0), the symmetric
  /// power map G(z) = G(L - z).
  static LinkProfile distributed(const LinkConfig& link, double dz = 100.0) {
    return build(link, dz, /*distributed=*/true);
  }

  /// max_z |C(z) + C(L - z)| / max_z |C(z)|, evaluated on the span grid.
  double dispersion_asymmetry() const {
    double worst = 0.0;
    double scale = 0.0;
    for (double c : C) scale = std::max(scale, std::abs(c));
    if (scale == 0.0) return 0.0;
    const double len = length();
    for (std::size_t i = 0; i < z.size(); ++i) worst = std::max(worst, std::abs(C[i] + dispersion_at(len - z[i])));
    return worst / scale;
  }

  double dispersion_at(double zq) const {
    // C is continuous and piecewise linear.
    auto it = std::lower_bound(z.begin(), z.end(), zq);
    if (it == z.begin()) return C.front();
    if (it == z.end()) return C.back();
    const auto i = static_cast<std::size_t>(it - z.begin());
    const double t = z[i] == z[i - 1] ? 0.0 : (zq - z[i - 1]) / (z[i] - z[i - 1]);
    return C[i - 1] + t * (C[i] - C[i - 1]);
  }

 private:
  static LinkProfile build(const LinkConfig& link, double dz, bool distributed) {
    link.validate();
    if (!(dz > 0.0)) throw Error("link profile: dz must be positive");
    if (link.n_spans == 0) throw Error("link profile: need at least one span");
    const double alpha = link.fiber.alpha();
    const double beta2 = link.fiber.beta2();
    const double span = link.fiber.span_length();
    const double c0 = -link.pre_edc_fraction * link.total_dispersion();
    const double net_gain = std::log(link.amp.gain()) - alpha * span;  // per span, natural log of power
    const auto steps = static_cast<std::size_t>(std::ceil(span / dz));

    LinkProfile p;
    double g_start = 0.0;
    for (std::size_t s = 0; s < link.n_spans; ++s) {
      const double z0 = static_cast<double>(s) * span;
      for (std::size_t i = 0; i <= steps; ++i) {
        const double local = span * static_cast<double>(i) / static_cast<double>(steps);
        p.z.push_back(z0 + local);
        p.G.push_back(distributed ? 0.0 : g_start - alpha * local);
        p.C.push_back(c0 + beta2 * (z0 + local));
      }
      if (!distributed) g_start += net_gain;
    }
    return p;
  }
};

/// Nonlinear transfer function eta = int exp(G(z) - i w1 w2 C(z)) dz (trapezoidal).
inline Complex eta(double w1, double w2, const LinkProfile& profile) {
  if (profile.z.size() < 2) throw Error("eta: empty link profile");
  const double p = w1 * w2;
  Complex acc{};
  Complex prev = std::exp(Complex{profile.G[0], -p * profile.C[0]});
  for (std::size_t i = 1; i < profile.z.size(); ++i) {
    const Complex cur = std::exp(Complex{profile.G[i], -p * profile.C[i]});
    acc += 0.5 * (profile.z[i] - profile.z[i - 1]) * (prev + cur);
    prev = cur;
  }
  return acc;
}

/// (1 - exp(-alpha L)) / alpha, or L for a lossless fiber.
inline double effective_length(double alpha, double length) {
  return alpha > 0.0 ? -std::expm1(-alpha * length) / alpha : length;
}

/// First-order distortion spectra in centered bin order, referred to the link
/// input, together with the normalization constants used to evaluate them.
struct DistortionField {
  CVec delta_x;
  CVec delta_y;
  double power_scale = 0.0;  // P0: peak power of the frame, W
  double l_eff = 0.0;        // m
};

inline constexpr std::size_t kOracleMaxBins = 256;

/// Evaluates the first-order double sum for every output bin. Spectra are in
/// centered order (bin c at frequency (c - n/2) * sample_rate / n) with the
/// normalization e(t_n) = sum_k E_k exp(i w_k t_n). Mixing products that fall
/// outside the grid are dropped, so the signal should occupy at most a third
/// of it.
inline DistortionField first_order_distortion(std::span<const Complex> spec_x, std::span<const Complex> spec_y,
                                              double sample_rate, const LinkProfile& profile, const FiberParams& fiber) {
  const std::size_t n = spec_x.size();
  if (n == 0 || spec_y.size() != n) throw Error("first_order_distortion: spectra must be non-empty and equal length");
  if (n > kOracleMaxBins) throw Error("first_order_distortion: grid of " + std::to_string(n) + " bins exceeds the oracle limit");
  const auto half = static_cast<std::ptrdiff_t>(n / 2);
  const double dw = 2.0 * kPi * sample_rate / static_cast<double>(n);
  const double gamma_eff = kManakovFactor * fiber.gamma();

  DistortionField out;
  out.delta_x.assign(n, Complex{});
  out.delta_y.assign(n, Complex{});
  out.l_eff = effective_length(fiber.alpha(), profile.length());

  // Peak power of the frame in time, from the inverse DFT of the spectra.
  {
    CVec tx(n), ty(n);
    for (std::size_t c = 0; c < n; ++c) {
      const auto f = static_cast<std::ptrdiff_t>(c) - half;
      const std::size_t bin = f >= 0 ? static_cast<std::size_t>(f) : n - static_cast<std::size_t>(-f);
      tx[bin] = spec_x[c];
      ty[bin] = spec_y[c];
    }
    fft::inverse(tx);
    fft::inverse(ty);
    for (std::size_t i = 0; i < n; ++i) out.power_scale = std::max(out.power_scale, std::norm(tx[i]) + std::norm(ty[i]));
  }
  if (out.power_scale == 0.0) return out;

  const double amp = 1.0 / std::sqrt(out.power_scale);
  std::vector<std::ptrdiff_t> occupied;
  CVec ux(n), uy(n);
  for (std::size_t c = 0; c < n; ++c) {
    ux[c] = spec_x[c] * amp;
    uy[c] = spec_y[c] * amp;
    if (spec_x[c] != Complex{} || spec_y[c] != Complex{}) occupied.push_back(static_cast<std::ptrdiff_t>(c));
  }

  // eta depends only on the integer product of bin offsets.
  std::unordered_map<std::ptrdiff_t, Complex> eta_cache;
  auto eta_norm = [&](std::ptrdiff_t m) {
    auto it = eta_cache.find(m);
    if (it != eta_cache.end()) return it->second;
    const Complex v = eta(static_cast<double>(m) * dw, dw, profile) / out.l_eff;
    eta_cache.emplace(m, v);
    return v;
  };

  const auto n_signed = static_cast<std::ptrdiff_t>(n);
  for (std::ptrdiff_t w = 0; w < n_signed; ++w) {
    Complex sx{}, sy{};
    for (auto k1 : occupied) {
      for (auto k2 : occupied) {
        const std::ptrdiff_t k3 = k1 + k2 - w;
        if (k3 < 0 || k3 >= n_signed) continue;
        const Complex x3 = std::conj(ux[static_cast<std::size_t>(k3)]);
        const Complex y3 = std::conj(uy[static_cast<std::size_t>(k3)]);
        if (x3 == Complex{} && y3 == Complex{}) continue;
        const Complex e = eta_norm((k1 - w) * (k2 - w));
        const auto i1 = static_cast<std::size_t>(k1);
        const auto i2 = static_cast<std::size_t>(k2);
        sx += e * (ux[i1] * ux[i2] * x3 + uy[i1] * ux[i2] * y3);
        sy += e * (uy[i1] * uy[i2] * y3 + ux[i1] * uy[i2] * x3);
      }
    }
    const Complex scale = Complex{0.0, gamma_eff * out.power_scale * out.l_eff} / amp;
    out.delta_x[static_cast<std::size_t>(w)] = scale * sx;
    out.delta_y[static_cast<std::size_t>(w)] = scale * sy;
  }
  return out;
}

struct AntiCorrelation {
  Complex corr;           // <dx, -conj(dy)> / (|dx| |dy|)
  double residual_ratio;  // |dx + conj(dy)|^2 / |dx|^2
};

inline AntiCorrelation anti_correlation_check(std::span<const Complex> delta_x, std::span<const Complex> delta_y) {
  if (delta_x.size() != delta_y.size()) throw Error("anti_correlation_check: length mismatch");
  Complex inner{};
  double nx = 0.0, ny = 0.0, resid = 0.0;
  for (std::size_t i = 0; i < delta_x.size(); ++i) {
    const Complex partner = -std::conj(delta_y[i]);
    inner += delta_x[i] * std::conj(partner);
    nx += std::norm(delta_x[i]);
    ny += std::norm(delta_y[i]);
    resid += std::norm(delta_x[i] + std::conj(delta_y[i]));
  }
  if (nx == 0.0 || ny == 0.0) throw Error("anti_correlation_check: zero-norm distortion");
  return {inner / std::sqrt(nx * ny), resid / nx};
}

/// CSV of eta over a square grid of angular frequencies: w1,w2,re,im.
inline void write_eta_grid(const LinkProfile& profile, std::span<const double> omegas, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path);
  os << std::setprecision(12) << "w1,w2,re_eta,im_eta\n";
  for (double w1 : omegas)
    for (double w2 : omegas) {
      const Complex e = eta(w1, w2, profile);
      os << w1 << ',' << w2 << ',' << e.real() << ',' << e.imag() << '\n';
    }
}

}  // namespace lpcsim
