// Fiber link: launch power, electronic dispersion pre-compensation,
// split-step Manakov propagation and lumped EDFA gain with inline ASE.
#pragma once

#include <functional>
#include <iostream>
#include <optional>

#include "lpcsim/fft.hpp"
#include "lpcsim/signal_core.hpp"

namespace lpcsim {

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s
inline constexpr double kPlanck = 6.62607015e-34;      // J s
inline constexpr double kManakovFactor = 8.0 / 9.0;

/// Fiber parameters in engineering units; SI accessors derive the propagation
/// coefficients. gamma follows from n2 and the (assumed) effective area.
struct FiberParams {
  double alpha_db_per_km = 0.2;
  double dispersion_ps_nm_km = 16.0;
  double wavelength_nm = 1550.0;
  double n2 = 2.4e-20;               // m^2/W
  double effective_area_um2 = 80.0;  // not given for the reference link
  double span_length_km = 80.0;
  std::optional<double> gamma_override;  // 1/(W m)

  /// Power attenuation coefficient, 1/m.
  double alpha() const { return alpha_db_per_km / (10.0 * std::log10(std::exp(1.0))) / 1e3; }

  /// Group-velocity dispersion, s^2/m.
  double beta2() const {
    const double d = dispersion_ps_nm_km * 1e-6;  // ps/(nm km) -> s/m^2
    const double lambda = wavelength_nm * 1e-9;
    return -d * lambda * lambda / (2.0 * kPi * kSpeedOfLight);
  }

  /// Kerr coefficient, 1/(W m).
  double gamma() const {
    if (gamma_override) return *gamma_override;
    return 2.0 * kPi * n2 / (wavelength_nm * 1e-9 * effective_area_um2 * 1e-12);
  }

  double span_length() const { return span_length_km * 1e3; }

  void validate() const {
    if (!(alpha_db_per_km >= 0.0)) throw Error("fiber: alpha must be non-negative");
    if (!(span_length_km > 0.0)) throw Error("fiber: span length must be positive");
    if (!(wavelength_nm > 0.0)) throw Error("fiber: wavelength must be positive");
    if (!gamma_override && !(effective_area_um2 > 0.0)) throw Error("fiber: effective area must be positive");
    if (!(gamma() >= 0.0) || !std::isfinite(gamma())) throw Error("fiber: gamma must be finite and non-negative");
  }
};

struct AmplifierParams {
  double gain_db = 16.0;
  double noise_figure_db = 4.0;
  double center_frequency = 193.4e12;  // Hz
  bool ase = true;

  double gain() const { return std::pow(10.0, gain_db / 10.0); }
  /// Spontaneous emission factor from the high-gain relation NF = 2 n_sp.
  double n_sp() const { return ase ? std::pow(10.0, noise_figure_db / 10.0) / 2.0 : 0.0; }
  /// ASE power spectral density per polarization, W/Hz.
  double ase_psd() const { return (gain() - 1.0) * n_sp() * kPlanck * center_frequency; }

  void validate() const {
    if (!(gain_db >= 0.0)) throw Error("amplifier: gain_db must be non-negative");
    if (!(center_frequency > 0.0)) throw Error("amplifier: center frequency must be positive");
  }

  /// Non-empty when the noise figure is below the quantum limit.
  std::optional<std::string> warning() const {
    if (ase && noise_figure_db < 3.0) return "amplifier: noise figure below 3 dB is unphysical for the n_sp model";
    return std::nullopt;
  }
};

/// Split-step step-size control.
struct StepControl {
  double max_nonlinear_phase = 0.05;  // rad per step, evaluated at peak power
  double max_step_km = 1.0;

  void validate() const {
    if (!(max_nonlinear_phase > 0.0) || !(max_step_km > 0.0)) throw Error("step control: limits must be positive");
  }
};

struct LinkConfig {
  std::size_t n_spans = 35;
  FiberParams fiber;
  AmplifierParams amp;
  double pre_edc_fraction = 0.0;
  StepControl step;

  double total_length() const { return static_cast<double>(n_spans) * fiber.span_length(); }
  /// Accumulated beta2 * L of the fiber, s^2.
  double total_dispersion() const { return fiber.beta2() * total_length(); }

  void validate() const {
    fiber.validate();
    amp.validate();
    step.validate();
    if (!(pre_edc_fraction >= 0.0 && pre_edc_fraction <= 1.0)) throw Error("link: pre_edc_fraction must lie in [0, 1]");
  }
};

/// Total power across both polarizations in dBm -> W.
inline double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

inline DualPolWaveform set_launch_power(DualPolWaveform wave, double p_dbm) {
  const double current = wave.mean_power();
  if (!(current > 0.0)) throw Error("set_launch_power: waveform has zero power");
  const double s = std::sqrt(dbm_to_watt(p_dbm) / current);
  for (auto& v : wave.x) v *= s;
  for (auto& v : wave.y) v *= s;
  return wave;
}

/// All-pass dispersion filter exp(i * accumulated * w^2 / 2) applied over the
/// whole (periodic) frame; `accumulated` is the integral of beta2 in s^2.
inline DualPolWaveform apply_dispersion(DualPolWaveform wave, double accumulated) {
  if (accumulated == 0.0) return wave;
  const auto w = fft::angular_frequencies(wave.size(), wave.sample_rate);
  const double inv_n = 1.0 / static_cast<double>(wave.size());
  for (CVec* pol : {&wave.x, &wave.y}) {
    fft::forward(*pol);
    for (std::size_t k = 0; k < w.size(); ++k) (*pol)[k] *= std::polar(inv_n, 0.5 * accumulated * w[k] * w[k]);
    fft::inverse(*pol);
  }
  return wave;
}

/// Transmitter-side removal of a fraction of the link dispersion.
inline DualPolWaveform pre_edc(DualPolWaveform wave, const LinkConfig& link) {
  return apply_dispersion(std::move(wave), -link.pre_edc_fraction * link.total_dispersion());
}

/// Symmetric split-step solution of the Manakov equation over one span.
/// Linear half-steps (dispersion and loss) are merged between consecutive
/// nonlinear kicks; step length adapts to the peak-power nonlinear phase.
inline DualPolWaveform propagate_span(DualPolWaveform wave, const FiberParams& fiber, const StepControl& step) {
  wave.validate();
  step.validate();
  const double alpha = fiber.alpha();
  const double beta2 = fiber.beta2();
  const double gamma_eff = kManakovFactor * fiber.gamma();
  const double length = fiber.span_length();
  const double max_step = step.max_step_km * 1e3;
  const std::size_t n = wave.size();
  const auto w = fft::angular_frequencies(n, wave.sample_rate);
  const double inv_n = 1.0 / static_cast<double>(n);

  auto next_step = [&](double remaining) {
    double h = std::min(max_step, remaining);
    const double peak = wave.peak_power();
    if (gamma_eff > 0.0 && peak > 0.0) h = std::min(h, step.max_nonlinear_phase / (gamma_eff * peak));
    // Avoid a sliver at the end of the span.
    if (remaining - h < 1e-3 * h) h = remaining;
    return h;
  };

  CVec factors(n);
  double cached_h = -1.0;
  auto linear = [&](double h) {
    if (h != cached_h) {
      for (std::size_t k = 0; k < n; ++k) factors[k] = std::polar(inv_n * std::exp(-0.5 * alpha * h), 0.5 * beta2 * w[k] * w[k] * h);
      cached_h = h;
    }
    for (CVec* pol : {&wave.x, &wave.y}) {
      fft::forward(*pol);
      for (std::size_t k = 0; k < n; ++k) (*pol)[k] *= factors[k];
      fft::inverse(*pol);
    }
  };

  auto nonlinear = [&](double h) {
    if (gamma_eff == 0.0) return;
    // Exact integral of the loss-decayed power over a step centered on this point.
    const double h_eff = alpha > 0.0 ? 2.0 * std::sinh(0.5 * alpha * h) / alpha : h;
    for (std::size_t i = 0; i < n; ++i) {
      const double phi = gamma_eff * (std::norm(wave.x[i]) + std::norm(wave.y[i])) * h_eff;
      const Complex rot = std::polar(1.0, phi);
      wave.x[i] *= rot;
      wave.y[i] *= rot;
    }
  };

  double z = 0.0;
  double h = next_step(length);
  linear(0.5 * h);
  while (true) {
    nonlinear(h);
    z += h;
    if (length - z <= 1e-9 * length) {
      linear(0.5 * h);
      break;
    }
    const double h_next = next_step(length - z);
    linear(0.5 * (h + h_next));
    h = h_next;
  }
  if (!wave.all_finite()) throw Error("propagate_span: non-finite field (check launch power and step control)");
  return wave;
}

/// Lumped amplifier: field gain sqrt(G) plus circular white ASE on each
/// polarization with total complex variance S_ase * sample_rate.
inline DualPolWaveform edfa(DualPolWaveform wave, const AmplifierParams& amp, RandomSource& rng) {
  const double g = std::sqrt(amp.gain());
  for (auto& v : wave.x) v *= g;
  for (auto& v : wave.y) v *= g;
  const double variance = amp.ase_psd() * wave.sample_rate;
  if (variance > 0.0) {
    for (CVec* pol : {&wave.x, &wave.y}) {
      const CVec noise = gaussian_noise(rng, pol->size(), 0.5 * variance);
      for (std::size_t i = 0; i < pol->size(); ++i) (*pol)[i] += noise[i];
    }
  }
  return wave;
}

/// Called after every amplified span with (span index, field) when set.
using SpanObserver = std::function<void(std::size_t, const DualPolWaveform&)>;

/// pre-EDC followed by n_spans x (fiber span, EDFA).
inline DualPolWaveform propagate_link(DualPolWaveform wave, const LinkConfig& link, RandomSource& rng,
                                      const SpanObserver& observer = {}) {
  link.validate();
  if (auto warn = link.amp.warning()) std::clog << "warning: " << *warn << '\n';
  wave = pre_edc(std::move(wave), link);
  for (std::size_t s = 0; s < link.n_spans; ++s) {
    wave = propagate_span(std::move(wave), link.fiber, link.step);
    wave = edfa(std::move(wave), link.amp, rng);
    if (observer) observer(s, wave);
  }
  return wave;
}

}  // namespace lpcsim
