#include <gtest/gtest.h>

#include "lpcsim/channel.hpp"

using namespace lpcsim;

namespace {

DualPolWaveform random_wave(std::size_t n, std::uint64_t seed, double fs = 64e9) {
  RandomSource rng(seed);
  return DualPolWaveform(gaussian_noise(rng, n, 0.5), gaussian_noise(rng, n, 0.5), fs);
}

CVec power_spectrum(CVec v) {
  fft::forward(v);
  for (auto& s : v) s = std::norm(s);
  return v;
}

double max_abs_diff(const CVec& a, const CVec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Fiber, DerivedCoefficients) {
  const FiberParams f;
  // beta2 = -D lambda^2 / (2 pi c) with c in nm/ps, giving ps^2/km.
  const double beta2_ps2_km = -16.0 * 1550.0 * 1550.0 / (2.0 * kPi * 2.99792458e5);
  EXPECT_NEAR(f.beta2() * 1e27, beta2_ps2_km, 1e-9);
  EXPECT_NEAR(f.beta2() * 1e27, -20.4, 0.05);
  EXPECT_NEAR(f.gamma(), 1.22e-3, 0.01e-3);
  EXPECT_NEAR(f.alpha() * 80e3, 16.0 * std::log(10.0) / 10.0, 1e-12);
  FiberParams g;
  g.gamma_override = 2e-3;
  EXPECT_EQ(g.gamma(), 2e-3);
}

TEST(Fiber, Validation) {
  FiberParams f;
  f.alpha_db_per_km = -0.1;
  EXPECT_THROW(f.validate(), Error);
  f = FiberParams{};
  f.span_length_km = 0.0;
  EXPECT_THROW(f.validate(), Error);
}

TEST(Launch, ZeroDbmIsOneMilliwatt) {
  const auto w = set_launch_power(random_wave(1000, 1), 0.0);
  EXPECT_NEAR(w.mean_power(), 1e-3, 1e-15);
}

TEST(Launch, ThreeDbm) {
  const double oracle = std::pow(10.0, 0.3) * 1e-3;
  EXPECT_NEAR(oracle, 1.995e-3, 0.001e-3);
  EXPECT_NEAR(set_launch_power(random_wave(1000, 1), 3.0).mean_power(), oracle, 1e-15);
}

TEST(Launch, Idempotent) {
  const auto once = set_launch_power(random_wave(100, 2), -2.0);
  const auto twice = set_launch_power(once, -2.0);
  EXPECT_LT(max_abs_diff(once.x, twice.x), 1e-14 * std::sqrt(once.peak_power()));
}

TEST(Launch, ZeroWaveformRejected) { EXPECT_THROW(set_launch_power(DualPolWaveform(CVec(4), CVec(4), 1e9), 0.0), Error); }

TEST(PreEdc, ZeroFractionIsIdentity) {
  const auto w = random_wave(256, 3);
  LinkConfig link;
  link.pre_edc_fraction = 0.0;
  EXPECT_EQ(pre_edc(w, link).x, w.x);
}

TEST(PreEdc, AllPass) {
  const auto w = random_wave(512, 4);
  LinkConfig link;
  link.pre_edc_fraction = 0.5;
  const auto out = pre_edc(w, link);
  const auto a = power_spectrum(w.x), b = power_spectrum(out.x);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k].real(), b[k].real(), 1e-9 * (1.0 + a[k].real()));
}

TEST(PreEdc, CancelsWithLinearFiberAndReceiverEdc) {
  auto w = random_wave(1024, 5);
  LinkConfig link;
  link.n_spans = 2;
  link.pre_edc_fraction = 0.5;
  link.fiber.gamma_override = 0.0;
  link.amp.ase = false;
  RandomSource rng(1);
  auto out = propagate_link(w, link, rng);
  out = apply_dispersion(std::move(out), -0.5 * link.total_dispersion());
  EXPECT_LT(max_abs_diff(out.x, w.x), 1e-8 * std::sqrt(w.peak_power()));
  EXPECT_LT(max_abs_diff(out.y, w.y), 1e-8 * std::sqrt(w.peak_power()));
}

TEST(Span, LinearLosslessPreservesPowerSpectrum) {
  const auto w = random_wave(512, 6);
  FiberParams f;
  f.gamma_override = 0.0;
  f.alpha_db_per_km = 0.0;
  const auto out = propagate_span(w, f, StepControl{});
  const auto a = power_spectrum(w.x), b = power_spectrum(out.x);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k].real(), b[k].real(), 1e-10 * (1.0 + a[k].real()));
}

TEST(Span, LossOnlyGivesMinusSixteenDb) {
  const auto w = random_wave(256, 7);
  FiberParams f;
  f.gamma_override = 0.0;
  const auto out = propagate_span(w, f, StepControl{});
  EXPECT_NEAR(10.0 * std::log10(out.mean_power() / w.mean_power()), -16.0, 1e-9);
}

TEST(Span, EnergyConservedWithoutLoss) {
  const auto w = set_launch_power(random_wave(1024, 8), 6.0);
  FiberParams f;
  f.alpha_db_per_km = 0.0;
  const auto out = propagate_span(w, f, StepControl{});
  EXPECT_NEAR(out.mean_power(), w.mean_power(), 1e-8 * w.mean_power());
}

TEST(Span, ContinuousWaveManakovPhase) {
  const double p = 10e-3;
  DualPolWaveform w(CVec(64, Complex{std::sqrt(p), 0.0}), CVec(64), 64e9);
  FiberParams f;
  f.alpha_db_per_km = 0.0;
  f.dispersion_ps_nm_km = 0.0;
  const auto out = propagate_span(w, f, StepControl{});
  const double expected = 8.0 / 9.0 * f.gamma() * p * f.span_length();
  for (const auto& s : out.x) EXPECT_NEAR(std::arg(s), expected, 1e-6);
}

TEST(Span, DeterministicOutput) {
  const auto w = set_launch_power(random_wave(512, 9), 4.0);
  const FiberParams f;
  EXPECT_EQ(propagate_span(w, f, StepControl{}).x, propagate_span(w, f, StepControl{}).x);
}

TEST(Span, NonFiniteFieldDiagnosed) {
  auto w = random_wave(64, 10);
  w.x[3] = Complex{std::numeric_limits<double>::infinity(), 0.0};
  FiberParams f;
  f.gamma_override = 0.0;
  EXPECT_THROW(propagate_span(w, f, StepControl{}), Error);
}

TEST(Edfa, AsePowerMatchesFormula) {
  AmplifierParams amp;
  const double g = std::pow(10.0, 1.6);
  const double nsp = std::pow(10.0, 0.4) / 2.0;
  const double oracle = (g - 1.0) * nsp * 6.62607015e-34 * 193.4e12 * 64e9;
  EXPECT_NEAR(oracle, 4.0e-7, 0.05e-7);
  EXPECT_NEAR(amp.ase_psd() * 64e9, oracle, 1e-12 * oracle);

  DualPolWaveform w(CVec(1'000'000), CVec(1'000'000), 64e9);
  RandomSource rng(12);
  const auto out = edfa(w, amp, rng);
  double px = 0.0, py = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    px += std::norm(out.x[i]);
    py += std::norm(out.y[i]);
  }
  EXPECT_NEAR(px / 1e6, oracle, 0.02 * oracle);
  EXPECT_NEAR(py / 1e6, oracle, 0.02 * oracle);
}

TEST(Edfa, NoiseOffIsPureGain) {
  const auto w = random_wave(128, 13);
  AmplifierParams amp;
  amp.ase = false;
  RandomSource rng(1);
  EXPECT_NEAR(edfa(w, amp, rng).mean_power(), w.mean_power() * std::pow(10.0, 1.6), 1e-12 * w.mean_power() * 40);
  amp.gain_db = 0.0;
  EXPECT_EQ(edfa(w, amp, rng).x, w.x);
}

TEST(Edfa, LowNoiseFigureWarns) {
  AmplifierParams amp;
  EXPECT_FALSE(amp.warning());
  amp.noise_figure_db = 2.5;
  EXPECT_TRUE(amp.warning());
}

TEST(Link, ZeroSpansIsPreEdcOnly) {
  const auto w = random_wave(256, 14);
  LinkConfig link;
  link.n_spans = 0;
  link.pre_edc_fraction = 0.5;
  RandomSource rng(1);
  EXPECT_LT(max_abs_diff(propagate_link(w, link, rng).x, pre_edc(w, link).x), 1e-18);
}

TEST(Link, ObserverCalledPerSpan) {
  LinkConfig link;
  link.n_spans = 3;
  link.fiber.gamma_override = 0.0;
  std::vector<std::size_t> seen;
  RandomSource rng(1);
  propagate_link(random_wave(64, 15), link, rng, [&](std::size_t s, const DualPolWaveform&) { seen.push_back(s); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Link, InvalidPreEdcRejected) {
  LinkConfig link;
  link.pre_edc_fraction = 1.5;
  EXPECT_THROW(link.validate(), Error);
}
