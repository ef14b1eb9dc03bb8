#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "lpcsim/ofdm.hpp"

using namespace lpcsim;

namespace {

OfdmParams small_params() {
  OfdmParams p;
  p.fft_size = 64;
  p.n_data = 40;
  p.n_pilots = 4;
  p.sample_rate = 1e9;
  return p;
}

SymbolGrid random_grid(const FrameLayout& layout, std::size_t rows, std::uint64_t seed) {
  RandomSource rng(seed);
  const auto data = gaussian_noise(rng, rows * layout.data_columns.size(), 0.5);
  return place_data(layout, data);
}

}  // namespace

TEST(OfdmParams, ReferenceValues) {
  const OfdmParams p;
  EXPECT_EQ(p.cp_samples(), 123u);
  EXPECT_DOUBLE_EQ(p.subcarrier_spacing(), 15.625e6);
  EXPECT_EQ(p.n_active(), 3304u);
}

TEST(OfdmParams, NetRateNearTwoHundredGbps) {
  // Independent evaluation: fs * (n_data / fft) * 4 bits / (1 + cp) * 98/100.
  const double oracle = 64e9 * (3300.0 / 4096.0) * 4.0 / (1.0 + 123.0 / 4096.0) * 0.98;
  EXPECT_NEAR(net_bit_rate(OfdmParams{}), oracle, 1e-6 * oracle);
  EXPECT_NEAR(oracle / 200e9, 1.0, 0.05);
}

TEST(OfdmParams, Validation) {
  auto p = small_params();
  p.n_data = 64;
  EXPECT_THROW(p.validate(), Error);
  p = small_params();
  p.training_symbols = 0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Layout, CenteredBandWithEvenlySpacedPilots) {
  const auto layout = FrameLayout::build(small_params());
  EXPECT_EQ(layout.data_columns.size(), 40u);
  ASSERT_EQ(layout.pilot_columns.size(), 4u);
  const std::size_t first = 32 - 22;
  EXPECT_EQ(layout.pilot_columns[0], first + 5);
  EXPECT_EQ(layout.pilot_columns[1], first + 16);
  EXPECT_EQ(layout.pilot_columns[2], first + 27);
  EXPECT_EQ(layout.pilot_columns[3], first + 38);
  EXPECT_FALSE(layout.active(first - 1));
  EXPECT_FALSE(layout.active(first + 44));
  EXPECT_EQ(layout.frequency_index(32), 0);
}

TEST(Layout, ManifestListsEveryColumn) {
  const auto p = small_params();
  const auto layout = FrameLayout::build(p);
  const auto path = (std::filesystem::temp_directory_path() / "lpcsim_layout.txt").string();
  write_layout_manifest(layout, p, path);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line.rfind("# fft_size=64 n_data=40 n_pilots=4", 0), 0u) << line;
  std::getline(is, line);
  EXPECT_EQ(line, "column,frequency_index,role");
  std::map<std::string, int> counts;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    counts[line.substr(line.rfind(',') + 1)]++;
  }
  EXPECT_EQ(rows, 64u);
  EXPECT_EQ(counts["data"], 40);
  EXPECT_EQ(counts["pilot"], 4);
  EXPECT_EQ(counts["null"], 20);
}

TEST(Modulate, SingleSubcarrierIsConstantModulus) {
  const auto p = small_params();
  const auto layout = FrameLayout::build(p);
  SymbolGrid g(layout, 1);
  g.at(0, layout.data_columns[3]) = 1.0;
  const auto w = ofdm_modulate({g, g}, p);
  ASSERT_EQ(w.size(), p.symbol_samples());
  for (const auto& s : w.x) EXPECT_NEAR(std::abs(s), 1.0 / 8.0, 1e-14);
}

TEST(Modulate, ZeroGridGivesZeroWaveform) {
  const auto p = small_params();
  const auto layout = FrameLayout::build(p);
  SymbolGrid g(layout, 3);
  const auto w = ofdm_modulate({g, g}, p);
  for (const auto& s : w.x) EXPECT_EQ(s, Complex{});
}

TEST(Modulate, RoundTripAndParseval) {
  const auto p = small_params();
  const auto layout = FrameLayout::build(p);
  const auto gx = random_grid(layout, 5, 1);
  const auto gy = random_grid(layout, 5, 2);
  const auto w = ofdm_modulate({gx, gy}, p);
  const auto back = ofdm_demodulate(w, p, layout);
  for (std::size_t i = 0; i < gx.symbols.size(); ++i) {
    EXPECT_NEAR(std::abs(back.x.symbols[i] - gx.symbols[i]), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(back.y.symbols[i] - gy.symbols[i]), 0.0, 1e-12);
  }
  // Time-domain energy without the cyclic prefix equals grid energy.
  double e_time = 0.0;
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t i = p.cp_samples(); i < p.symbol_samples(); ++i) e_time += std::norm(w.x[r * p.symbol_samples() + i]);
  EXPECT_NEAR(e_time, gx.energy(), 1e-10 * gx.energy());
  // Null columns stay exactly zero.
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < layout.fft_size; ++c)
      if (!layout.active(c)) {
        EXPECT_LT(std::abs(back.x.at(r, c)), 1e-15);
      }
}

TEST(Modulate, OversampledRoundTrip) {
  auto p = small_params();
  p.oversampling = 2;
  const auto layout = FrameLayout::build(p);
  const auto g = random_grid(layout, 2, 3);
  const auto w = ofdm_modulate({g, g}, p);
  EXPECT_EQ(w.size(), 2 * p.symbol_samples());
  EXPECT_DOUBLE_EQ(w.sample_rate, 2e9);
  const auto back = ofdm_demodulate(w, p, layout);
  for (std::size_t i = 0; i < g.symbols.size(); ++i) EXPECT_NEAR(std::abs(back.x.symbols[i] - g.symbols[i]), 0.0, 1e-12);
}

TEST(Demodulate, CyclicDelayIsLinearPhase) {
  const auto p = small_params();
  const auto layout = FrameLayout::build(p);
  const auto g = random_grid(layout, 1, 4);
  auto w = ofdm_modulate({g, g}, p);
  const std::size_t d = 1;  // <= cp_samples
  ASSERT_LE(d, p.cp_samples());
  CVec delayed(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) delayed[i] = w.x[(i + w.size() - d) % w.size()];
  w.x = delayed;
  w.y = delayed;
  const auto back = ofdm_demodulate(w, p, layout);
  for (std::size_t c = 0; c < layout.fft_size; ++c) {
    const double n = static_cast<double>(layout.frequency_index(c));
    const Complex expected = g.at(0, c) * std::polar(1.0, -2.0 * kPi * n * static_cast<double>(d) / 64.0);
    EXPECT_NEAR(std::abs(back.x.at(0, c) - expected), 0.0, 1e-12);
  }
}

TEST(Demodulate, WrongLengthRejected) {
  const auto p = small_params();
  const auto layout = FrameLayout::build(p);
  DualPolWaveform w(CVec(p.symbol_samples() + 1), CVec(p.symbol_samples() + 1), 1e9);
  EXPECT_THROW(ofdm_demodulate(w, p, layout), Error);
}

TEST(Modulate, WidthMismatchRejected) {
  const auto p = small_params();
  auto q = p;
  q.fft_size = 128;
  const auto layout = FrameLayout::build(q);
  SymbolGrid g(layout, 1);
  EXPECT_THROW(ofdm_modulate({g, g}, p), Error);
}

TEST(Framing, PilotsAndTraining) {
  const auto p = small_params();
  const auto layout = FrameLayout::build(p);
  const auto data = random_grid(layout, data_symbol_count(p, 100), 5);
  const auto pilots = default_pilots(4);
  const auto training = make_training(layout, 2, 9);
  const auto frame = insert_pilots_and_training(data, p, pilots, training);
  ASSERT_EQ(frame.n_symbols(), 100u);
  EXPECT_EQ(std::count(frame.training.begin(), frame.training.end(), true), 2);
  std::size_t data_row = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    if (frame.training[r]) continue;
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(frame.at(r, layout.pilot_columns[i]), pilots[i]);
    for (auto c : layout.data_columns) EXPECT_EQ(frame.at(r, c), data.at(data_row, c));
    ++data_row;
  }
  EXPECT_EQ(extract_data(frame), extract_data(data));
}

TEST(Framing, PilotCollisionRejected) {
  const auto p = small_params();
  const auto layout = FrameLayout::build(p);
  SymbolGrid data(layout, 1);
  data.at(0, layout.pilot_columns[0]) = 1.0;
  EXPECT_THROW(insert_pilots_and_training(data, p, default_pilots(4), make_training(layout, 2, 1)), Error);
  EXPECT_THROW(insert_pilots_and_training(SymbolGrid(layout, 1), p, default_pilots(3), make_training(layout, 2, 1)), Error);
}

TEST(Framing, ConjugatedTrainingForTwins) {
  const auto layout = FrameLayout::build(small_params());
  const auto t = make_training(layout, 2, 1);
  const auto c = conjugated(t);
  for (std::size_t i = 0; i < t.symbols.size(); ++i) EXPECT_EQ(c.symbols[i], std::conj(t.symbols[i]));
  for (std::size_t col : layout.data_columns) EXPECT_NEAR(std::abs(t.at(0, col)), 1.0, 1e-15);
}
