#include <gtest/gtest.h>

#include <set>

#include "lpcsim/coding.hpp"

using namespace lpcsim;

namespace {

std::vector<std::uint8_t> bits_of(const char* s) {
  std::vector<std::uint8_t> out;
  for (; *s; ++s) out.push_back(static_cast<std::uint8_t>(*s - '0'));
  return out;
}

// Independent enumeration over the raw QPSK points, not via lpc_alphabet.
double enumerated_min_distance(double r) {
  const Complex q[] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
  std::vector<Complex> pts;
  for (auto a : q)
    for (auto b : q) pts.push_back(a + r * b);
  double best = 1e9;
  int pairs = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      best = std::min(best, std::abs(pts[i] - pts[j]));
      ++pairs;
    }
  EXPECT_EQ(pairs, 120);
  return best;
}

int hamming(unsigned a, unsigned b) { return std::popcount(a ^ b); }

}  // namespace

TEST(Qpsk, DeclaredTable) {
  EXPECT_EQ(qpsk_map(bits_of("00")), (CVec{{1, 1}}));
  EXPECT_EQ(qpsk_map(bits_of("01")), (CVec{{-1, 1}}));
  EXPECT_EQ(qpsk_map(bits_of("11")), (CVec{{-1, -1}}));
  EXPECT_EQ(qpsk_map(bits_of("10")), (CVec{{1, -1}}));
  EXPECT_EQ(qpsk_map(bits_of("0011")), (CVec{{1, 1}, {-1, -1}}));
}

TEST(Qpsk, OddLengthRejected) { EXPECT_THROW(qpsk_map(bits_of("001")), Error); }

TEST(Qpsk, NonBinaryRejected) { EXPECT_THROW(qpsk_map(std::vector<std::uint8_t>{0, 2}), Error); }

TEST(Qam16, DeclaredCorner) { EXPECT_EQ(qam16_map(bits_of("0000")), (CVec{{-3, 3}})); }

TEST(Qam16, LengthRejected) { EXPECT_THROW(qam16_map(bits_of("000")), Error); }

TEST(Qam16, MeanPowerIsTen) {
  double acc = 0.0;
  for (int i : {-3, -1, 1, 3})
    for (int q : {-3, -1, 1, 3}) acc += i * i + q * q;
  const double oracle = acc / 16.0;
  EXPECT_DOUBLE_EQ(oracle, 10.0);
  EXPECT_DOUBLE_EQ(qam16_constellation().mean_power(), oracle);
}

TEST(Qam16, GrayAdjacency) {
  const auto& c = qam16_constellation();
  int neighbours = 0;
  for (unsigned i = 0; i < 16; ++i)
    for (unsigned j = i + 1; j < 16; ++j)
      if (std::abs(std::abs(c.points[i] - c.points[j]) - 2.0) < 1e-12) {
        EXPECT_EQ(hamming(i, j), 1) << i << " " << j;
        ++neighbours;
      }
  EXPECT_EQ(neighbours, 24);
}

TEST(Qpsk, GrayAdjacency) {
  const auto& c = qpsk_constellation();
  for (unsigned i = 0; i < 4; ++i)
    for (unsigned j = i + 1; j < 4; ++j)
      if (std::abs(std::abs(c.points[i] - c.points[j]) - 2.0) < 1e-12) {
        EXPECT_EQ(hamming(i, j), 1);
      }
}

TEST(LpcEncode, SubstitutionExamples) {
  const auto a = lpc_encode(CVec{{1, 1}, {1, 1}});
  EXPECT_EQ(a.x[0], Complex(1.5, 1.5));
  EXPECT_EQ(a.y[0], Complex(1.5, -1.5));
  const auto b = lpc_encode(CVec{{1, 1}, {-1, -1}});
  EXPECT_EQ(b.x[0], Complex(0.5, 0.5));
  EXPECT_EQ(b.y[0], Complex(0.5, -0.5));
  const auto c = lpc_encode(CVec{{-1, 1}, {1, -1}});
  EXPECT_EQ(c.x[0], Complex(-0.5, 0.5));
  EXPECT_EQ(c.y[0], Complex(-0.5, -0.5));
}

TEST(LpcEncode, Errors) {
  EXPECT_THROW(lpc_encode(CVec{{1, 1}}), Error);
  EXPECT_THROW(lpc_encode(CVec{{1, 1}, {0.5, 1}}), Error);
}

TEST(LpcEncode, TwinIsConjugate) {
  const auto bits = std::vector<std::uint8_t>{0, 1, 1, 0, 1, 1, 0, 0, 1, 0, 0, 1, 1, 1, 1, 0};
  const auto s = LpcPctsScheme().encode(bits);
  for (std::size_t k = 0; k < s.x.size(); ++k) EXPECT_EQ(s.y[k], std::conj(s.x[k]));
}

TEST(LpcAlphabet, HalfRatioIsUniformGrid) {
  const auto c = lpc_alphabet(0.5);
  std::set<std::pair<double, double>> pts;
  for (const auto& p : c.points) pts.insert({p.real(), p.imag()});
  for (double re : {-1.5, -0.5, 0.5, 1.5})
    for (double im : {-1.5, -0.5, 0.5, 1.5}) EXPECT_TRUE(pts.count({re, im})) << re << "," << im;
}

TEST(LpcAlphabet, MinDistances) {
  const double d_half = enumerated_min_distance(0.5);
  const double d_quarter = enumerated_min_distance(0.25);
  const double d_three_quarter = enumerated_min_distance(0.75);
  EXPECT_DOUBLE_EQ(d_half, 1.0);
  EXPECT_DOUBLE_EQ(d_quarter, 0.5);
  EXPECT_DOUBLE_EQ(d_three_quarter, 0.5);
  EXPECT_DOUBLE_EQ(lpc_alphabet(0.5).min_distance(), d_half);
  EXPECT_DOUBLE_EQ(lpc_alphabet(0.25).min_distance(), d_quarter);
  EXPECT_DOUBLE_EQ(lpc_alphabet(0.75).min_distance(), d_three_quarter);
}

TEST(LpcAlphabet, HalfRatioMaximizesMinDistance) {
  const double best = lpc_alphabet(0.5).min_distance();
  for (double r : {0.25, 1.0 / 3.0, 2.0 / 3.0, 0.75}) EXPECT_GT(best, lpc_alphabet(r).min_distance()) << r;
}

TEST(LpcAlphabet, RatioOutOfRange) {
  EXPECT_THROW(lpc_alphabet(0.0), Error);
  EXPECT_THROW(lpc_alphabet(1.0), Error);
  EXPECT_THROW(lpc_alphabet(-0.2), Error);
}

TEST(Superpose, Examples) {
  const Complex s{0.5, -1.5}, d{0.03, 0.07};
  EXPECT_EQ(coherent_superpose(s + d, std::conj(s) - std::conj(d)).first, s);
  EXPECT_EQ(coherent_superpose(s, std::conj(s)).first, s);
  EXPECT_EQ(coherent_superpose({1, 1}, {1, -1}).first, Complex(1, 1));
}

TEST(Superpose, OutputsAreConjugates) {
  for (double a = -2; a <= 2; a += 0.7) {
    const auto [rx, ry] = coherent_superpose({a, 0.3 * a + 1}, {-a * a, 0.2});
    EXPECT_EQ(ry, std::conj(rx));
  }
}

TEST(MlDetect, Examples) {
  const auto c = lpc_alphabet(0.5);
  EXPECT_EQ(c.points[ml_detect({1.4, 1.6}, c)], Complex(1.5, 1.5));
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(ml_detect(c.points[i], c), i);
  const auto tie = ml_detect({1.0, 1.5}, c);
  const auto i_low = ml_detect({1.5, 1.5}, c);
  const auto i_high = ml_detect({0.5, 1.5}, c);
  EXPECT_EQ(tie, std::min(i_low, i_high));
}

TEST(LutDecode, Examples) {
  const auto c = lpc_alphabet(0.5);
  EXPECT_EQ(lut_decode(ml_detect({1.5, 1.5}, c)), std::make_pair(Complex(1, 1), Complex(1, 1)));
  EXPECT_EQ(lut_decode(ml_detect({0.5, 0.5}, c)), std::make_pair(Complex(1, 1), Complex(-1, -1)));
  EXPECT_THROW(lut_decode(16), Error);
}

TEST(LutDecode, FullRoundTrip) {
  const auto c = lpc_alphabet(0.5);
  for (const auto& a : qpsk_constellation().points)
    for (const auto& b : qpsk_constellation().points) {
      const auto enc = lpc_encode(CVec{a, b});
      EXPECT_EQ(lut_decode(ml_detect(enc.x[0], c)), std::make_pair(a, b));
    }
}

TEST(Pctw, Conjugation) {
  const auto s = pctw_encode(CVec{{1, 3}, {2, 0}});
  EXPECT_EQ(s.y[0], Complex(1, -3));
  EXPECT_EQ(s.x[1], s.y[1]);
}

TEST(Pctw, NoiselessSuperpositionIsIdentity) {
  const CVec in{{1, 3}, {-3, -1}, {1, -1}};
  const auto s = pctw_encode(in);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(coherent_superpose(s.x[i], s.y[i]).first, in[i]);
}

TEST(Pcsc, Example) {
  const auto s = pcsc_encode(CVec{{1, 1}, {1, 1}});
  EXPECT_NEAR(std::abs(s[0] - std::sqrt(2.0) * Complex(1, 1)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s[1]), 0.0, 1e-15);
}

TEST(Pcsc, RoundTripAndPower) {
  RandomSource rng(2);
  const auto in = gaussian_noise(rng, 64, 0.5);
  const auto enc = pcsc_encode(in);
  const auto dec = pcsc_decode(enc);
  double p_in = 0, p_out = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_NEAR(std::abs(dec[i] - in[i]), 0.0, 1e-14);
    p_in += std::norm(in[i]);
    p_out += std::norm(enc[i]);
  }
  EXPECT_NEAR(p_in, p_out, 1e-12 * p_in);
  EXPECT_THROW(pcsc_encode(CVec(3)), Error);
  EXPECT_THROW(pcsc_decode(CVec(3)), Error);
}

class SchemeTest : public ::testing::TestWithParam<const char*> {};

TEST_P(SchemeTest, ExhaustiveBijection) {
  const auto scheme = make_scheme(GetParam());
  const std::size_t g = scheme->subcarrier_granularity();
  const std::size_t bits_per_group = CodingScheme::kBitsPerSubcarrier * g;
  // Every label of one subcarrier group, with the remaining groups random.
  std::vector<std::uint8_t> bits;
  for (std::size_t v = 0; v < (std::size_t{1} << bits_per_group); ++v)
    for (std::size_t b = bits_per_group; b-- > 0;) bits.push_back(static_cast<std::uint8_t>((v >> b) & 1U));
  const auto tx = scheme->encode(bits);
  ASSERT_EQ(tx.x.size(), bits.size() / CodingScheme::kBitsPerSubcarrier);
  EXPECT_EQ(scheme->decode(tx.x, tx.y), bits);
}

TEST_P(SchemeTest, UnitMeanPowerPerPolarization) {
  const auto scheme = make_scheme(GetParam());
  const auto bits = prbs_generate(3, 4 * 4096);
  const auto tx = scheme->encode(bits.bits);
  // Exact mean over the whole alphabet: encode every label once.
  std::vector<std::uint8_t> all;
  const std::size_t width = CodingScheme::kBitsPerSubcarrier * scheme->subcarrier_granularity();
  for (std::size_t v = 0; v < (std::size_t{1} << width); ++v)
    for (std::size_t b = width; b-- > 0;) all.push_back(static_cast<std::uint8_t>((v >> b) & 1U));
  const auto ex = scheme->encode(all);
  double px = 0, py = 0;
  for (std::size_t i = 0; i < ex.x.size(); ++i) {
    px += std::norm(ex.x[i]);
    py += std::norm(ex.y[i]);
  }
  EXPECT_NEAR(px / static_cast<double>(ex.x.size()), 1.0, 1e-12);
  EXPECT_NEAR(py / static_cast<double>(ex.y.size()), 1.0, 1e-12);
  EXPECT_EQ(scheme->decode(tx.x, tx.y), bits.bits);
}

TEST_P(SchemeTest, NameRoundTrip) { EXPECT_EQ(make_scheme(GetParam())->name(), GetParam()); }

INSTANTIATE_TEST_SUITE_P(AllSchemes, SchemeTest, ::testing::Values("lpc-pcts", "pcsc", "pctw-16qam", "pdm-4qam"));

TEST(Scheme, UnknownNameRejected) { EXPECT_THROW(make_scheme("8psk"), Error); }

TEST(Scheme, PcscGranularityEnforced) { EXPECT_THROW(make_scheme("pcsc")->encode(std::vector<std::uint8_t>(4, 0)), Error); }

TEST(ConstellationTable, Fixture) {
  const auto t = constellation_table(qpsk_constellation(), "qpsk");
  EXPECT_EQ(t,
            "# qpsk bits_per_symbol=2 mean_power=2\n"
            "00 1 1\n01 -1 1\n10 1 -1\n11 -1 -1\n");
}
