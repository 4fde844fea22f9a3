#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "rfqmm/market_dynamics.hpp"

using namespace rfqmm;

namespace {

double logistic_oracle(double delta) { return 1.0 / (1.0 + std::exp(-0.7 + 3.1 / 0.09 * delta)); }

// Two-sample Kolmogorov-Smirnov statistic over integer-valued samples.
double ks_statistic(std::vector<long> a, std::vector<long> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const long hi = std::max(a.back(), b.back());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  for (long v = 0; v <= hi; ++v) {
    while (ia < a.size() && a[ia] <= v) ++ia;
    while (ib < b.size() && b[ib] <= v) ++ib;
    d = std::max(d, std::abs(static_cast<double>(ia) / a.size() - static_cast<double>(ib) / b.size()));
  }
  return d;
}

}  // namespace

TEST(FillProbability, ReferenceValues) {
  const FillCurve c;
  EXPECT_NEAR(fill_probability(c, 0.0), 0.6682, 5e-5);
  EXPECT_NEAR(fill_probability(c, -0.16), 0.9980, 5e-5);
  EXPECT_NEAR(fill_probability(c, 0.2), 0.0020, 5e-5);
  EXPECT_NEAR(fill_probability(c, 0.09), 0.0832, 5e-5);
  for (double d = -0.3; d <= 0.3; d += 0.01) EXPECT_NEAR(fill_probability(c, d), logistic_oracle(d), 1e-15);
}

TEST(FillProbability, StrictlyDecreasingAndBounded) {
  const FillCurve c;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 10000; ++i) {
    double a = u(rng), b = u(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    EXPECT_GT(fill_probability(c, a), fill_probability(c, b));
  }
  EXPECT_GT(fill_probability(c, 5.0), 0.0);
  EXPECT_LT(fill_probability(c, -0.5), 1.0);
  EXPECT_LE(fill_probability(c, -5.0), 1.0);
  EXPECT_TRUE(std::isfinite(fill_probability(c, 1e6)));
  EXPECT_TRUE(std::isfinite(fill_probability(c, -1e6)));
}

TEST(FillProbability, PointSymmetryAboutMidpoint) {
  const FillCurve c;
  const double mid = fill_midpoint(c);
  EXPECT_NEAR(mid, 0.7 * 0.09 / 3.1, 1e-15);
  EXPECT_NEAR(mid, 0.02032, 1e-5);
  EXPECT_NEAR(fill_probability(c, mid), 0.5, 1e-15);
  for (double d = -0.3; d <= 0.3; d += 0.013)
    EXPECT_NEAR(fill_probability(c, d) + fill_probability(c, -d - 2.0 * c.alpha * c.delta0 / c.beta), 1.0, 1e-14);
}

TEST(PriceStep, Arithmetic) {
  const PriceParams p;
  EXPECT_DOUBLE_EQ(price_step(p, 101.0, Intensities{20.0, 20.0}, 0.0), 101.0);
  EXPECT_NEAR(price_step(p, 103.593, Intensities{10.83, 73.03}, 0.0), 103.593 + 2.29 * 62.2 / 250.0, 1e-12);
  EXPECT_NEAR(price_step(p, 103.593, kAskHigh, IntensityLevels{}, 0.0), 104.162752, 1e-9);
  EXPECT_NEAR(price_step(p, 100.0, Intensities{5.0, 5.0}, 1.0) - 100.0, 18.39 / std::sqrt(250.0), 1e-12);
}

TEST(PriceStep, IncrementMoments) {
  const PriceParams p;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  constexpr int kN = 100000;
  double sum = 0.0, ss = 0.0;
  for (int i = 0; i < kN; ++i) {
    const double inc = price_step(p, 103.593, Intensities{73.03, 73.03}, n01(rng)) - 103.593;
    sum += inc;
    ss += inc * inc;
  }
  const double mean = sum / kN;
  const double sd = std::sqrt((ss - kN * mean * mean) / (kN - 1));
  const double target = 18.39 / std::sqrt(250.0);
  EXPECT_LT(std::abs(mean), 3.0 * target / std::sqrt(double(kN)));
  EXPECT_NEAR(sd, target, 0.01 * target);
}

TEST(KappaImplied, ValuesAndAntisymmetry) {
  const IntensityLevels lv;
  EXPECT_DOUBLE_EQ(kappa_implied_price(103.593, kLowLow, lv, 2.29), 103.593);
  EXPECT_NEAR(kappa_implied_price(103.593, kAskHigh, lv, 2.29), 246.031, 5e-4);
  const double up = kappa_implied_price(100.0, kAskHigh, lv, 2.29) - 100.0;
  const double down = kappa_implied_price(100.0, kBidHigh, lv, 2.29) - 100.0;
  EXPECT_NEAR(up, -down, 1e-12);
  EXPECT_GT(up, 0.0);
}

TEST(SampleFills, NullSideNeverFills) {
  Rng rng = make_rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_fills({0.0, 50.0}, -0.16, 0.0, FillCurve{}, 1.0, rng).n_bid_fills, 0);
}

TEST(SampleFills, MeanAtHalfFillProbability) {
  // delta at the curve midpoint gives f = 0.5 exactly
  const FillCurve c;
  const double d = fill_midpoint(c);
  Rng rng = make_rng(17);
  double total = 0.0;
  for (int i = 0; i < 100000; ++i) total += sample_fills({10.83, 73.03}, 0.0, d, c, 1.0, rng).n_ask_fills;
  EXPECT_NEAR(total / 1e5, 36.515, 0.01 * 36.515);
}

TEST(SampleFills, MeansOverSpreadGrid) {
  const FillCurve c;
  for (FillMode mode : {FillMode::kThinned, FillMode::kPerRfq}) {
    Rng rng = make_rng(23);
    for (double d = -0.16; d <= 0.1 + 1e-9; d += 0.02) {
      double bid = 0.0, ask = 0.0;
      for (int i = 0; i < 100000; ++i) {
        const auto o = sample_fills({73.03, 10.83}, d, d, c, 1.0, rng, mode);
        bid += o.n_bid_fills;
        ask += o.n_ask_fills;
      }
      EXPECT_NEAR(bid / 1e5, 73.03 * logistic_oracle(d), 0.01 * 73.03 * logistic_oracle(d)) << d;
      // the low-intensity side is noisier, so compare against 4 standard errors
      const double m = 10.83 * logistic_oracle(d);
      EXPECT_NEAR(ask / 1e5, m, 4.0 * std::sqrt(m / 1e5)) << d;
    }
  }
}

TEST(SampleFills, SidesExchangeableUnderSymmetry) {
  Rng rng = make_rng(29);
  std::vector<long> b, a;
  for (int i = 0; i < 100000; ++i) {
    const auto o = sample_fills({30.0, 30.0}, 0.03, 0.03, FillCurve{}, 1.0, rng);
    b.push_back(o.n_bid_fills);
    a.push_back(o.n_ask_fills);
  }
  const double crit = 1.628 * std::sqrt(2.0 / 100000.0);  // alpha = 1%
  EXPECT_LT(ks_statistic(b, a), crit);
}

TEST(SampleFills, DeterministicUnderSeed) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto x = sample_fills({73.03, 10.83}, 0.01, -0.02, FillCurve{}, 1.0, s);
    const auto y = sample_fills({73.03, 10.83}, 0.01, -0.02, FillCurve{}, 1.0, s);
    EXPECT_EQ(x.n_bid_fills, y.n_bid_fills);
    EXPECT_EQ(x.n_ask_fills, y.n_ask_fills);
  }
}
