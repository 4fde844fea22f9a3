#pragma once

#include <cmath>
#include <random>

#include "rfqmm/intensity_process.hpp"
#include "rfqmm/random.hpp"

namespace rfqmm {

struct PriceParams {
  double kappa = 2.29;    // drift per unit of (ask - bid) daily intensity, per year
  double sigma = 18.39;   // annualized
  double s0 = 103.593;
  double dt = 1.0 / 250.0;  // years per trading day
};

/// Logistic win probability of a quote at spread delta from mid.
struct FillCurve {
  double alpha = -0.7;
  double beta = 3.1;
  double delta0 = 0.09;
};

/// Per-day arrival rates for one step.
struct Intensities {
  double bid = 0.0;
  double ask = 0.0;

  static Intensities of(IntensityState s, const IntensityLevels& lv) {
    return {s.lambda_bid(lv), s.lambda_ask(lv)};
  }
};

struct StepOutcome {
  long n_bid_fills = 0;
  long n_ask_fills = 0;
  double price_next = 0.0;
};

inline double fill_probability(const FillCurve& c, double delta) {
  const double z = c.alpha + (c.beta / c.delta0) * delta;
  // Branches keep exp() from overflowing in either tail.
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

/// Spread at which the curve crosses one half.
inline double fill_midpoint(const FillCurve& c) { return -c.alpha * c.delta0 / c.beta; }

inline double price_step(const PriceParams& p, double s, Intensities lam, double gaussian_draw) {
  return s + p.kappa * (lam.ask - lam.bid) * p.dt + p.sigma * std::sqrt(p.dt) * gaussian_draw;
}

inline double price_step(const PriceParams& p, double s, IntensityState st, const IntensityLevels& lv,
                         double gaussian_draw) {
  return price_step(p, s, Intensities::of(st, lv), gaussian_draw);
}

/// Diagnostic "where is the price heading" series: s + kappa * (ask - bid),
/// with no time scaling.
inline double kappa_implied_price(double s, Intensities lam, double kappa) {
  return s + kappa * (lam.ask - lam.bid);
}

inline double kappa_implied_price(double s, IntensityState st, const IntensityLevels& lv, double kappa) {
  return kappa_implied_price(s, Intensities::of(st, lv), kappa);
}

inline long poisson_draw(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<long>(mean)(rng);
}

enum class FillMode {
  kThinned,  // one Poisson draw per side at the thinned rate
  kPerRfq,   // Poisson arrivals, then one Bernoulli win per RFQ
};

/// Number of won RFQs on each side during dt_days. Bid fills buy inventory
/// (the client sells to us), ask fills sell it. Leaves price_next untouched.
inline StepOutcome sample_fills(Intensities lam, double delta_bid, double delta_ask, const FillCurve& curve,
                                double dt_days, Rng& rng, FillMode mode = FillMode::kThinned) {
  StepOutcome out;
  const double fb = fill_probability(curve, delta_bid);
  const double fa = fill_probability(curve, delta_ask);
  if (mode == FillMode::kThinned) {
    out.n_bid_fills = poisson_draw(lam.bid * dt_days * fb, rng);
    out.n_ask_fills = poisson_draw(lam.ask * dt_days * fa, rng);
  } else {
    const long arrivals_bid = poisson_draw(lam.bid * dt_days, rng);
    const long arrivals_ask = poisson_draw(lam.ask * dt_days, rng);
    out.n_bid_fills = arrivals_bid > 0 ? std::binomial_distribution<long>(arrivals_bid, fb)(rng) : 0;
    out.n_ask_fills = arrivals_ask > 0 ? std::binomial_distribution<long>(arrivals_ask, fa)(rng) : 0;
  }
  return out;
}

inline StepOutcome sample_fills(Intensities lam, double delta_bid, double delta_ask, const FillCurve& curve,
                                double dt_days, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return sample_fills(lam, delta_bid, delta_ask, curve, dt_days, rng);
}

}  // namespace rfqmm
