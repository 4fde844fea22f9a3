#pragma once

// Two-dimensional Markov-modulated RFQ intensity process: a four-state
// continuous-time Markov chain over (bid, ask) intensity regimes.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "rfqmm/errors.hpp"
#include "rfqmm/random.hpp"

namespace rfqmm {

inline constexpr int kNumRegimes = 4;

/// Rates in transitions per year. Row/column order follows IntensityState.
using GeneratorMatrix = Eigen::Matrix4d;

/// RFQ arrivals per trading day.
struct IntensityLevels {
  double lambda_low = 10.83;
  double lambda_high = 73.03;
};

/// Joint (bid, ask) regime. Index order is
///   0: bid low,  ask low
///   1: bid high, ask low   (sell pressure, price drifts down)
///   2: bid low,  ask high  (buy pressure, price drifts up)
///   3: bid high, ask high
/// so swapping the bid and ask roles exchanges slots 1 and 2.
struct IntensityState {
  int index = 0;

  static constexpr IntensityState from_sides(bool bid_high, bool ask_high) {
    return IntensityState{(ask_high ? 2 : 0) + (bid_high ? 1 : 0)};
  }
  constexpr bool bid_high() const { return (index & 1) != 0; }
  constexpr bool ask_high() const { return (index & 2) != 0; }
  constexpr IntensityState mirrored() const { return from_sides(ask_high(), bid_high()); }

  double lambda_bid(const IntensityLevels& lv) const { return bid_high() ? lv.lambda_high : lv.lambda_low; }
  double lambda_ask(const IntensityLevels& lv) const { return ask_high() ? lv.lambda_high : lv.lambda_low; }

  friend constexpr bool operator==(IntensityState, IntensityState) = default;
};

inline constexpr IntensityState kLowLow{0};
inline constexpr IntensityState kBidHigh{1};
inline constexpr IntensityState kAskHigh{2};
inline constexpr IntensityState kHighHigh{3};

struct IntensityPath {
  std::vector<IntensityState> states;
  std::uint64_t seed = 0;
};

/// Continuous-time trajectory: the chain sits in states[i] on [times[i], times[i+1]).
struct CtmcTrajectory {
  std::vector<double> times;
  std::vector<int> states;
};

// Calibrated baseline generator.
inline GeneratorMatrix baseline_generator() {
  GeneratorMatrix q;
  q << -14.01, 4.37, 4.37, 5.27,
       19.32, -60.91, 12.54, 29.05,
       19.32, 12.54, -60.91, 29.05,
       23.67, 15.00, 15.00, -53.67;
  return q;
}

// Long-run bias towards the bid-heavy regime (downward price drift).
inline GeneratorMatrix negative_bias_generator() {
  GeneratorMatrix q;
  q << -20.01, 10.37, 4.37, 5.27,
       19.32, -60.91, 12.54, 29.05,
       19.32, 22.54, -70.91, 29.05,
       23.67, 25.00, 15.00, -63.67;
  return q;
}

/// Relabels the chain with bid and ask roles swapped (slots 1 and 2 exchanged).
inline GeneratorMatrix mirror_generator(const GeneratorMatrix& q) {
  Eigen::PermutationMatrix<4> p;
  p.indices() << 0, 2, 1, 3;
  return p * q * p.transpose();
}

// Long-run bias towards the ask-heavy regime (upward price drift).
inline GeneratorMatrix positive_bias_generator() { return mirror_generator(negative_bias_generator()); }

/// Throws RowSumViolation or NegativeOffDiagonal. Works for any square size.
inline void validate_generator(const Eigen::Ref<const Eigen::MatrixXd>& q, double tol = 1e-9) {
  if (q.rows() != q.cols()) throw ShapeMismatch("generator must be square");
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      const double v = q(i, j);
      if (!std::isfinite(v)) throw NegativeOffDiagonal(i, j);
      if (i == j ? v > 0.0 : v < 0.0) throw NegativeOffDiagonal(i, j);
    }
    const double sum = q.row(i).sum();
    if (std::abs(sum) > tol) throw RowSumViolation(static_cast<std::size_t>(i), sum);
  }
}

/// Solves pi * Q = 0, sum(pi) = 1. Throws SingularChain when the stationary
/// law is not unique (null space of Q^T not one-dimensional).
inline Eigen::VectorXd stationary_distribution(const Eigen::Ref<const Eigen::MatrixXd>& q) {
  validate_generator(q);
  const Eigen::Index n = q.rows();
  const Eigen::MatrixXd qt = q.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(qt);
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  lu.setThreshold(1e-10 * static_cast<double>(n));
  if (lu.rank() != n - 1) {
    throw SingularChain("generator null space has dimension " + std::to_string(n - lu.rank()));
  }
  Eigen::MatrixXd a(n + 1, n);
  a.topRows(n) = qt / scale;
  a.row(n).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b(n) = 1.0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::VectorXd pi = qr.solve(b);
  // One step of iterative refinement.
  pi += qr.solve(b - a * pi);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pi(i) < -1e-12) throw SingularChain("negative stationary mass");
    pi(i) = std::max(pi(i), 0.0);
  }
  pi /= pi.sum();
  return pi;
}

/// Exact event-driven sampler: exponential holding times with rate -Q_ii,
/// jump targets with probability Q_ij / -Q_ii.
class CtmcSampler {
 public:
  explicit CtmcSampler(const Eigen::Ref<const Eigen::MatrixXd>& q) : q_(q) { validate_generator(q_); }

  double exit_rate(int state) const { return -q_(state, state); }

  double holding_time(int state, Rng& rng) const {
    const double rate = exit_rate(state);
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return std::exponential_distribution<double>(rate)(rng);
  }

  int jump(int state, Rng& rng) const {
    const double rate = exit_rate(state);
    double u = std::uniform_real_distribution<double>(0.0, rate)(rng);
    int last = state;
    for (Eigen::Index j = 0; j < q_.cols(); ++j) {
      if (j == state || q_(state, j) <= 0.0) continue;
      last = static_cast<int>(j);
      u -= q_(state, j);
      if (u < 0.0) return last;
    }
    return last;
  }

  /// Full trajectory on [0, horizon].
  CtmcTrajectory trajectory(int init, double horizon, Rng& rng) const {
    CtmcTrajectory out;
    double t = 0.0;
    int s = init;
    while (t <= horizon) {
      out.times.push_back(t);
      out.states.push_back(s);
      t += holding_time(s, rng);
      if (!(t <= horizon)) break;
      s = jump(s, rng);
    }
    return out;
  }

  /// Chain state observed at times k*dt, k = 0..n-1.
  std::vector<int> sample_grid(int init, std::size_t n, double dt, Rng& rng) const {
    std::vector<int> out;
    out.reserve(n);
    int s = init;
    double next = holding_time(s, rng);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) * dt;
      while (next <= t) {
        s = jump(s, rng);
        next += holding_time(s, rng);
      }
      out.push_back(s);
    }
    return out;
  }

 private:
  Eigen::MatrixXd q_;
};

inline IntensityPath simulate_ctmc(const GeneratorMatrix& q, IntensityState init, std::size_t n_days,
                                   double dt, Rng& rng) {
  if (n_days < 1) throw ConfigError("n_days must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  IntensityPath path;
  for (int s : CtmcSampler(q).sample_grid(init.index, n_days, dt, rng)) path.states.push_back({s});
  return path;
}

inline IntensityPath simulate_ctmc(const GeneratorMatrix& q, IntensityState init, std::size_t n_days,
                                   double dt, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  IntensityPath path = simulate_ctmc(q, init, n_days, dt, rng);
  path.seed = seed;
  return path;
}

inline IntensityState random_initial_state(Rng& rng) {
  return IntensityState{std::uniform_int_distribution<int>(0, kNumRegimes - 1)(rng)};
}

inline IntensityState random_initial_state(std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return random_initial_state(rng);
}

}  // namespace rfqmm
