#pragma once

// Finite-horizon RFQ market-making MDP. One decision per trading day: the
// (bid, ask) spread pair applies to every RFQ that arrives during that day.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rfqmm/errors.hpp"
#include "rfqmm/intensity_process.hpp"
#include "rfqmm/market_dynamics.hpp"
#include "rfqmm/random.hpp"

namespace rfqmm {

struct InitialStateRule {
  bool random = true;
  IntensityState fixed = kLowLow;  // used when !random

  static InitialStateRule uniform() { return {}; }
  static InitialStateRule at(IntensityState s) { return {false, s}; }
};

struct EnvConfig {
  std::size_t n_days = 30;
  double z = 1.0;         // lot size
  double q_init = 0.0;    // initial inventory
  double phi = 0.01;      // quadratic-variation penalty on daily P&L increments
  double delta_min = -0.16;
  double delta_max = 0.2;
  double q_scale = 50.0;  // inventory divisor for the observation
  double inventory_cap = 0.0;  // |q| bound, 0 disables
  double dt_days = 1.0;
  FillMode fill_mode = FillMode::kThinned;
  PriceParams price;
  FillCurve curve;
  IntensityLevels levels;
  GeneratorMatrix generator = baseline_generator();
  InitialStateRule initial_state;

  void validate() const {
    if (n_days < 1) throw ConfigError("n_days must be >= 1");
    if (!(z > 0.0)) throw ConfigError("z must be positive");
    if (!(delta_min < delta_max)) throw ConfigError("delta_min must be < delta_max");
    if (!(phi >= 0.0)) throw ConfigError("phi must be >= 0");
    if (!(q_scale > 0.0)) throw ConfigError("q_scale must be positive");
    if (!(inventory_cap >= 0.0)) throw ConfigError("inventory_cap must be >= 0");
    if (!(dt_days > 0.0)) throw ConfigError("dt_days must be positive");
    if (!(price.sigma >= 0.0) || !(price.dt > 0.0) || !(price.s0 > 0.0))
      throw ConfigError("price parameters need sigma >= 0, dt > 0, s0 > 0");
    if (!(curve.delta0 > 0.0) || !(curve.beta > 0.0)) throw ConfigError("fill curve needs delta0 > 0, beta > 0");
    if (!(levels.lambda_low > 0.0) || !(levels.lambda_low < levels.lambda_high))
      throw ConfigError("intensity levels need 0 < low < high");
    if (!random_initial() && (initial_state.fixed.index < 0 || initial_state.fixed.index >= kNumRegimes))
      throw ConfigError("initial state index out of range");
    validate_generator(generator);
  }

  bool random_initial() const { return initial_state.random; }
};

inline constexpr std::size_t kObsDim = 4;
inline constexpr std::size_t kActDim = 2;

struct Observation {
  double lambda_bid_norm = 0.0;
  double lambda_ask_norm = 0.0;
  double time_frac = 0.0;
  double inventory_scaled = 0.0;

  std::array<double, kObsDim> as_array() const {
    return {lambda_bid_norm, lambda_ask_norm, time_frac, inventory_scaled};
  }
};

struct InternalState {
  std::size_t day = 0;
  double s = 0.0;         // mid-price
  double q = 0.0;         // inventory
  double x = 0.0;         // cash
  double pnl_prev = 0.0;  // x + q*s at the previous step

  double pnl() const { return x + q * s; }
};

/// Raw policy output in [-1, 1]^2, clipped before use.
struct Action {
  double bid = 0.0;
  double ask = 0.0;

  Action clipped() const { return {std::clamp(bid, -1.0, 1.0), std::clamp(ask, -1.0, 1.0)}; }
};

struct Quotes {
  double delta_bid = 0.0;
  double delta_ask = 0.0;
};

struct StepRecord {
  std::size_t day = 0;
  Observation observation;  // what the agent saw when deciding
  IntensityState regime;
  Action action;            // after clipping
  Quotes quotes;
  long n_bid_fills = 0;
  long n_ask_fills = 0;
  double price = 0.0;       // mid at decision time
  double price_next = 0.0;
  double inventory = 0.0;   // after the step
  double cash = 0.0;        // after the step
  double pnl_delta = 0.0;
  double reward = 0.0;
};

struct Transition {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepRecord record;
};

inline Quotes descale_action(Action a, const EnvConfig& cfg) {
  const Action c = a.clipped();
  const double width = cfg.delta_max - cfg.delta_min;
  return {cfg.delta_min + 0.5 * (c.bid + 1.0) * width, cfg.delta_min + 0.5 * (c.ask + 1.0) * width};
}

/// One summand of the discretized mean/quadratic-variation objective.
inline double step_reward(double pnl_delta, double phi) { return pnl_delta - 0.5 * phi * pnl_delta * pnl_delta; }

inline Observation make_observation(const InternalState& st, IntensityState regime, const EnvConfig& cfg) {
  return {regime.bid_high() ? 1.0 : 0.0, regime.ask_high() ? 1.0 : 0.0,
          static_cast<double>(st.day) / static_cast<double>(cfg.n_days), st.q / cfg.q_scale};
}

struct Settlement {
  InternalState next;
  long n_bid_fills = 0;
  long n_ask_fills = 0;
  double pnl_delta = 0.0;
  double reward = 0.0;
};

/// Deterministic accounting for one day given fills and the next mid.
inline Settlement settle_step(const InternalState& st, Quotes quotes, long n_bid, long n_ask, double s_next,
                              const EnvConfig& cfg) {
  if (cfg.inventory_cap > 0.0) {
    const auto lots = [&](double room) { return static_cast<long>(std::floor(room / cfg.z + 1e-12)); };
    n_bid = std::min(n_bid, std::max(0L, lots(cfg.inventory_cap - st.q)) + n_ask);
    n_ask = std::min(n_ask, std::max(0L, lots(cfg.inventory_cap + st.q)) + n_bid);
  }
  Settlement out;
  out.n_bid_fills = n_bid;
  out.n_ask_fills = n_ask;
  InternalState& nx = out.next;
  const double bid_px = st.s - quotes.delta_bid;
  const double ask_px = st.s + quotes.delta_ask;
  nx.day = st.day + 1;
  nx.x = st.x + cfg.z * ask_px * static_cast<double>(n_ask) - cfg.z * bid_px * static_cast<double>(n_bid);
  nx.q = st.q + cfg.z * static_cast<double>(n_bid - n_ask);
  nx.s = s_next;
  const double pnl_new = nx.x + nx.q * nx.s;
  out.pnl_delta = pnl_new - st.pnl_prev;
  out.reward = step_reward(out.pnl_delta, cfg.phi);
  nx.pnl_prev = pnl_new;
  return out;
}

/// Full stochastic transition: fills from fill_rng, price noise from price_rng.
inline Settlement transition(const InternalState& st, IntensityState regime, Quotes quotes, const EnvConfig& cfg,
                             Rng& fill_rng, Rng& price_rng) {
  const Intensities lam = Intensities::of(regime, cfg.levels);
  const StepOutcome fills = sample_fills(lam, quotes.delta_bid, quotes.delta_ask, cfg.curve, cfg.dt_days, fill_rng,
                                         cfg.fill_mode);
  const double draw = std::normal_distribution<double>(0.0, 1.0)(price_rng);
  const double s_next = price_step(cfg.price, st.s, lam, draw);
  return settle_step(st, quotes, fills.n_bid_fills, fills.n_ask_fills, s_next, cfg);
}

inline IntensityState draw_initial_state(const EnvConfig& cfg, std::uint64_t episode_seed) {
  if (!cfg.random_initial()) return cfg.initial_state.fixed;
  return random_initial_state(derive_seed(episode_seed, Stream::kInitialState));
}

/// Regime path for one episode; shared with agent-free studies so both see
/// identical markets under the same episode seed.
inline IntensityPath episode_regimes(const EnvConfig& cfg, std::uint64_t episode_seed) {
  return simulate_ctmc(cfg.generator, draw_initial_state(cfg, episode_seed), cfg.n_days, cfg.price.dt,
                       derive_seed(episode_seed, Stream::kRegime));
}

class RfqEnv {
 public:
  explicit RfqEnv(EnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  Observation reset(std::uint64_t episode_seed) {
    path_ = episode_regimes(cfg_, episode_seed);
    price_rng_ = make_rng(episode_seed, Stream::kPrice);
    fill_rng_ = make_rng(episode_seed, Stream::kFills);
    state_ = InternalState{};
    state_.s = cfg_.price.s0;
    state_.q = cfg_.q_init;
    state_.pnl_prev = state_.q * state_.s;
    done_ = false;
    return observation();
  }

  Transition step(Action action) {
    if (done_) throw StepAfterDone();
    Transition out;
    StepRecord& rec = out.record;
    rec.day = state_.day;
    rec.observation = observation();
    rec.regime = regime();
    rec.action = action.clipped();
    rec.quotes = descale_action(action, cfg_);
    rec.price = state_.s;
    const Settlement st = transition(state_, rec.regime, rec.quotes, cfg_, fill_rng_, price_rng_);
    state_ = st.next;
    rec.n_bid_fills = st.n_bid_fills;
    rec.n_ask_fills = st.n_ask_fills;
    rec.price_next = state_.s;
    rec.inventory = state_.q;
    rec.cash = state_.x;
    rec.pnl_delta = st.pnl_delta;
    rec.reward = st.reward;
    done_ = state_.day >= cfg_.n_days;
    out.reward = st.reward;
    out.done = done_;
    out.observation = observation();
    return out;
  }

  Observation observation() const { return make_observation(state_, regime(), cfg_); }

  /// Regime governing the current day. After the last step this stays on the
  /// final day's regime.
  IntensityState regime() const { return path_.states[std::min(state_.day, path_.states.size() - 1)]; }

  const InternalState& state() const { return state_; }
  const IntensityPath& path() const { return path_; }
  const EnvConfig& config() const { return cfg_; }
  bool done() const { return done_; }

 private:
  EnvConfig cfg_;
  IntensityPath path_;
  InternalState state_;
  Rng price_rng_;
  Rng fill_rng_;
  bool done_ = true;
};

inline double episode_return(std::span<const StepRecord> records) {
  double sum = 0.0;
  for (const auto& r : records) sum += r.reward;
  return sum;
}

inline double episode_return(std::span<const double> rewards) {
  double sum = 0.0;
  for (double r : rewards) sum += r;
  return sum;
}

}  // namespace rfqmm
