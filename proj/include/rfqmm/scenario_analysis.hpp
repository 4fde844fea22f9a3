#pragma once

// Experiment presets and the batch statistics behind the outcome analysis:
// price bands, inventory paths, spread box-plots, cumulative rewards and
// mirror comparisons between oppositely biased markets.

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rfqmm/errors.hpp"
#include "rfqmm/neural_policy.hpp"
#include "rfqmm/rfq_env.hpp"
#include "rfqmm/stats.hpp"

namespace rfqmm {

struct ExperimentPreset {
  std::string name;
  EnvConfig env;
};

inline constexpr std::array<std::string_view, 6> kPresetNames = {"baseline", "neg_init", "pos_init",
                                                                 "neg_Q",    "pos_Q",    "custom"};

inline ExperimentPreset resolve_preset(std::string_view name) {
  ExperimentPreset p{std::string(name), EnvConfig{}};
  if (name == "baseline" || name == "custom") {
  } else if (name == "neg_init") {
    p.env.initial_state = InitialStateRule::at(kBidHigh);
  } else if (name == "pos_init") {
    p.env.initial_state = InitialStateRule::at(kAskHigh);
  } else if (name == "neg_Q") {
    p.env.generator = negative_bias_generator();
  } else if (name == "pos_Q") {
    p.env.generator = positive_bias_generator();
  } else {
    throw UnknownPreset(std::string(name));
  }
  return p;
}

template <class P>
concept QuotingPolicy = requires(P p, const Observation& o) {
  { p(o) } -> std::convertible_to<Action>;
};

/// Deterministic policy: the Gaussian mean.
struct MeanActionPolicy {
  const PolicyParams* params;
  Action operator()(const Observation& o) const { return to_action(forward(*params, o).mean); }
};

/// Samples from the Gaussian policy with its own stream.
struct StochasticPolicy {
  const PolicyParams* params;
  Rng rng;
  Action operator()(const Observation& o) { return to_action(sample_action(forward(*params, o), rng)); }
};

/// Quotes the same spread on both sides regardless of state.
struct ConstantQuotePolicy {
  Action action;
  ConstantQuotePolicy(double delta_bid, double delta_ask, const EnvConfig& cfg) {
    const auto to_unit = [&](double d) { return 2.0 * (d - cfg.delta_min) / (cfg.delta_max - cfg.delta_min) - 1.0; };
    action = {to_unit(delta_bid), to_unit(delta_ask)};
  }
  Action operator()(const Observation&) const { return action; }
};

/// Per-step aggregates over a batch of episodes. Row k describes trading
/// day k: quotes chosen at the start of the day and the state at its end.
struct BatchStats {
  std::size_t batch_size = 0;
  std::size_t n_days = 0;
  double s0 = 0.0;
  std::vector<double> price_mean, price_std;
  std::vector<double> inventory_mean, inventory_std;
  std::vector<double> cum_reward_mean;
  std::vector<double> delta_bid_mean, delta_ask_mean;
  std::vector<stats::FiveNumber> delta_bid_box, delta_ask_box;
  std::vector<double> kappa_implied_mean;  // mean kappa * (ask - bid) at decision time

  // One entry per episode.
  std::vector<double> episode_returns;
  std::vector<double> terminal_prices;
  std::vector<double> terminal_inventory;
  std::vector<double> early_inventory;  // mean inventory over the first kEarlyDays days
  std::vector<double> skew_alignment;   // mean of sign(ask - bid) * sign(delta_bid - delta_ask)

  double skew_correlation = 0.0;  // pooled over all (episode, day) pairs

  bool has_agent() const { return !delta_bid_box.empty(); }
  double final_mean_return() const { return cum_reward_mean.empty() ? 0.0 : cum_reward_mean.back(); }

  static constexpr std::size_t kEarlyDays = 5;
};

namespace detail {

inline double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

/// Column-per-episode accumulator for one per-day series.
struct Panel {
  std::size_t days = 0;
  std::vector<std::vector<double>> rows;  // rows[day][episode]
  explicit Panel(std::size_t d, std::size_t episodes = 0) : days(d), rows(d) {
    for (auto& r : rows) r.reserve(episodes);
  }
  void mean_std(std::vector<double>& m, std::vector<double>& s) const {
    m.clear();
    s.clear();
    for (const auto& r : rows) {
      m.push_back(stats::mean(r));
      s.push_back(stats::stddev(r));
    }
  }
};

inline std::uint64_t evaluation_episode_seed(std::uint64_t seed, std::size_t e) {
  return derive_seed(seed, {static_cast<std::uint64_t>(Stream::kEpisode), 0x6576616cULL, e});
}

}  // namespace detail

/// Runs n_episodes full episodes under `policy`. Episode e uses the same
/// market seed for every policy, so two evaluations with one seed are coupled.
template <QuotingPolicy Policy>
BatchStats evaluate_policy(Policy&& policy, const EnvConfig& cfg, std::size_t n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
  const std::size_t d = cfg.n_days;
  detail::Panel price(d, n_episodes), inv(d, n_episodes), cum(d, n_episodes), db(d, n_episodes), da(d, n_episodes),
      kap(d, n_episodes);
  std::vector<double> xs, ys;
  xs.reserve(d * n_episodes);
  ys.reserve(d * n_episodes);
  BatchStats out;
  out.batch_size = n_episodes;
  out.n_days = d;
  out.s0 = cfg.price.s0;
  RfqEnv env(cfg);
  for (std::size_t e = 0; e < n_episodes; ++e) {
    Observation obs = env.reset(detail::evaluation_episode_seed(seed, e));
    double total = 0.0, early = 0.0, align = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const Transition tr = env.step(policy(obs));
      const StepRecord& r = tr.record;
      total += r.reward;
      const Intensities lam = Intensities::of(r.regime, cfg.levels);
      price.rows[k].push_back(r.price_next);
      inv.rows[k].push_back(r.inventory);
      cum.rows[k].push_back(total);
      db.rows[k].push_back(r.quotes.delta_bid);
      da.rows[k].push_back(r.quotes.delta_ask);
      kap.rows[k].push_back(kappa_implied_price(r.price, lam, cfg.price.kappa) - r.price);
      const double x = detail::sign(lam.ask - lam.bid);
      const double y = detail::sign(r.quotes.delta_bid - r.quotes.delta_ask);
      xs.push_back(x);
      ys.push_back(y);
      align += x * y;
      if (k < BatchStats::kEarlyDays) early += r.inventory;
      obs = tr.observation;
    }
    out.episode_returns.push_back(total);
    out.terminal_prices.push_back(env.state().s);
    out.terminal_inventory.push_back(env.state().q);
    out.early_inventory.push_back(early / static_cast<double>(std::min(d, BatchStats::kEarlyDays)));
    out.skew_alignment.push_back(align / static_cast<double>(d));
  }
  price.mean_std(out.price_mean, out.price_std);
  inv.mean_std(out.inventory_mean, out.inventory_std);
  std::vector<double> unused;
  cum.mean_std(out.cum_reward_mean, unused);
  db.mean_std(out.delta_bid_mean, unused);
  da.mean_std(out.delta_ask_mean, unused);
  kap.mean_std(out.kappa_implied_mean, unused);
  for (std::size_t k = 0; k < d; ++k) {
    out.delta_bid_box.push_back(stats::five_number(db.rows[k]));
    out.delta_ask_box.push_back(stats::five_number(da.rows[k]));
  }
  out.skew_correlation = stats::pearson(xs, ys);
  return out;
}

inline BatchStats evaluate_agent(const PolicyParams& params, const EnvConfig& cfg, std::size_t n_episodes,
                                 std::uint64_t seed) {
  return evaluate_policy(MeanActionPolicy{&params}, cfg, n_episodes, seed);
}

/// One market realisation: the regime governing day k and the mid at its end.
struct MarketPath {
  std::vector<IntensityState> regimes;
  std::vector<double> prices;
  std::vector<double> kappa_implied;  // kappa * (ask - bid) at the start of each day
};

/// Draws from the same streams as RfqEnv under `episode_seed`. With
/// `antithetic` the Gaussian price shocks are negated.
inline MarketPath market_path(const EnvConfig& cfg, std::uint64_t episode_seed, bool antithetic = false) {
  MarketPath m;
  m.regimes = episode_regimes(cfg, episode_seed).states;
  Rng price_rng = make_rng(episode_seed, Stream::kPrice);
  const double sign = antithetic ? -1.0 : 1.0;
  double s = cfg.price.s0;
  for (const IntensityState& st : m.regimes) {
    const Intensities lam = Intensities::of(st, cfg.levels);
    m.kappa_implied.push_back(kappa_implied_price(s, lam, cfg.price.kappa) - s);
    // a fresh distribution per day, as in transition(), so no cached second variate
    s = price_step(cfg.price, s, lam, sign * std::normal_distribution<double>(0.0, 1.0)(price_rng));
    m.prices.push_back(s);
  }
  return m;
}

/// Intensity and price paths only, episode e matching evaluation episode e.
inline BatchStats price_drift_study(const EnvConfig& cfg, std::size_t n_episodes, std::uint64_t seed,
                                    bool antithetic = false) {
  if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
  cfg.validate();
  const std::size_t d = cfg.n_days;
  detail::Panel price(d, n_episodes), kap(d, n_episodes);
  BatchStats out;
  out.batch_size = n_episodes;
  out.n_days = d;
  out.s0 = cfg.price.s0;
  for (std::size_t e = 0; e < n_episodes; ++e) {
    const MarketPath m = market_path(cfg, detail::evaluation_episode_seed(seed, e), antithetic);
    for (std::size_t k = 0; k < d; ++k) {
      price.rows[k].push_back(m.prices[k]);
      kap.rows[k].push_back(m.kappa_implied[k]);
    }
    out.terminal_prices.push_back(m.prices.back());
  }
  price.mean_std(out.price_mean, out.price_std);
  std::vector<double> unused;
  kap.mean_std(out.kappa_implied_mean, unused);
  return out;
}

/// Step records of evaluation episode e, as seen by evaluate_policy.
template <QuotingPolicy Policy>
std::vector<StepRecord> episode_trace(Policy&& policy, const EnvConfig& cfg, std::uint64_t seed, std::size_t e) {
  RfqEnv env(cfg);
  Observation obs = env.reset(detail::evaluation_episode_seed(seed, e));
  std::vector<StepRecord> out;
  while (!env.done()) {
    const Transition tr = env.step(policy(obs));
    out.push_back(tr.record);
    obs = tr.observation;
  }
  return out;
}

/// Per-day t statistics of the mean price against s0.
inline std::vector<double> price_deviation_t(const BatchStats& s) {
  std::vector<double> t;
  const double root_n = std::sqrt(static_cast<double>(s.batch_size));
  for (std::size_t k = 0; k < s.price_mean.size(); ++k) {
    const double se = s.price_std[k] / root_n;
    t.push_back(se > 0.0 ? (s.price_mean[k] - s.s0) / se : 0.0);
  }
  return t;
}

struct SymmetryReport {
  std::vector<double> bid_vs_ask;          // |mean delta_bid(A) - mean delta_ask(B)|
  std::vector<double> ask_vs_bid;          // |mean delta_ask(A) - mean delta_bid(B)|
  std::vector<double> inventory_mirror;    // |mean q_A + mean q_B|
  std::vector<double> price_mirror;        // |(mean S_A - s0) + (mean S_B - s0)|
  double quantile_relative_deviation = 0;  // L1 mismatch of mirrored box-plots over their mean L1 size
};

/// Compares two batches expected to be mirror images (bid and ask swapped).
inline SymmetryReport symmetry_report(const BatchStats& a, const BatchStats& b) {
  if (a.n_days != b.n_days || a.price_mean.size() != b.price_mean.size())
    throw ShapeMismatch("batches cover different horizons");
  if (a.has_agent() != b.has_agent()) throw ShapeMismatch("only one batch carries quoting statistics");
  SymmetryReport r;
  for (std::size_t k = 0; k < a.price_mean.size(); ++k)
    r.price_mirror.push_back(std::abs((a.price_mean[k] - a.s0) + (b.price_mean[k] - b.s0)));
  if (!a.has_agent()) return r;
  double dev = 0.0, mag = 0.0;
  const auto fields = [](const stats::FiveNumber& f) { return std::array{f.min, f.q25, f.median, f.q75, f.max}; };
  for (std::size_t k = 0; k < a.n_days; ++k) {
    r.bid_vs_ask.push_back(std::abs(a.delta_bid_mean[k] - b.delta_ask_mean[k]));
    r.ask_vs_bid.push_back(std::abs(a.delta_ask_mean[k] - b.delta_bid_mean[k]));
    r.inventory_mirror.push_back(std::abs(a.inventory_mean[k] + b.inventory_mean[k]));
    const auto ab = fields(a.delta_bid_box[k]), aa = fields(a.delta_ask_box[k]);
    const auto bb = fields(b.delta_bid_box[k]), ba = fields(b.delta_ask_box[k]);
    for (std::size_t i = 0; i < 5; ++i) {
      dev += std::abs(ab[i] - ba[i]) + std::abs(aa[i] - bb[i]);
      mag += 0.5 * (std::abs(ab[i]) + std::abs(ba[i]) + std::abs(aa[i]) + std::abs(bb[i]));
    }
  }
  r.quantile_relative_deviation = mag > 0.0 ? dev / mag : 0.0;
  return r;
}

struct ConstantQuoteResult {
  double delta = 0.0;
  double mean_return = 0.0;
  double std_error = 0.0;
};

/// Best symmetric constant quote over `grid` by mean episode return.
inline ConstantQuoteResult best_constant_quote(const EnvConfig& cfg, std::span<const double> grid,
                                               std::size_t n_episodes, std::uint64_t seed) {
  ConstantQuoteResult best{0.0, -std::numeric_limits<double>::infinity(), 0.0};
  for (double d : grid) {
    const BatchStats s = evaluate_policy(ConstantQuotePolicy(d, d, cfg), cfg, n_episodes, seed);
    const double m = stats::mean(s.episode_returns);
    if (m > best.mean_return) best = {d, m, stats::std_error(s.episode_returns)};
  }
  return best;
}

}  // namespace rfqmm
