#pragma once

// Run configuration, output files and the five command bodies behind the
// rfqmm executable. Settings resolve as preset < config file < command-line
// flag. No output file carries a timestamp or absolute path, so a fixed seed
// reproduces every byte.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfqmm/checkpoint.hpp"
#include "rfqmm/errors.hpp"
#include "rfqmm/intensity_process.hpp"
#include "rfqmm/ppo_trainer.hpp"
#include "rfqmm/scenario_analysis.hpp"
#include "rfqmm/stats.hpp"

namespace rfqmm::cli {

inline constexpr std::string_view kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

struct RunConfig {
  std::string preset = "baseline";
  std::uint64_t seed = 1;
  std::size_t episodes = 1000;
  std::string out = "out";
  bool deterministic = false;
  std::vector<std::string> checkpoints;  // evaluate: one; symmetry: zero or two
  std::string resume;                    // train: checkpoint directory to continue from
  std::string preset_b = "pos_Q";        // symmetry: mirror of `preset`
  bool antithetic = true;                // symmetry without agents: negate shocks of the mirror run
  EnvConfig env;
  PpoConfig ppo;
};

/// Command-line values; unset ones fall through to the file and preset.
struct Overrides {
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  std::optional<std::string> out;
  bool deterministic = false;
  std::vector<std::string> checkpoints;
};

namespace detail {

inline const char* fill_mode_name(FillMode m) { return m == FillMode::kThinned ? "thinned" : "per_rfq"; }

inline constexpr std::array<std::string_view, 4> kStateNames = {"low_low", "bid_high", "ask_high", "high_high"};

inline void reject_unknown(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + std::string(where));
  }
}

template <class T>
void take(const Json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline void apply_env(const Json& j, EnvConfig& e) {
  reject_unknown(j,
                 {"n_days", "z", "q_init", "phi", "delta_min", "delta_max", "q_scale", "inventory_cap", "dt_days",
                  "fill_mode", "kappa", "sigma", "s0", "dt", "alpha", "beta", "delta0", "lambda_low", "lambda_high",
                  "generator", "initial_state"},
                 "env");
  take(j, "n_days", e.n_days);
  take(j, "z", e.z);
  take(j, "q_init", e.q_init);
  take(j, "phi", e.phi);
  take(j, "delta_min", e.delta_min);
  take(j, "delta_max", e.delta_max);
  take(j, "q_scale", e.q_scale);
  take(j, "inventory_cap", e.inventory_cap);
  take(j, "dt_days", e.dt_days);
  take(j, "kappa", e.price.kappa);
  take(j, "sigma", e.price.sigma);
  take(j, "s0", e.price.s0);
  take(j, "dt", e.price.dt);
  take(j, "alpha", e.curve.alpha);
  take(j, "beta", e.curve.beta);
  take(j, "delta0", e.curve.delta0);
  take(j, "lambda_low", e.levels.lambda_low);
  take(j, "lambda_high", e.levels.lambda_high);
  if (j.contains("fill_mode")) {
    const auto m = j.at("fill_mode").get<std::string>();
    if (m == "thinned") e.fill_mode = FillMode::kThinned;
    else if (m == "per_rfq") e.fill_mode = FillMode::kPerRfq;
    else throw ConfigError("fill_mode must be 'thinned' or 'per_rfq'");
  }
  if (j.contains("generator")) {
    const auto g = j.at("generator").get<std::vector<double>>();
    if (g.size() != 16) throw ConfigError("generator needs 16 numbers in row-major order");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) e.generator(r, c) = g[static_cast<std::size_t>(4 * r + c)];
  }
  if (j.contains("initial_state")) {
    const auto s = j.at("initial_state").get<std::string>();
    if (s == "random") {
      e.initial_state = InitialStateRule::uniform();
    } else {
      bool found = false;
      for (int i = 0; i < 4; ++i)
        if (s == kStateNames[static_cast<std::size_t>(i)]) {
          e.initial_state = InitialStateRule::at(IntensityState{i});
          found = true;
        }
      if (!found) throw ConfigError("initial_state must be random, low_low, bid_high, ask_high or high_high");
    }
  }
}

inline void apply_ppo(const Json& j, PpoConfig& p) {
  reject_unknown(j,
                 {"learning_rate", "gamma", "gae_lambda", "clip_epsilon", "n_envs", "rollout_horizon", "n_epochs",
                  "minibatch_size", "value_coef", "entropy_coef", "max_grad_norm", "adam_eps", "init_log_std",
                  "total_updates"},
                 "ppo");
  take(j, "learning_rate", p.learning_rate);
  take(j, "gamma", p.gamma);
  take(j, "gae_lambda", p.gae_lambda);
  take(j, "clip_epsilon", p.clip_epsilon);
  take(j, "n_envs", p.n_envs);
  take(j, "rollout_horizon", p.rollout_horizon);
  take(j, "n_epochs", p.n_epochs);
  take(j, "minibatch_size", p.minibatch_size);
  take(j, "value_coef", p.value_coef);
  take(j, "entropy_coef", p.entropy_coef);
  take(j, "max_grad_norm", p.max_grad_norm);
  take(j, "adam_eps", p.adam_eps);
  take(j, "init_log_std", p.init_log_std);
  take(j, "total_updates", p.total_updates);
}

}  // namespace detail

inline Json env_to_json(const EnvConfig& e) {
  Json j;
  j["n_days"] = e.n_days;
  j["z"] = e.z;
  j["q_init"] = e.q_init;
  j["phi"] = e.phi;
  j["delta_min"] = e.delta_min;
  j["delta_max"] = e.delta_max;
  j["q_scale"] = e.q_scale;
  j["inventory_cap"] = e.inventory_cap;
  j["dt_days"] = e.dt_days;
  j["fill_mode"] = detail::fill_mode_name(e.fill_mode);
  j["kappa"] = e.price.kappa;
  j["sigma"] = e.price.sigma;
  j["s0"] = e.price.s0;
  j["dt"] = e.price.dt;
  j["alpha"] = e.curve.alpha;
  j["beta"] = e.curve.beta;
  j["delta0"] = e.curve.delta0;
  j["lambda_low"] = e.levels.lambda_low;
  j["lambda_high"] = e.levels.lambda_high;
  std::vector<double> g;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) g.push_back(e.generator(r, c));
  j["generator"] = g;
  j["initial_state"] = e.random_initial()
                           ? std::string("random")
                           : std::string(detail::kStateNames[static_cast<std::size_t>(e.initial_state.fixed.index)]);
  return j;
}

inline Json ppo_to_json(const PpoConfig& p) {
  Json j;
  j["learning_rate"] = p.learning_rate;
  j["gamma"] = p.gamma;
  j["gae_lambda"] = p.gae_lambda;
  j["clip_epsilon"] = p.clip_epsilon;
  j["n_envs"] = p.n_envs;
  j["rollout_horizon"] = p.rollout_horizon;
  j["n_epochs"] = p.n_epochs;
  j["minibatch_size"] = p.minibatch_size;
  j["value_coef"] = p.value_coef;
  j["entropy_coef"] = p.entropy_coef;
  j["max_grad_norm"] = p.max_grad_norm;
  j["adam_eps"] = p.adam_eps;
  j["init_log_std"] = p.init_log_std;
  j["total_updates"] = p.total_updates;
  return j;
}

/// Complete, explicit form of a configuration; loading it reproduces `c`.
inline Json to_json(const RunConfig& c) {
  Json j;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["episodes"] = c.episodes;
  j["out"] = c.out;
  j["deterministic"] = c.deterministic;
  j["checkpoints"] = c.checkpoints;
  j["resume"] = c.resume;
  j["symmetry"] = Json{{"preset_b", c.preset_b}, {"antithetic", c.antithetic}};
  j["env"] = env_to_json(c.env);
  j["ppo"] = ppo_to_json(c.ppo);
  return j;
}

/// Everything that shapes results, i.e. the configuration without `out`.
inline Json reproducible_part(const RunConfig& c) {
  Json j = to_json(c);
  j.erase("out");
  return j;
}

inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(reproducible_part(c).dump())); }

inline RunConfig resolve_config(const Json& file, const Overrides& ov = {}) {
  RunConfig c;
  try {
    detail::reject_unknown(file,
                           {"preset", "seed", "episodes", "out", "deterministic", "checkpoints", "resume", "symmetry",
                            "env", "ppo"},
                           "config");
    c.preset = ov.preset ? *ov.preset : file.value("preset", std::string("baseline"));
    c.env = resolve_preset(c.preset).env;
    if (file.contains("env")) detail::apply_env(file.at("env"), c.env);
    if (file.contains("ppo")) detail::apply_ppo(file.at("ppo"), c.ppo);
    if (file.contains("symmetry")) {
      const Json& s = file.at("symmetry");
      detail::reject_unknown(s, {"preset_b", "antithetic"}, "symmetry");
      detail::take(s, "preset_b", c.preset_b);
      detail::take(s, "antithetic", c.antithetic);
    }
    detail::take(file, "seed", c.seed);
    detail::take(file, "episodes", c.episodes);
    detail::take(file, "out", c.out);
    detail::take(file, "deterministic", c.deterministic);
    detail::take(file, "checkpoints", c.checkpoints);
    detail::take(file, "resume", c.resume);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  if (ov.seed) c.seed = *ov.seed;
  if (ov.episodes) c.episodes = *ov.episodes;
  if (ov.out) c.out = *ov.out;
  if (ov.deterministic) c.deterministic = true;
  if (!ov.checkpoints.empty()) c.checkpoints = ov.checkpoints;
  c.ppo.seed = c.seed;
  if (c.episodes < 1) throw ConfigError("episodes must be >= 1");
  resolve_preset(c.preset_b);
  c.env.validate();
  c.ppo.validate();
  return c;
}

inline Json read_config_file(const std::filesystem::path& p) {
  const std::string text = read_file(p);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

inline RunConfig load_config(const std::optional<std::filesystem::path>& file, const Overrides& ov = {}) {
  return resolve_config(file ? read_config_file(*file) : Json::object(), ov);
}

// ---------------------------------------------------------------------------
// Output

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Collects named files and writes them together after all work succeeded.
class OutputSet {
 public:
  void add(std::string name, std::string body) { files_.emplace_back(std::move(name), std::move(body)); }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& f : files_) n.push_back(f.first);
    return n;
  }

  void write(const std::filesystem::path& dir, Json manifest) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& [name, body] : files_) write_file(dir / name, body);
    manifest["outputs"] = names();
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

inline Json base_manifest(std::string_view command, const RunConfig& c) {
  Json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["preset"] = c.preset;
  m["config_hash"] = config_hash(c);
  m["seeds"] = Json{{"master", c.seed}};
  m["batch_size"] = c.episodes;
  m["threads"] = 1;
  m["config"] = reproducible_part(c);
  return m;
}

inline std::string price_band_csv(const BatchStats& s) {
  std::string out = "step,mean,std\n";
  for (std::size_t k = 0; k < s.price_mean.size(); ++k)
    out += std::to_string(k) + "," + num(s.price_mean[k]) + "," + num(s.price_std[k]) + "\n";
  return out;
}

inline std::string inventory_path_csv(const BatchStats& s) {
  std::string out = "step,mean,std\n";
  for (std::size_t k = 0; k < s.inventory_mean.size(); ++k)
    out += std::to_string(k) + "," + num(s.inventory_mean[k]) + "," + num(s.inventory_std[k]) + "\n";
  return out;
}

inline std::string delta_box_csv(const BatchStats& s) {
  std::string out = "step,side,min,q25,q50,q75,max\n";
  const auto row = [&](std::size_t k, const char* side, const stats::FiveNumber& f) {
    out += std::to_string(k) + "," + side + "," + num(f.min) + "," + num(f.q25) + "," + num(f.median) + "," +
           num(f.q75) + "," + num(f.max) + "\n";
  };
  for (std::size_t k = 0; k < s.delta_bid_box.size(); ++k) {
    row(k, "bid", s.delta_bid_box[k]);
    row(k, "ask", s.delta_ask_box[k]);
  }
  return out;
}

inline std::string kappa_implied_csv(const BatchStats& s) {
  std::string out = "step,value\n";
  for (std::size_t k = 0; k < s.kappa_implied_mean.size(); ++k)
    out += std::to_string(k) + "," + num(s.kappa_implied_mean[k]) + "\n";
  return out;
}

/// Mean cumulative reward per trading day of an evaluation batch.
inline std::string cumulative_reward_csv(const BatchStats& s) {
  std::string out = "step,mean\n";
  for (std::size_t k = 0; k < s.cum_reward_mean.size(); ++k)
    out += std::to_string(k) + "," + num(s.cum_reward_mean[k]) + "\n";
  return out;
}

/// Mean episode return per training update.
inline std::string reward_curve_csv(const TrainLog& log) {
  std::string out = "update,mean\n";
  for (const auto& e : log) out += std::to_string(e.update) + "," + num(e.mean_return) + "\n";
  return out;
}

inline std::string train_log_csv(const TrainLog& log) {
  std::string out =
      "update_index,mean_return,return_std,n_episodes,policy_loss,value_loss,entropy,clip_fraction,approx_kl\n";
  for (const auto& e : log)
    out += std::to_string(e.update) + "," + num(e.mean_return) + "," + num(e.return_std) + "," +
           std::to_string(e.n_episodes) + "," + num(e.policy_loss) + "," + num(e.value_loss) + "," + num(e.entropy) +
           "," + num(e.clip_fraction) + "," + num(e.approx_kl) + "\n";
  return out;
}

inline std::string step_records_csv(std::span<const StepRecord> recs) {
  std::string out =
      "step,regime,lambda_bid_norm,lambda_ask_norm,time_frac,inventory_scaled,action_bid,action_ask,delta_bid,"
      "delta_ask,n_bid_fills,n_ask_fills,price,price_next,inventory,cash,pnl_delta,reward\n";
  for (const auto& r : recs)
    out += std::to_string(r.day) + "," + std::to_string(r.regime.index) + "," + num(r.observation.lambda_bid_norm) +
           "," + num(r.observation.lambda_ask_norm) + "," + num(r.observation.time_frac) + "," +
           num(r.observation.inventory_scaled) + "," + num(r.action.bid) + "," + num(r.action.ask) + "," +
           num(r.quotes.delta_bid) + "," + num(r.quotes.delta_ask) + "," + std::to_string(r.n_bid_fills) + "," +
           std::to_string(r.n_ask_fills) + "," + num(r.price) + "," + num(r.price_next) + "," + num(r.inventory) +
           "," + num(r.cash) + "," + num(r.pnl_delta) + "," + num(r.reward) + "\n";
  return out;
}

inline std::string episodes_csv(const BatchStats& s) {
  std::string out = "episode,return,terminal_price,terminal_inventory\n";
  for (std::size_t e = 0; e < s.episode_returns.size(); ++e)
    out += std::to_string(e) + "," + num(s.episode_returns[e]) + "," + num(s.terminal_prices[e]) + "," +
           num(s.terminal_inventory[e]) + "\n";
  return out;
}

inline Json summary(std::span<const double> x) {
  return Json{{"mean", stats::mean(x)}, {"std_error", stats::std_error(x)}, {"t", stats::t_stat(x)}};
}

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit status; errors propagate as
// rfqmm::Error and are mapped by the caller.

inline int cmd_simulate(const RunConfig& c, std::ostream& log = std::cerr) {
  const BatchStats s = price_drift_study(c.env, c.episodes, c.seed);
  std::string paths = "path,step,regime,lambda_bid,lambda_ask,price\n";
  for (std::size_t e = 0; e < c.episodes; ++e) {
    const MarketPath m = market_path(c.env, rfqmm::detail::evaluation_episode_seed(c.seed, e));
    for (std::size_t k = 0; k < m.prices.size(); ++k) {
      const Intensities lam = Intensities::of(m.regimes[k], c.env.levels);
      paths += std::to_string(e) + "," + std::to_string(k) + "," + std::to_string(m.regimes[k].index) + "," +
               num(lam.bid) + "," + num(lam.ask) + "," + num(m.prices[k]) + "\n";
    }
  }
  OutputSet out;
  out.add("price_band.csv", price_band_csv(s));
  out.add("kappa_implied.csv", kappa_implied_csv(s));
  out.add("paths.csv", paths);
  Json m = base_manifest("simulate", c);
  m["results"] = Json{{"terminal_price", summary(s.terminal_prices)},
                      {"terminal_price_t_vs_s0", stats::t_stat(s.terminal_prices, s.s0)}};
  out.write(c.out, m);
  log << "simulate: " << c.episodes << " paths, final mean price " << num(s.price_mean.back()) << "\n";
  return 0;
}

inline int cmd_train(const RunConfig& c, std::ostream& log = std::cerr) {
  TrainOptions opts;
  if (!c.resume.empty()) {
    opts.resume = load_checkpoint(c.resume);
    if (opts.resume->update > c.ppo.total_updates)
      throw ConfigError("checkpoint is past total_updates (" + std::to_string(opts.resume->update) + ")");
  }
  std::size_t kl_warnings = 0;
  opts.on_update = [&](const TrainLogEntry& e, const PolicyParams&, const Adam&) {
    if (e.approx_kl > kApproxKlWarning) ++kl_warnings;
    log << "update " << e.update << " mean_return " << num(e.mean_return) << " approx_kl " << num(e.approx_kl)
        << "\n";
  };
  const TrainResult r = train(c.ppo, c.env, opts);
  const std::size_t done = opts.resume ? opts.resume->update + r.log.size() : r.log.size();
  OutputSet out;
  out.add("reward_curve.csv", reward_curve_csv(r.log));
  out.add("train_log.csv", train_log_csv(r.log));
  Json m = base_manifest("train", c);
  m["results"] = Json{{"updates_completed", done},
                      {"first_update", r.log.empty() ? done : r.log.front().update},
                      {"trailing_mean_return", trailing_mean_return(r.log)},
                      {"approx_kl_warnings", kl_warnings},
                      {"checkpoint", "checkpoint"}};
  out.write(c.out, m);
  save_checkpoint(std::filesystem::path(c.out) / "checkpoint", Checkpoint{r.params, c.seed, done, r.optimizer});
  return 0;
}

inline int cmd_evaluate(const RunConfig& c, std::ostream& log = std::cerr) {
  if (c.checkpoints.size() != 1) throw ConfigError("evaluate needs exactly one checkpoint");
  // Load and verify before anything is written.
  const Checkpoint ck = load_checkpoint(c.checkpoints.front());
  const BatchStats s = evaluate_agent(ck.params, c.env, c.episodes, c.seed);
  const BatchStats st = evaluate_policy(StochasticPolicy{&ck.params, make_rng(c.seed, Stream::kPolicy)}, c.env,
                                        c.episodes, c.seed);
  OutputSet out;
  out.add("price_band.csv", price_band_csv(s));
  out.add("delta_box.csv", delta_box_csv(s));
  out.add("inventory_path.csv", inventory_path_csv(s));
  out.add("reward_curve.csv", cumulative_reward_csv(s));
  out.add("kappa_implied.csv", kappa_implied_csv(s));
  out.add("episodes.csv", episodes_csv(s));
  out.add("trace.csv", step_records_csv(episode_trace(MeanActionPolicy{&ck.params}, c.env, c.seed, 0)));
  Json m = base_manifest("evaluate", c);
  m["checkpoint"] = Json{{"update", ck.update}, {"seed", ck.seed}};
  m["box_plot"] = "min/q25/median/q75/max per step, no whisker trimming";
  m["results"] = Json{{"final_mean_cumulative_reward", s.final_mean_return()},
                      {"episode_return", summary(s.episode_returns)},
                      {"stochastic_policy_return", summary(st.episode_returns)},
                      {"terminal_inventory", summary(s.terminal_inventory)},
                      {"early_inventory", summary(s.early_inventory)},
                      {"skew_correlation", s.skew_correlation},
                      {"skew_alignment", summary(s.skew_alignment)}};
  out.write(c.out, m);
  log << "evaluate: mean cumulative reward " << num(s.final_mean_return()) << " over " << c.episodes
      << " episodes\n";
  return 0;
}

inline int cmd_stationary(const RunConfig& c, std::ostream& stdout_stream = std::cout) {
  const Eigen::VectorXd pi = stationary_distribution(c.env.generator);
  std::string line;
  for (Eigen::Index i = 0; i < pi.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", pi(i));
    line += (i ? " " : "") + std::string(buf);
  }
  stdout_stream << line << "\n";
  Json m = base_manifest("stationary", c);
  m["results"] = Json{{"stationary", std::vector<double>(pi.data(), pi.data() + pi.size())}, {"formatted", line}};
  OutputSet{}.write(c.out, m);
  return 0;
}

/// Mirror comparison of `preset` against `preset_b`. With two checkpoints the
/// agents are evaluated on their own markets; without, only price paths.
inline int cmd_symmetry(const RunConfig& c, std::ostream& log = std::cerr) {
  if (!c.checkpoints.empty() && c.checkpoints.size() != 2)
    throw ConfigError("symmetry takes zero or two checkpoints");
  EnvConfig env_a = c.env, env_b = c.env;
  env_b.generator = resolve_preset(c.preset_b).env.generator;
  env_b.initial_state = resolve_preset(c.preset_b).env.initial_state;
  std::optional<Checkpoint> ck_a, ck_b;
  if (!c.checkpoints.empty()) {
    ck_a = load_checkpoint(c.checkpoints[0]);
    ck_b = load_checkpoint(c.checkpoints[1]);
  }
  const BatchStats a = ck_a ? evaluate_agent(ck_a->params, env_a, c.episodes, c.seed)
                            : price_drift_study(env_a, c.episodes, c.seed);
  const BatchStats b = ck_b ? evaluate_agent(ck_b->params, env_b, c.episodes, c.seed)
                            : price_drift_study(env_b, c.episodes, c.seed, c.antithetic);
  const SymmetryReport r = symmetry_report(a, b);
  std::string csv = "step,price_mirror,bid_vs_ask,ask_vs_bid,inventory_mirror\n";
  for (std::size_t k = 0; k < r.price_mirror.size(); ++k) {
    csv += std::to_string(k) + "," + num(r.price_mirror[k]);
    if (a.has_agent())
      csv += "," + num(r.bid_vs_ask[k]) + "," + num(r.ask_vs_bid[k]) + "," + num(r.inventory_mirror[k]);
    else
      csv += ",,,";
    csv += "\n";
  }
  OutputSet out;
  out.add("symmetry.csv", csv);
  out.add("price_band_a.csv", price_band_csv(a));
  out.add("price_band_b.csv", price_band_csv(b));
  Json res{{"preset_a", c.preset}, {"preset_b", c.preset_b},
           {"terminal_price_t_a", stats::t_stat(a.terminal_prices, a.s0)},
           {"terminal_price_t_b", stats::t_stat(b.terminal_prices, b.s0)}};
  if (a.has_agent()) {
    out.add("delta_box_a.csv", delta_box_csv(a));
    out.add("delta_box_b.csv", delta_box_csv(b));
    out.add("inventory_path_a.csv", inventory_path_csv(a));
    out.add("inventory_path_b.csv", inventory_path_csv(b));
    res["quantile_relative_deviation"] = r.quantile_relative_deviation;
    res["terminal_inventory_a"] = summary(a.terminal_inventory);
    res["terminal_inventory_b"] = summary(b.terminal_inventory);
  }
  Json m = base_manifest("symmetry", c);
  m["results"] = res;
  out.write(c.out, m);
  log << "symmetry: " << c.preset << " vs " << c.preset_b << "\n";
  return 0;
}

}  // namespace rfqmm::cli
