#pragma once

// Proximal policy optimization with the clipped surrogate objective,
// generalized advantage estimation and Adam, over a batch of independent
// RfqEnv instances stepped in lock-step.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "rfqmm/checkpoint.hpp"
#include "rfqmm/errors.hpp"
#include "rfqmm/neural_policy.hpp"
#include "rfqmm/random.hpp"
#include "rfqmm/rfq_env.hpp"

namespace rfqmm {

struct PpoConfig {
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  std::size_t n_envs = 512;
  std::size_t rollout_horizon = 30;
  std::size_t n_epochs = 10;
  std::size_t minibatch_size = 2048;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;
  double adam_eps = 1e-5;
  double init_log_std = 0.0;
  std::size_t total_updates = 300;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    if (!(gae_lambda > 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must be in (0, 1]");
    if (!(clip_epsilon > 0.0)) throw ConfigError("clip_epsilon must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (n_envs == 0 || rollout_horizon == 0 || n_epochs == 0 || minibatch_size == 0)
      throw ConfigError("PPO sizes must be positive");
    if (!(value_coef >= 0.0) || !(entropy_coef >= 0.0) || !(max_grad_norm > 0.0) || !(adam_eps > 0.0))
      throw ConfigError("PPO coefficients out of range");
  }
};

class Adam {
 public:
  Adam(double lr, double eps, std::size_t n) : lr_(lr), eps_(eps) {
    state_.m.assign(n, 0.0);
    state_.v.assign(n, 0.0);
  }
  Adam(double lr, double eps, AdamState st) : lr_(lr), eps_(eps), state_(std::move(st)) {}

  void step(PolicyParams& p, const Gradients& g) {
    std::vector<double> theta = to_flat(p);
    const std::vector<double> grad = to_flat(g);
    if (grad.size() != state_.m.size()) throw ShapeMismatch("optimizer state does not match parameters");
    state_.step += 1.0;
    const double c1 = 1.0 - std::pow(kBeta1, state_.step);
    const double c2 = 1.0 - std::pow(kBeta2, state_.step);
    const double step_size = lr_ * std::sqrt(c2) / c1;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      state_.m[i] = kBeta1 * state_.m[i] + (1.0 - kBeta1) * grad[i];
      state_.v[i] = kBeta2 * state_.v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      theta[i] -= step_size * state_.m[i] / (std::sqrt(state_.v[i]) + eps_ * std::sqrt(c2));
    }
    p = from_flat(theta);
  }

  const AdamState& state() const { return state_; }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  double lr_;
  double eps_;
  AdamState state_;
};

/// Column index is t * n_envs + e.
struct RolloutBuffer {
  std::size_t n_envs = 0;
  std::size_t horizon = 0;
  Eigen::MatrixXd obs;       // kObsDim x N
  Eigen::MatrixXd actions;   // kActDim x N, unclipped samples
  Eigen::RowVectorXd log_probs;
  Eigen::RowVectorXd rewards;
  Eigen::RowVectorXd values;
  std::vector<std::uint8_t> dones;
  Eigen::RowVectorXd last_values;  // V of the observation after the final step, per env
  Eigen::RowVectorXd advantages;
  Eigen::RowVectorXd returns;
  std::vector<double> completed_returns;  // undiscounted, one per finished episode

  std::size_t size() const { return n_envs * horizon; }

  void allocate(std::size_t envs, std::size_t steps) {
    n_envs = envs;
    horizon = steps;
    const auto n = static_cast<Eigen::Index>(size());
    obs.setZero(kObsDim, n);
    actions.setZero(kActDim, n);
    log_probs.setZero(n);
    rewards.setZero(n);
    values.setZero(n);
    dones.assign(size(), 0);
    last_values.setZero(static_cast<Eigen::Index>(envs));
    advantages.setZero(n);
    returns.setZero(n);
    completed_returns.clear();
  }
};

inline std::uint64_t episode_seed(std::uint64_t rollout_seed, std::size_t env, std::size_t episode) {
  return derive_seed(rollout_seed, {static_cast<std::uint64_t>(Stream::kEpisode), env, episode});
}

/// Runs every env for cfg.rollout_horizon steps from a fresh reset, sampling
/// from the Gaussian policy. Envs reset automatically when an episode ends.
inline RolloutBuffer collect_rollouts(const PolicyParams& params, std::vector<RfqEnv>& envs, const PpoConfig& cfg,
                                      std::uint64_t rollout_seed) {
  RolloutBuffer buf;
  const std::size_t n_envs = envs.size();
  buf.allocate(n_envs, cfg.rollout_horizon);
  Rng policy_rng = make_rng(rollout_seed, Stream::kPolicy);
  std::normal_distribution<double> n01;

  std::vector<std::size_t> episode_count(n_envs, 0);
  std::vector<double> running(n_envs, 0.0);
  Eigen::MatrixXd cur(kObsDim, static_cast<Eigen::Index>(n_envs));
  for (std::size_t e = 0; e < n_envs; ++e)
    cur.col(static_cast<Eigen::Index>(e)) = to_vector(envs[e].reset(episode_seed(rollout_seed, e, 0)));

  const Eigen::Vector2d std_dev = params.log_std.array().exp();
  for (std::size_t t = 0; t < cfg.rollout_horizon; ++t) {
    const ForwardCache fc = forward_batch(params, cur);
    for (std::size_t e = 0; e < n_envs; ++e) {
      const auto col = static_cast<Eigen::Index>(t * n_envs + e);
      const auto ec = static_cast<Eigen::Index>(e);
      Eigen::Vector2d a;
      for (int i = 0; i < 2; ++i) a(i) = fc.mean(i, ec) + std_dev(i) * n01(policy_rng);
      buf.obs.col(col) = cur.col(ec);
      buf.actions.col(col) = a;
      buf.values(col) = fc.value(ec);
      const Transition tr = envs[e].step(to_action(a));
      buf.rewards(col) = tr.reward;
      buf.dones[static_cast<std::size_t>(col)] = tr.done ? 1 : 0;
      running[e] += tr.reward;
      if (tr.done) {
        buf.completed_returns.push_back(running[e]);
        running[e] = 0.0;
        cur.col(ec) = to_vector(envs[e].reset(episode_seed(rollout_seed, e, ++episode_count[e])));
      } else {
        cur.col(ec) = to_vector(tr.observation);
      }
    }
    buf.log_probs.segment(static_cast<Eigen::Index>(t * n_envs), static_cast<Eigen::Index>(n_envs)) =
        log_prob_batch(fc.mean, params.log_std,
                       buf.actions.middleCols(static_cast<Eigen::Index>(t * n_envs), static_cast<Eigen::Index>(n_envs)));
  }
  buf.last_values = forward_batch(params, cur).value;
  return buf;
}

/// Fills buf.advantages and buf.returns (unnormalized). A done flag at step t
/// cuts the bootstrap from t+1; the final step bootstraps from last_values.
inline void compute_gae(RolloutBuffer& buf, double gamma, double gae_lambda) {
  const std::size_t n = buf.n_envs;
  for (std::size_t e = 0; e < n; ++e) {
    double gae = 0.0;
    double next_value = buf.last_values(static_cast<Eigen::Index>(e));
    for (std::size_t ti = buf.horizon; ti > 0; --ti) {
      const std::size_t t = ti - 1;
      const auto i = static_cast<Eigen::Index>(t * n + e);
      const double nonterminal = buf.dones[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
      const double delta = buf.rewards(i) + gamma * next_value * nonterminal - buf.values(i);
      gae = delta + gamma * gae_lambda * nonterminal * gae;
      buf.advantages(i) = gae;
      buf.returns(i) = gae + buf.values(i);
      next_value = buf.values(i);
    }
  }
}

/// Zero mean, unit (population) standard deviation. A constant input is only centred.
inline Eigen::RowVectorXd normalize_advantages(const Eigen::RowVectorXd& adv) {
  const double mean = adv.mean();
  Eigen::RowVectorXd out = adv.array() - mean;
  const double sd = std::sqrt(out.squaredNorm() / static_cast<double>(out.size()));
  if (sd > 0.0) out /= sd;
  // Second centring pass removes the rounding left by the first.
  out.array() -= out.mean();
  return out;
}

inline double clipped_surrogate(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

struct Minibatch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actions;
  Eigen::RowVectorXd old_log_probs;
  Eigen::RowVectorXd advantages;
  Eigen::RowVectorXd returns;
};

inline Minibatch gather(const RolloutBuffer& buf, const Eigen::RowVectorXd& adv, std::span<const Eigen::Index> idx) {
  const auto b = static_cast<Eigen::Index>(idx.size());
  Minibatch mb{Eigen::MatrixXd(kObsDim, b), Eigen::MatrixXd(kActDim, b), Eigen::RowVectorXd(b),
               Eigen::RowVectorXd(b), Eigen::RowVectorXd(b)};
  for (Eigen::Index k = 0; k < b; ++k) {
    const Eigen::Index i = idx[static_cast<std::size_t>(k)];
    mb.obs.col(k) = buf.obs.col(i);
    mb.actions.col(k) = buf.actions.col(i);
    mb.old_log_probs(k) = buf.log_probs(i);
    mb.advantages(k) = adv(i);
    mb.returns(k) = buf.returns(i);
  }
  return mb;
}

struct PpoLoss {
  double total = 0.0;
  double policy = 0.0;  // -mean(clipped surrogate)
  double value = 0.0;   // mean squared error
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  std::optional<Gradients> grad;
};

/// total = policy + value_coef * value - entropy_coef * entropy.
inline PpoLoss ppo_minibatch_loss(const PolicyParams& p, const Minibatch& mb, const PpoConfig& cfg,
                                  bool with_gradient) {
  const ForwardCache c = forward_batch(p, mb.obs);
  const Eigen::Index b = c.batch();
  const double inv_b = 1.0 / static_cast<double>(b);
  const Eigen::RowVectorXd log_ratio = log_prob_batch(c.mean, p.log_std, mb.actions) - mb.old_log_probs;
  const Eigen::RowVectorXd ratio = log_ratio.array().exp().matrix();

  PpoLoss out;
  Eigen::RowVectorXd coef(b);  // d(policy loss)/d log pi per sample
  double surr = 0.0, clipped = 0.0, kl = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double r = ratio(i);
    const double a = mb.advantages(i);
    const double unclipped = r * a;
    const double s = clipped_surrogate(r, a, cfg.clip_epsilon);
    surr += s;
    coef(i) = unclipped <= s ? -unclipped * inv_b : 0.0;
    if (std::abs(r - 1.0) > cfg.clip_epsilon) clipped += 1.0;
    kl += (r - 1.0) - log_ratio(i);
  }
  const Eigen::RowVectorXd verr = c.value - mb.returns;
  out.policy = -surr * inv_b;
  out.value = verr.squaredNorm() * inv_b;
  out.entropy = gaussian_entropy(p.log_std);
  out.total = out.policy + cfg.value_coef * out.value - cfg.entropy_coef * out.entropy;
  out.clip_fraction = clipped * inv_b;
  out.approx_kl = kl * inv_b;
  if (!std::isfinite(out.total)) throw NonFiniteLoss("policy " + std::to_string(out.policy) + ", value " +
                                                     std::to_string(out.value));
  if (with_gradient) {
    OutputGradients up = zero_output_gradients(b);
    accumulate_log_prob_grad(c, p.log_std, mb.actions, coef, up);
    up.dvalue = (2.0 * cfg.value_coef * inv_b) * verr;
    up.dlog_std.array() -= cfg.entropy_coef;
    out.grad = backward(p, c, up);
  }
  return out;
}

inline void clip_grad_norm(Gradients& g, double max_norm) {
  const double norm = std::sqrt(squared_norm(g));
  if (norm > max_norm) {
    const double s = max_norm / (norm + 1e-6);
    g.for_each([&](std::string_view, auto& t) { t *= s; });
  }
}

struct TrainLogEntry {
  std::size_t update = 0;
  double mean_return = 0.0;
  double return_std = 0.0;
  std::size_t n_episodes = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

using TrainLog = std::vector<TrainLogEntry>;

/// Common health bound for the approximate KL between successive policies.
inline constexpr double kApproxKlWarning = 0.1;

/// n_epochs passes over shuffled minibatches of the buffer (advantages must
/// already be computed). Fills the loss fields of the returned entry.
inline TrainLogEntry ppo_update(PolicyParams& params, Adam& opt, const RolloutBuffer& buf, const PpoConfig& cfg,
                                std::uint64_t shuffle_seed) {
  const Eigen::RowVectorXd adv = normalize_advantages(buf.advantages);
  std::vector<Eigen::Index> order(buf.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng = make_rng(shuffle_seed, Stream::kShuffle);
  TrainLogEntry log;
  std::size_t n_mb = 0;
  for (std::size_t epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch_size) {
      const std::size_t len = std::min(cfg.minibatch_size, order.size() - start);
      const Minibatch mb = gather(buf, adv, std::span<const Eigen::Index>(order).subspan(start, len));
      PpoLoss loss = ppo_minibatch_loss(params, mb, cfg, true);
      clip_grad_norm(*loss.grad, cfg.max_grad_norm);
      opt.step(params, *loss.grad);
      if (!all_finite(params)) throw NonFiniteLoss("parameters became non-finite");
      log.policy_loss += loss.policy;
      log.value_loss += loss.value;
      log.entropy += loss.entropy;
      log.clip_fraction += loss.clip_fraction;
      log.approx_kl += loss.approx_kl;
      ++n_mb;
    }
  }
  const double k = 1.0 / static_cast<double>(n_mb);
  log.policy_loss *= k;
  log.value_loss *= k;
  log.entropy *= k;
  log.clip_fraction *= k;
  log.approx_kl *= k;
  return log;
}

struct TrainResult {
  PolicyParams params;
  AdamState optimizer;
  TrainLog log;
};

struct TrainOptions {
  /// Resume point; its update count continues the numbering.
  std::optional<Checkpoint> resume;
  /// Called after every update with the running state.
  std::function<void(const TrainLogEntry&, const PolicyParams&, const Adam&)> on_update;
};

inline std::vector<RfqEnv> make_envs(const EnvConfig& env_cfg, std::size_t n) {
  return std::vector<RfqEnv>(n, RfqEnv(env_cfg));
}

inline std::uint64_t update_seed(std::uint64_t master, std::size_t update, std::uint64_t purpose) {
  return derive_seed(master, {0x7570646174ULL, update, purpose});
}

/// Alternates rollout collection and PPO updates until cfg.total_updates.
/// Every update draws from streams keyed by (seed, update index), so a resumed
/// run with optimizer state reproduces the uninterrupted one.
inline TrainResult train(const PpoConfig& cfg, const EnvConfig& env_cfg, const TrainOptions& opts = {}) {
  cfg.validate();
  env_cfg.validate();
  TrainResult res;
  std::size_t first = 0;
  if (opts.resume) {
    res.params = opts.resume->params;
    first = opts.resume->update;
  } else {
    res.params = init_policy(cfg.seed, cfg.init_log_std);
  }
  Adam opt = (opts.resume && opts.resume->optimizer) ? Adam(cfg.learning_rate, cfg.adam_eps, *opts.resume->optimizer)
                                                      : Adam(cfg.learning_rate, cfg.adam_eps, res.params.size());
  std::vector<RfqEnv> envs = make_envs(env_cfg, cfg.n_envs);
  for (std::size_t u = first; u < cfg.total_updates; ++u) {
    RolloutBuffer buf = collect_rollouts(res.params, envs, cfg, update_seed(cfg.seed, u, 0));
    compute_gae(buf, cfg.gamma, cfg.gae_lambda);
    TrainLogEntry entry = ppo_update(res.params, opt, buf, cfg, update_seed(cfg.seed, u, 1));
    entry.update = u;
    entry.n_episodes = buf.completed_returns.size();
    // Plain loops: Eigen reductions over a Map depend on the buffer's alignment.
    const std::vector<double>& r = buf.completed_returns;
    if (!r.empty()) {
      double sum = 0.0;
      for (double v : r) sum += v;
      entry.mean_return = sum / static_cast<double>(r.size());
      double ss = 0.0;
      for (double v : r) ss += (v - entry.mean_return) * (v - entry.mean_return);
      entry.return_std = r.size() > 1 ? std::sqrt(ss / static_cast<double>(r.size() - 1)) : 0.0;
    }
    res.log.push_back(entry);
    if (opts.on_update) opts.on_update(entry, res.params, opt);
  }
  res.optimizer = opt.state();
  return res;
}

/// Mean of per-update mean returns over the trailing fraction of the log.
inline double trailing_mean_return(const TrainLog& log, double fraction = 0.1) {
  if (log.empty()) return 0.0;
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * log.size())));
  double s = 0.0;
  for (std::size_t i = log.size() - n; i < log.size(); ++i) s += log[i].mean_return;
  return s / static_cast<double>(n);
}

}  // namespace rfqmm
