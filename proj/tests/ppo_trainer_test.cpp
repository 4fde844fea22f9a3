#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include "rfqmm/ppo_trainer.hpp"

using namespace rfqmm;

namespace {

PpoConfig tiny_config() {
  PpoConfig cfg;
  cfg.n_envs = 8;
  cfg.rollout_horizon = 30;
  cfg.minibatch_size = 60;
  cfg.n_epochs = 3;
  cfg.total_updates = 4;
  cfg.seed = 21;
  return cfg;
}

RolloutBuffer random_buffer(std::mt19937_64& rng, std::size_t envs, std::size_t horizon) {
  std::normal_distribution<double> n(0.0, 2.0);
  std::bernoulli_distribution done(0.15);
  RolloutBuffer b;
  b.allocate(envs, horizon);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(b.size()); ++i) {
    b.rewards(i) = n(rng);
    b.values(i) = n(rng);
    b.dones[static_cast<std::size_t>(i)] = done(rng) ? 1 : 0;
  }
  for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(envs); ++e) b.last_values(e) = n(rng);
  return b;
}

bool same_bits(const PolicyParams& a, const PolicyParams& b) {
  const auto x = to_flat(a), y = to_flat(b);
  return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
}

Minibatch perturbed_minibatch(const PolicyParams& p, std::uint64_t seed, Eigen::Index b) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Minibatch mb{Eigen::MatrixXd(4, b), Eigen::MatrixXd(2, b), Eigen::RowVectorXd(b), Eigen::RowVectorXd(b),
               Eigen::RowVectorXd(b)};
  for (Eigen::Index i = 0; i < b; ++i) {
    mb.obs.col(i) << (n(rng) > 0), (n(rng) > 0), std::abs(n(rng)) / 3, n(rng) / 4;
    mb.actions.col(i) << n(rng), n(rng);
    mb.advantages(i) = n(rng);
    mb.returns(i) = 5.0 * n(rng);
  }
  const ForwardCache c = forward_batch(p, mb.obs);
  // old log-probs a little off the current ones so ratios straddle 1
  mb.old_log_probs = log_prob_batch(c.mean, p.log_std, mb.actions);
  for (Eigen::Index i = 0; i < b; ++i) mb.old_log_probs(i) += 0.3 * n(rng);
  return mb;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  PolicyParams p = PolicyParams::zeros();
  Gradients g = PolicyParams::zeros();
  g.actor.b3 << 2.0, -0.5;
  g.critic.b3(0) = 1e-3;
  Adam opt(0.01, 1e-5, p.size());
  opt.step(p, g);
  EXPECT_NEAR(p.actor.b3(0), -0.01 * 2.0 / (2.0 + 1e-5), 1e-15);
  EXPECT_NEAR(p.actor.b3(1), 0.01 * 0.5 / (0.5 + 1e-5), 1e-15);
  EXPECT_NEAR(p.critic.b3(0), -0.01 * 1e-3 / (1e-3 + 1e-5), 1e-15);
  EXPECT_EQ(p.actor.w1.squaredNorm(), 0.0);
  EXPECT_EQ(opt.state().step, 1.0);
}

TEST(Gae, SingleTerminalStep) {
  RolloutBuffer b;
  b.allocate(1, 1);
  b.rewards(0) = 1.0;
  b.dones[0] = 1;
  b.last_values(0) = 123.0;  // must be ignored after a terminal step
  compute_gae(b, 0.99, 0.95);
  EXPECT_EQ(b.advantages(0), 1.0);
  EXPECT_EQ(b.returns(0), 1.0);
}

TEST(Gae, LambdaOneMatchesDiscountedReturn) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100; ++k) {
    RolloutBuffer b = random_buffer(rng, 3, 40);
    const double gamma = 0.9 + 0.1 * (k % 10) / 10.0;
    compute_gae(b, gamma, 1.0);
    for (std::size_t e = 0; e < 3; ++e) {
      for (std::size_t t = 0; t < 40; ++t) {
        // brute force: discounted sum up to the episode end, else bootstrap
        double g = 0.0, disc = 1.0;
        std::size_t s = t;
        for (;; ++s) {
          const std::size_t i = s * 3 + e;
          g += disc * b.rewards(static_cast<Eigen::Index>(i));
          disc *= gamma;
          if (b.dones[i]) break;
          if (s + 1 == 40) {
            g += disc * b.last_values(static_cast<Eigen::Index>(e));
            break;
          }
        }
        EXPECT_NEAR(b.returns(static_cast<Eigen::Index>(t * 3 + e)), g, 1e-10);
      }
    }
  }
}

TEST(Gae, LambdaZeroIsTdError) {
  std::mt19937_64 rng(2);
  RolloutBuffer b = random_buffer(rng, 4, 25);
  compute_gae(b, 0.97, 0.0);
  for (std::size_t t = 0; t < 25; ++t)
    for (std::size_t e = 0; e < 4; ++e) {
      const auto i = static_cast<Eigen::Index>(t * 4 + e);
      const double next = t + 1 < 25 ? b.values(i + 4) : b.last_values(static_cast<Eigen::Index>(e));
      const double nonterm = b.dones[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
      EXPECT_NEAR(b.advantages(i), b.rewards(i) + 0.97 * next * nonterm - b.values(i), 1e-12);
    }
}

TEST(NormalizeAdvantages, ZeroMeanUnitStd) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(250.0, 4000.0);
  Eigen::RowVectorXd a(15360);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = n(rng);
  const Eigen::RowVectorXd z = normalize_advantages(a);
  EXPECT_LT(std::abs(z.mean()), 1e-10);
  EXPECT_NEAR(std::sqrt(z.squaredNorm() / z.size()), 1.0, 1e-10);
  const Eigen::RowVectorXd flat = normalize_advantages(Eigen::RowVectorXd::Constant(5, 3.0));
  EXPECT_EQ(flat, Eigen::RowVectorXd::Zero(5));
}

TEST(ClippedSurrogate, Arithmetic) {
  EXPECT_NEAR(clipped_surrogate(1.5, 2.0, 0.2), 2.4, 1e-15);
  EXPECT_NEAR(clipped_surrogate(0.5, 2.0, 0.2), 1.0, 1e-15);
  EXPECT_NEAR(clipped_surrogate(0.5, -2.0, 0.2), -1.6, 1e-15);
  EXPECT_NEAR(clipped_surrogate(1.5, -2.0, 0.2), -3.0, 1e-15);
  EXPECT_EQ(clipped_surrogate(1.0, 0.7, 0.2), 0.7);
}

TEST(PpoLoss, RatioOneGivesMeanAdvantage) {
  const PolicyParams p = init_policy(4);
  Minibatch mb = perturbed_minibatch(p, 5, 64);
  const ForwardCache c = forward_batch(p, mb.obs);
  mb.old_log_probs = log_prob_batch(c.mean, p.log_std, mb.actions);
  mb.advantages = normalize_advantages(mb.advantages);
  PpoConfig cfg;
  const PpoLoss l = ppo_minibatch_loss(p, mb, cfg, false);
  EXPECT_LT(std::abs(l.policy), 1e-12);
  EXPECT_EQ(l.clip_fraction, 0.0);
  EXPECT_LT(std::abs(l.approx_kl), 1e-15);
}

TEST(PpoLoss, GradientMatchesFiniteDifferences) {
  PpoConfig cfg;
  cfg.entropy_coef = 0.01;
  std::mt19937_64 pick(6);
  for (int k = 0; k < 5; ++k) {
    const PolicyParams p = init_policy(30 + k);
    const Minibatch mb = perturbed_minibatch(p, 40 + k, 32);
    const auto g = to_flat(*ppo_minibatch_loss(p, mb, cfg, true).grad);
    auto flat = to_flat(p);
    std::uniform_int_distribution<std::size_t> idx(0, flat.size() - 1);
    for (int j = 0; j < 300; ++j) {
      const std::size_t i = idx(pick);
      const double orig = flat[i];
      flat[i] = orig + 1e-5;
      const double up = ppo_minibatch_loss(from_flat(flat), mb, cfg, false).total;
      flat[i] = orig - 1e-5;
      const double dn = ppo_minibatch_loss(from_flat(flat), mb, cfg, false).total;
      flat[i] = orig;
      const double fd = (up - dn) / 2e-5;
      EXPECT_LT(std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}), 1e-4) << i;
    }
  }
}

// With an unbounded clip range the policy part of the gradient is that of
// -mean(ratio * A), the vanilla importance-weighted surrogate.
TEST(PpoLoss, UnboundedClipIsVanillaSurrogate) {
  PpoConfig cfg;
  cfg.clip_epsilon = std::numeric_limits<double>::infinity();
  cfg.value_coef = 0.0;
  const PolicyParams p = init_policy(50);
  const Minibatch mb = perturbed_minibatch(p, 51, 48);
  const auto g = to_flat(*ppo_minibatch_loss(p, mb, cfg, true).grad);
  const auto vanilla = [&](const PolicyParams& q) {
    const ForwardCache c = forward_batch(q, mb.obs);
    const Eigen::RowVectorXd r = (log_prob_batch(c.mean, q.log_std, mb.actions) - mb.old_log_probs).array().exp();
    return -(r.array() * mb.advantages.array()).mean();
  };
  auto flat = to_flat(p);
  double worst = 0.0;
  for (std::size_t i = 0; i < flat.size(); i += 7) {
    const double orig = flat[i];
    flat[i] = orig + 1e-5;
    const double up = vanilla(from_flat(flat));
    flat[i] = orig - 1e-5;
    const double dn = vanilla(from_flat(flat));
    flat[i] = orig;
    const double fd = (up - dn) / 2e-5;
    worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(PpoLoss, NonFiniteLossThrows) {
  const PolicyParams p = init_policy(1);
  Minibatch mb = perturbed_minibatch(p, 2, 8);
  mb.returns(3) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(ppo_minibatch_loss(p, mb, PpoConfig{}, true), NonFiniteLoss);
}

TEST(CollectRollouts, InertMarketGivesZeroRewards) {
  EnvConfig env;
  env.curve.alpha = 60.0;  // fill probability ~ e^-60 anywhere in the action range
  PolicyParams p = init_policy(2, std::log(1e-8));
  PpoConfig cfg = tiny_config();
  auto envs = make_envs(env, cfg.n_envs);
  const RolloutBuffer b = collect_rollouts(p, envs, cfg, 9);
  EXPECT_EQ(b.rewards.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(b.completed_returns.size(), cfg.n_envs);
}

TEST(CollectRollouts, DeterministicAndConsistent) {
  PpoConfig cfg = tiny_config();
  const PolicyParams p = init_policy(3);
  auto e1 = make_envs(EnvConfig{}, cfg.n_envs), e2 = make_envs(EnvConfig{}, cfg.n_envs);
  const RolloutBuffer a = collect_rollouts(p, e1, cfg, 77);
  const RolloutBuffer b = collect_rollouts(p, e2, cfg, 77);
  EXPECT_EQ(a.rewards, b.rewards);
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_EQ(a.log_probs, b.log_probs);
  EXPECT_EQ(a.obs, b.obs);
  ASSERT_EQ(a.completed_returns.size(), cfg.n_envs);
  double mean_return = 0.0;
  for (double r : a.completed_returns) mean_return += r;
  mean_return /= static_cast<double>(cfg.n_envs);
  EXPECT_NEAR(a.rewards.mean() * 30.0, mean_return, 1e-9 * std::max(1.0, std::abs(mean_return)));
  int dones = 0;
  for (auto d : a.dones) dones += d;
  EXPECT_EQ(dones, static_cast<int>(cfg.n_envs));
  // stored log-probs are those of the unclipped samples under the collecting policy
  const ForwardCache c = forward_batch(p, a.obs);
  EXPECT_LT((log_prob_batch(c.mean, p.log_std, a.actions) - a.log_probs).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((c.value - a.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CollectRollouts, AutoResetAcrossEpisodes) {
  PpoConfig cfg = tiny_config();
  cfg.rollout_horizon = 75;
  auto envs = make_envs(EnvConfig{}, cfg.n_envs);
  const RolloutBuffer b = collect_rollouts(init_policy(4), envs, cfg, 5);
  EXPECT_EQ(b.completed_returns.size(), 2 * cfg.n_envs);
  for (std::size_t e = 0; e < cfg.n_envs; ++e) {
    EXPECT_EQ(b.obs(2, static_cast<Eigen::Index>(30 * cfg.n_envs + e)), 0.0);  // time_frac after reset
    EXPECT_EQ(b.obs(3, static_cast<Eigen::Index>(60 * cfg.n_envs + e)), 0.0);  // inventory after reset
  }
}

TEST(PpoUpdate, LossDecreasesOnFrozenBuffer) {
  PpoConfig cfg = tiny_config();
  cfg.n_epochs = 4;
  PolicyParams p = init_policy(5);
  auto envs = make_envs(EnvConfig{}, cfg.n_envs);
  RolloutBuffer b = collect_rollouts(p, envs, cfg, 11);
  compute_gae(b, cfg.gamma, cfg.gae_lambda);
  std::vector<Eigen::Index> all(b.size());
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const Minibatch full = gather(b, normalize_advantages(b.advantages), all);
  const double before = ppo_minibatch_loss(p, full, cfg, false).total;
  Adam opt(cfg.learning_rate, cfg.adam_eps, p.size());
  const TrainLogEntry e = ppo_update(p, opt, b, cfg, 12);
  const double after = ppo_minibatch_loss(p, full, cfg, false).total;
  EXPECT_LT(after, before);
  EXPECT_GE(e.clip_fraction, 0.0);
  EXPECT_LE(e.clip_fraction, 1.0);
  EXPECT_GE(e.approx_kl, -1e-12);
  EXPECT_EQ(opt.state().step, static_cast<double>(cfg.n_epochs * 4));
}

TEST(ClipGradNorm, ScalesToBound) {
  Gradients g = PolicyParams::zeros();
  g.actor.b3 << 3.0, 4.0;
  clip_grad_norm(g, 0.5);
  EXPECT_NEAR(std::sqrt(squared_norm(g)), 0.5, 1e-6);
  Gradients small = PolicyParams::zeros();
  small.critic.b3(0) = 0.1;
  clip_grad_norm(small, 0.5);
  EXPECT_EQ(small.critic.b3(0), 0.1);
}

TEST(Train, DeterministicLogAndParams) {
  const PpoConfig cfg = tiny_config();
  const TrainResult a = train(cfg, EnvConfig{});
  const TrainResult b = train(cfg, EnvConfig{});
  ASSERT_EQ(a.log.size(), 4u);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].update, i);
    EXPECT_EQ(a.log[i].mean_return, b.log[i].mean_return);
    EXPECT_EQ(a.log[i].policy_loss, b.log[i].policy_loss);
    EXPECT_EQ(a.log[i].n_episodes, cfg.n_envs);
  }
  EXPECT_TRUE(same_bits(a.params, b.params));
  PpoConfig other = cfg;
  other.seed = 22;
  EXPECT_FALSE(same_bits(train(other, EnvConfig{}).params, a.params));
}

TEST(Train, ResumeFromCheckpointEqualsUninterrupted) {
  const PpoConfig cfg = tiny_config();
  const TrainResult full = train(cfg, EnvConfig{});

  PpoConfig first = cfg;
  first.total_updates = 2;
  const TrainResult half = train(first, EnvConfig{});
  const auto dir = std::filesystem::temp_directory_path() / "rfqmm_resume_ckpt";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir, Checkpoint{half.params, cfg.seed, 2, half.optimizer});

  TrainOptions opts;
  opts.resume = load_checkpoint(dir);
  const TrainResult rest = train(cfg, EnvConfig{}, opts);
  ASSERT_EQ(rest.log.size(), 2u);
  EXPECT_EQ(rest.log[0].update, 2u);
  EXPECT_EQ(rest.log[1].mean_return, full.log[3].mean_return);
  EXPECT_TRUE(same_bits(rest.params, full.params));
}

TEST(Train, CallbackSeesEveryUpdate) {
  std::vector<std::size_t> seen;
  TrainOptions opts;
  opts.on_update = [&](const TrainLogEntry& e, const PolicyParams& p, const Adam& a) {
    seen.push_back(e.update);
    EXPECT_TRUE(all_finite(p));
    EXPECT_GT(a.state().step, 0.0);
  };
  train(tiny_config(), EnvConfig{}, opts);
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(TrailingMeanReturn, LastDecile) {
  TrainLog log;
  for (std::size_t i = 0; i < 20; ++i) log.push_back(TrainLogEntry{i, static_cast<double>(i)});
  EXPECT_DOUBLE_EQ(trailing_mean_return(log, 0.1), 18.5);
  EXPECT_EQ(trailing_mean_return({}, 0.1), 0.0);
}

TEST(PpoConfig, Validation) {
  PpoConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PpoConfig{};
  c.minibatch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PpoConfig{};
  c.clip_epsilon = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}
