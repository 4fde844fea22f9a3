#pragma once

// Actor-critic network with two separate tanh trunks (4 -> 64 -> 64), a
// linear mean head for a diagonal Gaussian over the two spread actions, a
// state-independent log-std, and a scalar value head. Gradients are derived
// by hand for this fixed architecture.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rfqmm/errors.hpp"
#include "rfqmm/random.hpp"
#include "rfqmm/rfq_env.hpp"

namespace rfqmm {

inline constexpr int kHidden = 64;
inline constexpr std::string_view kArchitecture =
    "actor-critic/separate-trunks/obs4-tanh64-tanh64/mean2+logstd2/value1";

struct Mlp {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;

  static Mlp zeros(int in, int hidden, int out) {
    return {Eigen::MatrixXd::Zero(hidden, in), Eigen::MatrixXd::Zero(hidden, hidden),
            Eigen::MatrixXd::Zero(out, hidden), Eigen::VectorXd::Zero(hidden),
            Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(out)};
  }
};

struct PolicyParams {
  Mlp actor;
  Eigen::VectorXd log_std;
  Mlp critic;

  static PolicyParams zeros() {
    return {Mlp::zeros(kObsDim, kHidden, kActDim), Eigen::VectorXd::Zero(kActDim), Mlp::zeros(kObsDim, kHidden, 1)};
  }

  /// Visits every tensor in checkpoint order.
  template <class Self, class F>
  static void visit(Self& p, F&& f) {
    f("actor.w1", p.actor.w1);
    f("actor.b1", p.actor.b1);
    f("actor.w2", p.actor.w2);
    f("actor.b2", p.actor.b2);
    f("actor.w3", p.actor.w3);
    f("actor.b3", p.actor.b3);
    f("log_std", p.log_std);
    f("critic.w1", p.critic.w1);
    f("critic.b1", p.critic.b1);
    f("critic.w2", p.critic.w2);
    f("critic.b2", p.critic.b2);
    f("critic.w3", p.critic.w3);
    f("critic.b3", p.critic.b3);
  }

  template <class F>
  void for_each(F&& f) { visit(*this, f); }
  template <class F>
  void for_each(F&& f) const { visit(*this, f); }

  std::size_t size() const {
    std::size_t n = 0;
    for_each([&](std::string_view, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }
};

/// Same shapes as PolicyParams.
using Gradients = PolicyParams;

/// Row-major within each tensor, tensors in PolicyParams::visit order.
inline std::vector<double> to_flat(const PolicyParams& p) {
  std::vector<double> out;
  out.reserve(p.size());
  p.for_each([&](std::string_view, const auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) out.push_back(t(r, c));
  });
  return out;
}

inline PolicyParams from_flat(std::span<const double> flat) {
  PolicyParams p = PolicyParams::zeros();
  if (flat.size() != p.size())
    throw ShapeMismatch("expected " + std::to_string(p.size()) + " parameters, got " + std::to_string(flat.size()));
  std::size_t k = 0;
  p.for_each([&](std::string_view, auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = flat[k++];
  });
  return p;
}

inline double squared_norm(const Gradients& g) {
  double s = 0.0;
  g.for_each([&](std::string_view, const auto& t) { s += t.squaredNorm(); });
  return s;
}

inline bool all_finite(const PolicyParams& p) {
  bool ok = true;
  p.for_each([&](std::string_view, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

/// Orthogonal matrix scaled by gain (semi-orthogonal when not square).
inline Eigen::MatrixXd orthogonal_init(Eigen::Index rows, Eigen::Index cols, double gain, Rng& rng) {
  std::normal_distribution<double> n01;
  const bool tall = rows >= cols;
  Eigen::MatrixXd a(tall ? rows : cols, tall ? cols : rows);
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, c) = n01(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  // Sign fix so the result is Haar-distributed.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < q.cols(); ++c)
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  return gain * (tall ? q : Eigen::MatrixXd(q.transpose()));
}

inline PolicyParams init_policy(std::uint64_t seed, double init_log_std = 0.0) {
  Rng rng = make_rng(seed, Stream::kInit);
  PolicyParams p = PolicyParams::zeros();
  const double hidden_gain = std::sqrt(2.0);
  p.actor.w1 = orthogonal_init(kHidden, kObsDim, hidden_gain, rng);
  p.actor.w2 = orthogonal_init(kHidden, kHidden, hidden_gain, rng);
  p.actor.w3 = orthogonal_init(kActDim, kHidden, 0.01, rng);
  p.critic.w1 = orthogonal_init(kHidden, kObsDim, hidden_gain, rng);
  p.critic.w2 = orthogonal_init(kHidden, kHidden, hidden_gain, rng);
  p.critic.w3 = orthogonal_init(1, kHidden, 1.0, rng);
  p.log_std.setConstant(init_log_std);
  return p;
}

struct DistributionOut {
  Eigen::Vector2d mean;
  Eigen::Vector2d log_std;
  double value = 0.0;
};

/// Activations kept for the backward pass. Columns are samples.
struct ForwardCache {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actor_h1, actor_h2, mean;
  Eigen::MatrixXd critic_h1, critic_h2;
  Eigen::RowVectorXd value;

  Eigen::Index batch() const { return obs.cols(); }
};

namespace detail {

// tanh through the vectorized exp; absolute error stays below 1e-13.
inline void tanh_inplace(Eigen::MatrixXd& h) {
  h = (1.0 - 2.0 / ((2.0 * h.array()).exp() + 1.0)).matrix();
}

inline void trunk_forward(const Mlp& m, const Eigen::MatrixXd& x, Eigen::MatrixXd& h1, Eigen::MatrixXd& h2,
                          Eigen::MatrixXd& out) {
  h1.noalias() = m.w1 * x;
  h1.colwise() += m.b1;
  tanh_inplace(h1);
  h2.noalias() = m.w2 * h1;
  h2.colwise() += m.b2;
  tanh_inplace(h2);
  out.noalias() = m.w3 * h2;
  out.colwise() += m.b3;
}

inline void trunk_backward(const Mlp& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& h1,
                           const Eigen::MatrixXd& h2, const Eigen::MatrixXd& dout, Mlp& g) {
  g.w3.noalias() = dout * h2.transpose();
  g.b3 = dout.rowwise().sum();
  Eigen::MatrixXd dh2 = m.w3.transpose() * dout;
  dh2.array() *= 1.0 - h2.array().square();
  g.w2.noalias() = dh2 * h1.transpose();
  g.b2 = dh2.rowwise().sum();
  Eigen::MatrixXd dh1 = m.w2.transpose() * dh2;
  dh1.array() *= 1.0 - h1.array().square();
  g.w1.noalias() = dh1 * x.transpose();
  g.b1 = dh1.rowwise().sum();
}

}  // namespace detail

inline ForwardCache forward_batch(const PolicyParams& p, const Eigen::MatrixXd& obs) {
  ForwardCache c;
  c.obs = obs;
  detail::trunk_forward(p.actor, obs, c.actor_h1, c.actor_h2, c.mean);
  Eigen::MatrixXd v;
  detail::trunk_forward(p.critic, obs, c.critic_h1, c.critic_h2, v);
  c.value = v.row(0);
  return c;
}

inline Eigen::Vector4d to_vector(const Observation& o) {
  const auto a = o.as_array();
  return Eigen::Vector4d(a[0], a[1], a[2], a[3]);
}

inline DistributionOut forward(const PolicyParams& p, const Eigen::Vector4d& obs) {
  const ForwardCache c = forward_batch(p, Eigen::MatrixXd(obs));
  return {c.mean.col(0), p.log_std, c.value(0)};
}

inline DistributionOut forward(const PolicyParams& p, const Observation& obs) { return forward(p, to_vector(obs)); }

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)

struct LogProbEntropy {
  double log_prob = 0.0;
  double entropy = 0.0;
};

inline double gaussian_entropy(const Eigen::VectorXd& log_std) {
  return static_cast<double>(log_std.size()) * (0.5 + kHalfLog2Pi) + log_std.sum();
}

inline LogProbEntropy log_prob_and_entropy(const DistributionOut& d, const Eigen::Vector2d& action) {
  double lp = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double z = (action(i) - d.mean(i)) * std::exp(-d.log_std(i));
    lp += -0.5 * z * z - d.log_std(i) - kHalfLog2Pi;
  }
  return {lp, gaussian_entropy(d.log_std)};
}

/// Per-column log-density of actions under N(mean, diag(exp(log_std))^2).
inline Eigen::RowVectorXd log_prob_batch(const Eigen::MatrixXd& mean, const Eigen::VectorXd& log_std,
                                         const Eigen::MatrixXd& actions) {
  const Eigen::ArrayXd inv_std = (-log_std.array()).exp();
  const Eigen::ArrayXXd z = (actions - mean).array().colwise() * inv_std;
  const double offset = log_std.sum() + static_cast<double>(log_std.size()) * kHalfLog2Pi;
  return (-0.5 * z.square().colwise().sum() - offset).matrix();
}

/// Upstream gradients of a scalar loss with respect to the network outputs.
struct OutputGradients {
  Eigen::MatrixXd dmean;      // kActDim x B
  Eigen::VectorXd dlog_std;   // kActDim
  Eigen::RowVectorXd dvalue;  // 1 x B
};

/// Chain rule from output gradients back to every parameter.
inline Gradients backward(const PolicyParams& p, const ForwardCache& c, const OutputGradients& up) {
  Gradients g = PolicyParams::zeros();
  detail::trunk_backward(p.actor, c.obs, c.actor_h1, c.actor_h2, up.dmean, g.actor);
  detail::trunk_backward(p.critic, c.obs, c.critic_h1, c.critic_h2, Eigen::MatrixXd(up.dvalue), g.critic);
  g.log_std = up.dlog_std;
  return g;
}

/// Output gradients of sum_i coef_i * log pi(a_i | s_i).
inline void accumulate_log_prob_grad(const ForwardCache& c, const Eigen::VectorXd& log_std,
                                     const Eigen::MatrixXd& actions, const Eigen::RowVectorXd& coef,
                                     OutputGradients& up) {
  const Eigen::ArrayXd inv_var = (-2.0 * log_std.array()).exp();
  const Eigen::ArrayXXd diff = (actions - c.mean).array();
  up.dmean.array() += (diff.colwise() * inv_var).rowwise() * coef.array();
  const Eigen::ArrayXXd z2 = diff.square().colwise() * inv_var;
  up.dlog_std.array() += ((z2 - 1.0).rowwise() * coef.array()).rowwise().sum();
}

inline OutputGradients zero_output_gradients(Eigen::Index batch) {
  return {Eigen::MatrixXd::Zero(kActDim, batch), Eigen::VectorXd::Zero(kActDim), Eigen::RowVectorXd::Zero(batch)};
}

/// Weights of the generic scalar loss
///   L = sum_i [ log_prob * log pi(a_i|s_i) + value * 0.5 (V(s_i) - target_i)^2 ] + entropy * H.
struct LossWeights {
  double log_prob = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

inline double weighted_loss(const PolicyParams& p, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& actions,
                            const Eigen::RowVectorXd& targets, const LossWeights& w) {
  const ForwardCache c = forward_batch(p, obs);
  const double lp = log_prob_batch(c.mean, p.log_std, actions).sum();
  const double vl = 0.5 * (c.value - targets).squaredNorm();
  return w.log_prob * lp + w.value * vl + w.entropy * gaussian_entropy(p.log_std);
}

inline Gradients weighted_loss_gradient(const PolicyParams& p, const Eigen::MatrixXd& obs,
                                        const Eigen::MatrixXd& actions, const Eigen::RowVectorXd& targets,
                                        const LossWeights& w) {
  const ForwardCache c = forward_batch(p, obs);
  OutputGradients up = zero_output_gradients(c.batch());
  accumulate_log_prob_grad(c, p.log_std, actions, Eigen::RowVectorXd::Constant(c.batch(), w.log_prob), up);
  up.dvalue = w.value * (c.value - targets);
  up.dlog_std.array() += w.entropy;
  return backward(p, c, up);
}

/// Samples a ~ N(mean, std^2) per component from the caller's stream.
inline Eigen::Vector2d sample_action(const DistributionOut& d, Rng& rng) {
  std::normal_distribution<double> n01;
  Eigen::Vector2d a;
  for (int i = 0; i < 2; ++i) a(i) = d.mean(i) + std::exp(d.log_std(i)) * n01(rng);
  return a;
}

inline Action to_action(const Eigen::Vector2d& v) { return {v(0), v(1)}; }

}  // namespace rfqmm
