#pragma once

#include <cstdint>
#include <vector>

#include "mbdp/envs/env.hpp"
#include "mbdp/nn/adam.hpp"
#include "mbdp/nn/gaussian.hpp"
#include "mbdp/nn/mlp.hpp"
#include "mbdp/replay_buffer.hpp"
#include "mbdp/rollout.hpp"
#include "mbdp/types.hpp"

namespace mbdp {

struct SacConfig {
  std::vector<int> hidden = {64, 64};
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double gamma = 0.99;
  double tau = 5e-3;  // target-critic EMA coefficient
  double entropy_weight = 0.1;
};

/// Reparametrized squashed-Gaussian draw: u = mu + sigma * eps,
/// a = center + half .* tanh(u). log_prob is the density of the squashed
/// action, one entry per batch column.
struct SquashedSample {
  Matrix u;
  Matrix actions;
  Eigen::RowVectorXd log_prob;
};

SquashedSample squash_sample(const nn::GaussianSplit& g, const Matrix& eps,
                             const envs::ActionBox& box);

/// Mean squared error of critic(input) against targets; accumulates critic
/// parameter gradients into *grads when non-null. input stacks [s; a]
/// column-wise, targets is one value per column.
double critic_loss(const nn::Mlp& critic, const Matrix& input, const Eigen::RowVectorXd& targets,
                   nn::Mlp* grads);

/// Actor objective with fixed reparametrization noise:
///   mean_b [ entropy_weight * log pi(a_b | s_b) - min_k Q_k(s_b, a_b) ]
/// Gradients flow through the critics into the actions and through the
/// squashing into the actor; critic parameters are left untouched.
double actor_loss(const nn::Mlp& actor, const nn::Mlp& critic1, const nn::Mlp& critic2,
                  const Matrix& states, const Matrix& eps, const envs::ActionBox& box,
                  double entropy_weight, nn::Mlp* actor_grads);

/// Stochastic actor with twin critics and EMA target critics.
class SacAgent {
 public:
  SacAgent(int state_dim, const envs::ActionBox& box, const SacConfig& cfg, std::uint64_t seed);

  Vector act_stochastic(const Vector& state, RngStream& rng) const;
  Vector act_mean(const Vector& state) const;
  PolicyFn policy(bool stochastic) const;

  /// One gradient step on a minibatch: critic regression to the
  /// entropy-regularized bootstrap target, actor ascent on the min-critic
  /// value plus entropy, then the target EMA update.
  struct UpdateStats {
    double critic1_loss = 0.0;
    double critic2_loss = 0.0;
    double actor_loss = 0.0;
  };
  UpdateStats update_once(const std::vector<Transition>& batch, RngStream& rng);

  /// n_updates minibatch steps on d_model. Deterministic given the seed.
  UpdateStats policy_update(const ReplayBuffer& d_model, int n_updates, int batch_size,
                            std::uint64_t seed);

  /// min-critic value at the mean action; the value estimator handed to the
  /// Lipschitz probe.
  double state_value(const Vector& state) const;

  const nn::Mlp& actor() const { return actor_; }
  const nn::Mlp& critic1() const { return critic1_; }
  const nn::Mlp& critic2() const { return critic2_; }
  const nn::Mlp& target1() const { return target1_; }
  const nn::Mlp& target2() const { return target2_; }
  void load_nets(const nn::Mlp& actor, const nn::Mlp& critic1, const nn::Mlp& critic2);
  const SacConfig& config() const { return cfg_; }
  const envs::ActionBox& action_box() const { return box_; }

 private:
  SacConfig cfg_;
  envs::ActionBox box_;
  int state_dim_;
  int action_dim_;
  nn::Mlp actor_, critic1_, critic2_, target1_, target2_;
  nn::Adam actor_opt_, critic1_opt_, critic2_opt_;
};

}  // namespace mbdp
