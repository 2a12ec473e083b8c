#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mbdp/types.hpp"

namespace mbdp {

/// Full training configuration. Defaults are the desk-scale pendulum setup;
/// every key is documented in README.md with its unit. Keys map 1:1 onto
/// "[section] key = value" entries in the config file.
struct TrainConfig {
  // [run]
  std::string env_name = "pendulum";
  std::uint64_t seed = 1;
  int workers = 1;
  double c_mass = 1.0;      // training-env perturbation, [0.5, 1.5]
  double c_friction = 1.0;  // training-env perturbation, [0.5, 1.5]

  // [dropout]
  double alpha = 0.2;  // rollout-dropout ratio, [0, 1)
  double beta = 0.2;   // model-dropout ratio, [0, 1)

  // [train]
  int epochs = 60;
  int env_steps_per_epoch = 250;
  int init_explore_steps = 1000;  // uniform-random action steps before epoch 1
  int inner_iters = 1;            // model/rollout iterations per epoch
  int eval_episodes = 10;
  int checkpoint_interval = 10;  // epochs between checkpoints (0 = final only)

  // [agent]
  double gamma = 0.99;
  double entropy_weight = 0.1;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double tau = 5e-3;  // target-critic EMA coefficient per update
  int policy_batch = 128;
  int policy_updates_per_env_step = 4;
  std::vector<int> policy_hidden = {64, 64};

  // [ensemble]
  int ensemble_size = 5;
  std::vector<int> model_hidden = {64, 64};
  double model_lr = 1e-3;
  int model_batch = 256;
  int model_train_steps = 120;      // gradient steps per member per inner iter
  double validation_fraction = 0.2; // held-out share of D_env, shared by members
  int min_model_data = 250;         // minimum D_env size before ensemble training

  // [rollout]
  int n_starts = 256;
  int k_per_start = 8;
  int rollout_horizon = 3;
  int min_group_size = 5;       // groups smaller than this are kept whole
  bool per_trajectory = false;  // rank whole rollouts instead of single samples

  // [buffers]
  std::size_t env_capacity = 100000;
  std::size_t model_capacity = 100000;

  // [risk]
  double lipschitz_k = 0.0;  // 0 = estimate from critic value samples
  int lipschitz_pairs = 256;

  /// Range/consistency diagnostics, one message per offending field.
  /// Empty result means the config is valid.
  std::vector<std::string> validate() const;

  DropoutConfig dropout(double reward_sup) const {
    return DropoutConfig{alpha, beta, gamma, reward_sup};
  }
};

/// Parses "[section] key = value" files ('#' and ';' start comments) into
/// "section.key" -> value. Malformed lines raise with the line number.
std::map<std::string, std::string> parse_ini(const std::string& path);

/// Applies file values onto cfg. Unknown keys and unparsable values are
/// reported as diagnostics (cfg keeps its previous value for those).
std::vector<std::string> apply_config_file(TrainConfig& cfg, const std::string& path);

/// Round-trips a config into file form (used by the run manifest).
std::string config_to_ini(const TrainConfig& cfg);

std::vector<int> parse_int_list(const std::string& text);

}  // namespace mbdp
