#include "mbdp/agent/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>

#include "mbdp/agent/evaluate.hpp"
#include "mbdp/csv.hpp"
#include "mbdp/nn/checkpoint.hpp"
#include "mbdp/rollout.hpp"

namespace mbdp {

namespace {

namespace fs = std::filesystem;

// stream tags for seed derivation
enum : std::uint64_t {
  kSeedAgent = 1,
  kSeedEnsemble = 2,
  kSeedReset = 3,
  kSeedExplore = 4,
  kSeedAct = 5,
  kSeedSplit = 6,
  kSeedEnsTrain = 7,
  kSeedRollout = 8,
  kSeedPolicy = 9,
  kSeedEval = 10,
  kSeedLipschitz = 11,
};

struct Interactor {
  envs::ContinuousEnv& env;
  ReplayBuffer& d_env;
  RngStream reset_rng;
  long steps = 0;
  int blowups = 0;

  void ensure_ready() {
    if (env.episode_done()) env.reset(reset_rng);
  }

  void run(const PolicyFn& policy, RngStream& act_rng, int n) {
    for (int i = 0; i < n; ++i) {
      ensure_ready();
      const Vector a = policy(env.state(), act_rng);
      try {
        d_env.push(env.step(a));
      } catch (const envs::PhysicsBlowup&) {
        ++blowups;
        env.reset(reset_rng);
        continue;
      }
      ++steps;
    }
  }
};

std::vector<Transition> gather_validation(const ReplayBuffer& buf,
                                          const std::vector<std::size_t>& idx) {
  std::vector<Transition> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(buf.at(i));
  return out;
}

}  // namespace

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "epoch",          "env_steps",        "env_blowups",      "eval_return_mean",
      "eval_return_std", "eval_return_disc", "eval_blowups",     "d_env_size",
      "d_model_size",   "generated_samples", "retained_samples", "retained_fraction",
      "threshold_mean", "truncated_rollouts", "retained_models", "bounds_valid",
      "eps_alpha",      "eps_m",            "lipschitz_k",      "k_source",
      "d_alpha_beta",   "v_env_disc",       "v_alpha_model",    "eps_k",
      "eta"};
  return cols;
}

std::vector<std::string> metrics_row_cells(const EpochRow& r) {
  return {std::to_string(r.epoch),
          std::to_string(r.env_steps),
          std::to_string(r.env_blowups),
          fmt_double(r.eval_mean),
          fmt_double(r.eval_std),
          fmt_double(r.eval_disc),
          std::to_string(r.eval_blowups),
          std::to_string(r.d_env_size),
          std::to_string(r.d_model_size),
          std::to_string(r.generated_samples),
          std::to_string(r.retained_samples),
          fmt_double(r.retained_fraction),
          fmt_double(r.threshold_mean),
          std::to_string(r.truncated_rollouts),
          std::to_string(r.retained_models),
          std::to_string(r.bounds_valid ? 1 : 0),
          fmt_double(r.bounds.eps_alpha),
          fmt_double(r.bounds.eps_m),
          fmt_double(r.bounds.lipschitz_k),
          r.bounds.k_estimated ? "estimated" : "supplied",
          fmt_double(r.bounds.d_alpha_beta),
          fmt_double(r.bounds.v_env),
          fmt_double(r.bounds.v_alpha_model),
          fmt_double(r.bounds.eps_k),
          fmt_double(r.bounds.eta)};
}

void save_checkpoint(const SacAgent& agent, const EnsembleState& ens, const std::string& dir) {
  fs::create_directories(dir);
  nn::save_mlp(agent.actor(), dir + "/actor");
  nn::save_mlp(agent.critic1(), dir + "/critic1");
  nn::save_mlp(agent.critic2(), dir + "/critic2");
  char name[32];
  for (std::size_t i = 0; i < ens.members.size(); ++i) {
    std::snprintf(name, sizeof(name), "/member_%02zu", i);
    nn::save_mlp(ens.members[i].net, dir + name);
  }
}

SacAgent load_agent_checkpoint(const TrainConfig& cfg, const std::string& dir) {
  const auto env = envs::make_env(cfg.env_name);
  SacConfig scfg{cfg.policy_hidden, cfg.actor_lr,        cfg.critic_lr,
                 cfg.gamma,         cfg.tau,             cfg.entropy_weight};
  SacAgent agent(env->state_dim(), env->action_box(), scfg, cfg.seed);
  agent.load_nets(nn::load_mlp(dir + "/actor"), nn::load_mlp(dir + "/critic1"),
                  nn::load_mlp(dir + "/critic2"));
  return agent;
}

TrainResult mbdp_train(const TrainConfig& cfg, const std::string& out_dir, std::ostream* log) {
  {
    const auto errors = cfg.validate();
    if (!errors.empty()) {
      std::string msg = "invalid config:";
      for (const auto& e : errors) msg += "\n  " + e;
      throw std::invalid_argument(msg);
    }
  }
  const std::uint64_t root = cfg.seed;
  auto env = envs::make_env(cfg.env_name, {cfg.c_mass, cfg.c_friction});
  auto eval_env = env->clone();
  const double reward_sup = env->reward_sup();

  SacConfig scfg{cfg.policy_hidden, cfg.actor_lr,        cfg.critic_lr,
                 cfg.gamma,         cfg.tau,             cfg.entropy_weight};
  TrainResult result;
  result.agent.emplace(env->state_dim(), env->action_box(), scfg, derive_seed(root, kSeedAgent));
  SacAgent& agent = *result.agent;
  EnsembleState ens = make_ensemble(cfg.ensemble_size, env->state_dim(), env->action_dim(),
                                    cfg.model_hidden, cfg.model_lr, derive_seed(root, kSeedEnsemble));

  ReplayBuffer d_env(cfg.env_capacity);
  ReplayBuffer d_model(cfg.model_capacity);

  std::unique_ptr<CsvWriter> metrics_csv, ensemble_csv, rollout_csv, timing_csv;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    metrics_csv = std::make_unique<CsvWriter>(out_dir + "/metrics.csv", metrics_columns());
    ensemble_csv = std::make_unique<CsvWriter>(
        out_dir + "/ensemble.csv",
        std::vector<std::string>{"epoch", "member", "train_nll", "validation_nll", "bias",
                                 "retained"});
    rollout_csv = std::make_unique<CsvWriter>(
        out_dir + "/rollout.csv",
        std::vector<std::string>{"epoch", "groups", "pre_size", "post_size", "mean_threshold",
                                 "retained_fraction", "truncated_rollouts"});
    timing_csv = std::make_unique<CsvWriter>(out_dir + "/timing.csv",
                                             std::vector<std::string>{"epoch", "wall_time_s"});
  }

  Interactor interactor{*env, d_env, RngStream(derive_seed(root, kSeedReset))};
  {
    // Seed the buffers with uniform-random exploration before epoch 1.
    RngStream explore_rng(derive_seed(root, kSeedExplore));
    const envs::ActionBox& box = env->action_box();
    PolicyFn explore = [&box](const Vector&, RngStream& rng) {
      Vector a(box.low.size());
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.uniform(box.low(i), box.high(i));
      return a;
    };
    interactor.run(explore, explore_rng, cfg.init_explore_steps);
  }
  RngStream act_rng(derive_seed(root, kSeedAct));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRow row;
    row.epoch = epoch;
    std::string stage = "env-interaction";
    const int blowups_before = interactor.blowups;
    try {
      interactor.run(agent.policy(/*stochastic=*/true), act_rng, cfg.env_steps_per_epoch);
      row.env_blowups = interactor.blowups - blowups_before;

      double v_alpha_model = 0.0;
      bool have_rollouts = false;
      double threshold_sum = 0.0;
      long threshold_count = 0;
      for (int iter = 0; iter < cfg.inner_iters; ++iter) {
        if (d_env.size() < static_cast<std::size_t>(std::max(cfg.min_model_data, 2))) break;

        stage = "ensemble-training";
        const DataSplit split = DataSplit::make(d_env.size(), cfg.validation_fraction,
                                                derive_seed(root, kSeedSplit, epoch, iter));
        const auto stats =
            train_ensemble(ens, d_env, split, cfg.model_train_steps, cfg.model_batch,
                           derive_seed(root, kSeedEnsTrain, epoch, iter), cfg.workers,
                           cfg.min_model_data);
        stage = "model-bias";
        const auto validation = gather_validation(d_env, split.validation);
        for (auto& member : ens.members) compute_bias(member, validation);
        stage = "model-dropout";
        model_dropout(ens, cfg.beta);
        if (iter == cfg.inner_iters - 1) {
          for (std::size_t mi = 0; mi < ens.members.size(); ++mi) {
            const bool retained =
                std::find(ens.retained.begin(), ens.retained.end(), static_cast<int>(mi)) !=
                ens.retained.end();
            result.member_rows.push_back({epoch, ens.members[mi].id, stats[mi].train_nll,
                                          stats[mi].validation_nll, ens.members[mi].bias,
                                          retained});
          }
        }

        stage = "rollouts";
        const int n_starts = static_cast<int>(
            std::min<std::size_t>(static_cast<std::size_t>(cfg.n_starts), d_env.size()));
        const RolloutBatch raw =
            generate_rollouts(ens, agent.policy(/*stochastic=*/true), d_env, *env, n_starts,
                              cfg.k_per_start, cfg.rollout_horizon,
                              derive_seed(root, kSeedRollout, epoch, iter), PredictMode::kSample,
                              cfg.workers);
        const RolloutBatch filtered = rollout_dropout(
            raw, cfg.alpha, cfg.min_group_size,
            cfg.per_trajectory ? DropoutGranularity::kPerTrajectory
                               : DropoutGranularity::kPerSample,
            cfg.gamma);
        stage = "model-buffer";
        for (const RolloutSample& s : filtered.samples) d_model.push(s.transition);
        row.generated_samples += static_cast<long>(raw.size());
        row.retained_samples += static_cast<long>(filtered.size());
        row.truncated_rollouts += filtered.truncated_rollouts;
        row.rollout_groups += filtered.n_groups;
        for (double th : filtered.thresholds) {
          if (std::isfinite(th)) {
            threshold_sum += th;
            ++threshold_count;
          }
        }
        if (!filtered.samples.empty()) {
          v_alpha_model = dropout_return_estimate(filtered, cfg.gamma);
          have_rollouts = true;
        }
      }
      row.threshold_mean = threshold_count > 0 ? threshold_sum / threshold_count : 0.0;
      row.retained_fraction =
          row.generated_samples > 0
              ? static_cast<double>(row.retained_samples) / row.generated_samples
              : 0.0;
      row.retained_models = static_cast<int>(ens.retained_count());

      stage = "policy-update";
      const long n_updates =
          static_cast<long>(cfg.policy_updates_per_env_step) * cfg.env_steps_per_epoch;
      if (n_updates > 0 && d_model.size() >= static_cast<std::size_t>(cfg.policy_batch))
        agent.policy_update(d_model, static_cast<int>(n_updates), cfg.policy_batch,
                            derive_seed(root, kSeedPolicy, epoch));

      stage = "evaluation";
      const EvalResult eval = evaluate_policy(agent, *eval_env, cfg.eval_episodes, cfg.gamma,
                                              derive_seed(root, kSeedEval, epoch), cfg.workers);
      row.eval_mean = eval.mean;
      row.eval_std = eval.stddev;
      row.eval_disc = eval.disc_mean;
      row.eval_blowups = eval.blowups;

      stage = "bounds";
      const DropoutConfig dcfg = cfg.dropout(reward_sup);
      row.bounds.epoch = epoch;
      row.bounds.eps_alpha = risk::dropout_gap_bound(dcfg);
      const bool biases_fresh =
          std::none_of(ens.members.begin(), ens.members.end(),
                       [](const DynamicsModel& m) { return m.bias_stale; });
      if (biases_fresh && have_rollouts) {
        row.bounds.eps_m = risk::mean_model_bias(ens);
        if (cfg.lipschitz_k > 0.0) {
          row.bounds.lipschitz_k = cfg.lipschitz_k;
          row.bounds.k_estimated = false;
        } else {
          const std::size_t n_states = std::min<std::size_t>(d_env.size(), 256);
          const auto sampled =
              d_env.sample(n_states, derive_seed(root, kSeedLipschitz, epoch));
          std::vector<Vector> states;
          states.reserve(sampled.size());
          for (const Transition& t : sampled) states.push_back(t.state);
          row.bounds.lipschitz_k = risk::estimate_lipschitz(
              [&agent](const Vector& s) { return agent.state_value(s); }, states,
              cfg.lipschitz_pairs, derive_seed(root, kSeedLipschitz, epoch, 1));
          row.bounds.k_estimated = true;
        }
        row.bounds.d_alpha_beta =
            risk::discrepancy_bound(dcfg, row.bounds.eps_m, row.bounds.lipschitz_k);
        row.bounds.v_env = eval.disc_mean;
        row.bounds.v_alpha_model = v_alpha_model;
        const risk::Residual res =
            risk::update_residual(eval.disc_mean, v_alpha_model, row.bounds.d_alpha_beta, dcfg);
        row.bounds.eps_k = res.eps_k;
        row.bounds.eta = res.eta;
        row.bounds_valid = true;
      }
    } catch (const std::exception& e) {
      // Flush what this epoch produced before surfacing the failure.
      row.env_steps = interactor.steps;
      row.d_env_size = d_env.size();
      row.d_model_size = d_model.size();
      if (metrics_csv) metrics_csv->write_row(metrics_row_cells(row));
      throw TrainError(epoch, stage, e.what());
    }

    row.env_steps = interactor.steps;
    row.d_env_size = d_env.size();
    row.d_model_size = d_model.size();
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.rows.push_back(row);

    if (metrics_csv) {
      metrics_csv->write_row(metrics_row_cells(row));
      for (const MemberRow& mr : result.member_rows) {
        if (mr.epoch != epoch) continue;
        ensemble_csv->write_row({std::to_string(mr.epoch), std::to_string(mr.member),
                                 fmt_double(mr.train_nll), fmt_double(mr.validation_nll),
                                 fmt_double(mr.bias), std::to_string(mr.retained ? 1 : 0)});
      }
      rollout_csv->write_row({std::to_string(epoch), std::to_string(row.rollout_groups),
                              std::to_string(row.generated_samples),
                              std::to_string(row.retained_samples), fmt_double(row.threshold_mean),
                              fmt_double(row.retained_fraction),
                              std::to_string(row.truncated_rollouts)});
      timing_csv->write_row({std::to_string(epoch), fmt_double(row.wall_time_s)});
    }
    if (log) {
      (*log) << "epoch " << epoch << "/" << cfg.epochs << "  steps=" << row.env_steps
             << "  eval=" << row.eval_mean << " +- " << row.eval_std
             << "  d_model=" << row.d_model_size << "  eps_m=" << row.bounds.eps_m
             << "  eta=" << row.bounds.eta << "  (" << row.wall_time_s << " s)\n";
      log->flush();
    }
    if (!out_dir.empty() && cfg.checkpoint_interval > 0 && epoch % cfg.checkpoint_interval == 0) {
      char dir[64];
      std::snprintf(dir, sizeof(dir), "/checkpoints/epoch_%04d", epoch);
      save_checkpoint(agent, ens, out_dir + dir);
    }
  }

  result.total_env_steps = interactor.steps;
  if (!out_dir.empty()) save_checkpoint(agent, ens, out_dir + "/checkpoints/final");
  return result;
}

}  // namespace mbdp
