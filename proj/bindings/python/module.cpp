#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mbdp/agent/evaluate.hpp"
#include "mbdp/agent/experiments.hpp"
#include "mbdp/agent/trainer.hpp"
#include "mbdp/envs/discrete_mdp.hpp"
#include "mbdp/envs/env.hpp"
#include "mbdp/replay_buffer.hpp"
#include "mbdp/risk/risk.hpp"
#include "mbdp/risk/verify.hpp"
#include "mbdp/rollout.hpp"

namespace py = pybind11;
using namespace mbdp;

namespace {

risk::ReturnDistribution dist_from_pairs(const std::vector<std::pair<double, double>>& pairs) {
  std::vector<risk::Atom> atoms;
  atoms.reserve(pairs.size());
  for (const auto& [v, p] : pairs) atoms.push_back({v, p});
  auto dist = risk::ReturnDistribution::from_pairs(std::move(atoms));
  dist.validate();
  return dist;
}

std::vector<std::pair<double, double>> dist_to_pairs(const risk::ReturnDistribution& dist) {
  std::vector<std::pair<double, double>> out;
  out.reserve(dist.atoms.size());
  for (const auto& a : dist.atoms) out.emplace_back(a.value, a.prob);
  return out;
}

py::dict row_to_dict(const EpochRow& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["env_steps"] = r.env_steps;
  d["eval_return_mean"] = r.eval_mean;
  d["eval_return_std"] = r.eval_std;
  d["eval_return_disc"] = r.eval_disc;
  d["d_env_size"] = r.d_env_size;
  d["d_model_size"] = r.d_model_size;
  d["generated_samples"] = r.generated_samples;
  d["retained_samples"] = r.retained_samples;
  d["retained_fraction"] = r.retained_fraction;
  d["retained_models"] = r.retained_models;
  d["bounds_valid"] = r.bounds_valid;
  d["eps_alpha"] = r.bounds.eps_alpha;
  d["eps_m"] = r.bounds.eps_m;
  d["lipschitz_k"] = r.bounds.lipschitz_k;
  d["d_alpha_beta"] = r.bounds.d_alpha_beta;
  d["v_env_disc"] = r.bounds.v_env;
  d["v_alpha_model"] = r.bounds.v_alpha_model;
  d["eps_k"] = r.bounds.eps_k;
  d["eta"] = r.bounds.eta;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dyna-style model-based RL with double-dropout planning: core operations";

  // --- config / training ---
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("env_name", &TrainConfig::env_name)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("workers", &TrainConfig::workers)
      .def_readwrite("c_mass", &TrainConfig::c_mass)
      .def_readwrite("c_friction", &TrainConfig::c_friction)
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("gamma", &TrainConfig::gamma)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("env_steps_per_epoch", &TrainConfig::env_steps_per_epoch)
      .def_readwrite("init_explore_steps", &TrainConfig::init_explore_steps)
      .def_readwrite("inner_iters", &TrainConfig::inner_iters)
      .def_readwrite("eval_episodes", &TrainConfig::eval_episodes)
      .def_readwrite("checkpoint_interval", &TrainConfig::checkpoint_interval)
      .def_readwrite("entropy_weight", &TrainConfig::entropy_weight)
      .def_readwrite("actor_lr", &TrainConfig::actor_lr)
      .def_readwrite("critic_lr", &TrainConfig::critic_lr)
      .def_readwrite("tau", &TrainConfig::tau)
      .def_readwrite("policy_batch", &TrainConfig::policy_batch)
      .def_readwrite("policy_updates_per_env_step", &TrainConfig::policy_updates_per_env_step)
      .def_readwrite("policy_hidden", &TrainConfig::policy_hidden)
      .def_readwrite("ensemble_size", &TrainConfig::ensemble_size)
      .def_readwrite("model_hidden", &TrainConfig::model_hidden)
      .def_readwrite("model_lr", &TrainConfig::model_lr)
      .def_readwrite("model_batch", &TrainConfig::model_batch)
      .def_readwrite("model_train_steps", &TrainConfig::model_train_steps)
      .def_readwrite("validation_fraction", &TrainConfig::validation_fraction)
      .def_readwrite("min_model_data", &TrainConfig::min_model_data)
      .def_readwrite("n_starts", &TrainConfig::n_starts)
      .def_readwrite("k_per_start", &TrainConfig::k_per_start)
      .def_readwrite("rollout_horizon", &TrainConfig::rollout_horizon)
      .def_readwrite("min_group_size", &TrainConfig::min_group_size)
      .def_readwrite("per_trajectory", &TrainConfig::per_trajectory)
      .def_readwrite("env_capacity", &TrainConfig::env_capacity)
      .def_readwrite("model_capacity", &TrainConfig::model_capacity)
      .def_readwrite("lipschitz_k", &TrainConfig::lipschitz_k)
      .def("validate", &TrainConfig::validate);

  m.def(
      "train",
      [](const TrainConfig& cfg, const std::string& out_dir, bool verbose) {
        std::ostringstream log;
        const TrainResult result = mbdp_train(cfg, out_dir, verbose ? &log : nullptr);
        std::vector<py::dict> rows;
        rows.reserve(result.rows.size());
        for (const auto& r : result.rows) rows.push_back(row_to_dict(r));
        py::dict out;
        out["rows"] = rows;
        out["total_env_steps"] = result.total_env_steps;
        if (verbose) out["log"] = log.str();
        return out;
      },
      py::arg("config"), py::arg("out_dir") = "", py::arg("verbose") = false,
      "run the full training loop; returns per-epoch metrics rows");

  // --- replay buffer ---
  py::class_<ReplayBuffer>(m, "ReplayBuffer")
      .def(py::init<std::size_t>(), py::arg("capacity"))
      .def_property_readonly("capacity", &ReplayBuffer::capacity)
      .def("__len__", &ReplayBuffer::size)
      .def(
          "push",
          [](ReplayBuffer& buf, const Vector& s, const Vector& a, double r, const Vector& ns,
             bool terminal) { buf.push({s, a, r, ns, terminal}); },
          py::arg("state"), py::arg("action"), py::arg("reward"), py::arg("next_state"),
          py::arg("terminal") = false)
      .def(
          "sample",
          [](const ReplayBuffer& buf, std::size_t k, std::uint64_t seed) {
            std::vector<py::tuple> out;
            for (const auto& t : buf.sample(k, seed))
              out.push_back(py::make_tuple(t.state, t.action, t.reward, t.next_state, t.terminal));
            return out;
          },
          py::arg("k"), py::arg("seed"))
      .def("at",
           [](const ReplayBuffer& buf, std::size_t i) {
             const auto& t = buf.at(i);
             return py::make_tuple(t.state, t.action, t.reward, t.next_state, t.terminal);
           })
      .def("dump_csv", [](const ReplayBuffer& buf) {
        std::ostringstream os;
        buf.dump_csv(os);
        return os.str();
      });

  // --- environments ---
  py::class_<envs::ContinuousEnv>(m, "ContinuousEnv")
      .def_property_readonly("name", &envs::ContinuousEnv::name)
      .def_property_readonly("state_dim", &envs::ContinuousEnv::state_dim)
      .def_property_readonly("action_dim", &envs::ContinuousEnv::action_dim)
      .def_property_readonly("reward_sup", &envs::ContinuousEnv::reward_sup)
      .def_property_readonly("horizon", &envs::ContinuousEnv::horizon)
      .def_property_readonly("action_low",
                             [](const envs::ContinuousEnv& e) { return e.action_box().low; })
      .def_property_readonly("action_high",
                             [](const envs::ContinuousEnv& e) { return e.action_box().high; })
      .def(
          "reset",
          [](envs::ContinuousEnv& e, std::uint64_t seed) {
            RngStream rng(seed);
            e.reset(rng);
            return e.state();
          },
          py::arg("seed"))
      .def("set_state", &envs::ContinuousEnv::set_state)
      .def_property_readonly("state", &envs::ContinuousEnv::state)
      .def_property_readonly("episode_done", &envs::ContinuousEnv::episode_done)
      .def("reward", &envs::ContinuousEnv::reward, py::arg("state"), py::arg("action"))
      .def(
          "step",
          [](envs::ContinuousEnv& e, const Vector& action) {
            const Transition t = e.step(action);
            return py::make_tuple(t.next_state, t.reward, t.terminal);
          },
          py::arg("action"))
      .def(
          "perturbed",
          [](const envs::ContinuousEnv& e, double c_mass, double c_friction) {
            return e.perturbed({c_mass, c_friction});
          },
          py::arg("c_mass"), py::arg("c_friction"));

  m.def(
      "make_env",
      [](const std::string& name, double c_mass, double c_friction) {
        return envs::make_env(name, {c_mass, c_friction});
      },
      py::arg("name"), py::arg("c_mass") = 1.0, py::arg("c_friction") = 1.0);
  m.def("env_names", &envs::env_names);

  // --- discrete MDP ---
  py::class_<envs::DiscreteMDP>(m, "DiscreteMDP")
      .def(py::init([](const std::vector<Matrix>& transition, const Matrix& reward,
                       const Vector& initial, int horizon, double gamma, double reward_sup) {
             envs::DiscreteMDP mdp;
             mdp.n_states = static_cast<int>(reward.rows());
             mdp.n_actions = static_cast<int>(reward.cols());
             mdp.transition = transition;
             mdp.reward = reward;
             mdp.initial = initial;
             mdp.horizon = horizon;
             mdp.gamma = gamma;
             mdp.reward_sup = reward_sup;
             mdp.validate();
             return mdp;
           }),
           py::arg("transition"), py::arg("reward"), py::arg("initial"), py::arg("horizon"),
           py::arg("gamma"), py::arg("reward_sup"))
      .def_static(
          "random",
          [](int n_states, int n_actions, int horizon, double gamma, double reward_sup,
             std::uint64_t seed) {
            RngStream rng(seed);
            return envs::DiscreteMDP::random(n_states, n_actions, horizon, gamma, reward_sup, rng);
          },
          py::arg("n_states"), py::arg("n_actions"), py::arg("horizon"), py::arg("gamma"),
          py::arg("reward_sup"), py::arg("seed"))
      .def_readonly("n_states", &envs::DiscreteMDP::n_states)
      .def_readonly("n_actions", &envs::DiscreteMDP::n_actions)
      .def_readonly("horizon", &envs::DiscreteMDP::horizon)
      .def_readonly("gamma", &envs::DiscreteMDP::gamma)
      .def_readonly("reward_sup", &envs::DiscreteMDP::reward_sup);

  py::class_<envs::TabularPolicy>(m, "TabularPolicy")
      .def(py::init([](const Matrix& probs) { return envs::TabularPolicy{probs}; }),
           py::arg("probs"))
      .def_static("uniform", &envs::TabularPolicy::uniform, py::arg("n_states"),
                  py::arg("n_actions"))
      .def_static(
          "random",
          [](int n_states, int n_actions, std::uint64_t seed) {
            RngStream rng(seed);
            return envs::TabularPolicy::random(n_states, n_actions, rng);
          },
          py::arg("n_states"), py::arg("n_actions"), py::arg("seed"))
      .def_readonly("probs", &envs::TabularPolicy::probs);

  m.def(
      "enumerate_returns",
      [](const envs::DiscreteMDP& mdp, const envs::TabularPolicy& policy, std::size_t cap) {
        return dist_to_pairs(envs::enumerate_returns(mdp, policy, cap));
      },
      py::arg("mdp"), py::arg("policy"), py::arg("cap") = 1000000,
      "exact (return, probability) atoms of the trajectory-space distribution");

  // --- risk calculators ---
  auto wrap1 = [](double (*fn)(const risk::ReturnDistribution&, double)) {
    return [fn](const std::vector<std::pair<double, double>>& atoms, double level) {
      return fn(dist_from_pairs(atoms), level);
    };
  };
  m.def("var_p", wrap1(&risk::var_p), py::arg("atoms"), py::arg("p"));
  m.def("cvar_p", wrap1(&risk::cvar_p), py::arg("atoms"), py::arg("p"));
  m.def("cvar_split", wrap1(&risk::cvar_split), py::arg("atoms"), py::arg("p"));
  m.def("dropout_value", wrap1(&risk::dropout_value), py::arg("atoms"), py::arg("alpha"));
  m.def(
      "worst_case_reweighting",
      [](const std::vector<std::pair<double, double>>& atoms, double alpha) {
        const auto rw = risk::worst_case_reweighting(dist_from_pairs(atoms), alpha);
        return py::make_tuple(rw.value, rw.delta);
      },
      py::arg("atoms"), py::arg("alpha"));
  m.def("exact_dropout_return", &risk::exact_dropout_return, py::arg("mdp"), py::arg("policy"),
        py::arg("alpha"), py::arg("cap") = 1000000);
  m.def("exact_return", &risk::exact_return, py::arg("mdp"), py::arg("policy"),
        py::arg("cap") = 1000000);
  m.def("adversarial_return", &risk::adversarial_return, py::arg("mdp"), py::arg("policy"),
        py::arg("alpha"), py::arg("cap") = 1000000);
  m.def(
      "dropout_gap_bound",
      [](double alpha, double gamma, double reward_sup) {
        return risk::dropout_gap_bound({alpha, 0.0, gamma, reward_sup});
      },
      py::arg("alpha"), py::arg("gamma"), py::arg("reward_sup"));
  m.def(
      "discrepancy_bound",
      [](double alpha, double beta, double gamma, double reward_sup, double eps_m, double k) {
        return risk::discrepancy_bound({alpha, beta, gamma, reward_sup}, eps_m, k);
      },
      py::arg("alpha"), py::arg("beta"), py::arg("gamma"), py::arg("reward_sup"),
      py::arg("eps_m"), py::arg("k"));
  m.def(
      "update_residual",
      [](double v_env, double v_alpha_model, double d_bound, double alpha, double gamma,
         double reward_sup) {
        const auto r = risk::update_residual(v_env, v_alpha_model, d_bound,
                                             {alpha, 0.0, gamma, reward_sup});
        return py::make_tuple(r.eps_k, r.eta);
      },
      py::arg("v_env"), py::arg("v_alpha_model"), py::arg("d_bound"), py::arg("alpha"),
      py::arg("gamma"), py::arg("reward_sup"));

  m.def("percentile_threshold", &percentile_threshold, py::arg("rewards"), py::arg("alpha"));

  m.def(
      "run_identity_checks",
      [](int trials, double tolerance, std::uint64_t seed) {
        std::vector<py::dict> out;
        for (const auto& r : risk::run_identity_checks(trials, tolerance, seed)) {
          py::dict d;
          d["name"] = r.name;
          d["cases"] = r.cases;
          d["max_violation"] = r.max_violation;
          d["tolerance"] = r.tolerance;
          d["pass"] = r.pass;
          out.push_back(d);
        }
        return out;
      },
      py::arg("trials") = 100, py::arg("tolerance") = 1e-9, py::arg("seed") = 1);

  m.attr("__version__") = "0.1.0";
}
