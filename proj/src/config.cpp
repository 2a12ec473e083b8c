#include "mbdp/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "mbdp/csv.hpp"

namespace mbdp {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string int_list_to_string(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  return os.str();
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t pos = 0;
    const int v = std::stoi(item, &pos);
    if (pos != item.size()) throw std::invalid_argument("bad integer '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::map<std::string, std::string> parse_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
    kv[section.empty() ? key : section + "." + key] = value;
  }
  return kv;
}

namespace {

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

const std::map<std::string, Field>& field_table() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    auto str = [&](const std::string& k, std::string TrainConfig::* m) {
      t[k] = {[m](TrainConfig& c, const std::string& v) { c.*m = v; },
              [m](const TrainConfig& c) { return c.*m; }};
    };
    auto u64 = [&](const std::string& k, std::uint64_t TrainConfig::* m) {
      t[k] = {[m](TrainConfig& c, const std::string& v) { c.*m = std::stoull(v); },
              [m](const TrainConfig& c) { return std::to_string(c.*m); }};
    };
    auto integer = [&](const std::string& k, int TrainConfig::* m) {
      t[k] = {[m](TrainConfig& c, const std::string& v) { c.*m = std::stoi(v); },
              [m](const TrainConfig& c) { return std::to_string(c.*m); }};
    };
    auto size = [&](const std::string& k, std::size_t TrainConfig::* m) {
      t[k] = {[m](TrainConfig& c, const std::string& v) { c.*m = std::stoull(v); },
              [m](const TrainConfig& c) { return std::to_string(c.*m); }};
    };
    auto real = [&](const std::string& k, double TrainConfig::* m) {
      t[k] = {[m](TrainConfig& c, const std::string& v) { c.*m = std::stod(v); },
              [m](const TrainConfig& c) { return fmt_double(c.*m); }};
    };
    auto ints = [&](const std::string& k, std::vector<int> TrainConfig::* m) {
      t[k] = {[m](TrainConfig& c, const std::string& v) { c.*m = parse_int_list(v); },
              [m](const TrainConfig& c) { return int_list_to_string(c.*m); }};
    };
    auto boolean = [&](const std::string& k, bool TrainConfig::* m) {
      t[k] = {[m](TrainConfig& c, const std::string& v) {
                if (v == "true" || v == "1")
                  c.*m = true;
                else if (v == "false" || v == "0")
                  c.*m = false;
                else
                  throw std::invalid_argument("expected true/false");
              },
              [m](const TrainConfig& c) { return (c.*m) ? "true" : "false"; }};
    };

    str("run.env", &TrainConfig::env_name);
    u64("run.seed", &TrainConfig::seed);
    integer("run.workers", &TrainConfig::workers);
    real("run.c_mass", &TrainConfig::c_mass);
    real("run.c_friction", &TrainConfig::c_friction);

    real("dropout.alpha", &TrainConfig::alpha);
    real("dropout.beta", &TrainConfig::beta);

    integer("train.epochs", &TrainConfig::epochs);
    integer("train.env_steps_per_epoch", &TrainConfig::env_steps_per_epoch);
    integer("train.init_explore_steps", &TrainConfig::init_explore_steps);
    integer("train.inner_iters", &TrainConfig::inner_iters);
    integer("train.eval_episodes", &TrainConfig::eval_episodes);
    integer("train.checkpoint_interval", &TrainConfig::checkpoint_interval);

    real("agent.gamma", &TrainConfig::gamma);
    real("agent.entropy_weight", &TrainConfig::entropy_weight);
    real("agent.actor_lr", &TrainConfig::actor_lr);
    real("agent.critic_lr", &TrainConfig::critic_lr);
    real("agent.tau", &TrainConfig::tau);
    integer("agent.batch_size", &TrainConfig::policy_batch);
    integer("agent.updates_per_env_step", &TrainConfig::policy_updates_per_env_step);
    ints("agent.hidden", &TrainConfig::policy_hidden);

    integer("ensemble.size", &TrainConfig::ensemble_size);
    ints("ensemble.hidden", &TrainConfig::model_hidden);
    real("ensemble.lr", &TrainConfig::model_lr);
    integer("ensemble.batch_size", &TrainConfig::model_batch);
    integer("ensemble.train_steps", &TrainConfig::model_train_steps);
    real("ensemble.validation_fraction", &TrainConfig::validation_fraction);
    integer("ensemble.min_data", &TrainConfig::min_model_data);

    integer("rollout.n_starts", &TrainConfig::n_starts);
    integer("rollout.k_per_start", &TrainConfig::k_per_start);
    integer("rollout.horizon", &TrainConfig::rollout_horizon);
    integer("rollout.min_group_size", &TrainConfig::min_group_size);
    boolean("rollout.per_trajectory", &TrainConfig::per_trajectory);

    size("buffers.env_capacity", &TrainConfig::env_capacity);
    size("buffers.model_capacity", &TrainConfig::model_capacity);

    real("risk.lipschitz_k", &TrainConfig::lipschitz_k);
    integer("risk.lipschitz_pairs", &TrainConfig::lipschitz_pairs);
    return t;
  }();
  return table;
}

}  // namespace

std::vector<std::string> apply_config_file(TrainConfig& cfg, const std::string& path) {
  std::vector<std::string> errors;
  const auto kv = parse_ini(path);
  const auto& table = field_table();
  for (const auto& [key, value] : kv) {
    const auto it = table.find(key);
    if (it == table.end()) {
      errors.push_back("unknown config key '" + key + "'");
      continue;
    }
    try {
      it->second.set(cfg, value);
    } catch (const std::exception& e) {
      errors.push_back("config key '" + key + "': bad value '" + value + "' (" + e.what() + ")");
    }
  }
  return errors;
}

std::string config_to_ini(const TrainConfig& cfg) {
  // Group by section, preserving the table's lexicographic key order.
  std::ostringstream os;
  std::string section;
  for (const auto& [key, field] : field_table()) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << "\n";
      os << "[" << sec << "]\n";
      section = sec;
    }
    os << key.substr(dot + 1) << " = " << field.get(cfg) << "\n";
  }
  return os.str();
}

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> errors;
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  require(alpha >= 0.0 && alpha < 1.0, "dropout.alpha: must be in [0, 1), got " + fmt_double(alpha));
  require(beta >= 0.0 && beta < 1.0, "dropout.beta: must be in [0, 1), got " + fmt_double(beta));
  require(gamma > 0.0 && gamma < 1.0, "agent.gamma: must be in (0, 1), got " + fmt_double(gamma));
  require(c_mass >= 0.5 && c_mass <= 1.5, "run.c_mass: must be in [0.5, 1.5]");
  require(c_friction >= 0.5 && c_friction <= 1.5, "run.c_friction: must be in [0.5, 1.5]");
  require(workers >= 1, "run.workers: must be >= 1");
  require(epochs >= 0, "train.epochs: must be >= 0");
  require(env_steps_per_epoch > 0, "train.env_steps_per_epoch: must be positive");
  require(init_explore_steps >= 0, "train.init_explore_steps: must be >= 0");
  require(inner_iters >= 1, "train.inner_iters: must be >= 1");
  require(eval_episodes >= 1, "train.eval_episodes: must be >= 1");
  require(checkpoint_interval >= 0, "train.checkpoint_interval: must be >= 0");
  require(entropy_weight >= 0.0, "agent.entropy_weight: must be >= 0");
  require(actor_lr > 0.0 && critic_lr > 0.0, "agent lrs: must be positive");
  require(tau > 0.0 && tau <= 1.0, "agent.tau: must be in (0, 1]");
  require(policy_batch >= 1, "agent.batch_size: must be >= 1");
  require(policy_updates_per_env_step >= 0, "agent.updates_per_env_step: must be >= 0");
  require(!policy_hidden.empty(), "agent.hidden: at least one hidden layer");
  require(ensemble_size >= 1, "ensemble.size: must be >= 1");
  require(model_lr > 0.0, "ensemble.lr: must be positive");
  require(model_batch >= 1, "ensemble.batch_size: must be >= 1");
  require(model_train_steps >= 0, "ensemble.train_steps: must be >= 0");
  require(validation_fraction > 0.0 && validation_fraction < 1.0,
          "ensemble.validation_fraction: must be in (0, 1)");
  require(min_model_data >= 10, "ensemble.min_data: must be >= 10");
  require(n_starts >= 1, "rollout.n_starts: must be >= 1");
  require(k_per_start >= 1, "rollout.k_per_start: must be >= 1");
  require(rollout_horizon >= 1, "rollout.horizon: must be >= 1");
  require(min_group_size >= 1, "rollout.min_group_size: must be >= 1");
  require(env_capacity >= 1, "buffers.env_capacity: must be >= 1");
  require(model_capacity >= 1, "buffers.model_capacity: must be >= 1");
  require(lipschitz_k >= 0.0, "risk.lipschitz_k: must be >= 0 (0 = estimate)");
  require(lipschitz_pairs >= 1, "risk.lipschitz_pairs: must be >= 1");
  for (int w : policy_hidden)
    require(w >= 1, "agent.hidden: widths must be positive");
  for (int w : model_hidden)
    require(w >= 1, "ensemble.hidden: widths must be positive");
  return errors;
}

}  // namespace mbdp
