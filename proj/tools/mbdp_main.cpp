#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mbdp/agent/experiments.hpp"
#include "mbdp/agent/trainer.hpp"
#include "mbdp/csv.hpp"
#include "mbdp/manifest.hpp"
#include "mbdp/risk/verify.hpp"

namespace fs = std::filesystem;
using namespace mbdp;

namespace {

// Exit codes: 0 success, 1 verification/other failure, 2 config error,
// 3 numeric failure during training.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string default_out_root() {
  if (const char* root = std::getenv("MBDP_OUT_ROOT")) return root;
  return "runs";
}

/// Refuses to reuse a non-empty directory unless --overwrite was given.
bool prepare_out_dir(const std::string& out, bool overwrite) {
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!overwrite) {
      std::cerr << "error: output directory '" << out
                << "' exists and is not empty (use --overwrite)\n";
      return false;
    }
    fs::remove_all(out);
  }
  fs::create_directories(out);
  return true;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      table.columns = cells;
      first = false;
    } else {
      table.rows.push_back(cells);
    }
  }
  return table;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

struct ConfigFlags {
  std::string config_path;
  // override slots; only applied when the flag was actually passed
  double alpha = 0, beta = 0, gamma = 0, c_mass = 0, c_friction = 0, entropy = 0;
  std::uint64_t seed = 0;
  int workers = 0, epochs = 0, env_steps = 0, eval_episodes = 0;
  std::string env_name;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config_path, "config file ([section] key = value)");
  cmd->add_option("--env", f.env_name, "environment name (pendulum, pointmass, cartpole)");
  cmd->add_option("--seed", f.seed, "root seed; every stream derives from it");
  cmd->add_option("--workers", f.workers, "parallel workers (1 = fully serial)");
  cmd->add_option("--alpha", f.alpha, "rollout-dropout ratio in [0, 1)");
  cmd->add_option("--beta", f.beta, "model-dropout ratio in [0, 1)");
  cmd->add_option("--gamma", f.gamma, "discount factor in (0, 1)");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--env-steps", f.env_steps, "environment steps per epoch");
  cmd->add_option("--eval-episodes", f.eval_episodes, "evaluation episodes per epoch");
  cmd->add_option("--entropy-weight", f.entropy, "policy entropy weight");
  cmd->add_option("--c-mass", f.c_mass, "training-env mass coefficient [0.5, 1.5]");
  cmd->add_option("--c-friction", f.c_friction, "training-env friction coefficient [0.5, 1.5]");
}

/// Precedence: built-in defaults < config file < explicit flags.
int build_config(const CLI::App* cmd, const ConfigFlags& f, TrainConfig& cfg) {
  std::vector<std::string> errors;
  if (!f.config_path.empty()) {
    try {
      errors = apply_config_file(cfg, f.config_path);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    }
  }
  if (cmd->count("--env")) cfg.env_name = f.env_name;
  if (cmd->count("--seed")) cfg.seed = f.seed;
  if (cmd->count("--workers")) cfg.workers = f.workers;
  if (cmd->count("--alpha")) cfg.alpha = f.alpha;
  if (cmd->count("--beta")) cfg.beta = f.beta;
  if (cmd->count("--gamma")) cfg.gamma = f.gamma;
  if (cmd->count("--epochs")) cfg.epochs = f.epochs;
  if (cmd->count("--env-steps")) cfg.env_steps_per_epoch = f.env_steps;
  if (cmd->count("--eval-episodes")) cfg.eval_episodes = f.eval_episodes;
  if (cmd->count("--entropy-weight")) cfg.entropy_weight = f.entropy;
  if (cmd->count("--c-mass")) cfg.c_mass = f.c_mass;
  if (cmd->count("--c-friction")) cfg.c_friction = f.c_friction;

  for (const auto& e : cfg.validate()) errors.push_back(e);
  try {
    envs::make_env(cfg.env_name);
  } catch (const std::exception& e) {
    errors.push_back(e.what());
  }
  if (!errors.empty()) {
    std::cerr << "config errors:\n";
    for (const auto& e : errors) std::cerr << "  " << e << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

RunManifest make_manifest(const std::string& command, int argc, char** argv,
                          const TrainConfig& cfg, const std::string& out) {
  RunManifest m;
  m.command = command;
  for (int i = 0; i < argc; ++i) m.argv.emplace_back(argv[i]);
  m.config = cfg;
  m.out_dir = out;
  m.created_utc = utc_timestamp();
  return m;
}

int cmd_train(const CLI::App* cmd, const ConfigFlags& flags, const std::string& out_flag,
              bool overwrite, int argc, char** argv) {
  TrainConfig cfg;
  if (const int rc = build_config(cmd, flags, cfg); rc != kExitOk) return rc;
  const std::string out = out_flag.empty() ? default_out_root() + "/train" : out_flag;
  if (!prepare_out_dir(out, overwrite)) return kExitFailure;
  make_manifest("train", argc, argv, cfg, out).write(out + "/manifest.json");
  try {
    const TrainResult result = mbdp_train(cfg, out, &std::cout);
    std::cout << "done: " << result.rows.size() << " epochs, " << result.total_env_steps
              << " env steps, artifacts in " << out << "\n";
    return kExitOk;
  } catch (const TrainError& e) {
    std::cerr << "training failed at " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int cmd_verify(int trials, double tolerance, std::uint64_t seed) {
  if (trials == 0)
    std::cout << "warning: trials = 0, every check passes vacuously\n";
  const auto results = risk::run_identity_checks(trials, tolerance, seed);
  bool all_pass = true;
  std::printf("%-58s %8s %13s %9s  %s\n", "check", "cases", "max_violation", "tol", "status");
  for (const auto& r : results) {
    std::printf("%-58s %8ld %13.3e %9.1e  %s\n", r.name.c_str(), r.cases, r.max_violation,
                r.tolerance, r.pass ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  return all_pass ? kExitOk : kExitFailure;
}

int cmd_robustness_grid(const std::string& run_dir, const std::string& checkpoint,
                        const std::string& masses_text, const std::string& frictions_text,
                        int episodes, const std::string& out_flag, bool overwrite,
                        bool log_episodes) {
  const RunManifest manifest = RunManifest::read(run_dir + "/manifest.json");
  const std::string ckpt =
      checkpoint.empty() ? run_dir + "/checkpoints/final" : checkpoint;
  if (!fs::exists(ckpt + "/actor.bin")) {
    std::cerr << "error: no checkpoint at " << ckpt << "\n";
    return kExitFailure;
  }
  const SacAgent agent = load_agent_checkpoint(manifest.config, ckpt);
  const std::vector<double> masses = parse_double_list(masses_text);
  const std::vector<double> frictions = parse_double_list(frictions_text);
  const std::string out = out_flag.empty() ? run_dir + "/grid" : out_flag;
  if (!prepare_out_dir(out, overwrite)) return kExitFailure;

  const GridResult grid =
      robustness_grid(agent, manifest.config.env_name, masses, frictions, episodes,
                      manifest.config.gamma, derive_seed(manifest.config.seed, 0x96D),
                      manifest.config.workers);
  write_grid_csv(grid, out + "/grid.csv");
  write_grid_cells_csv(grid, out + "/grid_cells.csv");

  if (log_episodes) {
    // One deterministic episode per cell, logged step by step.
    CsvWriter log(out + "/episodes.csv", {"c_mass", "c_friction", "t", "state", "action", "reward"});
    for (double cm : masses) {
      for (double cf : frictions) {
        auto env = envs::make_env(manifest.config.env_name, {cm, cf});
        RngStream rng(derive_seed(manifest.config.seed, 0xE4));
        env->reset(rng);
        int t = 0;
        while (!env->episode_done()) {
          const Vector a = agent.act_mean(env->state());
          std::ostringstream svec, avec;
          for (Eigen::Index i = 0; i < env->state().size(); ++i)
            svec << (i ? " " : "") << fmt_double(env->state()(i));
          const Transition tr = env->step(a);
          for (Eigen::Index i = 0; i < a.size(); ++i) avec << (i ? " " : "") << fmt_double(a(i));
          log.write_row({fmt_double(cm), fmt_double(cf), std::to_string(t), svec.str(), avec.str(),
                         fmt_double(tr.reward)});
          ++t;
        }
      }
    }
  }
  std::cout << "grid written to " << out << "/grid.csv (" << masses.size() << "x"
            << frictions.size() << " cells)\n";
  return kExitOk;
}

int cmd_sweep(const CLI::App* cmd, const ConfigFlags& flags, const std::string& alphas_text,
              const std::string& betas_text, const std::string& seeds_text, bool no_baseline,
              const std::string& out_flag, bool overwrite, int argc, char** argv) {
  TrainConfig cfg;
  if (const int rc = build_config(cmd, flags, cfg); rc != kExitOk) return rc;
  SweepSpec spec;
  spec.alphas = parse_double_list(alphas_text);
  spec.betas = parse_double_list(betas_text);
  for (int s : parse_int_list(seeds_text)) spec.seeds.push_back(static_cast<std::uint64_t>(s));
  if (spec.seeds.empty()) spec.seeds.push_back(cfg.seed);
  spec.include_baseline = !no_baseline;
  const std::string out = out_flag.empty() ? default_out_root() + "/sweep" : out_flag;
  if (!prepare_out_dir(out, overwrite)) return kExitFailure;
  make_manifest("sweep", argc, argv, cfg, out).write(out + "/manifest.json");
  const auto cells = ablation_sweep(cfg, spec, &std::cout);
  write_sweep_csv(cells, out + "/sweep.csv");
  int failed = 0;
  for (const auto& c : cells) failed += c.ok ? 0 : 1;
  std::cout << "sweep: " << cells.size() << " cells, " << failed << " failed, table in " << out
            << "/sweep.csv\n";
  return kExitOk;
}

int cmd_residual_trace(const std::string& run_dir, const std::string& out_flag) {
  CsvTable metrics;
  try {
    metrics = read_csv(run_dir + "/metrics.csv");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  const int epoch_col = metrics.column("epoch");
  const int eta_col = metrics.column("eta");
  const int valid_col = metrics.column("bounds_valid");
  if (epoch_col < 0 || eta_col < 0 || valid_col < 0) {
    std::cerr << "error: metrics.csv lacks the expected columns\n";
    return kExitFailure;
  }
  std::vector<std::pair<int, double>> trace;
  for (const auto& row : metrics.rows) {
    if (row[static_cast<std::size_t>(valid_col)] != "1") continue;
    trace.emplace_back(std::stoi(row[static_cast<std::size_t>(epoch_col)]),
                       std::stod(row[static_cast<std::size_t>(eta_col)]));
  }
  if (trace.empty()) {
    std::cerr << "error: no epochs with a valid bounds row in " << run_dir << "/metrics.csv\n";
    return kExitFailure;
  }
  double max_abs = 0.0;
  for (const auto& [epoch, eta] : trace) max_abs = std::max(max_abs, std::abs(eta));
  const double scale = max_abs > 0.0 ? max_abs : 1.0;
  const std::string out = out_flag.empty() ? run_dir + "/residual_trace.csv" : out_flag;
  {
    CsvWriter csv(out, {"epoch", "eta", "eta_scaled"});
    for (const auto& [epoch, eta] : trace)
      csv.write_row({std::to_string(epoch), fmt_double(eta), fmt_double(eta / scale)});
  }
  long positive = 0, first_half_positive = 0;
  const std::size_t half = (trace.size() + 1) / 2;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].second > 0.0) {
      ++positive;
      if (i < half) ++first_half_positive;
    }
  }
  std::cout << "residual trace: " << trace.size() << " epochs -> " << out << "\n";
  std::cout << "eta > 0 overall: " << positive << "/" << trace.size() << "\n";
  std::cout << "eta > 0 in first half: " << first_half_positive << "/" << half << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dyna-style model-based RL with double-dropout planning"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "run the full training loop");
  ConfigFlags train_flags;
  add_config_flags(train, train_flags);
  std::string train_out;
  bool train_overwrite = false;
  train->add_option("--out", train_out, "output directory (default $MBDP_OUT_ROOT/train)");
  train->add_flag("--overwrite", train_overwrite, "allow reuse of a non-empty output directory");

  // verify
  auto* verify = app.add_subcommand("verify", "brute-force checks of the risk identities");
  int verify_trials = 100;
  double verify_tol = 1e-9;
  std::uint64_t verify_seed = 1;
  verify->add_option("--trials", verify_trials, "number of random MDPs");
  verify->add_option("--tolerance", verify_tol, "max allowed violation");
  verify->add_option("--seed", verify_seed, "seed for the MDP population");

  // robustness-grid
  auto* grid = app.add_subcommand("robustness-grid",
                                  "evaluate a trained checkpoint over perturbed environments");
  std::string grid_run, grid_ckpt, grid_masses = "0.8,1.0,1.2", grid_frictions = "0.8,1.0,1.2";
  std::string grid_out;
  int grid_episodes = 10;
  bool grid_overwrite = false, grid_log_episodes = false;
  grid->add_option("--run", grid_run, "run directory holding manifest.json and checkpoints")
      ->required();
  grid->add_option("--checkpoint", grid_ckpt, "checkpoint directory (default <run>/checkpoints/final)");
  grid->add_option("--masses", grid_masses, "comma list of c_mass coefficients");
  grid->add_option("--frictions", grid_frictions, "comma list of c_friction coefficients");
  grid->add_option("--episodes", grid_episodes, "evaluation episodes per cell");
  grid->add_option("--out", grid_out, "output directory (default <run>/grid)");
  grid->add_flag("--overwrite", grid_overwrite, "allow reuse of a non-empty output directory");
  grid->add_flag("--log-episodes", grid_log_episodes, "also dump one episode log per cell");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "train across dropout-ratio grids and seeds");
  ConfigFlags sweep_flags;
  add_config_flags(sweep, sweep_flags);
  std::string sweep_alphas, sweep_betas, sweep_seeds, sweep_out;
  bool sweep_overwrite = false, sweep_no_baseline = false;
  sweep->add_option("--alphas", sweep_alphas, "comma list of alpha values (beta stays fixed)");
  sweep->add_option("--betas", sweep_betas, "comma list of beta values (alpha stays fixed)");
  sweep->add_option("--seeds", sweep_seeds, "comma list of seeds (default: config seed)");
  sweep->add_flag("--no-baseline", sweep_no_baseline, "skip the alpha = beta = 0 reference rows");
  sweep->add_option("--out", sweep_out, "output directory (default $MBDP_OUT_ROOT/sweep)");
  sweep->add_flag("--overwrite", sweep_overwrite, "allow reuse of a non-empty output directory");

  // residual-trace
  auto* trace = app.add_subcommand("residual-trace",
                                   "re-emit the per-epoch residual curve from a finished run");
  std::string trace_run, trace_out;
  trace->add_option("--run", trace_run, "run directory holding metrics.csv")->required();
  trace->add_option("--out", trace_out, "output CSV (default <run>/residual_trace.csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return cmd_train(train, train_flags, train_out, train_overwrite, argc, argv);
    if (verify->parsed()) return cmd_verify(verify_trials, verify_tol, verify_seed);
    if (grid->parsed())
      return cmd_robustness_grid(grid_run, grid_ckpt, grid_masses, grid_frictions, grid_episodes,
                                 grid_out, grid_overwrite, grid_log_episodes);
    if (sweep->parsed())
      return cmd_sweep(sweep, sweep_flags, sweep_alphas, sweep_betas, sweep_seeds,
                       sweep_no_baseline, sweep_out, sweep_overwrite, argc, argv);
    if (trace->parsed()) return cmd_residual_trace(trace_run, trace_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
