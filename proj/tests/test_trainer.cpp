#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mbdp/agent/evaluate.hpp"
#include "mbdp/agent/experiments.hpp"
#include "mbdp/agent/trainer.hpp"
#include "mbdp/manifest.hpp"

using namespace mbdp;
namespace fs = std::filesystem;

namespace {

/// Tiny but complete configuration: every stage runs, in seconds.
TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.env_name = "pointmass";
  cfg.seed = 7;
  cfg.epochs = 2;
  cfg.env_steps_per_epoch = 60;
  cfg.init_explore_steps = 300;
  cfg.eval_episodes = 2;
  cfg.checkpoint_interval = 1;
  cfg.ensemble_size = 2;
  cfg.model_hidden = {16};
  cfg.model_train_steps = 20;
  cfg.model_batch = 32;
  cfg.min_model_data = 100;
  cfg.n_starts = 32;
  cfg.k_per_start = 8;
  cfg.rollout_horizon = 2;
  cfg.policy_hidden = {16};
  cfg.policy_batch = 32;
  cfg.policy_updates_per_env_step = 1;
  cfg.env_capacity = 5000;
  cfg.model_capacity = 5000;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("zero epochs: empty report, no env steps") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  cfg.init_explore_steps = 0;
  const TrainResult result = mbdp_train(cfg);
  CHECK(result.rows.empty());
  CHECK(result.total_env_steps == 0);
}

TEST_CASE("tiny run: rows are well-formed and counters consistent") {
  const TrainResult result = mbdp_train(tiny_config());
  REQUIRE(result.rows.size() == 2);
  long prev_steps = 0;
  for (const EpochRow& row : result.rows) {
    CHECK(row.env_steps > prev_steps);  // monotone env-step counter
    prev_steps = row.env_steps;
    CHECK(row.d_env_size > 0);
    CHECK(row.generated_samples > 0);
    CHECK(row.retained_samples > 0);
    CHECK(row.retained_samples <= row.generated_samples);
    CHECK(row.retained_models == 2);  // beta = 0.2, ceil(0.8 * 2) = 2
    CHECK(row.bounds_valid);
    CHECK(row.bounds.eps_alpha > 0.0);
    CHECK(std::isfinite(row.bounds.eta));
  }
}

TEST_CASE("same seed twice: metrics rows identical, different seed diverges") {
  const TrainResult a = mbdp_train(tiny_config());
  const TrainResult b = mbdp_train(tiny_config());
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    CHECK(metrics_row_cells(a.rows[i]) == metrics_row_cells(b.rows[i]));

  TrainConfig other = tiny_config();
  other.seed = 8;
  const TrainResult c = mbdp_train(other);
  CHECK(metrics_row_cells(a.rows.back()) != metrics_row_cells(c.rows.back()));
}

TEST_CASE("worker count does not change the metrics") {
  TrainConfig cfg = tiny_config();
  const TrainResult serial = mbdp_train(cfg);
  cfg.workers = 4;
  const TrainResult parallel = mbdp_train(cfg);
  REQUIRE(serial.rows.size() == parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i)
    CHECK(metrics_row_cells(serial.rows[i]) == metrics_row_cells(parallel.rows[i]));
}

TEST_CASE("no dropout means nothing dropped anywhere") {
  TrainConfig cfg = tiny_config();
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  const TrainResult result = mbdp_train(cfg);
  for (const EpochRow& row : result.rows) {
    CHECK(row.retained_samples == row.generated_samples);
    CHECK(row.retained_models == cfg.ensemble_size);
    CHECK(row.retained_fraction == 1.0);
  }
}

TEST_CASE("run directory artifacts: csvs, checkpoints, manifest round-trip") {
  TempDir tmp("mbdp_trainer_test");
  const std::string out = (tmp.path / "run").string();
  TrainConfig cfg = tiny_config();

  RunManifest manifest;
  manifest.command = "train";
  manifest.config = cfg;
  manifest.out_dir = out;
  manifest.created_utc = utc_timestamp();
  fs::create_directories(out);
  manifest.write(out + "/manifest.json");

  const TrainResult result = mbdp_train(cfg, out);
  CHECK(fs::exists(out + "/metrics.csv"));
  CHECK(fs::exists(out + "/ensemble.csv"));
  CHECK(fs::exists(out + "/rollout.csv"));
  CHECK(fs::exists(out + "/timing.csv"));
  CHECK(fs::exists(out + "/checkpoints/final/actor.bin"));
  CHECK(fs::exists(out + "/checkpoints/epoch_0002/actor.bin"));

  // header + one line per epoch
  std::istringstream metrics(read_file(out + "/metrics.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) ++lines;
  CHECK(lines == 1 + static_cast<int>(result.rows.size()));

  const RunManifest back = RunManifest::read(out + "/manifest.json");
  CHECK(back.config.seed == cfg.seed);
  CHECK(back.config.alpha == cfg.alpha);
  CHECK(back.config.env_name == cfg.env_name);

  // checkpoint reload reproduces the trained actor's behavior
  const SacAgent loaded = load_agent_checkpoint(cfg, out + "/checkpoints/final");
  const Vector probe = Vector::Constant(4, 0.25);
  CHECK((loaded.act_mean(probe) - result.agent->act_mean(probe)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("invalid config fails before any work") {
  TrainConfig cfg = tiny_config();
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(mbdp_train(cfg), std::invalid_argument);
}

TEST_CASE("train errors carry the epoch and stage") {
  const TrainError err(3, "rollouts", "boom");
  const std::string what = err.what();
  CHECK(what.find("epoch 3") != std::string::npos);
  CHECK(what.find("stage rollouts") != std::string::npos);
  CHECK(err.epoch == 3);
  CHECK(err.stage == "rollouts");
}

TEST_CASE("robustness grid: identity cell equals plain evaluation, shape contract") {
  TrainConfig cfg = tiny_config();
  const TrainResult result = mbdp_train(cfg);

  const GridResult one = robustness_grid(*result.agent, cfg.env_name, {1.0}, {1.0}, 3, cfg.gamma,
                                         derive_seed(cfg.seed, 0x96D));
  const auto env = envs::make_env(cfg.env_name);
  const EvalResult direct =
      evaluate_policy(*result.agent, *env, 3, cfg.gamma,
                      derive_seed(derive_seed(cfg.seed, 0x96D), 0x62D, 0, 0));
  CHECK(one.mean_returns(0, 0) == doctest::Approx(direct.mean));

  const GridResult grid =
      robustness_grid(*result.agent, cfg.env_name, {0.8, 1.0, 1.2}, {0.8, 1.0, 1.2}, 2, cfg.gamma, 5);
  CHECK(grid.mean_returns.rows() == 3);
  CHECK(grid.mean_returns.cols() == 3);
  CHECK(grid.mean_returns.allFinite());
}

TEST_CASE("grid csv files carry labels and every cell") {
  TempDir tmp("mbdp_grid_csv_test");
  GridResult grid;
  grid.masses = {0.8, 1.2};
  grid.frictions = {0.9, 1.1};
  grid.mean_returns.resize(2, 2);
  grid.mean_returns << 1, 2, 3, 4;
  grid.std_returns = Matrix::Zero(2, 2);
  grid.blowups = Matrix::Zero(2, 2);
  const std::string path = (tmp.path / "grid.csv").string();
  write_grid_csv(grid, path);
  const std::string text = read_file(path);
  CHECK(text.find("c_mass\\c_friction,0.90000000000000002,1.1000000000000001") != std::string::npos);
  CHECK(text.find("0.80000000000000004,1,2") != std::string::npos);

  const std::string cells_path = (tmp.path / "cells.csv").string();
  write_grid_cells_csv(grid, cells_path);
  std::istringstream in(read_file(cells_path));
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 5);  // header + 4 cells
}

TEST_CASE("ablation sweep: single-cell composition and row counting") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  cfg.eval_episodes = 1;
  SweepSpec spec;
  spec.alphas = {0.0, 0.2};
  spec.seeds = {3, 4};
  spec.include_baseline = true;
  spec.grid_episodes = 1;
  const auto cells = ablation_sweep(cfg, spec);
  // per seed: 2 alpha cells + 1 baseline
  CHECK(cells.size() == 6);
  int baselines = 0;
  for (const auto& c : cells) {
    CHECK(c.ok);
    if (c.kind == "baseline") {
      ++baselines;
      CHECK(c.alpha == 0.0);
      CHECK(c.beta == 0.0);
    }
  }
  CHECK(baselines == 2);
}
