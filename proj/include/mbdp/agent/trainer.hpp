#pragma once

#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbdp/agent/sac.hpp"
#include "mbdp/config.hpp"
#include "mbdp/ensemble.hpp"
#include "mbdp/risk/risk.hpp"

namespace mbdp {

/// One metrics row per epoch. wall_time_s is reported on the log stream and
/// in timing.csv but excluded from metrics.csv, which must be bit-identical
/// across reruns of the same manifest.
struct EpochRow {
  int epoch = 0;
  long env_steps = 0;
  int env_blowups = 0;
  double eval_mean = 0.0;
  double eval_std = 0.0;
  double eval_disc = 0.0;
  int eval_blowups = 0;
  std::size_t d_env_size = 0;
  std::size_t d_model_size = 0;
  long generated_samples = 0;
  long retained_samples = 0;
  long rollout_groups = 0;
  double retained_fraction = 0.0;
  double threshold_mean = 0.0;
  int truncated_rollouts = 0;
  int retained_models = 0;
  bool bounds_valid = false;
  risk::BoundsReport bounds;
  double wall_time_s = 0.0;
};

struct MemberRow {
  int epoch = 0;
  int member = 0;
  double train_nll = 0.0;
  double validation_nll = 0.0;
  double bias = 0.0;
  bool retained = false;
};

/// Raised when an epoch stage fails; partial metrics are flushed first.
struct TrainError : std::runtime_error {
  TrainError(int epoch_, std::string stage_, const std::string& what_)
      : std::runtime_error("epoch " + std::to_string(epoch_) + ", stage " + stage_ + ": " + what_),
        epoch(epoch_),
        stage(std::move(stage_)) {}
  int epoch;
  std::string stage;
};

struct TrainResult {
  std::vector<EpochRow> rows;
  std::vector<MemberRow> member_rows;
  long total_env_steps = 0;
  std::optional<SacAgent> agent;
};

/// The full training loop: per epoch, (i) environment interaction filling
/// D_env, (ii) inner iterations of ensemble training, bias-ranked model
/// selection, rollout generation and percentile filtering into D_model,
/// (iii) policy optimization on D_model, (iv) evaluation and the bounds
/// ledger. When out_dir is nonempty, metrics/ensemble/rollout CSVs are
/// written incrementally and checkpoints saved every checkpoint_interval
/// epochs plus at the end.
TrainResult mbdp_train(const TrainConfig& cfg, const std::string& out_dir = "",
                       std::ostream* log = nullptr);

/// metrics.csv column names, in order.
const std::vector<std::string>& metrics_columns();
std::vector<std::string> metrics_row_cells(const EpochRow& row);

void save_checkpoint(const SacAgent& agent, const EnsembleState& ens, const std::string& dir);
SacAgent load_agent_checkpoint(const TrainConfig& cfg, const std::string& dir);

}  // namespace mbdp
