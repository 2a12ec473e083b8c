#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mbdp/nn/adam.hpp"
#include "mbdp/nn/mlp.hpp"
#include "mbdp/replay_buffer.hpp"
#include "mbdp/rng.hpp"
#include "mbdp/types.hpp"

namespace mbdp {

/// One probabilistic dynamics model: an MLP mapping (s, a) to the mean and
/// log-std of a diagonal Gaussian over the next-state delta s' - s.
/// Predicting deltas instead of absolute states is a variance-reduction
/// choice; the mean next-state prediction is s + mu(s, a).
struct DynamicsModel {
  DynamicsModel(int state_dim, int action_dim, const std::vector<int>& hidden, double lr, int id,
                RngStream& init_rng);

  nn::Mlp net;
  nn::Adam opt;
  int id;
  int state_dim;
  int action_dim;

  /// Validation distance; stale after any training step until recomputed.
  double bias = 0.0;
  bool bias_stale = true;

  Matrix mean_next_state(const Matrix& states, const Matrix& actions) const;
};

struct EnsembleState {
  std::vector<DynamicsModel> members;
  std::vector<int> retained;  // indices into members, the low-bias subset
  int state_dim = 0;
  int action_dim = 0;

  std::size_t size() const { return members.size(); }
  std::size_t retained_count() const { return retained.size(); }
};

EnsembleState make_ensemble(int n_members, int state_dim, int action_dim,
                            const std::vector<int>& hidden, double lr, std::uint64_t seed);

/// Deterministic train/validation index split over a dataset of size n.
/// The validation share is held out whole; members bootstrap only from the
/// training part, so biases are computed on data no member trained on.
struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;

  static DataSplit make(std::size_t n, double validation_fraction, std::uint64_t seed);
};

struct MemberTrainStats {
  int id = 0;
  int steps_done = 0;
  double train_nll = 0.0;  // mean minibatch NLL over executed steps
  double validation_nll = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

/// Trains every member for `steps` gradient steps of Gaussian NLL on the
/// next-state delta. Members differ through bootstrap resampling of the
/// training split and their distinct init seeds. A non-finite loss aborts
/// that member's remaining steps and is reported, not thrown. Marks all
/// trained members' biases stale.
std::vector<MemberTrainStats> train_ensemble(EnsembleState& ens, const ReplayBuffer& d_env,
                                             const DataSplit& split, int steps, int batch_size,
                                             std::uint64_t seed, int workers = 1,
                                             int min_data = 10);

/// Mean L2 distance between the model's mean next-state prediction and the
/// observed next state over `validation`. Stores the result in the model and
/// clears its staleness flag.
double compute_bias(DynamicsModel& model, std::span<const Transition> validation);

/// Sorts members ascending by bias (ties to the lower id) and retains the
/// first ceil((1 - beta) * N) as the rollout subset. Dropped members stay in
/// the ensemble and keep training in later epochs; they are only excluded
/// from rollout sampling. Stale biases are an error.
void model_dropout(EnsembleState& ens, double beta);

enum class PredictMode {
  kSample,    // next = s + mu + sigma * eps
  kMeanOnly,  // next = s + mu (used by theory checks)
};

/// One-step prediction by a member drawn uniformly from the retained subset.
Vector ensemble_predict(const EnsembleState& ens, const Vector& state, const Vector& action,
                        RngStream& rng, PredictMode mode = PredictMode::kSample);

}  // namespace mbdp
