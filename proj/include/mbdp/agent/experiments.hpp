#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mbdp/agent/sac.hpp"
#include "mbdp/config.hpp"
#include "mbdp/types.hpp"

namespace mbdp {

struct GridResult {
  std::vector<double> masses;
  std::vector<double> frictions;
  Matrix mean_returns;  // (masses x frictions)
  Matrix std_returns;
  Matrix blowups;
};

/// Evaluates the agent on every (c_mass, c_friction) cell, each a fresh
/// perturbation of the named environment, without any adaptation.
GridResult robustness_grid(const SacAgent& agent, const std::string& env_name,
                           const std::vector<double>& masses, const std::vector<double>& frictions,
                           int episodes, double gamma, std::uint64_t seed, int workers = 1);

/// Matrix CSV with coefficient row/column labels.
void write_grid_csv(const GridResult& grid, const std::string& path);
/// Long-form CSV: one row per cell with mean/std/blowups.
void write_grid_cells_csv(const GridResult& grid, const std::string& path);

struct SweepCell {
  std::string kind;  // "alpha", "beta" or "baseline"
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  double final_return = 0.0;     // unperturbed efficiency metric
  double robustness_mean = 0.0;  // mean return over the perturbed grid
  bool ok = false;
  std::string message;
};

struct SweepSpec {
  std::vector<double> alphas;  // swept with beta fixed at base.beta
  std::vector<double> betas;   // swept with alpha fixed at base.alpha
  std::vector<std::uint64_t> seeds;
  bool include_baseline = true;  // adds the alpha = beta = 0 reference rows
  std::vector<double> grid_masses = {0.8, 1.2};
  std::vector<double> grid_frictions = {0.8, 1.2};
  int grid_episodes = 5;
};

/// Trains one run per (ratio value, seed) cell and scores it on both the
/// unperturbed environment and the perturbation grid. Per-cell failures are
/// recorded and the sweep continues.
std::vector<SweepCell> ablation_sweep(const TrainConfig& base, const SweepSpec& spec,
                                      std::ostream* log = nullptr);

void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path);

}  // namespace mbdp
