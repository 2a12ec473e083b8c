#include "mbdp/agent/experiments.hpp"

#include <cmath>

#include "mbdp/agent/evaluate.hpp"
#include "mbdp/agent/trainer.hpp"
#include "mbdp/csv.hpp"

namespace mbdp {

GridResult robustness_grid(const SacAgent& agent, const std::string& env_name,
                           const std::vector<double>& masses, const std::vector<double>& frictions,
                           int episodes, double gamma, std::uint64_t seed, int workers) {
  if (masses.empty() || frictions.empty())
    throw std::invalid_argument("robustness_grid: empty coefficient lists");
  GridResult grid;
  grid.masses = masses;
  grid.frictions = frictions;
  const auto rows = static_cast<Eigen::Index>(masses.size());
  const auto cols = static_cast<Eigen::Index>(frictions.size());
  grid.mean_returns.resize(rows, cols);
  grid.std_returns.resize(rows, cols);
  grid.blowups.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto env = envs::make_env(
          env_name, {masses[static_cast<std::size_t>(i)], frictions[static_cast<std::size_t>(j)]});
      const EvalResult eval = evaluate_policy(
          agent, *env, episodes, gamma,
          derive_seed(seed, 0x62D, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)),
          workers);
      grid.mean_returns(i, j) = eval.mean;
      grid.std_returns(i, j) = eval.stddev;
      grid.blowups(i, j) = eval.blowups;
    }
  }
  return grid;
}

void write_grid_csv(const GridResult& grid, const std::string& path) {
  std::vector<std::string> header{"c_mass\\c_friction"};
  for (double f : grid.frictions) header.push_back(fmt_double(f));
  CsvWriter csv(path, header);
  for (Eigen::Index i = 0; i < grid.mean_returns.rows(); ++i) {
    std::vector<std::string> cells{fmt_double(grid.masses[static_cast<std::size_t>(i)])};
    for (Eigen::Index j = 0; j < grid.mean_returns.cols(); ++j)
      cells.push_back(fmt_double(grid.mean_returns(i, j)));
    csv.write_row(cells);
  }
}

void write_grid_cells_csv(const GridResult& grid, const std::string& path) {
  CsvWriter csv(path, {"c_mass", "c_friction", "mean_return", "std_return", "blowups"});
  for (Eigen::Index i = 0; i < grid.mean_returns.rows(); ++i)
    for (Eigen::Index j = 0; j < grid.mean_returns.cols(); ++j)
      csv.write_row({fmt_double(grid.masses[static_cast<std::size_t>(i)]),
                     fmt_double(grid.frictions[static_cast<std::size_t>(j)]),
                     fmt_double(grid.mean_returns(i, j)), fmt_double(grid.std_returns(i, j)),
                     fmt_double(grid.blowups(i, j))});
}

namespace {

SweepCell run_cell(const TrainConfig& base, const SweepSpec& spec, const std::string& kind,
                   double alpha, double beta, std::uint64_t seed, std::ostream* log) {
  SweepCell cell;
  cell.kind = kind;
  cell.alpha = alpha;
  cell.beta = beta;
  cell.seed = seed;
  try {
    TrainConfig cfg = base;
    cfg.alpha = alpha;
    cfg.beta = beta;
    cfg.seed = seed;
    const TrainResult result = mbdp_train(cfg, "", nullptr);
    if (result.rows.empty()) throw std::runtime_error("no epochs trained");
    cell.final_return = result.rows.back().eval_mean;
    const GridResult grid =
        robustness_grid(*result.agent, cfg.env_name, spec.grid_masses, spec.grid_frictions,
                        spec.grid_episodes, cfg.gamma, derive_seed(seed, 0x96D), cfg.workers);
    cell.robustness_mean = grid.mean_returns.mean();
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.message = e.what();
  }
  if (log) {
    (*log) << "sweep " << kind << " alpha=" << alpha << " beta=" << beta << " seed=" << seed
           << (cell.ok ? " ok" : (" FAILED: " + cell.message)) << "\n";
    log->flush();
  }
  return cell;
}

}  // namespace

std::vector<SweepCell> ablation_sweep(const TrainConfig& base, const SweepSpec& spec,
                                      std::ostream* log) {
  if (spec.seeds.empty()) throw std::invalid_argument("ablation_sweep: need at least one seed");
  if (spec.alphas.empty() && spec.betas.empty() && !spec.include_baseline)
    throw std::invalid_argument("ablation_sweep: nothing to sweep");
  std::vector<SweepCell> cells;
  for (std::uint64_t seed : spec.seeds) {
    for (double a : spec.alphas)
      cells.push_back(run_cell(base, spec, "alpha", a, base.beta, seed, log));
    for (double b : spec.betas)
      cells.push_back(run_cell(base, spec, "beta", base.alpha, b, seed, log));
    if (spec.include_baseline)
      cells.push_back(run_cell(base, spec, "baseline", 0.0, 0.0, seed, log));
  }
  return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path) {
  CsvWriter csv(path, {"kind", "alpha", "beta", "seed", "final_return", "robustness_mean",
                       "status", "message"});
  for (const SweepCell& c : cells)
    csv.write_row({c.kind, fmt_double(c.alpha), fmt_double(c.beta), std::to_string(c.seed),
                   fmt_double(c.final_return), fmt_double(c.robustness_mean),
                   c.ok ? "ok" : "failed", c.message});
}

}  // namespace mbdp
