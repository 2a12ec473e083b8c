#include "mbdp/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mbdp/nn/gaussian.hpp"
#include "mbdp/parallel.hpp"

namespace mbdp {

namespace {

std::vector<int> model_widths(int state_dim, int action_dim, const std::vector<int>& hidden) {
  std::vector<int> widths;
  widths.push_back(state_dim + action_dim);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(2 * state_dim);
  return widths;
}

Matrix stack_input(const Vector& s, const Vector& a) {
  Matrix x(s.size() + a.size(), 1);
  x.col(0).head(s.size()) = s;
  x.col(0).tail(a.size()) = a;
  return x;
}

}  // namespace

DynamicsModel::DynamicsModel(int state_dim_, int action_dim_, const std::vector<int>& hidden,
                             double lr, int id_, RngStream& init_rng)
    : net(nn::Mlp::random_init(model_widths(state_dim_, action_dim_, hidden), init_rng)),
      opt(static_cast<Eigen::Index>(net.param_count()), lr),
      id(id_),
      state_dim(state_dim_),
      action_dim(action_dim_) {}

Matrix DynamicsModel::mean_next_state(const Matrix& states, const Matrix& actions) const {
  Matrix x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  const nn::GaussianSplit g = nn::split_gaussian(net.forward(x));
  return states + g.mu;
}

EnsembleState make_ensemble(int n_members, int state_dim, int action_dim,
                            const std::vector<int>& hidden, double lr, std::uint64_t seed) {
  if (n_members < 1) throw std::invalid_argument("make_ensemble: need at least one member");
  EnsembleState ens;
  ens.state_dim = state_dim;
  ens.action_dim = action_dim;
  ens.members.reserve(n_members);
  for (int i = 0; i < n_members; ++i) {
    RngStream init_rng(derive_seed(seed, 0xE15, i));
    ens.members.emplace_back(state_dim, action_dim, hidden, lr, i, init_rng);
  }
  // Until biases exist every member is eligible for rollouts.
  ens.retained.resize(n_members);
  std::iota(ens.retained.begin(), ens.retained.end(), 0);
  return ens;
}

DataSplit DataSplit::make(std::size_t n, double validation_fraction, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("DataSplit: need at least two samples");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("DataSplit: validation_fraction must be in (0, 1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  RngStream rng(seed);
  for (std::size_t i = n; i-- > 1;)
    std::swap(idx[i], idx[static_cast<std::size_t>(rng.integer(i + 1))]);
  std::size_t n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  DataSplit split;
  split.validation.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  return split;
}

namespace {

struct Batch {
  Matrix input;   // (d_s + d_a) x n
  Matrix target;  // d_s x n, next_state - state
};

Batch gather(const ReplayBuffer& buf, std::span<const std::size_t> indices) {
  const Transition& first = buf.at(indices[0]);
  const Eigen::Index ds = first.state.size();
  const Eigen::Index da = first.action.size();
  Batch b;
  b.input.resize(ds + da, static_cast<Eigen::Index>(indices.size()));
  b.target.resize(ds, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const Transition& t = buf.at(indices[j]);
    b.input.col(static_cast<Eigen::Index>(j)).head(ds) = t.state;
    b.input.col(static_cast<Eigen::Index>(j)).tail(da) = t.action;
    b.target.col(static_cast<Eigen::Index>(j)) = t.next_state - t.state;
  }
  return b;
}

double validation_nll(const DynamicsModel& m, const ReplayBuffer& buf,
                      std::span<const std::size_t> validation) {
  const Batch vb = gather(buf, validation);
  return nn::gaussian_nll(m.net.forward(vb.input), vb.target);
}

}  // namespace

std::vector<MemberTrainStats> train_ensemble(EnsembleState& ens, const ReplayBuffer& d_env,
                                             const DataSplit& split, int steps, int batch_size,
                                             std::uint64_t seed, int workers, int min_data) {
  if (d_env.size() < static_cast<std::size_t>(min_data))
    throw std::runtime_error("train_ensemble: need at least " + std::to_string(min_data) +
                             " transitions, have " + std::to_string(d_env.size()));
  if (split.train.empty() || split.validation.empty())
    throw std::invalid_argument("train_ensemble: empty split");
  if (steps < 0) throw std::invalid_argument("train_ensemble: steps must be >= 0");

  std::vector<MemberTrainStats> stats(ens.members.size());
  parallel_for(ens.members.size(), workers, [&](std::size_t mi) {
    DynamicsModel& m = ens.members[mi];
    MemberTrainStats& st = stats[mi];
    st.id = m.id;
    if (steps == 0) {
      st.validation_nll = validation_nll(m, d_env, split.validation);
      return;
    }
    // Bootstrap resample of the training split, fixed for this call.
    RngStream boot_rng(derive_seed(seed, 0xB007, static_cast<std::uint64_t>(m.id)));
    std::vector<std::size_t> boot(split.train.size());
    for (auto& v : boot)
      v = split.train[static_cast<std::size_t>(boot_rng.integer(split.train.size()))];

    RngStream batch_rng(derive_seed(seed, 0xBA7C, static_cast<std::uint64_t>(m.id)));
    double nll_sum = 0.0;
    m.bias_stale = true;
    for (int step = 0; step < steps; ++step) {
      std::vector<std::size_t> idx(static_cast<std::size_t>(batch_size));
      for (auto& v : idx) v = boot[static_cast<std::size_t>(batch_rng.integer(boot.size()))];
      const Batch b = gather(d_env, idx);
      try {
        nn::Mlp::Trace trace;
        const Matrix raw = m.net.forward(b.input, trace);
        Matrix grad_raw;
        const double loss = nn::gaussian_nll(raw, b.target, &grad_raw);
        if (!std::isfinite(loss)) throw std::runtime_error("non-finite loss");
        nn::Mlp grads(m.net.widths());
        m.net.backward(grad_raw, trace, grads);
        Vector theta = m.net.flatten();
        m.opt.step(theta, grads.flatten());
        m.net.unflatten(theta);
        nll_sum += loss;
        ++st.steps_done;
      } catch (const std::exception& e) {
        st.aborted = true;
        st.abort_reason = e.what();
        break;
      }
    }
    st.train_nll = st.steps_done > 0 ? nll_sum / st.steps_done : 0.0;
    st.validation_nll = validation_nll(m, d_env, split.validation);
  });
  return stats;
}

double compute_bias(DynamicsModel& model, std::span<const Transition> validation) {
  if (validation.empty()) throw std::invalid_argument("compute_bias: empty validation set");
  const Eigen::Index ds = validation[0].state.size();
  const Eigen::Index da = validation[0].action.size();
  Matrix states(ds, static_cast<Eigen::Index>(validation.size()));
  Matrix actions(da, static_cast<Eigen::Index>(validation.size()));
  Matrix next(ds, static_cast<Eigen::Index>(validation.size()));
  for (std::size_t j = 0; j < validation.size(); ++j) {
    states.col(static_cast<Eigen::Index>(j)) = validation[j].state;
    actions.col(static_cast<Eigen::Index>(j)) = validation[j].action;
    next.col(static_cast<Eigen::Index>(j)) = validation[j].next_state;
  }
  const Matrix predicted = model.mean_next_state(states, actions);
  const double bias = (predicted - next).colwise().norm().mean();
  if (!std::isfinite(bias) || bias < 0.0)
    throw std::runtime_error("compute_bias: non-finite bias");
  model.bias = bias;
  model.bias_stale = false;
  return bias;
}

void model_dropout(EnsembleState& ens, double beta) {
  if (!(beta >= 0.0 && beta < 1.0))
    throw std::invalid_argument("model_dropout: beta must be in [0, 1)");
  if (ens.members.empty()) throw std::invalid_argument("model_dropout: empty ensemble");
  for (const DynamicsModel& m : ens.members)
    if (m.bias_stale)
      throw std::runtime_error("model_dropout: member " + std::to_string(m.id) +
                               " has a stale bias; recompute before selecting");
  std::vector<int> order(ens.members.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (ens.members[a].bias != ens.members[b].bias)
      return ens.members[a].bias < ens.members[b].bias;
    return ens.members[a].id < ens.members[b].id;
  });
  const long keep = std::clamp<long>(
      ceil_count((1.0 - beta) * static_cast<double>(ens.members.size())), 1,
      static_cast<long>(ens.members.size()));
  ens.retained.assign(order.begin(), order.begin() + keep);
  std::sort(ens.retained.begin(), ens.retained.end());
}

Vector ensemble_predict(const EnsembleState& ens, const Vector& state, const Vector& action,
                        RngStream& rng, PredictMode mode) {
  if (ens.retained.empty()) throw std::runtime_error("ensemble_predict: no retained members");
  const int pick = ens.retained[static_cast<std::size_t>(rng.integer(ens.retained.size()))];
  const DynamicsModel& m = ens.members[static_cast<std::size_t>(pick)];
  const nn::GaussianSplit g = nn::split_gaussian(m.net.forward(stack_input(state, action)));
  Vector next = state + g.mu.col(0);
  if (mode == PredictMode::kSample)
    next += (g.sigma.col(0).array() * rng.normal_vector(g.sigma.rows()).array()).matrix();
  return next;
}

}  // namespace mbdp
