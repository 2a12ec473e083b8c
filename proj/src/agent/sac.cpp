#include "mbdp/agent/sac.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mbdp {

namespace {

std::vector<int> with_io(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w;
  w.push_back(in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

Matrix stack_sa(const Matrix& states, const Matrix& actions) {
  Matrix x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

}  // namespace

SquashedSample squash_sample(const nn::GaussianSplit& g, const Matrix& eps,
                             const envs::ActionBox& box) {
  if (eps.rows() != g.mu.rows() || eps.cols() != g.mu.cols())
    throw std::invalid_argument("squash_sample: eps shape mismatch");
  const Vector center = 0.5 * (box.high + box.low);
  const Vector half = 0.5 * (box.high - box.low);
  SquashedSample out;
  out.u = g.mu + (g.sigma.array() * eps.array()).matrix();
  const Eigen::ArrayXXd t = out.u.array().tanh();
  out.actions = ((t.colwise() * half.array()).colwise() + center.array()).matrix();
  // log pi(a) = sum_d [ logN(u; mu, sigma) - log(half_d (1 - tanh^2 u_d)) ]
  // with log(1 - tanh^2 u) = log 4 - 2|u| - 2 log1p(exp(-2|u|)), stable for
  // saturated u.
  const double c = 0.5 * std::log(2.0 * std::numbers::pi);
  Eigen::ArrayXXd per_dim = -0.5 * eps.array().square() - g.log_std.array() - c;
  per_dim -= out.u.array().unaryExpr([](double u) {
    const double au = std::abs(u);
    return std::log(4.0) - 2.0 * au - 2.0 * std::log1p(std::exp(-2.0 * au));
  });
  per_dim.colwise() -= half.array().log();
  out.log_prob = per_dim.colwise().sum();
  return out;
}

double critic_loss(const nn::Mlp& critic, const Matrix& input, const Eigen::RowVectorXd& targets,
                   nn::Mlp* grads) {
  nn::Mlp::Trace trace;
  const Matrix q = critic.forward(input, trace);
  if (q.rows() != 1) throw std::invalid_argument("critic_loss: critic must have one output");
  if (targets.size() != q.cols()) throw std::invalid_argument("critic_loss: target size mismatch");
  const Eigen::RowVectorXd diff = q.row(0) - targets;
  const double loss = diff.array().square().mean();
  if (grads != nullptr) {
    const Matrix grad_out = (2.0 / static_cast<double>(q.cols())) * diff;
    critic.backward(grad_out, trace, *grads);
  }
  return loss;
}

double actor_loss(const nn::Mlp& actor, const nn::Mlp& critic1, const nn::Mlp& critic2,
                  const Matrix& states, const Matrix& eps, const envs::ActionBox& box,
                  double entropy_weight, nn::Mlp* actor_grads) {
  const Eigen::Index n = states.cols();
  const Eigen::Index da = eps.rows();
  nn::Mlp::Trace actor_trace;
  const Matrix raw = actor.forward(states, actor_trace);
  const nn::GaussianSplit g = nn::split_gaussian(raw);
  const SquashedSample sample = squash_sample(g, eps, box);

  nn::Mlp::Trace trace1, trace2;
  const Matrix input = stack_sa(states, sample.actions);
  const Matrix q1 = critic1.forward(input, trace1);
  const Matrix q2 = critic2.forward(input, trace2);

  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::RowVectorXd win1 = Eigen::RowVectorXd::Zero(n);
  Eigen::RowVectorXd win2 = Eigen::RowVectorXd::Zero(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const bool first = q1(0, b) <= q2(0, b);
    loss += entropy_weight * sample.log_prob(b) - (first ? q1(0, b) : q2(0, b));
    (first ? win1 : win2)(b) = -inv_n;  // d loss / d q at the winning critic
  }
  loss *= inv_n;

  if (actor_grads != nullptr) {
    // Critic path: dL/da, discarding critic parameter gradients.
    nn::Mlp scratch1(critic1.widths()), scratch2(critic2.widths());
    const Matrix dx1 = critic1.backward(win1, trace1, scratch1);
    const Matrix dx2 = critic2.backward(win2, trace2, scratch2);
    Matrix d_action = dx1.bottomRows(da) + dx2.bottomRows(da);

    const Vector half = 0.5 * (box.high - box.low);
    const Eigen::ArrayXXd t = sample.u.array().tanh();
    const Eigen::ArrayXXd dadu = (1.0 - t.square()).colwise() * half.array();
    // d log pi / du = 2 tanh(u); the Gaussian term cancels at the sampled u.
    Eigen::ArrayXXd du =
        d_action.array() * dadu + (entropy_weight * inv_n) * 2.0 * t;

    Matrix grad_raw(raw.rows(), n);
    grad_raw.topRows(da) = du.matrix();  // du/dmu = 1
    // du/dlog_std = sigma * eps; plus the explicit -1 from -log sigma.
    const Eigen::ArrayXXd raw_ls = raw.bottomRows(da).array();
    const Eigen::ArrayXXd active =
        ((raw_ls > nn::kLogStdMin) && (raw_ls < nn::kLogStdMax)).cast<double>();
    grad_raw.bottomRows(da) =
        ((du * g.sigma.array() * eps.array() - entropy_weight * inv_n) * active).matrix();
    actor.backward(grad_raw, actor_trace, *actor_grads);
  }
  return loss;
}

SacAgent::SacAgent(int state_dim, const envs::ActionBox& box, const SacConfig& cfg,
                   std::uint64_t seed)
    : cfg_(cfg),
      box_(box),
      state_dim_(state_dim),
      action_dim_(static_cast<int>(box.low.size())),
      actor_([&] {
        RngStream rng(derive_seed(seed, 0xAC7));
        return nn::Mlp::random_init(with_io(state_dim, cfg.hidden, 2 * action_dim_), rng);
      }()),
      critic1_([&] {
        RngStream rng(derive_seed(seed, 0xC1));
        return nn::Mlp::random_init(with_io(state_dim + action_dim_, cfg.hidden, 1), rng);
      }()),
      critic2_([&] {
        RngStream rng(derive_seed(seed, 0xC2));
        return nn::Mlp::random_init(with_io(state_dim + action_dim_, cfg.hidden, 1), rng);
      }()),
      target1_(critic1_),
      target2_(critic2_),
      actor_opt_(static_cast<Eigen::Index>(actor_.param_count()), cfg.actor_lr),
      critic1_opt_(static_cast<Eigen::Index>(critic1_.param_count()), cfg.critic_lr),
      critic2_opt_(static_cast<Eigen::Index>(critic2_.param_count()), cfg.critic_lr) {}

Vector SacAgent::act_stochastic(const Vector& state, RngStream& rng) const {
  const nn::GaussianSplit g = nn::split_gaussian(actor_.forward(state));
  const Matrix eps = rng.normal_matrix(action_dim_, 1);
  return squash_sample(g, eps, box_).actions.col(0);
}

Vector SacAgent::act_mean(const Vector& state) const {
  const nn::GaussianSplit g = nn::split_gaussian(actor_.forward(state));
  const Vector center = 0.5 * (box_.high + box_.low);
  const Vector half = 0.5 * (box_.high - box_.low);
  return center + (half.array() * g.mu.col(0).array().tanh()).matrix();
}

PolicyFn SacAgent::policy(bool stochastic) const {
  if (stochastic)
    return [this](const Vector& s, RngStream& rng) { return act_stochastic(s, rng); };
  return [this](const Vector& s, RngStream&) { return act_mean(s); };
}

double SacAgent::state_value(const Vector& state) const {
  const Vector a = act_mean(state);
  Matrix input(state.size() + a.size(), 1);
  input.col(0).head(state.size()) = state;
  input.col(0).tail(a.size()) = a;
  return std::min(critic1_.forward(input)(0, 0), critic2_.forward(input)(0, 0));
}

SacAgent::UpdateStats SacAgent::update_once(const std::vector<Transition>& batch, RngStream& rng) {
  if (batch.empty()) throw std::invalid_argument("SacAgent::update_once: empty batch");
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  Matrix states(state_dim_, n), actions(action_dim_, n), next_states(state_dim_, n);
  Eigen::RowVectorXd rewards(n), not_done(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const Transition& t = batch[static_cast<std::size_t>(b)];
    states.col(b) = t.state;
    actions.col(b) = t.action;
    next_states.col(b) = t.next_state;
    rewards(b) = t.reward;
    not_done(b) = t.terminal ? 0.0 : 1.0;
  }

  // Bootstrap target from the target critics at a fresh next action.
  const nn::GaussianSplit g_next = nn::split_gaussian(actor_.forward(next_states));
  const Matrix eps_next = rng.normal_matrix(action_dim_, n);
  const SquashedSample next_sample = squash_sample(g_next, eps_next, box_);
  const Matrix next_input = stack_sa(next_states, next_sample.actions);
  const Eigen::RowVectorXd q_next =
      target1_.forward(next_input).row(0).cwiseMin(target2_.forward(next_input).row(0));
  const Eigen::RowVectorXd targets =
      rewards.array() +
      cfg_.gamma * not_done.array() *
          (q_next.array() - cfg_.entropy_weight * next_sample.log_prob.array());

  UpdateStats stats;
  const Matrix input = stack_sa(states, actions);
  {
    nn::Mlp grads(critic1_.widths());
    stats.critic1_loss = critic_loss(critic1_, input, targets, &grads);
    if (!std::isfinite(stats.critic1_loss))
      throw std::runtime_error("SacAgent: non-finite critic1 loss");
    Vector theta = critic1_.flatten();
    critic1_opt_.step(theta, grads.flatten());
    critic1_.unflatten(theta);
  }
  {
    nn::Mlp grads(critic2_.widths());
    stats.critic2_loss = critic_loss(critic2_, input, targets, &grads);
    if (!std::isfinite(stats.critic2_loss))
      throw std::runtime_error("SacAgent: non-finite critic2 loss");
    Vector theta = critic2_.flatten();
    critic2_opt_.step(theta, grads.flatten());
    critic2_.unflatten(theta);
  }
  {
    const Matrix eps = rng.normal_matrix(action_dim_, n);
    nn::Mlp grads(actor_.widths());
    stats.actor_loss =
        actor_loss(actor_, critic1_, critic2_, states, eps, box_, cfg_.entropy_weight, &grads);
    if (!std::isfinite(stats.actor_loss))
      throw std::runtime_error("SacAgent: non-finite actor loss");
    Vector theta = actor_.flatten();
    actor_opt_.step(theta, grads.flatten());
    actor_.unflatten(theta);
  }
  target1_.ema_toward(critic1_, cfg_.tau);
  target2_.ema_toward(critic2_, cfg_.tau);
  return stats;
}

SacAgent::UpdateStats SacAgent::policy_update(const ReplayBuffer& d_model, int n_updates,
                                              int batch_size, std::uint64_t seed) {
  if (n_updates < 0) throw std::invalid_argument("policy_update: n_updates must be >= 0");
  if (n_updates > 0 && d_model.size() < static_cast<std::size_t>(batch_size))
    throw std::runtime_error("policy_update: buffer smaller than batch size");
  UpdateStats last;
  for (int step = 0; step < n_updates; ++step) {
    const auto batch = d_model.sample(static_cast<std::size_t>(batch_size),
                                      derive_seed(seed, 0x5AC, static_cast<std::uint64_t>(step)));
    RngStream rng(derive_seed(seed, 0x01CE, static_cast<std::uint64_t>(step)));
    last = update_once(batch, rng);
  }
  return last;
}

void SacAgent::load_nets(const nn::Mlp& actor, const nn::Mlp& critic1, const nn::Mlp& critic2) {
  actor_ = actor;
  critic1_ = critic1;
  critic2_ = critic2;
  target1_ = critic1;
  target2_ = critic2;
}

}  // namespace mbdp
