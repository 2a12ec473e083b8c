#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbdp/rng.hpp"
#include "mbdp/types.hpp"

namespace mbdp::envs {

/// Multiplicative physics perturbation: mass and friction scale factors.
/// (1, 1) reproduces the unperturbed environment bit-exactly.
struct PerturbationConfig {
  double c_mass = 1.0;
  double c_friction = 1.0;

  void validate() const {
    if (!(c_mass >= 0.5 && c_mass <= 1.5))
      throw std::invalid_argument("PerturbationConfig: c_mass must be in [0.5, 1.5]");
    if (!(c_friction >= 0.5 && c_friction <= 1.5))
      throw std::invalid_argument("PerturbationConfig: c_friction must be in [0.5, 1.5]");
  }
};

struct ActionBox {
  Vector low, high;

  Vector clip(const Vector& a) const {
    return a.cwiseMax(low).cwiseMin(high);
  }
  bool contains(const Vector& a, double tol = 1e-12) const {
    return (a.array() >= low.array() - tol).all() && (a.array() <= high.array() + tol).all();
  }
};

/// Raised when integration produces a non-finite state.
struct PhysicsBlowup : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Toy continuous-control environment. Dynamics and reward are deterministic
/// functions of (state, action); randomness enters only through the initial
/// state. Rewards satisfy |r(s, a)| <= reward_sup() by construction, the
/// bound the discrepancy formulas are evaluated with. One instance is owned
/// by one rollout worker; clone() for parallel evaluation grids.
class ContinuousEnv {
 public:
  virtual ~ContinuousEnv() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual const ActionBox& action_box() const = 0;
  virtual double reward_sup() const = 0;
  virtual int horizon() const = 0;

  virtual Vector initial_state(RngStream& rng) const = 0;
  /// Reward of taking (clipped) action a in state s. Known to the planner;
  /// model rollouts reuse it on predicted states.
  virtual double reward(const Vector& s, const Vector& a) const = 0;
  /// One integration step from s under (clipped) action a.
  virtual Vector next_state(const Vector& s, const Vector& a) const = 0;
  virtual bool is_terminal(const Vector& /*s*/) const { return false; }

  virtual std::unique_ptr<ContinuousEnv> clone() const = 0;
  /// New instance with mass *= c_mass and friction *= c_friction relative to
  /// this instance; everything else identical. Pure: `this` is untouched.
  virtual std::unique_ptr<ContinuousEnv> perturbed(const PerturbationConfig& p) const = 0;

  // --- episodic interface ---
  void reset(RngStream& rng) {
    state_ = initial_state(rng);
    t_ = 0;
    started_ = true;
  }
  void set_state(const Vector& s) {
    if (s.size() != state_dim()) throw std::invalid_argument("set_state: dimension mismatch");
    state_ = s;
    t_ = 0;
    started_ = true;
  }
  const Vector& state() const {
    if (!started_) throw std::logic_error("ContinuousEnv: reset() before reading state");
    return state_;
  }
  int steps_in_episode() const { return t_; }
  bool episode_done() const {
    return !started_ || t_ >= horizon() || is_terminal(state_);
  }

  /// Applies one step from the current state. Throws std::logic_error at a
  /// finished episode, std::invalid_argument on a non-finite action and
  /// PhysicsBlowup when integration leaves the finite range.
  Transition step(const Vector& action) {
    if (episode_done()) throw std::logic_error("ContinuousEnv::step: episode is done, reset first");
    if (action.size() != action_dim())
      throw std::invalid_argument("ContinuousEnv::step: action dimension mismatch");
    if (!action.allFinite()) throw std::invalid_argument("ContinuousEnv::step: non-finite action");
    const Vector a = action_box().clip(action);
    const double r = reward(state_, a);
    Vector ns = next_state(state_, a);
    if (!ns.allFinite())
      throw PhysicsBlowup(name() + ": non-finite state after step " + std::to_string(t_));
    Transition tr{state_, a, r, ns, is_terminal(ns)};
    state_ = std::move(ns);
    ++t_;
    return tr;
  }

 protected:
  Vector state_;
  int t_ = 0;
  bool started_ = false;
};

/// Known environments: "pendulum", "pointmass", "cartpole".
std::unique_ptr<ContinuousEnv> make_env(const std::string& name,
                                        const PerturbationConfig& p = {});
std::vector<std::string> env_names();

}  // namespace mbdp::envs
