#include <cmath>
#include <numbers>

#include "mbdp/envs/env.hpp"

namespace mbdp::envs {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double th) {
  th = std::fmod(th + kPi, 2.0 * kPi);
  if (th < 0) th += 2.0 * kPi;
  return th - kPi;
}

/// Torque-limited pendulum swing-up. State (cos th, sin th, thdot) with
/// th = 0 upright. Reward is an affine rescale of the usual quadratic cost
/// into [-1, 1], so reward_sup is exactly 1.
class Pendulum final : public ContinuousEnv {
 public:
  Pendulum(double c_mass, double c_friction)
      : mass_(1.0 * c_mass), damping_(0.05 * c_friction) {
    box_.low = Vector::Constant(1, -max_torque_);
    box_.high = Vector::Constant(1, max_torque_);
  }

  std::string name() const override { return "pendulum"; }
  int state_dim() const override { return 3; }
  int action_dim() const override { return 1; }
  const ActionBox& action_box() const override { return box_; }
  double reward_sup() const override { return 1.0; }
  int horizon() const override { return 200; }

  Vector initial_state(RngStream& rng) const override {
    const double th = rng.uniform(-kPi, kPi);
    const double thdot = rng.uniform(-1.0, 1.0);
    return pack(th, thdot);
  }

  double reward(const Vector& s, const Vector& a) const override {
    const double th = std::atan2(s(1), s(0));
    const double thdot = s(2);
    const double u = std::clamp(a(0), -max_torque_, max_torque_);
    const double cost = th * th + 0.1 * thdot * thdot + 0.001 * u * u;
    return 1.0 - 2.0 * cost / max_cost();
  }

  Vector next_state(const Vector& s, const Vector& a) const override {
    const double th = std::atan2(s(1), s(0));
    const double thdot = s(2);
    const double u = std::clamp(a(0), -max_torque_, max_torque_);
    // Rod pivoting at one end; gravity destabilizes upright, damping opposes
    // angular velocity. Semi-implicit Euler.
    const double inertia = mass_ * length_ * length_ / 3.0;
    const double thacc =
        (1.5 * gravity_ / length_) * std::sin(th) + (u - damping_ * thdot) / inertia;
    double new_thdot = std::clamp(thdot + thacc * dt_, -max_speed_, max_speed_);
    double new_th = wrap_angle(th + new_thdot * dt_);
    return pack(new_th, new_thdot);
  }

  std::unique_ptr<ContinuousEnv> clone() const override {
    return std::make_unique<Pendulum>(*this);
  }
  std::unique_ptr<ContinuousEnv> perturbed(const PerturbationConfig& p) const override {
    p.validate();
    auto out = std::make_unique<Pendulum>(*this);
    out->mass_ *= p.c_mass;
    out->damping_ *= p.c_friction;
    out->started_ = false;
    return out;
  }

 private:
  Vector pack(double th, double thdot) const {
    Vector s(3);
    s << std::cos(th), std::sin(th), thdot;
    return s;
  }
  double max_cost() const {
    return kPi * kPi + 0.1 * max_speed_ * max_speed_ + 0.001 * max_torque_ * max_torque_;
  }

  double mass_;
  double damping_;
  double length_ = 1.0;
  double gravity_ = 9.81;
  double dt_ = 0.05;
  double max_torque_ = 2.0;
  double max_speed_ = 8.0;
  ActionBox box_;
};

/// Planar point mass pushed toward the origin. State (x, y, vx, vy), action
/// is a force in [-1, 1]^2. Reward decays linearly with distance to goal,
/// clipped into [-1, 1].
class PointMass final : public ContinuousEnv {
 public:
  PointMass(double c_mass, double c_friction)
      : mass_(1.0 * c_mass), damping_(0.1 * c_friction) {
    box_.low = Vector::Constant(2, -1.0);
    box_.high = Vector::Constant(2, 1.0);
  }

  std::string name() const override { return "pointmass"; }
  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  const ActionBox& action_box() const override { return box_; }
  double reward_sup() const override { return 1.0; }
  int horizon() const override { return 100; }

  Vector initial_state(RngStream& rng) const override {
    Vector s(4);
    s << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), 0.0, 0.0;
    return s;
  }

  double reward(const Vector& s, const Vector& /*a*/) const override {
    const double dist = std::hypot(s(0), s(1));
    return 1.0 - 2.0 * std::min(dist / 4.0, 1.0);
  }

  Vector next_state(const Vector& s, const Vector& a) const override {
    const Vector force = box_.clip(a);
    Vector out(4);
    // v' = v + dt (F - c v) / m ; p' = p + dt v'
    out(2) = s(2) + dt_ * (force(0) - damping_ * s(2)) / mass_;
    out(3) = s(3) + dt_ * (force(1) - damping_ * s(3)) / mass_;
    out(0) = s(0) + dt_ * out(2);
    out(1) = s(1) + dt_ * out(3);
    return out;
  }

  std::unique_ptr<ContinuousEnv> clone() const override {
    return std::make_unique<PointMass>(*this);
  }
  std::unique_ptr<ContinuousEnv> perturbed(const PerturbationConfig& p) const override {
    p.validate();
    auto out = std::make_unique<PointMass>(*this);
    out->mass_ *= p.c_mass;
    out->damping_ *= p.c_friction;
    out->started_ = false;
    return out;
  }

 private:
  double mass_;
  double damping_;
  double dt_ = 0.1;
  ActionBox box_;
};

/// Cart-pole balance with a continuous force. State (x, xdot, th, thdot),
/// th = 0 upright; episodes terminate when the cart or pole leaves its
/// bounds. c_mass scales the pole, c_friction a cart damping term.
class CartPole final : public ContinuousEnv {
 public:
  CartPole(double c_mass, double c_friction)
      : pole_mass_(0.1 * c_mass), damping_(0.1 * c_friction) {
    box_.low = Vector::Constant(1, -1.0);
    box_.high = Vector::Constant(1, 1.0);
  }

  std::string name() const override { return "cartpole"; }
  int state_dim() const override { return 4; }
  int action_dim() const override { return 1; }
  const ActionBox& action_box() const override { return box_; }
  double reward_sup() const override { return 1.0; }
  int horizon() const override { return 200; }

  Vector initial_state(RngStream& rng) const override {
    return rng.uniform_vector(4, -0.05, 0.05);
  }

  double reward(const Vector& s, const Vector& /*a*/) const override {
    const double r =
        1.0 - 0.8 * std::abs(s(2)) / theta_max_ - 0.2 * std::abs(s(0)) / x_max_;
    return std::clamp(r, -1.0, 1.0);
  }

  Vector next_state(const Vector& s, const Vector& a) const override {
    const double force = force_scale_ * std::clamp(a(0), -1.0, 1.0);
    const double x = s(0), xdot = s(1), th = s(2), thdot = s(3);
    const double total_mass = cart_mass_ + pole_mass_;
    const double cos_th = std::cos(th), sin_th = std::sin(th);
    const double temp =
        (force + pole_mass_ * half_length_ * thdot * thdot * sin_th - damping_ * xdot) /
        total_mass;
    const double thacc =
        (gravity_ * sin_th - cos_th * temp) /
        (half_length_ * (4.0 / 3.0 - pole_mass_ * cos_th * cos_th / total_mass));
    const double xacc = temp - pole_mass_ * half_length_ * thacc * cos_th / total_mass;
    Vector out(4);
    out(1) = xdot + dt_ * xacc;
    out(0) = x + dt_ * out(1);
    out(3) = thdot + dt_ * thacc;
    out(2) = th + dt_ * out(3);
    return out;
  }

  bool is_terminal(const Vector& s) const override {
    return std::abs(s(0)) > x_max_ || std::abs(s(2)) > theta_max_;
  }

  std::unique_ptr<ContinuousEnv> clone() const override {
    return std::make_unique<CartPole>(*this);
  }
  std::unique_ptr<ContinuousEnv> perturbed(const PerturbationConfig& p) const override {
    p.validate();
    auto out = std::make_unique<CartPole>(*this);
    out->pole_mass_ *= p.c_mass;
    out->damping_ *= p.c_friction;
    out->started_ = false;
    return out;
  }

 private:
  double pole_mass_;
  double damping_;
  double cart_mass_ = 1.0;
  double half_length_ = 0.5;
  double gravity_ = 9.8;
  double force_scale_ = 10.0;
  double dt_ = 0.02;
  double x_max_ = 2.4;
  double theta_max_ = 0.21;
  ActionBox box_;
};

}  // namespace

std::unique_ptr<ContinuousEnv> make_env(const std::string& name, const PerturbationConfig& p) {
  p.validate();
  if (name == "pendulum") return std::make_unique<Pendulum>(p.c_mass, p.c_friction);
  if (name == "pointmass") return std::make_unique<PointMass>(p.c_mass, p.c_friction);
  if (name == "cartpole") return std::make_unique<CartPole>(p.c_mass, p.c_friction);
  throw std::invalid_argument("make_env: unknown environment '" + name +
                              "' (known: pendulum, pointmass, cartpole)");
}

std::vector<std::string> env_names() { return {"pendulum", "pointmass", "cartpole"}; }

}  // namespace mbdp::envs
