#include "pdm/envs.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pdm {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_pi(double x) {
  x = std::fmod(x + kPi, 2.0 * kPi);
  if (x < 0.0) x += 2.0 * kPi;
  return x - kPi;
}

void require_action(bool ok, const char* env) {
  if (!ok) throw std::invalid_argument(std::string(env) + ": action out of space");
}

std::vector<double> uniform_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace

// ---------------------------------------------------------------- CartPole

std::vector<double> CartPole::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<double> s = uniform_vec(rng, 4, -0.05, 0.05);
  x_ = s[0];
  x_dot_ = s[1];
  theta_ = s[2];
  theta_dot_ = s[3];
  steps_ = 0;
  done_ = false;
  return {x_, x_dot_, theta_, theta_dot_};
}

StepResult CartPole::step(const Action& action) {
  require_action(action.index == 0 || action.index == 1, "cartpole");
  if (done_) throw std::logic_error("cartpole: step on finished episode");

  constexpr double gravity = 9.8;
  constexpr double mass_cart = 1.0;
  constexpr double mass_pole = 0.1;
  constexpr double total_mass = mass_cart + mass_pole;
  constexpr double half_length = 0.5;
  constexpr double polemass_length = mass_pole * half_length;
  constexpr double force_mag = 10.0;
  constexpr double dt = 0.02;
  constexpr double theta_limit = 12.0 * 2.0 * kPi / 360.0;
  constexpr double x_limit = 2.4;

  const double force = action.index == 1 ? force_mag : -force_mag;
  const double cos_t = std::cos(theta_);
  const double sin_t = std::sin(theta_);
  const double temp = (force + polemass_length * theta_dot_ * theta_dot_ * sin_t) / total_mass;
  const double theta_acc = (gravity * sin_t - cos_t * temp) /
                           (half_length * (4.0 / 3.0 - mass_pole * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  x_ += dt * x_dot_;
  x_dot_ += dt * x_acc;
  theta_ += dt * theta_dot_;
  theta_dot_ += dt * theta_acc;
  ++steps_;

  StepResult r;
  r.observation = {x_, x_dot_, theta_, theta_dot_};
  r.reward = 1.0;
  r.terminated = std::abs(x_) > x_limit || std::abs(theta_) > theta_limit;
  r.truncated = !r.terminated && steps_ >= horizon();
  done_ = r.terminated || r.truncated;
  return r;
}

// ----------------------------------------------------------------- Acrobot

std::vector<double> Acrobot::observation() const {
  return {std::cos(t1_), std::sin(t1_), std::cos(t2_), std::sin(t2_), w1_, w2_};
}

std::vector<double> Acrobot::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<double> s = uniform_vec(rng, 4, -0.1, 0.1);
  t1_ = s[0];
  t2_ = s[1];
  w1_ = s[2];
  w2_ = s[3];
  steps_ = 0;
  done_ = false;
  return observation();
}

namespace {

// two-link dynamics, torque applied at the second joint
void acrobot_derivs(const double s[4], double torque, double ds[4]) {
  constexpr double m1 = 1.0, m2 = 1.0;
  constexpr double l1 = 1.0;
  constexpr double lc1 = 0.5, lc2 = 0.5;
  constexpr double i1 = 1.0, i2 = 1.0;
  constexpr double g = 9.8;

  const double t1 = s[0], t2 = s[1], w1 = s[2], w2 = s[3];
  const double d1 =
      m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * std::cos(t2)) + i1 + i2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(t2)) + i2;
  const double phi2 = m2 * lc2 * g * std::cos(t1 + t2 - kPi / 2.0);
  const double phi1 = -m2 * l1 * lc2 * w2 * w2 * std::sin(t2) -
                      2.0 * m2 * l1 * lc2 * w2 * w1 * std::sin(t2) +
                      (m1 * lc1 + m2 * l1) * g * std::cos(t1 - kPi / 2.0) + phi2;
  const double a2 =
      (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * w1 * w1 * std::sin(t2) - phi2) /
      (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
  const double a1 = -(d2 * a2 + phi1) / d1;
  ds[0] = w1;
  ds[1] = w2;
  ds[2] = a1;
  ds[3] = a2;
}

}  // namespace

StepResult Acrobot::step(const Action& action) {
  require_action(action.index >= 0 && action.index <= 2, "acrobot");
  if (done_) throw std::logic_error("acrobot: step on finished episode");

  const double torque = static_cast<double>(action.index - 1);
  constexpr double dt = 0.2;

  double s[4] = {t1_, t2_, w1_, w2_};
  double k1[4], k2[4], k3[4], k4[4], tmp[4];
  acrobot_derivs(s, torque, k1);
  for (int i = 0; i < 4; ++i) tmp[i] = s[i] + 0.5 * dt * k1[i];
  acrobot_derivs(tmp, torque, k2);
  for (int i = 0; i < 4; ++i) tmp[i] = s[i] + 0.5 * dt * k2[i];
  acrobot_derivs(tmp, torque, k3);
  for (int i = 0; i < 4; ++i) tmp[i] = s[i] + dt * k3[i];
  acrobot_derivs(tmp, torque, k4);
  for (int i = 0; i < 4; ++i) s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

  t1_ = wrap_pi(s[0]);
  t2_ = wrap_pi(s[1]);
  w1_ = std::clamp(s[2], -4.0 * kPi, 4.0 * kPi);
  w2_ = std::clamp(s[3], -9.0 * kPi, 9.0 * kPi);
  ++steps_;

  StepResult r;
  r.observation = observation();
  // free-end height above the pivot
  r.terminated = -std::cos(t1_) - std::cos(t2_ + t1_) > 1.0;
  r.reward = r.terminated ? 0.0 : -1.0;
  r.truncated = !r.terminated && steps_ >= horizon();
  done_ = r.terminated || r.truncated;
  return r;
}

// -------------------------------------------------------- PendulumSwingup

void PendulumSwingup::dynamics_step(double& theta, double& theta_dot, double torque, double dt) {
  constexpr double g = 10.0, m = 1.0, l = 1.0;
  const double acc =
      3.0 * g / (2.0 * l) * std::sin(theta) + 3.0 / (m * l * l) * torque;
  theta_dot += acc * dt;
  theta += theta_dot * dt;
}

std::vector<double> PendulumSwingup::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  theta_ = uniform_vec(rng, 1, -kPi, kPi)[0];
  theta_dot_ = uniform_vec(rng, 1, -1.0, 1.0)[0];
  steps_ = 0;
  done_ = false;
  return {std::cos(theta_), std::sin(theta_), theta_dot_};
}

StepResult PendulumSwingup::step(const Action& action) {
  require_action(action.value.size() == 1, "pendulum");
  if (done_) throw std::logic_error("pendulum: step on finished episode");

  constexpr double dt = 0.05;
  constexpr double max_torque = 2.0;
  constexpr double max_speed = 8.0;
  const double u = std::clamp(action.value[0], -max_torque, max_torque);

  const double angle = wrap_pi(theta_);
  const double cost = angle * angle + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u;

  dynamics_step(theta_, theta_dot_, u, dt);
  theta_dot_ = std::clamp(theta_dot_, -max_speed, max_speed);
  ++steps_;

  StepResult r;
  r.observation = {std::cos(theta_), std::sin(theta_), theta_dot_};
  r.reward = -cost;
  r.terminated = false;
  r.truncated = steps_ >= horizon();
  done_ = r.truncated;
  return r;
}

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "cartpole") return std::make_unique<CartPole>();
  if (name == "acrobot") return std::make_unique<Acrobot>();
  if (name == "pendulum") return std::make_unique<PendulumSwingup>();
  throw std::invalid_argument("make_env: unknown environment '" + name + "'");
}

}  // namespace pdm
