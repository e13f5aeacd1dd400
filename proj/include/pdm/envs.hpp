#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace pdm {

// Discrete envs use `index`; continuous envs use `value`.
struct Action {
  int index = 0;
  std::vector<double> value;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual std::string name() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual bool discrete() const = 0;
  virtual std::size_t num_actions() const = 0;  // 0 for continuous
  virtual std::size_t action_dim() const = 0;   // 0 for discrete
  virtual std::size_t horizon() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Action& action) = 0;
};

// Cart with a pole, force +-10 N, explicit Euler at dt = 0.02. Reward +1 per
// step; terminates at |x| > 2.4 or |theta| > 12 deg; truncates at 500 steps.
class CartPole final : public Env {
 public:
  std::string name() const override { return "cartpole"; }
  std::size_t obs_dim() const override { return 4; }
  bool discrete() const override { return true; }
  std::size_t num_actions() const override { return 2; }
  std::size_t action_dim() const override { return 0; }
  std::size_t horizon() const override { return 500; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;

 private:
  double x_ = 0, x_dot_ = 0, theta_ = 0, theta_dot_ = 0;
  std::size_t steps_ = 0;
  bool done_ = true;
};

// Two-link underactuated pendulum, torques {-1,0,+1}, RK4 at dt = 0.2.
// Reward -1 per step until the free end reaches height 1.0 above the pivot;
// truncates at 500 steps. Observation [cos t1, sin t1, cos t2, sin t2, w1, w2].
class Acrobot final : public Env {
 public:
  std::string name() const override { return "acrobot"; }
  std::size_t obs_dim() const override { return 6; }
  bool discrete() const override { return true; }
  std::size_t num_actions() const override { return 3; }
  std::size_t action_dim() const override { return 0; }
  std::size_t horizon() const override { return 500; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;

 private:
  double t1_ = 0, t2_ = 0, w1_ = 0, w2_ = 0;
  std::size_t steps_ = 0;
  bool done_ = true;
  std::vector<double> observation() const;
};

// Torque-controlled pendulum swing-up, semi-implicit Euler at dt = 0.05.
// Reward -(angle^2 + 0.1 w^2 + 0.001 u^2); truncates at 200 steps.
// Observation [cos theta, sin theta, theta_dot].
class PendulumSwingup final : public Env {
 public:
  std::string name() const override { return "pendulum"; }
  std::size_t obs_dim() const override { return 3; }
  bool discrete() const override { return false; }
  std::size_t num_actions() const override { return 0; }
  std::size_t action_dim() const override { return 1; }
  std::size_t horizon() const override { return 200; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;

  // one integrator update, exposed for direct dynamics checks
  static void dynamics_step(double& theta, double& theta_dot, double torque, double dt);

 private:
  double theta_ = 0, theta_dot_ = 0;
  std::size_t steps_ = 0;
  bool done_ = true;
};

std::unique_ptr<Env> make_env(const std::string& name);

}  // namespace pdm
