// Model-free continuous-time actor-critic on observed (x, xdot, u) tuples.
// The critic advantage is the instantaneous cost plus the directional value
// change minus the discount term; the actor advantage is the quadratic form
// around the learned policy. Squared-residual loss, exact gradients in the
// stored GP means.
#pragma once

#include "modnav/env.hpp"
#include "modnav/gp.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace modnav::trainer {

using geom::Vec2;

struct CostParams {
  double lambda = 0.1;  // discount rate
  double qc = 0.0;      // constant running cost
};

struct TrainConfig {
  int epochs = 2000;
  int max_steps = 100;
  double dt = 0.05;
  double eta = 1e-2;
  double u_max = 1.0;
  double sigma_explore = 0.5;  // exploration noise std, defaults to 0.5 * u_max
  double w_term = 10.0;        // terminal anchoring weight
  std::uint64_t seed = 0;
};

struct ElementConfig {
  geom::Shape shape;
  env::MotionProfile motion;
  env::TrainingRange range;
  double lattice_spacing = 1.0;
  gp::KernelParams kernel;
};

double advantage_critic(const gp::GpModel& model, const CostParams& cost, const Vec2& x,
                        const Vec2& xdot, const Vec2& u);
double advantage_actor(const gp::GpModel& model, const Vec2& x, const Vec2& u);
// residual = advantage_actor - advantage_critic; loss = residual^2 / 2.
double sample_loss(const gp::GpModel& model, const CostParams& cost, const env::Sample& s);

struct Gradients {
  Eigen::VectorXd dv;
  gp::PointMatrix du;
};

// The factored form: gradients scale linearly in the residual delta.
Gradients gradients_from_parts(double delta, const gp::Weights& w, const Vec2& u_minus_ustar,
                               const Vec2& xdot, double lambda);
Gradients loss_gradients(const gp::GpModel& model, const CostParams& cost, const env::Sample& s);

// Gradient of the terminal penalty w_term/2 * V(x_term)^2 in the value means.
Eigen::VectorXd terminal_anchor_gradient(const gp::GpModel& model, const Vec2& x_term,
                                         double w_term);

// Learned policy plus Gaussian noise, rescaled into the control ball.
Vec2 exploration_policy(const gp::GpModel& model, const Vec2& x, double sigma, double u_max,
                        std::mt19937_64& rng);

// Full-batch variants over a frozen dataset (terminal samples excluded by
// the caller or skipped here by event).
double batch_loss(const gp::GpModel& model, const CostParams& cost,
                  std::span<const env::Sample> samples);
Gradients batch_gradients(const gp::GpModel& model, const CostParams& cost,
                          std::span<const env::Sample> samples);

struct EpochStats {
  int epoch = 0;
  double mean_abs_residual = 0.0;
  std::int64_t episodes_terminated_contact = 0;  // cumulative
};

struct TrainResult {
  gp::ElementModel model;
  std::vector<EpochStats> history;
  bool aborted = false;
  std::string diagnostic;
};

// One exploration rollout per epoch, then a stochastic gradient step per
// non-terminal sample and a terminal anchor step on contact. A non-finite
// residual aborts and returns the last epoch's model.
TrainResult train(const ElementConfig& element, const CostParams& cost, const TrainConfig& cfg);

// CSV: epoch,mean_abs_residual,episodes_terminated_contact
void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history);

}  // namespace modnav::trainer
