#include "modnav/trainer.hpp"

#include "modnav/model_io.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace modnav::trainer {

double advantage_critic(const gp::GpModel& model, const CostParams& cost, const Vec2& x,
                        const Vec2& xdot, const Vec2& u) {
  const gp::Weights w = model.weights(x, true);
  return 0.5 * u.squaredNorm() + cost.qc + model.predict_value_grad(w).dot(xdot) -
         cost.lambda * model.predict_value(w);
}

double advantage_actor(const gp::GpModel& model, const Vec2& x, const Vec2& u) {
  return 0.5 * (u - model.predict_policy(x)).squaredNorm();
}

double sample_loss(const gp::GpModel& model, const CostParams& cost, const env::Sample& s) {
  const double delta = advantage_actor(model, s.x, s.u) -
                       advantage_critic(model, cost, s.x, s.xdot, s.u);
  return 0.5 * delta * delta;
}

Gradients gradients_from_parts(double delta, const gp::Weights& w, const Vec2& u_minus_ustar,
                               const Vec2& xdot, double lambda) {
  Gradients g;
  g.dv = delta * (lambda * w.J - w.Jprime.transpose() * xdot);
  g.du = -delta * (w.J * u_minus_ustar.transpose());
  return g;
}

Gradients loss_gradients(const gp::GpModel& model, const CostParams& cost, const env::Sample& s) {
  const gp::Weights w = model.weights(s.x, true);
  const Vec2 u_star = model.predict_policy(w);
  const double actor = 0.5 * (s.u - u_star).squaredNorm();
  const double critic = 0.5 * s.u.squaredNorm() + cost.qc +
                        model.predict_value_grad(w).dot(s.xdot) -
                        cost.lambda * model.predict_value(w);
  return gradients_from_parts(actor - critic, w, s.u - u_star, s.xdot, cost.lambda);
}

Eigen::VectorXd terminal_anchor_gradient(const gp::GpModel& model, const Vec2& x_term,
                                         double w_term) {
  const gp::Weights w = model.weights(x_term, false);
  return w_term * model.predict_value(w) * w.J;
}

Vec2 exploration_policy(const gp::GpModel& model, const Vec2& x, double sigma, double u_max,
                        std::mt19937_64& rng) {
  Vec2 u = model.predict_policy(x);
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    u.x() += noise(rng);
    u.y() += noise(rng);
  }
  const double n = u.norm();
  if (n > u_max) u *= u_max / n;
  return u;
}

double batch_loss(const gp::GpModel& model, const CostParams& cost,
                  std::span<const env::Sample> samples) {
  double total = 0.0;
  for (const auto& s : samples) {
    if (s.event != env::Event::None) continue;
    total += sample_loss(model, cost, s);
  }
  return total;
}

Gradients batch_gradients(const gp::GpModel& model, const CostParams& cost,
                          std::span<const env::Sample> samples) {
  Gradients g{Eigen::VectorXd::Zero(model.size()), gp::PointMatrix::Zero(model.size(), 2)};
  for (const auto& s : samples) {
    if (s.event != env::Event::None) continue;
    const Gradients gs = loss_gradients(model, cost, s);
    g.dv += gs.dv;
    g.du += gs.du;
  }
  return g;
}

TrainResult train(const ElementConfig& element, const CostParams& cost, const TrainConfig& cfg) {
  geom::validate_shape(element.shape);
  if (!(element.range.radius > geom::circumradius(element.shape))) {
    throw std::invalid_argument("train: training range must strictly cover the shape");
  }
  // Zero epochs is allowed: it materializes the untrained (zero-mean) model.
  if (cfg.epochs < 0 || cfg.max_steps < 1 || !(cfg.dt > 0.0) || !(cfg.eta > 0.0) ||
      !(cfg.u_max > 0.0)) {
    throw std::invalid_argument("train: bad training configuration");
  }

  TrainResult out;
  out.model.gp = gp::GpModel::lattice(element.range.radius, element.lattice_spacing,
                                      element.kernel);
  out.model.element = {element.shape, element.motion, element.range};
  out.model.training = {cfg.epochs, cfg.max_steps, cost.lambda,        cost.qc,
                        cfg.dt,     cfg.seed,      cfg.u_max,          cfg.eta,
                        cfg.sigma_explore,         cfg.w_term};
  out.history.reserve(static_cast<size_t>(cfg.epochs));

  gp::GpModel& model = out.model.gp;
  std::mt19937_64 rng(cfg.seed);
  Eigen::VectorXd good_mu_v = model.mu_v();
  gp::PointMatrix good_mu_u = model.mu_u();
  std::int64_t contact_total = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const env::Policy policy = [&](const Vec2& x) {
      return exploration_policy(model, x, cfg.sigma_explore, cfg.u_max, rng);
    };
    const auto samples = env::rollout(policy, element.shape, element.motion, element.range,
                                      cfg.dt, cfg.max_steps, rng);
    double abs_residual_sum = 0.0;
    int residual_count = 0;
    bool bad = false;
    for (const auto& s : samples) {
      if (s.event == env::Event::None) {
        const gp::Weights w = model.weights(s.x, true);
        const Vec2 u_star = model.predict_policy(w);
        const double actor = 0.5 * (s.u - u_star).squaredNorm();
        const double critic = 0.5 * s.u.squaredNorm() + cost.qc +
                              model.predict_value_grad(w).dot(s.xdot) -
                              cost.lambda * model.predict_value(w);
        const double delta = actor - critic;
        if (!std::isfinite(delta)) {
          bad = true;
          break;
        }
        const Gradients g = gradients_from_parts(delta, w, s.u - u_star, s.xdot, cost.lambda);
        if (!model.apply_gradients(g.dv, g.du, cfg.eta)) {
          bad = true;
          break;
        }
        abs_residual_sum += std::abs(delta);
        ++residual_count;
      } else if (s.event == env::Event::Contact) {
        const Eigen::VectorXd dv = terminal_anchor_gradient(model, s.x, cfg.w_term);
        if (!model.apply_gradients(dv, gp::PointMatrix::Zero(model.size(), 2), cfg.eta)) {
          bad = true;
          break;
        }
        ++contact_total;
      }
      // OutOfBound terminations carry no cost and no anchor.
    }
    if (bad) {
      model.set_means(good_mu_v, good_mu_u);
      out.aborted = true;
      out.diagnostic = "non-finite update at epoch " + std::to_string(epoch) +
                       "; restored the previous epoch's model";
      break;
    }
    out.history.push_back({epoch,
                           residual_count > 0 ? abs_residual_sum / residual_count : 0.0,
                           contact_total});
    good_mu_v = model.mu_v();
    good_mu_u = model.mu_u();
  }
  return out;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
  std::string csv = "epoch,mean_abs_residual,episodes_terminated_contact\n";
  char line[128];
  for (const auto& e : history) {
    std::snprintf(line, sizeof(line), "%d,%.10g,%lld\n", e.epoch, e.mean_abs_residual,
                  static_cast<long long>(e.episodes_terminated_contact));
    csv += line;
  }
  io::write_file_atomic(path, csv);
}

}  // namespace modnav::trainer
