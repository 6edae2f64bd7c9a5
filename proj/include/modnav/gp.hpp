// Interpolating GP regressors over a fixed set of base points. The RBF Gram
// matrix (plus jitter) is Cholesky-factorized once; learning only moves the
// stored means, so value, policy, and value-gradient predictions are linear
// in them.
#pragma once

#include "modnav/env.hpp"
#include "modnav/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace modnav::gp {

using geom::Vec2;
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2>;
using GradMatrix = Eigen::Matrix<double, 2, Eigen::Dynamic>;

struct KernelParams {
  double lengthscale = 1.0;
  double variance = 1.0;
  double jitter = 1e-6;
};

double kernel(const Vec2& a, const Vec2& b, const KernelParams& k);
// Gradient of kernel(a, b) with respect to a.
Vec2 kernel_grad(const Vec2& a, const Vec2& b, const KernelParams& k);

// Prediction weights at a query point: J is the interpolation row (1 x N),
// Jprime stacks its per-dimension partial derivatives (2 x N).
struct Weights {
  Eigen::VectorXd J;
  GradMatrix Jprime;
};

class GpModel {
 public:
  GpModel() = default;
  // Throws on duplicate base points or a failed factorization.
  GpModel(PointMatrix base_points, KernelParams params);

  // Base points on a square lattice clipped to the origin-centered disc.
  static GpModel lattice(double radius, double spacing, const KernelParams& params);

  int size() const { return static_cast<int>(X_.rows()); }
  const PointMatrix& base_points() const { return X_; }
  const KernelParams& kernel_params() const { return params_; }
  const Eigen::VectorXd& mu_v() const { return mu_v_; }
  const PointMatrix& mu_u() const { return mu_u_; }
  void set_means(Eigen::VectorXd mu_v, PointMatrix mu_u);

  Weights weights(const Vec2& x, bool with_grad = true) const;

  double predict_value(const Weights& w) const { return w.J.dot(mu_v_); }
  double predict_value(const Vec2& x) const { return predict_value(weights(x, false)); }
  Vec2 predict_policy(const Weights& w) const { return mu_u_.transpose() * w.J; }
  Vec2 predict_policy(const Vec2& x) const { return predict_policy(weights(x, false)); }
  Vec2 predict_value_grad(const Weights& w) const { return w.Jprime * mu_v_; }
  Vec2 predict_value_grad(const Vec2& x) const { return predict_value_grad(weights(x)); }

  // One descent step on the stored means. Returns false and leaves the model
  // untouched if any gradient entry is non-finite.
  bool apply_gradients(const Eigen::VectorXd& dv, const PointMatrix& du, double eta);

  // Gram + jitter*I, rebuilt from the base points (for spectrum checks).
  Eigen::MatrixXd gram() const;

 private:
  PointMatrix X_;
  Eigen::VectorXd mu_v_;
  PointMatrix mu_u_;
  KernelParams params_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Dense field evaluation over an axis-aligned square grid, row-major with y
// varying slowest. The parallel flag switches the OpenMP kernel against the
// serial reference; both produce identical output.
struct FieldSample {
  double x;
  double y;
  double value;
  Vec2 policy;
};
std::vector<FieldSample> evaluate_on_grid(const GpModel& model, double bound, int res,
                                          bool parallel = true);

// A trained element primitive plus the configuration needed to deploy it.
struct ElementDescriptor {
  geom::Shape shape;
  env::MotionProfile motion;
  env::TrainingRange range;
};

struct TrainingDescriptor {
  int epochs = 0;
  int max_steps = 100;
  double lambda = 0.1;
  double qc = 0.0;
  double dt = 0.05;
  std::uint64_t seed = 0;
  double u_max = 1.0;
  double eta = 1e-2;
  double sigma_explore = 0.5;
  double w_term = 10.0;
};

struct ElementModel {
  GpModel gp;
  ElementDescriptor element;
  TrainingDescriptor training;
};

}  // namespace modnav::gp
