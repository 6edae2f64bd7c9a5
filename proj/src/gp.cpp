#include "modnav/gp.hpp"

#include <cmath>
#include <stdexcept>

namespace modnav::gp {

double kernel(const Vec2& a, const Vec2& b, const KernelParams& k) {
  const double d2 = (a - b).squaredNorm();
  return k.variance * std::exp(-d2 / (2.0 * k.lengthscale * k.lengthscale));
}

Vec2 kernel_grad(const Vec2& a, const Vec2& b, const KernelParams& k) {
  return -(a - b) / (k.lengthscale * k.lengthscale) * kernel(a, b, k);
}

GpModel::GpModel(PointMatrix base_points, KernelParams params)
    : X_(std::move(base_points)), params_(params) {
  const auto n = X_.rows();
  if (n < 1) throw std::invalid_argument("GpModel: needs at least one base point");
  if (!X_.allFinite()) throw std::invalid_argument("GpModel: non-finite base point");
  if (!(params_.lengthscale > 0.0) || !(params_.variance > 0.0) || !(params_.jitter >= 0.0)) {
    throw std::invalid_argument("GpModel: kernel parameters out of range");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if ((X_.row(i) - X_.row(j)).squaredNorm() < 1e-18) {
        throw std::invalid_argument("GpModel: duplicate base points");
      }
    }
  }
  mu_v_ = Eigen::VectorXd::Zero(n);
  mu_u_ = PointMatrix::Zero(n, 2);
  llt_.compute(gram());
  if (llt_.info() != Eigen::Success) {
    throw std::runtime_error("GpModel: Gram factorization failed; increase jitter");
  }
}

GpModel GpModel::lattice(double radius, double spacing, const KernelParams& params) {
  if (!(radius > 0.0) || !(spacing > 0.0)) {
    throw std::invalid_argument("GpModel::lattice: radius and spacing must be positive");
  }
  const int extent = static_cast<int>(std::floor(radius / spacing));
  std::vector<Vec2> pts;
  for (int i = -extent; i <= extent; ++i) {
    for (int j = -extent; j <= extent; ++j) {
      const Vec2 p(i * spacing, j * spacing);
      if (p.norm() <= radius) pts.push_back(p);
    }
  }
  PointMatrix x(pts.size(), 2);
  for (size_t i = 0; i < pts.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = pts[i];
  return GpModel(std::move(x), params);
}

Eigen::MatrixXd GpModel::gram() const {
  const auto n = X_.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = kernel(X_.row(i), X_.row(j), params_);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  k.diagonal().array() += params_.jitter;
  return k;
}

void GpModel::set_means(Eigen::VectorXd mu_v, PointMatrix mu_u) {
  if (mu_v.size() != X_.rows() || mu_u.rows() != X_.rows()) {
    throw std::invalid_argument("GpModel::set_means: size mismatch");
  }
  if (!mu_v.allFinite() || !mu_u.allFinite()) {
    throw std::invalid_argument("GpModel::set_means: non-finite means");
  }
  mu_v_ = std::move(mu_v);
  mu_u_ = std::move(mu_u);
}

Weights GpModel::weights(const Vec2& x, bool with_grad) const {
  if (!x.allFinite()) throw std::invalid_argument("GpModel::weights: non-finite query");
  const auto n = X_.rows();
  Weights w;
  if (with_grad) {
    // One factorized solve for the interpolation row and both gradient rows.
    Eigen::MatrixXd rhs(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec2 xi = X_.row(i);
      rhs(i, 0) = kernel(x, xi, params_);
      rhs.block<1, 2>(i, 1) = kernel_grad(x, xi, params_).transpose();
    }
    const Eigen::MatrixXd sol = llt_.solve(rhs);
    w.J = sol.col(0);
    w.Jprime = sol.rightCols<2>().transpose();
  } else {
    Eigen::VectorXd kvec(n);
    for (Eigen::Index i = 0; i < n; ++i) kvec(i) = kernel(x, X_.row(i), params_);
    w.J = llt_.solve(kvec);
  }
  return w;
}

bool GpModel::apply_gradients(const Eigen::VectorXd& dv, const PointMatrix& du, double eta) {
  if (dv.size() != X_.rows() || du.rows() != X_.rows()) {
    throw std::invalid_argument("GpModel::apply_gradients: size mismatch");
  }
  if (!dv.allFinite() || !du.allFinite() || !std::isfinite(eta)) return false;
  mu_v_ -= eta * dv;
  mu_u_ -= eta * du;
  return true;
}

std::vector<FieldSample> evaluate_on_grid(const GpModel& model, double bound, int res,
                                          bool parallel) {
  if (res < 2) throw std::invalid_argument("evaluate_on_grid: res must be >= 2");
  if (!(bound > 0.0)) throw std::invalid_argument("evaluate_on_grid: bound must be positive");
  const double h = 2.0 * bound / (res - 1);
  std::vector<FieldSample> out(static_cast<size_t>(res) * res);
  const auto eval_row = [&](int iy) {
    const double y = -bound + iy * h;
    for (int ix = 0; ix < res; ++ix) {
      const double x = -bound + ix * h;
      const Weights w = model.weights(Vec2(x, y), false);
      out[static_cast<size_t>(iy) * res + ix] =
          {x, y, model.predict_value(w), model.predict_policy(w)};
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int iy = 0; iy < res; ++iy) eval_row(iy);
  } else {
    for (int iy = 0; iy < res; ++iy) eval_row(iy);
  }
  return out;
}

}  // namespace modnav::gp
