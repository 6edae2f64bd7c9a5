#include "modnav/validation.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace modnav::validation {

double ValueGrid::interp(const Vec2& p) const {
  const double fx = std::clamp((p.x() - spec.xmin) / hx(), 0.0, double(spec.nx - 1));
  const double fy = std::clamp((p.y() - spec.ymin) / hy(), 0.0, double(spec.ny - 1));
  const int ix = std::min(static_cast<int>(fx), spec.nx - 2);
  const int iy = std::min(static_cast<int>(fy), spec.ny - 2);
  const double ax = fx - ix;
  const double ay = fy - iy;
  return (1 - ax) * (1 - ay) * at(ix, iy) + ax * (1 - ay) * at(ix + 1, iy) +
         (1 - ax) * ay * at(ix, iy + 1) + ax * ay * at(ix + 1, iy + 1);
}

namespace {

// Everything a backup needs per action: the flat-index offset of the lower
// left interpolation node, the four bilinear weights (constant across the
// uniform grid), and the discounted stage cost.
struct Action {
  int offset;
  double w00, w10, w01, w11;
  double cost;
};

}  // namespace

ViResult value_iteration(const geom::Shape& shape, const env::MotionProfile& motion,
                         const trainer::CostParams& cost, double u_max, double dt,
                         const env::TrainingRange& range, const GridSpec& grid,
                         const ViOptions& opt) {
  geom::validate_shape(shape);
  if (grid.nx < 3 || grid.ny < 3) throw std::invalid_argument("value_iteration: grid too small");
  if (!(dt > 0.0) || !(u_max > 0.0)) throw std::invalid_argument("value_iteration: bad dt or u_max");
  ValueGrid vg{grid, std::vector<double>(static_cast<size_t>(grid.nx) * grid.ny, 0.0)};
  const double hx = vg.hx();
  const double hy = vg.hy();
  const double max_disp = dt * (u_max + motion.velocity.norm());
  if (!(max_disp < 2.0 * std::min(hx, hy))) {
    throw std::invalid_argument("value_iteration: dt too large for the grid resolution");
  }
  // Every in-range node must have its whole interpolation stencil on the grid.
  if (grid.xmin > -(range.radius + max_disp + hx) || grid.xmax < range.radius + max_disp + hx ||
      grid.ymin > -(range.radius + max_disp + hy) || grid.ymax < range.radius + max_disp + hy) {
    throw std::invalid_argument("value_iteration: grid bounds must cover the training disc");
  }

  const int nx = grid.nx;
  const int ny = grid.ny;
  // Node coordinates carry round-off from xmin + ix * hx, so a node meant to
  // sit exactly on the contact boundary can land a few ulp outside it. Treat
  // anything within a cell-relative tolerance of the boundary as absorbing,
  // matching the closed contact set of env::classify.
  const double boundary_tol = 1e-9 * std::min(hx, hy);
  std::vector<uint8_t> free_node(static_cast<size_t>(nx) * ny, 0);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const Vec2 p = vg.node(ix, iy);
      if (p.norm() <= range.radius + boundary_tol &&
          geom::signed_distance(p, shape) > boundary_tol) {
        free_node[static_cast<size_t>(iy) * nx + ix] = 1;
      }
    }
  }

  // Zero action plus n_dirs x n_mags controls up to u_max.
  std::vector<Action> actions;
  actions.reserve(static_cast<size_t>(opt.n_dirs) * opt.n_mags + 1);
  const double gamma = std::exp(-cost.lambda * dt);
  const auto push_action = [&](const Vec2& u) {
    const Vec2 d = dt * (u - motion.velocity);
    const double gx = d.x() / hx;
    const double gy = d.y() / hy;
    const int bx = static_cast<int>(std::floor(gx));
    const int by = static_cast<int>(std::floor(gy));
    const double ax = gx - bx;
    const double ay = gy - by;
    actions.push_back({by * nx + bx, (1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay,
                       dt * (0.5 * u.squaredNorm() + cost.qc)});
  };
  push_action(Vec2::Zero());
  for (int k = 0; k < opt.n_dirs; ++k) {
    const double th = 2.0 * M_PI * k / opt.n_dirs;
    const Vec2 dir(std::cos(th), std::sin(th));
    for (int m = 1; m <= opt.n_mags; ++m) push_action(dir * (u_max * m / opt.n_mags));
  }

  ViResult out;
  out.sweep_deltas.reserve(256);
  std::vector<double> next(vg.values.size(), 0.0);
  const Action* acts = actions.data();
  const int n_act = static_cast<int>(actions.size());

  const auto sweep_row = [&](int iy, const double* v, double* nv) {
    double row_delta = 0.0;
    const size_t row = static_cast<size_t>(iy) * nx;
    for (int ix = 0; ix < nx; ++ix) {
      const size_t n = row + ix;
      if (!free_node[n]) continue;
      double best = std::numeric_limits<double>::infinity();
      for (int a = 0; a < n_act; ++a) {
        const Action& act = acts[a];
        const double* base = v + n + act.offset;
        const double interp =
            act.w00 * base[0] + act.w10 * base[1] + act.w01 * base[nx] + act.w11 * base[nx + 1];
        const double val = act.cost + gamma * interp;
        if (val < best) best = val;
      }
      nv[n] = best;
      row_delta = std::max(row_delta, std::abs(best - v[n]));
    }
    return row_delta;
  };

  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    double delta = 0.0;
    const double* v = vg.values.data();
    double* nv = next.data();
    if (opt.parallel) {
#pragma omp parallel for schedule(static) reduction(max : delta)
      for (int iy = 0; iy < ny; ++iy) delta = std::max(delta, sweep_row(iy, v, nv));
    } else {
      for (int iy = 0; iy < ny; ++iy) delta = std::max(delta, sweep_row(iy, v, nv));
    }
    vg.values.swap(next);
    out.sweep_deltas.push_back(delta);
    out.sweeps = sweep + 1;
    if (delta < opt.tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged && opt.error_on_cap) {
    throw std::runtime_error("value_iteration: no convergence within the sweep cap");
  }
  out.grid = std::move(vg);
  return out;
}

GridSearchResult qcqp_grid_search(const Vec2& u_goal,
                                  const std::vector<safety::LinearConstraint>& constraints,
                                  double u_max, int resolution) {
  if (resolution < 2) throw std::invalid_argument("qcqp_grid_search: resolution must be >= 2");
  GridSearchResult best;
  best.objective = std::numeric_limits<double>::infinity();
  const double u_max2 = u_max * u_max;
  for (int iy = 0; iy < resolution; ++iy) {
    const double y = -u_max + 2.0 * u_max * iy / (resolution - 1);
    for (int ix = 0; ix < resolution; ++ix) {
      const Vec2 u(-u_max + 2.0 * u_max * ix / (resolution - 1), y);
      if (u.squaredNorm() > u_max2) continue;
      bool ok = true;
      for (const auto& c : constraints) {
        if (c.a.dot(u) > c.b) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      const double obj = (u - u_goal).squaredNorm();
      if (obj < best.objective) {
        best.objective = obj;
        best.u = u;
        best.feasible = true;
      }
    }
  }
  return best;
}

double kkt_residual(const Vec2& u_goal, const std::vector<safety::LinearConstraint>& constraints,
                    double u_max, const safety::QcqpResult& result) {
  const Vec2 u = result.u;
  Eigen::Vector2d rhs = -2.0 * (u - u_goal);
  const int cols = static_cast<int>(result.active_set.size()) + (result.ball_active ? 1 : 0);
  if (cols == 0) return rhs.norm();
  Eigen::MatrixXd a(2, cols);
  int c = 0;
  for (int idx : result.active_set) {
    a.col(c++) = constraints.at(static_cast<size_t>(idx)).a;
  }
  if (result.ball_active) a.col(c) = 2.0 * u;
  const Eigen::VectorXd mult = a.completeOrthogonalDecomposition().solve(rhs);
  double res = (a * mult - rhs).norm();
  for (Eigen::Index i = 0; i < mult.size(); ++i) res = std::max(res, -mult(i));
  (void)u_max;
  return res;
}

Eigen::VectorXd finite_diff(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: h must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    xp(i) = xi + h;
    const double fp = f(xp);
    xp(i) = xi - h;
    const double fm = f(xp);
    xp(i) = xi;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace modnav::validation
