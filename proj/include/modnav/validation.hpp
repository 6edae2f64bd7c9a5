// Independent oracles: a grid value-iteration solver for the discounted
// cost-to-contact problem, a brute-force grid search for the constrained
// projection, and central finite differences. These share no code with the
// implementations they check.
#pragma once

#include "modnav/env.hpp"
#include "modnav/safety.hpp"
#include "modnav/trainer.hpp"

#include <functional>
#include <vector>

namespace modnav::validation {

using geom::Vec2;

struct GridSpec {
  double xmin = -8.0;
  double xmax = 8.0;
  double ymin = -8.0;
  double ymax = 8.0;
  int nx = 161;  // nodes per axis
  int ny = 161;
};

struct ValueGrid {
  GridSpec spec;
  std::vector<double> values;  // row-major, y slowest

  double at(int ix, int iy) const { return values[static_cast<size_t>(iy) * spec.nx + ix]; }
  double hx() const { return (spec.xmax - spec.xmin) / (spec.nx - 1); }
  double hy() const { return (spec.ymax - spec.ymin) / (spec.ny - 1); }
  Vec2 node(int ix, int iy) const {
    return {spec.xmin + ix * hx(), spec.ymin + iy * hy()};
  }
  // Bilinear interpolation, clamped to the grid.
  double interp(const Vec2& p) const;
};

struct ViOptions {
  double tol = 1e-8;
  int max_sweeps = 100000;
  int n_dirs = 64;   // action directions
  int n_mags = 8;    // magnitudes per direction, plus the zero action
  bool parallel = true;
  bool error_on_cap = true;  // throw if the sweep cap is hit before tol
};

struct ViResult {
  ValueGrid grid;
  std::vector<double> sweep_deltas;
  int sweeps = 0;
  bool converged = false;
};

// Discounted dynamic-programming fixed point on the grid: contact cells and
// cells outside the training disc absorb with value zero; synchronized
// (Jacobi) sweeps, so serial and parallel execution agree bitwise.
ViResult value_iteration(const geom::Shape& shape, const env::MotionProfile& motion,
                         const trainer::CostParams& cost, double u_max, double dt,
                         const env::TrainingRange& range, const GridSpec& grid,
                         const ViOptions& opt = {});

struct GridSearchResult {
  Vec2 u = Vec2::Zero();
  double objective = 0.0;
  bool feasible = false;
};

// Exhaustive search over a res x res lattice spanning the control ball's
// bounding square; feasibility checked exactly.
GridSearchResult qcqp_grid_search(const Vec2& u_goal,
                                  const std::vector<safety::LinearConstraint>& constraints,
                                  double u_max, int resolution);

// Central differences, O(h^2).
Eigen::VectorXd finite_diff(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h);

// KKT certificate for a reported optimum: fits multipliers for the reported
// active set by least squares and returns the worse of the stationarity
// residual and the most negative multiplier's magnitude.
double kkt_residual(const Vec2& u_goal, const std::vector<safety::LinearConstraint>& constraints,
                    double u_max, const safety::QcqpResult& result);

}  // namespace modnav::validation
