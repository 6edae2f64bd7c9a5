// Barrier-constrained action selection. Each obstacle model contributes one
// linear constraint in the control, derived from the sharpened value barrier
// and the model-free reconstruction of the value rate; the composed step
// projects the goal policy onto the feasible set inside the control ball.
#pragma once

#include "modnav/gp.hpp"

#include <optional>
#include <vector>

namespace modnav::safety {

using geom::Vec2;

struct SafetyParams {
  double lambda = 0.1;   // must match the models' training discount
  double q = 0.5;        // barrier sharpening exponent, 0 < q <= 1
  double v_min = 0.05;   // barrier floor, compared against V^q
  double c_default = 1.0;  // barrier gain when an obstacle has none of its own
  double u_max = 1.0;
};

// The value rate as an affine function of the control: vdot(u) = lin.u + c.
// qc is the constant running cost the model was trained with.
struct AffineVdot {
  Vec2 lin;
  double constant;
};
AffineVdot vdot_affine(double v, const Vec2& u_star, double lambda, double qc = 0.0);

// Halfspace constraint a.u <= b. A zero a is vacuous when b >= 0 and marks
// an empty feasible set when b < 0.
struct LinearConstraint {
  Vec2 a;
  double b;
};

// Barrier constraint for one obstacle. Throws on non-finite V; V <= 0 falls
// back to a hard retreat along the learned approach direction.
LinearConstraint cbf_constraint(double v, const Vec2& u_star, const SafetyParams& p, double c_j,
                                double qc);

enum class QcqpStatus { Optimal, RelaxedInfeasible, Failed };

struct QcqpResult {
  Vec2 u = Vec2::Zero();
  QcqpStatus status = QcqpStatus::Optimal;
  std::vector<int> active_set;  // indices of active linear constraints
  bool ball_active = false;
  double objective = 0.0;  // ||u - u_goal||^2 at the returned point
};

// Exact active-set enumeration for min ||u - u_goal||^2 subject to the
// halfspaces and ||u|| <= u_max. If the feasible set is empty, returns the
// ball point minimizing the sum of squared violations (safety priority).
QcqpResult solve_qcqp(const Vec2& u_goal, const std::vector<LinearConstraint>& constraints,
                      double u_max);

struct ObstacleDiag {
  double v = 0.0;          // predicted value at the relative state (NaN when out of range)
  double slack = 0.0;      // b - a.u at the chosen control
  bool constrained = false;  // inside the model's training radius
  bool active = false;
};

struct ElementEval {
  const gp::ElementModel* model = nullptr;
  Vec2 rel;                  // agent position relative to the element center
  double c_j = -1.0;         // barrier gain; negative means use p.c_default
};

struct StepDecision {
  Vec2 u = Vec2::Zero();
  QcqpStatus status = QcqpStatus::Optimal;
  Vec2 u_goal = Vec2::Zero();
  std::vector<ObstacleDiag> obstacles;
};

// One constraint per in-range obstacle; obstacles outside their model's
// training radius contribute nothing (kernel decay would make the
// constraint meaningless). Throws if lambda disagrees with a model's
// training discount or a model pointer is missing.
StepDecision compose_step(const ElementEval& goal, const std::vector<ElementEval>& obstacles,
                          const SafetyParams& p);

// Default barrier floor for a model, in the sharpened units the constraint
// compares against: (frac * max predicted value)^q over a coarse grid
// spanning the training disc. The fraction keeps the floor contour clear of
// the smoothed contact notch, where the learned field overstates the value.
double default_v_min(const gp::ElementModel& model, double q, double frac = 0.15);

}  // namespace modnav::safety
