#include "modnav/safety.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace modnav::safety {

namespace {

constexpr double kFeasTol = 1e-9;

struct Candidate {
  Vec2 u;
  std::vector<int> active;
  bool ball = false;
};

bool feasible(const Vec2& u, const std::vector<LinearConstraint>& cons, double u_max) {
  if (u.norm() > u_max + kFeasTol) return false;
  for (const auto& c : cons) {
    if (c.a.dot(u) - c.b > kFeasTol) return false;
  }
  return true;
}

// Fallback when the halfspaces and the ball have empty intersection:
// minimize sum of squared violations over the ball by projected gradient.
Vec2 relax_min_violation(const std::vector<LinearConstraint>& cons, double u_max) {
  double lipschitz = 0.0;
  for (const auto& c : cons) lipschitz += 2.0 * c.a.squaredNorm();
  if (!(lipschitz > 0.0)) return Vec2::Zero();
  const double step = 1.0 / lipschitz;
  Vec2 u = Vec2::Zero();
  for (int it = 0; it < 2000; ++it) {
    Vec2 grad = Vec2::Zero();
    for (const auto& c : cons) {
      const double viol = c.a.dot(u) - c.b;
      if (viol > 0.0) grad += 2.0 * viol * c.a;
    }
    u -= step * grad;
    const double n = u.norm();
    if (n > u_max) u *= u_max / n;
  }
  return u;
}

}  // namespace

AffineVdot vdot_affine(double v, const Vec2& u_star, double lambda, double qc) {
  if (!std::isfinite(v) || !u_star.allFinite()) {
    throw std::invalid_argument("vdot_affine: non-finite inputs");
  }
  return {-u_star, 0.5 * u_star.squaredNorm() + lambda * v - qc};
}

LinearConstraint cbf_constraint(double v, const Vec2& u_star, const SafetyParams& p, double c_j,
                                double qc) {
  if (!std::isfinite(v)) throw std::invalid_argument("cbf_constraint: non-finite value");
  if (!u_star.allFinite()) throw std::invalid_argument("cbf_constraint: non-finite policy");
  if (!(p.q > 0.0) || p.q > 1.0) throw std::invalid_argument("cbf_constraint: q must be in (0, 1]");
  if (c_j < 0.0) throw std::invalid_argument("cbf_constraint: barrier gain must be >= 0");
  if (v <= 0.0) {
    // Inside (or numerically at) the contact set: demand a hard retreat along
    // the learned approach direction. With no direction the constraint is an
    // infeasibility marker and the solver relaxes to maximum retreat.
    const double n = u_star.norm();
    if (n > 0.0) return {u_star / n, -p.u_max};
    return {Vec2::Zero(), -p.u_max};
  }
  // Sharpened barrier q V^{q-1} vdot + c_j (V^q - v_min) >= 0 with the
  // model-free vdot(u) = 1/2||u*||^2 - u*.u + lambda V - qc, rearranged as
  // a.u <= b.
  const double vq1 = p.q * std::pow(v, p.q - 1.0);
  return {vq1 * u_star,
          c_j * (std::pow(v, p.q) - p.v_min) +
              vq1 * (0.5 * u_star.squaredNorm() + p.lambda * v - qc)};
}

QcqpResult solve_qcqp(const Vec2& u_goal, const std::vector<LinearConstraint>& constraints,
                      double u_max) {
  QcqpResult fail;
  fail.status = QcqpStatus::Failed;
  if (!u_goal.allFinite() || !(u_max > 0.0)) return fail;
  for (const auto& c : constraints) {
    if (!c.a.allFinite() || !std::isfinite(c.b)) return fail;
  }

  // Zero-normal constraints are vacuous (b >= 0) or mark an empty feasible
  // set outright (b < 0); only real halfspaces enter the enumeration.
  std::vector<LinearConstraint> cons;
  std::vector<int> cons_index;
  bool empty_marker = false;
  for (size_t i = 0; i < constraints.size(); ++i) {
    if (constraints[i].a.norm() == 0.0) {
      if (constraints[i].b < 0.0) empty_marker = true;
      continue;
    }
    cons.push_back(constraints[i]);
    cons_index.push_back(static_cast<int>(i));
  }

  QcqpResult best;
  bool found = false;
  if (!empty_marker) {
    // Fast path: the unconstrained optimum, then every KKT-candidate active
    // set of the 2-D problem: single halfspace boundary, halfspace + ball
    // circle, and halfspace pairs.
    std::vector<Candidate> cands;
    cands.push_back({u_goal, {}, false});
    const double gn = u_goal.norm();
    if (gn > u_max) cands.push_back({u_goal * (u_max / gn), {}, true});
    const int m = static_cast<int>(cons.size());
    for (int i = 0; i < m; ++i) {
      const Vec2 a = cons[i].a;
      const double b = cons[i].b;
      const double a2 = a.squaredNorm();
      cands.push_back({u_goal + (b - a.dot(u_goal)) / a2 * a, {i}, false});
      const Vec2 p0 = a * (b / a2);  // closest point of the line to the origin
      const double d2 = u_max * u_max - p0.squaredNorm();
      if (d2 >= 0.0) {
        const Vec2 tang = Vec2(-a.y(), a.x()) / std::sqrt(a2);
        const double t = std::sqrt(d2);
        cands.push_back({p0 + t * tang, {i}, true});
        cands.push_back({p0 - t * tang, {i}, true});
      }
      for (int j = i + 1; j < m; ++j) {
        const Vec2 aj = cons[j].a;
        const double det = a.x() * aj.y() - a.y() * aj.x();
        if (std::abs(det) < 1e-14 * std::sqrt(a2 * aj.squaredNorm())) continue;
        const double bj = cons[j].b;
        cands.push_back({Vec2(b * aj.y() - bj * a.y(), a.x() * bj - aj.x() * b) / det,
                         {i, j},
                         false});
      }
    }

    double best_obj = std::numeric_limits<double>::infinity();
    size_t best_nactive = 0;
    for (const auto& c : cands) {
      if (!c.u.allFinite() || !feasible(c.u, cons, u_max)) continue;
      const double obj = (c.u - u_goal).squaredNorm();
      const size_t nact = c.active.size() + (c.ball ? 1 : 0);
      const bool better =
          !found || obj < best_obj - 1e-12 ||
          (obj <= best_obj + 1e-12 && nact < best_nactive);
      if (better) {
        best.u = c.u;
        best.status = QcqpStatus::Optimal;
        best.active_set.clear();
        for (int idx : c.active) best.active_set.push_back(cons_index[static_cast<size_t>(idx)]);
        best.ball_active = c.ball;
        best.objective = obj;
        best_obj = obj;
        best_nactive = nact;
        found = true;
      }
    }
  }

  if (!found) {
    QcqpResult relaxed;
    relaxed.status = QcqpStatus::RelaxedInfeasible;
    relaxed.u = relax_min_violation(cons, u_max);
    if (!relaxed.u.allFinite()) return fail;
    relaxed.objective = (relaxed.u - u_goal).squaredNorm();
    relaxed.ball_active = relaxed.u.norm() > u_max - kFeasTol;
    for (size_t i = 0; i < cons.size(); ++i) {
      if (cons[i].a.dot(relaxed.u) - cons[i].b > kFeasTol) {
        relaxed.active_set.push_back(cons_index[i]);
      }
    }
    return relaxed;
  }
  return best;
}

StepDecision compose_step(const ElementEval& goal, const std::vector<ElementEval>& obstacles,
                          const SafetyParams& p) {
  if (goal.model == nullptr) throw std::invalid_argument("compose_step: missing goal model");
  if (std::abs(goal.model->training.lambda - p.lambda) > 1e-12) {
    throw std::invalid_argument("compose_step: discount does not match the model's training");
  }
  StepDecision out;
  out.u_goal = goal.model->gp.predict_policy(goal.rel);
  const double gn = out.u_goal.norm();
  if (gn > p.u_max) out.u_goal *= p.u_max / gn;

  std::vector<LinearConstraint> cons;
  std::vector<size_t> cons_obstacle;
  out.obstacles.resize(obstacles.size());
  for (size_t i = 0; i < obstacles.size(); ++i) {
    const auto& ob = obstacles[i];
    if (ob.model == nullptr) throw std::invalid_argument("compose_step: missing obstacle model");
    if (std::abs(ob.model->training.lambda - p.lambda) > 1e-12) {
      throw std::invalid_argument("compose_step: discount does not match the model's training");
    }
    ObstacleDiag& diag = out.obstacles[i];
    if (ob.rel.norm() > ob.model->element.range.radius) {
      diag.v = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const gp::Weights w = ob.model->gp.weights(ob.rel, false);
    diag.v = ob.model->gp.predict_value(w);
    diag.constrained = true;
    const double c_j = ob.c_j >= 0.0 ? ob.c_j : p.c_default;
    cons.push_back(cbf_constraint(diag.v, ob.model->gp.predict_policy(w), p, c_j,
                                  ob.model->training.qc));
    cons_obstacle.push_back(i);
  }

  const QcqpResult r = solve_qcqp(out.u_goal, cons, p.u_max);
  out.status = r.status;
  out.u = r.status == QcqpStatus::Failed ? Vec2::Zero() : r.u;
  for (size_t k = 0; k < cons.size(); ++k) {
    out.obstacles[cons_obstacle[k]].slack = cons[k].b - cons[k].a.dot(out.u);
  }
  for (int idx : r.active_set) {
    out.obstacles[cons_obstacle[static_cast<size_t>(idx)]].active = true;
  }
  return out;
}

double default_v_min(const gp::ElementModel& model, double q, double frac) {
  if (!(q > 0.0) || q > 1.0) throw std::invalid_argument("default_v_min: q must be in (0, 1]");
  if (!(frac > 0.0) || frac >= 1.0) {
    throw std::invalid_argument("default_v_min: frac must be in (0, 1)");
  }
  const double r = model.element.range.radius;
  constexpr int kRes = 41;
  double vmax = 0.0;
  for (int iy = 0; iy < kRes; ++iy) {
    for (int ix = 0; ix < kRes; ++ix) {
      const Vec2 x(-r + 2.0 * r * ix / (kRes - 1), -r + 2.0 * r * iy / (kRes - 1));
      if (x.norm() > r) continue;
      vmax = std::max(vmax, model.gp.predict_value(x));
    }
  }
  return std::pow(frac * vmax, q);
}

}  // namespace modnav::safety
