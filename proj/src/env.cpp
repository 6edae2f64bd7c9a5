#include "modnav/env.hpp"

#include <cmath>
#include <stdexcept>

namespace modnav::env {

StepResult step(const Vec2& x, const Vec2& u, const MotionProfile& motion, double dt) {
  if (!x.allFinite() || !u.allFinite()) throw std::invalid_argument("step: non-finite state or control");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("step: dt must be positive");
  const Vec2 xdot = u - motion.velocity;
  return {x + dt * xdot, xdot};
}

Event classify(const Vec2& x, const geom::Shape& shape, const TrainingRange& range) {
  if (geom::contains(x, shape)) return Event::Contact;
  if (x.norm() > range.radius) return Event::OutOfBound;
  return Event::None;
}

Vec2 sample_initial(const geom::Shape& shape, const TrainingRange& range, std::mt19937_64& rng) {
  if (!(range.radius > geom::circumradius(shape))) {
    throw std::invalid_argument("training range must strictly cover the shape");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr int kMaxDraws = 10000;
  for (int i = 0; i < kMaxDraws; ++i) {
    const double r = range.radius * std::sqrt(unit(rng));
    const double theta = 2.0 * M_PI * unit(rng);
    const Vec2 p(r * std::cos(theta), r * std::sin(theta));
    if (!geom::contains(p, shape)) return p;
  }
  throw std::runtime_error("sample_initial: rejection sampling failed after 10^4 draws");
}

std::vector<Sample> rollout(const Policy& policy, const geom::Shape& shape,
                            const MotionProfile& motion, const TrainingRange& range, double dt,
                            int max_steps, std::mt19937_64& rng) {
  if (max_steps < 1) throw std::invalid_argument("rollout: max_steps must be >= 1");
  std::vector<Sample> samples;
  samples.reserve(static_cast<size_t>(max_steps));
  Vec2 x = sample_initial(shape, range, rng);
  for (int k = 0; k < max_steps; ++k) {
    const Event ev = classify(x, shape, range);
    const Vec2 u = policy(x);
    if (!u.allFinite()) throw std::runtime_error("rollout: policy returned a non-finite control");
    const StepResult s = step(x, u, motion, dt);
    samples.push_back({x, s.xdot, u, ev});
    if (ev != Event::None) break;
    x = s.x_next;
  }
  return samples;
}

}  // namespace modnav::env
