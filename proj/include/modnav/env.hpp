// Element-relative single-integrator environment: the state is the agent
// position minus the element center, the element drifts at constant velocity,
// so xdot = u - v. Episodes end on contact with the element or on leaving the
// training disc.
#pragma once

#include "modnav/geometry.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace modnav::env {

using geom::Vec2;

struct MotionProfile {
  Vec2 velocity = Vec2::Zero();
};

struct TrainingRange {
  double radius = 8.0;
};

enum class Event { None, Contact, OutOfBound };

// One observed tuple. event describes x itself: Contact iff x is in the
// contact set, OutOfBound iff x left the training disc.
struct Sample {
  Vec2 x;
  Vec2 xdot;
  Vec2 u;
  Event event = Event::None;
};

struct StepResult {
  Vec2 x_next;
  Vec2 xdot;
};

// Explicit Euler step of the relative dynamics. Throws on non-finite input
// or non-positive dt.
StepResult step(const Vec2& x, const Vec2& u, const MotionProfile& motion, double dt);

// Contact wins over out-of-bound; with range.radius > circumradius(shape)
// the two cannot overlap anyway.
Event classify(const Vec2& x, const geom::Shape& shape, const TrainingRange& range);

// Uniform over the training disc minus the contact set, by rejection.
// Throws std::invalid_argument if the range does not strictly cover the
// shape, std::runtime_error if 10^4 draws all land in the contact set.
Vec2 sample_initial(const geom::Shape& shape, const TrainingRange& range, std::mt19937_64& rng);

using Policy = std::function<Vec2(const Vec2&)>;

// Integrates from a fresh initial state until a terminal event or max_steps.
// The terminal event appears exactly once, on the last sample; every sample
// carries the continuous-time xdot for the action taken at its state.
// Throws std::runtime_error if the policy returns a non-finite control.
std::vector<Sample> rollout(const Policy& policy, const geom::Shape& shape,
                            const MotionProfile& motion, const TrainingRange& range, double dt,
                            int max_steps, std::mt19937_64& rng);

}  // namespace modnav::env
