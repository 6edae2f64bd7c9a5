// World-frame scenarios: one goal element, any number of obstacle elements,
// each bound to a trained model. The closed loop evaluates every element in
// its own relative frame, composes the barrier-constrained step, and
// integrates the agent with explicit Euler.
#pragma once

#include "modnav/safety.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace modnav::scene {

using geom::Vec2;

enum class Role { Goal, Obstacle };

struct ElementSpec {
  geom::Shape shape;
  Vec2 center = Vec2::Zero();  // world pose at t = 0
  Vec2 velocity = Vec2::Zero();
  Role role = Role::Obstacle;
  std::string model_path;
  double cbf_gain = -1.0;  // negative: use SafetyParams.c_default
};

struct Scenario {
  std::vector<ElementSpec> elements;  // exactly one goal
  Vec2 agent_start = Vec2::Zero();
  double dt = 0.05;
  int max_steps = 1000;
  double goal_radius = 0.0;    // extra tolerance around the goal contact set
  double start_jitter = 0.0;   // per-seed uniform-disc jitter of the start
  double phase_jitter = 0.0;   // per-seed jitter of moving elements along velocity
};

// Agent position relative to the element center at time t; element poses
// follow center + velocity * t exactly (no accumulation).
Vec2 relative_state(const Vec2& agent_pos, const Vec2& element_center0, const Vec2& velocity,
                    double t);

void validate_scenario(const Scenario& s);

// Scenario plus its loaded models, aligned with scenario.elements. Model
// shape and motion must match the element; all models must share one
// training discount.
struct BoundScenario {
  Scenario scenario;
  std::vector<std::shared_ptr<const gp::ElementModel>> models;
  int goal_index = -1;
};

BoundScenario bind_models(const Scenario& s, const std::filesystem::path& base_dir = {});

// SafetyParams consistent with the bound models: lambda from training, the
// barrier floor from the least of the obstacles' default floors.
safety::SafetyParams default_safety_params(const BoundScenario& bs, double u_max = 1.0);

enum class Outcome { GoalReached, Collision, Timeout };

struct StepRecord {
  double t = 0.0;
  Vec2 pos = Vec2::Zero();
  Vec2 u = Vec2::Zero();
  safety::QcqpStatus status = safety::QcqpStatus::Optimal;
  std::vector<safety::ObstacleDiag> obstacles;
};

struct RunTrace {
  std::vector<StepRecord> steps;
  Outcome outcome = Outcome::Timeout;
  double min_signed_distance = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  std::string diagnostic;
};

// Closed loop from the (jittered) start until goal contact, collision, or
// max_steps. Identical seed, identical trace.
RunTrace run(const BoundScenario& bs, const safety::SafetyParams& p, std::uint64_t seed);

// Independent runs over consecutive seeds [seed0, seed0 + count). The
// parallel flag fans the runs out over OpenMP; results match serial exactly.
std::vector<RunTrace> run_batch(const BoundScenario& bs, const safety::SafetyParams& p,
                                std::uint64_t seed0, int count, bool parallel = true);

// Two-way road: lanes of constant-velocity cars, goal square across the
// road, agent below it.
struct LaneSpec {
  double y = 0.0;
  double speed = 0.8;  // signed; positive drives toward +x
  int n_cars = 2;
  double spacing = 8.0;      // gap between consecutive car centers
  double lead_offset = 6.0;  // upstream offset of the closest car
  std::string model_path;
};

struct StreetConfig {
  std::vector<LaneSpec> lanes;
  geom::Rectangle car_shape{4.0, 2.0};
  // The start and goal sit as close to the road as clearances allow: the
  // goal model's policy only points inward where reaching the goal beats
  // exiting its sensing disc, so the whole run must stay well inside that
  // watershed radius (about half the goal model's range).
  Vec2 agent_start{0.0, -1.5};
  Vec2 goal_center{0.0, 7.5};
  geom::Rectangle goal_shape{2.0, 2.0};
  std::string goal_model_path;
  double dt = 0.05;
  int max_steps = 1000;
  double start_jitter = 0.25;
  double phase_jitter = 1.0;
};

// Throws if any two elements overlap at t = 0 or no lane is given.
Scenario build_street_crossing(const StreetConfig& cfg);

nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
void save_scenario(const std::filesystem::path& path, const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);

// trace CSV: t,x,y,u_x,u_y,status, then V_j,slack_j,active_j per obstacle.
void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace);
// summary CSV: seed,outcome,steps,min_signed_distance
void write_summary_csv(const std::filesystem::path& path, const std::vector<RunTrace>& traces);

const char* outcome_name(Outcome o);

}  // namespace modnav::scene
