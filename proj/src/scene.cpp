#include "modnav/scene.hpp"

#include "modnav/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace modnav::scene {

using nlohmann::json;

Vec2 relative_state(const Vec2& agent_pos, const Vec2& element_center0, const Vec2& velocity,
                    double t) {
  return agent_pos - (element_center0 + velocity * t);
}

void validate_scenario(const Scenario& s) {
  int goals = 0;
  for (const auto& e : s.elements) {
    geom::validate_shape(e.shape);
    if (!e.center.allFinite() || !e.velocity.allFinite()) {
      throw std::invalid_argument("scenario: non-finite element pose");
    }
    if (e.role == Role::Goal) ++goals;
    if (e.model_path.empty()) throw std::invalid_argument("scenario: element without a model");
  }
  if (goals != 1) throw std::invalid_argument("scenario: exactly one goal element required");
  if (!(s.dt > 0.0) || s.max_steps < 1) throw std::invalid_argument("scenario: bad dt or max_steps");
  if (s.goal_radius < 0.0 || s.start_jitter < 0.0 || s.phase_jitter < 0.0) {
    throw std::invalid_argument("scenario: jitters and goal_radius must be >= 0");
  }
}

BoundScenario bind_models(const Scenario& s, const std::filesystem::path& base_dir) {
  validate_scenario(s);
  BoundScenario bs;
  bs.scenario = s;
  std::map<std::string, std::shared_ptr<const gp::ElementModel>> cache;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  for (size_t i = 0; i < s.elements.size(); ++i) {
    const auto& e = s.elements[i];
    auto it = cache.find(e.model_path);
    if (it == cache.end()) {
      std::filesystem::path p = e.model_path;
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      it = cache.emplace(e.model_path,
                         std::make_shared<gp::ElementModel>(io::load_model(p))).first;
    }
    const auto& m = *it->second;
    if (!geom::shapes_equal(e.shape, m.element.shape)) {
      throw std::invalid_argument("scenario element shape does not match its model: " +
                                  e.model_path);
    }
    if ((e.velocity - m.element.motion.velocity).norm() > 1e-12) {
      throw std::invalid_argument("scenario element velocity does not match its model: " +
                                  e.model_path);
    }
    if (std::isnan(lambda)) {
      lambda = m.training.lambda;
    } else if (std::abs(lambda - m.training.lambda) > 1e-12) {
      throw std::invalid_argument("scenario models disagree on the training discount");
    }
    if (e.role == Role::Goal) bs.goal_index = static_cast<int>(i);
    bs.models.push_back(it->second);
  }
  return bs;
}

safety::SafetyParams default_safety_params(const BoundScenario& bs, double u_max) {
  safety::SafetyParams p;
  p.u_max = u_max;
  p.lambda = bs.models.at(static_cast<size_t>(bs.goal_index))->training.lambda;
  double v_min = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < bs.models.size(); ++i) {
    if (bs.scenario.elements[i].role == Role::Obstacle) {
      v_min = std::min(v_min, safety::default_v_min(*bs.models[i], p.q));
    }
  }
  p.v_min = std::isfinite(v_min) ? v_min : 0.0;
  return p;
}

namespace {

bool any_overlap(const std::vector<ElementSpec>& elements, const std::vector<Vec2>& centers) {
  for (size_t i = 0; i < elements.size(); ++i) {
    for (size_t j = i + 1; j < elements.size(); ++j) {
      if (geom::shapes_overlap(elements[i].shape, centers[i], elements[j].shape, centers[j])) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace

RunTrace run(const BoundScenario& bs, const safety::SafetyParams& p, std::uint64_t seed) {
  const Scenario& s = bs.scenario;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Vec2 start = s.agent_start;
  std::vector<Vec2> centers(s.elements.size());
  for (int attempt = 0;; ++attempt) {
    start = s.agent_start;
    if (s.start_jitter > 0.0) {
      const double r = s.start_jitter * std::sqrt(unit(rng));
      const double th = 2.0 * M_PI * unit(rng);
      start += Vec2(r * std::cos(th), r * std::sin(th));
    }
    for (size_t i = 0; i < s.elements.size(); ++i) {
      centers[i] = s.elements[i].center;
      const double vn = s.elements[i].velocity.norm();
      if (s.phase_jitter > 0.0 && vn > 0.0) {
        const double off = s.phase_jitter * (2.0 * unit(rng) - 1.0);
        centers[i] += off * s.elements[i].velocity / vn;
      }
    }
    if (!any_overlap(s.elements, centers)) break;
    if (attempt >= 100) throw std::runtime_error("run: jittered layout keeps overlapping");
  }

  RunTrace tr;
  tr.seed = seed;
  tr.steps.reserve(static_cast<size_t>(s.max_steps));
  Vec2 pos = start;

  safety::ElementEval goal_eval;
  goal_eval.model = bs.models[static_cast<size_t>(bs.goal_index)].get();
  std::vector<safety::ElementEval> obstacle_evals;
  std::vector<size_t> obstacle_elem;
  for (size_t i = 0; i < s.elements.size(); ++i) {
    if (s.elements[i].role != Role::Obstacle) continue;
    safety::ElementEval ev;
    ev.model = bs.models[i].get();
    ev.c_j = s.elements[i].cbf_gain;
    obstacle_evals.push_back(ev);
    obstacle_elem.push_back(i);
  }

  for (int k = 0;; ++k) {
    const double t = k * s.dt;
    double min_sd = std::numeric_limits<double>::infinity();
    for (size_t o = 0; o < obstacle_evals.size(); ++o) {
      const size_t i = obstacle_elem[o];
      obstacle_evals[o].rel = relative_state(pos, centers[i], s.elements[i].velocity, t);
      min_sd = std::min(min_sd, geom::signed_distance(obstacle_evals[o].rel,
                                                      s.elements[i].shape));
    }
    tr.min_signed_distance = std::min(tr.min_signed_distance, min_sd);
    if (min_sd <= 0.0) {
      tr.outcome = Outcome::Collision;
      break;
    }
    const size_t gi = static_cast<size_t>(bs.goal_index);
    goal_eval.rel = relative_state(pos, centers[gi], s.elements[gi].velocity, t);
    if (geom::signed_distance(goal_eval.rel, s.elements[gi].shape) <= s.goal_radius) {
      tr.outcome = Outcome::GoalReached;
      break;
    }
    if (k == s.max_steps) {
      tr.outcome = Outcome::Timeout;
      break;
    }
    const safety::StepDecision d = safety::compose_step(goal_eval, obstacle_evals, p);
    if (!d.u.allFinite()) {
      tr.outcome = Outcome::Timeout;
      tr.diagnostic = "composed control was not finite; run stopped";
      break;
    }
    tr.steps.push_back({t, pos, d.u, d.status, d.obstacles});
    pos += s.dt * d.u;
  }
  return tr;
}

std::vector<RunTrace> run_batch(const BoundScenario& bs, const safety::SafetyParams& p,
                                std::uint64_t seed0, int count, bool parallel) {
  std::vector<RunTrace> traces(static_cast<size_t>(count));
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < count; ++i) traces[static_cast<size_t>(i)] = run(bs, p, seed0 + i);
  } else {
    for (int i = 0; i < count; ++i) traces[static_cast<size_t>(i)] = run(bs, p, seed0 + i);
  }
  return traces;
}

Scenario build_street_crossing(const StreetConfig& cfg) {
  if (cfg.lanes.empty()) throw std::invalid_argument("street crossing: at least one lane");
  Scenario s;
  s.agent_start = cfg.agent_start;
  s.dt = cfg.dt;
  s.max_steps = cfg.max_steps;
  s.start_jitter = cfg.start_jitter;
  s.phase_jitter = cfg.phase_jitter;

  ElementSpec goal;
  goal.shape = cfg.goal_shape;
  goal.center = cfg.goal_center;
  goal.role = Role::Goal;
  goal.model_path = cfg.goal_model_path;
  s.elements.push_back(goal);

  for (const auto& lane : cfg.lanes) {
    if (lane.n_cars < 1) throw std::invalid_argument("street crossing: lane without cars");
    if (lane.n_cars > 1 && !(lane.spacing > 0.0)) {
      throw std::invalid_argument("street crossing: car spacing must be positive");
    }
    const double upstream = lane.speed >= 0.0 ? -1.0 : 1.0;
    for (int k = 0; k < lane.n_cars; ++k) {
      ElementSpec car;
      car.shape = cfg.car_shape;
      car.center = Vec2(upstream * (lane.lead_offset + k * lane.spacing), lane.y);
      car.velocity = Vec2(lane.speed, 0.0);
      car.role = Role::Obstacle;
      car.model_path = lane.model_path;
      s.elements.push_back(car);
    }
  }

  std::vector<Vec2> centers;
  for (const auto& e : s.elements) centers.push_back(e.center);
  if (any_overlap(s.elements, centers)) {
    throw std::invalid_argument("street crossing: elements overlap at t = 0");
  }
  validate_scenario(s);
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["agent_start"] = {s.agent_start.x(), s.agent_start.y()};
  j["dt"] = s.dt;
  j["max_steps"] = s.max_steps;
  j["goal_radius"] = s.goal_radius;
  j["start_jitter"] = s.start_jitter;
  j["phase_jitter"] = s.phase_jitter;
  auto& elems = j["elements"] = json::array();
  for (const auto& e : s.elements) {
    json je;
    je["shape"] = io::shape_to_json(e.shape);
    je["center"] = {e.center.x(), e.center.y()};
    je["velocity"] = {e.velocity.x(), e.velocity.y()};
    je["role"] = e.role == Role::Goal ? "goal" : "obstacle";
    je["model"] = e.model_path;
    if (e.cbf_gain >= 0.0) je["cbf_gain"] = e.cbf_gain;
    elems.push_back(je);
  }
  return j;
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  const auto& st = j.at("agent_start");
  s.agent_start = Vec2(st.at(0).get<double>(), st.at(1).get<double>());
  s.dt = j.value("dt", 0.05);
  s.max_steps = j.value("max_steps", 1000);
  s.goal_radius = j.value("goal_radius", 0.0);
  s.start_jitter = j.value("start_jitter", 0.0);
  s.phase_jitter = j.value("phase_jitter", 0.0);
  for (const auto& je : j.at("elements")) {
    ElementSpec e;
    e.shape = io::shape_from_json(je.at("shape"));
    const auto& c = je.at("center");
    e.center = Vec2(c.at(0).get<double>(), c.at(1).get<double>());
    const auto& v = je.at("velocity");
    e.velocity = Vec2(v.at(0).get<double>(), v.at(1).get<double>());
    const std::string role = je.at("role").get<std::string>();
    if (role == "goal") {
      e.role = Role::Goal;
    } else if (role == "obstacle") {
      e.role = Role::Obstacle;
    } else {
      throw std::invalid_argument("scenario: unknown role " + role);
    }
    e.model_path = je.at("model").get<std::string>();
    e.cbf_gain = je.value("cbf_gain", -1.0);
    s.elements.push_back(e);
  }
  validate_scenario(s);
  return s;
}

void save_scenario(const std::filesystem::path& path, const Scenario& s) {
  io::write_file_atomic(path, scenario_to_json(s).dump(2) + "\n");
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scenario file: " + path.string());
  json j;
  f >> j;
  return scenario_from_json(j);
}

namespace {

const char* status_name(safety::QcqpStatus s) {
  switch (s) {
    case safety::QcqpStatus::Optimal: return "optimal";
    case safety::QcqpStatus::RelaxedInfeasible: return "relaxed";
    default: return "failed";
  }
}

}  // namespace

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::GoalReached: return "goal_reached";
    case Outcome::Collision: return "collision";
    default: return "timeout";
  }
}

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace) {
  const size_t n_obs = trace.steps.empty() ? 0 : trace.steps.front().obstacles.size();
  std::string csv = "t,x,y,u_x,u_y,status";
  for (size_t j = 0; j < n_obs; ++j) {
    const std::string sj = std::to_string(j);
    csv += ",V_" + sj + ",slack_" + sj + ",active_" + sj;
  }
  csv += "\n";
  char buf[256];
  for (const auto& st : trace.steps) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g,%s", st.t, st.pos.x(),
                  st.pos.y(), st.u.x(), st.u.y(), status_name(st.status));
    csv += buf;
    for (const auto& ob : st.obstacles) {
      std::snprintf(buf, sizeof(buf), ",%.10g,%.10g,%d", ob.v, ob.constrained ? ob.slack : 0.0,
                    ob.active ? 1 : 0);
      csv += buf;
    }
    csv += "\n";
  }
  io::write_file_atomic(path, csv);
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<RunTrace>& traces) {
  std::string csv = "seed,outcome,steps,min_signed_distance\n";
  char buf[128];
  for (const auto& tr : traces) {
    std::snprintf(buf, sizeof(buf), "%llu,%s,%zu,%.10g\n",
                  static_cast<unsigned long long>(tr.seed), outcome_name(tr.outcome),
                  tr.steps.size(), tr.min_signed_distance);
    csv += buf;
  }
  io::write_file_atomic(path, csv);
}

}  // namespace modnav::scene
