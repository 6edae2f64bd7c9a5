// Timing harness for the three parallel kernels against their serial
// reference implementations: dynamic-programming sweeps, dense field
// evaluation, and batched closed-loop runs. Each pair must agree exactly;
// the table reports wall times and speedups.
#include "modnav/gp.hpp"
#include "modnav/scene.hpp"
#include "modnav/validation.hpp"

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using modnav::geom::Vec2;

double now_sec() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const double t0 = now_sec();
    f();
    best = std::min(best, now_sec() - t0);
  }
  return best;
}

void report(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-24s %10.3f ms %10.3f ms %8.2fx   %s\n", name, serial * 1e3, parallel * 1e3,
              serial / parallel, identical ? "identical" : "MISMATCH");
}

modnav::gp::GpModel random_model(double radius, std::uint64_t seed) {
  auto model = modnav::gp::GpModel::lattice(radius, 1.0, {1.0, 1.0, 1e-6});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd mv(model.size());
  modnav::gp::PointMatrix mu(model.size(), 2);
  for (int i = 0; i < model.size(); ++i) {
    mv(i) = std::abs(normal(rng)) + 0.5;
    mu.row(i) << normal(rng), normal(rng);
  }
  model.set_means(mv, mu);
  return model;
}

void bench_value_iteration() {
  modnav::validation::GridSpec grid{-6.5, 6.5, -6.5, 6.5, 131, 131};
  modnav::validation::ViOptions opt;
  opt.tol = 0.0;  // run exactly max_sweeps
  opt.max_sweeps = 40;
  opt.error_on_cap = false;
  const modnav::geom::Shape shape = modnav::geom::Rectangle{4.0, 2.0};
  const modnav::trainer::CostParams cost{0.1, 1.0};

  modnav::validation::ViResult serial_result, parallel_result;
  const double ts = time_best_of(3, [&] {
    auto o = opt;
    o.parallel = false;
    serial_result = modnav::validation::value_iteration(shape, {}, cost, 1.0, 0.01, {6.0}, grid, o);
  });
  const double tp = time_best_of(3, [&] {
    auto o = opt;
    o.parallel = true;
    parallel_result =
        modnav::validation::value_iteration(shape, {}, cost, 1.0, 0.01, {6.0}, grid, o);
  });
  report("vi_sweeps(131x131x40)", ts, tp,
         serial_result.grid.values == parallel_result.grid.values);
}

void bench_evaluate_on_grid() {
  const auto model = random_model(8.0, 21);
  std::vector<modnav::gp::FieldSample> serial_field, parallel_field;
  const double ts =
      time_best_of(3, [&] { serial_field = modnav::gp::evaluate_on_grid(model, 8.0, 201, false); });
  const double tp =
      time_best_of(3, [&] { parallel_field = modnav::gp::evaluate_on_grid(model, 8.0, 201, true); });
  bool identical = serial_field.size() == parallel_field.size();
  for (size_t i = 0; identical && i < serial_field.size(); ++i) {
    identical = serial_field[i].value == parallel_field[i].value &&
                (serial_field[i].policy - parallel_field[i].policy).norm() == 0.0;
  }
  report("field_eval(201x201)", ts, tp, identical);
}

void bench_run_batch() {
  // In-memory scenario: one goal, two obstacles, synthetic (untrained) models.
  auto make_element = [](const modnav::geom::Shape& shape, const Vec2& vel, double radius,
                         std::uint64_t seed) {
    auto m = std::make_shared<modnav::gp::ElementModel>();
    m->gp = random_model(radius, seed);
    m->element = {shape, {vel}, {radius}};
    m->training.lambda = 0.1;
    m->training.qc = 1.0;
    return m;
  };
  modnav::scene::BoundScenario bs;
  bs.scenario.agent_start = {0.0, -6.0};
  bs.scenario.max_steps = 200;
  bs.scenario.start_jitter = 0.5;
  bs.scenario.elements = {
      {modnav::geom::Rectangle{2.0, 2.0}, {0.0, 6.0}, {0.0, 0.0}, modnav::scene::Role::Goal, "", -1.0},
      {modnav::geom::Rectangle{4.0, 2.0}, {-5.0, 0.0}, {0.6, 0.0}, modnav::scene::Role::Obstacle, "", -1.0},
      {modnav::geom::Rectangle{4.0, 2.0}, {5.0, 2.0}, {-0.6, 0.0}, modnav::scene::Role::Obstacle, "", -1.0},
  };
  bs.goal_index = 0;
  bs.models = {make_element(modnav::geom::Rectangle{2.0, 2.0}, {0.0, 0.0}, 10.0, 1),
               make_element(modnav::geom::Rectangle{4.0, 2.0}, {0.6, 0.0}, 8.0, 2),
               make_element(modnav::geom::Rectangle{4.0, 2.0}, {-0.6, 0.0}, 8.0, 3)};
  modnav::safety::SafetyParams params;
  params.v_min = 0.05;

  std::vector<modnav::scene::RunTrace> serial_traces, parallel_traces;
  const double ts = time_best_of(3, [&] {
    serial_traces = modnav::scene::run_batch(bs, params, 100, 16, false);
  });
  const double tp = time_best_of(3, [&] {
    parallel_traces = modnav::scene::run_batch(bs, params, 100, 16, true);
  });
  bool identical = serial_traces.size() == parallel_traces.size();
  for (size_t i = 0; identical && i < serial_traces.size(); ++i) {
    identical = serial_traces[i].steps.size() == parallel_traces[i].steps.size() &&
                serial_traces[i].outcome == parallel_traces[i].outcome &&
                serial_traces[i].min_signed_distance == parallel_traces[i].min_signed_distance;
    for (size_t k = 0; identical && k < serial_traces[i].steps.size(); ++k) {
      identical =
          (serial_traces[i].steps[k].u - parallel_traces[i].steps[k].u).norm() == 0.0 &&
          (serial_traces[i].steps[k].pos - parallel_traces[i].steps[k].pos).norm() == 0.0;
    }
  }
  report("run_batch(16 seeds)", ts, tp, identical);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not enabled; the parallel column runs the same serial code\n");
#endif
  std::printf("%-24s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");
  bench_value_iteration();
  bench_evaluate_on_grid();
  bench_run_batch();
  return 0;
}
