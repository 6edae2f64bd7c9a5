// Command-line front end: train element primitives, export their fields,
// simulate composed scenarios, and run the self-validation checks.
#include "modnav/manifest.hpp"
#include "modnav/model_io.hpp"
#include "modnav/scene.hpp"
#include "modnav/trainer.hpp"
#include "modnav/validation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>

namespace {

using modnav::geom::Vec2;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCheckFailed = 2;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Relative output paths land under MODNAV_OUT_DIR when it is set.
std::filesystem::path resolve_output(const std::string& path) {
  std::filesystem::path p = path;
  if (p.is_relative()) {
    if (const char* dir = std::getenv("MODNAV_OUT_DIR"); dir != nullptr && *dir != '\0') {
      p = std::filesystem::path(dir) / p;
    }
  }
  return p;
}

modnav::geom::Shape parse_shape(const std::string& spec) {
  if (spec.rfind("rect:", 0) == 0) {
    const std::string dims = spec.substr(5);
    const auto x = dims.find('x');
    if (x == std::string::npos) throw CLI::ValidationError("--shape", "expected rect:WxH");
    return modnav::geom::Rectangle{std::stod(dims.substr(0, x)), std::stod(dims.substr(x + 1))};
  }
  if (spec.rfind("polygon:@", 0) == 0) {
    std::ifstream f(spec.substr(9));
    if (!f) throw CLI::ValidationError("--shape", "cannot open polygon file");
    json j;
    f >> j;
    return modnav::io::shape_from_json(
        j.is_array() ? json{{"type", "polygon"}, {"vertices", j}} : j);
  }
  throw CLI::ValidationError("--shape", "expected rect:WxH or polygon:@file");
}

Vec2 parse_vec2(const std::string& spec, const std::string& flag) {
  const auto comma = spec.find(',');
  if (comma == std::string::npos) throw CLI::ValidationError(flag, "expected two comma-separated numbers");
  return {std::stod(spec.substr(0, comma)), std::stod(spec.substr(comma + 1))};
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string shape = "rect:4x2";
  std::string motion = "0,0";
  std::string out;
  std::string loss_out;
  int epochs = 2000;
  int max_steps = 100;
  double lambda = 0.1;
  double qc = 0.0;
  double eta = 1e-2;
  double radius = 8.0;
  double dt = 0.05;
  double u_max = 1.0;
  double spacing = 1.0;
  double sigma_explore = -1.0;  // negative: 0.5 * u_max
  double w_term = 10.0;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
  Stopwatch watch;
  modnav::trainer::ElementConfig element;
  element.shape = parse_shape(a.shape);
  element.motion.velocity = parse_vec2(a.motion, "--motion");
  element.range.radius = a.radius;
  element.lattice_spacing = a.spacing;

  modnav::trainer::CostParams cost{a.lambda, a.qc};
  modnav::trainer::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.max_steps = a.max_steps;
  cfg.dt = a.dt;
  cfg.eta = a.eta;
  cfg.u_max = a.u_max;
  cfg.sigma_explore = a.sigma_explore < 0.0 ? 0.5 * a.u_max : a.sigma_explore;
  cfg.w_term = a.w_term;
  cfg.seed = a.seed;

  const auto result = modnav::trainer::train(element, cost, cfg);
  const auto out = resolve_output(a.out);
  const auto loss_out =
      a.loss_out.empty() ? std::filesystem::path(out.string() + ".loss.csv")
                         : resolve_output(a.loss_out);
  modnav::io::save_model(out, result.model);
  modnav::trainer::write_loss_csv(loss_out, result.history);
  if (result.aborted) std::cerr << "warning: " << result.diagnostic << "\n";

  modnav::manifest::RunManifest m;
  m.command = "train";
  m.config = {{"shape", a.shape},     {"motion", a.motion},   {"epochs", a.epochs},
              {"max_steps", a.max_steps}, {"lambda", a.lambda}, {"qc", a.qc},
              {"eta", a.eta},         {"radius", a.radius},   {"dt", a.dt},
              {"u_max", a.u_max},     {"spacing", a.spacing}, {"seed", a.seed},
              {"out", out.string()},  {"loss_out", loss_out.string()},
              {"aborted", result.aborted}};
  m.seed = a.seed;
  m.artifacts = {out.string(), loss_out.string()};
  m.wall_clock_sec = watch.seconds();
  modnav::manifest::write(out.string() + ".manifest.json", m);
  std::cout << "trained " << out.string() << " (" << result.history.size() << " epochs, "
            << m.wall_clock_sec << " s)\n";
  return kExitOk;
}

// ---- export-grid ----------------------------------------------------------

struct ExportArgs {
  std::string model;
  std::string out = "grid.csv";
  double bounds = 8.0;
  int res = 101;
  bool serial = false;
};

int cmd_export_grid(const ExportArgs& a) {
  Stopwatch watch;
  const auto model = modnav::io::load_model(a.model);
  const auto field = modnav::gp::evaluate_on_grid(model.gp, a.bounds, a.res, !a.serial);
  std::string csv = "x,y,V,u_x,u_y\n";
  char buf[160];
  for (const auto& s : field) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g\n", s.x, s.y, s.value,
                  s.policy.x(), s.policy.y());
    csv += buf;
  }
  const auto out = resolve_output(a.out);
  modnav::io::write_file_atomic(out, csv);

  modnav::manifest::RunManifest m;
  m.command = "export-grid";
  m.config = {{"model", a.model}, {"bounds", a.bounds}, {"res", a.res}, {"out", out.string()}};
  m.artifacts = {out.string()};
  m.wall_clock_sec = watch.seconds();
  modnav::manifest::write(out.string() + ".manifest.json", m);
  std::cout << "exported " << field.size() << " rows to " << out.string() << "\n";
  return kExitOk;
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string preset;
  std::string models_dir = ".";
  std::string out_dir = "sim_out";
  int seeds = 1;
  std::uint64_t seed0 = 1;
  double u_max = 1.0;
  double v_min = -1.0;  // negative: derive from the models
  double c_default = 1.0;
  bool serial = false;
};

int cmd_simulate(const SimulateArgs& a) {
  Stopwatch watch;
  modnav::scene::Scenario scenario;
  std::filesystem::path base_dir;
  if (!a.scenario.empty()) {
    scenario = modnav::scene::load_scenario(a.scenario);
    base_dir = std::filesystem::path(a.scenario).parent_path();
  } else if (a.preset == "street-crossing") {
    modnav::scene::StreetConfig cfg;
    cfg.goal_model_path = "goal.json";
    cfg.lanes = {{1.5, 0.8, 2, 8.0, 6.0, "car_east.json"},
                 {4.5, -0.8, 2, 8.0, 6.0, "car_west.json"}};
    scenario = modnav::scene::build_street_crossing(cfg);
    base_dir = a.models_dir;
  } else {
    throw CLI::ValidationError("--preset", "give --scenario FILE or --preset street-crossing");
  }

  const auto bound = modnav::scene::bind_models(scenario, base_dir);
  auto params = modnav::scene::default_safety_params(bound, a.u_max);
  if (a.v_min >= 0.0) params.v_min = a.v_min;
  params.c_default = a.c_default;

  const auto traces = modnav::scene::run_batch(bound, params, a.seed0, a.seeds, !a.serial);
  const auto out_dir = resolve_output(a.out_dir);
  std::filesystem::create_directories(out_dir);

  modnav::manifest::RunManifest m;
  m.command = "simulate";
  int collisions = 0;
  int reached = 0;
  for (const auto& tr : traces) {
    const auto path = out_dir / ("trace_" + std::to_string(tr.seed) + ".csv");
    modnav::scene::write_trace_csv(path, tr);
    m.artifacts.push_back(path.string());
    collisions += tr.outcome == modnav::scene::Outcome::Collision;
    reached += tr.outcome == modnav::scene::Outcome::GoalReached;
  }
  const auto summary = out_dir / "summary.csv";
  modnav::scene::write_summary_csv(summary, traces);
  m.artifacts.push_back(summary.string());

  m.config = {{"scenario", a.scenario}, {"preset", a.preset},
              {"models_dir", a.models_dir}, {"out_dir", out_dir.string()},
              {"seeds", a.seeds},       {"seed0", a.seed0},
              {"u_max", a.u_max},       {"v_min", params.v_min},
              {"c_default", a.c_default}};
  m.seed = a.seed0;
  m.wall_clock_sec = watch.seconds();
  modnav::manifest::write(out_dir / "manifest.json", m);

  std::cout << a.seeds << " runs: " << reached << " reached goal, " << collisions
            << " collisions (" << m.wall_clock_sec << " s); outputs in " << out_dir.string()
            << "\n";
  return collisions > 0 ? kExitCheckFailed : kExitOk;
}

// ---- validate ---------------------------------------------------------------

struct ValidateArgs {
  std::string report = "validation_report.json";
  bool perturb_qcqp = false;  // test hook: bias the solver output
  bool quick = false;         // test hook: smaller instances
};

struct Check {
  std::string name;
  bool pass;
  double measured;
  double tolerance;
};

Check check_algebraic_identities() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  std::uniform_real_distribution<double> pos(0.05, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec2 u(uni(rng), uni(rng));
    const Vec2 u_star(uni(rng), uni(rng));
    const double v = pos(rng);
    const double lambda = pos(rng);
    const double qc = pos(rng) - 2.5;
    const double actor = 0.5 * (u - u_star).squaredNorm();
    const double expanded = 0.5 * u.squaredNorm() - u_star.dot(u) + 0.5 * u_star.squaredNorm();
    worst = std::max(worst, std::abs(actor - expanded));
    const auto vd = modnav::safety::vdot_affine(v, u_star, lambda, qc);
    const double reconstructed = vd.lin.dot(u) + vd.constant;
    const double critic_form = actor - (0.5 * u.squaredNorm() + qc) + lambda * v;
    worst = std::max(worst, std::abs(reconstructed - critic_form));
  }
  return {"algebraic_identities", worst <= 1e-12, worst, 1e-12};
}

Check check_gp_gradient_fd(bool quick) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  double worst = 0.0;
  const int n_models = quick ? 3 : 10;
  const int n_points = quick ? 10 : 30;
  for (int mi = 0; mi < n_models; ++mi) {
    modnav::gp::PointMatrix pts(25, 2);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) pts.row(i) << uni(rng), uni(rng);
    modnav::gp::GpModel model(pts, {1.0, 1.0, 1e-6});
    Eigen::VectorXd mv(25);
    modnav::gp::PointMatrix mu(25, 2);
    for (int i = 0; i < 25; ++i) {
      mv(i) = uni(rng);
      mu.row(i) << uni(rng), uni(rng);
    }
    model.set_means(mv, mu);
    for (int pi = 0; pi < n_points; ++pi) {
      const Vec2 x(uni(rng), uni(rng));
      const Vec2 analytic = model.predict_value_grad(x);
      const auto f = [&](const Eigen::VectorXd& q) {
        return model.predict_value(Vec2(q(0), q(1)));
      };
      const Eigen::VectorXd fd = modnav::validation::finite_diff(f, x, 1e-4);
      const double rel = (analytic - Vec2(fd)).norm() / std::max(analytic.norm(), 1e-10);
      worst = std::max(worst, rel);
    }
  }
  return {"gp_gradient_fd", worst <= 1e-5, worst, 1e-5};
}

Check check_trainer_gradient_fd(bool quick) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  double worst = 0.0;
  const int n_instances = quick ? 3 : 10;
  for (int k = 0; k < n_instances; ++k) {
    modnav::gp::GpModel model = modnav::gp::GpModel::lattice(2.5, 1.0, {1.0, 1.0, 1e-6});
    const int n = model.size();
    Eigen::VectorXd mv(n);
    modnav::gp::PointMatrix mu(n, 2);
    for (int i = 0; i < n; ++i) {
      mv(i) = uni(rng);
      mu.row(i) << uni(rng), uni(rng);
    }
    model.set_means(mv, mu);
    modnav::trainer::CostParams cost{0.1, 1.0};
    modnav::env::Sample s{{uni(rng), uni(rng)}, {uni(rng), uni(rng)}, {uni(rng), uni(rng)},
                          modnav::env::Event::None};
    const auto g = modnav::trainer::loss_gradients(model, cost, s);
    Eigen::VectorXd theta(3 * n);
    theta << mv, mu.col(0), mu.col(1);
    const auto f = [&](const Eigen::VectorXd& q) {
      modnav::gp::GpModel m2 = model;
      modnav::gp::PointMatrix mu2(n, 2);
      mu2.col(0) = q.segment(n, n);
      mu2.col(1) = q.segment(2 * n, n);
      m2.set_means(q.head(n), mu2);
      return modnav::trainer::sample_loss(m2, cost, s);
    };
    const Eigen::VectorXd fd = modnav::validation::finite_diff(f, theta, 1e-6);
    Eigen::VectorXd analytic(3 * n);
    analytic << g.dv, g.du.col(0), g.du.col(1);
    const double rel = (analytic - fd).norm() / std::max(analytic.norm(), 1e-10);
    worst = std::max(worst, rel);
  }
  return {"trainer_gradient_fd", worst <= 1e-4, worst, 1e-4};
}

Check check_qcqp_vs_grid(bool quick, bool perturb) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> uni(-1.5, 1.5);
  std::uniform_real_distribution<double> boff(-0.5, 1.5);
  std::uniform_int_distribution<int> ncons(0, 6);
  const int n_instances = quick ? 50 : 200;
  const int res = quick ? 101 : 201;
  const double u_max = 1.0;
  double worst = 0.0;
  for (int k = 0; k < n_instances; ++k) {
    const Vec2 u_goal(uni(rng), uni(rng));
    std::vector<modnav::safety::LinearConstraint> cons(static_cast<size_t>(ncons(rng)));
    for (auto& c : cons) {
      c.a = Vec2(uni(rng), uni(rng));
      c.b = boff(rng);
    }
    auto r = modnav::safety::solve_qcqp(u_goal, cons, u_max);
    if (perturb) r.u.x() += 2e-3;
    const auto oracle = modnav::validation::qcqp_grid_search(u_goal, cons, u_max, res);
    if (r.status == modnav::safety::QcqpStatus::Optimal) {
      double viol = std::max(0.0, r.u.norm() - u_max);
      for (const auto& c : cons) viol = std::max(viol, c.a.dot(r.u) - c.b);
      worst = std::max(worst, viol / 1e-8);
      if (oracle.feasible) {
        worst = std::max(worst, (r.objective - oracle.objective) / 1e-3);
        worst = std::max(worst,
                         ((r.u - u_goal).squaredNorm() - oracle.objective) / 1e-3);
      }
      worst = std::max(worst,
                       modnav::validation::kkt_residual(u_goal, cons, u_max, r) / 1e-8);
    }
  }
  // measured is the worst violation as a fraction of its own tolerance.
  return {"qcqp_vs_grid", worst <= 1.0, worst, 1.0};
}

Check check_vi_slab(bool quick) {
  // Tall thin slab, no discount, constant cost 1: the optimal transit speed
  // balances effort and duration, V = sqrt(2) * distance.
  const double radius = quick ? 1.2 : 1.6;
  const double h = 0.02;
  const double bound = radius + 0.1;
  const int n = 2 * static_cast<int>(std::round(bound / h)) + 1;
  modnav::validation::GridSpec grid{-bound, bound, -bound, bound, n, n};
  modnav::validation::ViOptions opt;
  if (quick) {
    opt.n_dirs = 32;
    opt.n_mags = 4;
  }
  const auto vi = modnav::validation::value_iteration(
      modnav::geom::Rectangle{0.4, 100.0}, {}, {0.0, 1.0}, 2.0, 0.005, {radius}, grid, opt);
  std::vector<double> errs;
  for (double d = 0.2; d <= (quick ? 0.45 : 0.55); d += 0.05) {
    const double analytic = std::sqrt(2.0) * d;
    const double got = vi.grid.interp(Vec2(-(0.2 + d), 0.0));
    errs.push_back(std::abs(got - analytic) / analytic);
  }
  std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
  const double median = errs[errs.size() / 2];
  return {"vi_slab_analytic", median <= 0.02, median, 0.02};
}

int cmd_validate(const ValidateArgs& a) {
  Stopwatch watch;
  std::vector<Check> checks;
  checks.push_back(check_algebraic_identities());
  checks.push_back(check_gp_gradient_fd(a.quick));
  checks.push_back(check_trainer_gradient_fd(a.quick));
  checks.push_back(check_qcqp_vs_grid(a.quick, a.perturb_qcqp));
  checks.push_back(check_vi_slab(a.quick));

  bool all_pass = true;
  json jchecks = json::array();
  for (const auto& c : checks) {
    all_pass = all_pass && c.pass;
    jchecks.push_back({{"name", c.name},
                       {"pass", c.pass},
                       {"measured", c.measured},
                       {"tolerance", c.tolerance}});
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << " (measured " << c.measured
              << ", tolerance " << c.tolerance << ")\n";
  }
  json report{{"version", modnav::manifest::kVersion}, {"checks", jchecks},
              {"all_pass", all_pass}};
  const auto out = resolve_output(a.report);
  modnav::io::write_file_atomic(out, report.dump(2) + "\n");

  modnav::manifest::RunManifest m;
  m.command = "validate";
  m.config = {{"report", out.string()}, {"quick", a.quick}, {"perturb_qcqp", a.perturb_qcqp}};
  m.artifacts = {out.string()};
  m.wall_clock_sec = watch.seconds();
  modnav::manifest::write(out.string() + ".manifest.json", m);
  return all_pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP actor-critic navigation primitives with barrier-safe composition"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train one element primitive");
  train->add_option("--shape", train_args.shape, "rect:WxH or polygon:@file");
  train->add_option("--motion", train_args.motion, "element velocity vx,vy");
  train->add_option("--epochs", train_args.epochs);
  train->add_option("--max-steps", train_args.max_steps, "steps per episode");
  train->add_option("--lambda", train_args.lambda, "discount rate");
  train->add_option("--qc", train_args.qc, "constant running cost");
  train->add_option("--eta", train_args.eta, "learning rate");
  train->add_option("--radius", train_args.radius, "training disc radius");
  train->add_option("--dt", train_args.dt);
  train->add_option("--u-max", train_args.u_max);
  train->add_option("--spacing", train_args.spacing, "base point lattice spacing");
  train->add_option("--sigma-explore", train_args.sigma_explore,
                    "exploration noise std (default 0.5 * u_max)");
  train->add_option("--w-term", train_args.w_term, "terminal anchoring weight");
  train->add_option("--seed", train_args.seed);
  train->add_option("--out", train_args.out, "model JSON path")->required();
  train->add_option("--loss-out", train_args.loss_out, "loss history CSV (default <out>.loss.csv)");

  ExportArgs export_args;
  auto* exportg = app.add_subcommand("export-grid", "Evaluate a model's fields on a grid");
  exportg->add_option("--model", export_args.model)->required();
  exportg->add_option("--bounds", export_args.bounds, "half-width of the square grid");
  exportg->add_option("--res", export_args.res, "nodes per axis");
  exportg->add_option("--out", export_args.out);
  exportg->add_flag("--serial", export_args.serial, "use the serial reference kernel");

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Run closed-loop scenarios");
  sim->add_option("--scenario", sim_args.scenario, "scenario JSON path");
  sim->add_option("--preset", sim_args.preset, "street-crossing");
  sim->add_option("--models-dir", sim_args.models_dir,
                  "directory with goal.json, car_east.json, car_west.json for the preset");
  sim->add_option("--seeds", sim_args.seeds, "number of runs");
  sim->add_option("--seed0", sim_args.seed0, "first seed");
  sim->add_option("--out-dir", sim_args.out_dir);
  sim->add_option("--u-max", sim_args.u_max);
  sim->add_option("--vmin", sim_args.v_min, "barrier floor (default: from the models)");
  sim->add_option("--cj", sim_args.c_default, "default barrier gain");
  sim->add_flag("--serial", sim_args.serial, "run seeds on the serial reference path");

  ValidateArgs val_args;
  auto* val = app.add_subcommand("validate", "Run the self-checks and write a report");
  val->add_option("--report", val_args.report);
  val->add_flag("--perturb-qcqp", val_args.perturb_qcqp)->group("");  // test hook
  val->add_flag("--quick", val_args.quick)->group("");               // test hook

  try {
    app.parse(argc, argv);
    if (*train) return cmd_train(train_args);
    if (*exportg) return cmd_export_grid(export_args);
    if (*sim) return cmd_simulate(sim_args);
    if (*val) return cmd_validate(val_args);
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
