#include "modnav/model_io.hpp"

#include <fstream>
#include <stdexcept>

namespace modnav::io {

using nlohmann::json;

json shape_to_json(const geom::Shape& shape) {
  json j;
  if (std::holds_alternative<geom::Rectangle>(shape)) {
    const auto& r = std::get<geom::Rectangle>(shape);
    j["type"] = "rectangle";
    j["width"] = r.width;
    j["height"] = r.height;
  } else {
    const auto& p = std::get<geom::Polygon>(shape);
    j["type"] = "polygon";
    auto& verts = j["vertices"] = json::array();
    for (const auto& v : p.vertices) verts.push_back({v.x(), v.y()});
  }
  return j;
}

geom::Shape shape_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  geom::Shape shape;
  if (type == "rectangle") {
    shape = geom::Rectangle{j.at("width").get<double>(), j.at("height").get<double>()};
  } else if (type == "polygon") {
    geom::Polygon p;
    for (const auto& v : j.at("vertices")) {
      p.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    }
    shape = p;
  } else {
    throw std::invalid_argument("unknown shape type: " + type);
  }
  geom::validate_shape(shape);
  return shape;
}

json model_to_json(const gp::ElementModel& model) {
  const auto& m = model.gp;
  json j;
  j["state_dim"] = 2;
  j["control_dim"] = 2;
  j["kernel"] = {{"type", "rbf"},
                 {"lengthscale", m.kernel_params().lengthscale},
                 {"variance", m.kernel_params().variance},
                 {"jitter", m.kernel_params().jitter}};
  auto& pts = j["base_points"] = json::array();
  for (Eigen::Index i = 0; i < m.base_points().rows(); ++i) {
    pts.push_back({m.base_points()(i, 0), m.base_points()(i, 1)});
  }
  auto& mv = j["mu_v"] = json::array();
  for (Eigen::Index i = 0; i < m.mu_v().size(); ++i) mv.push_back(m.mu_v()(i));
  auto& mu = j["mu_u"] = json::array();
  for (Eigen::Index i = 0; i < m.mu_u().rows(); ++i) {
    mu.push_back({m.mu_u()(i, 0), m.mu_u()(i, 1)});
  }
  j["element"] = {{"shape", shape_to_json(model.element.shape)},
                  {"motion", {{"velocity", {model.element.motion.velocity.x(),
                                            model.element.motion.velocity.y()}}}},
                  {"range", model.element.range.radius}};
  j["training"] = {{"epochs", model.training.epochs},
                   {"max_steps", model.training.max_steps},
                   {"lambda", model.training.lambda},
                   {"qc", model.training.qc},
                   {"dt", model.training.dt},
                   {"seed", model.training.seed},
                   {"u_max", model.training.u_max},
                   {"eta", model.training.eta},
                   {"sigma_explore", model.training.sigma_explore},
                   {"w_term", model.training.w_term}};
  return j;
}

gp::ElementModel model_from_json(const json& j) {
  if (j.at("state_dim").get<int>() != 2 || j.at("control_dim").get<int>() != 2) {
    throw std::invalid_argument("model file: only 2-D state and control are supported");
  }
  const auto& jk = j.at("kernel");
  if (jk.at("type").get<std::string>() != "rbf") {
    throw std::invalid_argument("model file: unknown kernel type");
  }
  gp::KernelParams params{jk.at("lengthscale").get<double>(), jk.at("variance").get<double>(),
                          jk.at("jitter").get<double>()};
  const auto& jp = j.at("base_points");
  gp::PointMatrix x(jp.size(), 2);
  for (size_t i = 0; i < jp.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = jp[i].at(0).get<double>();
    x(static_cast<Eigen::Index>(i), 1) = jp[i].at(1).get<double>();
  }
  gp::GpModel m(std::move(x), params);
  const auto& jv = j.at("mu_v");
  const auto& ju = j.at("mu_u");
  if (jv.size() != static_cast<size_t>(m.size()) || ju.size() != static_cast<size_t>(m.size())) {
    throw std::invalid_argument("model file: mean sizes do not match base points");
  }
  Eigen::VectorXd mu_v(m.size());
  gp::PointMatrix mu_u(m.size(), 2);
  for (int i = 0; i < m.size(); ++i) {
    mu_v(i) = jv[static_cast<size_t>(i)].get<double>();
    mu_u(i, 0) = ju[static_cast<size_t>(i)].at(0).get<double>();
    mu_u(i, 1) = ju[static_cast<size_t>(i)].at(1).get<double>();
  }
  m.set_means(std::move(mu_v), std::move(mu_u));

  gp::ElementModel out{std::move(m), {}, {}};
  const auto& je = j.at("element");
  out.element.shape = shape_from_json(je.at("shape"));
  const auto& vel = je.at("motion").at("velocity");
  out.element.motion.velocity = geom::Vec2(vel.at(0).get<double>(), vel.at(1).get<double>());
  out.element.range.radius = je.at("range").get<double>();
  const auto& jt = j.at("training");
  out.training = {jt.at("epochs").get<int>(),
                  jt.at("max_steps").get<int>(),
                  jt.at("lambda").get<double>(),
                  jt.at("qc").get<double>(),
                  jt.at("dt").get<double>(),
                  jt.at("seed").get<std::uint64_t>(),
                  jt.at("u_max").get<double>(),
                  jt.at("eta").get<double>(),
                  jt.at("sigma_explore").get<double>(),
                  jt.at("w_term").get<double>()};
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const auto dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + tmp);
    f << contents;
    if (!f.good()) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void save_model(const std::filesystem::path& path, const gp::ElementModel& model) {
  write_file_atomic(path, model_to_json(model).dump(2) + "\n");
}

gp::ElementModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open model file: " + path.string());
  json j;
  f >> j;
  return model_from_json(j);
}

}  // namespace modnav::io
