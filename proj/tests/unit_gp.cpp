#include "modnav/gp.hpp"

#include "modnav/validation.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace modnav::gp;
using modnav::geom::Vec2;

namespace {

GpModel five_point_model() {
  PointMatrix pts(5, 2);
  pts << 0, 0, 1, 0, -1, 0, 0, 1, 0, -1;
  return GpModel(pts, KernelParams{});
}

void randomize_means(GpModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  Eigen::VectorXd mv(m.size());
  PointMatrix mu(m.size(), 2);
  for (int i = 0; i < m.size(); ++i) {
    mv(i) = uni(rng);
    mu.row(i) << uni(rng), uni(rng);
  }
  m.set_means(std::move(mv), std::move(mu));
}

}  // namespace

TEST_CASE("rbf kernel, hand-computed values") {
  const KernelParams unit{};
  CHECK(kernel({0, 0}, {0, 0}, unit) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(kernel({0, 0}, {1, 1}, unit) ==
        doctest::Approx(0.36787944117144233).epsilon(1e-15));  // exp(-1)
  CHECK(kernel({0, 0}, {1, 1}, {2.0, 1.0, 1e-6}) ==
        doctest::Approx(0.7788007830714049).epsilon(1e-15));  // exp(-1/4)
  CHECK(kernel({0, 0}, {1, 1}, {1.0, 2.0, 1e-6}) ==
        doctest::Approx(2.0 * 0.36787944117144233).epsilon(1e-15));
  // Gradient wrt the first argument: -(a - b)/l^2 * k.
  const Vec2 g = kernel_grad({1, 1}, {0, 0}, unit);
  CHECK(g.x() == doctest::Approx(-0.36787944117144233).epsilon(1e-14));
  CHECK(g.y() == doctest::Approx(-0.36787944117144233).epsilon(1e-14));
}

TEST_CASE("kernel gradient matches finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  const KernelParams params{0.7, 1.3, 1e-6};
  for (int i = 0; i < 200; ++i) {
    const Vec2 a(uni(rng), uni(rng));
    const Vec2 b(uni(rng), uni(rng));
    const Vec2 g = kernel_grad(a, b, params);
    const auto f = [&](const Eigen::VectorXd& q) {
      return kernel(Vec2(q(0), q(1)), b, params);
    };
    const Eigen::VectorXd fd = modnav::validation::finite_diff(f, a, 1e-5);
    CHECK((g - Vec2(fd)).norm() <= 1e-8);
  }
}

TEST_CASE("lattice construction: counts and disc clipping") {
  const auto m2 = GpModel::lattice(2.0, 1.0, KernelParams{});
  CHECK(m2.size() == 13);  // integer points with x^2 + y^2 <= 4
  const auto m1 = GpModel::lattice(1.0, 1.0, KernelParams{});
  CHECK(m1.size() == 5);
  for (int i = 0; i < m2.size(); ++i) {
    CHECK(m2.base_points().row(i).norm() <= 2.0 + 1e-12);
  }
  // Means start at zero: the model predicts zero everywhere.
  CHECK(m2.predict_value({0.3, -0.7}) == 0.0);
  CHECK(m2.predict_policy({0.3, -0.7}).norm() == 0.0);
}

TEST_CASE("duplicate base points are rejected") {
  PointMatrix pts(2, 2);
  pts << 1, 1, 1, 1;
  CHECK_THROWS_AS(GpModel(pts, KernelParams{}), std::invalid_argument);
}

TEST_CASE("gram matrix stays positive definite with jitter") {
  const auto m = GpModel::lattice(4.0, 1.0, KernelParams{});
  const Eigen::MatrixXd K = m.gram();
  CHECK(K.rows() == m.size());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
  CHECK(eig.eigenvalues().minCoeff() >= 1e-6 * (1.0 - 1e-9));
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("interpolation weights are near a Kronecker delta at base points") {
  auto m = five_point_model();
  for (int i = 0; i < m.size(); ++i) {
    const Vec2 xi = m.base_points().row(i);
    const auto w = m.weights(xi, false);
    for (int j = 0; j < m.size(); ++j) {
      CHECK(std::abs(w.J(j) - (i == j ? 1.0 : 0.0)) <= 10.0 * 1e-6);
    }
  }
  randomize_means(m, 5);
  for (int i = 0; i < m.size(); ++i) {
    const Vec2 xi = m.base_points().row(i);
    CHECK(m.predict_value(xi) == doctest::Approx(m.mu_v()(i)).epsilon(1e-4));
    CHECK((m.predict_policy(xi) - Vec2(m.mu_u().row(i))).norm() <= 1e-4);
  }
}

TEST_CASE("weights vanish far from every base point") {
  const auto m = five_point_model();
  const auto w = m.weights({10.0, 10.0});
  CHECK(w.J.norm() <= 1e-8);
  CHECK(w.Jprime.norm() <= 1e-8);
}

TEST_CASE("value gradient matches finite differences of the value") {
  auto m = GpModel::lattice(3.0, 1.0, KernelParams{});
  randomize_means(m, 6);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const Vec2 x(uni(rng), uni(rng));
    const Vec2 g = m.predict_value_grad(x);
    const auto f = [&](const Eigen::VectorXd& q) { return m.predict_value(Vec2(q(0), q(1))); };
    const Eigen::VectorXd fd = modnav::validation::finite_diff(f, x, 1e-4);
    CHECK((g - Vec2(fd)).norm() <= 1e-5 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("predictions are linear in the stored means") {
  auto ma = GpModel::lattice(2.0, 1.0, KernelParams{});
  auto mb = ma;
  auto mc = ma;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::VectorXd va(ma.size()), vb(ma.size());
  PointMatrix ua(ma.size(), 2), ub(ma.size(), 2);
  for (int i = 0; i < ma.size(); ++i) {
    va(i) = uni(rng);
    vb(i) = uni(rng);
    ua.row(i) << uni(rng), uni(rng);
    ub.row(i) << uni(rng), uni(rng);
  }
  ma.set_means(va, ua);
  mb.set_means(vb, ub);
  mc.set_means(va + 2.0 * vb, ua + 2.0 * ub);
  for (int i = 0; i < 50; ++i) {
    const Vec2 x(uni(rng) * 2.5, uni(rng) * 2.5);
    CHECK(mc.predict_value(x) ==
          doctest::Approx(ma.predict_value(x) + 2.0 * mb.predict_value(x)).epsilon(1e-12));
    CHECK((mc.predict_policy(x) - (ma.predict_policy(x) + 2.0 * mb.predict_policy(x))).norm() <=
          1e-12);
  }
}

TEST_CASE("apply_gradients steps the means and rejects non-finite input") {
  auto m = five_point_model();
  randomize_means(m, 9);
  const Eigen::VectorXd mv0 = m.mu_v();
  const PointMatrix mu0 = m.mu_u();
  Eigen::VectorXd dv = Eigen::VectorXd::Ones(5);
  PointMatrix du = PointMatrix::Ones(5, 2);
  REQUIRE(m.apply_gradients(dv, du, 0.1));
  CHECK((m.mu_v() - (mv0 - 0.1 * dv)).norm() == 0.0);
  CHECK((m.mu_u() - (mu0 - 0.1 * du)).norm() == 0.0);

  dv(2) = std::nan("");
  const Eigen::VectorXd mv1 = m.mu_v();
  CHECK_FALSE(m.apply_gradients(dv, du, 0.1));
  CHECK((m.mu_v() - mv1).norm() == 0.0);  // untouched on rejection
}

TEST_CASE("base points are immutable under gradient steps") {
  auto m = five_point_model();
  const PointMatrix before = m.base_points();
  m.apply_gradients(Eigen::VectorXd::Ones(5), PointMatrix::Ones(5, 2), 0.5);
  CHECK((m.base_points() - before).norm() == 0.0);
}

TEST_CASE("grid evaluation: layout, and the parallel kernel matches serial exactly") {
  auto m = GpModel::lattice(3.0, 1.0, KernelParams{});
  randomize_means(m, 10);
  const int res = 41;
  const double bound = 3.5;
  const auto serial = evaluate_on_grid(m, bound, res, false);
  const auto parallel = evaluate_on_grid(m, bound, res, true);
  REQUIRE(serial.size() == static_cast<size_t>(res) * res);
  REQUIRE(parallel.size() == serial.size());
  const double h = 2.0 * bound / (res - 1);
  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      const auto& s = serial[static_cast<size_t>(iy) * res + ix];
      CHECK(s.x == doctest::Approx(-bound + ix * h).epsilon(1e-12));
      CHECK(s.y == doctest::Approx(-bound + iy * h).epsilon(1e-12));
    }
  }
  for (size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].value == parallel[i].value);  // bitwise
    CHECK((serial[i].policy - parallel[i].policy).norm() == 0.0);
    CHECK(serial[i].value ==
          m.predict_value(Vec2(serial[i].x, serial[i].y)));
  }
}
