#include "modnav/env.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace modnav::env;
using modnav::geom::Rectangle;
using modnav::geom::Shape;
using modnav::geom::Vec2;

namespace {
const Shape kRect = Rectangle{4.0, 2.0};
const TrainingRange kRange{8.0};
}  // namespace

TEST_CASE("euler step with drifting element, hand-computed") {
  const MotionProfile motion{{0.6, 0.0}};
  const auto r = step({3.0, 0.0}, {-0.2, 0.0}, motion, 0.1);
  CHECK(r.xdot.x() == doctest::Approx(-0.8).epsilon(1e-15));
  CHECK(r.xdot.y() == doctest::Approx(0.0));
  CHECK(r.x_next.x() == doctest::Approx(2.92).epsilon(1e-15));
  CHECK(r.x_next.y() == doctest::Approx(0.0));
}

TEST_CASE("step rejects bad input") {
  CHECK_THROWS_AS(step({1, 0}, {0, 0}, {}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(step({1, 0}, {0, 0}, {}, -0.1), std::invalid_argument);
  const double nan = std::nan("");
  CHECK_THROWS_AS(step({nan, 0}, {0, 0}, {}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(step({1, 0}, {nan, 0}, {}, 0.1), std::invalid_argument);
}

TEST_CASE("event classification agrees with signed distance and range") {
  CHECK(classify({0, 0}, kRect, kRange) == Event::Contact);
  CHECK(classify({2, 0}, kRect, kRange) == Event::Contact);  // boundary counts
  CHECK(classify({3, 3}, kRect, kRange) == Event::None);
  CHECK(classify({9, 0}, kRect, kRange) == Event::OutOfBound);
  CHECK(classify({8.0 + 1e-9, 0}, kRect, kRange) == Event::OutOfBound);
  CHECK(classify({8.0, 0}, kRect, kRange) == Event::None);  // disc is closed
  // Contact wins when a (mis-sized) range overlaps the shape.
  CHECK(classify({1.0, 0.0}, kRect, TrainingRange{0.5}) == Event::Contact);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-10.0, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const Vec2 x(uni(rng), uni(rng));
    const Event e = classify(x, kRect, kRange);
    if (modnav::geom::signed_distance(x, kRect) <= 0.0) {
      CHECK(e == Event::Contact);
    } else if (x.norm() > kRange.radius) {
      CHECK(e == Event::OutOfBound);
    } else {
      CHECK(e == Event::None);
    }
  }
}

TEST_CASE("initial states are uniform over the free disc") {
  std::mt19937_64 rng(8);
  int in_left_half = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Vec2 x = sample_initial(kRect, kRange, rng);
    CHECK(x.norm() <= kRange.radius + 1e-12);
    CHECK(modnav::geom::signed_distance(x, kRect) > 0.0);
    in_left_half += x.x() < 0.0;
  }
  // Symmetric shape: the halves should split evenly (5 sigma margin).
  CHECK(std::abs(in_left_half - n / 2) < 5 * std::sqrt(n / 4.0));
  CHECK_THROWS_AS(sample_initial(kRect, TrainingRange{1.0}, rng), std::invalid_argument);
}

TEST_CASE("rollout emits the terminal event exactly once, as the last sample") {
  std::mt19937_64 rng(9);
  const Policy toward_origin = [](const Vec2& x) { return Vec2(-x.normalized()); };
  const Policy outward = [](const Vec2& x) { return Vec2(x.normalized()); };
  for (int rep = 0; rep < 50; ++rep) {
    for (const auto* pol : {&toward_origin, &outward}) {
      const auto traj = rollout(*pol, kRect, {}, kRange, 0.05, 400, rng);
      CHECK(traj.size() <= 400);
      REQUIRE(!traj.empty());
      for (size_t i = 0; i + 1 < traj.size(); ++i) CHECK(traj[i].event == Event::None);
      if (traj.size() < 400) CHECK(traj.back().event != Event::None);
      // Each sample's xdot is the policy action minus the element velocity.
      for (const auto& s : traj) CHECK((s.xdot - (s.u - Vec2(0, 0))).norm() == 0.0);
    }
  }
}

TEST_CASE("rollout is bit-reproducible for a fixed seed") {
  const Policy noisy = [](const Vec2& x) { return Vec2(-0.3 * x.normalized()); };
  std::mt19937_64 rng_a(123);
  std::mt19937_64 rng_b(123);
  const auto ta = rollout(noisy, kRect, {{0.2, 0.1}}, kRange, 0.05, 200, rng_a);
  const auto tb = rollout(noisy, kRect, {{0.2, 0.1}}, kRange, 0.05, 200, rng_b);
  REQUIRE(ta.size() == tb.size());
  for (size_t i = 0; i < ta.size(); ++i) {
    CHECK((ta[i].x - tb[i].x).norm() == 0.0);
    CHECK((ta[i].xdot - tb[i].xdot).norm() == 0.0);
    CHECK((ta[i].u - tb[i].u).norm() == 0.0);
    CHECK(ta[i].event == tb[i].event);
  }
}

TEST_CASE("rollout rejects a non-finite policy") {
  std::mt19937_64 rng(10);
  const Policy bad = [](const Vec2&) { return Vec2(std::nan(""), 0.0); };
  CHECK_THROWS_AS(rollout(bad, kRect, {}, kRange, 0.05, 10, rng), std::runtime_error);
}
