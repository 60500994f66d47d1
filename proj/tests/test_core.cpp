#include <doctest.h>

#include <random>
#include <stdexcept>

#include "evmarl/core.hpp"

using namespace evmarl;

TEST_CASE("tiou examples") {
  CHECK(tiou({0.3, 0.6}, {0.3, 0.6}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tiou({0.3, 0.6}, {0.4, 0.7}) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(tiou({0.0, 0.1}, {0.5, 0.6}) == 0.0);
  CHECK(tiou({0.4, 0.4}, {0.4, 0.4}) == 1.0);
  CHECK(tiou({0.4, 0.52}, {0.3, 0.6}) == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("tiou symmetric and bounded") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    Interval x{std::min(a, b), std::max(a, b)}, y{std::min(c, d), std::max(c, d)};
    const double t = tiou(x, y);
    CHECK(t == tiou(y, x));
    CHECK(t >= 0.0);
    CHECK(t <= 1.0);
    if (x.end > x.start) CHECK(tiou(x, x) == doctest::Approx(1.0));
  }
}

TEST_CASE("boundary distance") {
  CHECK(boundary_distance(0.5, 0.5) == 0.0);
  CHECK(boundary_distance(0.1, 0.5) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(boundary_distance(0.9, 0.5) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("relative location classes") {
  auto a = rel_loc_class({0.1, 0.22}, {0.5, 0.8}, 0.12);
  CHECK(a.start_class == RelLoc::LeftFar);
  CHECK(a.end_class == RelLoc::LeftFar);
  CHECK(a.joint_index == 0);

  auto b = rel_loc_class({0.45, 0.57}, {0.5, 0.6}, 0.12);
  CHECK(b.start_class == RelLoc::LeftNear);
  CHECK(b.end_class == RelLoc::LeftNear);
  CHECK(b.joint_index == 5);

  auto c = rel_loc_class({0.5, 0.6}, {0.5, 0.6}, 0.12);
  CHECK(c.joint_index == 5);

  CHECK(rel_loc(0.7, 0.5, 0.12) == RelLoc::RightFar);
  CHECK(rel_loc(0.55, 0.5, 0.12) == RelLoc::RightNear);
  CHECK(rel_loc_class({0.9, 1.0}, {0.1, 0.95}, 0.12).joint_index == 4 * 3 + 2);
}

TEST_CASE("relative location partitions the plane") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    const double b = u(rng), g = u(rng), f0 = 0.01 + u(rng) * 0.3;
    const RelLoc r = rel_loc(b, g, f0);
    const double k = std::abs(b - g);
    int hits = 0;
    hits += (b < g && k > f0);
    hits += (b <= g && k <= f0);
    hits += (b > g && k <= f0);
    hits += (b > g && k > f0);
    CHECK(hits == 1);
    auto cls = rel_loc_class({b, u(rng)}, {g, u(rng)}, f0);
    CHECK(cls.joint_index >= 0);
    CHECK(cls.joint_index < kNumLocClasses);
    CHECK(cls.joint_index == 4 * static_cast<int>(cls.start_class) + static_cast<int>(cls.end_class));
    (void)r;
  }
}

TEST_CASE("validity condition") {
  CHECK(is_valid(0.3, Boundary::Start, 0.6));
  CHECK_FALSE(is_valid(0.7, Boundary::Start, 0.6));
  CHECK_FALSE(is_valid(1.2, Boundary::End, 0.6));
  CHECK_FALSE(is_valid(-0.1, Boundary::Start, 0.6));
  CHECK(is_valid(0.6, Boundary::End, 0.3));
  CHECK_FALSE(is_valid(0.6, Boundary::End, 0.6));
}

TEST_CASE("conflict and eta examples") {
  CHECK(conflict({0.1, 0.4}, {0.1, 0.4}) == 0.0);
  CHECK(conflict({0.1, 0.4}, {0.2, 0.6}) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(conflict({0.0, 1.0}, {1.0, 0.0}) == 2.0);

  const std::vector<Interval> three = {{0.1, 0.4}, {0.12, 0.43}, {0.5, 0.9}};
  CHECK(eta(three) == doctest::Approx(0.9).epsilon(1e-12));
  const std::vector<Interval> same = {{0.2, 0.5}, {0.2, 0.5}};
  CHECK(eta(same) == 0.0);
  const std::vector<Interval> two = {{0.1, 0.4}, {0.2, 0.6}};
  CHECK(eta(two) == doctest::Approx(0.3).epsilon(1e-12));

  const std::vector<Interval> one = {{0.1, 0.4}};
  CHECK_THROWS_AS(eta(one), std::invalid_argument);
}

TEST_CASE("conflict report structure") {
  const std::vector<Interval> finals = {{0.1, 0.4}, {0.12, 0.43}, {0.5, 0.9}, {0.0, 1.0}};
  auto r = conflict_report(finals);
  CHECK(r.pairwise.size() == 6);
  double mx = 0.0;
  for (const auto& p : r.pairwise) {
    CHECK(p.agent_i < p.agent_j);
    CHECK(p.conflict >= 0.0);
    CHECK(p.conflict == conflict(finals[p.agent_i], finals[p.agent_j]));
    mx = std::max(mx, p.conflict);
  }
  CHECK(r.eta == mx);
  CHECK(r.verdict == Verdict::Unset);
}

TEST_CASE("conflict is a metric") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto iv = [&] {
    double a = u(rng), b = u(rng);
    return Interval{std::min(a, b), std::max(a, b)};
  };
  for (int i = 0; i < 10000; ++i) {
    Interval x = iv(), y = iv(), z = iv();
    const double xy = conflict(x, y);
    CHECK(xy >= 0.0);
    CHECK(xy == conflict(y, x));
    CHECK(conflict(x, x) == 0.0);
    if (!(x == y)) CHECK(xy > 0.0);
    CHECK(conflict(x, z) <= xy + conflict(y, z) + 1e-12);
    const std::vector<Interval> all = {x, y, z};
    CHECK(eta(all) >= xy);
  }
}
