#include "doctest.h"
#include "planestack/cutoff.hpp"

#include <cmath>

using planestack::CutChart;
using planestack::smooth_step;
using planestack::smooth_step_d;
using planestack::smooth_step_dd;

TEST_CASE("smooth_step: range, support, symmetry") {
  CHECK(smooth_step(-1.0) == 0.0);
  CHECK(smooth_step(-5.0) == 0.0);
  CHECK(smooth_step(1.0) == 1.0);
  CHECK(smooth_step(7.0) == 1.0);
  CHECK(smooth_step(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  for (double t = -0.95; t < 1.0; t += 0.05) {
    const double s = smooth_step(t);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    // Psi - 1/2 is odd.
    CHECK(std::abs((s - 0.5) + (smooth_step(-t) - 0.5)) < 1e-14);
  }
}

TEST_CASE("smooth_step: monotone on the transition") {
  double prev = 0.0;
  for (double t = -1.0; t <= 1.0; t += 1.0 / 512.0) {
    const double s = smooth_step(t);
    CHECK(s >= prev - 1e-15);
    prev = s;
  }
}

TEST_CASE("smooth_step: analytic derivatives match finite differences") {
  const double h = 1e-5;
  for (double t = -0.9; t < 0.95; t += 0.075) {
    const double fd1 = (smooth_step(t + h) - smooth_step(t - h)) / (2 * h);
    const double fd2 =
        (smooth_step(t + h) - 2 * smooth_step(t) + smooth_step(t - h)) / (h * h);
    CHECK(std::abs(smooth_step_d(t) - fd1) < 1e-7);
    CHECK(std::abs(smooth_step_dd(t) - fd2) < 1e-5);
  }
  // Flat outside the transition.
  CHECK(smooth_step_d(-1.5) == 0.0);
  CHECK(smooth_step_d(2.0) == 0.0);
  CHECK(smooth_step_dd(-1.5) == 0.0);
}

TEST_CASE("CutChart: transition confined to the middle third") {
  CutChart up{1.0, 4.0};   // 0 at 1, 1 at 4
  CHECK(up(1.0) == 0.0);
  CHECK(up(1.99) == 0.0);
  CHECK(up(3.01) == 1.0);
  CHECK(up(4.0) == 1.0);
  CHECK(up(2.5) == doctest::Approx(0.5).epsilon(1e-14));

  CutChart down{4.0, 1.0};  // reversed orientation: 0 at 4, 1 at 1
  CHECK(down(4.0) == 0.0);
  CHECK(down(1.0) == 1.0);
  // Partition of unity between the two orientations.
  for (double t = 0.5; t < 4.5; t += 0.1) {
    CHECK(std::abs(up(t) + down(t) - 1.0) < 1e-14);
  }
}

TEST_CASE("CutChart: chain-rule derivatives match finite differences") {
  CutChart c{2.0, 0.5};
  const double h = 1e-5;
  for (double t = 0.6; t < 2.0; t += 0.1) {
    const double fd1 = (c(t + h) - c(t - h)) / (2 * h);
    const double fd2 = (c(t + h) - 2 * c(t) + c(t - h)) / (h * h);
    CHECK(std::abs(c.d(t) - fd1) < 1e-6);
    CHECK(std::abs(c.dd(t) - fd2) < 1e-4);
  }
}

TEST_CASE("blend: endpoint values and midpoint mix") {
  auto lo = 1.0, hi = 3.0;
  CHECK(planestack::blend(lo, hi, 0.9, 10.0, 20.0) == 10.0);
  CHECK(planestack::blend(lo, hi, 3.2, 10.0, 20.0) == 20.0);
  CHECK(planestack::blend(lo, hi, 2.0, 10.0, 20.0) ==
        doctest::Approx(15.0).epsilon(1e-12));
}
