#include "doctest.h"
#include "planestack/geometry.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "planestack/balance.hpp"
#include "planestack/cutoff.hpp"

using namespace planestack;
using V2 = Eigen::Vector2d;
using V3 = Eigen::Vector3d;

namespace {

constexpr double PI = 3.14159265358979323846;

// Metric length of a straight segment [0, X] through the origin:
// int_0^X e^{-t^2/8} dt.
double straight_arclen(double X) {
  return std::sqrt(2 * PI) * std::erf(X / (2 * std::sqrt(2.0)));
}

// One balanced single-bridge stack, solved once and shared: every level-field
// case below reads the same configuration.
const NewtonResult& solved_16() {
  static NewtonResult res = newton_solve(1, 16, ParamVector::zero(1));
  return res;
}

const std::vector<LevelField>& fields_16() {
  static std::vector<LevelField> lfs = build_level_fields(solved_16().pv, 16);
  return lfs;
}

}  // namespace

TEST_CASE("gaussian weight: value and gradient") {
  const AmbientPoint x{1.2, -0.5, 2.0};
  const WeightJet wj = gaussian_weight(x);
  CHECK(wj.w == doctest::Approx(-x.squaredNorm() / 8.0).epsilon(1e-15));
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    AmbientPoint xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const double fd = (gaussian_weight(xp).w - gaussian_weight(xm).w) / (2 * h);
    CHECK(std::abs(wj.grad[k] - fd) < 1e-9);
  }
  CHECK(gaussian_weight(AmbientPoint::Zero()).w == 0.0);
  CHECK(gaussian_weight(AmbientPoint::Zero()).grad.norm() == 0.0);
}

TEST_CASE("conformal geodesics: conserved speed and rays through the origin") {
  const AmbientPoint x0{0.4, -0.2, 0.1};
  const V3 v0{0.3, 0.5, -0.2};
  const GeodesicResult g = conformal_geodesic(x0, v0);
  CHECK(g.speed_drift < 1e-10);
  // Unit flow time at conserved metric speed |v|_g: the curve has that length.
  const double sp0 = std::exp(-x0.squaredNorm() / 8.0) * v0.norm();
  const double sp1 = std::exp(-g.state.x.squaredNorm() / 8.0) * g.state.xdot.norm();
  CHECK(std::abs(sp1 - sp0) < 1e-10 * sp0);

  // Straight lines through the origin are geodesics: the flow never leaves
  // the ray, and its endpoint matches the closed-form arclength inversion.
  const GeodesicResult ray = conformal_geodesic({0, 0, 0}, {0.9, 0, 0});
  CHECK(ray.state.x.y() == 0.0);
  CHECK(ray.state.x.z() == 0.0);
  CHECK(std::abs(straight_arclen(ray.state.x.x()) - 0.9) < 1e-10);

  CHECK_THROWS_AS(conformal_geodesic(x0, v0, 0), std::invalid_argument);
  CHECK_THROWS_AS(
      conformal_geodesic({std::nan(""), 0, 0}, v0), std::invalid_argument);
}

TEST_CASE("normal chart: identity, plane preservation, leg lengths") {
  // Zero legs return the base point exactly.
  const AmbientPoint id = fermi_map({0.7, -1.1}, {0, 0}, 0.0);
  CHECK(id.x() == 0.7);
  CHECK(id.y() == -1.1);
  CHECK(id.z() == 0.0);

  // In-plane legs stay in the plane bit-exactly.
  const AmbientPoint flat = fermi_map({1.0, 0.2}, {0.3, -0.4}, 0.0);
  CHECK(flat.z() == 0.0);

  // Vertical legs from the origin: arclength along the axis is erf-exact.
  // The integration error grows with the leg, capped by the drift gate.
  for (auto [s, tol] : {std::pair{0.3, 1e-12}, {1.0, 1e-9}, {1.5, 1e-8}}) {
    const AmbientPoint X = fermi_map({0, 0}, {0, 0}, s);
    CHECK(X.x() == 0.0);
    CHECK(X.y() == 0.0);
    CHECK(std::abs(straight_arclen(X.z()) - s) < tol);
  }

  // Radial in-plane leg: same closed form, as a difference of arclengths.
  const AmbientPoint X = fermi_map({2.0, 0.0}, {-0.5, 0.0}, 0.0);
  CHECK(std::abs((straight_arclen(2.0) - straight_arclen(X.x())) - 0.5) <
        1e-9);

  CHECK_THROWS_AS(fermi_map({0, 0}, {0, 0}, std::nan("")),
                  std::invalid_argument);
  // Long normal legs leave the accuracy budget of the fixed step count.
  CHECK_THROWS_AS(fermi_map({0, 0}, {0, 0}, 2.5), std::runtime_error);
}

TEST_CASE("normal chart: weighted height matches the coordinate to cubic order") {
  const V2 p{1.2, 0.4};
  const double wp = std::exp(-p.squaredNorm() / 8.0);
  double first = 0, last = 0;
  for (double s : {0.2, 0.1, 0.05, 0.025}) {
    const AmbientPoint X = fermi_map(p, {0, 0}, s);
    const double ratio = std::abs(wp * X.z() - s) / (s * s * s);
    CHECK(ratio < 0.02);
    if (s == 0.2) first = ratio;
    last = ratio;
  }
  // The ratio settles to a constant: e^{w(p)} z agrees with the normal
  // coordinate through second order, and the cubic term has a fixed
  // coefficient.
  CHECK(std::abs(last - first) < 0.1 * first);
}

TEST_CASE("bridge chart: waist circle, tilt, and height inversion") {
  BridgeSpec spec;
  spec.p = {1.5, 0.3};
  spec.tau = 0.05;
  spec.h = 0.01;
  spec.kappa = 0.4;
  spec.kappa_perp = 0.3;

  // Untilted model: the waist is a circle of radius tau in the chart plane
  // z = h. Model coordinates are centred at the site; the site and the
  // ambient weight only enter through catenoid_point.
  BridgeSpec plain = spec;
  plain.kappa = plain.kappa_perp = 0;
  for (double vt : {0.0, 1.0, 2.5}) {
    const AmbientPoint W = catenoid_model(plain, 0.0, vt);
    CHECK(std::abs(W.head<2>().norm() - spec.tau) < 1e-14);
    CHECK(std::abs(W.z() - plain.h) < 1e-14);
  }
  // The tilt rotates the whole raised bridge about the off-radial axis and
  // the offset then lifts it by tau*kappa_perp: on the rotation axis only
  // the lift survives.
  BridgeSpec level = spec;
  level.h = 0;
  const AmbientPoint c0 = catenoid_model(level, 0.0, PI / 2);
  CHECK(std::abs(c0.z() - spec.tau * spec.kappa_perp) < 1e-14);
  const double sb = std::sin(std::atan(spec.tau * spec.kappa));
  const AmbientPoint c1 = catenoid_model(level, 0.0, 0.0);
  CHECK(std::abs(c1.z() - (spec.tau * sb + spec.tau * spec.kappa_perp)) <
        1e-14);

  // The chart bound cuts off at rho_max.
  BridgeSpec bounded = spec;
  bounded.rho_max = 2 * spec.tau;
  CHECK_NOTHROW(catenoid_model(bounded, 1.0, 0.0));
  CHECK_THROWS_AS(catenoid_model(bounded, 2.0, 0.0), std::domain_error);
  BridgeSpec bad = spec;
  bad.tau = 0;
  CHECK_THROWS_AS(catenoid_model(bad, 0.0, 0.0), std::domain_error);

  // Round trip: push a chart point to the surface, drop to the plane,
  // recover height and chart coordinates.
  for (double s : {1.2, -1.2, 0.8}) {
    const int branch = s > 0 ? 1 : -1;
    const AmbientPoint X = catenoid_point(spec, s, 0.7);
    const CatHeight ch = catenoid_height(spec, X.head<2>(), branch);
    CHECK(std::abs(ch.z - X.z()) < 1e-11);
    CHECK(std::abs(ch.s - s) < 1e-9);
    CHECK(std::abs(ch.vartheta - 0.7) < 1e-9);
  }
  CHECK_THROWS_AS(catenoid_height(spec, spec.p, 2), std::invalid_argument);
  // At the waist the two branches collide; the inversion refuses the call.
  CHECK_THROWS_AS(
      catenoid_height(spec, spec.p + V2{spec.tau * 1.0001, 0.0}, 1),
      std::domain_error);
}

TEST_CASE("curvature probes: shrinker zeros and scheme guards") {
  PatchFn sphere = [](double u, double v) {
    return AmbientPoint{2 * std::sin(u) * std::cos(v),
                        2 * std::sin(u) * std::sin(v), 2 * std::cos(u)};
  };
  PatchFn cyl = [](double u, double v) {
    return AmbientPoint{std::sqrt(2.0) * std::cos(u),
                        std::sqrt(2.0) * std::sin(u), v};
  };
  PatchFn plane = [](double u, double v) { return AmbientPoint{u, v, 0.7}; };

  CHECK(std::abs(mean_curvature_fd(plane, 0.1, -0.3, 1e-3)) < 1e-12);
  CHECK(mean_curvature_fd(sphere, 0.9, 0.4, 1e-3) ==
        doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(mean_curvature_fd(cyl, 0.5, 0.8, 1e-3) ==
        doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-8));

  // The sphere of radius 2 and the cylinder of radius sqrt(2) kill the
  // weighted operator identically, for either orientation convention.
  CHECK(std::abs(weighted_mean_curvature(sphere, 0.9, 0.4, 1e-3)) < 1e-9);
  CHECK(std::abs(weighted_mean_curvature(cyl, 0.5, 0.8, 1e-3)) < 1e-9);

  CHECK_THROWS_AS(mean_curvature_fd(sphere, 0.9, 0.4, 0.0), std::domain_error);
  CHECK_THROWS_AS(mean_curvature_fd(sphere, 1e9, 0.4, 1e-14),
                  std::domain_error);
  PatchFn degenerate = [](double, double) { return AmbientPoint{1, 2, 3}; };
  CHECK_THROWS_AS(mean_curvature_fd(degenerate, 0.0, 0.0, 1e-3),
                  std::runtime_error);
}

TEST_CASE("graph curvature: jet route agrees with the embedded patch") {
  auto phi = [](double x, double y) {
    return 0.3 * std::sin(x) * std::cos(0.7 * y) + 0.05 * x * x * y;
  };
  const V2 q{0.8, -0.6};
  GraphJet j;
  j.v = phi(q.x(), q.y());
  j.grad = {0.3 * std::cos(q.x()) * std::cos(0.7 * q.y()) +
                0.1 * q.x() * q.y(),
            -0.21 * std::sin(q.x()) * std::sin(0.7 * q.y()) +
                0.05 * q.x() * q.x()};
  j.hess(0, 0) =
      -0.3 * std::sin(q.x()) * std::cos(0.7 * q.y()) + 0.1 * q.y();
  j.hess(1, 1) = -0.147 * std::sin(q.x()) * std::cos(0.7 * q.y());
  j.hess(0, 1) = j.hess(1, 0) =
      -0.21 * std::cos(q.x()) * std::sin(0.7 * q.y()) + 0.1 * q.x();

  PatchFn gp = [&](double u, double v) { return AmbientPoint{u, v, phi(u, v)}; };
  CHECK(std::abs(graph_h2w(j, q) -
                 weighted_mean_curvature(gp, q.x(), q.y(), 1e-3)) < 1e-7);

  // Flat graph far from the origin: H vanishes but the position term does
  // not, so the weighted operator sees the plane offset.
  GraphJet flat;
  flat.v = 0.7;
  const V2 q0{0, 0};
  CHECK(graph_h2w(flat, q0) == doctest::Approx(0.35).epsilon(1e-12));
}

TEST_CASE("assembled levels: structure, windows, and correction size") {
  const auto& lfs = fields_16();
  REQUIRE(lfs.size() == 2);
  CHECK(lfs[0].two_j == -1);
  CHECK(lfs[1].two_j == 1);
  for (const auto& lf : lfs) {
    CHECK(lf.m == 16);
    REQUIRE(lf.att.size() == 1);
    const auto& a = lf.att[0];
    CHECK(a.two_ell == 0);
    // The single interface sits below the upper level and above the lower.
    CHECK(a.side == (lf.two_j > 0 ? 1 : -1));
    CHECK(a.lat.m == 16);

    const double tau = a.bridge.tau;
    CHECK(tau > 0);
    CHECK(tau < 1e-2);
    const double d_nn = 2 * a.lat.ring_r * std::sin(PI / 16);
    // At this size the hole takes the 9 tau branch and the blend window is
    // clamped by the site spacing.
    CHECK(a.r_hole == doctest::Approx(9 * tau).epsilon(1e-12));
    CHECK(a.d_hi == doctest::Approx(0.45 * d_nn).epsilon(1e-12));
    CHECK(a.d_lo == doctest::Approx(2.0 / 3.0 * a.d_hi).epsilon(1e-12));
    CHECK(a.r_hole < a.d_lo);
    CHECK(a.d_lo < a.d_hi);

    // The balanced configuration already carries the designed tilts; the
    // explicit corrections only absorb the finite solver residual.
    CHECK(std::abs(a.c_flat) < 1e-5);
    CHECK(std::abs(a.c_tilt) < 1e-5);

    // Mirror symmetry of the stack: both bridges agree up to the side sign.
    CHECK(a.bridge.h == doctest::Approx(0.0).epsilon(1e-30));
  }
  const auto& up = lfs[1].att[0];
  const auto& dn = lfs[0].att[0];
  CHECK(up.bridge.tau == doctest::Approx(dn.bridge.tau).epsilon(1e-12));
  CHECK(up.bridge.kappa == doctest::Approx(dn.bridge.kappa).epsilon(1e-12));

  // bridge_at recentres on the requested site.
  const BridgeSpec b3 = bridge_at(up, 3);
  CHECK((b3.p - up.lat.site(3)).norm() < 1e-14);
  CHECK(b3.tau == up.bridge.tau);
}

TEST_CASE("assembled levels: zones partition the plane around a site") {
  const auto& lf = fields_16()[1];
  const auto& a = lf.att[0];
  const V2 site = a.lat.site(0);
  const V2 out = site.normalized();

  auto zone_at = [&](double d) { return classify(lf, site + d * out); };
  CHECK(zone_at(0.5 * a.r_hole).kind == ZoneKind::Hole);
  CHECK(zone_at(0.5 * (a.r_hole + a.d_lo)).kind == ZoneKind::Core);
  CHECK(zone_at(0.5 * (a.d_lo + a.d_hi)).kind == ZoneKind::Blend);
  CHECK(zone_at(2.0 * a.d_hi).kind == ZoneKind::Graph);
  CHECK(zone_at(1.1 * a.r_hole).att == 0);
  CHECK(zone_at(1.1 * a.r_hole).site == 0);

  // Far from every site the level is a plain graph.
  const Zone far = classify(lf, V2{0.1, 0.0});
  CHECK(far.kind == ZoneKind::Graph);

  CHECK_THROWS_AS(graph_phi_gl(lf, site + 0.5 * a.r_hole * out),
                  std::domain_error);
}

TEST_CASE("assembled levels: bridge and field heights agree across the seam") {
  const auto& lf = fields_16()[1];
  const auto& a = lf.att[0];
  const V2 site = a.lat.site(0);

  // The corrected field and the catenoid branch were matched by the balance
  // step; across the blend window they differ by the finite-solve residual
  // scale, far below either height.
  double worst = 0, scale = 0;
  for (double d : {a.d_lo, 0.5 * (a.d_lo + a.d_hi), a.d_hi}) {
    for (int k = 0; k < 8; ++k) {
      const double ang = 2 * PI * k / 8;
      const V2 q = site + d * V2{std::cos(ang), std::sin(ang)};
      const BridgeSpec spec = bridge_at(a, 0);
      const CatHeight ch = catenoid_height(spec, q, a.side);
      const double cat = ch.z;
      // Reconstruct the field branch by undoing the blend at this point.
      const double c =
          cutoff(a.d_lo, a.d_hi, (q - site).norm());
      const double mix = graph_phi_gl(lf, q);
      if (c > 1e-12) {
        const double side = (mix - (1 - c) * cat) / c;
        worst = std::max(worst, std::abs(side - cat));
      }
      scale = std::max(scale, std::abs(cat));
    }
  }
  CHECK(scale > 1e-3);
  CHECK(worst < 1e-3);

  // The blend is inert near its endpoints: crossing d_lo and d_hi costs no
  // more than the graph slope over the probe step.
  const V2 dir = site.normalized();
  for (double d : {a.d_lo, a.d_hi}) {
    const double lo = graph_phi_gl(lf, site + (d - 1e-7) * dir);
    const double hi = graph_phi_gl(lf, site + (d + 1e-7) * dir);
    CHECK(std::abs(hi - lo) < 1e-8);
  }
}

TEST_CASE("assembled levels: jet route matches finite differences") {
  const auto& lf = fields_16()[1];
  const V2 q{2.3, 0.4};
  REQUIRE(classify(lf, q).kind == ZoneKind::Graph);

  const GraphJet j = graph_phi_gl_jet(lf, q);
  CHECK(j.v == doctest::Approx(graph_phi_gl(lf, q)).epsilon(1e-12));
  const double h = 1e-4;
  auto at = [&](double dx, double dy) {
    return graph_phi_gl(lf, q + V2{dx, dy});
  };
  CHECK(std::abs(j.grad.x() - (at(h, 0) - at(-h, 0)) / (2 * h)) < 1e-8);
  CHECK(std::abs(j.grad.y() - (at(0, h) - at(0, -h)) / (2 * h)) < 1e-8);
  CHECK(std::abs(j.hess(0, 0) - (at(h, 0) - 2 * j.v + at(-h, 0)) / (h * h)) <
        1e-5);
  CHECK(std::abs(j.hess(1, 1) - (at(0, h) - 2 * j.v + at(0, -h)) / (h * h)) <
        1e-5);
  CHECK(std::abs(j.hess(0, 1) -
                 (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) /
                     (4 * h * h)) < 1e-5);

  // Mirror level: equal and opposite height.
  CHECK(graph_phi_gl(fields_16()[0], q) == doctest::Approx(-j.v).epsilon(1e-9));
}

TEST_CASE("assembled levels: region residuals and serialization") {
  const RegionResiduals rr = residual_report(fields_16());
  CHECK(rr.n_graph > 1000);
  CHECK(rr.n_glue > 100);
  CHECK(rr.n_core > 100);
  // The correction supports hide inside the hole and core zones, so the
  // support survey finds nothing to sample.
  CHECK(rr.n_support == 0);
  CHECK(rr.sup_support == 0.0);
  // Pinned at this configuration; the graph region is already deep in the
  // small-residual regime, the glue and core regions carry the cutoff and
  // chart scales of a sixteen-bridge stack.
  CHECK(rr.sup_graph < 2e-6);
  CHECK(rr.sup_glue < 2.0);
  CHECK(rr.sup_core < 0.1);

  std::ostringstream os;
  residuals_to_json(rr, os);
  const auto doc = nlohmann::json::parse(os.str());
  CHECK(doc.at("graph").at("sup").get<double>() == rr.sup_graph);
  CHECK(doc.at("glue").at("n").get<int>() == rr.n_glue);
  CHECK(doc.at("core").contains("sup_ratio"));

  CHECK_THROWS_AS(residual_report({}), std::invalid_argument);
}

TEST_CASE("assembled levels: far cone slopes, closed form against samples") {
  const auto slopes = cone_slopes(fields_16());
  REQUIRE(slopes.size() == 2);
  CHECK(slopes[0].two_j == -1);
  CHECK(slopes[1].two_j == 1);
  // The stack is odd under reflection, so the two cones open oppositely.
  CHECK(slopes[0].closed == doctest::Approx(-slopes[1].closed).epsilon(1e-12));
  double scale = 0;
  for (const auto& cs : slopes) scale = std::max(scale, std::abs(cs.closed));
  CHECK(scale > 1e-4);
  for (const auto& cs : slopes) {
    CHECK(std::abs(cs.closed - cs.numeric) <= 0.02 * scale);
    CHECK(!cs.flagged);
  }

  std::ostringstream os;
  slopes_to_csv(slopes, os);
  const std::string csv = os.str();
  CHECK(csv.find("two_j") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
