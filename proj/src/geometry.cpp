#include "planestack/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "planestack/cutoff.hpp"
#include "planestack/radial.hpp"

namespace planestack {
namespace {

Eigen::Vector3d omega_grad(const AmbientPoint& x) { return -0.25 * x; }

double metric_speed(const GeodesicState& st) {
  return std::exp(-st.x.squaredNorm() / 8.0) * st.xdot.norm();
}

GeodesicState geodesic_rhs(const GeodesicState& st) {
  const Eigen::Vector3d g = omega_grad(st.x);
  GeodesicState d;
  d.x = st.xdot;
  d.xdot = -2.0 * g.dot(st.xdot) * st.xdot + st.xdot.squaredNorm() * g;
  return d;
}

// Frame at a plane point: radial and tangential unit vectors.
void plane_frame(const Eigen::Vector2d& p, Eigen::Vector2d& rhat,
                 Eigen::Vector2d& that) {
  const double n = p.norm();
  if (!(n > 0))
    throw std::domain_error("plane_frame: chart centre at the origin");
  rhat = p / n;
  that = Eigen::Vector2d(-rhat.y(), rhat.x());
}

}  // namespace

WeightJet gaussian_weight(const AmbientPoint& X) {
  return {-X.squaredNorm() / 8.0, omega_grad(X)};
}

GeodesicResult conformal_geodesic(const AmbientPoint& x0,
                                  const Eigen::Vector3d& v0, int n_steps) {
  if (n_steps < 1)
    throw std::invalid_argument("conformal_geodesic: n_steps < 1");
  if (!x0.allFinite() || !v0.allFinite())
    throw std::invalid_argument("conformal_geodesic: non-finite input");

  GeodesicState st{x0, v0};
  double lo = metric_speed(st), hi = lo;
  const double h = 1.0 / n_steps;
  for (int i = 0; i < n_steps; ++i) {
    const GeodesicState k1 = geodesic_rhs(st);
    GeodesicState t{st.x + 0.5 * h * k1.x, st.xdot + 0.5 * h * k1.xdot};
    const GeodesicState k2 = geodesic_rhs(t);
    t = {st.x + 0.5 * h * k2.x, st.xdot + 0.5 * h * k2.xdot};
    const GeodesicState k3 = geodesic_rhs(t);
    t = {st.x + h * k3.x, st.xdot + h * k3.xdot};
    const GeodesicState k4 = geodesic_rhs(t);
    st.x += (h / 6.0) * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    st.xdot += (h / 6.0) * (k1.xdot + 2 * k2.xdot + 2 * k3.xdot + k4.xdot);
    const double s = metric_speed(st);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (!st.x.allFinite() || !st.xdot.allFinite())
    throw std::runtime_error("conformal_geodesic: flow left the chart");
  const double drift = (hi - lo) / std::max(hi, 1e-300);
  return {st, drift};
}

AmbientPoint fermi_map(const Eigen::Vector2d& p, const Eigen::Vector2d& v,
                       double z) {
  if (!p.allFinite() || !v.allFinite() || !std::isfinite(z))
    throw std::invalid_argument("fermi_map: non-finite input");

  GeodesicState st{{p.x(), p.y(), 0.0}, {0, 0, 0}};
  if (v.norm() > 0) {
    const double ew = std::exp(p.squaredNorm() / 8.0);
    const GeodesicResult leg =
        conformal_geodesic(st.x, {ew * v.x(), ew * v.y(), 0.0});
    if (leg.speed_drift > 1e-8)
      throw std::runtime_error("fermi_map: in-plane leg lost accuracy");
    st = leg.state;
    // The plane is totally geodesic and the integrator keeps it exactly:
    // every z term in the flow carries a factor of z or zdot.
  }
  if (z != 0) {
    const double ew = std::exp(st.x.squaredNorm() / 8.0);
    const GeodesicResult leg = conformal_geodesic(st.x, {0, 0, ew * z});
    if (leg.speed_drift > 1e-8)
      throw std::runtime_error("fermi_map: normal leg lost accuracy");
    st = leg.state;
  }
  return st.x;
}

AmbientPoint catenoid_model(const BridgeSpec& spec, double s,
                            double vartheta) {
  if (!(spec.tau > 0)) throw std::domain_error("catenoid_model: tau <= 0");
  const double rho = spec.tau * std::cosh(s);
  if (spec.rho_max > 0 && rho >= spec.rho_max)
    throw std::domain_error("catenoid_model: point outside the chart bound");
  const Eigen::Vector3d M{rho * std::cos(vartheta), rho * std::sin(vartheta),
                          spec.tau * s + spec.h};
  const double beta = std::atan(spec.tau * spec.kappa);
  const double cb = std::cos(beta), sb = std::sin(beta);
  return {cb * M.x() - sb * M.z(), M.y(),
          sb * M.x() + cb * M.z() + spec.tau * spec.kappa_perp};
}

AmbientPoint catenoid_point(const BridgeSpec& spec, double s,
                            double vartheta) {
  const AmbientPoint mm = catenoid_model(spec, s, vartheta);
  Eigen::Vector2d rhat, that;
  plane_frame(spec.p, rhat, that);
  return fermi_map(spec.p, mm.x() * rhat + mm.y() * that, mm.z());
}

CatHeight catenoid_height(const BridgeSpec& spec, const Eigen::Vector2d& q,
                          int branch) {
  if (branch != 1 && branch != -1)
    throw std::invalid_argument("catenoid_height: branch must be +1 or -1");
  Eigen::Vector2d rhat, that;
  plane_frame(spec.p, rhat, that);

  const Eigen::Vector2d rel = q - spec.p;
  const double scale = std::max(spec.tau, rel.norm());

  // Seed from the untilted flat-chart branch: the metric distance shrinks
  // the euclidean one by the midpoint weight.
  const double wmid = std::exp(-(q + spec.p).squaredNorm() / 32.0);
  const double dg = std::max(wmid * rel.norm() / spec.tau, 1.0 + 1e-12);
  double s = branch * std::acosh(dg);
  double vt = std::atan2(rel.dot(that), rel.dot(rhat));
  if (std::abs(s) < 0.5)
    throw std::domain_error(
        "catenoid_height: point too close to the waist to be a graph");

  AmbientPoint X{0, 0, 0};
  for (int it = 0; it < 40; ++it) {
    X = catenoid_point(spec, s, vt);
    const Eigen::Vector2d F{X.x() - q.x(), X.y() - q.y()};
    if (F.norm() < 1e-13 * scale) return {X.z(), s, vt};

    const double hs = 1e-6 * std::max(1.0, std::abs(s));
    const double hv = 1e-6;
    const AmbientPoint Xs = catenoid_point(spec, s + hs, vt);
    const AmbientPoint Xv = catenoid_point(spec, s, vt + hv);
    Eigen::Matrix2d Jm;
    Jm << (Xs.x() - X.x()) / hs, (Xv.x() - X.x()) / hv,
        (Xs.y() - X.y()) / hs, (Xv.y() - X.y()) / hv;
    const Eigen::Vector2d step = Jm.partialPivLu().solve(F);
    if (!step.allFinite())
      throw std::runtime_error("catenoid_height: singular chart jacobian");
    s -= step.x();
    vt -= step.y();
    if (branch * s < 0.05)
      throw std::domain_error(
          "catenoid_height: point too close to the waist to be a graph");
  }
  throw std::runtime_error("catenoid_height: projection did not converge");
}

namespace {

struct FormEval {
  double H = 0;
  double half_xnu = 0;
};

FormEval patch_forms(const PatchFn& f, double u, double v, double h) {
  const AmbientPoint X = f(u, v);
  const AmbientPoint Xpu = f(u + h, v), Xmu = f(u - h, v);
  const AmbientPoint Xpv = f(u, v + h), Xmv = f(u, v - h);
  const AmbientPoint Xpp = f(u + h, v + h), Xpm = f(u + h, v - h);
  const AmbientPoint Xmp = f(u - h, v + h), Xmm = f(u - h, v - h);

  const Eigen::Vector3d Xu = (Xpu - Xmu) / (2 * h);
  const Eigen::Vector3d Xv = (Xpv - Xmv) / (2 * h);
  const Eigen::Vector3d Xuu = (Xpu - 2 * X + Xmu) / (h * h);
  const Eigen::Vector3d Xvv = (Xpv - 2 * X + Xmv) / (h * h);
  const Eigen::Vector3d Xuv = (Xpp - Xpm - Xmp + Xmm) / (4 * h * h);

  const Eigen::Vector3d N = Xu.cross(Xv);
  const double nl = N.norm();
  const double E = Xu.squaredNorm(), G = Xv.squaredNorm(), F = Xu.dot(Xv);
  const double den = E * G - F * F;
  if (!(nl > 0) || !(den > 0) ||
      den < 1e-24 * std::max(1.0, E * G))
    throw std::runtime_error("patch_forms: degenerate patch");
  const Eigen::Vector3d nu = N / nl;
  const double e = Xuu.dot(nu), g = Xvv.dot(nu), fq = Xuv.dot(nu);
  return {(e * G - 2 * fq * F + g * E) / den, 0.5 * X.dot(nu)};
}

}  // namespace

double mean_curvature_fd(const PatchFn& f, double u, double v, double step) {
  if (!(step > 0)) throw std::domain_error("mean_curvature_fd: step <= 0");
  const double h = step, h2 = step / 2;
  if (u + h2 == u || v + h2 == v)
    throw std::domain_error("mean_curvature_fd: step underflow");
  const FormEval a = patch_forms(f, u, v, h);
  const FormEval b = patch_forms(f, u, v, h2);
  return (4 * b.H - a.H) / 3;
}

double weighted_mean_curvature(const PatchFn& f, double u, double v,
                               double step) {
  if (!(step > 0))
    throw std::domain_error("weighted_mean_curvature: step <= 0");
  const double h = step, h2 = step / 2;
  if (u + h2 == u || v + h2 == v)
    throw std::domain_error("weighted_mean_curvature: step underflow");
  const FormEval a = patch_forms(f, u, v, h);
  const FormEval b = patch_forms(f, u, v, h2);
  return (4 * (b.H + b.half_xnu) - (a.H + a.half_xnu)) / 3;
}

double graph_h2w(const GraphJet& jet, const Eigen::Vector2d& q) {
  const double px = jet.grad.x(), py = jet.grad.y();
  const double w2 = 1 + px * px + py * py;
  const double w = std::sqrt(w2);
  const double H = ((1 + py * py) * jet.hess(0, 0) -
                    2 * px * py * jet.hess(0, 1) +
                    (1 + px * px) * jet.hess(1, 1)) /
                   (w2 * w);
  const double xnu = (jet.v - q.x() * px - q.y() * py) / w;
  return H + 0.5 * xnu;
}

std::vector<LevelField> build_level_fields(const ParamVector& pv, int m,
                                           int n_modes, double alpha) {
  const DerivedParams dp = derive_params(pv, m, alpha);
  std::vector<LevelField> levels;
  levels.reserve(static_cast<size_t>(pv.two_J) + 1);

  for (int two_j = -pv.two_J; two_j <= pv.two_J; two_j += 2) {
    LevelField lf;
    lf.two_J = pv.two_J;
    lf.two_j = two_j;
    lf.m = m;
    lf.sol = build_level(dp, m, two_j, n_modes);

    for (int side : {1, -1}) {
      const int two_ell = two_j - side;
      if (std::abs(two_ell) > pv.two_J - 1) continue;
      LevelField::Attachment att;
      att.two_ell = two_ell;
      att.side = side;
      att.lat = interface_lattice(dp, m, two_ell);
      att.obs = obstruction_fns(att.lat);
      const SlotValues sv = slot_from_solution(lf.sol, dp, pv, two_j, side);
      att.c_flat = -sv.mu;
      att.c_tilt = -sv.mu_prime;
      att.bridge.p = att.lat.site(0);
      att.bridge.tau = dp.tau(two_ell);
      att.bridge.h = dp.h(two_ell);
      att.bridge.kappa = pv.kappa_at(two_ell);
      att.bridge.kappa_perp = pv.kappa_perp_at(two_ell);
      att.bridge.rho_max = 6.0 * std::pow(att.bridge.tau, alpha);
      lf.att.push_back(att);
    }

    // Glue radii, clamped to the nearest-site spacing so the blend annuli
    // of distinct bridges stay disjoint and inside one lattice cell.
    for (auto& a : lf.att) {
      double d_nn = std::numeric_limits<double>::infinity();
      const Eigen::Vector2d p0 = a.lat.site(0);
      for (const auto& b : lf.att)
        for (int k = 0; k < m; ++k) {
          const double d = (b.lat.site(k) - p0).norm();
          if (d > 1e-12) d_nn = std::min(d_nn, d);
        }
      a.r_hole = std::min(9.0 * a.bridge.tau, 0.30 * d_nn);
      a.d_hi = std::min(3.0 * std::pow(a.bridge.tau, alpha), 0.45 * d_nn);
      a.d_lo = std::max((2.0 / 3.0) * a.d_hi, 1.2 * a.r_hole);
      if (!(a.r_hole < a.d_lo && a.d_lo < a.d_hi))
        throw std::runtime_error(
            "build_level_fields: glue radii collapsed; the bridges are too "
            "large for this lattice");
    }
    levels.push_back(std::move(lf));
  }
  return levels;
}

BridgeSpec bridge_at(const LevelField::Attachment& att, int site) {
  BridgeSpec spec = att.bridge;
  spec.p = att.lat.site(site);
  return spec;
}

Zone classify(const LevelField& lf, const Eigen::Vector2d& q) {
  Zone z;
  z.d = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < lf.att.size(); ++a) {
    const int n = lf.att[a].lat.nearest_site(std::atan2(q.y(), q.x()));
    const double d = (q - lf.att[a].lat.site(n)).norm();
    if (d < z.d) {
      z.d = d;
      z.att = static_cast<int>(a);
      z.site = n;
    }
  }
  if (z.att < 0) return z;
  const auto& a = lf.att[static_cast<size_t>(z.att)];
  if (z.d < a.r_hole)
    z.kind = ZoneKind::Hole;
  else if (z.d < a.d_lo)
    z.kind = ZoneKind::Core;
  else if (z.d <= a.d_hi)
    z.kind = ZoneKind::Blend;
  else
    z.kind = ZoneKind::Graph;
  return z;
}

namespace {

// Corrected field value: the lattice field plus the localised directions
// that cancel the residual affine defect of the finite solve. The supports
// sit deep inside the glue cores at every scale exercised here, so the
// corrections are invisible on the assembled surface; they are kept for
// completeness and cost one distance test per attachment.
double phi_side(const LevelField& lf, const Eigen::Vector2d& q) {
  const double r = q.norm();
  const double theta = std::atan2(q.y(), q.x());
  double v = eval_ld(lf.sol, r, theta);
  for (const auto& a : lf.att) {
    if (a.lat.distance(r, theta) >= 2.0 * a.obs.delta) continue;
    v += a.bridge.tau *
         (a.c_flat * a.obs.V(r, theta) + a.c_tilt * a.obs.Vp(r, theta));
  }
  return v;
}

double cat_branch(const LevelField& lf, const Zone& z,
                  const Eigen::Vector2d& q) {
  const auto& a = lf.att[static_cast<size_t>(z.att)];
  return catenoid_height(bridge_at(a, z.site), q, a.side).z;
}

GraphJet fd_graph_jet(const LevelField& lf, const Eigen::Vector2d& q,
                      double h);

}  // namespace

double graph_phi_gl(const LevelField& lf, const Eigen::Vector2d& q) {
  const Zone z = classify(lf, q);
  switch (z.kind) {
    case ZoneKind::Hole:
      throw std::domain_error("graph_phi_gl: inside a bridge hole");
    case ZoneKind::Core:
      return cat_branch(lf, z, q);
    case ZoneKind::Graph:
      return phi_side(lf, q);
    case ZoneKind::Blend: {
      const auto& a = lf.att[static_cast<size_t>(z.att)];
      const double c = cutoff(a.d_lo, a.d_hi, z.d);
      return (1 - c) * cat_branch(lf, z, q) + c * phi_side(lf, q);
    }
  }
  throw std::logic_error("graph_phi_gl: unreachable");
}

namespace {

GraphJet polar_to_cartesian(const PolarJet& pj, double r, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  GraphJet j;
  j.v = pj.v;
  j.grad = {c * pj.dr - s * pj.dt / r, s * pj.dr + c * pj.dt / r};
  const double rr = r * r;
  j.hess(0, 0) = c * c * pj.drr - 2 * c * s * pj.drt / r +
                 s * s * pj.dtt / rr + s * s * pj.dr / r +
                 2 * c * s * pj.dt / rr;
  j.hess(1, 1) = s * s * pj.drr + 2 * c * s * pj.drt / r +
                 c * c * pj.dtt / rr + c * c * pj.dr / r -
                 2 * c * s * pj.dt / rr;
  j.hess(0, 1) = j.hess(1, 0) =
      c * s * pj.drr + (c * c - s * s) * pj.drt / r - c * s * pj.dtt / rr -
      c * s * pj.dr / r - (c * c - s * s) * pj.dt / rr;
  return j;
}

GraphJet fd_graph_jet(const LevelField& lf, const Eigen::Vector2d& q,
                      double h) {
  const auto f = [&](double dx, double dy) {
    return graph_phi_gl(lf, {q.x() + dx, q.y() + dy});
  };
  GraphJet out;
  out.v = f(0, 0);
  double gx[2], gy[2], hxx[2], hyy[2], hxy[2];
  for (int k = 0; k < 2; ++k) {
    const double e = k == 0 ? h : h / 2;
    const double fp = f(e, 0), fm = f(-e, 0), gp = f(0, e), gm = f(0, -e);
    gx[k] = (fp - fm) / (2 * e);
    gy[k] = (gp - gm) / (2 * e);
    hxx[k] = (fp - 2 * out.v + fm) / (e * e);
    hyy[k] = (gp - 2 * out.v + gm) / (e * e);
    hxy[k] = (f(e, e) - f(e, -e) - f(-e, e) + f(-e, -e)) / (4 * e * e);
  }
  out.grad = {(4 * gx[1] - gx[0]) / 3, (4 * gy[1] - gy[0]) / 3};
  out.hess(0, 0) = (4 * hxx[1] - hxx[0]) / 3;
  out.hess(1, 1) = (4 * hyy[1] - hyy[0]) / 3;
  out.hess(0, 1) = out.hess(1, 0) = (4 * hxy[1] - hxy[0]) / 3;
  return out;
}

}  // namespace

GraphJet graph_phi_gl_jet(const LevelField& lf, const Eigen::Vector2d& q) {
  const Zone z = classify(lf, q);
  if (z.kind == ZoneKind::Hole)
    throw std::domain_error("graph_phi_gl_jet: inside a bridge hole");

  const double r = q.norm();
  bool analytic = z.kind == ZoneKind::Graph && r > 1e-6;
  if (analytic && z.att >= 0) {
    const auto& a = lf.att[static_cast<size_t>(z.att)];
    const double theta = std::atan2(q.y(), q.x());
    if (a.lat.distance(r, theta) < 2.001 * a.obs.delta) analytic = false;
  }
  if (analytic)
    return polar_to_cartesian(eval_ld_jet(lf.sol, r, std::atan2(q.y(), q.x())),
                              r, std::atan2(q.y(), q.x()));

  double h = 1e-3 * std::max(1.0, r);
  if (z.att >= 0) {
    const auto& a = lf.att[static_cast<size_t>(z.att)];
    h = std::min(0.02 * (a.d_hi - a.d_lo), 0.15 * (z.d - a.r_hole));
    if (!(h > 0))
      throw std::domain_error("graph_phi_gl_jet: no room for a stencil");
  }
  return fd_graph_jet(lf, q, h);
}

// ---------------------------------------------------------------------------
// Bridge-core curvature: split off the exact catenoid part.
//
// The chart is expanded to second order at the site, Phi(xi) = Phi(0) +
// A xi + Q(xi, xi)/2 + ..., with A an exact conformal rotation c O and Q
// measured once by differences at chart scale. First and second derivatives
// of the bridge then split into the rotated model catenoid plus deviations
// driven by Q, and the minimal-surface identity e0 G0 + g0 E0 = 0 removes
// the large cancelling part of the curvature numerator symbolically. What
// remains is first order in the deviations, so no precision is lost to
// cancellation even for waist sizes far below the rounding scale of a
// direct difference quotient.
// ---------------------------------------------------------------------------

namespace {

struct CoreEval {
  BridgeSpec spec;
  double c = 1;                     // e^{-w} at the site
  Eigen::Matrix3d Oprime;           // frame rotation times the tilt
  Eigen::Vector3d shift{0, 0, 0};   // kappa_perp offset in frame components
  std::array<Eigen::Matrix3d, 3> Q;

  double euclid_H(double s, double vartheta) const;
};

CoreEval make_core_eval(const BridgeSpec& spec) {
  CoreEval ce;
  ce.spec = spec;
  ce.c = std::exp(spec.p.squaredNorm() / 8.0);

  Eigen::Vector2d rhat, that;
  plane_frame(spec.p, rhat, that);
  Eigen::Matrix3d O;
  O << rhat.x(), that.x(), 0, rhat.y(), that.y(), 0, 0, 0, 1;

  const double beta = std::atan(spec.tau * spec.kappa);
  const double cb = std::cos(beta), sb = std::sin(beta);
  Eigen::Matrix3d R;
  R << cb, 0, -sb, 0, 1, 0, sb, 0, cb;
  ce.Oprime = O * R;
  ce.shift = {0, 0, spec.tau * spec.kappa_perp};

  const auto chart = [&](const Eigen::Vector3d& xi) {
    return fermi_map(spec.p, xi.x() * rhat + xi.y() * that, xi.z());
  };
  const AmbientPoint base = chart(Eigen::Vector3d::Zero());

  // Q by centred second differences with one Richardson step at chart
  // scale; the scale is O(1), independent of tau.
  const auto q_at = [&](double d) {
    std::array<Eigen::Matrix3d, 3> Qd;
    Eigen::Vector3d plus[3], minus[3];
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector3d e = Eigen::Vector3d::Zero();
      e[i] = d;
      plus[i] = chart(e);
      minus[i] = chart(-e);
    }
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        Qd[static_cast<size_t>(k)](i, i) =
            (plus[i][k] - 2 * base[k] + minus[i][k]) / (d * d);
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        Eigen::Vector3d ep = Eigen::Vector3d::Zero(), em = ep;
        ep[i] = d;
        ep[j] = d;
        em[i] = d;
        em[j] = -d;
        const AmbientPoint a = chart(ep), b = chart(em), cm = chart(-em),
                           dm = chart(-ep);
        for (int k = 0; k < 3; ++k) {
          const double v = (a[k] - b[k] - cm[k] + dm[k]) / (4 * d * d);
          Qd[static_cast<size_t>(k)](i, j) = v;
          Qd[static_cast<size_t>(k)](j, i) = v;
        }
      }
    return Qd;
  };
  const auto Qc = q_at(0.08), Qf = q_at(0.04);
  for (size_t k = 0; k < 3; ++k) ce.Q[k] = (4.0 * Qf[k] - Qc[k]) / 3.0;
  return ce;
}

Eigen::Vector3d q_form(const std::array<Eigen::Matrix3d, 3>& Q,
                       const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return {a.dot(Q[0] * b), a.dot(Q[1] * b), a.dot(Q[2] * b)};
}

double CoreEval::euclid_H(double s, double vartheta) const {
  const double tau = spec.tau;
  const double ch = std::cosh(s), sh = std::sinh(s);
  const double cv = std::cos(vartheta), sv = std::sin(vartheta);
  const double rho = tau * ch;

  const Eigen::Vector3d M{rho * cv, rho * sv, tau * s + spec.h};
  const Eigen::Vector3d Mu{tau * sh * cv, tau * sh * sv, tau};
  const Eigen::Vector3d Mv{-rho * sv, rho * cv, 0};
  const Eigen::Vector3d Muu{rho * cv, rho * sv, 0};
  const Eigen::Vector3d Muv{-tau * sh * sv, tau * sh * cv, 0};
  const Eigen::Vector3d Mvv{-rho * cv, -rho * sv, 0};

  // Tilted model in chart coordinates; the rotation is orthogonal so the
  // model fundamental forms are those of the straight catenoid.
  const double beta = std::atan(tau * spec.kappa);
  const double cb = std::cos(beta), sb = std::sin(beta);
  Eigen::Matrix3d R;
  R << cb, 0, -sb, 0, 1, 0, sb, 0, cb;
  const Eigen::Vector3d Mt = R * M + shift;
  const Eigen::Vector3d Mtu = R * Mu, Mtv = R * Mv;
  const Eigen::Vector3d Mtuu = R * Muu, Mtuv = R * Muv, Mtvv = R * Mvv;

  const Eigen::Vector3d du = q_form(Q, Mt, Mtu);
  const Eigen::Vector3d dv = q_form(Q, Mt, Mtv);
  const Eigen::Vector3d duu = q_form(Q, Mtu, Mtu) + q_form(Q, Mt, Mtuu);
  const Eigen::Vector3d duv = q_form(Q, Mtu, Mtv) + q_form(Q, Mt, Mtuv);
  const Eigen::Vector3d dvv = q_form(Q, Mtv, Mtv) + q_form(Q, Mt, Mtvv);

  const Eigen::Vector3d Wu = c * (Oprime * Mu);
  const Eigen::Vector3d Wv = c * (Oprime * Mv);

  const double E0 = tau * tau * ch * ch, G0 = E0;
  const double Ebar = 2 * Wu.dot(du) + du.squaredNorm();
  const double Gbar = 2 * Wv.dot(dv) + dv.squaredNorm();
  const double Fbar = Wu.dot(dv) + Wv.dot(du) + du.dot(dv);
  const double Efull = c * c * E0 + Ebar;
  const double Gfull = c * c * G0 + Gbar;

  const Eigen::Vector3d Nbar = Wu.cross(dv) + du.cross(Wv) + du.cross(dv);
  const Eigen::Vector3d Npure = c * c * (Oprime * Mu.cross(Mv));
  const double n_len = (Npure + Nbar).norm();

  // Model scalars: e0 = -tau, g0 = +tau, f0 = 0, |Mu x Mv| = sqrt(E0 G0),
  // so the pure part of the numerator cancels identically and is dropped.
  const double sE0G0 = E0;  // sqrt(E0*G0), E0 == G0
  const double Tu = -tau * sE0G0, Tv = tau * sE0G0;

  // A Mt_uu = c (O R) M_uu: the tilt already lives in Oprime.
  const Eigen::Vector3d N = Npure + Nbar;
  const double e_dev = c * (Oprime * Muu).dot(Nbar) / n_len +
                       duu.dot(N) / n_len;
  const double g_dev = c * (Oprime * Mvv).dot(Nbar) / n_len +
                       dvv.dot(N) / n_len;
  const double f_dev = c * (Oprime * Muv).dot(Nbar) / n_len +
                       duv.dot(N) / n_len;

  const double num = c * c * c * (Tu * Gbar + Tv * Ebar) / n_len +
                     e_dev * Gfull + g_dev * Efull - 2 * f_dev * Fbar;
  const double den = Efull * Gfull - Fbar * Fbar;
  return num / den;
}

}  // namespace

RegionResiduals residual_report(const std::vector<LevelField>& levels,
                                int n_r, int n_theta) {
  if (levels.empty())
    throw std::invalid_argument("residual_report: no levels");
  RegionResiduals rr;
  const int m = levels.front().m;

  for (const auto& lf : levels) {
    // Graph region: a fundamental wedge, away from the glue annuli, the
    // correction supports, and the narrow band where the other family's
    // ring circle crosses the level.
    for (int i = 0; i < n_r; ++i) {
      const double r = 0.2 + (5.0 - 0.2) * (i + 0.5) / n_r;
      bool near_ring = false;
      for (const auto& a : lf.att)
        if (std::abs(r - a.lat.ring_r) < 1.2 / m) near_ring = true;
      if (near_ring) continue;
      for (int k = 0; k < n_theta; ++k) {
        const double theta = (2.0 * M_PI / m) * (k + 0.5) / n_theta;
        const Eigen::Vector2d q{r * std::cos(theta), r * std::sin(theta)};
        const Zone z = classify(lf, q);
        if (z.kind != ZoneKind::Graph) continue;
        if (z.att >= 0) {
          const auto& a = lf.att[static_cast<size_t>(z.att)];
          if (z.d < 2.5 * a.obs.delta) continue;
        }
        rr.sup_graph = std::max(
            rr.sup_graph, std::abs(graph_h2w(graph_phi_gl_jet(lf, q), q)));
        ++rr.n_graph;
      }
    }

    // Glue annuli and correction supports, per attachment at one site; the
    // other sites are rotations. The supports never reach past the hole
    // radius at these scales, so that region reports empty.
    for (const auto& a : lf.att) {
      const Eigen::Vector2d p0 = a.lat.site(0);
      const double base = std::atan2(p0.y(), p0.x());
      for (int i = 0; i < 10; ++i) {
        const double d = a.d_lo + (a.d_hi - a.d_lo) * (i + 0.5) / 10;
        for (int k = 0; k < 12; ++k) {
          const double ang = base + 2.0 * M_PI * (k + 0.5) / 12;
          const Eigen::Vector2d q =
              p0 + d * Eigen::Vector2d{std::cos(ang), std::sin(ang)};
          rr.sup_glue = std::max(
              rr.sup_glue, std::abs(graph_h2w(graph_phi_gl_jet(lf, q), q)));
          ++rr.n_glue;
        }
      }
      const double s_lo = std::max(a.r_hole, 0.5 * a.obs.delta);
      const double s_hi = std::min(2.0 * a.obs.delta, a.d_hi);
      for (int i = 0; i < 10 && s_lo < s_hi; ++i) {
        const double d = s_lo + (s_hi - s_lo) * (i + 0.5) / 10;
        if (d < a.d_lo) continue;  // inside the core: not on the graph
        for (int k = 0; k < 12; ++k) {
          const double ang = base + 2.0 * M_PI * (k + 0.5) / 12;
          const Eigen::Vector2d q =
              p0 + d * Eigen::Vector2d{std::cos(ang), std::sin(ang)};
          rr.sup_support = std::max(
              rr.sup_support, std::abs(graph_h2w(graph_phi_gl_jet(lf, q), q)));
          ++rr.n_support;
        }
      }
    }
  }

  // Bridge cores, one interface at a time via its upper level's attachment.
  // The core reaches to the smaller glue floor of the two adjacent levels
  // on each side of the waist.
  for (const auto& lf : levels) {
    for (const auto& a : lf.att) {
      if (a.side != 1) continue;
      const LevelField& lower =
          levels[static_cast<size_t>((a.two_ell - 1 + lf.two_J) / 2)];
      double d_lo_below = a.d_lo;
      for (const auto& b : lower.att)
        if (b.two_ell == a.two_ell) d_lo_below = b.d_lo;

      const CoreEval ce = make_core_eval(a.bridge);
      const double w = std::exp(-a.bridge.p.squaredNorm() / 8.0);
      const double tau = a.bridge.tau;
      const auto s_edge = [&](double d_eu) {
        return std::acosh(std::max(0.95 * w * d_eu / tau, 1.5));
      };
      const double s_up = s_edge(a.d_lo), s_dn = s_edge(d_lo_below);
      for (int i = 0; i <= 24; ++i) {
        const double s = -s_dn + (s_up + s_dn) * i / 24.0;
        for (int k = 0; k < 16; ++k) {
          const double vt = 2.0 * M_PI * (k + 0.5) / 16;
          const double H = ce.euclid_H(s, vt);
          const double rho = tau * std::cosh(s);
          const double ratio =
              rho * rho * std::abs(H) / (tau * (1.0 + std::abs(s)));
          rr.sup_core = std::max(rr.sup_core, ratio);
          ++rr.n_core;
        }
      }
    }
  }
  return rr;
}

void residuals_to_json(const RegionResiduals& rr, std::ostream& out) {
  nlohmann::json j;
  j["graph"] = {{"sup", rr.sup_graph}, {"n", rr.n_graph}};
  j["glue"] = {{"sup", rr.sup_glue}, {"n", rr.n_glue}};
  j["core"] = {{"sup_ratio", rr.sup_core}, {"n", rr.n_core}};
  j["support"] = {{"sup", rr.sup_support}, {"n", rr.n_support}};
  out << j.dump(2) << '\n';
}

std::vector<ConeSlope> cone_slopes(const std::vector<LevelField>& levels) {
  std::vector<ConeSlope> out;
  out.reserve(levels.size());
  double largest = 0;

  for (const auto& lf : levels) {
    ConeSlope cs;
    cs.two_j = lf.two_j;

    // Ring data route: each interface comb contributes its average's far
    // opening, sqrt(pi) m phi_m(r) e^{-r^2/8} / 2 per unit strength, signed
    // by which side of the level it sources.
    for (const auto& a : lf.att) {
      const double r = a.lat.ring_r;
      cs.closed += a.side * 0.5 * std::sqrt(M_PI) * lf.m *
                   phi_m0(r).value * std::exp(-r * r / 8.0) * a.bridge.tau;
    }

    // Sample route: phi/r at increasing radii, extrapolated linearly in
    // 1/r^2 to kill the next term of the far expansion.
    const double theta = M_PI / (4.0 * lf.m);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = 3;
    for (double r : {50.0, 100.0, 200.0}) {
      const double x = 1.0 / (r * r);
      const double y = eval_ld(lf.sol, r, theta) / r;
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope_fit = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    cs.numeric = (sy - slope_fit * sx) / n;

    largest = std::max(largest, std::abs(cs.closed));
    out.push_back(cs);
  }
  for (auto& cs : out)
    cs.flagged = std::abs(cs.closed - cs.numeric) >
                 0.02 * std::max(largest, 1e-300);
  return out;
}

void slopes_to_csv(const std::vector<ConeSlope>& slopes, std::ostream& out) {
  out << "two_j,closed,numeric,flagged\n";
  out.precision(17);
  for (const auto& cs : slopes)
    out << cs.two_j << ',' << cs.closed << ',' << cs.numeric << ','
        << (cs.flagged ? 1 : 0) << '\n';
}

}  // namespace planestack
