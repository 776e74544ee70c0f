#include "planestack/radial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace planestack {
namespace {

constexpr double kSqrtPi = 1.7724538509055160273;
constexpr double kCurveXLo = 1e-8;    // r ~ 2e-4
constexpr double kCurveXHi = 2700.0;  // r ~ 103.9

const SampledCurve& u0_curve() {
  static const SampledCurve curve = [] {
    SampledCurve c = detail::tricomi_logx_path(-0.5, 1.0, kCurveXLo, kCurveXHi);
    for (double x : {1e-6, 1e-3, 0.1, 1.0, 10.0, 150.0}) {
      auto n = c.eval(std::log(x));
      Hyp u{n[0], n[1] / x};
      if (detail::wronskian_residual(-0.5, 1.0, x, u) > 1e-8)
        throw std::runtime_error("radial: cached basis curve failed validation");
    }
    return c;
  }();
  return curve;
}

template <class F>
double brent_root(F&& f, double a, double b, double tol = 1e-13) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0))
    throw std::runtime_error("brent_root: endpoints do not bracket a root");
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int it = 0; it < 200; ++it) {
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * 2.2e-16 * std::abs(b) + 0.5 * tol;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        const double t = fb / fc;
        p = s * (2.0 * xm * q * (q - t) - (b - a) * (t - 1.0));
        q = (q - 1.0) * (t - 1.0) * (s - 1.0);
      }
      if (p > 0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
  }
  throw std::runtime_error("brent_root: too many iterations");
}

}  // namespace

Hyp phi_m0(double r) {
  if (!(r > 0)) throw std::domain_error("phi_m0: r > 0 required");
  const double x = 0.25 * r * r;
  Hyp m = kummer_m(-0.5, 1.0, x);
  return {m.value, m.deriv * 0.5 * r};
}

Hyp phi_u0(double r) {
  if (!(r > 0)) throw std::domain_error("phi_u0: r > 0 required");
  const double x = 0.25 * r * r;
  if (x < kCurveXLo)
    throw std::domain_error("phi_u0: r outside cached range");
  if (x > kCurveXHi) {
    // Poincare expansion, valid far past the cached curve: relative error
    // ~ x^-5 < 1e-17 at the switch point, well under the curve's own
    // integration error, so the two branches join smoothly.
    double s = 0, sd = 0, c = 1.0, poch = 1.0;
    for (int n = 0; n < 5; ++n) {
      s += c;
      sd += -n * c / x;
      poch = (n - 0.5) * (n - 0.5) / (n + 1.0);
      c *= -poch / x;
    }
    const double v = std::sqrt(x) * s;
    const double dvdx = 0.5 / std::sqrt(x) * s + std::sqrt(x) * sd;
    return {v, dvdx * 0.5 * r};
  }
  auto n = u0_curve().eval(std::log(x));
  return {n[0], n[1] / x * 0.5 * r};
}

Basis0 basis0(double r) {
  Hyp m = phi_m0(r);
  Hyp u = phi_u0(r);
  return {m.value, m.deriv, u.value, u.deriv};
}

Basis0 basis_pair_k(int k, double r) {
  if (k < 0) throw std::domain_error("basis_pair_k: k >= 0 required");
  if (k == 0) return basis0(r);
  const double a = double(k) * k - 0.5;
  const double x = 0.25 * r * r;
  Hyp m = kummer_m(a, 1.0, x);
  Hyp u = tricomi_u(a, 1.0, x);
  return {m.value, m.deriv * 0.5 * r, u.value, u.deriv * 0.5 * r};
}

double wronskian_closed(int k, double r) {
  const double a = double(k) * k - 0.5;
  return -2.0 * std::exp(0.25 * r * r) / (r * gamma_fn(a));
}

double slope_sum(double r) {
  Basis0 b = basis0(r);
  return b.md / b.m + b.ud / b.u - 0.5 * r;
}

const StandingRoots& standing_roots() {
  static const StandingRoots roots = [] {
    StandingRoots s;
    s.r_u = brent_root([](double r) { return basis0(r).u; }, 0.5, 1.2);
    s.r_mu = brent_root([](double r) { return slope_sum(r); }, 1.2, 2.0);
    s.r_m = brent_root([](double r) { return basis0(r).m; }, 2.0, 3.0);
    return s;
  }();
  return roots;
}

double ring_strength(double r) {
  Basis0 b = basis0(r);
  return 0.5 * kSqrtPi * std::exp(-0.25 * r * r) *
         (b.md * b.u + b.m * b.ud - 0.5 * r * b.m * b.u);
}

double ring_strength_inv(double y) {
  const StandingRoots& R = standing_roots();
  double lo = 0.5 * (R.r_u + R.r_mu);
  double hi = 0.5 * (R.r_m + R.r_mu);
  const double ylo = ring_strength(lo), yhi = ring_strength(hi);
  if (!(ylo > 0.0 && yhi < 0.0))
    throw std::runtime_error("ring_strength_inv: bracket lost monotone window");
  if (y > ylo || y < yhi)
    throw std::domain_error("ring_strength_inv: value outside attained range");
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (ring_strength(mid) > y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double phi_one(double m, double ring_r) {
  Basis0 b = basis0(ring_r);
  return kSqrtPi * m * b.m * b.u * std::exp(-0.25 * ring_r * ring_r);
}

std::array<double, 2> basis_coefficients(double u0, double u1, double r) {
  Basis0 b = basis0(r);
  const double w = b.m * b.ud - b.md * b.u;
  return {(u1 * b.m - u0 * b.md) / w, (u0 * b.ud - u1 * b.u) / w};
}

std::array<double, 3> RadialSolution::eval(double r) const {
  const bool below = r < ring_r;
  const double cu = below ? cu_below : cu_above;
  const double cm = below ? cm_below : cm_above;
  double v = 0, d = 0;
  if (cu != 0) {
    Hyp u = phi_u0(r);
    v += cu * u.value;
    d += cu * u.deriv;
  }
  if (cm != 0) {
    Hyp m = phi_m0(r);
    v += cm * m.value;
    d += cm * m.deriv;
  }
  const double dd = -(1.0 / r - 0.5 * r) * d - 0.5 * v;
  return {v, d, dd};
}

std::array<double, 2> RadialSolution::weighted(double r) const {
  auto e = eval(r);
  const double g = std::exp(-r * r / 8.0);
  return {g * e[0], g * (e[1] - 0.25 * r * e[0])};
}

RadialSolution avg_profile(double m, double ring_r) {
  Basis0 b = basis0(ring_r);
  const double g = std::exp(-ring_r * ring_r / 8.0);
  RadialSolution s;
  s.ring_r = ring_r;
  s.cm_below = kSqrtPi * m * b.u * g;
  s.cu_above = kSqrtPi * m * b.m * g;
  return s;
}

RadialSolution solve_phibar(double a, double b, double ring_r) {
  const double g = std::exp(ring_r * ring_r / 8.0);
  const double u0 = g * a;
  const double u1 = g * b + 0.25 * ring_r * u0;
  auto c = basis_coefficients(u0, u1, ring_r);
  RadialSolution s;
  s.ring_r = ring_r;
  s.cu_below = s.cu_above = c[0];
  s.cm_below = s.cm_above = c[1];
  return s;
}

RadialSolution solve_jbar(double c, double ring_r) {
  const double g = std::exp(ring_r * ring_r / 8.0);
  auto lo = basis_coefficients(0.0, -g * c, ring_r);
  auto hi = basis_coefficients(0.0, +g * c, ring_r);
  RadialSolution s;
  s.ring_r = ring_r;
  s.cu_below = lo[0];
  s.cm_below = lo[1];
  s.cu_above = hi[0];
  s.cm_above = hi[1];
  return s;
}

namespace {

// Evaluation never needs mode data beyond these radii; capping the stored
// sigma range keeps the stiff outer integration short.
constexpr double kModeRCap = 110.0;
constexpr double kModeRFloor = 1e-4;

}  // namespace

ModeProfile mode_profile(int k, double ring_r, double sigma_cut) {
  if (k < 1) throw std::domain_error("mode_profile: k >= 1 required");
  if (!(ring_r > 0)) throw std::domain_error("mode_profile: ring_r > 0");
  ModeProfile mp;
  mp.k = k;
  mp.ring_r = ring_r;
  const double kk = k;
  auto rhs = [kk, ring_r](double sig, const Vec<2>& y) {
    const double r = ring_r * std::exp(sig / kk);
    const double r2 = r * r;
    Vec<2> d;
    d << y[1], (r2 / (2.0 * kk)) * y[1] + (1.0 - r2 / (2.0 * kk * kk)) * y[0];
    return d;
  };
  {
    const double bot = std::min(sigma_cut, kk * std::log(ring_r / kModeRFloor));
    Vec<2> y0;
    y0 << 1.0, 1.0;  // regular direction e^{+sigma} at depth
    OdePath<2> p = integrate<2>(rhs, -(bot + 40.0), 0.0, y0, 1e-12, 1e-60);
    mp.below = SampledCurve::from_path(p);
    mp.amp_below = 1.0 / p.y.back()[0];
    mp.sigma_lo = -bot;
    mp.jump = -kk / ring_r * p.y.back()[1] * mp.amp_below;
  }
  {
    const double top =
        std::min(sigma_cut, kk * std::max(0.1, std::log(kModeRCap / ring_r)));
    const double lam = ring_r * ring_r * std::exp(2.0 * top / kk) / (2.0 * kk);
    const double buf = std::min(40.0, 35.0 / std::max(1.0, lam)) + 2.0;
    Vec<2> y0;
    y0 << 1.0, -1.0;  // any direction transverse enough; projected backward
    OdePath<2> p = integrate<2>(rhs, top + buf, 0.0, y0, 1e-12, 1e-60);
    mp.above = SampledCurve::from_path(p);
    mp.amp_above = 1.0 / p.y.back()[0];
    mp.sigma_hi = top;
    mp.jump += kk / ring_r * p.y.back()[1] * mp.amp_above;
  }
  return mp;
}

std::array<double, 3> ModeProfile::eval(double r) const {
  if (!(r > 0)) throw std::domain_error("ModeProfile::eval: r > 0 required");
  const double sig = k * std::log(r / ring_r);
  if (sig < sigma_lo || sig > sigma_hi) return {0.0, 0.0, 0.0};
  const SampledCurve& c = (sig < 0) ? below : above;
  const double amp = (sig < 0) ? amp_below : amp_above;
  auto n = c.eval(sig);
  const double kr = k / r;
  return {amp * n[0], amp * kr * n[1],
          amp * (kr * kr * n[2] - k / (r * r) * n[1])};
}

}  // namespace planestack
