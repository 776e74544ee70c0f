#include "planestack/lattice_field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <stdexcept>

#include "planestack/cutoff.hpp"

namespace planestack {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Assembly switches in m|log(r/ring_r)|. Below kCombZone the angular content
// is grouped as exact site logs plus residual modes, so truncation never
// touches the singular structure. Beyond kCombZone the direct mode sum is
// used, completed by the closed-form harmonic tail; past kTailZone that
// completion is below the noise floor of everything else and is skipped.
constexpr double kCombZone = 1.386;  // harmonic ratio q > 0.25
constexpr double kTailZone = 2.0;

double sq(double x) { return x * x; }

void check_lattice(const SingularLattice& lat) {
  if (lat.family != 0 && lat.family != 1)
    throw std::invalid_argument("lattice family must be 0 or 1");
  if (lat.m < 2) throw std::invalid_argument("lattice needs m >= 2");
  const StandingRoots R = standing_roots();
  const double lo = 0.5 * (R.r_u + R.r_mu), hi = 0.5 * (R.r_m + R.r_mu);
  if (!(lat.ring_r > lo && lat.ring_r < hi))
    throw std::domain_error("lattice radius outside the standing-wave window");
}

// sum_{n=1}^{N} a[n-1] cos(n phi)
double clenshaw_cos(const std::vector<double>& a, double phi) {
  const double c2 = 2.0 * std::cos(phi);
  double y1 = 0, y2 = 0;
  for (int n = static_cast<int>(a.size()); n >= 1; --n) {
    const double y = a[n - 1] + c2 * y1 - y2;
    y2 = y1;
    y1 = y;
  }
  return y1 * std::cos(phi) - y2;
}

// exp(shift) * sum_{n>N} e^{-n*mds} cos(n phi) / n, assembled term-wise so
// the shift exponent never materialises alone.
double comb_tail(double mds, double phi, int N, double shift) {
  const double lead = shift - (N + 1) * mds;
  if (lead < -745.0) return 0.0;
  double g = std::exp(lead);
  const double q = std::exp(-mds);
  const double c = std::cos(phi), s = std::sin(phi);
  double cn = std::cos((N + 1) * phi), sn = std::sin((N + 1) * phi);
  double acc = 0;
  for (int n = N + 1; n <= N + 4000; ++n) {
    acc += g * cn / n;
    const double cn1 = cn * c - sn * s;
    sn = sn * c + cn * s;
    cn = cn1;
    g *= q;
    if (g < 1e-22 * (1.0 + std::abs(acc)) * n) break;
  }
  return acc;
}

// log|x-p| - log d_p measured in the Gaussian metric, to second order:
// the difference is the affine function -(w(p) + dw_p(x-p)/2).
double subtract_correction(const SingularLattice& lat, int idx, double r,
                           double theta) {
  const double rr = lat.ring_r;
  const double px = rr * r * std::cos(theta - lat.site_angle(idx));
  return sq(rr) / 8.0 + (px - sq(rr)) / 8.0;
}

// One lattice term at unit strength on the weighted scale w = e^{-r^2/8} u.
// omit >= 0 removes that site's own log and folds in the conformal-distance
// correction, leaving the regular part across the site.
double term_weighted(const LatticeTerm& t, double r, double theta, int omit) {
  const double rr = t.lat.ring_r;
  const int m = t.lat.m;
  const int N = static_cast<int>(t.coef.size());
  const double ds = std::log(r / rr);
  const double mds = m * std::abs(ds);
  const double phi = m * (theta - t.lat.base_angle());
  const double ew = std::exp(-sq(r) / 8.0);

  if (mds < kCombZone) {
    double acc = ew * t.avg.value(r) - m * std::log(std::max(r, rr));
    const double q = std::exp(-mds);
    std::vector<double> b(N);
    double qn = 1.0;
    for (int n = 1; n <= N; ++n) {
      qn *= q;
      b[n - 1] = ew * t.coef[n - 1] * t.modes[n - 1].eval(r)[0] + qn / n;
    }
    acc += clenshaw_cos(b, phi);
    for (int i = 0; i < m; ++i) {
      if (i == omit) continue;
      const double d2 =
          sq(r) + sq(rr) - 2.0 * r * rr * std::cos(theta - t.lat.site_angle(i));
      acc += 0.5 * std::log(d2);
    }
    if (omit >= 0) acc += subtract_correction(t.lat, omit, r, theta);
    return acc;
  }

  std::vector<double> a(N);
  for (int n = 1; n <= N; ++n)
    a[n - 1] = t.coef[n - 1] * t.modes[n - 1].eval(r)[0];
  double acc = ew * (t.avg.value(r) + clenshaw_cos(a, phi));
  if (mds <= kTailZone) acc -= comb_tail(mds, phi, N, 0.0);
  if (omit >= 0) {
    const double d2 =
        sq(r) + sq(rr) - 2.0 * r * rr * std::cos(theta - t.lat.site_angle(omit));
    acc -= 0.5 * std::log(d2);
    acc += subtract_correction(t.lat, omit, r, theta);
  }
  return acc;
}

double term_plain(const LatticeTerm& t, double r, double theta) {
  const double rr = t.lat.ring_r;
  const int m = t.lat.m;
  const int N = static_cast<int>(t.coef.size());
  const double mds = m * std::abs(std::log(r / rr));
  if (mds < kCombZone)
    return std::exp(sq(r) / 8.0) * term_weighted(t, r, theta, -1);

  const double phi = m * (theta - t.lat.base_angle());
  std::vector<double> a(N);
  for (int n = 1; n <= N; ++n)
    a[n - 1] = t.coef[n - 1] * t.modes[n - 1].eval(r)[0];
  double acc = t.avg.value(r) + clenshaw_cos(a, phi);
  if (mds <= kTailZone) acc -= comb_tail(mds, phi, N, sq(r) / 8.0);
  return acc;
}

// (value, d/dr, d^2/dr^2) after multiplying a plain radial jet by e^{-r^2/8}
std::array<double, 3> weighted_chain(const std::array<double, 3>& u, double r,
                                     double ew) {
  return {ew * u[0], ew * (u[1] - 0.25 * r * u[0]),
          ew * (u[2] - 0.5 * r * u[1] + (sq(r) / 16.0 - 0.25) * u[0])};
}

PolarJet term_jet(const LatticeTerm& t, double r, double theta) {
  const double rr = t.lat.ring_r;
  const int m = t.lat.m;
  const int N = static_cast<int>(t.coef.size());
  const double ds = std::log(r / rr);
  const double mds = m * std::abs(ds);
  const double phi = m * (theta - t.lat.base_angle());
  const double cphi = std::cos(phi), sphi = std::sin(phi);

  if (mds < kCombZone) {
    const double ew = std::exp(-sq(r) / 8.0);
    PolarJet w;
    const auto wa = weighted_chain(t.avg.eval(r), r, ew);
    w.v = wa[0];
    w.dr = wa[1];
    w.drr = wa[2];
    if (r >= rr) {
      w.v -= m * std::log(r);
      w.dr -= m / r;
      w.drr += m / sq(r);
    } else {
      w.v -= m * std::log(rr);
    }
    const double q = std::exp(-mds);
    double qn = 1.0, cn = cphi, sn = sphi;
    for (int n = 1; n <= N; ++n) {
      qn *= q;
      const auto un = t.modes[n - 1].eval(r);
      const double c = t.coef[n - 1];
      const auto wm =
          weighted_chain({c * un[0], c * un[1], c * un[2]}, r, ew);
      const double km = double(n) * m;
      double f0 = qn / n, f1, f2;
      if (r >= rr) {
        f1 = -m * qn / r;
        f2 = km * (km + 1.0) * qn / (n * sq(r));
      } else {
        f1 = m * qn / r;
        f2 = km * (km - 1.0) * qn / (n * sq(r));
      }
      const double b0 = wm[0] + f0, b1 = wm[1] + f1, b2 = wm[2] + f2;
      w.v += b0 * cn;
      w.dr += b1 * cn;
      w.drr += b2 * cn;
      w.dt -= b0 * km * sn;
      w.drt -= b1 * km * sn;
      w.dtt -= b0 * km * km * cn;
      const double cn1 = cn * cphi - sn * sphi;
      sn = sn * cphi + cn * sphi;
      cn = cn1;
    }
    for (int i = 0; i < m; ++i) {
      const double dlt = theta - t.lat.site_angle(i);
      const double cd = std::cos(dlt), sd = std::sin(dlt);
      const double A = r - rr * cd, B = r * rr * sd;
      const double d2 = sq(r) + sq(rr) - 2.0 * r * rr * cd;
      w.v += 0.5 * std::log(d2);
      w.dr += A / d2;
      w.dt += B / d2;
      w.drr += 1.0 / d2 - 2.0 * sq(A) / sq(d2);
      w.drt += rr * sd / d2 - 2.0 * A * B / sq(d2);
      w.dtt += r * rr * cd / d2 - 2.0 * sq(B) / sq(d2);
    }
    const double E = std::exp(sq(r) / 8.0);
    PolarJet out;
    out.v = E * w.v;
    out.dr = E * (w.dr + 0.25 * r * w.v);
    out.drr = E * (w.drr + 0.5 * r * w.dr + (0.25 + sq(r) / 16.0) * w.v);
    out.dt = E * w.dt;
    out.drt = E * (w.drt + 0.25 * r * w.dt);
    out.dtt = E * w.dtt;
    return out;
  }

  PolarJet out;
  const auto ua = t.avg.eval(r);
  out.v = ua[0];
  out.dr = ua[1];
  out.drr = ua[2];
  double cn = cphi, sn = sphi;
  for (int n = 1; n <= N; ++n) {
    const auto un = t.modes[n - 1].eval(r);
    const double c = t.coef[n - 1];
    const double km = double(n) * m;
    out.v += c * un[0] * cn;
    out.dr += c * un[1] * cn;
    out.drr += c * un[2] * cn;
    out.dt -= c * un[0] * km * sn;
    out.drt -= c * un[1] * km * sn;
    out.dtt -= c * un[0] * km * km * cn;
    const double cn1 = cn * cphi - sn * sphi;
    sn = sn * cphi + cn * sphi;
    cn = cn1;
  }
  if (mds <= kTailZone) {
    const double lead = sq(r) / 8.0 - (N + 1) * mds;
    if (lead >= -745.0) {
      const double sg = ds >= 0 ? 1.0 : -1.0;
      double g = std::exp(lead);
      const double q = std::exp(-mds);
      double tn = std::cos((N + 1) * phi), un = std::sin((N + 1) * phi);
      for (int n = N + 1; n <= N + 4000; ++n) {
        const double km = double(n) * m;
        const double l1 = 0.25 * r - km * sg / r;
        const double l2 = 0.25 + km * sg / sq(r);
        const double g1 = g * l1, g2 = g * (sq(l1) + l2);
        out.v -= g * tn / n;
        out.dr -= g1 * tn / n;
        out.drr -= g2 * tn / n;
        out.dt += g * km * un / n;
        out.drt += g1 * km * un / n;
        out.dtt += g * km * km * tn / n;
        const double tn1 = tn * cphi - un * sphi;
        un = un * cphi + tn * sphi;
        tn = tn1;
        g *= q;
        if (g * (1.0 + sq(km)) <
            1e-22 * (1.0 + std::abs(out.v) + std::abs(out.dtt)) * n)
          break;
      }
    }
  }
  return out;
}

template <class F>
void for_terms(const LdSolution& s, F&& f) {
  if (s.plus) f(*s.plus);
  if (s.minus) f(*s.minus);
}

struct SiteRef {
  const LatticeTerm* term;
  int index;
};

std::optional<SiteRef> locate_site(const LdSolution& sol,
                                   const Eigen::Vector2d& p) {
  std::optional<SiteRef> hit;
  for_terms(sol, [&](const LatticeTerm& t) {
    if (hit) return;
    const int n = t.lat.nearest_site(std::atan2(p.y(), p.x()));
    if ((t.lat.site(n) - p).norm() <= 1e-9 * std::max(1.0, t.lat.ring_r))
      hit = SiteRef{&t, n};
  });
  return hit;
}

void eval_guards(const LdSolution& sol, double r, double theta,
                 bool allow_singular) {
  if (!(r >= 1e-3 && r <= 1e4))
    throw std::domain_error("eval_ld: radius outside the supported window");
  if (allow_singular) return;
  bool near = false;
  for_terms(sol, [&](const LatticeTerm& t) {
    if (t.lat.distance(r, theta) < 1e-8) near = true;
  });
  if (near)
    throw std::domain_error(
        "eval_ld: evaluation at a singular site needs subtraction");
}

LatticeTerm make_term(const SingularLattice& lat, double sign, double tau,
                      int n_modes) {
  check_lattice(lat);
  LatticeTerm t;
  t.lat = lat;
  t.sign = sign;
  t.tau = tau;
  t.avg = avg_profile(lat.m, lat.ring_r);
  const double jump_scale =
      2.0 * lat.m * std::exp(sq(lat.ring_r) / 8.0) / lat.ring_r;
  t.modes.reserve(n_modes);
  t.coef.reserve(n_modes);
  for (int n = 1; n <= n_modes; ++n) {
    ModeProfile mp = mode_profile(n * lat.m, lat.ring_r);
    t.coef.push_back(jump_scale / mp.jump);
    t.modes.push_back(std::move(mp));
  }
  return t;
}

// Dropped-mode bound at the band edge |r - ring_r| = 3/m. The residual modes
// decay at least at the harmonic rate e^{-n m |log(r/ring_r)|} there; the
// ring prefactors are measured, and the result is scaled back to the plain
// field.
double term_tail(const LatticeTerm& t) {
  const double rr = t.lat.ring_r;
  const int N = static_cast<int>(t.coef.size());
  const double ew = std::exp(-sq(rr) / 8.0);
  double K = 0;
  for (int n = 1; n <= N; ++n)
    K = std::max(K, n * std::abs(ew * t.coef[n - 1]));
  const double q = std::exp(-3.0 / rr);
  return 3.0 * K * std::pow(q, N + 1) / ((N + 1) * (1.0 - q)) / ew;
}

}  // namespace

double SingularLattice::base_angle() const {
  return family == 0 ? 0.0 : kPi / m;
}

double SingularLattice::site_angle(int n) const {
  return base_angle() + 2.0 * kPi * n / m;
}

Eigen::Vector2d SingularLattice::site(int n) const {
  const double a = site_angle(n);
  return {ring_r * std::cos(a), ring_r * std::sin(a)};
}

int SingularLattice::nearest_site(double theta) const {
  long n = std::lround((theta - base_angle()) * m / (2.0 * kPi));
  n %= m;
  if (n < 0) n += m;
  return static_cast<int>(n);
}

double SingularLattice::distance(double r, double theta) const {
  const double a = site_angle(nearest_site(theta));
  const double d2 = sq(r) + sq(ring_r) - 2.0 * r * ring_r * std::cos(theta - a);
  return std::sqrt(std::max(d2, 0.0));
}

LdSolution build_ld(const std::optional<SingularLattice>& lat_plus,
                    const std::optional<SingularLattice>& lat_minus,
                    double tau_plus, double tau_minus, int n_modes) {
  if (!lat_plus && !lat_minus)
    throw std::invalid_argument("build_ld: no lattice given");
  if (tau_plus < 0 || tau_minus < 0)
    throw std::invalid_argument("build_ld: negative strength");
  if (n_modes < 8)
    throw std::invalid_argument("build_ld: need at least 8 modes");
  LdSolution sol;
  sol.n_modes = n_modes;
  if (lat_plus) sol.plus = make_term(*lat_plus, 1.0, tau_plus, n_modes);
  if (lat_minus) sol.minus = make_term(*lat_minus, -1.0, tau_minus, n_modes);
  sol.tail_bound = 0;
  for_terms(sol, [&](const LatticeTerm& t) {
    sol.tail_bound += t.tau * term_tail(t);
  });
  if (sol.tail_bound > 1e-8)
    std::cerr << "build_ld: mode truncation bound " << sol.tail_bound
              << " above 1e-8; increase n_modes\n";
  return sol;
}

double eval_ld(const LdSolution& sol, double r, double theta,
               const std::optional<Eigen::Vector2d>& subtract_at) {
  if (!subtract_at) {
    eval_guards(sol, r, theta, false);
    double acc = 0;
    for_terms(sol, [&](const LatticeTerm& t) {
      acc += t.sign * t.tau * term_plain(t, r, theta);
    });
    return acc;
  }
  eval_guards(sol, r, theta, true);
  const auto site = locate_site(sol, *subtract_at);
  if (!site)
    throw std::invalid_argument(
        "eval_ld: subtraction point is not a lattice site");
  double acc = 0;
  for_terms(sol, [&](const LatticeTerm& t) {
    const int omit = (&t == site->term) ? site->index : -1;
    acc += t.sign * t.tau * term_weighted(t, r, theta, omit);
  });
  return acc;
}

double eval_ld_weighted(const LdSolution& sol, double r, double theta) {
  eval_guards(sol, r, theta, false);
  double acc = 0;
  for_terms(sol, [&](const LatticeTerm& t) {
    acc += t.sign * t.tau * term_weighted(t, r, theta, -1);
  });
  return acc;
}

PolarJet eval_ld_jet(const LdSolution& sol, double r, double theta) {
  eval_guards(sol, r, theta, false);
  PolarJet acc;
  for_terms(sol, [&](const LatticeTerm& t) {
    const PolarJet j = term_jet(t, r, theta);
    const double w = t.sign * t.tau;
    acc.v += w * j.v;
    acc.dr += w * j.dr;
    acc.dt += w * j.dt;
    acc.drr += w * j.drr;
    acc.drt += w * j.drt;
    acc.dtt += w * j.dtt;
  });
  return acc;
}

double green_cyl(double s, double t) {
  const double as = std::abs(s);
  if (as > 20.0)
    return 0.5 * as +
           0.5 * std::log1p(std::exp(-2.0 * as) -
                            2.0 * std::cos(t) * std::exp(-as));
  const double arg = 2.0 * std::cosh(s) - 2.0 * std::cos(t);
  if (!(arg > 0)) throw std::domain_error("green_cyl: singular input");
  return 0.5 * std::log(arg);
}

AffineMismatch extract_affine(const LdSolution& sol, const Eigen::Vector2d& p,
                              double tau, double h) {
  const auto site = locate_site(sol, p);
  if (!site)
    throw std::invalid_argument("extract_affine: p is not a lattice site");
  if (std::abs(tau - site->term->tau) > 1e-12 * std::max(1.0, std::abs(tau)))
    throw std::invalid_argument(
        "extract_affine: strength does not match the owning lattice");
  const int m = site->term->lat.m;
  const double delta = 1.0 / (100.0 * m);
  const double eps = std::min(delta / 4.0, 0.3 / m);
  const Eigen::Vector2d rhat = p.normalized();
  const Eigen::Vector2d that(-rhat.y(), rhat.x());

  // affine fit on one circle: constant, radial and tangential coefficients
  const auto fit = [&](double e) {
    std::array<double, 3> c{0, 0, 0};
    constexpr int K = 16;
    for (int j = 0; j < K; ++j) {
      const double a = 2.0 * kPi * j / K;
      const Eigen::Vector2d x = p + e * (std::cos(a) * rhat + std::sin(a) * that);
      const double F =
          eval_ld(sol, x.norm(), std::atan2(x.y(), x.x()), p);
      c[0] += F / K;
      c[1] += 2.0 * F * std::cos(a) / (K * e);
      c[2] += 2.0 * F * std::sin(a) / (K * e);
    }
    return c;
  };
  const auto c1 = fit(eps), c2 = fit(eps / 2.0);
  std::array<double, 3> c;
  for (int i = 0; i < 3; ++i) c[i] = (4.0 * c2[i] - c1[i]) / 3.0;

  if (std::abs(c[2]) > 1e-6 * std::max(1.0, std::abs(c[1])))
    throw std::runtime_error(
        "extract_affine: tangential component violates the ring symmetry");

  const double log_shift = tau > 0 ? tau * std::log(tau / 2.0) : 0.0;
  AffineMismatch out;
  out.mu = c[0] + site->term->sign * log_shift - h;
  out.mu_prime = c[1];
  out.point = p;
  out.h_used = h;
  out.tau_used = tau;
  return out;
}

ObstructionFns obstruction_fns(const SingularLattice& lat) {
  check_lattice(lat);
  ObstructionFns f;
  f.lat = lat;
  f.delta = 1.0 / (100.0 * lat.m);
  f.flat = solve_phibar(1.0, 0.0, lat.ring_r);
  f.tilt = solve_phibar(0.0, 1.0, lat.ring_r);
  return f;
}

namespace {

double localized(const RadialSolution& prof, const SingularLattice& lat,
                 double delta, double r, double theta) {
  const double d = lat.distance(r, theta);
  if (d >= 2.0 * delta) return 0.0;
  return CutChart{2.0 * delta, delta}(d) * prof.value(r);
}

// L(psi f) for L f = 0: f (Lap psi - x . grad psi / 2) + 2 grad psi . grad f,
// with psi a radial cutoff about the nearest site.
double image_of(const RadialSolution& prof, const SingularLattice& lat,
                double delta, double r, double theta) {
  const Eigen::Vector2d p = lat.site(lat.nearest_site(theta));
  const Eigen::Vector2d x(r * std::cos(theta), r * std::sin(theta));
  const Eigen::Vector2d v = x - p;
  const double d = v.norm();
  if (d <= delta || d >= 2.0 * delta) return 0.0;
  const CutChart psi{2.0 * delta, delta};
  const double p1 = psi.d(d), p2 = psi.dd(d);
  const Eigen::Vector2d vh = v / d;
  const auto u = prof.eval(r);
  const Eigen::Vector2d rh = x / r;
  return u[0] * (p2 + p1 * (1.0 / d - 0.5 * x.dot(vh))) +
         2.0 * p1 * u[1] * rh.dot(vh);
}

}  // namespace

double ObstructionFns::V(double r, double theta) const {
  return localized(flat, lat, delta, r, theta);
}

double ObstructionFns::Vp(double r, double theta) const {
  return localized(tilt, lat, delta, r, theta);
}

double ObstructionFns::W(double r, double theta) const {
  return image_of(flat, lat, delta, r, theta);
}

double ObstructionFns::Wp(double r, double theta) const {
  return image_of(tilt, lat, delta, r, theta);
}

void modes_to_csv(const LdSolution& sol, std::ostream& out) {
  out << "lattice,sign,tau,ring_r,n,angular_order,coefficient\n";
  out << std::setprecision(17);
  for_terms(sol, [&](const LatticeTerm& t) {
    const char* name = t.sign > 0 ? "plus" : "minus";
    for (int n = 1; n <= static_cast<int>(t.coef.size()); ++n)
      out << name << ',' << t.sign << ',' << t.tau << ',' << t.lat.ring_r
          << ',' << n << ',' << n * t.lat.m << ',' << t.coef[n - 1] << '\n';
  });
}

void slice_to_csv(const LdSolution& sol, const std::vector<double>& rs,
                  const std::vector<double>& thetas, std::ostream& out) {
  out << "r,theta,value\n";
  out << std::setprecision(17);
  for (const double r : rs)
    for (const double th : thetas)
      out << r << ',' << th << ',' << eval_ld(sol, r, th) << '\n';
}

}  // namespace planestack
