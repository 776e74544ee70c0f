#pragma once

#include <array>

#include "planestack/hyper.hpp"
#include "planestack/ode.hpp"

namespace planestack {

// Radial factor of the cos(k theta) mode of the linearized operator on the
// plane:
//
//   u'' + (1/r - r/2) u' + (1/2 - k^2/r^2) u = 0.
//
// The weighted profile w := e^{-r^2/8} u turns ring matching into plain
// continuity of (w, w'); w' is the natural slope datum at a ring.

struct Basis0 {
  double m, md;  // entire solution M(-1/2, 1, r^2/4) and its r-derivative
  double u, ud;  // linearly growing solution U(-1/2, 1, r^2/4) and derivative
};

// k = 0 basis. The U component is backed by a cached far-field integration
// valid for r in [2e-4, 103]; the M component overflows past r ~ 53 and
// throws std::overflow_error.
Basis0 basis0(double r);

// Value and r-derivative of the two components separately, so callers can
// skip the one they do not need (the M component overflows far out).
Hyp phi_m0(double r);
Hyp phi_u0(double r);

// Companion pair M, U at parameter a = k^2 - 1/2, the order-k analogue used
// by the Wronskian checks. k = 0 reduces to basis0.
Basis0 basis_pair_k(int k, double r);

// Closed form for phi_m phi_u' - phi_m' phi_u of basis_pair_k.
double wronskian_closed(int k, double r);

struct StandingRoots {
  double r_u;   // zero of the U component
  double r_mu;  // zero of slope_sum: ring radius of the merged profile
  double r_m;   // zero of the M component
};

const StandingRoots& standing_roots();

// phi_m'/phi_m + phi_u'/phi_u - r/2; vanishes at r_mu.
double slope_sum(double r);

// Weighted half-slope of the averaged ring profile at ring radius r, per
// unit m. Positive below r_mu, zero at r_mu, negative above.
double ring_strength(double r);

// Inverse of ring_strength on the bracket between the neighbouring roots.
// Throws std::domain_error for values outside the attained range.
double ring_strength_inv(double y);

// Weighted ring value of the averaged profile of an m-point ring.
double phi_one(double m, double ring_r);

// Piecewise solution of the k = 0 equation across a ring, stored as
// coefficients on (phi_u, phi_m) per side.
struct RadialSolution {
  double ring_r = 0;
  double cu_below = 0, cm_below = 0;
  double cu_above = 0, cm_above = 0;

  // u, u', u''; one-sided, below for r < ring_r. u'' comes from the ODE.
  std::array<double, 3> eval(double r) const;
  double value(double r) const { return eval(r)[0]; }
  double deriv(double r) const { return eval(r)[1]; }
  // w = e^{-r^2/8} u and its r-derivative
  std::array<double, 2> weighted(double r) const;
};

// Coefficients (cu, cm) of the solution with Cauchy data (u, u') at r.
std::array<double, 2> basis_coefficients(double u0, double u1, double r);

// Rotational average of the field of m unit sources on a ring:
// A phi_m inside, B phi_u outside, derivative jump m e^{r^2/8} / r.
RadialSolution avg_profile(double m, double ring_r);

// Smooth solution with weighted ring data (w, w') = (a, b).
RadialSolution solve_phibar(double a, double b, double ring_r);

// Kinked solution: w(ring_r) = 0, one-sided weighted slopes -c and +c.
RadialSolution solve_jbar(double c, double ring_r);

// Normalized cos(k theta) profile through a ring: regular branch below,
// linearly growing branch above, u = 1 at the ring on both sides. The raw
// integrations are stored in sigma = k log(r / ring_r); evaluation outside
// [sigma_lo, sigma_hi] returns zeros (the profile is far below roundoff
// there). The stored curves extend past the window by buffer zones that only
// serve to damp seed transients and are never exposed.
struct ModeProfile {
  int k = 0;
  double ring_r = 0;
  SampledCurve below, above;
  double amp_below = 1, amp_above = 1;
  double sigma_lo = 0, sigma_hi = 0;
  double jump = 0;  // u'(ring+) - u'(ring-) of the normalized profile

  std::array<double, 3> eval(double r) const;  // u, u', u''
};

ModeProfile mode_profile(int k, double ring_r, double sigma_cut = 40.0);

}  // namespace planestack
