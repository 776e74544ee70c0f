#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "planestack/radial.hpp"

namespace planestack {

// m equally spaced logarithmic-singularity sites on the circle r = ring_r.
// Family 0 places a site at angle 0, family 1 is offset by pi/m, so the two
// families interleave.
struct SingularLattice {
  int family = 0;
  double ring_r = 0;
  int m = 0;

  double base_angle() const;
  double site_angle(int n) const;
  Eigen::Vector2d site(int n) const;
  // Index in [0, m) of the site whose angle is closest to theta.
  int nearest_site(double theta) const;
  // Euclidean distance from (r, theta) to the nearest site.
  double distance(double r, double theta) const;
};

// One lattice's share of a built solution: the circular average plus the
// cosine corrections that re-concentrate the averaged flux at the sites.
// Mode n has angular order n*m and coefficient coef[n-1] against the
// normalized profile modes[n-1].
struct LatticeTerm {
  SingularLattice lat;
  double sign = 1;  // +1: e^w u ~ +tau log d near sites; -1: opposite
  double tau = 0;
  RadialSolution avg;
  std::vector<ModeProfile> modes;
  std::vector<double> coef;
};

struct LdSolution {
  std::optional<LatticeTerm> plus, minus;
  int n_modes = 0;
  // Bound on the dropped angular content at |r - ring_r| >= 3/m, scaled by
  // the strengths; recorded by build_ld so truncation is never silent.
  double tail_bound = 0;
};

// Unique D_m-symmetric solution of the linearised equation with +tau_plus
// (resp. -tau_minus) logarithmic sites on the given lattices. Strengths must
// be nonnegative, n_modes >= 8, and each ring radius must lie strictly
// between the standing-wave midpoints (r_u+r_mu)/2 and (r_m+r_mu)/2.
LdSolution build_ld(const std::optional<SingularLattice>& lat_plus,
                    const std::optional<SingularLattice>& lat_minus,
                    double tau_plus, double tau_minus, int n_modes);

// Plain value. Without subtraction the point must stay at least 1e-8 from
// every site. With subtract_at = p (a site of one of the lattices), returns
// the weighted regular part e^w u -/+ tau log d_p instead, smooth across p;
// the site distance d_p is measured in the Gaussian metric through its
// second-order conformal expansion.
double eval_ld(const LdSolution& sol, double r, double theta,
               const std::optional<Eigen::Vector2d>& subtract_at = std::nullopt);

// e^{-r^2/8} times the plain value.
double eval_ld_weighted(const LdSolution& sol, double r, double theta);

// Second-order polar jet of the plain value.
struct PolarJet {
  double v = 0;
  double dr = 0, dt = 0;
  double drr = 0, drt = 0, dtt = 0;
};
PolarJet eval_ld_jet(const LdSolution& sol, double r, double theta);

// Green's function of the linearised operator on the flat cylinder,
// (1/2) log(4 sin^2(t/2) + 4 sinh^2(s/2)). Throws on the singular locus.
double green_cyl(double s, double t);

// Affine defect of the regular part against the catenoid model at a site:
// mu is the constant part (fit constant +/- tau log(tau/2) - h), mu_prime
// the radial-derivative part. The tangential component of the fit must
// vanish by symmetry and is asserted.
struct AffineMismatch {
  double mu = 0;
  double mu_prime = 0;
  Eigen::Vector2d point{0, 0};
  double h_used = 0;
  double tau_used = 0;
};

AffineMismatch extract_affine(const LdSolution& sol, const Eigen::Vector2d& p,
                              double tau, double h);

// Localised deformation directions V, V' (ring profiles with weighted ring
// data (1,0) and (0,1), cut off at distance ~2*delta from the sites) and
// their images W = LV, W' = LV' under the linearised operator, assembled
// analytically from the product rule. delta = 1/(100 m). W, W' vanish
// outside the transition annuli of the cutoff.
struct ObstructionFns {
  SingularLattice lat;
  double delta = 0;
  RadialSolution flat;  // weighted ring data (1, 0)
  RadialSolution tilt;  // weighted ring data (0, 1)

  double V(double r, double theta) const;
  double Vp(double r, double theta) const;
  double W(double r, double theta) const;
  double Wp(double r, double theta) const;
};

ObstructionFns obstruction_fns(const SingularLattice& lat);

// CSV emission: mode coefficient tables and sampled solution slices.
void modes_to_csv(const LdSolution& sol, std::ostream& out);
void slice_to_csv(const LdSolution& sol, const std::vector<double>& rs,
                  const std::vector<double>& thetas, std::ostream& out);

}  // namespace planestack
