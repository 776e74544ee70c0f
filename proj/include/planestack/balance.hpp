#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "planestack/lattice_field.hpp"

namespace planestack {

// Half-integer indices are stored doubled. Levels j = -J..J share the parity
// of two_J; the interfaces between them have the opposite parity.
struct StackIndex {
  int two_J = 0;
  int two_i = 0;

  double as_real() const { return 0.5 * two_i; }
  bool is_level() const;
  bool is_interface() const;
};

// Lattice family selector for the interface ell: ell mod 2 for integer ell,
// (ell + 1/2) mod 2 for half-integer ell. Families 0 and 1 interleave, so
// consecutive interfaces never stack their sites on the same rays.
int sgn_interface(const StackIndex& ell);

// Unbalancing parameters. zeta_i / zeta_prime_i are indexed ascending over
// i = 1/2..J-1 (half-integer J) or i = 1..J-1 (integer J); kappa/kappa_perp
// ascending over the positive interfaces ell = 1..J-1/2 resp. 1/2..J-1/2.
// Negative indices are the odd extension and index 0 is pinned to zero.
struct ParamVector {
  int two_J = 1;
  double zeta = 0;
  double zeta_prime = 0;
  std::vector<double> zeta_i, zeta_prime_i;
  std::vector<double> kappa, kappa_perp;

  // Component counts for a given two_J, and the total dimension 4J.
  static int n_zeta(int two_J);
  static int n_kappa(int two_J);
  static int dim(int two_J) { return 2 * two_J; }
  static ParamVector zero(int two_J);

  // Doubled-index accessors with the conventions baked in: index 0 maps to
  // 0, negative indices to the negated positive entry, and zeta_at(two_J)
  // (the top level) to 0.
  double zeta_at(int two_i) const;
  double zeta_prime_at(int two_i) const;
  double kappa_at(int two_ell) const;
  double kappa_perp_at(int two_ell) const;

  Eigen::VectorXd pack() const;
  static ParamVector unpack(int two_J, const Eigen::VectorXd& v);

  // |zeta| + |bold zeta|_1 + |zeta'| + |bold zeta'|_1 and max |kappa entry|.
  double zeta_budget() const;
  double kappa_budget() const;
  double inf_norm() const;
};

// Radii, strengths, and heights of the 2J interface rings, plus the shared
// ring value phi_J and the cutoff scales. Entries are ordered by ascending
// interface index (two_ell = -two_J+1, ..., two_J-1 step 2).
struct DerivedParams {
  int two_J = 1;
  double phi_J = 0;
  double delta = 0;
  double alpha = 0;
  std::vector<double> r_ell, tau_ell, h_ell, delta_prime_ell;

  int index_of(int two_ell) const;  // throws outside the interface range
  double r(int two_ell) const;
  double h(int two_ell) const;
  // Strength of interface two_ell; indices past the outermost interfaces
  // return 0, which is also the natural limit of the strength formula there.
  double tau(int two_ell) const;
};

// Map the unbalancing parameters to the concrete ring data. All radii are
// anchored at the inverse ring strength of zeta'/m and corrected per ring by
// the accumulated zeta'_i; strengths share one exponential prefactor so
// their ratios stay within O(1/m) of 1. Throws std::domain_error if any
// radius leaves the admissible window, std::invalid_argument on malformed
// input.
DerivedParams derive_params(const ParamVector& pv, int m, double alpha = 0.05);

// Eigenpairs of the N x N 0/1 tridiagonal matrix: the closed form
// lambda_k = 2 cos(k pi / (N+1)) with sine eigenvectors, sorted descending,
// together with a brute-force dense eigendecomposition for cross-checking.
struct ToeplitzEigs {
  Eigen::VectorXd values;          // closed form, descending
  Eigen::MatrixXd vectors;         // columns, unnormalized sine entries
  Eigen::VectorXd numeric_values;  // dense solver, sorted descending
  Eigen::MatrixXd numeric_vectors;
};
ToeplitzEigs toeplitz_eigs(int N);

// Residual of the three-point cosine identity that makes the strength
// ladder balance: |cos(pi/(2J+1)) - (c(j-3/2) + c(j+1/2)) / (2 c(j-1/2))|
// with c(x) = cos(pi x / (2J+1)), for a level j in -J+1..J.
double trig_balance_check(int two_J, int two_j);

// One mismatch slot: level two_j with sign +1 (lower interface, two_j - 1)
// or -1 (upper interface, two_j + 1). Only slots not determined by the
// top-bottom symmetry are listed: levels j >= 0 (resp. 1/2), the top level
// carrying just its + slot, and j = 0 just its + slot as well.
struct MismatchSlot {
  int two_j = 0;
  int sign = 1;
};
std::vector<MismatchSlot> mismatch_slots(int two_J);

// Per-slot mismatch pairs in the order of mismatch_slots. pack() stacks all
// mu first, then all mu_prime, giving a vector of dimension 4J.
struct Mismatches {
  int two_J = 1;
  std::vector<double> mu, mu_prime;

  Eigen::VectorXd pack() const;
  double residual() const;  // max |mu| + max |mu_prime|
};

// Leading-order linear model of the mismatches, including the bridge
// dislocation shifts: exactly linear in the parameters.
Mismatches predicted_mismatch(const ParamVector& pv);

// Single-slot evaluations, defined for every level -J..J (not just the
// canonical slots): the top level has only its + slot, the bottom only -.
// Values at mirrored slots are exact negations of the stored ones.
struct SlotValues {
  double mu = 0, mu_prime = 0;
};
SlotValues predicted_slot(const ParamVector& pv, int two_j, int sign);
SlotValues actual_slot(const ParamVector& pv, int m, int two_j, int sign,
                       int n_modes = 24, double alpha = 0.05);

// Building blocks shared with the surface assembly: the singular lattice of
// one interface, the field of one level (sourced by its adjacent interface
// rings), and the normalized slot values read off a built level.
SingularLattice interface_lattice(const DerivedParams& dp, int m, int two_ell);
LdSolution build_level(const DerivedParams& dp, int m, int two_j, int n_modes);
SlotValues slot_from_solution(const LdSolution& sol, const DerivedParams& dp,
                              const ParamVector& pv, int two_j, int sign);

// The linear model as a matrix (probed column by column) together with its
// inverse Z computed by LU with partial pivoting. The map is block diagonal:
// (zeta group, kappa_perp) feed only mu, (zeta' group, kappa) only mu'.
struct BalanceMap {
  int two_J = 1;
  Eigen::MatrixXd A, Z;
  double cond = 0;
};
BalanceMap assemble_Z(int two_J);

// True mismatches of the stacked configuration: build each level's field
// from the two adjacent interface rings, extract the affine defect at a site
// of each ring, normalize by that ring's strength, and apply the dislocation
// shift. Returns the mismatches together with the derived parameters used.
struct MismatchReport {
  Mismatches mm;
  DerivedParams dp;
};
MismatchReport actual_mismatch(const ParamVector& pv, int m, int n_modes = 24,
                               double alpha = 0.05);

struct NewtonOptions {
  double tol = 1e-6;
  int max_iter = 20;
  int n_modes = 24;
  double alpha = 0.05;
  double c1 = 50.0;  // parameter budget; leaving it aborts the solve
};

struct NewtonResult {
  ParamVector pv;
  DerivedParams dp;               // derived data at the solution
  std::vector<double> residuals;  // one entry per evaluated iterate
  int iterations = 0;
};

// Damped Newton iteration pv <- pv - s Z(mismatch), s halved at most four
// times whenever the residual fails to drop. Stops when the residual
// max |mu| + max |mu_prime| falls below tol; throws std::runtime_error with
// the residual trace on non-convergence or when pv leaves the budget.
NewtonResult newton_solve(int two_J, int m, const ParamVector& pv0,
                          const NewtonOptions& opt = {});

// JSON report of the solved parameters, derived data, and residual history.
void report_json(const NewtonResult& res, std::ostream& out);

}  // namespace planestack
