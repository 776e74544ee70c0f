#pragma once

// Ambient geometry of the glued configuration: the gaussian weight, normal
// coordinates along weighted geodesics, tilted bridge charts, each level's
// glued height function, pointwise curvature checks, and the far-field cone
// slopes of the assembly.

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <vector>

#include "planestack/balance.hpp"
#include "planestack/lattice_field.hpp"

namespace planestack {

using AmbientPoint = Eigen::Vector3d;

// Log-density of the gaussian weight, w = -|X|^2/8, with gradient.
struct WeightJet {
  double w = 0;
  Eigen::Vector3d grad{0, 0, 0};
};
WeightJet gaussian_weight(const AmbientPoint& X);

struct GeodesicState {
  AmbientPoint x{0, 0, 0};
  Eigen::Vector3d xdot{0, 0, 0};
};

// Unit-time geodesic flow of the metric e^{2w} delta on a fixed RK4 grid.
// The metric speed e^{w}|xdot| is a first integral; speed_drift is its
// relative variation over the flow and measures the integration error.
struct GeodesicResult {
  GeodesicState state;
  double speed_drift = 0;
};
GeodesicResult conformal_geodesic(const AmbientPoint& x0,
                                  const Eigen::Vector3d& v0, int n_steps = 64);

// Normal chart at a plane point p: travel within the plane from p with
// metric length |v| (direction v), then leave the plane orthogonally with
// metric length |z|, signed toward z > 0. Points with z = 0 stay in the
// plane exactly. Throws when the inputs are non-finite or the speed drift
// of either leg exceeds 1e-8.
AmbientPoint fermi_map(const Eigen::Vector2d& p, const Eigen::Vector2d& v,
                       double z);

// One bridge chart: a catenoid of waist size tau centred at plane point p,
// height h, tilted along the radial direction at p by arctan(tau*kappa) and
// raised by tau*kappa_perp. rho_max bounds the usable model radius
// tau*cosh(s).
struct BridgeSpec {
  Eigen::Vector2d p{0, 0};
  double tau = 0;
  double h = 0;
  double kappa = 0;
  double kappa_perp = 0;
  double rho_max = 0;
};

// Model point in the tangent frame at spec.p, components along (radial,
// tangential, normal). s is metric arclength along the axis, vartheta the
// angle from the radial direction. Throws past rho_max.
AmbientPoint catenoid_model(const BridgeSpec& spec, double s, double vartheta);

// Ambient bridge point: the model point pushed through the chart at spec.p.
AmbientPoint catenoid_point(const BridgeSpec& spec, double s, double vartheta);

// Height of one catenoid branch over the plane at q: chart parameters whose
// ambient point projects to q. branch +1 selects s > 0. Throws when q is
// too close to p for the branch to be a graph there.
struct CatHeight {
  double z = 0;
  double s = 0;
  double vartheta = 0;
};
CatHeight catenoid_height(const BridgeSpec& spec, const Eigen::Vector2d& q,
                          int branch);

// Parametrised surface patch.
using PatchFn = std::function<AmbientPoint(double, double)>;

// Mean curvature (sum of the principal curvatures, normal along Xu x Xv) by
// central differences with one Richardson step. Throws when the step is too
// small to resolve the patch.
double mean_curvature_fd(const PatchFn& f, double u, double v, double step);

// Weighted mean curvature H + X.nu/2: the quantity that vanishes exactly on
// a self-shrinking surface.
double weighted_mean_curvature(const PatchFn& f, double u, double v,
                               double step);

// Height function jet at an in-plane point.
struct GraphJet {
  double v = 0;
  Eigen::Vector2d grad{0, 0};
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

// Weighted mean curvature of the graph z = phi from its jet at q, with the
// upward normal.
double graph_h2w(const GraphJet& jet, const Eigen::Vector2d& q);

// Everything needed to evaluate one level of a balanced configuration: its
// lattice field plus, per adjacent interface, the bridge chart, the
// localised correction directions with coefficients, and the glue radii.
// The corrections cancel the affine defect left by the finite solve; their
// coefficients are the negated slot values and are O(tol).
struct LevelField {
  int two_J = 1;
  int two_j = 1;
  int m = 0;
  LdSolution sol;

  struct Attachment {
    int two_ell = 0;
    int side = 1;  // +1: interface below the level, -1: above
    SingularLattice lat;
    BridgeSpec bridge;  // chart at lat.site(0); other sites by rotation
    ObstructionFns obs;
    double c_flat = 0;
    double c_tilt = 0;
    double r_hole = 0;        // the level is not a graph inside this radius
    double d_lo = 0, d_hi = 0;  // blend window: bridge below, field above
  };
  std::vector<Attachment> att;
};

std::vector<LevelField> build_level_fields(const ParamVector& pv, int m,
                                           int n_modes = 24,
                                           double alpha = 0.05);

// Bridge chart of one attachment at a given lattice site.
BridgeSpec bridge_at(const LevelField::Attachment& att, int site);

// Distance classification of an in-plane point against a level's bridges.
enum class ZoneKind { Graph, Blend, Core, Hole };
struct Zone {
  ZoneKind kind = ZoneKind::Graph;
  int att = -1;  // nearest attachment, -1 when the level has none
  int site = 0;  // nearest site of that attachment
  double d = 0;  // distance to that site
};
Zone classify(const LevelField& lf, const Eigen::Vector2d& q);

// Glued height function of the level: the corrected lattice field away from
// the bridges, the catenoid branch inside the glue radii, a smooth blend
// between. Throws inside the hole radius.
double graph_phi_gl(const LevelField& lf, const Eigen::Vector2d& q);

// Jet of graph_phi_gl: analytic in the pure-field zone away from the
// correction supports, Richardson differences through the blend.
GraphJet graph_phi_gl_jet(const LevelField& lf, const Eigen::Vector2d& q);

// Pointwise weighted-curvature survey of a configuration, split by region:
//   graph    sup |H + X.nu/2| over the corrected graphs, away from the
//            glue annuli, the correction supports, and the other family's
//            ring circle;
//   glue     the same sup over the blend annuli;
//   core     sup of rho^2 |H| / (tau + |z|) over the bridge cores (H is the
//            unweighted mean curvature; the weight term is O(1) there and
//            the catenoid bound is the natural yardstick);
//   support  the correction supports, when they meet the graph zone at all
//            (at the scales exercised here they sit inside the holes, so
//            this region is empty and reported as such).
struct RegionResiduals {
  double sup_graph = 0;
  double sup_glue = 0;
  double sup_core = 0;
  double sup_support = 0;
  int n_graph = 0, n_glue = 0, n_core = 0, n_support = 0;
};
RegionResiduals residual_report(const std::vector<LevelField>& levels,
                                int n_r = 48, int n_theta = 24);
void residuals_to_json(const RegionResiduals& rr, std::ostream& out);

// Far-field opening of each level: the graph approaches a shallow cone
// z ~ slope * r. closed comes from the ring data, numeric from far samples
// of the field extrapolated linearly in 1/r^2; flagged when the two
// disagree by more than 2% of the largest slope.
struct ConeSlope {
  int two_j = 0;
  double closed = 0;
  double numeric = 0;
  bool flagged = false;
};
std::vector<ConeSlope> cone_slopes(const std::vector<LevelField>& levels);
void slopes_to_csv(const std::vector<ConeSlope>& slopes, std::ostream& out);

}  // namespace planestack
