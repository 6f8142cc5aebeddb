#pragma once

#include <vector>

#include "ovallab/radial_graph.hpp"

namespace ovallab {

struct GridOptions {
  int axial_nodes = 512;
  int block_nodes = 192;  // per axis
};

/// Round sphere of the given radius at t = 0.
HypersurfaceSnapshot sphere_init(const SymmetrySpec& sym, double radius,
                                 const GridOptions& opt = {});

/// Ellipsoid { sum_{j<=k} (a_j/ell)^2 x_j^2 + mu^2 |x_rest|^2 = 2(n-k) }
/// at t = 0. Semiaxes are sqrt(2(n-k)) ell / a_j along the first k axes and
/// sqrt(2(n-k)) / mu in the remaining directions. All a_j must be strictly
/// positive; a_j = 0 is the noncompact limit and is rejected.
HypersurfaceSnapshot ellipsoid_init(const SymmetrySpec& sym, double ell,
                                    const std::vector<double>& a, double mu,
                                    const GridOptions& opt = {});

/// Mean curvature field. Convention: outward normal, H > 0 on convex bodies,
/// flow velocity -H nu. Nonconvex inputs produce sign-changing fields and are
/// not rejected.
ScalarField mean_curvature(const RadialGraph& g);

/// All principal curvatures per node (profile plus orbit directions),
/// n values per node, flattened node-major. Used for convexity checks.
std::vector<double> principal_curvatures(const RadialGraph& g);

/// Discrete convexity margin: min over nodes and directions of the principal
/// curvatures. A convex graph satisfies margin >= -1e-6 * max|H|.
double convexity_margin(const RadialGraph& g);
bool is_convex(const RadialGraph& g);

/// Induced area element per grid node, including the symmetry-orbit volume
/// factor; summing the field gives the total surface area.
ScalarField area_measure(const RadialGraph& g);

double total_area(const RadialGraph& g);

/// Volume enclosed by the surface.
double enclosed_volume(const RadialGraph& g);

/// Gaussian area functional (4 pi)^{-n/2} Int_{scale * M} exp(-|x|^2/4) dA.
double gaussian_density(const HypersurfaceSnapshot& snap, double scale);
double gaussian_density(const RadialGraph& g, double scale);

/// Gaussian density of the self-shrinking sphere S^m(sqrt(2m)), closed form:
/// (4 pi)^{-m/2} |S^m| (2m)^{m/2} e^{-m/2}. The value for S^m x R^j is the
/// same for every j >= 0.
double sphere_shrinker_density(int m);

/// Unit m-sphere area |S^m| = 2 pi^{(m+1)/2} / Gamma((m+1)/2).
double unit_sphere_area(int m);

/// Midpoint of the densities of S^{n-k} x R^k and S^{n-k+1} x R^{k-1}; the
/// value a normalized flow must attain one unit of rescaled time before
/// extinction. Cross-checked once per (n,k) against direct quadrature on a
/// fine sphere grid (1e-8 agreement) before first use.
double normalization_target_density(int n, int k);

}  // namespace ovallab
