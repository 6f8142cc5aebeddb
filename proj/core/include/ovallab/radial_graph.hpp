#pragma once

#include <cstddef>
#include <vector>

#include "ovallab/symmetry.hpp"

namespace ovallab {

/// Scalar quantity sampled on the nodes of a RadialGraph grid.
struct ScalarField {
  std::vector<double> values;

  double min() const;
  double max() const;
  double max_abs() const;
};

/// Convex symmetric hypersurface stored as a radial graph over the
/// symmetry-reduced sphere.
///
/// Axial: nodes at angles phi_i = (i+1/2) h, h = (pi/2)/n1, i = 0..n1-1.
///   phi = 0 is the flat-direction axis (the tips), phi = pi/2 the equator.
///   The surface point in reduced (s, r) coordinates is
///   (rho cos(phi), rho sin(phi)) with s = |x_{1..k}|, r = |x_{k+1..n+1}|.
///
/// Block (k = 2): nodes at (theta_i, phi_j), cell-centered on [0,pi/2]^2.
///   Direction w = (sin(theta) cos(phi), sin(theta) sin(phi), cos(theta)) in
///   reduced (x1, x2, r) coordinates; theta = 0 is the rotational axis,
///   theta = pi/2 the (x1, x2) plane holding the tips.
///
/// All reduced angles live on one fundamental domain of the symmetry group;
/// values extend to the full sphere by reflection. rho > 0 everywhere.
class RadialGraph {
 public:
  RadialGraph() = default;
  RadialGraph(SymmetrySpec sym, int n1, int n2, std::vector<double> rho);

  static RadialGraph axial(SymmetrySpec sym, int nodes, std::vector<double> rho);
  static RadialGraph block(SymmetrySpec sym, int n1, int n2, std::vector<double> rho);

  const SymmetrySpec& sym() const { return sym_; }
  bool is_axial_grid() const { return n2_ == 0; }
  int n1() const { return n1_; }
  int n2() const { return n2_; }
  std::size_t size() const { return rho_.size(); }

  const std::vector<double>& rho() const { return rho_; }
  std::vector<double>& mutable_rho() { return rho_; }

  double h1() const { return h1_; }
  double h2() const { return h2_; }
  double angle1(int i) const { return (i + 0.5) * h1_; }
  double angle2(int j) const { return (j + 0.5) * h2_; }

  double rho_at(int i) const { return rho_[i]; }
  double rho_at(int i, int j) const { return rho_[static_cast<std::size_t>(i) * n2_ + j]; }

  double min_rho() const;
  double max_rho() const;

  /// Value at integer offset with even reflection at both fundamental-domain
  /// boundaries (symmetry ghost nodes).
  double rho_reflected(int i) const;
  double rho_reflected(int i, int j) const;

  RadialGraph scaled(double factor) const;

  /// Evaluate rho at an arbitrary angle by cubic interpolation on the
  /// reflected grid. Axial grids only.
  double interp_axial(double phi) const;
  /// Bicubic interpolation for block grids.
  double interp_block(double theta, double phi) const;

  void check_invariants() const;

 private:
  SymmetrySpec sym_;
  int n1_ = 0;
  int n2_ = 0;  // 0 for axial grids
  double h1_ = 0.0;
  double h2_ = 0.0;
  std::vector<double> rho_;
};

/// Time-stamped surface.
struct HypersurfaceSnapshot {
  double t = 0.0;
  RadialGraph graph;
};

/// Fourth-order centered first/second derivatives on the reflected grid.
/// Axial: d/dphi and d2/dphi2 at every node.
void axial_derivatives(const RadialGraph& g, std::vector<double>& d1, std::vector<double>& d2);

}  // namespace ovallab
