#include "ovallab/radial_graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ovallab {

namespace {
constexpr double kHalfPi = 1.57079632679489661923;

// Even reflection of node index into [0, n).
inline int reflect_index(int i, int n) {
  // Cell-centered grid: ghost at -(j+1/2)h mirrors node (j+1/2)h, and
  // similarly past the far end. Repeated folding handles any offset.
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Cubic Lagrange interpolation on 4 equally spaced samples f(-1),f(0),f(1),f(2)
// evaluated at local coordinate u in [0,1] measured from the second sample.
inline double cubic4(double fm1, double f0, double f1, double f2, double u) {
  const double a = -fm1 / 6.0 + f0 / 2.0 - f1 / 2.0 + f2 / 6.0;
  const double b = fm1 / 2.0 - f0 + f1 / 2.0;
  const double c = -fm1 / 3.0 - f0 / 2.0 + f1 - f2 / 6.0;
  return ((a * u + b) * u + c) * u + f0;
}
}  // namespace

double ScalarField::min() const { return *std::min_element(values.begin(), values.end()); }
double ScalarField::max() const { return *std::max_element(values.begin(), values.end()); }
double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

RadialGraph::RadialGraph(SymmetrySpec sym, int n1, int n2, std::vector<double> rho)
    : sym_(sym), n1_(n1), n2_(n2), rho_(std::move(rho)) {
  sym_.validate();
  if (n1_ < 8) throw std::invalid_argument("RadialGraph: need at least 8 nodes per angle");
  h1_ = kHalfPi / n1_;
  if (n2_ > 0) {
    if (sym_.reduction != Reduction::Block || sym_.k != 2)
      throw std::invalid_argument("RadialGraph: 2d grids are for block reduction with k = 2");
    if (n2_ < 8) throw std::invalid_argument("RadialGraph: need at least 8 nodes per angle");
    h2_ = kHalfPi / n2_;
    if (rho_.size() != static_cast<std::size_t>(n1_) * n2_)
      throw std::invalid_argument("RadialGraph: rho length does not match grid");
  } else {
    if (rho_.size() != static_cast<std::size_t>(n1_))
      throw std::invalid_argument("RadialGraph: rho length does not match grid");
  }
  for (double r : rho_)
    if (!(r > 0.0) || !std::isfinite(r))
      throw std::invalid_argument("RadialGraph: rho must be positive and finite");
}

RadialGraph RadialGraph::axial(SymmetrySpec sym, int nodes, std::vector<double> rho) {
  return RadialGraph(sym, nodes, 0, std::move(rho));
}

RadialGraph RadialGraph::block(SymmetrySpec sym, int n1, int n2, std::vector<double> rho) {
  return RadialGraph(sym, n1, n2, std::move(rho));
}

double RadialGraph::min_rho() const { return *std::min_element(rho_.begin(), rho_.end()); }
double RadialGraph::max_rho() const { return *std::max_element(rho_.begin(), rho_.end()); }

double RadialGraph::rho_reflected(int i) const { return rho_[reflect_index(i, n1_)]; }

double RadialGraph::rho_reflected(int i, int j) const {
  return rho_[static_cast<std::size_t>(reflect_index(i, n1_)) * n2_ + reflect_index(j, n2_)];
}

RadialGraph RadialGraph::scaled(double factor) const {
  if (!(factor > 0.0)) throw std::invalid_argument("RadialGraph::scaled: factor must be positive");
  std::vector<double> r(rho_);
  for (double& v : r) v *= factor;
  return RadialGraph(sym_, n1_, n2_, std::move(r));
}

double RadialGraph::interp_axial(double phi) const {
  if (n2_ != 0) throw std::logic_error("interp_axial called on a block grid");
  const double x = phi / h1_ - 0.5;  // node index coordinate
  const int i0 = static_cast<int>(std::floor(x));
  const double u = x - i0;
  return cubic4(rho_reflected(i0 - 1), rho_reflected(i0), rho_reflected(i0 + 1),
                rho_reflected(i0 + 2), u);
}

double RadialGraph::interp_block(double theta, double phi) const {
  if (n2_ == 0) throw std::logic_error("interp_block called on an axial grid");
  const double x = theta / h1_ - 0.5;
  const double y = phi / h2_ - 0.5;
  const int i0 = static_cast<int>(std::floor(x));
  const int j0 = static_cast<int>(std::floor(y));
  const double u = x - i0;
  const double v = y - j0;
  double rows[4];
  for (int di = -1; di <= 2; ++di) {
    rows[di + 1] = cubic4(rho_reflected(i0 + di, j0 - 1), rho_reflected(i0 + di, j0),
                          rho_reflected(i0 + di, j0 + 1), rho_reflected(i0 + di, j0 + 2), v);
  }
  return cubic4(rows[0], rows[1], rows[2], rows[3], u);
}

void RadialGraph::check_invariants() const {
  for (double r : rho_)
    if (!(r > 0.0) || !std::isfinite(r))
      throw std::runtime_error("RadialGraph invariant violated: nonpositive rho");
}

void axial_derivatives(const RadialGraph& g, std::vector<double>& d1, std::vector<double>& d2) {
  const int n = g.n1();
  const double h = g.h1();
  d1.resize(n);
  d2.resize(n);
  const double c1 = 1.0 / (12.0 * h);
  const double c2 = 1.0 / (12.0 * h * h);
  for (int i = 0; i < n; ++i) {
    const double m2 = g.rho_reflected(i - 2);
    const double m1 = g.rho_reflected(i - 1);
    const double p0 = g.rho_reflected(i);
    const double p1 = g.rho_reflected(i + 1);
    const double p2 = g.rho_reflected(i + 2);
    d1[i] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) * c1;
    d2[i] = (-p2 + 16.0 * p1 - 30.0 * p0 + 16.0 * m1 - m2) * c2;
  }
}

}  // namespace ovallab
