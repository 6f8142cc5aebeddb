#include "ovallab/geometry.hpp"

#include <array>
#include <cmath>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>

namespace ovallab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHalfPi = 1.57079632679489661923;

// ---------------------------------------------------------------------------
// Node quadrature weights for integrals against the reduced-angle measure
// cos^a(phi) sin^b(phi) dphi on [0, pi/2] at cell centers phi_i = (i+1/2)h.
//
// The measure vanishes with fractional smoothness at the interval ends, so a
// plain midpoint sum is only O(h^2) there. Matching the moments of the
// doubly-even cosine basis cos(2m phi) instead makes the node sum exact for
// every integrand whose reflected cosine expansion is resolved by the grid;
// smooth symmetric surface quantities then integrate with spectral accuracy.
// ---------------------------------------------------------------------------
const std::vector<double>& angular_weights(int N, int a, int b) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(N, a, b);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  // Moments mom_m = Int_0^{pi/2} cos(2 m phi) cos^a sin^b dphi via composite
  // Simpson, well below 1e-14 absolute at this resolution.
  const int S = 1 << 14;
  const double hs = kHalfPi / S;
  std::vector<double> base(S + 1);
  for (int i = 0; i <= S; ++i) {
    const double phi = i * hs;
    base[i] = std::pow(std::cos(phi), a) * std::pow(std::sin(phi), b);
  }
  std::vector<double> mom(N);
  for (int m = 0; m < N; ++m) {
    double s = 0.0;
    for (int i = 0; i <= S; ++i) {
      const double coef = (i == 0 || i == S) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      s += coef * std::cos(2.0 * m * i * hs) * base[i];
    }
    mom[m] = s * hs / 3.0;
  }
  std::vector<double> w(N, 0.0);
  for (int i = 0; i < N; ++i) {
    const double x = (i + 0.5) * kPi / N;  // 2 m phi_i = m x
    double s = mom[0] / N;
    for (int m = 1; m < N; ++m) s += (2.0 / N) * mom[m] * std::cos(m * x);
    w[i] = s;
  }
  return cache.emplace(key, std::move(w)).first->second;
}

struct Vec3 {
  double x, y, z;
};
inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Per-node derivative bundle for block grids, 4th-order centered stencils on
// the reflection-extended lattice.
struct BlockDerivs {
  std::vector<double> dt, dp, dtt, dpp, dtp;
};

BlockDerivs block_derivatives(const RadialGraph& g) {
  const int n1 = g.n1(), n2 = g.n2();
  const double h1 = g.h1(), h2 = g.h2();
  BlockDerivs d;
  const std::size_t sz = static_cast<std::size_t>(n1) * n2;
  d.dt.resize(sz);
  d.dp.resize(sz);
  d.dtt.resize(sz);
  d.dpp.resize(sz);
  d.dtp.resize(sz);
  const double c1t = 1.0 / (12.0 * h1), c2t = 1.0 / (12.0 * h1 * h1);
  const double c1p = 1.0 / (12.0 * h2), c2p = 1.0 / (12.0 * h2 * h2);
  auto R = [&](int i, int j) { return g.rho_reflected(i, j); };
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const std::size_t id = static_cast<std::size_t>(i) * n2 + j;
      d.dt[id] = (-R(i + 2, j) + 8 * R(i + 1, j) - 8 * R(i - 1, j) + R(i - 2, j)) * c1t;
      d.dp[id] = (-R(i, j + 2) + 8 * R(i, j + 1) - 8 * R(i, j - 1) + R(i, j - 2)) * c1p;
      d.dtt[id] =
          (-R(i + 2, j) + 16 * R(i + 1, j) - 30 * R(i, j) + 16 * R(i - 1, j) - R(i - 2, j)) * c2t;
      d.dpp[id] =
          (-R(i, j + 2) + 16 * R(i, j + 1) - 30 * R(i, j) + 16 * R(i, j - 1) - R(i, j - 2)) * c2p;
      // d/dtheta of d/dphi, both 4th order
      double row[5];
      for (int di = -2; di <= 2; ++di) {
        row[di + 2] =
            (-R(i + di, j + 2) + 8 * R(i + di, j + 1) - 8 * R(i + di, j - 1) + R(i + di, j - 2)) *
            c1p;
      }
      d.dtp[id] = (-row[4] + 8 * row[3] - 8 * row[1] + row[0]) * c1t;
    }
  }
  return d;
}

// Axial principal curvatures at one node given rho, rho', rho''.
// [curve, orbit-s (k-1 copies), orbit-r (n-k copies)]
inline void axial_curvatures(double rho, double d1, double d2, double cphi, double sphi,
                             double& kappa_curve, double& kappa_s, double& kappa_r) {
  const double W2 = rho * rho + d1 * d1;
  const double W = std::sqrt(W2);
  kappa_curve = (rho * rho + 2.0 * d1 * d1 - rho * d2) / (W2 * W);
  const double nu_s = (rho * cphi + d1 * sphi) / W;
  const double nu_r = (rho * sphi - d1 * cphi) / W;
  kappa_s = nu_s / (rho * cphi);
  kappa_r = nu_r / (rho * sphi);
}

// Block (k=2) curvature data at one node: the two shape-operator eigenvalues
// of the reduced surface in (x1,x2,r) space plus the fiber curvature.
struct BlockCurv {
  double kap1, kap2, kap_fiber, H;
};

inline BlockCurv block_curvatures(double rho, double dt, double dp, double dtt, double dpp,
                                  double dtp, double st, double ct, double sp, double cp,
                                  int fiber_dim) {
  const Vec3 w{st * cp, st * sp, ct};
  const Vec3 wt{ct * cp, ct * sp, -st};
  const Vec3 wp{-st * sp, st * cp, 0.0};
  const Vec3 wtt{-w.x, -w.y, -w.z};
  const Vec3 wpp{-st * cp, -st * sp, 0.0};
  const Vec3 wtp{-ct * sp, ct * cp, 0.0};

  const Vec3 Xt = dt * w + rho * wt;
  const Vec3 Xp = dp * w + rho * wp;
  const Vec3 Xtt = dtt * w + 2.0 * dt * wt + rho * wtt;
  const Vec3 Xpp = dpp * w + 2.0 * dp * wp + rho * wpp;
  const Vec3 Xtp = dtp * w + dt * wp + dp * wt + rho * wtp;

  const double E = dot(Xt, Xt), F = dot(Xt, Xp), G = dot(Xp, Xp);
  Vec3 N = cross(Xt, Xp);
  const double Nn = std::sqrt(dot(N, N));
  Vec3 nu = (1.0 / Nn) * N;
  if (dot(nu, w) < 0.0) nu = -1.0 * nu;  // outward

  // Second form with the convex-positive sign.
  const double L = -dot(Xtt, nu), M = -dot(Xtp, nu), Npq = -dot(Xpp, nu);
  const double det1 = E * G - F * F;
  const double tr = (G * L - 2.0 * F * M + E * Npq) / det1;
  const double detS = (L * Npq - M * M) / det1;
  double disc = tr * tr - 4.0 * detS;
  if (disc < 0.0) disc = 0.0;
  const double root = std::sqrt(disc);
  BlockCurv out;
  out.kap1 = 0.5 * (tr + root);
  out.kap2 = 0.5 * (tr - root);
  const double r = rho * ct;
  out.kap_fiber = nu.z / r;
  out.H = tr + fiber_dim * out.kap_fiber;
  return out;
}

}  // namespace

HypersurfaceSnapshot sphere_init(const SymmetrySpec& sym, double radius, const GridOptions& opt) {
  sym.validate();
  if (!(radius > 0.0)) throw std::invalid_argument("sphere_init: radius must be positive");
  if (sym.reduction == Reduction::Axial) {
    std::vector<double> rho(static_cast<std::size_t>(opt.axial_nodes), radius);
    return {0.0, RadialGraph::axial(sym, opt.axial_nodes, std::move(rho))};
  }
  std::vector<double> rho(static_cast<std::size_t>(opt.block_nodes) * opt.block_nodes, radius);
  return {0.0, RadialGraph::block(sym, opt.block_nodes, opt.block_nodes, std::move(rho))};
}

HypersurfaceSnapshot ellipsoid_init(const SymmetrySpec& sym, double ell,
                                    const std::vector<double>& a, double mu,
                                    const GridOptions& opt) {
  sym.validate();
  if (!(ell > 0.0)) throw std::invalid_argument("ellipsoid_init: ell must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("ellipsoid_init: mu must be positive");
  if (static_cast<int>(a.size()) != sym.k)
    throw std::invalid_argument("ellipsoid_init: a must have k components");
  for (double aj : a)
    if (!(aj > 0.0))
      throw std::invalid_argument(
          "ellipsoid_init: noncompact limit, all a_j must be strictly positive");

  const double rhs = 2.0 * (sym.n - sym.k);
  if (sym.reduction == Reduction::Axial) {
    for (double aj : a)
      if (aj != a[0])
        throw std::invalid_argument(
            "ellipsoid_init: axial reduction requires equal components of a");
    const double qa = (a[0] / ell) * (a[0] / ell);
    const double qm = mu * mu;
    const int N = opt.axial_nodes;
    std::vector<double> rho(static_cast<std::size_t>(N));
    const double h = kHalfPi / N;
    for (int i = 0; i < N; ++i) {
      const double phi = (i + 0.5) * h;
      const double c = std::cos(phi), s = std::sin(phi);
      rho[i] = std::sqrt(rhs / (qa * c * c + qm * s * s));
    }
    return {0.0, RadialGraph::axial(sym, N, std::move(rho))};
  }

  // Block, k = 2.
  const double q1 = (a[0] / ell) * (a[0] / ell);
  const double q2 = (a[1] / ell) * (a[1] / ell);
  const double qm = mu * mu;
  const int N = opt.block_nodes;
  std::vector<double> rho(static_cast<std::size_t>(N) * N);
  const double h = kHalfPi / N;
  for (int i = 0; i < N; ++i) {
    const double th = (i + 0.5) * h;
    const double st = std::sin(th), ct = std::cos(th);
    for (int j = 0; j < N; ++j) {
      const double ph = (j + 0.5) * h;
      const double w1 = st * std::cos(ph), w2 = st * std::sin(ph);
      rho[static_cast<std::size_t>(i) * N + j] =
          std::sqrt(rhs / (q1 * w1 * w1 + q2 * w2 * w2 + qm * ct * ct));
    }
  }
  return {0.0, RadialGraph::block(sym, N, N, std::move(rho))};
}

ScalarField mean_curvature(const RadialGraph& g) {
  ScalarField out;
  const SymmetrySpec& sym = g.sym();
  if (g.is_axial_grid()) {
    std::vector<double> d1, d2;
    axial_derivatives(g, d1, d2);
    const int N = g.n1();
    out.values.resize(N);
    for (int i = 0; i < N; ++i) {
      const double phi = g.angle1(i);
      double kc, ks, kr;
      axial_curvatures(g.rho_at(i), d1[i], d2[i], std::cos(phi), std::sin(phi), kc, ks, kr);
      out.values[i] = kc + (sym.k - 1) * ks + (sym.n - sym.k) * kr;
    }
    return out;
  }
  const BlockDerivs d = block_derivatives(g);
  const int n1 = g.n1(), n2 = g.n2();
  out.values.resize(static_cast<std::size_t>(n1) * n2);
  for (int i = 0; i < n1; ++i) {
    const double th = g.angle1(i);
    const double st = std::sin(th), ct = std::cos(th);
    for (int j = 0; j < n2; ++j) {
      const double ph = g.angle2(j);
      const std::size_t id = static_cast<std::size_t>(i) * n2 + j;
      const BlockCurv c =
          block_curvatures(g.rho_at(i, j), d.dt[id], d.dp[id], d.dtt[id], d.dpp[id], d.dtp[id], st,
                           ct, std::sin(ph), std::cos(ph), sym.n - sym.k);
      out.values[id] = c.H;
    }
  }
  return out;
}

std::vector<double> principal_curvatures(const RadialGraph& g) {
  const SymmetrySpec& sym = g.sym();
  std::vector<double> out;
  if (g.is_axial_grid()) {
    std::vector<double> d1, d2;
    axial_derivatives(g, d1, d2);
    const int N = g.n1();
    out.reserve(static_cast<std::size_t>(N) * sym.n);
    for (int i = 0; i < N; ++i) {
      const double phi = g.angle1(i);
      double kc, ks, kr;
      axial_curvatures(g.rho_at(i), d1[i], d2[i], std::cos(phi), std::sin(phi), kc, ks, kr);
      out.push_back(kc);
      for (int m = 0; m < sym.k - 1; ++m) out.push_back(ks);
      for (int m = 0; m < sym.n - sym.k; ++m) out.push_back(kr);
    }
    return out;
  }
  const BlockDerivs d = block_derivatives(g);
  const int n1 = g.n1(), n2 = g.n2();
  out.reserve(static_cast<std::size_t>(n1) * n2 * sym.n);
  for (int i = 0; i < n1; ++i) {
    const double th = g.angle1(i);
    const double st = std::sin(th), ct = std::cos(th);
    for (int j = 0; j < n2; ++j) {
      const double ph = g.angle2(j);
      const std::size_t id = static_cast<std::size_t>(i) * n2 + j;
      const BlockCurv c =
          block_curvatures(g.rho_at(i, j), d.dt[id], d.dp[id], d.dtt[id], d.dpp[id], d.dtp[id], st,
                           ct, std::sin(ph), std::cos(ph), sym.n - sym.k);
      out.push_back(c.kap1);
      out.push_back(c.kap2);
      for (int m = 0; m < sym.n - sym.k; ++m) out.push_back(c.kap_fiber);
    }
  }
  return out;
}

double convexity_margin(const RadialGraph& g) {
  const std::vector<double> k = principal_curvatures(g);
  double m = k[0];
  for (double v : k) m = std::min(m, v);
  return m;
}

bool is_convex(const RadialGraph& g) {
  const ScalarField H = mean_curvature(g);
  const double tol = 1e-6 * H.max_abs();
  return convexity_margin(g) >= -tol;
}

ScalarField area_measure(const RadialGraph& g) {
  const SymmetrySpec& sym = g.sym();
  ScalarField out;
  if (g.is_axial_grid()) {
    std::vector<double> d1, d2;
    axial_derivatives(g, d1, d2);
    const int N = g.n1();
    const std::vector<double>& qw = angular_weights(N, sym.k - 1, sym.n - sym.k);
    const double orbit = unit_sphere_area(sym.k - 1) * unit_sphere_area(sym.n - sym.k);
    out.values.resize(N);
    for (int i = 0; i < N; ++i) {
      const double rho = g.rho_at(i);
      const double W = std::sqrt(rho * rho + d1[i] * d1[i]);
      out.values[i] = W * std::pow(rho, sym.n - 1) * qw[i] * orbit;
    }
    return out;
  }
  const BlockDerivs d = block_derivatives(g);
  const int n1 = g.n1(), n2 = g.n2();
  const std::vector<double>& qwt = angular_weights(n1, sym.n - sym.k, 1);
  // 2^k reflected copies of the fundamental domain times the fiber sphere;
  // the phi direction has a smooth unit measure, plain cell weights suffice.
  const double orbit = 4.0 * unit_sphere_area(sym.n - sym.k) * g.h2();
  out.values.resize(static_cast<std::size_t>(n1) * n2);
  for (int i = 0; i < n1; ++i) {
    const double st = std::sin(g.angle1(i));
    for (int j = 0; j < n2; ++j) {
      const std::size_t id = static_cast<std::size_t>(i) * n2 + j;
      const double rho = g.rho_at(i, j);
      const double dt = d.dt[id];
      const double q = d.dp[id] / st;
      const double smooth = rho * std::sqrt(q * q + rho * rho + dt * dt) *
                            std::pow(rho, sym.n - sym.k);
      out.values[id] = smooth * qwt[i] * orbit;
    }
  }
  return out;
}

double total_area(const RadialGraph& g) {
  const ScalarField a = area_measure(g);
  double s = 0.0;
  for (double v : a.values) s += v;
  return s;
}

double enclosed_volume(const RadialGraph& g) {
  const SymmetrySpec& sym = g.sym();
  const int np1 = sym.n + 1;
  double s = 0.0;
  if (g.is_axial_grid()) {
    const std::vector<double>& qw = angular_weights(g.n1(), sym.k - 1, sym.n - sym.k);
    const double orbit = unit_sphere_area(sym.k - 1) * unit_sphere_area(sym.n - sym.k);
    for (int i = 0; i < g.n1(); ++i) s += std::pow(g.rho_at(i), np1) * qw[i];
    return s * orbit / np1;
  }
  const std::vector<double>& qwt = angular_weights(g.n1(), sym.n - sym.k, 1);
  const double orbit = 4.0 * unit_sphere_area(sym.n - sym.k) * g.h2();
  for (int i = 0; i < g.n1(); ++i) {
    for (int j = 0; j < g.n2(); ++j) s += std::pow(g.rho_at(i, j), np1) * qwt[i];
  }
  return s * orbit / np1;
}

double gaussian_density(const RadialGraph& g, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("gaussian_density: scale must be positive");
  const int n = g.sym().n;
  const ScalarField a = area_measure(g);
  const double sn = std::pow(scale, n);
  double s = 0.0;
  if (g.is_axial_grid()) {
    for (int i = 0; i < g.n1(); ++i) {
      const double r = scale * g.rho_at(i);
      s += a.values[i] * std::exp(-0.25 * r * r);
    }
  } else {
    for (std::size_t id = 0; id < a.values.size(); ++id) {
      const double r = scale * g.rho()[id];
      s += a.values[id] * std::exp(-0.25 * r * r);
    }
  }
  return s * sn * std::pow(4.0 * kPi, -0.5 * n);
}

double gaussian_density(const HypersurfaceSnapshot& snap, double scale) {
  return gaussian_density(snap.graph, scale);
}

double unit_sphere_area(int m) {
  if (m < 0) throw std::invalid_argument("unit_sphere_area: m >= 0 required");
  return 2.0 * std::pow(kPi, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1));
}

double sphere_shrinker_density(int m) {
  if (m < 1) throw std::invalid_argument("sphere_shrinker_density: m >= 1 required");
  return std::pow(4.0 * kPi, -0.5 * m) * unit_sphere_area(m) * std::pow(2.0 * m, 0.5 * m) *
         std::exp(-0.5 * m);
}

namespace {

// Direct quadrature of the shrinker-sphere density, independent of the closed
// form: midpoint rule on the polar angle of S^m(sqrt(2m)) in R^{m+1}.
double sphere_shrinker_density_quadrature(int m) {
  const double R = std::sqrt(2.0 * m);
  const double w = std::exp(-0.25 * R * R);
  if (m == 1) {
    return std::pow(4.0 * kPi, -0.5) * 2.0 * kPi * R * w;
  }
  // dA = R^m sin^{m-1}(t) |S^{m-1}| dt, t in [0, pi]; composite Simpson.
  const int N = 4096;
  const double h = kPi / N;
  double s = 0.0;
  for (int i = 0; i <= N; ++i) {
    const double coef = (i == 0 || i == N) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += coef * std::pow(std::sin(i * h), m - 1);
  }
  s *= h / 3.0;
  return std::pow(4.0 * kPi, -0.5 * m) * std::pow(R, m) * unit_sphere_area(m - 1) * s * w;
}

std::mutex target_check_mutex;
std::set<std::pair<int, int>> target_checked;

}  // namespace

double normalization_target_density(int n, int k) {
  SymmetrySpec(n, k).validate();
  const double ent_lo = sphere_shrinker_density(n - k);
  const double ent_hi = sphere_shrinker_density(n - k + 1);
  {
    std::lock_guard<std::mutex> lock(target_check_mutex);
    if (!target_checked.count({n, k})) {
      for (int m : {n - k, n - k + 1}) {
        const double closed = sphere_shrinker_density(m);
        const double quad = sphere_shrinker_density_quadrature(m);
        if (std::abs(closed - quad) > 1e-8 * closed)
          throw std::runtime_error("normalization_target_density: quadrature cross-check failed");
      }
      target_checked.insert({n, k});
    }
  }
  return 0.5 * (ent_lo + ent_hi);
}

}  // namespace ovallab
