#include "ovallab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <sstream>

namespace ovallab {

namespace {

constexpr double kHalfPi = 1.57079632679489661923;

// ---------------------------------------------------------------------------
// Axial right-hand side, fused with curvature statistics. Hot loop.
// ---------------------------------------------------------------------------

struct AxialTables {
  std::vector<double> cosv, sinv, inv_cos, inv_sin;
};

const AxialTables& axial_tables(int N) {
  static std::mutex mu;
  static std::map<int, AxialTables> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(N);
  if (it != cache.end()) return it->second;
  AxialTables t;
  const double h = kHalfPi / N;
  t.cosv.resize(N);
  t.sinv.resize(N);
  t.inv_cos.resize(N);
  t.inv_sin.resize(N);
  for (int i = 0; i < N; ++i) {
    const double phi = (i + 0.5) * h;
    t.cosv[i] = std::cos(phi);
    t.sinv[i] = std::sin(phi);
    t.inv_cos[i] = 1.0 / t.cosv[i];
    t.inv_sin[i] = 1.0 / t.sinv[i];
  }
  return cache.emplace(N, std::move(t)).first->second;
}

struct RhsStats {
  double max_abs_H = 0.0;
  double min_kappa = std::numeric_limits<double>::infinity();
  double min_W2 = std::numeric_limits<double>::infinity();
  double min_rho = std::numeric_limits<double>::infinity();
  bool finite = true;
};

// rhs = -H * W / rho on the axial grid. ext is the ghost-extended rho array
// (length N + 4, entries [2, N+2) are the nodes).
void axial_fill_ext(const std::vector<double>& rho, std::vector<double>& ext) {
  const int N = static_cast<int>(rho.size());
  ext.resize(N + 4);
  std::memcpy(ext.data() + 2, rho.data(), N * sizeof(double));
  ext[1] = rho[0];
  ext[0] = rho[1];
  ext[N + 2] = rho[N - 1];
  ext[N + 3] = rho[N - 2];
}

RhsStats axial_rhs(const SymmetrySpec& sym, int N, const std::vector<double>& ext,
                   std::vector<double>& f) {
  const AxialTables& tb = axial_tables(N);
  const double h = kHalfPi / N;
  const double c1 = 1.0 / (12.0 * h);
  const double c2 = 1.0 / (12.0 * h * h);
  const double km1 = sym.k - 1;
  const double nmk = sym.n - sym.k;
  RhsStats st;
  f.resize(N);
  const double* e = ext.data() + 2;
  for (int i = 0; i < N; ++i) {
    const double rho = e[i];
    const double d1 = (-e[i + 2] + 8.0 * e[i + 1] - 8.0 * e[i - 1] + e[i - 2]) * c1;
    const double d2 =
        (-e[i + 2] + 16.0 * e[i + 1] - 30.0 * rho + 16.0 * e[i - 1] - e[i - 2]) * c2;
    const double W2 = rho * rho + d1 * d1;
    const double invW = 1.0 / std::sqrt(W2);
    const double invW2 = invW * invW;
    const double inv_rho = 1.0 / rho;
    const double kc = (rho * rho + 2.0 * d1 * d1 - rho * d2) * invW2 * invW;
    const double ks = (rho * tb.cosv[i] + d1 * tb.sinv[i]) * invW * inv_rho * tb.inv_cos[i];
    const double kr = (rho * tb.sinv[i] - d1 * tb.cosv[i]) * invW * inv_rho * tb.inv_sin[i];
    const double H = kc + km1 * ks + nmk * kr;
    f[i] = -H * inv_rho / invW;
    st.max_abs_H = std::max(st.max_abs_H, std::abs(H));
    double kmin = std::min(kc, kr);
    if (sym.k > 1) kmin = std::min(kmin, ks);
    st.min_kappa = std::min(st.min_kappa, kmin);
    st.min_W2 = std::min(st.min_W2, W2);
    st.min_rho = std::min(st.min_rho, rho);
  }
  if (!std::isfinite(st.max_abs_H) || !std::isfinite(st.min_kappa)) st.finite = false;
  return st;
}

// ---------------------------------------------------------------------------
// Block right-hand side with near-pole mode filtering.
// ---------------------------------------------------------------------------

// Projection matrices keeping the first M doubly-even cosine modes of a row.
// f(phi) = sum_m c_m cos(2 m phi) on cell-centered nodes of [0, pi/2].
class RowFilter {
 public:
  static const std::vector<double>& projection(int n, int modes) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::vector<double>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(n, modes);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    // Basis cos(m x_j), x_j = (j + 1/2) pi / n; orthogonal under the node sum.
    std::vector<double> P(static_cast<std::size_t>(n) * n, 0.0);
    for (int m = 0; m < modes && m < n; ++m) {
      const double norm = (m == 0) ? 1.0 / n : 2.0 / n;
      for (int j = 0; j < n; ++j) {
        const double bj = std::cos(m * (j + 0.5) * M_PI / n);
        for (int l = 0; l < n; ++l) {
          const double bl = std::cos(m * (l + 0.5) * M_PI / n);
          P[static_cast<std::size_t>(j) * n + l] += norm * bj * bl;
        }
      }
    }
    return cache.emplace(key, std::move(P)).first->second;
  }
};

void block_filter(const SymmetrySpec&, int n1, int n2, std::vector<double>& rho) {
  const double h1 = kHalfPi / n1;
  std::vector<double> tmp(n2);
  for (int i = 0; i < n1; ++i) {
    const double st = std::sin((i + 0.5) * h1);
    const int modes = std::max(3, static_cast<int>(std::ceil(st * n2)));
    if (modes >= n2) continue;
    const std::vector<double>& P = RowFilter::projection(n2, modes);
    double* row = rho.data() + static_cast<std::size_t>(i) * n2;
    for (int j = 0; j < n2; ++j) {
      double s = 0.0;
      const double* prow = P.data() + static_cast<std::size_t>(j) * n2;
      for (int l = 0; l < n2; ++l) s += prow[l] * row[l];
      tmp[j] = s;
    }
    std::memcpy(row, tmp.data(), n2 * sizeof(double));
  }
}

// Gradient norm for block grids: W = sqrt(rho^2 + |grad_S rho|^2) with the
// spherical gradient in the (theta, phi) chart.
std::vector<double> block_gradient_norm(const RadialGraph& g) {
  const int n1 = g.n1(), n2 = g.n2();
  const double h1 = g.h1(), h2 = g.h2();
  const double c1t = 1.0 / (12.0 * h1), c1p = 1.0 / (12.0 * h2);
  std::vector<double> W(static_cast<std::size_t>(n1) * n2);
  for (int i = 0; i < n1; ++i) {
    const double st = std::sin(g.angle1(i));
    for (int j = 0; j < n2; ++j) {
      const double dt = (-g.rho_reflected(i + 2, j) + 8 * g.rho_reflected(i + 1, j) -
                         8 * g.rho_reflected(i - 1, j) + g.rho_reflected(i - 2, j)) *
                        c1t;
      const double dp = (-g.rho_reflected(i, j + 2) + 8 * g.rho_reflected(i, j + 1) -
                         8 * g.rho_reflected(i, j - 1) + g.rho_reflected(i, j - 2)) *
                        c1p;
      const double rho = g.rho_at(i, j);
      const double grad2 = dt * dt + (dp / st) * (dp / st);
      W[static_cast<std::size_t>(i) * n2 + j] = std::sqrt(rho * rho + grad2);
    }
  }
  return W;
}

RhsStats block_rhs(const RadialGraph& g, std::vector<double>& f) {
  const int n1 = g.n1(), n2 = g.n2();
  RhsStats st;
  f.resize(static_cast<std::size_t>(n1) * n2);
  const ScalarField H = mean_curvature(g);
  const std::vector<double> kappas = principal_curvatures(g);
  const std::vector<double> grad = block_gradient_norm(g);
  for (std::size_t id = 0; id < f.size(); ++id) {
    const double rho = g.rho()[id];
    const double W = grad[id];
    f[id] = -H.values[id] * W / rho;
    st.max_abs_H = std::max(st.max_abs_H, std::abs(H.values[id]));
    st.min_W2 = std::min(st.min_W2, W * W);
    st.min_rho = std::min(st.min_rho, rho);
  }
  for (double kv : kappas) st.min_kappa = std::min(st.min_kappa, kv);
  if (!std::isfinite(st.max_abs_H) || !std::isfinite(st.min_kappa)) st.finite = false;
  return st;
}

}  // namespace

double dt_max(const HypersurfaceSnapshot& snap, const FlowOptions& opt) {
  const RadialGraph& g = snap.graph;
  if (g.is_axial_grid()) {
    std::vector<double> ext, f;
    axial_fill_ext(g.rho(), ext);
    const RhsStats st = axial_rhs(g.sym(), g.n1(), ext, f);
    const double h = g.h1();
    const double guard = 0.25 / (st.max_abs_H * st.max_abs_H);
    return opt.dt_safety * std::min(h * h * st.min_W2, guard);
  }
  std::vector<double> f;
  const RhsStats st = block_rhs(g, f);
  const double h = g.h1();
  const double guard = 0.25 / (st.max_abs_H * st.max_abs_H);
  return opt.dt_safety * std::min(h * h * st.min_W2, guard);
}

namespace {

bool positive_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!(x > 0.0) || !std::isfinite(x)) return false;
  return true;
}

struct StepScratch {
  std::vector<double> ext, f0, f1, mid, out;
};

// One Heun step on an axial state. Returns stats of the END state rhs so the
// caller can validate convexity without an extra evaluation.
bool axial_heun(const SymmetrySpec& sym, int N, const std::vector<double>& rho, double dt,
                StepScratch& s, RhsStats& stats_start, RhsStats& stats_end,
                std::vector<double>& result) {
  axial_fill_ext(rho, s.ext);
  stats_start = axial_rhs(sym, N, s.ext, s.f0);
  if (!stats_start.finite) return false;
  s.mid.resize(N);
  for (int i = 0; i < N; ++i) s.mid[i] = rho[i] + dt * s.f0[i];
  if (!positive_finite(s.mid)) return false;
  axial_fill_ext(s.mid, s.ext);
  const RhsStats st1 = axial_rhs(sym, N, s.ext, s.f1);
  if (!st1.finite) return false;
  result.resize(N);
  for (int i = 0; i < N; ++i) result[i] = rho[i] + 0.5 * dt * (s.f0[i] + s.f1[i]);
  if (!positive_finite(result)) return false;
  axial_fill_ext(result, s.ext);
  stats_end = axial_rhs(sym, N, s.ext, s.f0);
  return stats_end.finite;
}

bool block_heun(const RadialGraph& g, double dt, StepScratch& s, RhsStats& stats_start,
                RhsStats& stats_end, std::vector<double>& result) {
  const SymmetrySpec sym = g.sym();
  const int n1 = g.n1(), n2 = g.n2();
  stats_start = block_rhs(g, s.f0);
  if (!stats_start.finite) return false;
  s.mid = g.rho();
  for (std::size_t i = 0; i < s.mid.size(); ++i) s.mid[i] += dt * s.f0[i];
  block_filter(sym, n1, n2, s.mid);
  if (!positive_finite(s.mid)) return false;
  RadialGraph gmid = RadialGraph::block(sym, n1, n2, s.mid);
  const RhsStats st1 = block_rhs(gmid, s.f1);
  if (!st1.finite) return false;
  result = g.rho();
  for (std::size_t i = 0; i < result.size(); ++i) result[i] += 0.5 * dt * (s.f0[i] + s.f1[i]);
  block_filter(sym, n1, n2, result);
  if (!positive_finite(result)) return false;
  RadialGraph gend = RadialGraph::block(sym, n1, n2, result);
  stats_end = block_rhs(gend, s.f0);
  return stats_end.finite;
}

bool convexity_ok(const RhsStats& st, const FlowOptions& opt) {
  return st.min_kappa >= -opt.convex_slack * st.max_abs_H;
}

}  // namespace

StepResult step(const HypersurfaceSnapshot& snap, double dt, const FlowOptions& opt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  StepResult res;
  StepScratch scratch;
  RhsStats st0, st1;
  std::vector<double> out;
  bool ok;
  if (snap.graph.is_axial_grid())
    ok = axial_heun(snap.graph.sym(), snap.graph.n1(), snap.graph.rho(), dt, scratch, st0, st1,
                    out);
  else
    ok = block_heun(snap.graph, dt, scratch, st0, st1, out);
  if (!ok) {
    res.reason = "positivity lost or non-finite state";
    return res;
  }
  if (!convexity_ok(st1, opt)) {
    res.reason = "convexity violated beyond tolerance";
    return res;
  }
  res.ok = true;
  res.snap.t = snap.t + dt;
  res.snap.graph = snap.graph.is_axial_grid()
                       ? RadialGraph::axial(snap.graph.sym(), snap.graph.n1(), std::move(out))
                       : RadialGraph::block(snap.graph.sym(), snap.graph.n1(), snap.graph.n2(),
                                            std::move(out));
  return res;
}

FlowTrajectory evolve_to_extinction(const HypersurfaceSnapshot& snap0, double store_every,
                                    const FlowOptions& opt) {
  if (!(store_every > 0.0))
    throw std::invalid_argument("evolve_to_extinction: store_every must be positive");
  const SymmetrySpec sym = snap0.graph.sym();
  const bool axial = snap0.graph.is_axial_grid();
  const int N = snap0.graph.n1();

  FlowTrajectory traj;
  traj.sym = sym;
  traj.eps_ext = opt.eps_ext_factor * snap0.graph.max_rho();
  traj.snapshots.push_back(snap0);

  std::vector<double> rho = snap0.graph.rho();
  double t = snap0.t;
  double last_store_t = t;
  double last_store_maxrho = snap0.graph.max_rho();
  double last_volume = enclosed_volume(snap0.graph);

  StepScratch scratch;
  std::vector<double> out;
  const double h = snap0.graph.h1();

  auto make_graph = [&](const std::vector<double>& r) {
    return axial ? RadialGraph::axial(sym, N, r)
                 : RadialGraph::block(sym, N, snap0.graph.n2(), r);
  };

  double maxrho = last_store_maxrho;
  while (maxrho >= traj.eps_ext) {
    RhsStats st0, st1;
    bool accepted = false;
    double dt = 0.0;
    // First evaluation also yields the stability bound for this state.
    {
      RadialGraph g = make_graph(rho);
      if (axial) {
        axial_fill_ext(rho, scratch.ext);
        st0 = axial_rhs(sym, N, scratch.ext, scratch.f0);
      } else {
        st0 = block_rhs(g, scratch.f0);
      }
      const double guard = 0.25 / (st0.max_abs_H * st0.max_abs_H);
      dt = opt.dt_safety * std::min(h * h * st0.min_W2, guard);
    }
    for (int attempt = 0; attempt <= opt.max_halvings; ++attempt) {
      bool ok;
      if (axial)
        ok = axial_heun(sym, N, rho, dt, scratch, st0, st1, out);
      else
        ok = block_heun(make_graph(rho), dt, scratch, st0, st1, out);
      if (ok && convexity_ok(st1, opt)) {
        accepted = true;
        break;
      }
      dt *= 0.5;
    }
    if (!accepted)
      throw FlowError("evolve_to_extinction: step rejected after repeated halving at t = " +
                          std::to_string(t),
                      t);
    rho.swap(out);
    t += dt;
    maxrho = *std::max_element(rho.begin(), rho.end());

    const bool cadence = (t - last_store_t) >= store_every;
    const bool log_drop = std::log(last_store_maxrho / maxrho) >= opt.store_log;
    const bool final_state = maxrho < traj.eps_ext;
    if (cadence || log_drop || final_state) {
      HypersurfaceSnapshot s{t, make_graph(rho)};
      const double vol = enclosed_volume(s.graph);
      if (vol >= last_volume)
        throw FlowError("evolve_to_extinction: enclosed volume failed to decrease at t = " +
                            std::to_string(t),
                        t);
      last_volume = vol;
      traj.snapshots.push_back(std::move(s));
      last_store_t = t;
      last_store_maxrho = maxrho;
    }
  }

  traj.t_ext = estimate_extinction(traj);
  return traj;
}

double estimate_extinction(const FlowTrajectory& traj) {
  if (!std::isfinite(traj.eps_ext))
    throw std::invalid_argument("estimate_extinction: trajectory has no halt threshold");
  // Terminal snapshots within 10x of the halt threshold.
  std::vector<std::pair<double, double>> pts;  // (t, max rho^2)
  for (const auto& s : traj.snapshots) {
    const double m = s.graph.max_rho();
    if (m < 10.0 * traj.eps_ext) pts.emplace_back(s.t, m * m);
  }
  if (pts.size() < 4)
    throw std::invalid_argument(
        "estimate_extinction: need at least 4 terminal snapshots below 10x the halt threshold");
  // max rho(t) ~ c sqrt(t_ext - t): fit rho^2 = a + b t, t_ext = -a/b.
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(pts.size());
  for (auto [ti, yi] : pts) {
    st += ti;
    sy += yi;
    stt += ti * ti;
    sty += ti * yi;
  }
  const double b = (n * sty - st * sy) / (n * stt - st * st);
  const double a = (sy - b * st) / n;
  if (!(b < 0.0)) throw std::runtime_error("estimate_extinction: terminal fit not shrinking");
  return -a / b;
}

HypersurfaceSnapshot snapshot_at_time(const FlowTrajectory& traj, double t) {
  const auto& snaps = traj.snapshots;
  if (snaps.empty()) throw std::invalid_argument("snapshot_at_time: empty trajectory");
  if (t < snaps.front().t - 1e-12 || t > snaps.back().t + 1e-12) {
    std::ostringstream ss;
    ss << "snapshot_at_time: t = " << t << " outside stored range [" << snaps.front().t << ", "
       << snaps.back().t << "]";
    throw std::out_of_range(ss.str());
  }
  // Locate the interval and use 4-point Lagrange interpolation in t.
  auto it = std::lower_bound(snaps.begin(), snaps.end(), t,
                             [](const HypersurfaceSnapshot& s, double tv) { return s.t < tv; });
  int i1 = static_cast<int>(it - snaps.begin());
  if (i1 > 0 && (i1 == static_cast<int>(snaps.size()) || snaps[i1].t > t)) --i1;
  int i0 = std::clamp(i1 - 1, 0, static_cast<int>(snaps.size()) - 4);
  const int m = static_cast<int>(snaps.size());
  if (m < 4) i0 = 0;
  const int count = std::min(4, m);
  double w[4];
  for (int a = 0; a < count; ++a) {
    w[a] = 1.0;
    for (int b = 0; b < count; ++b) {
      if (a == b) continue;
      w[a] *= (t - snaps[i0 + b].t) / (snaps[i0 + a].t - snaps[i0 + b].t);
    }
  }
  std::vector<double> rho(snaps.front().graph.size(), 0.0);
  for (int a = 0; a < count; ++a) {
    const auto& src = snaps[i0 + a].graph.rho();
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] += w[a] * src[i];
  }
  const RadialGraph& ref = snaps.front().graph;
  HypersurfaceSnapshot out;
  out.t = t;
  out.graph = ref.is_axial_grid()
                  ? RadialGraph::axial(ref.sym(), ref.n1(), std::move(rho))
                  : RadialGraph::block(ref.sym(), ref.n1(), ref.n2(), std::move(rho));
  return out;
}

void FlowTrajectory::check_invariants() const {
  if (snapshots.empty()) throw std::runtime_error("FlowTrajectory: no snapshots");
  double prev_t = -std::numeric_limits<double>::infinity();
  for (const auto& s : snapshots) {
    if (!(s.t > prev_t)) throw std::runtime_error("FlowTrajectory: times not strictly increasing");
    prev_t = s.t;
    s.graph.check_invariants();
  }
  if (std::isfinite(t_ext) && !(t_ext > snapshots.back().t))
    throw std::runtime_error("FlowTrajectory: extinction time not past the last snapshot");
}

FlowTrajectory normalize_flow(const FlowTrajectory& traj, double mu, const NormalizeOptions& opt) {
  if (!(mu > 0.0)) throw std::invalid_argument("normalize_flow: mu must be positive");
  if (!std::isfinite(traj.t_ext))
    throw std::invalid_argument("normalize_flow: trajectory has no extinction estimate");
  const double t_ext = traj.t_ext;
  const double target = normalization_target_density(traj.sym.n, traj.sym.k);

  // The shifted time is t - t_ext; the dilated flow evaluated one rescaled
  // unit (in mu) before extinction samples the original run at
  // t_ext - 1/(lambda mu)^2, viewed at spatial scale lambda mu.
  const double u_lo_rep = 1.0 / (mu * std::sqrt(t_ext - traj.t_first()));
  const double u_hi_rep = 1.0 / (mu * std::sqrt(t_ext - traj.t_last()));
  double lo = std::max(opt.lambda_lo, u_lo_rep);
  double hi = std::min(opt.lambda_hi, u_hi_rep);
  if (!(lo < hi))
    throw BracketError("normalize_flow: no representable dilation range", 0.0, 0.0);

  std::vector<std::pair<double, double>> samples;
  auto density_at = [&](double lambda) {
    const double t = t_ext - 1.0 / ((lambda * mu) * (lambda * mu));
    const HypersurfaceSnapshot s = snapshot_at_time(traj, t);
    const double d = gaussian_density(s.graph, lambda * mu);
    samples.emplace_back(lambda, d);
    return d;
  };

  const double d_lo = density_at(lo);
  const double d_hi = density_at(hi);
  // Density decreases toward extinction, so d(lo) >= d(hi).
  if (!((d_lo >= target && target >= d_hi) || (d_hi >= target && target >= d_lo))) {
    std::ostringstream ss;
    ss << "normalize_flow: density target " << target << " outside achievable range ["
       << std::min(d_lo, d_hi) << ", " << std::max(d_lo, d_hi) << "]";
    throw BracketError(ss.str(), std::min(d_lo, d_hi), std::max(d_lo, d_hi));
  }

  double flo = d_lo - target, lambda = lo;
  double best_d = d_lo;
  for (int it = 0; it < opt.max_iters; ++it) {
    lambda = 0.5 * (lo + hi);
    const double d = density_at(lambda);
    best_d = d;
    if (std::abs(d - target) <= opt.tol_density) break;
    if ((d - target) * flo <= 0.0) {
      hi = lambda;
    } else {
      lo = lambda;
      flo = d - target;
    }
    if ((hi - lo) <= 1e-15 * hi)
      throw std::runtime_error("normalize_flow: bisection stalled before reaching tolerance");
  }
  if (std::abs(best_d - target) > opt.tol_density)
    throw std::runtime_error("normalize_flow: density tolerance not reached");

  // Empirical monotonicity of density in lambda over this run.
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].second > samples[i - 1].second + 1e-9)
      throw std::runtime_error("normalize_flow: density not monotone in lambda on this run");
  }

  FlowTrajectory out;
  out.sym = traj.sym;
  out.eps_ext = traj.eps_ext * lambda;
  out.snapshots.reserve(traj.snapshots.size());
  const double l2 = lambda * lambda;
  for (const auto& s : traj.snapshots)
    out.snapshots.push_back({l2 * (s.t - t_ext), s.graph.scaled(lambda)});
  out.t_ext = 0.0;
  NormalizationRecord rec;
  rec.lambda = lambda;
  rec.tshift = t_ext;
  rec.mu = mu;
  rec.density_at_minus_mu2 = best_d;
  rec.target_density = target;
  out.norm = rec;
  return out;
}

}  // namespace ovallab
