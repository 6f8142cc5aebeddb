#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ovallab/geometry.hpp"
#include "ovallab/radial_graph.hpp"

namespace ovallab {

/// Raised when a flow step cannot be completed (positivity or convexity loss
/// that repeated step halving does not cure).
class FlowError : public std::runtime_error {
 public:
  FlowError(const std::string& what, double t) : std::runtime_error(what), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

/// Raised when the dilation-factor bisection cannot bracket the density
/// target (target outside the achievable range).
class BracketError : public std::runtime_error {
 public:
  BracketError(const std::string& what, double lo, double hi)
      : std::runtime_error(what), achieved_lo_(lo), achieved_hi_(hi) {}
  double achieved_lo() const { return achieved_lo_; }
  double achieved_hi() const { return achieved_hi_; }

 private:
  double achieved_lo_, achieved_hi_;
};

/// Scale fixing for a flow: extinct at time 0, and one unit of rescaled time
/// before extinction the Gaussian density equals the midpoint of the
/// neighbouring shrinker values.
struct NormalizationRecord {
  double lambda = 1.0;                // dilation factor, > 0
  double tshift = 0.0;                // time shift applied before dilation
  double mu = 1.0;                    // rescaled evaluation time is -1/mu^2
  double density_at_minus_mu2 = 0.0;  // achieved Gaussian density
  double target_density = 0.0;
};

/// Time-ordered snapshots of one mean curvature flow run.
struct FlowTrajectory {
  SymmetrySpec sym;
  std::vector<HypersurfaceSnapshot> snapshots;
  double t_ext = std::numeric_limits<double>::quiet_NaN();
  std::optional<NormalizationRecord> norm;
  double eps_ext = std::numeric_limits<double>::quiet_NaN();  // halt threshold used

  double t_first() const { return snapshots.front().t; }
  double t_last() const { return snapshots.back().t; }

  void check_invariants() const;
};

struct FlowOptions {
  double dt_safety = 0.2;        // dt = 0.2 h^2 min(rho^2 + rho'^2)
  double eps_ext_factor = 1e-3;  // halt when max rho < factor * initial max rho
  double store_log = 0.02;       // also store when ln(max rho) drops this much
  int max_halvings = 40;
  double convex_slack = 1e-6;  // tolerance factor on principal curvatures
};

struct StepResult {
  bool ok = false;
  std::string reason;
  HypersurfaceSnapshot snap;
};

/// Stability-limited step size for the current state.
double dt_max(const HypersurfaceSnapshot& snap, const FlowOptions& opt = {});

/// One explicit two-stage Runge-Kutta step of mean curvature flow in radial
/// graph coordinates; d rho / dt = -H sqrt(rho^2 + |grad rho|^2) / rho.
/// Rejected (ok = false) if positivity or convexity fails afterwards.
StepResult step(const HypersurfaceSnapshot& snap, double dt, const FlowOptions& opt = {});

/// Run the flow until max rho < eps_ext, storing snapshots at the requested
/// time cadence (densified geometrically near extinction), then extrapolate
/// the extinction time.
FlowTrajectory evolve_to_extinction(const HypersurfaceSnapshot& snap0, double store_every,
                                    const FlowOptions& opt = {});

/// Extinction time from the terminal snapshots: least-squares fit of
/// max rho(t)^2, linear in t for a shrinking nearly round surface.
double estimate_extinction(const FlowTrajectory& traj);

/// Cubic interpolation of the stored trajectory at time t.
HypersurfaceSnapshot snapshot_at_time(const FlowTrajectory& traj, double t);

struct NormalizeOptions {
  double tol_density = 1e-6;
  double lambda_lo = 1e-3;
  double lambda_hi = 1e3;
  int max_iters = 200;
};

/// Apply the flow normalization: shift so extinction is at time 0, then pick
/// the dilation lambda by bisection so that the Gaussian density at rescaled
/// time -1/mu^2 (measured at spatial scale mu) hits the midpoint target.
/// Density is monotone in lambda along the run; this is asserted empirically
/// and a violation reported as an error.
FlowTrajectory normalize_flow(const FlowTrajectory& traj, double mu,
                              const NormalizeOptions& opt = {});

}  // namespace ovallab
