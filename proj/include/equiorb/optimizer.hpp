#pragma once

#include "equiorb/pathspace.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace equiorb {

enum class Method { SteepestDescent, QuasiNewton };

std::string to_string(Method m);
std::optional<Method> method_from_string(const std::string& s);

enum class Status {
  Running,          ///< not finished yet (resumable sessions only)
  Converged,        ///< grad_norm < grad_tol on a collision-free path
  CollisionStalled, ///< every trial step ran into the collision floor
  IterationCap,
  Diverged,         ///< action or coefficients left the finite range
  Stalled,          ///< line search found no decrease at rounding level
};

std::string to_string(Status s);

/// Backtracking Armijo line search.
struct LineSearchParams {
  double initial_step = 1.0;
  double shrink = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 60;
};

struct MinimizeConfig {
  int max_iters = 5000;
  double grad_tol = 1e-8;
  LineSearchParams line_search;
  Method method = Method::QuasiNewton;
  int memory = 10;
  double collision_floor = kDefaultCollisionFloor;
  std::uint64_t seed = 0;
  double amplitude = 1.0;
  /// Coefficient norm beyond which a run counts as diverged.
  double divergence_radius = 1e6;

  /// Throws Error unless tolerances are positive and shrink is in (0,1).
  void validate() const;
};

struct HistoryEntry {
  int iter = 0;
  double action = 0.0;
  double grad_norm = 0.0;
  double min_distance = 0.0;
};

struct MinimizeOutcome {
  Status status = Status::Running;
  FourierPath path;
  QuadratureParams quad;
  ActionReport report;
  std::vector<HistoryEntry> history;
  /// Max Newton residual over the verification grid; NaN unless converged.
  double newton_residual_max = 0.0;
  std::string message;
};

/// Resumable descent on the symmetric coefficient space. Each iteration
/// moves along a (preconditioned, limited-memory secant) direction, projects
/// back onto the symmetric subspace and backtracks until the Armijo condition
/// holds; collisions during a trial count as infinite action.
///
/// Running step(a) then step(b) is bit-identical to step(a + b).
class Minimizer {
 public:
  Minimizer(FourierPath start, QuadratureParams quad, MinimizeConfig cfg);

  /// Perform up to `iterations` iterations. The callback sees every accepted
  /// iteration and may return false to stop early. Returns the number done.
  int step(int iterations,
           const std::function<bool(const HistoryEntry&)>& on_iter = {});

  /// step() until finished.
  void run();

  bool finished() const { return status_ != Status::Running; }
  Status status() const { return status_; }
  const std::string& message() const { return message_; }
  const FourierPath& path() const { return path_; }
  const QuadratureParams& quad() const { return quad_; }
  const MinimizeConfig& config() const { return cfg_; }
  const ActionReport& report() const { return report_; }
  const std::vector<HistoryEntry>& history() const { return history_; }
  int iterations() const { return iter_; }

  /// Snapshot; runs verify() when converged to fill newton_residual_max.
  MinimizeOutcome outcome() const;

 private:
  struct Pair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double sy;
  };

  Eigen::VectorXd direction() const;
  Eigen::VectorXd precondition(const Eigen::VectorXd& v) const;
  bool check_converged();
  void finish(Status status, std::string message);

  FourierPath path_;
  QuadratureParams quad_;
  MinimizeConfig cfg_;
  Status status_ = Status::Running;
  std::string message_;
  ActionReport report_;
  long double action_ = 0.0L;
  Eigen::VectorXd grad_;  ///< projected mass-metric gradient
  std::deque<Pair> memory_;
  std::vector<HistoryEntry> history_;
  int iter_ = 0;
};

MinimizeOutcome minimize(const FourierPath& path, const QuadratureParams& quad,
                         const MinimizeConfig& cfg);

/// Symmetrized path with uniform random coefficients in [-amplitude,
/// amplitude]. Redraws up to 100 times while the sampled path comes closer
/// than 10 collision floors; then throws InitFailure (always the case for
/// amplitude 0, whose path is a total collision).
FourierPath random_init(std::shared_ptr<const SymmetryGroup> group, int s,
                        std::uint64_t seed, double amplitude,
                        std::optional<QuadratureParams> quad = std::nullopt,
                        double collision_floor = kDefaultCollisionFloor);

struct VerifyTolerances {
  double residual_relative = 1e-2;  ///< times max |grad_M U| on the grid
  double symmetry = 1e-8;
  double distance_factor = 10.0;    ///< times the collision floor
};

struct VerificationReport {
  int grid_points = 0;
  double residual_max = 0.0;
  double residual_scale = 0.0;  ///< max |grad_M U|_M over the grid
  double symmetry_violation = 0.0;
  double junction_mismatch = 0.0;
  double min_distance = 0.0;
  double mean_distance = 0.0;   ///< mean mutual distance over the grid
  bool residual_ok = false;
  bool symmetry_ok = false;
  bool distance_ok = false;
  bool pass = false;
};

/// Newton residual, symmetry and distance diagnostics on a grid of 4 nu
/// points covering the full period. Throws CollisionError on collision.
VerificationReport verify(const FourierPath& path, const QuadratureParams& quad,
                          const VerifyTolerances& tol = {});

struct ContinueChanges {
  std::optional<int> s;
  std::optional<int> nu;
  double perturb_amplitude = 0.0;
  std::uint64_t seed = 0;
  bool truncate = false;
};

struct Continuation {
  FourierPath path;
  QuadratureParams quad;
};

/// Zero-pad (or, with truncate, cut) the modes, change nu and add
/// symmetrized uniform noise.
Continuation continue_with(const FourierPath& path, const QuadratureParams& quad,
                           const ContinueChanges& changes);
Continuation continue_with(const MinimizeOutcome& outcome,
                           const ContinueChanges& changes);

}  // namespace equiorb
