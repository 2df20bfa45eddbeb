#include "equiorb/optimizer.hpp"

#include "equiorb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace equiorb {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double kFlatGradientReduction = 0.9;

bool finite_vector(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

std::string to_string(Method m) {
  return m == Method::SteepestDescent ? "steepest-descent" : "quasi-newton";
}

std::optional<Method> method_from_string(const std::string& s) {
  if (s == "steepest-descent" || s == "sd" || s == "gradient") return Method::SteepestDescent;
  if (s == "quasi-newton" || s == "lbfgs" || s == "bfgs") return Method::QuasiNewton;
  return std::nullopt;
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Running: return "running";
    case Status::Converged: return "converged";
    case Status::CollisionStalled: return "collision-stalled";
    case Status::IterationCap: return "iteration-cap";
    case Status::Diverged: return "diverged";
    case Status::Stalled: return "stalled";
  }
  return "unknown";
}

void MinimizeConfig::validate() const {
  if (max_iters < 0) throw Error("max_iters must be non-negative");
  if (!(grad_tol > 0.0)) throw Error("grad_tol must be positive");
  if (!(line_search.initial_step > 0.0)) throw Error("initial step must be positive");
  if (!(line_search.shrink > 0.0 && line_search.shrink < 1.0))
    throw Error("line-search shrink factor must lie in (0,1)");
  if (!(line_search.armijo > 0.0 && line_search.armijo < 1.0))
    throw Error("Armijo constant must lie in (0,1)");
  if (line_search.max_backtracks < 1) throw Error("max_backtracks must be positive");
  if (memory < 1) throw Error("memory must be positive");
  if (!(collision_floor > 0.0)) throw Error("collision floor must be positive");
  if (!(amplitude > 0.0)) throw Error("amplitude must be positive");
}

// ---------------------------------------------------------------- Minimizer

Minimizer::Minimizer(FourierPath start, QuadratureParams quad, MinimizeConfig cfg)
    : path_(std::move(start)), quad_(quad), cfg_(cfg) {
  cfg_.validate();
  if (quad_.nu < 1) throw Error("nu must be at least 1");
  symmetrize_coeffs(path_.coeffs(), path_.group(), path_.s());
  try {
    Evaluation ev = evaluate_action(path_, quad_);
    report_ = ev.report;
    action_ = ev.action_ext;
    grad_ = std::move(ev.gradient);
    symmetrize_coeffs(grad_, path_.group(), path_.s());
  } catch (const CollisionError& e) {
    report_.min_mutual_distance = 0.0;
    report_.action = std::numeric_limits<double>::infinity();
    report_.grad_norm = std::numeric_limits<double>::quiet_NaN();
    report_.multiplier = path_.group().l();
    finish(Status::CollisionStalled, std::string("initial path collides: ") + e.what());
    return;
  }
  history_.push_back({0, report_.action, report_.grad_norm, report_.min_mutual_distance});
  if (report_.min_mutual_distance < cfg_.collision_floor) {
    finish(Status::CollisionStalled, "initial path is within the collision floor");
    return;
  }
  check_converged();
}

void Minimizer::finish(Status status, std::string message) {
  status_ = status;
  message_ = std::move(message);
}

bool Minimizer::check_converged() {
  if (!std::isfinite(report_.action) || !finite_vector(grad_)) {
    finish(Status::Diverged, "action or gradient is not finite");
    return true;
  }
  if (coeff_norm(path_.coeffs(), path_.system()) > cfg_.divergence_radius) {
    finish(Status::Diverged, "coefficients left the divergence radius");
    return true;
  }
  if (report_.grad_norm < cfg_.grad_tol) {
    finish(Status::Converged, "gradient norm below tolerance");
    return true;
  }
  if (iter_ >= cfg_.max_iters) {
    finish(Status::IterationCap, "iteration cap reached");
    return true;
  }
  return false;
}

// Diagonal Sobolev preconditioner: the inverse of the kinetic Hessian on
// each block (l for the boundary blocks, l k^2 pi^2 / 2 for mode k).
Eigen::VectorXd Minimizer::precondition(const Eigen::VectorXd& v) const {
  const int dim = path_.block_size();
  const int s = path_.s();
  const double l = path_.group().l();
  Eigen::VectorXd out = v / l;
  for (int k = 1; k <= s; ++k) out.segment(k * dim, dim) /= 0.5 * k * k * pi * pi;
  return out;
}

Eigen::VectorXd Minimizer::direction() const {
  const MassSystem& sys = path_.system();
  if (cfg_.method == Method::SteepestDescent || memory_.empty())
    return -precondition(grad_);

  // Two-loop recursion with the preconditioner as initial inverse Hessian.
  Eigen::VectorXd q = grad_;
  std::vector<double> alpha(memory_.size());
  for (std::size_t i = memory_.size(); i-- > 0;) {
    const Pair& p = memory_[i];
    alpha[i] = coeff_inner(p.s, q, sys) / p.sy;
    q -= alpha[i] * p.y;
  }
  const Pair& last = memory_.back();
  const Eigen::VectorXd hy = precondition(last.y);
  const double gamma = last.sy / coeff_inner(last.y, hy, sys);
  Eigen::VectorXd z = gamma * precondition(q);
  for (std::size_t i = 0; i < memory_.size(); ++i) {
    const Pair& p = memory_[i];
    const double beta = coeff_inner(p.y, z, sys) / p.sy;
    z += (alpha[i] - beta) * p.s;
  }
  return -z;
}

int Minimizer::step(int iterations,
                    const std::function<bool(const HistoryEntry&)>& on_iter) {
  const MassSystem& sys = path_.system();
  const int s = path_.s();
  int done = 0;
  while (done < iterations && !finished()) {
    Eigen::VectorXd dir = direction();
    symmetrize_coeffs(dir, path_.group(), s);
    double slope = coeff_inner(grad_, dir, sys);
    if (!(slope < 0.0)) {
      memory_.clear();
      dir = -precondition(grad_);
      symmetrize_coeffs(dir, path_.group(), s);
      slope = coeff_inner(grad_, dir, sys);
    }

    double alpha = cfg_.line_search.initial_step;
    bool accepted = false;
    bool collided = false;
    FourierPath trial = path_;
    Evaluation ev;
    for (int b = 0; b < cfg_.line_search.max_backtracks; ++b, alpha *= cfg_.line_search.shrink) {
      trial.coeffs() = path_.coeffs() + alpha * dir;
      symmetrize_coeffs(trial.coeffs(), trial.group(), s);
      if (trial.coeffs() == path_.coeffs()) break;  // step below resolution
      try {
        ev = evaluate_action(trial, quad_);
      } catch (const CollisionError&) {
        collided = true;
        continue;
      }
      if (ev.report.min_mutual_distance < cfg_.collision_floor) {
        collided = true;
        continue;
      }
      if (!std::isfinite(ev.report.action)) continue;
      const long double bound =
          action_ + static_cast<long double>(cfg_.line_search.armijo * alpha * slope);
      // Below the action's resolution a step still counts when the gradient
      // shrinks markedly; the action itself never increases.
      const bool descent = ev.action_ext <= bound && ev.action_ext < action_;
      const bool flat = ev.action_ext <= action_ &&
                        ev.report.grad_norm < kFlatGradientReduction * report_.grad_norm;
      if (descent || flat) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!memory_.empty() && cfg_.method == Method::QuasiNewton) {
        // Stale curvature pairs; retry from the preconditioned gradient.
        memory_.clear();
        continue;
      }
      if (collided)
        finish(Status::CollisionStalled, "line search blocked by collisions");
      else
        finish(Status::Stalled, "line search found no decrease");
      break;
    }

    Eigen::VectorXd g_new = std::move(ev.gradient);
    symmetrize_coeffs(g_new, path_.group(), s);
    Pair p{trial.coeffs() - path_.coeffs(), g_new - grad_, 0.0};
    p.sy = coeff_inner(p.s, p.y, sys);
    if (p.sy > 1e-14 * coeff_norm(p.s, sys) * coeff_norm(p.y, sys) && p.sy > 0.0) {
      memory_.push_back(std::move(p));
      if (static_cast<int>(memory_.size()) > cfg_.memory) memory_.pop_front();
    }

    path_ = std::move(trial);
    grad_ = std::move(g_new);
    action_ = ev.action_ext;
    report_ = ev.report;
    ++iter_;
    ++done;
    const HistoryEntry entry{iter_, report_.action, report_.grad_norm,
                             report_.min_mutual_distance};
    history_.push_back(entry);
    check_converged();
    if (on_iter && !on_iter(entry)) break;
  }
  return done;
}

void Minimizer::run() {
  while (!finished()) step(std::numeric_limits<int>::max());
}

MinimizeOutcome Minimizer::outcome() const {
  MinimizeOutcome out{status_, path_, quad_, report_, history_,
                      std::numeric_limits<double>::quiet_NaN(), message_};
  if (status_ == Status::Converged) {
    try {
      out.newton_residual_max = verify(path_, quad_).residual_max;
    } catch (const CollisionError&) {
      out.newton_residual_max = std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

MinimizeOutcome minimize(const FourierPath& path, const QuadratureParams& quad,
                         const MinimizeConfig& cfg) {
  Minimizer m(path, quad, cfg);
  m.run();
  return m.outcome();
}

// ------------------------------------------------------------- random init

FourierPath random_init(std::shared_ptr<const SymmetryGroup> group, int s,
                        std::uint64_t seed, double amplitude,
                        std::optional<QuadratureParams> quad, double collision_floor) {
  if (s < 0) throw ShapeError("s must be non-negative");
  if (!(amplitude >= 0.0)) throw Error("amplitude must be non-negative");
  const QuadratureParams q = quad.value_or(QuadratureParams{default_nu(s)});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  FourierPath path(std::move(group), s);
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Eigen::Index i = 0; i < path.coeffs().size(); ++i) path.coeffs()[i] = dist(rng);
    symmetrize_coeffs(path.coeffs(), path.group(), s);
    try {
      if (discrete_potential(path, q).min_distance >= 10.0 * collision_floor) return path;
    } catch (const CollisionError&) {
    }
  }
  throw InitFailure("no collision-free initial path after 100 draws");
}

// ------------------------------------------------------------------ verify

VerificationReport verify(const FourierPath& path, const QuadratureParams& quad,
                          const VerifyTolerances& tol) {
  const SymmetryGroup& group = path.group();
  const MassSystem& sys = path.system();
  const int l = group.l();
  const int points = 4 * quad.nu;
  const SpectralAcceleration accel(path, quad.nu);

  VerificationReport rep;
  rep.grid_points = points;
  rep.min_distance = std::numeric_limits<double>::infinity();
  double dist_sum = 0.0;
  double sym = coefficient_symmetry_violation(path);

  for (int i = 0; i < points; ++i) {
    const double time = static_cast<double>(i) * l / points;
    const FundamentalLocation loc = locate(group, time);
    const GroupElement& g = group.elements()[loc.element];
    const Configuration local = sample(path, loc.local_t);
    const Configuration q = act_on_config(g, local);
    const TangentVector acc = act_on_config(g, accel(loc.local_t));

    const double md = min_mutual_distance(q);
    rep.min_distance = std::min(rep.min_distance, md);
    dist_sum += mean_mutual_distance(q);
    if (md <= sys.collision_floor()) {
      std::ostringstream os;
      os << "collision at verification time " << time;
      throw CollisionError(os.str(), i);
    }
    rep.residual_max = std::max(rep.residual_max, newton_residual(q, acc, sys));
    rep.residual_scale =
        std::max(rep.residual_scale, mass_norm(grad_potential_mass(q, sys), sys));

    // Every element with the same time action must give the same point.
    for (const GroupElement& other : group.elements()) {
      if (&other == &g || other.time != g.time) continue;
      sym = std::max(sym, (act_on_config(other, local) - q).cwiseAbs().maxCoeff());
    }
  }
  rep.mean_distance = dist_sum / points;

  const FullPeriodTrajectory traj =
      extend_to_full_period(path, quad, std::numeric_limits<double>::infinity());
  rep.junction_mismatch = traj.max_junction_mismatch;
  rep.symmetry_violation = std::max(sym, rep.junction_mismatch);

  rep.residual_ok = rep.residual_max < tol.residual_relative * rep.residual_scale;
  rep.symmetry_ok = rep.symmetry_violation < tol.symmetry;
  rep.distance_ok = rep.min_distance > tol.distance_factor * sys.collision_floor();
  rep.pass = rep.residual_ok && rep.symmetry_ok && rep.distance_ok;
  return rep;
}

// ------------------------------------------------------------ continuation

Continuation continue_with(const FourierPath& path, const QuadratureParams& quad,
                           const ContinueChanges& changes) {
  const int s_old = path.s();
  const int s_new = changes.s.value_or(s_old);
  if (s_new < 0) throw ShapeError("s must be non-negative");
  if (s_new < path.highest_occupied_mode() && !changes.truncate) {
    std::ostringstream os;
    os << "reducing s to " << s_new << " would drop occupied mode "
       << path.highest_occupied_mode() << "; pass truncate to allow it";
    throw ShapeError(os.str());
  }
  const int nu = changes.nu.value_or(quad.nu);
  if (nu < 1) throw Error("nu must be at least 1");
  if (changes.perturb_amplitude < 0.0) throw Error("perturbation amplitude must be non-negative");

  FourierPath out(path.group_ptr(), s_new);
  out.block(0) = path.block(0);
  out.block(s_new + 1) = path.block(s_old + 1);
  for (int k = 1; k <= std::min(s_old, s_new); ++k) out.block(k) = path.block(k);

  if (changes.perturb_amplitude > 0.0) {
    std::mt19937_64 rng(changes.seed);
    std::uniform_real_distribution<double> dist(-changes.perturb_amplitude,
                                                changes.perturb_amplitude);
    Eigen::VectorXd noise(out.coeffs().size());
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = dist(rng);
    symmetrize_coeffs(noise, out.group(), s_new);
    out.coeffs() += noise;
  }
  return {std::move(out), QuadratureParams{nu}};
}

Continuation continue_with(const MinimizeOutcome& outcome, const ContinueChanges& changes) {
  return continue_with(outcome.path, outcome.quad, changes);
}

}  // namespace equiorb
