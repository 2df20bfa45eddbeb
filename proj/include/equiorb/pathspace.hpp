#pragma once

#include "equiorb/nbody.hpp"
#include "equiorb/symmetry.hpp"

#include <Eigen/Dense>

#include <memory>
#include <vector>

namespace equiorb {

/// Number of trapezoid subintervals on the fundamental domain [0,1].
struct QuadratureParams {
  int nu = 64;
};

/// nu = max(64, 8 s): out-resolves the highest sine mode.
inline int default_nu(int s) { return s * 8 > 64 ? s * 8 : 64; }

/// Trapezoid nodes t_j = j/nu, composite weights and sin(k pi t_j) for one
/// (s, nu) pair. Shared and immutable; obtain through get().
class TrigTable {
 public:
  static std::shared_ptr<const TrigTable> get(int s, int nu);

  int s() const { return s_; }
  int nu() const { return nu_; }
  const std::vector<double>& nodes() const { return t_; }
  const std::vector<double>& weights() const { return w_; }
  /// sin(k pi t_j) for j = 0..nu (rows) and k = 1..s (columns k-1).
  const Eigen::MatrixXd& sines() const { return sin_; }

  TrigTable(int s, int nu);

 private:
  int s_;
  int nu_;
  std::vector<double> t_;
  std::vector<double> w_;
  Eigen::MatrixXd sin_;
};

/// Path on the fundamental domain [0,1] given by the embedding
///
///   q(t) = a_0 + t (a_{s+1} - a_0) + sum_{k=1}^s a_k sin(k pi t).
///
/// The s+2 coefficient blocks are stored contiguously, block-major, each
/// block a column-major d x n configuration (body-major, coordinate-minor).
class FourierPath {
 public:
  FourierPath(std::shared_ptr<const SymmetryGroup> group, int s);
  FourierPath(std::shared_ptr<const SymmetryGroup> group, int s,
              Eigen::VectorXd coeffs);

  const SymmetryGroup& group() const { return *group_; }
  const std::shared_ptr<const SymmetryGroup>& group_ptr() const { return group_; }
  const MassSystem& system() const { return group_->system(); }

  int s() const { return s_; }
  int block_count() const { return s_ + 2; }
  int block_size() const { return system().dim(); }

  Eigen::Map<const Eigen::MatrixXd> block(int k) const;
  Eigen::Map<Eigen::MatrixXd> block(int k);

  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  Eigen::VectorXd& coeffs() { return coeffs_; }

  /// Highest k in 1..s with a nonzero block a_k, 0 if none.
  int highest_occupied_mode() const;

 private:
  std::shared_ptr<const SymmetryGroup> group_;
  int s_;
  Eigen::VectorXd coeffs_;
};

Configuration sample(const FourierPath& path, double t);
TangentVector velocity(const FourierPath& path, double t);
/// Term-wise second derivative -sum k^2 pi^2 a_k sin(k pi t).
TangentVector acceleration(const FourierPath& path, double t);

/// int_0^1 |q'|_M^2 dt = |a_{s+1} - a_0|_M^2 + sum_k (k^2 pi^2 / 2) |a_k|_M^2
double kinetic_quadratic(const FourierPath& path);

struct PotentialValue {
  double value = 0.0;
  double min_distance = 0.0;
};

/// Composite trapezoid approximation of int_0^1 U(q(t)) dt. Throws
/// CollisionError naming the first colliding sample.
PotentialValue discrete_potential(const FourierPath& path,
                                  const QuadratureParams& quad);

struct ActionReport {
  double action = 0.0;     ///< l (kinetic/2 + potential)
  double kinetic = 0.0;    ///< kinetic_quadratic
  double potential = 0.0;  ///< discrete_potential
  double grad_norm = 0.0;  ///< mass-metric norm of the symmetrized gradient
  double min_mutual_distance = 0.0;
  int multiplier = 1;      ///< |G/K| = l
};

enum class KernelMode { Parallel, Serial };

/// Action value, report and (optionally) the mass-metric coefficient
/// gradient. `action_ext` carries the extended-precision sum used for
/// descent comparisons.
struct Evaluation {
  ActionReport report;
  long double action_ext = 0.0L;
  Eigen::VectorXd gradient;
};

Evaluation evaluate_action(const FourierPath& path, const QuadratureParams& quad,
                           bool with_gradient = true,
                           KernelMode mode = KernelMode::Parallel);

ActionReport discrete_action(const FourierPath& path, const QuadratureParams& quad);

/// Gradient of discrete_action with respect to every coefficient block,
/// represented in the mass metric: dA[delta] = sum_k <g_k, delta_k>_M.
Eigen::VectorXd action_gradient(const FourierPath& path,
                                const QuadratureParams& quad);

/// sum over blocks of mass_inner; the metric of the coefficient space.
double coeff_inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                   const MassSystem& sys);
double coeff_norm(const Eigen::VectorXd& a, const MassSystem& sys);

/// Project a flat coefficient vector onto the symmetric subspace: the kernel
/// projector on every block, then 1/2 (Id + h) on the boundary pair.
void symmetrize_coeffs(Eigen::VectorXd& coeffs, const SymmetryGroup& group, int s);
FourierPath symmetrize(const FourierPath& path);

/// Largest deviation of the coefficients from the symmetric subspace.
double coefficient_symmetry_violation(const FourierPath& path);

/// Samples over one full period [0, l] of the normalized circle.
struct FullPeriodTrajectory {
  int l = 1;
  int nu = 0;
  std::vector<double> times;
  std::vector<Configuration> samples;
  double max_junction_mismatch = 0.0;
};

/// Rebuild the full period from the fundamental domain through
/// q(tau(g) t) = (sigma(g), rho(g)) q(t). Produces nu*l + 1 samples; throws
/// SymmetryViolation when adjacent segments (or the periodic closure)
/// disagree by more than `tol`.
FullPeriodTrajectory extend_to_full_period(const FourierPath& path,
                                           const QuadratureParams& quad,
                                           double tol = 1e-10);

/// Where a full-period time lands in the fundamental domain.
struct FundamentalLocation {
  std::size_t element = 0;  ///< index into group().elements()
  double local_t = 0.0;
  bool reflected = false;
};

FundamentalLocation locate(const SymmetryGroup& group, double time);

Configuration sample_full_period(const FourierPath& path, double time);

/// Acceleration estimate of the limit orbit from the sine coefficients.
///
/// The term-wise series converges to zero at t = 0, 1 even when the
/// acceleration does not vanish there. The coefficients of q'' carry the
/// endpoint values of f, f'' (and f'''' for nu = 0, s >= 12) in their 1/k,
/// 1/k^3 and 1/k^5 tails; those vectors are fitted from the highest modes,
/// represented by polynomials, and the remainder is summed as a sine series.
/// When nu > 0 the tail model uses the trapezoid sums of that grid, which is
/// what a discrete critical point satisfies.
class SpectralAcceleration {
 public:
  explicit SpectralAcceleration(const FourierPath& path, int nu = 0);
  TangentVector operator()(double t) const;

 private:
  int s_;
  int d_;
  int n_;
  Eigen::MatrixXd endpoint_;  ///< endpoint terms, one flattened config per row
  Eigen::MatrixXd residual_;  ///< s x dim sine coefficients after the fit
};

}  // namespace equiorb
