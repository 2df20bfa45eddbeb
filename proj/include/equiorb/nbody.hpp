#pragma once

#include <Eigen/Dense>

#include <vector>

namespace equiorb {

/// A configuration in E^n stored as a d x n matrix; column j is body j.
using Configuration = Eigen::MatrixXd;
/// Velocities, accelerations and gradients share the configuration layout.
using TangentVector = Eigen::MatrixXd;

inline constexpr double kDefaultCollisionFloor = 1e-9;

/// Physical problem definition: n bodies in R^d interacting through the
/// homogeneous potential sum_{i<j} m_i m_j / |q_i - q_j|^alpha.
///
/// Masses are normalized to unit total on construction; the values given
/// by the caller are kept in raw_masses() for display and serialization.
class MassSystem {
 public:
  MassSystem(int n, int d, std::vector<double> masses, double alpha = 1.0,
             double collision_floor = kDefaultCollisionFloor);

  /// Equal masses 1/n.
  static MassSystem equal_masses(int n, int d, double alpha = 1.0);

  int n() const { return n_; }
  int d() const { return d_; }
  double alpha() const { return alpha_; }
  double collision_floor() const { return collision_floor_; }
  const std::vector<double>& masses() const { return masses_; }
  const std::vector<double>& raw_masses() const { return raw_masses_; }
  double mass(int j) const { return masses_[static_cast<std::size_t>(j)]; }

  /// Number of real coordinates n*d.
  int dim() const { return n_ * d_; }

  /// Throws ShapeError unless v is d x n.
  void check_shape(const Eigen::Ref<const Eigen::MatrixXd>& v) const;

  bool operator==(const MassSystem&) const = default;

 private:
  int n_;
  int d_;
  double alpha_;
  double collision_floor_;
  std::vector<double> masses_;
  std::vector<double> raw_masses_;
};

/// Mass-metric inner product sum_j m_j v_j . w_j.
double mass_inner(const Eigen::Ref<const Eigen::MatrixXd>& v,
                  const Eigen::Ref<const Eigen::MatrixXd>& w,
                  const MassSystem& sys);

double mass_norm(const Eigen::Ref<const Eigen::MatrixXd>& v,
                 const MassSystem& sys);

/// Smallest mutual distance min_{i<j} |q_i - q_j|.
double min_mutual_distance(const Eigen::Ref<const Eigen::MatrixXd>& q);

/// Mean of the n(n-1)/2 mutual distances.
double mean_mutual_distance(const Eigen::Ref<const Eigen::MatrixXd>& q);

/// U(q) = sum_{i<j} m_i m_j / |q_i - q_j|^alpha. Throws CollisionError when a
/// mutual distance is below the system's collision floor.
double potential(const Eigen::Ref<const Eigen::MatrixXd>& q,
                 const MassSystem& sys);

/// Gradient of U with respect to the mass metric, (1/m_j) dU/dq_j.
TangentVector grad_potential_mass(const Eigen::Ref<const Eigen::MatrixXd>& q,
                                  const MassSystem& sys);

/// ||acc - grad_M U(pos)||_M; zero along solutions of q'' = grad_M U(q).
double newton_residual(const Eigen::Ref<const Eigen::MatrixXd>& pos,
                       const Eigen::Ref<const Eigen::MatrixXd>& acc,
                       const MassSystem& sys);

}  // namespace equiorb
