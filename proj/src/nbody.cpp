#include "equiorb/nbody.hpp"
#include "pair_energy.hpp"

#include "equiorb/errors.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace equiorb {

MassSystem::MassSystem(int n, int d, std::vector<double> masses, double alpha,
                       double collision_floor)
    : n_(n), d_(d), alpha_(alpha), collision_floor_(collision_floor),
      raw_masses_(std::move(masses)) {
  if (n_ < 2) throw ShapeError("mass system needs at least 2 bodies");
  if (d_ < 1) throw ShapeError("space dimension must be at least 1");
  if (static_cast<int>(raw_masses_.size()) != n_) {
    std::ostringstream os;
    os << "expected " << n_ << " masses, got " << raw_masses_.size();
    throw ShapeError(os.str());
  }
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_))
    throw Error("homogeneity exponent alpha must be positive");
  if (!(collision_floor_ >= 0.0))
    throw Error("collision floor must be non-negative");
  for (double m : raw_masses_) {
    if (!(m > 0.0) || !std::isfinite(m))
      throw Error("masses must be positive and finite");
  }
  const double total =
      std::accumulate(raw_masses_.begin(), raw_masses_.end(), 0.0);
  masses_.reserve(raw_masses_.size());
  for (double m : raw_masses_) masses_.push_back(m / total);
}

MassSystem MassSystem::equal_masses(int n, int d, double alpha) {
  return MassSystem(n, d, std::vector<double>(static_cast<std::size_t>(n), 1.0),
                    alpha);
}

void MassSystem::check_shape(const Eigen::Ref<const Eigen::MatrixXd>& v) const {
  if (v.rows() != d_ || v.cols() != n_) {
    std::ostringstream os;
    os << "shape mismatch: expected " << d_ << "x" << n_ << ", got "
       << v.rows() << "x" << v.cols();
    throw ShapeError(os.str());
  }
}

double mass_inner(const Eigen::Ref<const Eigen::MatrixXd>& v,
                  const Eigen::Ref<const Eigen::MatrixXd>& w,
                  const MassSystem& sys) {
  sys.check_shape(v);
  sys.check_shape(w);
  double acc = 0.0;
  for (int j = 0; j < sys.n(); ++j) acc += sys.mass(j) * v.col(j).dot(w.col(j));
  return acc;
}

double mass_norm(const Eigen::Ref<const Eigen::MatrixXd>& v,
                 const MassSystem& sys) {
  return std::sqrt(mass_inner(v, v, sys));
}

double min_mutual_distance(const Eigen::Ref<const Eigen::MatrixXd>& q) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < q.cols(); ++i)
    for (Eigen::Index j = i + 1; j < q.cols(); ++j)
      best = std::min(best, (q.col(i) - q.col(j)).norm());
  return best;
}

double mean_mutual_distance(const Eigen::Ref<const Eigen::MatrixXd>& q) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index i = 0; i < q.cols(); ++i)
    for (Eigen::Index j = i + 1; j < q.cols(); ++j, ++pairs)
      sum += (q.col(i) - q.col(j)).norm();
  return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

namespace {

[[noreturn]] void throw_collision(int i, int j, double r) {
  std::ostringstream os;
  os << "bodies " << i + 1 << " and " << j + 1 << " collide (distance " << r
     << ")";
  throw CollisionError(os.str());
}

}  // namespace

double potential(const Eigen::Ref<const Eigen::MatrixXd>& q,
                 const MassSystem& sys) {
  sys.check_shape(q);
  long double u = 0.0L;
  for (int i = 0; i < sys.n(); ++i) {
    for (int j = i + 1; j < sys.n(); ++j) {
      long double r2 = 0.0L;
      for (int c = 0; c < sys.d(); ++c) {
        const long double diff = static_cast<long double>(q(c, i)) - q(c, j);
        r2 += diff * diff;
      }
      const long double r = std::sqrt(r2);
      if (!(r > sys.collision_floor())) throw_collision(i, j, static_cast<double>(r));
      u += detail::pair_energy(sys.mass(i) * sys.mass(j), r, sys.alpha());
    }
  }
  return static_cast<double>(u);
}

TangentVector grad_potential_mass(const Eigen::Ref<const Eigen::MatrixXd>& q,
                                  const MassSystem& sys) {
  sys.check_shape(q);
  const double alpha = sys.alpha();
  TangentVector g = TangentVector::Zero(sys.d(), sys.n());
  for (int i = 0; i < sys.n(); ++i) {
    for (int j = i + 1; j < sys.n(); ++j) {
      const Eigen::VectorXd diff = q.col(i) - q.col(j);
      const double r = diff.norm();
      if (!(r > sys.collision_floor())) throw_collision(i, j, r);
      // dU/dq_i = -alpha m_i m_j (q_i - q_j) / r^(alpha+2); divide by m_i.
      const double f = alpha / std::pow(r, alpha + 2.0);
      g.col(i) -= (f * sys.mass(j)) * diff;
      g.col(j) += (f * sys.mass(i)) * diff;
    }
  }
  return g;
}

double newton_residual(const Eigen::Ref<const Eigen::MatrixXd>& pos,
                       const Eigen::Ref<const Eigen::MatrixXd>& acc,
                       const MassSystem& sys) {
  sys.check_shape(acc);
  const TangentVector diff = acc - grad_potential_mass(pos, sys);
  return mass_norm(diff, sys);
}

}  // namespace equiorb
