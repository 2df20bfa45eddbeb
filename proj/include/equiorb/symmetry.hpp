#pragma once

#include "equiorb/nbody.hpp"

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace equiorb {

/// Isometry of the time circle R/TZ, t -> sign * t + shift * T, with the
/// shift kept as an exact reduced fraction of the period in [0, 1).
///
/// A rotation shifts by shift*T; a reflection t -> shift*T - t fixes the
/// points shift*T/2 and shift*T/2 + T/2.
class TimeAction {
 public:
  TimeAction() = default;

  static TimeAction identity() { return {}; }
  /// Shift by (num/den) of the period.
  static TimeAction rotation(std::int64_t num, std::int64_t den);
  /// Reflection t -> (num/den) T - t.
  static TimeAction reflection(std::int64_t num, std::int64_t den);

  bool is_reflection() const { return reflect_; }
  bool is_identity() const { return !reflect_ && num_ == 0; }
  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  /// Composition: (a * b)(t) = a(b(t)).
  TimeAction operator*(const TimeAction& other) const;
  TimeAction inverse() const;

  /// Image of t (in units of the period) under the map, reduced to [0,1).
  double apply_fraction(double t) const;

  /// Integer k with shift = k * T / l, i.e. k = shift * l, when integral.
  std::optional<int> index(int l) const;

  auto operator<=>(const TimeAction&) const = default;

  std::string describe() const;

 private:
  TimeAction(bool reflect, std::int64_t num, std::int64_t den);

  bool reflect_ = false;
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Element (tau, sigma, rho) of Iso(T) x S_n x O(d).
///
/// perm[j] is the image sigma(j) of body j (0-based). The element acts on a
/// configuration by (g.q)_{sigma(j)} = rho q_j, i.e. (g.q)_j = rho q_{sigma^-1(j)}.
struct GroupElement {
  TimeAction time;
  std::vector<int> perm;
  Eigen::MatrixXd mat;

  static GroupElement identity(int n, int d);

  /// Product with the convention act(g*h, q) = act(g, act(h, q)).
  GroupElement operator*(const GroupElement& other) const;
  GroupElement inverse() const;

  /// Same time action and permutation, matrices equal within tol.
  bool approx_equal(const GroupElement& other, double tol) const;
};

/// Throws InvalidGenerator unless g is a valid element over sys: perm a
/// bijection preserving masses and mat orthogonal within 1e-10. `label`
/// names the element in the message.
void validate_element(const GroupElement& g, const MassSystem& sys,
                      const std::string& label = "generator");

/// (sigma(g), rho(g)) . q
Configuration act_on_config(const GroupElement& g,
                            const Eigen::Ref<const Eigen::MatrixXd>& q);

/// Matrix of act_on_config(g, .) on column-major flattened configurations
/// (index j*d + i for coordinate i of body j).
Eigen::MatrixXd action_matrix(const GroupElement& g);

enum class ActionType { Cyclic, Brake, Dihedral };

std::string to_string(ActionType type);
std::optional<ActionType> action_type_from_string(const std::string& s);

/// Result of classifying how a group acts on the time circle.
struct Classification {
  ActionType type = ActionType::Cyclic;
  int l = 1;                 ///< order of Im(tau)
  bool kernel_only = false;  ///< Im(tau) trivial; treated as cyclic with r = id
  std::size_t r = 0;         ///< cyclic generator, tau(r)(0) = T/l
  std::size_t h0 = 0;        ///< reflection fixing 0
  std::size_t h1 = 0;        ///< reflection fixing T/l (== h0 for brake)
};

/// The involution h on E^n (+) E^n acting on the boundary pair (a0, a_{s+1}).
struct BoundaryInvolution {
  Eigen::MatrixXd h;
  /// 1/2 (Id + h) composed with the kernel projector on both halves.
  Eigen::MatrixXd projector;
};

/// Finite group G of Iso(T) x S_n^m x O(d), stored as an explicit element
/// list closed under composition. Immutable after construction.
class SymmetryGroup {
 public:
  SymmetryGroup(MassSystem system, std::vector<GroupElement> elements);

  const MassSystem& system() const { return system_; }
  const std::vector<GroupElement>& elements() const { return elements_; }
  std::size_t order() const { return elements_.size(); }
  const std::vector<std::size_t>& kernel() const { return kernel_; }
  const Classification& classification() const { return cls_; }
  ActionType type() const { return cls_.type; }
  int l() const { return cls_.l; }
  bool kernel_only() const { return cls_.kernel_only; }
  const GroupElement& r() const { return elements_[cls_.r]; }
  const GroupElement& h0() const { return elements_[cls_.h0]; }
  const GroupElement& h1() const { return elements_[cls_.h1]; }

  /// Mass-orthogonal projector onto (E^n)^K, K = ker tau.
  const Eigen::MatrixXd& kernel_projector() const { return kernel_projector_; }
  const BoundaryInvolution& boundary() const { return boundary_; }

  /// Index of an element equal to g (matrix tolerance 1e-9), if present.
  std::optional<std::size_t> find(const GroupElement& g) const;

  /// Element mapping the fundamental domain [0,1] onto [i, i+1] of the
  /// normalized circle R/lZ, as an index into elements().
  std::size_t segment_element(int i) const;

 private:
  MassSystem system_;
  std::vector<GroupElement> elements_;
  std::vector<std::size_t> kernel_;
  Classification cls_;
  Eigen::MatrixXd kernel_projector_;
  BoundaryInvolution boundary_;
  std::vector<std::size_t> segment_elements_;
};

inline constexpr double kMatrixTolerance = 1e-9;
inline constexpr double kCoercivityTolerance = 1e-8;

/// Closure of the generators under composition. The identity is always
/// included, so an empty generator list gives the trivial group.
/// Throws InvalidGenerator for invalid generators, CapExceeded when the
/// closure grows past `cap` elements, InvalidGroup when the time image has
/// no admissible classification.
SymmetryGroup close_group(const MassSystem& system,
                          const std::vector<GroupElement>& generators,
                          std::size_t cap = 10000);

/// Classify Im(tau) as cyclic, brake or dihedral and pick r or (h0, h1).
Classification classify(const MassSystem& system,
                        const std::vector<GroupElement>& elements);

Eigen::MatrixXd kernel_projector(const SymmetryGroup& group);

/// Average of action_matrix over all elements of G.
Eigen::MatrixXd group_average(const SymmetryGroup& group);

/// Mass-orthogonal projector onto the centered configurations
/// X = {q : sum_j m_j q_j = 0}.
Eigen::MatrixXd center_of_mass_projector(const MassSystem& system);

/// dim X^G, computed as the trace of the product of the two commuting
/// projectors.
double centered_fixed_trace(const SymmetryGroup& group);

/// True iff X^G = 0, which is equivalent to coercivity of the restricted
/// action functional.
bool is_coercive(const SymmetryGroup& group);

BoundaryInvolution boundary_involution(const SymmetryGroup& group);

/// Apply a flattened linear map to a d x n configuration.
Configuration apply_linear(const Eigen::MatrixXd& map,
                           const Eigen::Ref<const Eigen::MatrixXd>& q);

}  // namespace equiorb
