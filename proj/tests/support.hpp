#pragma once

#include "equiorb/group_io.hpp"
#include "equiorb/pathspace.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>

namespace equiorb::test_support {

inline std::filesystem::path group_file(const std::string& name) {
  return std::filesystem::path(EQUIORB_GROUPS_DIR) / (name + ".json");
}

inline LoadedGroup bundled(const std::string& name) { return load_group(group_file(name)); }

inline Eigen::VectorXd uniform_vector(Eigen::Index size, std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> u(-amp, amp);
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = u(rng);
  return v;
}

/// Symmetric path with coefficients decaying like 1/k^2.
inline FourierPath smooth_symmetric_path(std::shared_ptr<const SymmetryGroup> g, int s,
                                         std::mt19937_64& rng, double amp = 1.0) {
  FourierPath p(std::move(g), s);
  p.coeffs() = uniform_vector(p.coeffs().size(), rng, amp);
  const int dim = p.block_size();
  for (int k = 1; k <= s; ++k) p.coeffs().segment(k * dim, dim) /= double(k) * k;
  symmetrize_coeffs(p.coeffs(), p.group(), s);
  return p;
}

}  // namespace equiorb::test_support
