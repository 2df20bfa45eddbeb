#pragma once

#include "equiorb/pathspace.hpp"

#include <Eigen/Dense>

namespace equiorb::kernels {

/// Trapezoid-weighted potential over the quadrature nodes and its gradient
/// with respect to the coefficient blocks (mass metric, without the l factor).
struct PotentialSums {
  long double value = 0.0L;
  Eigen::VectorXd gradient;  ///< empty unless requested
  double min_distance = 0.0;
};

/// Straightforward loop over nodes; kept as the reference for testing.
PotentialSums potential_serial(const FourierPath& path, const TrigTable& table,
                               bool with_gradient);

/// Node-parallel evaluation. Per-node results are reduced in node order, so
/// the output is bit-identical for any thread count.
PotentialSums potential_omp(const FourierPath& path, const TrigTable& table,
                            bool with_gradient);

/// Threads used by potential_omp (0 = OpenMP default).
void set_num_threads(int threads);
int num_threads();

}  // namespace equiorb::kernels
