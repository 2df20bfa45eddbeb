#include "equiorb/errors.hpp"
#include "equiorb/kernels.hpp"
#include "pair_energy.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace equiorb::kernels {

PotentialSums potential_serial(const FourierPath& path, const TrigTable& table,
                               bool with_gradient) {
  const MassSystem& sys = path.system();
  const int n = sys.n();
  const int d = sys.d();
  const int dim = n * d;
  const int s = path.s();
  const long double alpha = sys.alpha();
  const double* a = path.coeffs().data();

  PotentialSums out;
  out.min_distance = std::numeric_limits<double>::infinity();
  if (with_gradient) out.gradient = Eigen::VectorXd::Zero((s + 2) * dim);

  long double head_sum = 0.0L, tail_sum = 0.0L;
  std::vector<long double> q(static_cast<std::size_t>(dim));
  std::vector<double> g(static_cast<std::size_t>(dim));
  for (int j = 0; j <= table.nu(); ++j) {
    const long double t = table.nodes()[static_cast<std::size_t>(j)];
    for (int c = 0; c < dim; ++c) {
      long double v = a[c] + t * (static_cast<long double>(a[(s + 1) * dim + c]) - a[c]);
      for (int k = 1; k <= s; ++k)
        v += static_cast<long double>(table.sines()(j, k - 1)) * a[k * dim + c];
      q[static_cast<std::size_t>(c)] = v;
    }

    long double u = 0.0L;
    std::fill(g.begin(), g.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      for (int k = i + 1; k < n; ++k) {
        long double r2 = 0.0L;
        for (int c = 0; c < d; ++c) {
          const long double diff = q[i * d + c] - q[k * d + c];
          r2 += diff * diff;
        }
        const long double r = std::sqrt(r2);
        if (!(r > sys.collision_floor()))
          throw CollisionError("collision at quadrature sample " +
                                   std::to_string(j),
                               static_cast<std::size_t>(j));
        out.min_distance = std::min(out.min_distance, static_cast<double>(r));
        u += detail::pair_energy(sys.mass(i) * sys.mass(k), r, alpha);
        const long double f = alpha / std::pow(r, alpha + 2.0L);
        for (int c = 0; c < d; ++c) {
          const long double diff = q[i * d + c] - q[k * d + c];
          g[i * d + c] -= static_cast<double>(f * sys.mass(k) * diff);
          g[k * d + c] += static_cast<double>(f * sys.mass(i) * diff);
        }
      }
    }
    const double w = table.weights()[static_cast<std::size_t>(j)];
    // Double head and long double tail summed apart: a constant integrand
    // reproduces its value exactly.
    const double head = static_cast<double>(u);
    const long double half = (j == 0 || j == table.nu()) ? 0.5L : 1.0L;
    head_sum += half * head;
    tail_sum += half * (u - head);
    if (!with_gradient) continue;
    const double td = table.nodes()[static_cast<std::size_t>(j)];
    for (int c = 0; c < dim; ++c) {
      const double wg = w * g[static_cast<std::size_t>(c)];
      out.gradient[c] += (1.0 - td) * wg;
      out.gradient[(s + 1) * dim + c] += td * wg;
      for (int k = 1; k <= s; ++k)
        out.gradient[k * dim + c] += table.sines()(j, k - 1) * wg;
    }
  }
  out.value = head_sum / table.nu() + tail_sum / table.nu();
  return out;
}

}  // namespace equiorb::kernels
