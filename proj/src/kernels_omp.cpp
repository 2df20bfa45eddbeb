#include "equiorb/errors.hpp"
#include "equiorb/kernels.hpp"
#include "pair_energy.hpp"

#include <omp.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <vector>

namespace equiorb::kernels {

namespace {
std::atomic<int> g_threads{0};
}

void set_num_threads(int threads) { g_threads = threads < 0 ? 0 : threads; }

int num_threads() {
  const int t = g_threads.load();
  return t > 0 ? t : omp_get_max_threads();
}

PotentialSums potential_omp(const FourierPath& path, const TrigTable& table,
                            bool with_gradient) {
  const MassSystem& sys = path.system();
  const int n = sys.n();
  const int d = sys.d();
  const int dim = n * d;
  const int s = path.s();
  const int nodes = table.nu() + 1;
  const long double alpha = sys.alpha();
  const bool newtonian = sys.alpha() == 1.0;
  const double floor = sys.collision_floor();
  const double* a = path.coeffs().data();
  const double* sines = table.sines().data();  // column-major, nodes x s
  const double* t = table.nodes().data();
  const double* masses = sys.masses().data();

  std::vector<long double> node_u(static_cast<std::size_t>(nodes));
  std::vector<double> node_min(static_cast<std::size_t>(nodes));
  std::vector<double> node_g(with_gradient ? static_cast<std::size_t>(nodes) * dim : 0);
  std::vector<unsigned char> collided(static_cast<std::size_t>(nodes), 0);

#pragma omp parallel num_threads(num_threads())
  {
    std::vector<long double> q(static_cast<std::size_t>(dim));
#pragma omp for schedule(static)
    for (int j = 0; j < nodes; ++j) {
      const long double tj = t[j];
      for (int c = 0; c < dim; ++c) {
        long double v = a[c] + tj * (static_cast<long double>(a[(s + 1) * dim + c]) - a[c]);
        for (int k = 1; k <= s; ++k)
          v += static_cast<long double>(sines[(k - 1) * nodes + j]) * a[k * dim + c];
        q[static_cast<std::size_t>(c)] = v;
      }
      double* g = with_gradient ? node_g.data() + static_cast<std::size_t>(j) * dim
                                : nullptr;
      if (g)
        for (int c = 0; c < dim; ++c) g[c] = 0.0;
      long double u = 0.0L;
      double dmin = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n && !collided[static_cast<std::size_t>(j)]; ++i) {
        for (int k = i + 1; k < n; ++k) {
          long double r2 = 0.0L;
          for (int c = 0; c < d; ++c) {
            const long double diff = q[i * d + c] - q[k * d + c];
            r2 += diff * diff;
          }
          const long double r = std::sqrt(r2);
          if (!(r > floor)) {
            collided[static_cast<std::size_t>(j)] = 1;
            break;
          }
          dmin = std::min(dmin, static_cast<double>(r));
          const long double f =
              newtonian ? 1.0L / (r * r2) : alpha / std::pow(r, alpha + 2.0L);
          u += detail::pair_energy(masses[i] * masses[k], r, alpha);
          if (!g) continue;
          for (int c = 0; c < d; ++c) {
            const long double diff = q[i * d + c] - q[k * d + c];
            g[i * d + c] -= static_cast<double>(f * masses[k] * diff);
            g[k * d + c] += static_cast<double>(f * masses[i] * diff);
          }
        }
      }
      node_u[static_cast<std::size_t>(j)] = u;
      node_min[static_cast<std::size_t>(j)] = dmin;
    }
  }

  for (int j = 0; j < nodes; ++j) {
    if (collided[static_cast<std::size_t>(j)])
      throw CollisionError("collision at quadrature sample " + std::to_string(j),
                           static_cast<std::size_t>(j));
  }

  PotentialSums out;
  out.min_distance = std::numeric_limits<double>::infinity();
  long double head_sum = 0.0L, tail_sum = 0.0L;
  for (int j = 0; j < nodes; ++j) {
    const long double u = node_u[static_cast<std::size_t>(j)];
    const double head = static_cast<double>(u);
    const long double half = (j == 0 || j == nodes - 1) ? 0.5L : 1.0L;
    head_sum += half * head;
    tail_sum += half * (u - head);
    out.min_distance = std::min(out.min_distance, node_min[static_cast<std::size_t>(j)]);
  }
  out.value = head_sum / table.nu() + tail_sum / table.nu();
  if (!with_gradient) return out;

  // One coefficient per (block, coordinate); each sums over nodes in order.
  out.gradient.resize((s + 2) * dim);
  const double* w = table.weights().data();
  const int total = (s + 2) * dim;
#pragma omp parallel for schedule(static) num_threads(num_threads())
  for (int idx = 0; idx < total; ++idx) {
    const int k = idx / dim;
    const int c = idx % dim;
    double acc = 0.0;
    for (int j = 0; j < nodes; ++j) {
      double basis;
      if (k == 0) basis = 1.0 - t[j];
      else if (k == s + 1) basis = t[j];
      else basis = sines[(k - 1) * nodes + j];
      acc += basis * (w[j] * node_g[static_cast<std::size_t>(j) * dim + c]);
    }
    out.gradient[idx] = acc;
  }
  return out;
}

}  // namespace equiorb::kernels
