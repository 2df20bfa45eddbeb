// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "equiorb/cli.hpp"
#include "equiorb/errors.hpp"
#include "equiorb/group_io.hpp"
#include "equiorb/optimizer.hpp"
#include "equiorb/pathspace.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <algorithm>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace equiorb;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << std::endl;
  failures += !ok;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << x;
  return os.str();
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path group_file(const std::string& name) {
  return fs::path(EQUIORB_GROUPS_DIR) / (name + ".json");
}

std::shared_ptr<const SymmetryGroup> bundled(const std::string& name) {
  return load_group(group_file(name)).group;
}

Eigen::VectorXd uniform(Eigen::Index n, std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> u(-amp, amp);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

FourierPath smooth_symmetric(std::shared_ptr<const SymmetryGroup> g, int s, std::mt19937_64& rng) {
  FourierPath p(std::move(g), s);
  p.coeffs() = uniform(p.coeffs().size(), rng);
  const int dim = p.block_size();
  for (int k = 1; k <= s; ++k) p.coeffs().segment(k * dim, dim) /= double(k) * k;
  symmetrize_coeffs(p.coeffs(), p.group(), s);
  return p;
}

std::vector<double> junction_log;

void record_junction(const FourierPath& p, const QuadratureParams& q) {
  junction_log.push_back(
      extend_to_full_period(p, q, std::numeric_limits<double>::infinity()).max_junction_mismatch);
}

// ------------------------------------------------------------------ kinetic

void kinetic_closed_form() {
  Stopwatch sw;
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const int d = 1 + static_cast<int>(rng() % 3);
    const int s = 1 + static_cast<int>(rng() % 16);
    std::vector<double> m(static_cast<std::size_t>(n));
    for (auto& x : m) x = std::uniform_real_distribution<double>(0.1, 5.0)(rng);
    const MassSystem sys(n, d, m);
    auto g = std::make_shared<const SymmetryGroup>(close_group(sys, {}));
    FourierPath p(g, s);
    p.coeffs() = uniform(p.coeffs().size(), rng);
    // Composite Simpson with 10^5 panels of |q'|_M^2.
    const int panels = 100000;
    long double acc = 0.0L;
    for (int i = 0; i <= panels; ++i) {
      const TangentVector v = velocity(p, static_cast<double>(i) / panels);
      const double f = mass_inner(v, v, sys);
      acc += (i == 0 || i == panels ? 1.0L : (i % 2 ? 4.0L : 2.0L)) * f;
    }
    const double oracle = static_cast<double>(acc / (3.0L * panels));
    worst = std::max(worst, std::abs(kinetic_quadratic(p) - oracle) / oracle);
  }
  const double t = sw.seconds();
  report("kinetic closed form", worst < 1e-8 && t < 10.0,
         "50 sets, max rel err " + fmt(worst) + " (< 1e-8), " + fmt(t) + " s (< 10 s)");
}

// ----------------------------------------------------------------- gradient

void gradient_correctness() {
  Stopwatch sw;
  std::mt19937_64 rng(202);
  const char* groups[] = {"figure_eight", "choreography3", "brake", "antipodal"};
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = bundled(groups[trial % 4]);
    const int s = 3 + trial % 8;
    const QuadratureParams quad{default_nu(s)};
    const FourierPath p = smooth_symmetric(g, s, rng);
    const Eigen::VectorXd grad = action_gradient(p, quad);
    const MassSystem& sys = p.system();
    const double h = 1e-6;
    Eigen::VectorXd fd(grad.size()), analytic(grad.size());
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      FourierPath a = p, b = p;
      a.coeffs()[i] += h;
      b.coeffs()[i] -= h;
      fd[i] = (discrete_action(a, quad).action - discrete_action(b, quad).action) / (2 * h);
      analytic[i] = sys.mass(static_cast<int>((i % sys.dim()) / sys.d())) * grad[i];
    }
    worst = std::max(worst, (fd - analytic).lpNorm<Eigen::Infinity>() /
                                fd.lpNorm<Eigen::Infinity>());
  }
  const double t = sw.seconds();
  report("gradient vs finite differences", worst < 1e-5 && t < 60.0,
         "20 paths over cyclic/brake/dihedral groups, max rel err " + fmt(worst) +
             " (< 1e-5), " + fmt(t) + " s (< 60 s)");
}

// ---------------------------------------------------------------- trapezoid

void trapezoid_exactness() {
  std::mt19937_64 rng(303);
  auto g = std::make_shared<const SymmetryGroup>(close_group(MassSystem::equal_masses(3, 2), {}));
  Configuration c(2, 3);
  c << 0.2, -1.1, 0.8, 0.4, 0.6, -0.9;
  const double u = potential(c, g->system());
  bool exact = true;
  for (int nu : {1, 7, 64}) {
    FourierPath p(g, 5);
    p.block(0) = c;
    p.block(6) = c;
    exact = exact && discrete_potential(p, {nu}).value == u;
  }
  double lo = 1e300, hi = -1e300;
  for (int trial = 0; trial < 5; ++trial) {
    FourierPath p(g, 6);
    p.coeffs() = 0.2 * uniform(p.coeffs().size(), rng);
    for (int j = 0; j < 3; ++j) {
      p.block(0).col(j) += Eigen::Vector2d(2.0 * j, 0.0);
      p.block(7).col(j) += Eigen::Vector2d(2.0 * j, 1.0 + trial);
    }
    const double u1 = discrete_potential(p, {1000}).value;
    const double u2 = discrete_potential(p, {2000}).value;
    const double u4 = discrete_potential(p, {4000}).value;
    const double ratio = (u1 - u2) / (u2 - u4);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  report("trapezoid exactness and order", exact && lo >= 3.5 && hi <= 4.5,
         std::string("constant path exact for nu=1,7,64: ") + (exact ? "yes" : "no") +
             "; Richardson ratios in [" + fmt(lo) + ", " + fmt(hi) + "] (within [3.5, 4.5])");
}

// --------------------------------------------------------------- coercivity

Eigen::MatrixXd oracle_action(const GroupElement& g, int n, int d) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n * d, n * d);
  for (int j = 0; j < n; ++j) a.block(g.perm[static_cast<std::size_t>(j)] * d, j * d, d, d) = g.mat;
  return a;
}

// dim {q : g.q = q for every generator, sum m_j q_j = 0} from the SVD rank.
int fixed_centered_dim(const std::vector<GroupElement>& gens, const MassSystem& sys) {
  const int n = sys.n(), d = sys.d(), dim = n * d;
  Eigen::MatrixXd stack = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gens.size()) * dim + d, dim);
  for (std::size_t i = 0; i < gens.size(); ++i)
    stack.block(static_cast<Eigen::Index>(i) * dim, 0, dim, dim) =
        oracle_action(gens[i], n, d) - Eigen::MatrixXd::Identity(dim, dim);
  for (int j = 0; j < n; ++j)
    stack.block(static_cast<Eigen::Index>(gens.size()) * dim, j * d, d, d) =
        sys.mass(j) * Eigen::MatrixXd::Identity(d, d);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(stack).singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > 1e-9;
  return dim - rank;
}

void coercivity_oracle() {
  std::mt19937_64 rng(404);
  int agree = 0;
  int coercive = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const int d = 1 + static_cast<int>(rng() % 3);
    const auto sys = MassSystem::equal_masses(n, d);
    auto perm = [&] {
      std::vector<int> p(static_cast<std::size_t>(n));
      std::iota(p.begin(), p.end(), 0);
      std::shuffle(p.begin(), p.end(), rng);
      return p;
    };
    auto mat = [&] {
      std::vector<int> p(static_cast<std::size_t>(d));
      std::iota(p.begin(), p.end(), 0);
      std::shuffle(p.begin(), p.end(), rng);
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
      for (int i = 0; i < d; ++i) m(i, p[static_cast<std::size_t>(i)]) = (rng() & 1) ? 1.0 : -1.0;
      return m;
    };
    std::vector<GroupElement> gens;
    for (int i = 0, k = static_cast<int>(rng() % 3); i < k; ++i)
      gens.push_back({TimeAction::identity(), perm(), mat()});
    const int l = 1 + static_cast<int>(rng() % 4);
    gens.push_back({TimeAction::rotation(1, l), perm(), mat()});
    const bool expected = fixed_centered_dim(gens, sys) == 0;
    agree += is_coercive(close_group(sys, gens)) == expected;
    coercive += expected;
  }
  const bool trivial = !is_coercive(*bundled("trivial"));
  const bool antipodal = is_coercive(*bundled("antipodal"));
  const bool chor = is_coercive(*bundled("choreography3"));
  report("coercivity oracle", agree == 10 && trivial && antipodal && chor,
         std::to_string(agree) + "/10 random groups agree with SVD rank (" +
             std::to_string(coercive) + " coercive); trivial=false " + (trivial ? "ok" : "WRONG") +
             ", antipodal=true " + (antipodal ? "ok" : "WRONG") + ", choreography=true " +
             (chor ? "ok" : "WRONG"));
}

// ------------------------------------------------------------------- Kepler

// Circle of radius R per body, masses 1/2, period 2: A(R) = pi^2 R^2 + 1/(4R).
double kepler_oracle() {
  auto a = [](double r) { return pi * pi * r * r + 0.25 / r; };
  double lo = 1e-3, hi = 3.0;
  const double ratio = (std::sqrt(5.0) - 1) / 2;
  while (hi - lo > 1e-13) {
    const double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
    (a(x1) < a(x2) ? hi : lo) = (a(x1) < a(x2) ? x2 : x1);
  }
  return a(0.5 * (lo + hi));
}

void kepler() {
  Stopwatch sw;
  const double oracle = kepler_oracle();
  const auto g = bundled("choreography2");
  const QuadratureParams quad{128};
  MinimizeConfig cfg;
  const auto out = minimize(random_init(g, 8, 0, 1.0, quad), quad, cfg);
  const double t = sw.seconds();
  const double rel = std::abs(out.report.action - oracle) / oracle;
  if (out.status == Status::Converged) record_junction(out.path, out.quad);
  report("two-body Kepler oracle",
         out.status == Status::Converged && out.report.grad_norm < 1e-8 && rel < 1e-3 && t < 60.0,
         "status " + to_string(out.status) + ", grad " + fmt(out.report.grad_norm) +
             " (< 1e-8), action " + fmt(out.report.action) + " vs oracle " + fmt(oracle) +
             ", rel err " + fmt(rel) + " (< 1e-3), " + fmt(t) + " s (< 60 s)");
}

// ------------------------------------------------------------- figure-eight

void figure_eight() {
  Stopwatch sw;
  const auto g = bundled("figure_eight");
  const QuadratureParams quad{256};
  MinimizeConfig cfg;
  int good = 0, converged = 0;
  double best_residual = std::numeric_limits<double>::infinity();
  double best_ratio = 0.0, best_sym = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    const auto out = minimize(random_init(g, 12, seed, 1.0, quad), quad, cfg);
    if (out.status != Status::Converged) continue;
    ++converged;
    record_junction(out.path, out.quad);
    const auto rep = verify(out.path, out.quad);
    const bool ok = rep.min_distance > 0.1 * rep.mean_distance && rep.residual_max < 1e-3 &&
                    rep.symmetry_violation < 1e-8;
    good += ok;
    if (rep.residual_max < best_residual) {
      best_residual = rep.residual_max;
      best_ratio = rep.min_distance / rep.mean_distance;
      best_sym = rep.symmetry_violation;
    }
  }
  const double t = sw.seconds();
  report("figure-eight search", good >= 1 && t < 600.0,
         std::to_string(good) + "/10 seeds qualify (" + std::to_string(converged) +
             " converged); best residual " + fmt(best_residual) + " (< 1e-3), min/mean distance " +
             fmt(best_ratio) + " (> 0.1), symmetry " + fmt(best_sym) + " (< 1e-8), " + fmt(t) +
             " s (< 600 s)");
}

// ------------------------------------------------------------- determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "equiorb_acceptance";
  fs::remove_all(root);
  RunManifest m;
  m.group_file = group_file("figure_eight");
  m.s = 12;
  m.nu = 256;
  m.restarts = 3;
  std::ostringstream log;
  m.out_dir = root / "a";
  const auto a = cmd_minimize(m, log);
  m.out_dir = root / "b";
  const auto b = cmd_minimize(m, log);
  int records = 0;
  bool same = slurp(root / "a" / "summary.csv") == slurp(root / "b" / "summary.csv");
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].record_file.has_value() == b[i].record_file.has_value();
    if (!a[i].record_file || !b[i].record_file) continue;
    ++records;
    same = same && slurp(*a[i].record_file) == slurp(*b[i].record_file);
    const LoadedOrbit orbit = load_orbit(*a[i].record_file);
    record_junction(orbit.path, orbit.quad);
  }
  report("determinism", same && records > 0,
         std::to_string(records) + " orbit records compared byte-for-byte across two runs: " +
             (same ? "identical" : "DIFFERENT"));
}

void junctions() {
  double worst = 0.0;
  for (double j : junction_log) worst = std::max(worst, j);
  report("symmetry reconstruction", !junction_log.empty() && worst < 1e-10,
         std::to_string(junction_log.size()) + " converged orbits, max junction mismatch " +
             fmt(worst) + " (< 1e-10)");
}

template <class F>
void guarded(const std::string& name, F f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded("kinetic closed form", kinetic_closed_form);
  guarded("gradient vs finite differences", gradient_correctness);
  guarded("trapezoid exactness and order", trapezoid_exactness);
  guarded("coercivity oracle", coercivity_oracle);
  guarded("two-body Kepler oracle", kepler);
  guarded("figure-eight search", figure_eight);
  guarded("determinism", determinism);
  guarded("symmetry reconstruction", junctions);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
