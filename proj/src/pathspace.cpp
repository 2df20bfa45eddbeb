#include "equiorb/pathspace.hpp"

#include "equiorb/errors.hpp"
#include "equiorb/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

namespace equiorb {

using std::numbers::pi;

// ----------------------------------------------------------------- TrigTable

TrigTable::TrigTable(int s, int nu) : s_(s), nu_(nu) {
  if (s < 0) throw Error("number of sine modes must be non-negative");
  if (nu < 1) throw Error("quadrature needs nu >= 1");
  t_.resize(static_cast<std::size_t>(nu) + 1);
  w_.assign(static_cast<std::size_t>(nu) + 1, 1.0 / nu);
  w_.front() = w_.back() = 0.5 / nu;
  sin_.resize(nu + 1, s);
  for (int j = 0; j <= nu; ++j) {
    t_[static_cast<std::size_t>(j)] = static_cast<double>(j) / nu;
    for (int k = 1; k <= s; ++k) {
      // sin(k pi j / nu) with the argument reduced exactly mod 2 pi.
      const long long m = (static_cast<long long>(k) * j) % (2LL * nu);
      sin_(j, k - 1) =
          m % nu == 0 ? 0.0 : std::sin(pi * static_cast<double>(m) / nu);
    }
  }
}

std::shared_ptr<const TrigTable> TrigTable::get(int s, int nu) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const TrigTable>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{s, nu}];
  if (!slot) slot = std::make_shared<const TrigTable>(s, nu);
  return slot;
}

// --------------------------------------------------------------- FourierPath

FourierPath::FourierPath(std::shared_ptr<const SymmetryGroup> group, int s)
    : group_(std::move(group)), s_(s) {
  if (!group_) throw Error("FourierPath needs a group");
  if (s_ < 0) throw ShapeError("number of sine modes must be non-negative");
  coeffs_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s_ + 2) *
                                  group_->system().dim());
}

FourierPath::FourierPath(std::shared_ptr<const SymmetryGroup> group, int s,
                         Eigen::VectorXd coeffs)
    : FourierPath(std::move(group), s) {
  if (coeffs.size() != coeffs_.size()) {
    std::ostringstream os;
    os << "expected " << s_ + 2 << " coefficient blocks of " << block_size()
       << " values (" << coeffs_.size() << " total), got " << coeffs.size();
    throw ShapeError(os.str());
  }
  coeffs_ = std::move(coeffs);
}

Eigen::Map<const Eigen::MatrixXd> FourierPath::block(int k) const {
  return {coeffs_.data() + static_cast<Eigen::Index>(k) * block_size(),
          system().d(), system().n()};
}

Eigen::Map<Eigen::MatrixXd> FourierPath::block(int k) {
  return {coeffs_.data() + static_cast<Eigen::Index>(k) * block_size(),
          system().d(), system().n()};
}

int FourierPath::highest_occupied_mode() const {
  for (int k = s_; k >= 1; --k)
    if (!block(k).isZero(0.0)) return k;
  return 0;
}

// ---------------------------------------------------------- path evaluation

namespace {

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream os;
    os << "time " << t << " outside the fundamental domain [0,1]";
    throw Error(os.str());
  }
}

}  // namespace

Configuration sample(const FourierPath& path, double t) {
  check_time(t);
  Configuration q = (1.0 - t) * path.block(0) + t * path.block(path.s() + 1);
  for (int k = 1; k <= path.s(); ++k) q += std::sin(k * pi * t) * path.block(k);
  return q;
}

TangentVector velocity(const FourierPath& path, double t) {
  check_time(t);
  TangentVector v = path.block(path.s() + 1) - path.block(0);
  for (int k = 1; k <= path.s(); ++k)
    v += (k * pi * std::cos(k * pi * t)) * path.block(k);
  return v;
}

TangentVector acceleration(const FourierPath& path, double t) {
  check_time(t);
  TangentVector acc = TangentVector::Zero(path.system().d(), path.system().n());
  for (int k = 1; k <= path.s(); ++k)
    acc -= (k * k * pi * pi * std::sin(k * pi * t)) * path.block(k);
  return acc;
}

double kinetic_quadratic(const FourierPath& path) {
  const MassSystem& sys = path.system();
  const Configuration seg = path.block(path.s() + 1) - path.block(0);
  double k2 = mass_inner(seg, seg, sys);
  for (int k = 1; k <= path.s(); ++k)
    k2 += 0.5 * k * k * pi * pi * mass_inner(path.block(k), path.block(k), sys);
  return k2;
}

double coeff_inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                   const MassSystem& sys) {
  const int d = sys.d();
  const int n = sys.n();
  const Eigen::Index blocks = a.size() / sys.dim();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < blocks; ++k)
    for (int j = 0; j < n; ++j)
      acc += sys.mass(j) * a.segment(k * sys.dim() + j * d, d)
                               .dot(b.segment(k * sys.dim() + j * d, d));
  return acc;
}

double coeff_norm(const Eigen::VectorXd& a, const MassSystem& sys) {
  return std::sqrt(coeff_inner(a, a, sys));
}

PotentialValue discrete_potential(const FourierPath& path,
                                  const QuadratureParams& quad) {
  const auto table = TrigTable::get(path.s(), quad.nu);
  const auto sums = kernels::potential_omp(path, *table, false);
  return {static_cast<double>(sums.value), sums.min_distance};
}

Evaluation evaluate_action(const FourierPath& path, const QuadratureParams& quad,
                           bool with_gradient, KernelMode mode) {
  const auto table = TrigTable::get(path.s(), quad.nu);
  const auto sums = mode == KernelMode::Parallel
                        ? kernels::potential_omp(path, *table, with_gradient)
                        : kernels::potential_serial(path, *table, with_gradient);
  const MassSystem& sys = path.system();
  const int s = path.s();
  const int dim = sys.dim();
  const int l = path.group().l();

  // Kinetic form in extended precision so that tiny descent steps resolve.
  long double kin = 0.0L;
  const auto& a = path.coeffs();
  for (int j = 0; j < sys.n(); ++j) {
    const long double m = sys.mass(j);
    for (int c = 0; c < sys.d(); ++c) {
      const int idx = j * sys.d() + c;
      const long double seg =
          static_cast<long double>(a[(s + 1) * dim + idx]) - a[idx];
      long double acc = seg * seg;
      for (int k = 1; k <= s; ++k) {
        const long double ak = a[k * dim + idx];
        acc += 0.5L * k * k * std::numbers::pi_v<long double> *
               std::numbers::pi_v<long double> * ak * ak;
      }
      kin += m * acc;
    }
  }

  Evaluation ev;
  ev.action_ext = l * (0.5L * kin + sums.value);
  ev.report.action = static_cast<double>(ev.action_ext);
  ev.report.kinetic = static_cast<double>(kin);
  ev.report.potential = static_cast<double>(sums.value);
  ev.report.min_mutual_distance = sums.min_distance;
  ev.report.multiplier = l;
  ev.report.grad_norm = std::numeric_limits<double>::quiet_NaN();
  if (!with_gradient) return ev;

  Eigen::VectorXd grad = sums.gradient;
  grad.head(dim) += a.head(dim) - a.segment((s + 1) * dim, dim);
  grad.segment((s + 1) * dim, dim) += a.segment((s + 1) * dim, dim) - a.head(dim);
  for (int k = 1; k <= s; ++k)
    grad.segment(k * dim, dim) += (0.5 * k * k * pi * pi) * a.segment(k * dim, dim);
  grad *= static_cast<double>(l);
  ev.gradient = std::move(grad);

  Eigen::VectorXd projected = ev.gradient;
  symmetrize_coeffs(projected, path.group(), s);
  ev.report.grad_norm = coeff_norm(projected, sys);
  return ev;
}

ActionReport discrete_action(const FourierPath& path, const QuadratureParams& quad) {
  return evaluate_action(path, quad, true).report;
}

Eigen::VectorXd action_gradient(const FourierPath& path,
                                const QuadratureParams& quad) {
  return evaluate_action(path, quad, true).gradient;
}

// --------------------------------------------------------------- symmetrize

void symmetrize_coeffs(Eigen::VectorXd& coeffs, const SymmetryGroup& group, int s) {
  const int dim = group.system().dim();
  if (coeffs.size() != static_cast<Eigen::Index>(s + 2) * dim)
    throw ShapeError("symmetrize: coefficient vector has the wrong length");
  const Eigen::MatrixXd& pk = group.kernel_projector();
  for (int k = 1; k <= s; ++k) {
    const Eigen::VectorXd blk = coeffs.segment(k * dim, dim);
    coeffs.segment(k * dim, dim) = pk * blk;
  }
  Eigen::VectorXd pair(2 * dim);
  pair << coeffs.head(dim), coeffs.segment((s + 1) * dim, dim);
  const Eigen::VectorXd fixed = group.boundary().projector * pair;
  coeffs.head(dim) = fixed.head(dim);
  coeffs.segment((s + 1) * dim, dim) = fixed.tail(dim);
}

FourierPath symmetrize(const FourierPath& path) {
  FourierPath out = path;
  symmetrize_coeffs(out.coeffs(), out.group(), out.s());
  return out;
}

double coefficient_symmetry_violation(const FourierPath& path) {
  const int dim = path.block_size();
  const int s = path.s();
  const auto& a = path.coeffs();
  const Eigen::MatrixXd& pk = path.group().kernel_projector();
  double worst = 0.0;
  for (int k = 1; k <= s; ++k) {
    const Eigen::VectorXd blk = a.segment(k * dim, dim);
    worst = std::max(worst, (pk * blk - blk).cwiseAbs().maxCoeff());
  }
  Eigen::VectorXd pair(2 * dim);
  pair << a.head(dim), a.segment((s + 1) * dim, dim);
  worst = std::max(
      worst, (path.group().boundary().projector * pair - pair).cwiseAbs().maxCoeff());
  return worst;
}

// -------------------------------------------------------- full-period samples

FundamentalLocation locate(const SymmetryGroup& group, double time) {
  const int l = group.l();
  if (!(time >= 0.0 && time <= l)) {
    std::ostringstream os;
    os << "time " << time << " outside the period [0," << l << "]";
    throw Error(os.str());
  }
  const int seg = std::min(static_cast<int>(std::floor(time)), l - 1);
  const double u = std::clamp(time - seg, 0.0, 1.0);
  FundamentalLocation loc;
  loc.element = group.segment_element(seg);
  loc.reflected = group.elements()[loc.element].time.is_reflection();
  loc.local_t = loc.reflected ? 1.0 - u : u;
  return loc;
}

Configuration sample_full_period(const FourierPath& path, double time) {
  const auto loc = locate(path.group(), time);
  return act_on_config(path.group().elements()[loc.element],
                       sample(path, loc.local_t));
}

FullPeriodTrajectory extend_to_full_period(const FourierPath& path,
                                           const QuadratureParams& quad,
                                           double tol) {
  const SymmetryGroup& group = path.group();
  const int l = group.l();
  const int nu = quad.nu;
  if (nu < 1) throw Error("quadrature needs nu >= 1");
  std::vector<Configuration> base;
  base.reserve(static_cast<std::size_t>(nu) + 1);
  for (int j = 0; j <= nu; ++j) base.push_back(sample(path, static_cast<double>(j) / nu));

  FullPeriodTrajectory out;
  out.l = l;
  out.nu = nu;
  out.times.reserve(static_cast<std::size_t>(nu) * l + 1);
  out.samples.reserve(static_cast<std::size_t>(nu) * l + 1);
  for (int i = 0; i < l; ++i) {
    const GroupElement& g = group.elements()[group.segment_element(i)];
    const bool refl = g.time.is_reflection();
    for (int j = 0; j <= nu; ++j) {
      Configuration q = act_on_config(g, base[static_cast<std::size_t>(refl ? nu - j : j)]);
      if (j == 0 && i > 0) {
        out.max_junction_mismatch = std::max(
            out.max_junction_mismatch, (q - out.samples.back()).cwiseAbs().maxCoeff());
        continue;
      }
      out.times.push_back(i + static_cast<double>(j) / nu);
      out.samples.push_back(std::move(q));
    }
  }
  // Periodic closure: time l must coincide with time 0.
  out.max_junction_mismatch =
      std::max(out.max_junction_mismatch,
               (out.samples.back() - out.samples.front()).cwiseAbs().maxCoeff());
  if (out.max_junction_mismatch > tol) {
    std::ostringstream os;
    os << "full-period reconstruction mismatch " << out.max_junction_mismatch
       << " exceeds " << tol;
    throw SymmetryViolation(os.str());
  }
  return out;
}

// ----------------------------------------------------- SpectralAcceleration

namespace {

constexpr int kEndpointTerms = 6;

// Pairs (phi(1-t), phi(t)) with phi'' of each pair equal to the previous one.
double basis_value(int p, double t) {
  const double u = p % 2 == 0 ? 1.0 - t : t;
  switch (p / 2) {
    case 0:
      return u;
    case 1:
      return (u * u * u - u) / 6.0;
    default:
      return u * u * u * u * u / 120.0 - u * u * u / 36.0 + 7.0 * u / 360.0;
  }
}

// Sine coefficient 2 int_0^1 phi_p sin(k pi t) dt.
double basis_coefficient(int p, int k) {
  const double kp = k * pi;
  const double sign = p % 2 == 0 ? 1.0 : (k % 2 == 0 ? -1.0 : 1.0);  // -(-1)^k for the t side
  const int order = p / 2;
  return 2.0 * sign * (order == 1 ? -1.0 : 1.0) / std::pow(kp, 2 * order + 1);
}

}  // namespace

SpectralAcceleration::SpectralAcceleration(const FourierPath& path, int nu)
    : s_(path.s()), d_(path.system().d()), n_(path.system().n()) {
  const int dim = n_ * d_;
  // The top modes of a discrete critical point carry the endpoint boundary
  // layer of the sine basis, so the 1/k^5 pair is only fitted for smooth
  // (continuous) coefficients.
  const int max_params = nu > 0 ? 4 : 6;
  const int params = s_ >= 12 ? max_params : s_ >= 4 ? 4 : (s_ >= 2 ? 2 : 0);
  endpoint_ = Eigen::MatrixXd::Zero(kEndpointTerms, dim);

  Eigen::MatrixXd coeff(s_, dim);  // sine coefficients of q''
  for (int k = 1; k <= s_; ++k)
    coeff.row(k - 1) = -(k * k * pi * pi) * path.coeffs().segment(k * dim, dim).transpose();

  // Model columns: sine coefficients of the endpoint basis functions.
  Eigen::MatrixXd model(s_, kEndpointTerms);
  if (nu > 0 && s_ > 0) {
    const auto table = TrigTable::get(s_, nu);
    for (int k = 1; k <= s_; ++k)
      for (int p = 0; p < kEndpointTerms; ++p) {
        double acc = 0.0;
        for (int j = 0; j <= nu; ++j)
          acc += table->weights()[static_cast<std::size_t>(j)] *
                 basis_value(p, table->nodes()[static_cast<std::size_t>(j)]) *
                 table->sines()(j, k - 1);
        model(k - 1, p) = 2.0 * acc;
      }
  } else {
    for (int k = 1; k <= s_; ++k)
      for (int p = 0; p < kEndpointTerms; ++p) model(k - 1, p) = basis_coefficient(p, k);
  }

  if (params > 0) {
    const int fit = params == 2 ? 2 : std::max(params, (s_ + 1) / 2);
    const int lo = s_ - fit;
    const Eigen::MatrixXd m = model.block(lo, 0, fit, params);
    const Eigen::MatrixXd rhs = coeff.block(lo, 0, fit, dim);
    endpoint_.topRows(params) = m.colPivHouseholderQr().solve(rhs);
  }
  residual_ = coeff - model * endpoint_;
}

TangentVector SpectralAcceleration::operator()(double t) const {
  check_time(t);
  Eigen::VectorXd flat = Eigen::VectorXd::Zero(n_ * d_);
  for (int p = 0; p < kEndpointTerms; ++p) flat += basis_value(p, t) * endpoint_.row(p).transpose();
  for (int k = 1; k <= s_; ++k)
    flat += std::sin(k * pi * t) * residual_.row(k - 1).transpose();
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), d_, n_);
}

}  // namespace equiorb
