#include "equiorb/symmetry.hpp"

#include "equiorb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <sstream>

namespace equiorb {

// ---------------------------------------------------------------- TimeAction

namespace {

std::pair<std::int64_t, std::int64_t> reduce_mod_one(std::int64_t num,
                                                     std::int64_t den) {
  if (den == 0) throw Error("time action with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  num %= den;
  if (num < 0) num += den;
  const std::int64_t g = std::gcd(num, den);
  return {num / g, den / g};
}

}  // namespace

TimeAction::TimeAction(bool reflect, std::int64_t num, std::int64_t den)
    : reflect_(reflect) {
  std::tie(num_, den_) = reduce_mod_one(num, den);
}

TimeAction TimeAction::rotation(std::int64_t num, std::int64_t den) {
  return TimeAction(false, num, den);
}

TimeAction TimeAction::reflection(std::int64_t num, std::int64_t den) {
  return TimeAction(true, num, den);
}

TimeAction TimeAction::operator*(const TimeAction& b) const {
  // a(b(t)) = ea (eb t + cb) + ca
  const std::int64_t den = std::lcm(den_, b.den_);
  const std::int64_t cb = b.num_ * (den / b.den_);
  const std::int64_t ca = num_ * (den / den_);
  const std::int64_t num = (reflect_ ? -cb : cb) + ca;
  return TimeAction(reflect_ != b.reflect_, num, den);
}

TimeAction TimeAction::inverse() const {
  // t = e s + c  =>  s = e (t - c)
  if (reflect_) return *this;
  return TimeAction(false, -num_, den_);
}

double TimeAction::apply_fraction(double t) const {
  double v = (reflect_ ? -t : t) +
             static_cast<double>(num_) / static_cast<double>(den_);
  v -= std::floor(v);
  return v;
}

std::optional<int> TimeAction::index(int l) const {
  const std::int64_t scaled = num_ * l;
  if (scaled % den_ != 0) return std::nullopt;
  return static_cast<int>(scaled / den_);
}

std::string TimeAction::describe() const {
  std::ostringstream os;
  os << (reflect_ ? "reflection " : "rotation ") << num_ << "/" << den_;
  return os.str();
}

// -------------------------------------------------------------- GroupElement

GroupElement GroupElement::identity(int n, int d) {
  GroupElement g;
  g.perm.resize(static_cast<std::size_t>(n));
  std::iota(g.perm.begin(), g.perm.end(), 0);
  g.mat = Eigen::MatrixXd::Identity(d, d);
  return g;
}

GroupElement GroupElement::operator*(const GroupElement& other) const {
  GroupElement out;
  out.time = time * other.time;
  out.perm.resize(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j)
    out.perm[j] = perm[static_cast<std::size_t>(other.perm[j])];
  out.mat = mat * other.mat;
  return out;
}

GroupElement GroupElement::inverse() const {
  GroupElement out;
  out.time = time.inverse();
  out.perm.resize(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j)
    out.perm[static_cast<std::size_t>(perm[j])] = static_cast<int>(j);
  out.mat = mat.transpose();
  return out;
}

bool GroupElement::approx_equal(const GroupElement& other, double tol) const {
  if (time != other.time || perm != other.perm) return false;
  if (mat.rows() != other.mat.rows() || mat.cols() != other.mat.cols())
    return false;
  return (mat - other.mat).cwiseAbs().maxCoeff() <= tol;
}

void validate_element(const GroupElement& g, const MassSystem& sys,
                      const std::string& label) {
  const auto n = static_cast<std::size_t>(sys.n());
  if (g.perm.size() != n) {
    std::ostringstream os;
    os << label << ": permutation has " << g.perm.size() << " entries, expected "
       << n;
    throw InvalidGenerator(os.str());
  }
  std::vector<bool> seen(n, false);
  for (int image : g.perm) {
    if (image < 0 || static_cast<std::size_t>(image) >= n ||
        seen[static_cast<std::size_t>(image)])
      throw InvalidGenerator(label + ": permutation is not a bijection");
    seen[static_cast<std::size_t>(image)] = true;
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double a = sys.masses()[j];
    const double b = sys.masses()[static_cast<std::size_t>(g.perm[j])];
    if (std::abs(a - b) > 1e-12 * std::max(a, b)) {
      std::ostringstream os;
      os << label << ": permutation moves body " << j + 1 << " onto body "
         << g.perm[j] + 1 << " of different mass";
      throw InvalidGenerator(os.str());
    }
  }
  if (g.mat.rows() != sys.d() || g.mat.cols() != sys.d()) {
    std::ostringstream os;
    os << label << ": matrix must be " << sys.d() << "x" << sys.d();
    throw InvalidGenerator(os.str());
  }
  if (!g.mat.allFinite())
    throw InvalidGenerator(label + ": matrix has non-finite entries");
  const double err =
      (g.mat.transpose() * g.mat -
       Eigen::MatrixXd::Identity(sys.d(), sys.d()))
          .cwiseAbs()
          .maxCoeff();
  if (err > 1e-10) {
    std::ostringstream os;
    os << label << ": matrix is not orthogonal (|M^T M - I| = " << err << ")";
    throw InvalidGenerator(os.str());
  }
}

Configuration act_on_config(const GroupElement& g,
                            const Eigen::Ref<const Eigen::MatrixXd>& q) {
  if (q.cols() != static_cast<Eigen::Index>(g.perm.size()) ||
      q.rows() != g.mat.rows())
    throw ShapeError("act_on_config: configuration shape does not match element");
  Configuration out(q.rows(), q.cols());
  for (std::size_t j = 0; j < g.perm.size(); ++j)
    out.col(g.perm[j]) = g.mat * q.col(static_cast<Eigen::Index>(j));
  return out;
}

Eigen::MatrixXd action_matrix(const GroupElement& g) {
  const auto d = g.mat.rows();
  const auto n = static_cast<Eigen::Index>(g.perm.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n * d, n * d);
  for (Eigen::Index j = 0; j < n; ++j)
    a.block(g.perm[static_cast<std::size_t>(j)] * d, j * d, d, d) = g.mat;
  return a;
}

Configuration apply_linear(const Eigen::MatrixXd& map,
                           const Eigen::Ref<const Eigen::MatrixXd>& q) {
  const Configuration qc = q;
  const Eigen::Map<const Eigen::VectorXd> flat(qc.data(), qc.size());
  if (map.cols() != flat.size()) throw ShapeError("apply_linear: size mismatch");
  const Eigen::VectorXd out = map * flat;
  return Eigen::Map<const Eigen::MatrixXd>(out.data(), q.rows(), q.cols());
}

std::string to_string(ActionType type) {
  switch (type) {
    case ActionType::Cyclic:
      return "cyclic";
    case ActionType::Brake:
      return "brake";
    case ActionType::Dihedral:
      return "dihedral";
  }
  return "unknown";
}

std::optional<ActionType> action_type_from_string(const std::string& s) {
  if (s == "cyclic") return ActionType::Cyclic;
  if (s == "brake") return ActionType::Brake;
  if (s == "dihedral") return ActionType::Dihedral;
  return std::nullopt;
}

// ------------------------------------------------------------ classification

namespace {

// First element carrying the given time action, preferring involutions when
// asked (so that the boundary map is an involution on all of E^n).
std::optional<std::size_t> pick_with_time(
    const std::vector<GroupElement>& elements, const TimeAction& time,
    bool prefer_involution) {
  std::optional<std::size_t> first;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (elements[i].time != time) continue;
    if (!first) first = i;
    if (!prefer_involution) break;
    const GroupElement sq = elements[i] * elements[i];
    const auto n = static_cast<int>(sq.perm.size());
    const auto d = static_cast<int>(sq.mat.rows());
    if (sq.approx_equal(GroupElement::identity(n, d), kMatrixTolerance))
      return i;
  }
  return first;
}

}  // namespace

Classification classify(const MassSystem& system,
                        const std::vector<GroupElement>& elements) {
  (void)system;
  std::vector<TimeAction> image;
  for (const auto& g : elements)
    if (std::find(image.begin(), image.end(), g.time) == image.end())
      image.push_back(g.time);

  Classification cls;
  cls.l = static_cast<int>(image.size());
  const bool has_reflection =
      std::any_of(image.begin(), image.end(),
                  [](const TimeAction& t) { return t.is_reflection(); });

  if (!has_reflection) {
    cls.type = ActionType::Cyclic;
    if (cls.l == 1) {
      cls.kernel_only = true;
      cls.r = *pick_with_time(elements, TimeAction::identity(), false);
    } else {
      const auto r = pick_with_time(elements, TimeAction::rotation(1, cls.l),
                                    false);
      if (!r) throw InvalidGroup("time rotations do not form a cyclic group");
      cls.r = *r;
    }
    cls.h0 = cls.h1 = cls.r;
    return cls;
  }

  const auto h0 = pick_with_time(elements, TimeAction::reflection(0, 1), true);
  if (!h0)
    throw InvalidGroup(
        "no time reflection fixes t = 0; shift the time origin onto a "
        "reflection axis");
  cls.h0 = *h0;
  if (cls.l == 2) {
    cls.type = ActionType::Brake;
    cls.h1 = cls.h0;
  } else {
    if (cls.l % 2 != 0)
      throw InvalidGroup("dihedral time image must have even order");
    cls.type = ActionType::Dihedral;
    const auto h1 =
        pick_with_time(elements, TimeAction::reflection(2, cls.l), true);
    if (!h1) throw InvalidGroup("no time reflection fixes t = T/l");
    cls.h1 = *h1;
  }
  cls.r = cls.h0;
  return cls;
}

// ------------------------------------------------------------- SymmetryGroup

SymmetryGroup::SymmetryGroup(MassSystem system, std::vector<GroupElement> elements)
    : system_(std::move(system)), elements_(std::move(elements)) {
  if (elements_.empty()) throw InvalidGroup("group has no elements");
  for (std::size_t i = 0; i < elements_.size(); ++i)
    validate_element(elements_[i], system_, "element " + std::to_string(i));
  for (std::size_t i = 0; i < elements_.size(); ++i)
    if (elements_[i].time.is_identity()) kernel_.push_back(i);

  cls_ = classify(system_, elements_);
  if (elements_.size() != kernel_.size() * static_cast<std::size_t>(cls_.l)) {
    std::ostringstream os;
    os << "group order " << elements_.size() << " != |kernel| "
       << kernel_.size() << " * l " << cls_.l;
    throw InvalidGroup(os.str());
  }

  const Eigen::Index dim = system_.dim();
  kernel_projector_ = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t k : kernel_) kernel_projector_ += action_matrix(elements_[k]);
  kernel_projector_ /= static_cast<double>(kernel_.size());

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * dim, 2 * dim);
  if (cls_.type == ActionType::Cyclic) {
    const GroupElement& r = elements_[cls_.r];
    h.block(0, dim, dim, dim) = action_matrix(r.inverse());
    h.block(dim, 0, dim, dim) = action_matrix(r);
  } else {
    h.block(0, 0, dim, dim) = action_matrix(elements_[cls_.h0]);
    h.block(dim, dim, dim, dim) = action_matrix(elements_[cls_.h1]);
  }
  Eigen::MatrixXd pk2 = Eigen::MatrixXd::Zero(2 * dim, 2 * dim);
  pk2.block(0, 0, dim, dim) = kernel_projector_;
  pk2.block(dim, dim, dim, dim) = kernel_projector_;
  boundary_.h = h;
  boundary_.projector =
      0.5 * (Eigen::MatrixXd::Identity(2 * dim, 2 * dim) + h) * pk2;

  const int l = cls_.l;
  segment_elements_.resize(static_cast<std::size_t>(l));
  for (int i = 0; i < l; ++i) {
    TimeAction want = TimeAction::rotation(i, l);
    if (cls_.type != ActionType::Cyclic && i % 2 == 1)
      want = TimeAction::reflection(i + 1, l);
    const auto idx = pick_with_time(elements_, want, false);
    if (!idx) throw InvalidGroup("missing element for time segment " +
                                 std::to_string(i));
    segment_elements_[static_cast<std::size_t>(i)] = *idx;
  }
}

std::optional<std::size_t> SymmetryGroup::find(const GroupElement& g) const {
  for (std::size_t i = 0; i < elements_.size(); ++i)
    if (elements_[i].approx_equal(g, kMatrixTolerance)) return i;
  return std::nullopt;
}

std::size_t SymmetryGroup::segment_element(int i) const {
  const int l = cls_.l;
  const int k = ((i % l) + l) % l;
  return segment_elements_[static_cast<std::size_t>(k)];
}

// --------------------------------------------------------------- close_group

SymmetryGroup close_group(const MassSystem& system,
                          const std::vector<GroupElement>& generators,
                          std::size_t cap) {
  for (std::size_t i = 0; i < generators.size(); ++i)
    validate_element(generators[i], system, "generator " + std::to_string(i + 1));

  std::vector<GroupElement> elements{GroupElement::identity(system.n(), system.d())};
  // Bucket by (time, perm) so that only matrices need tolerant comparison.
  std::map<std::pair<TimeAction, std::vector<int>>, std::vector<std::size_t>>
      buckets;
  buckets[{elements[0].time, elements[0].perm}].push_back(0);

  std::deque<std::size_t> todo{0};
  while (!todo.empty()) {
    const std::size_t cur = todo.front();
    todo.pop_front();
    for (const auto& gen : generators) {
      GroupElement prod = gen * elements[cur];
      auto& bucket = buckets[{prod.time, prod.perm}];
      const bool known = std::any_of(
          bucket.begin(), bucket.end(), [&](std::size_t idx) {
            return elements[idx].approx_equal(prod, kMatrixTolerance);
          });
      if (known) continue;
      if (elements.size() >= cap) {
        std::ostringstream os;
        os << "group closure exceeded " << cap << " elements";
        throw CapExceeded(os.str());
      }
      bucket.push_back(elements.size());
      todo.push_back(elements.size());
      elements.push_back(std::move(prod));
    }
  }
  return SymmetryGroup(system, std::move(elements));
}

Eigen::MatrixXd kernel_projector(const SymmetryGroup& group) {
  return group.kernel_projector();
}

Eigen::MatrixXd group_average(const SymmetryGroup& group) {
  const Eigen::Index dim = group.system().dim();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& g : group.elements()) p += action_matrix(g);
  return p / static_cast<double>(group.order());
}

Eigen::MatrixXd center_of_mass_projector(const MassSystem& system) {
  const int n = system.n();
  const int d = system.d();
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(n * d, n * d);
  // (Cq)_j = q_j - sum_i m_i q_i
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      c.block(j * d, i * d, d, d) -=
          system.mass(i) * Eigen::MatrixXd::Identity(d, d);
  return c;
}

double centered_fixed_trace(const SymmetryGroup& group) {
  return (group_average(group) * center_of_mass_projector(group.system()))
      .trace();
}

bool is_coercive(const SymmetryGroup& group) {
  return std::abs(centered_fixed_trace(group)) < kCoercivityTolerance;
}

BoundaryInvolution boundary_involution(const SymmetryGroup& group) {
  return group.boundary();
}

}  // namespace equiorb
