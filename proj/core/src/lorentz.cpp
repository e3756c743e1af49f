#include "isothermic/lorentz.hpp"

#include <cmath>
#include <sstream>

namespace isothermic {
namespace {

void require_same_dim(const LorentzVector& x, const LorentzVector& y) {
  if (x.size() != y.size()) {
    std::ostringstream os;
    os << "dimension mismatch: " << x.size() << " vs " << y.size();
    throw GeometryError(os.str());
  }
}

// G x without forming G.
LorentzVector apply_gram(const LorentzVector& x) {
  LorentzVector g = x;
  const auto last = x.size() - 1;
  g(0) = -x(last);
  g(last) = -x(0);
  return g;
}

}  // namespace

namespace lorentz {

LorentzVector zero(int n) { return LorentzVector::Zero(n + 2); }

LorentzVector v0(int n) {
  LorentzVector x = zero(n);
  x(0) = 1.0;
  return x;
}

LorentzVector vinf(int n) {
  LorentzVector x = zero(n);
  x(n + 1) = 1.0;
  return x;
}

LorentzVector e(int n, int i) {
  if (i < 1 || i > n) throw GeometryError("basis index out of range");
  LorentzVector x = zero(n);
  x(i) = 1.0;
  return x;
}

LorentzVector from_euclidean(std::span<const double> x) {
  LorentzVector out = zero(static_cast<int>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) out(static_cast<Eigen::Index>(i) + 1) = x[i];
  return require_finite(out);
}

LorentzVector from_euclidean(const Eigen::VectorXd& x) {
  return from_euclidean(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

const LorentzVector& require_finite(const LorentzVector& x) {
  if (!x.allFinite()) throw GeometryError("non-finite Lorentz vector coordinates");
  return x;
}

Eigen::MatrixXd gram(int n) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n + 2, n + 2);
  g(0, 0) = 0.0;
  g(n + 1, n + 1) = 0.0;
  g(0, n + 1) = -1.0;
  g(n + 1, 0) = -1.0;
  return g;
}

double inner(const LorentzVector& x, const LorentzVector& y) {
  require_same_dim(x, y);
  const auto last = x.size() - 1;
  double s = -x(0) * y(last) - x(last) * y(0);
  for (Eigen::Index i = 1; i < last; ++i) s += x(i) * y(i);
  return s;
}

bool is_null(const LorentzVector& x, double tol) {
  return std::abs(inner(x, x)) <= tol * x.squaredNorm();
}

LorentzVector wedge_apply(const LorentzVector& u, const LorentzVector& v, const LorentzVector& w) {
  require_same_dim(u, v);
  require_same_dim(u, w);
  return inner(u, w) * v - inner(v, w) * u;
}

}  // namespace lorentz

Bivector Bivector::zero(int n) { return {Eigen::MatrixXd::Zero(n + 2, n + 2)}; }

Bivector Bivector::wedge(const LorentzVector& u, const LorentzVector& v) {
  require_same_dim(u, v);
  return {v * apply_gram(u).transpose() - u * apply_gram(v).transpose()};
}

double Bivector::skew_residual() const {
  const int n = dim() - 2;
  const Eigen::MatrixXd g = lorentz::gram(n);
  return (g * m + m.transpose() * g).cwiseAbs().maxCoeff();
}

Bivector commutator(const Bivector& a, const Bivector& b) { return {a.m * b.m - b.m * a.m}; }

OrthogonalMap OrthogonalMap::identity(int n) { return {Eigen::MatrixXd::Identity(n + 2, n + 2)}; }

OrthogonalMap OrthogonalMap::inverse() const {
  const Eigen::MatrixXd g = lorentz::gram(dim() - 2);
  return {g * m.transpose() * g};
}

double OrthogonalMap::orthogonality_residual() const {
  const Eigen::MatrixXd g = lorentz::gram(dim() - 2);
  return (m.transpose() * g * m - g).cwiseAbs().maxCoeff();
}

Bivector OrthogonalMap::adjoint(const Bivector& b) const { return {m * b.m * inverse().m}; }

SpaceForm::SpaceForm(LorentzVector w_) : w(std::move(w_)) {
  lorentz::require_finite(w);
  if (w.squaredNorm() == 0.0) throw GeometryError("space form vector must be non-zero");
}

bool SpaceForm::contains(const LorentzVector& v, double tol) const {
  const double scale = std::max(1.0, v.squaredNorm());
  return std::abs(lorentz::inner(v, v)) <= tol * scale && std::abs(lorentz::inner(v, w) + 1.0) <= tol * scale;
}

LorentzVector SpaceForm::normalize(const LorentzVector& v) const {
  const double c = lorentz::inner(v, w);
  if (std::abs(c) <= 1e-14 * v.norm() * w.norm()) throw DegeneracyError("point at infinity of the space form");
  return v / (-c);
}

void SpaceFormPair::validate() const {
  if (!lorentz::is_null(v0) || !lorentz::is_null(vinf)) throw GeometryError("space form pair must be null");
  if (std::abs(lorentz::inner(v0, vinf) + 1.0) > 1e-10) throw GeometryError("space form pair needs (v0, v_inf) = -1");
}

LorentzVector SpaceFormPair::project(const LorentzVector& x) const {
  return x + lorentz::inner(x, vinf) * v0 + lorentz::inner(x, v0) * vinf;
}

namespace lorentz {

LorentzVector lift_to_cone(const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  LorentzVector out = from_euclidean(x);
  out(0) = 1.0;
  out(n + 1) = 0.5 * x.squaredNorm();
  return out;
}

LorentzVector lift_to_cone(const SpaceFormPair& pair, const LorentzVector& x) {
  return pair.v0 + x + 0.5 * inner(x, x) * pair.vinf;
}

Eigen::VectorXd stereo_project(const LorentzVector& F) {
  const int n = euclidean_dim(F);
  const double c = -inner(F, vinf(n));
  if (std::abs(c) <= 1e-14 * F.norm()) throw DegeneracyError("point at infinity: (F, v_inf) = 0");
  return F.segment(1, n) / c;
}

LorentzVector stereo_project(const SpaceFormPair& pair, const LorentzVector& F) {
  const double c = -inner(F, pair.vinf);
  if (std::abs(c) <= 1e-14 * F.norm()) throw DegeneracyError("point at infinity: (F, v_inf) = 0");
  return pair.project(F / c);
}

OrthogonalMap gauge_map(const LorentzVector& dir, const LorentzVector& hat_dir, double c) {
  require_same_dim(dir, hat_dir);
  if (c == 0.0 || !std::isfinite(c)) throw GeometryError("gauge_map: scale must be non-zero");
  if (!is_null(dir) || !is_null(hat_dir)) throw GeometryError("gauge_map: directions must be null");
  const double pairing = inner(dir, hat_dir);
  if (std::abs(pairing) <= 1e-12 * dir.norm() * hat_dir.norm())
    throw DegeneracyError("gauge_map: degenerate pair (directions are orthogonal)");
  const int n = euclidean_dim(dir);
  // pi_hat x = (x, dir)/(hat, dir) hat ; pi x = (x, hat)/(dir, hat) dir
  const Eigen::MatrixXd pi_hat = hat_dir * apply_gram(dir).transpose() / pairing;
  const Eigen::MatrixXd pi = dir * apply_gram(hat_dir).transpose() / pairing;
  return {Eigen::MatrixXd::Identity(n + 2, n + 2) + (c - 1.0) * pi_hat + (1.0 / c - 1.0) * pi};
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  const Eigen::Index dim = a.rows();
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd scaled = a / std::ldexp(1.0, squarings);

  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(dim, dim);
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-18 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

OrthogonalMap exp_bivector(const Bivector& b) {
  OrthogonalMap out{expm(b.m)};
  if (out.orthogonality_residual() > 1e-12) {
    // One Newton-Schulz pass towards M^T G M = G.
    const Eigen::MatrixXd g = gram(out.dim() - 2);
    const Eigen::MatrixXd defect = Eigen::MatrixXd::Identity(out.dim(), out.dim()) - g * out.m.transpose() * g * out.m;
    out.m = out.m * (Eigen::MatrixXd::Identity(out.dim(), out.dim()) + 0.5 * defect);
  }
  return out;
}

double line_angle(const LorentzVector& a, const LorentzVector& b) {
  require_same_dim(a, b);
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return M_PI / 2;
  // chord form keeps resolution for tiny angles
  const Eigen::VectorXd r = a / na - (a.dot(b) >= 0 ? 1.0 : -1.0) * b / nb;
  return 2.0 * std::asin(std::min(1.0, 0.5 * r.norm()));
}

}  // namespace lorentz
}  // namespace isothermic
