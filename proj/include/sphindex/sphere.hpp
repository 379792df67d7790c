#pragma once

// Geometry of the unit sphere S^{d-1} under the identity embedding.
//
// Everything here is a pure function of its arguments and is templated on the
// scalar type so the same code runs in double and long double.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "sphindex/error.hpp"

namespace sphindex {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct GeometryTolerances {
  Scalar norm_eps = Scalar(1e-12);       // below this a vector counts as zero
  Scalar antipodal_eps = Scalar(1e-9);   // a.b < -1 + eps counts as antipodal
  Scalar unit_tol = Scalar(1e-10);       // | |v| - 1 | allowed for UnitVector
  Scalar tangent_tol = Scalar(1e-8);     // |base.v| allowed for TangentVector
  Scalar base_match_tol = Scalar(1e-12);
};

// A point on S^{d-1}, d >= 3.
template <typename Scalar>
class UnitVector {
 public:
  using VectorType = Vec<Scalar>;

  // Validates the norm; use project_to_sphere() to normalise arbitrary input.
  template <typename Derived>
  explicit UnitVector(const Eigen::MatrixBase<Derived>& coords,
                      const GeometryTolerances<Scalar>& tol = {})
      : coords_(coords) {
    if (coords_.size() < 3) {
      throw Error(ErrorCode::DimensionMismatch,
                  "unit vectors live on S^{d-1} with d >= 3, got d = " +
                      std::to_string(coords_.size()));
    }
    using std::abs;
    if (!coords_.allFinite() || abs(coords_.norm() - Scalar(1)) > tol.unit_tol) {
      throw Error(ErrorCode::NotUnitVector, "coordinates do not have unit norm");
    }
  }

  const VectorType& coords() const noexcept { return coords_; }
  Eigen::Index dim() const noexcept { return coords_.size(); }
  Scalar operator[](Eigen::Index i) const { return coords_[i]; }
  Scalar dot(const UnitVector& other) const { return coords_.dot(other.coords_); }

  static UnitVector basis(Eigen::Index d, Eigen::Index k) {
    return UnitVector(VectorType::Unit(d, k));
  }

 private:
  VectorType coords_;
};

// A vector in the tangent space at `base`.
template <typename Scalar>
class TangentVector {
 public:
  using VectorType = Vec<Scalar>;

  template <typename Derived>
  TangentVector(UnitVector<Scalar> base, const Eigen::MatrixBase<Derived>& vec,
                const GeometryTolerances<Scalar>& tol = {})
      : base_(std::move(base)), vec_(vec) {
    if (vec_.size() != base_.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "tangent vector and base differ in dimension");
    }
    using std::abs;
    if (abs(base_.coords().dot(vec_)) > tol.tangent_tol) {
      throw Error(ErrorCode::NotUnitVector, "vector is not tangent at its base point");
    }
  }

  static TangentVector zero(const UnitVector<Scalar>& base) {
    return TangentVector(base, VectorType::Zero(base.dim()));
  }

  const UnitVector<Scalar>& base() const noexcept { return base_; }
  const VectorType& vec() const noexcept { return vec_; }
  Scalar norm() const { return vec_.norm(); }

 private:
  UnitVector<Scalar> base_;
  VectorType vec_;
};

using UnitVectord = UnitVector<double>;
using TangentVectord = TangentVector<double>;

template <typename Derived>
UnitVector<typename Derived::Scalar> project_to_sphere(
    const Eigen::MatrixBase<Derived>& v,
    const GeometryTolerances<typename Derived::Scalar>& tol = {}) {
  using Scalar = typename Derived::Scalar;
  const Scalar n = v.norm();
  if (!(n > tol.norm_eps)) {
    throw Error(ErrorCode::NearZeroVector, "cannot project a (near-)zero vector onto the sphere");
  }
  Vec<Scalar> u = v / n;
  return UnitVector<Scalar>(u, tol);
}

// Ambient differential of v -> v/|v|: (I - P P^T)/|v| with P = v/|v|.
template <typename Derived>
Mat<typename Derived::Scalar> projection_differential(
    const Eigen::MatrixBase<Derived>& v,
    const GeometryTolerances<typename Derived::Scalar>& tol = {}) {
  using Scalar = typename Derived::Scalar;
  const Scalar n = v.norm();
  if (!(n > tol.norm_eps)) {
    throw Error(ErrorCode::NearZeroVector, "projection differential undefined at zero");
  }
  const Vec<Scalar> p = v / n;
  const Eigen::Index d = v.size();
  return (Mat<Scalar>::Identity(d, d) - p * p.transpose()) / n;
}

// Orthonormal basis of the tangent space at mu, taken from the Householder
// reflection mapping mu to -sign(mu_1) e_1. Columns 2..d of the reflector are
// returned, so mu = e_1 yields {e_2, ..., e_d}.
template <typename Scalar>
Mat<Scalar> tangent_basis(const UnitVector<Scalar>& mu) {
  const Eigen::Index d = mu.dim();
  Vec<Scalar> w = mu.coords();
  const Scalar s = mu[0] >= Scalar(0) ? Scalar(1) : Scalar(-1);
  w[0] += s;
  Mat<Scalar> h = Mat<Scalar>::Identity(d, d) - (Scalar(2) / w.squaredNorm()) * (w * w.transpose());
  return h.rightCols(d - 1);
}

// Great-circle distance in [0, pi]. Equivalent to acos(clamp(a.b)) but keeps
// full relative accuracy for nearly equal or nearly antipodal pairs.
template <typename Scalar>
Scalar geodesic_distance(const UnitVector<Scalar>& a, const UnitVector<Scalar>& b) {
  using std::atan2;
  const Scalar c = std::clamp(a.dot(b), Scalar(-1), Scalar(1));
  const Scalar s = (b.coords() - c * a.coords()).norm();
  return atan2(s, c);
}

template <typename Scalar>
TangentVector<Scalar> riemannian_log(const UnitVector<Scalar>& base, const UnitVector<Scalar>& y,
                                     const GeometryTolerances<Scalar>& tol = {}) {
  const Scalar c = base.dot(y);
  if (c < Scalar(-1) + tol.antipodal_eps) {
    throw Error(ErrorCode::AntipodalPoint, "logarithm undefined at the antipode of the base point");
  }
  Vec<Scalar> v = y.coords() - c * base.coords();
  // Re-orthogonalise once; the residual component along base is O(eps).
  v -= base.coords().dot(v) * base.coords();
  const Scalar s = v.norm();
  if (s == Scalar(0)) return TangentVector<Scalar>::zero(base);
  using std::atan2;
  const Scalar angle = atan2(s, std::clamp(c, Scalar(-1), Scalar(1)));
  return TangentVector<Scalar>(base, (angle / s) * v, tol);
}

template <typename Scalar>
UnitVector<Scalar> riemannian_exp(const UnitVector<Scalar>& base, const TangentVector<Scalar>& t,
                                  const GeometryTolerances<Scalar>& tol = {}) {
  if (t.base().dim() != base.dim() ||
      (t.base().coords() - base.coords()).template lpNorm<Eigen::Infinity>() > tol.base_match_tol) {
    throw Error(ErrorCode::BaseMismatch, "tangent vector is attached to a different base point");
  }
  const Scalar angle = t.norm();
  if (angle == Scalar(0)) return base;
  using std::cos;
  using std::sin;
  Vec<Scalar> y = cos(angle) * base.coords() + (sin(angle) / angle) * t.vec();
  y /= y.norm();
  return UnitVector<Scalar>(y, tol);
}

// Transport along the minimising geodesic from t.base() to `to`.
template <typename Scalar>
TangentVector<Scalar> parallel_transport(const TangentVector<Scalar>& t, const UnitVector<Scalar>& to,
                                         const GeometryTolerances<Scalar>& tol = {}) {
  const auto& a = t.base().coords();
  const auto& b = to.coords();
  const Scalar c = a.dot(b);
  if (c < Scalar(-1) + tol.antipodal_eps) {
    throw Error(ErrorCode::AntipodalPoint, "parallel transport to the antipode is not unique");
  }
  Vec<Scalar> v = t.vec() - (b.dot(t.vec()) / (Scalar(1) + c)) * (a + b);
  v -= b.dot(v) * b;
  return TangentVector<Scalar>(to, v, tol);
}

// The rotation taking a to b that fixes the orthogonal complement of span{a, b}.
template <typename Scalar>
Mat<Scalar> rotation_aligning(const UnitVector<Scalar>& a, const UnitVector<Scalar>& b,
                              const GeometryTolerances<Scalar>& tol = {}) {
  const Scalar c = a.dot(b);
  if (c < Scalar(-1) + tol.antipodal_eps) {
    throw Error(ErrorCode::AntipodalPoint, "no unique minimal rotation between antipodal points");
  }
  const Eigen::Index d = a.dim();
  const Mat<Scalar> k = b.coords() * a.coords().transpose() - a.coords() * b.coords().transpose();
  return Mat<Scalar>::Identity(d, d) + k + (k * k) / (Scalar(1) + c);
}

}  // namespace sphindex
