#include "sphindex/model.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace sphindex {

IndexParam::IndexParam(Eigen::VectorXd theta) : theta_(std::move(theta)) {
  if (!theta_.allFinite() || !(theta_.squaredNorm() < 1.0)) {
    throw Error(ErrorCode::OutsideTheta, "index parameter must satisfy |theta|^2 < 1");
  }
}

Eigen::VectorXd beta_from_theta(const IndexParam& theta) {
  const auto& t = theta.theta();
  Eigen::VectorXd beta(t.size() + 1);
  beta[0] = std::sqrt(1.0 - t.squaredNorm());
  beta.tail(t.size()) = t;
  return beta;
}

IndexParam theta_from_beta(const Eigen::VectorXd& beta, double unit_tol) {
  if (beta.size() < 2 || !beta.allFinite() || std::abs(beta.norm() - 1.0) > unit_tol) {
    throw Error(ErrorCode::InvalidBeta, "beta must be a unit vector");
  }
  if (!(beta[0] > 0.0)) throw Error(ErrorCode::InvalidBeta, "beta must have a positive first coordinate");
  return IndexParam(beta.tail(beta.size() - 1));
}

Eigen::MatrixXd jacobian_beta(const IndexParam& theta) {
  const auto& t = theta.theta();
  const double sq = t.squaredNorm();
  if (!(sq < 1.0 - 1e-10)) {
    throw Error(ErrorCode::BoundarySingularity, "Jacobian is singular at the boundary of the parameter space");
  }
  const Eigen::Index q = t.size();
  Eigen::MatrixXd J(q + 1, q);
  J.row(0) = -t.transpose() / std::sqrt(1.0 - sq);
  J.bottomRows(q).setIdentity();
  return J;
}

Dataset::Dataset(Eigen::MatrixXd X, Eigen::MatrixXd Y, double unit_tol) : X_(std::move(X)), Y_(std::move(Y)) {
  if (X_.rows() != Y_.rows()) {
    throw Error(ErrorCode::InvalidDataset, "predictors and responses have different row counts");
  }
  if (X_.cols() < 1 || Y_.cols() < 3) {
    throw Error(ErrorCode::InvalidDataset, "need p >= 1 predictors and responses of dimension d >= 3");
  }
  if (X_.rows() < X_.cols() + 2) {
    throw Error(ErrorCode::InvalidDataset, "need n >= p + 2 observations, got n = " + std::to_string(X_.rows()));
  }
  if (!X_.allFinite()) throw Error(ErrorCode::InvalidDataset, "predictors must be finite");
  for (Eigen::Index i = 0; i < Y_.rows(); ++i) {
    if (!Y_.row(i).allFinite() || std::abs(Y_.row(i).norm() - 1.0) > unit_tol) {
      throw Error(ErrorCode::InvalidDataset, "response row " + std::to_string(i) + " is not a unit vector");
    }
  }
}

UnitVectord Dataset::response(Eigen::Index i) const {
  Eigen::VectorXd y = Y_.row(i).transpose();
  return project_to_sphere(y);
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), p());
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(rows.size()), d());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    X.row(static_cast<Eigen::Index>(k)) = X_.row(rows[k]);
    Y.row(static_cast<Eigen::Index>(k)) = Y_.row(rows[k]);
  }
  return Dataset(std::move(X), std::move(Y));
}

}  // namespace sphindex
