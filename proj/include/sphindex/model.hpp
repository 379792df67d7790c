#pragma once

// Core value types of the single-index model: the index parameter theta with
// its unit direction beta(theta), and the paired (predictor, response) sample.

#include <Eigen/Dense>

#include <vector>

#include "sphindex/sphere.hpp"

namespace sphindex {

// theta in the open unit ball of R^{p-1}.
class IndexParam {
 public:
  explicit IndexParam(Eigen::VectorXd theta);

  const Eigen::VectorXd& theta() const noexcept { return theta_; }
  Eigen::Index size() const noexcept { return theta_.size(); }

 private:
  Eigen::VectorXd theta_;
};

// beta(theta) = (sqrt(1 - |theta|^2), theta).
Eigen::VectorXd beta_from_theta(const IndexParam& theta);

// Drops the first coordinate of a unit beta with beta_1 > 0.
IndexParam theta_from_beta(const Eigen::VectorXd& beta, double unit_tol = 1e-8);

// d beta / d theta, p x (p-1): top row -theta^T / sqrt(1 - |theta|^2), identity below.
Eigen::MatrixXd jacobian_beta(const IndexParam& theta);

// n x p predictors paired with n unit-vector responses stored as rows.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd X, Eigen::MatrixXd Y, double unit_tol = 1e-8);

  const Eigen::MatrixXd& X() const noexcept { return X_; }
  const Eigen::MatrixXd& Y() const noexcept { return Y_; }
  Eigen::Index n() const noexcept { return X_.rows(); }
  Eigen::Index p() const noexcept { return X_.cols(); }
  Eigen::Index d() const noexcept { return Y_.cols(); }
  UnitVectord response(Eigen::Index i) const;

  // Rows in `rows`, in that order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
  Dataset with_responses(Eigen::MatrixXd Y) const { return Dataset(X_, std::move(Y)); }

 private:
  Eigen::MatrixXd X_;
  Eigen::MatrixXd Y_;
};

}  // namespace sphindex
