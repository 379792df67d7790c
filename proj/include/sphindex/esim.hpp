#pragma once

// Joint estimation of the index direction and bandwidth by minimising the
// leave-one-out criterion, extrinsic fitted values, prediction and accuracy
// metrics.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "sphindex/error.hpp"
#include "sphindex/kernel.hpp"
#include "sphindex/local_fit.hpp"
#include "sphindex/loss.hpp"
#include "sphindex/model.hpp"

namespace sphindex {

struct FitConfig {
  KernelSpec kernel;
  LocalFitOptions local;

  // Bandwidth box as multiples of n^{-1/5} sd(U_theta), re-scaled per theta.
  double h_lower = 0.1;
  double h_upper = 3.0;

  // Multi-start: e_1 and (e_1 +- e_j)/sqrt(2), plus seeded draws in Theta.
  bool coordinate_starts = true;
  int random_starts = 5;
  // For losses other than LS, search from every start rather than only the
  // least-squares estimate.
  bool robust_multistart = true;
  // Warm start. When `warm_start_only` is set, this is the single start.
  std::optional<Eigen::VectorXd> initial_theta;
  std::optional<double> initial_h;
  bool warm_start_only = false;

  // Each start first runs a coarse simplex search; the best end point is then
  // polished with the fine tolerances.
  int coarse_evaluations = 100;
  double coarse_f_tol = 1e-4;
  double coarse_x_tol = 2e-2;
  int max_evaluations = 600;
  double f_tol = 1e-8;
  double x_tol = 1e-5;

  // ESL scale: fixed, or re-solved from leave-one-out residuals at `delta`.
  std::optional<double> lambda;
  std::optional<double> initial_lambda;  // first value of the re-solved scale on warm starts
  double outer_f_tol = 1e-6;  // simplex tolerances while lambda is still moving
  double outer_x_tol = 1e-3;
  double delta = 0.4;
  int max_outer = 10;
  double lambda_rel_tol = 0.01;

  // predict() refuses indices further than this many bandwidths outside the
  // training index range.
  double extrapolation_guard = 2.0;

  std::uint64_t seed = 1;
  int jobs = 1;
};

struct FitDiagnostics {
  std::vector<double> trace;         // best criterion value after each stage
  std::vector<double> lambda_trace;  // ESL scale per outer round
  std::size_t excluded_rows = 0;     // degenerate leave-one-out windows at the optimum
  std::size_t unconverged_local = 0;
  int starts = 0;
  int restarts = 0;
  int evaluations = 0;
  int outer_rounds = 0;
  bool converged = false;  // the last simplex search met its tolerances
};

struct FitResult {
  IndexParam theta_hat{Eigen::VectorXd()};
  Eigen::VectorXd beta_hat;
  double h_hat = 0.0;
  std::optional<double> lambda_hat;
  double criterion_value = 0.0;
  Eigen::VectorXd fitted_index;   // X beta_hat
  Eigen::MatrixXd fitted_mu;      // ambient link estimate at each fitted index
  Eigen::MatrixXd fitted_sphere;  // its projection onto the sphere
  LossSpec loss;                  // with the final lambda for ESL
  KernelSpec kernel;
  LocalFitOptions local;
  double extrapolation_guard = 2.0;
  FitDiagnostics diagnostics;
};

FitResult fit(const Dataset& data, const LossSpec& loss, const FitConfig& config = {});

// Local fit of the link at `u` from the training sample, with the fitted loss.
LocalFit link_at(const FitResult& fit, const LocalSmoother& smoother, double u);
LocalSmoother training_smoother(const FitResult& fit, const Dataset& data);

struct Prediction {
  Eigen::MatrixXd Y;  // m x d, NaN rows where errors[i] is set
  std::vector<std::optional<ErrorCode>> errors;
  bool ok() const;
};

Prediction predict(const FitResult& fit, const Dataset& data, const Eigen::MatrixXd& X_new);

struct Metrics {
  double bias = 0.0;
  double mse = 0.0;
  double mspe = 0.0;
};

// arccos(beta0 . beta_hat), clamped.
double index_bias(const Eigen::VectorXd& beta0, const Eigen::VectorXd& beta_hat);
// Mean squared great-circle distance between matching rows.
double mean_squared_geodesic(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Y_hat);

Metrics metrics(const Eigen::VectorXd& beta0, const FitResult& fit, const Eigen::MatrixXd& Y,
                const Eigen::MatrixXd& Y_hat, const Eigen::MatrixXd& Y_test, const Eigen::MatrixXd& Y_test_hat);

// Rows of Y minus leave-one-out fits at (theta, h); degenerate rows dropped.
Eigen::MatrixXd loo_residuals(const Dataset& data, const IndexParam& theta, double h, const LossSpec& loss,
                              const KernelSpec& kernel, const LocalFitOptions& options = {});

}  // namespace sphindex
