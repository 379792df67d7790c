#pragma once

// Rotated-residual bootstrap for the index direction. Residuals are rotated
// so every fitted value sits at a common pole, log-mapped there, resampled,
// transported back to the fitted values and exponentiated.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "sphindex/esim.hpp"

namespace sphindex {

struct RotatedResidualSet {
  UnitVectord pole = UnitVectord::basis(3, 0);
  Eigen::MatrixXd residuals;  // n x d, row i tangent at the pole
  std::vector<char> valid;    // 0 where the residual is undefined (antipodal)
  std::vector<Eigen::Index> excluded;
};

RotatedResidualSet rotated_residuals(const FitResult& fit, const Dataset& data);

// Bootstrap responses: row i is exp at fitted_i of residual draw[i]
// transported from the pole. Rows whose fitted value is antipodal to the pole
// keep the observed response.
Eigen::MatrixXd bootstrap_responses(const FitResult& fit, const Dataset& data, const RotatedResidualSet& residuals,
                                    const std::vector<Eigen::Index>& draw);

struct BootstrapConfig {
  FitConfig fit;               // base settings for the refits
  int refit_evaluations = 200; // simplex budget per refit, warm-started at the fit
  bool recenter = false;       // subtract the mean residual before resampling
  double max_failure_rate = 0.2;
  int jobs = 1;
};

struct BootstrapResult {
  Eigen::MatrixXd replicates;  // successful refits, one beta per row
  Eigen::VectorXd se;
  int B = 0;
  std::uint64_t seed = 0;
  int failures = 0;
  bool recentered = false;
  std::size_t excluded_residuals = 0;
};

BootstrapResult bootstrap_se(const FitResult& fit, const Dataset& data, const LossSpec& loss, int B,
                             std::uint64_t seed, const BootstrapConfig& config = {});

// Per-column sample standard deviation (divisor n - 1).
Eigen::VectorXd column_sd(const Eigen::MatrixXd& draws);

}  // namespace sphindex
