#pragma once

// Derivative-free simplex minimisation (Nelder and Mead) with one automatic
// restart around the best vertex. Constraints are the caller's business: map
// the free coordinates into the feasible set inside the objective.

#include <Eigen/Dense>

#include <functional>

namespace sphindex {

struct NelderMeadOptions {
  int max_evaluations = 600;
  double f_tol = 1e-8;  // relative spread of vertex values
  double x_tol = 1e-6;  // simplex diameter
  int restarts = 1;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  int restarts = 0;
  bool converged = false;
};

// `steps` gives the initial edge length along each coordinate. Objective values
// may be +inf to mark infeasible points.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& steps, const NelderMeadOptions& options = {});

}  // namespace sphindex
