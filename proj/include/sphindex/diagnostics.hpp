#pragma once

// Plug-in estimates of the asymptotic building blocks of the index estimator
// (W0, M0, F, G and the conditional moments of X given the index), the
// influence and standardized influence functions, and empirical gross-error
// sensitivities across concentrations.

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sphindex/esim.hpp"
#include "sphindex/sampling.hpp"

namespace sphindex {

// Bandwidths for the kernel regressions; unset entries use the fitted h.
struct NuisanceConfig {
  std::optional<double> h_mean_x;
  std::optional<double> h_cov_x;
  std::optional<double> h_F;
  std::optional<double> h_G;
  std::optional<double> h_density;
  // Fraction of the smallest and of the largest fitted index values left out
  // of the sample averages for W0 and M0; local-linear derivative estimates
  // at the extremes rest on a handful of points.
  double trim = 0.025;
  double ridge = 1e-8;           // added to the conditional covariance of X
  double max_condition = 1e12;   // for W0 and M0
};

class NuisanceEstimates {
 public:
  NuisanceEstimates(const FitResult& fit, const Dataset& data, const LossSpec& loss, const NuisanceConfig& config);

  // Local fit of the link and its derivative at u.
  LocalFit link(double u) const;
  Eigen::VectorXd mu(double u) const;
  Eigen::VectorXd mu_prime(double u) const;
  Eigen::VectorXd cond_mean_x(double u) const;
  Eigen::MatrixXd cond_cov_x(double u) const;
  Eigen::MatrixXd F_hat(double u) const;
  Eigen::MatrixXd G_hat(double u) const;
  double density_u(double u) const;

  const Eigen::MatrixXd& W0() const noexcept { return W0_; }
  const Eigen::MatrixXd& M0() const noexcept { return M0_; }
  // W0^{-1} M0 W0^{-1}
  Eigen::MatrixXd dispersion() const;
  // Asymptotic covariance of the link estimate at u in tangent coordinates at
  // mu(u)/|mu(u)|: omega_0 / f(u) B^T F^{-1} G F^{-1} B (without the 1/(nh) rate).
  Eigen::MatrixXd link_dispersion(double u) const;

  const Eigen::MatrixXd& jacobian() const noexcept { return J_; }
  const Eigen::MatrixXd& W0_inverse() const noexcept { return W0_inv_; }
  const Eigen::MatrixXd& M0_inverse() const noexcept { return M0_inv_; }
  const LossSpec& loss() const noexcept { return loss_; }
  const Eigen::VectorXd& beta() const noexcept { return beta_; }
  double min_index() const noexcept { return u_min_; }
  double max_index() const noexcept { return u_max_; }
  void check_index(double u) const;
  // Training rows whose fitted index lies inside the trimmed range.
  std::vector<Eigen::Index> interior_rows(double trim) const;

 private:
  // Normalised kernel weights at u, widening the bandwidth if the window is empty.
  Eigen::VectorXd nw_weights(double u, double h) const;

  std::shared_ptr<const LocalSmoother> smoother_;
  LossSpec loss_;
  KernelSpec kernel_;
  double h_ = 0.0;
  NuisanceConfig config_;
  Eigen::VectorXd beta_;
  Eigen::MatrixXd J_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd U_;
  Eigen::MatrixXd psi1_;               // n x d, loss gradients at the fitted residuals
  std::vector<Eigen::MatrixXd> psi2_;  // loss Hessians at the fitted residuals
  Eigen::MatrixXd W0_, M0_, W0_inv_, M0_inv_;
  double u_min_ = 0.0, u_max_ = 0.0;
};

NuisanceEstimates estimate_nuisance(const FitResult& fit, const Dataset& data, const LossSpec& loss,
                                    const NuisanceConfig& config = {});

// Influence of a contaminating point (x, y), a (p-1)-vector.
Eigen::VectorXd influence(const Eigen::VectorXd& x, const UnitVectord& y, const NuisanceEstimates& nuis);
// Influence standardized by the dispersion matrix, via M0.
double standardized_influence(const Eigen::VectorXd& x, const UnitVectord& y, const NuisanceEstimates& nuis);

// Candidate contamination responses at each training predictor: the
// orthogonal contaminant of the fitted mean, its negation and the antipode of
// the fitted mean. The sweep adds points at log-spaced geodesic angles from
// the fitted mean along +- the tangential direction of the link derivative.
struct SgesGrid {
  bool sweep = false;
  int sweep_angles = 40;
  double min_angle = 1e-3;
  double max_angle = 1.5707963267948966;
  double trim = 0.025;  // fraction of extreme index values skipped at each end
};

struct SensitivityValue {
  double ges = 0.0;
  double sges = 0.0;
};

SensitivityValue grid_sensitivity(const Dataset& data, const NuisanceEstimates& nuis, const SgesGrid& grid = {});

struct SgesConfig {
  std::size_t n = 800;
  MeanCurve curve = MeanCurve::Spiral61;
  Eigen::VectorXd beta0;  // defaults to (1, -1, 1)/sqrt(3)
  FitConfig fit;
  NuisanceConfig nuisance;
  SgesGrid grid;
  std::uint64_t seed = 1;
};

struct SgesRow {
  double kappa = 0.0;
  LossFamily loss = LossFamily::LS;
  double ges = 0.0;
  double sges = 0.0;
};

// One freshly simulated and fitted model per concentration.
std::vector<SgesRow> empirical_sges(const LossSpec& loss, const std::vector<double>& kappas, const SgesConfig& config);

std::string sges_csv(const std::vector<SgesRow>& rows);

}  // namespace sphindex
