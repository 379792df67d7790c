#pragma once

// Kernel-weighted local-linear M-estimation of the link and its derivative at
// a point of the index line:
//
//   (a, b) = argmin sum_i psi(Y_i - a - b (U_i - u)) K_h(U_i - u)
//
// The least-squares case has a closed form; other losses run IRLS from it.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

#include "sphindex/kernel.hpp"
#include "sphindex/loss.hpp"
#include "sphindex/model.hpp"

namespace sphindex {

struct LocalFitOptions {
  int max_iter = 100;
  double tol = 1e-8;             // relative IRLS step
  // A degenerate window falls back to the nearest-neighbour bandwidth, then
  // grows geometrically.
  double widen_factor = 1.5;
  int max_widen = 5;
  double max_condition = 1e3;    // of the 2x2 moment matrix in t/h
  bool record_trace = false;     // keep the IRLS objective per iteration
  // Try a Newton step first for smooth losses (ESL, Huber); the reweighted
  // step is used whenever Newton fails to decrease the objective.
  bool newton = true;
};

struct LocalFit {
  Eigen::VectorXd a;  // link estimate at u
  Eigen::VectorXd b;  // derivative estimate at u
  double effective_weight_sum = 0.0;
  bool converged = true;
  int iterations = 0;
  double bandwidth = 0.0;  // bandwidth actually used after any widening
  std::vector<double> objective_trace;
};

struct LocalWindow;

// Index values and responses sorted along the index, ready for repeated local
// fits. Immutable after construction and safe to share between threads.
class LocalSmoother {
 public:
  LocalSmoother(const Eigen::Ref<const Eigen::VectorXd>& U, const Eigen::Ref<const Eigen::MatrixXd>& Y,
                KernelSpec kernel = {}, LocalFitOptions options = {});

  // `exclude` is an original row index left out of the sums, or -1.
  LocalFit fit(double u, double h, const LossSpec& loss, std::ptrdiff_t exclude = -1,
               const LocalFit* init = nullptr) const;
  LocalFit fit_ls(double u, double h, std::ptrdiff_t exclude = -1) const {
    return fit(u, h, LossSpec::ls(), exclude);
  }

  std::size_t size() const noexcept { return u_.size(); }
  int dim() const noexcept { return d_; }
  double index(std::size_t original_row) const { return u_[rank_[original_row]]; }
  double min_index() const noexcept { return u_.front(); }
  double max_index() const noexcept { return u_.back(); }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  const LocalFitOptions& options() const noexcept { return options_; }

 private:
  void gather(LocalWindow& win, double u, double h, std::ptrdiff_t skip) const;
  bool newton_step(const LocalWindow& win, const LossSpec& loss, const Eigen::VectorXd& a, const Eigen::VectorXd& bs,
                   Eigen::VectorXd& a_new, Eigen::VectorXd& bs_new) const;
  bool solve_window(const LocalWindow& win, const double* weights, double* a, double* b_scaled,
                    double* s0) const;

  std::vector<double> u_;           // sorted index values
  std::vector<double> y_;           // responses in sorted order, row-major n x d
  std::vector<std::size_t> order_;  // sorted position -> original row
  std::vector<std::size_t> rank_;   // original row -> sorted position
  KernelSpec kernel_;
  LocalFitOptions options_;
  int d_ = 0;
};

LocalFit local_linear_ls(double u, const Eigen::VectorXd& U, const Eigen::MatrixXd& Y, double h,
                         const KernelSpec& kernel, const LocalFitOptions& options = {});

LocalFit local_linear_m(double u, const Eigen::VectorXd& U, const Eigen::MatrixXd& Y, double h,
                        const KernelSpec& kernel, const LossSpec& loss,
                        const std::optional<LocalFit>& init = std::nullopt,
                        const LocalFitOptions& options = {});

struct LooFits {
  Eigen::MatrixXd fits;     // row i: fit at U_i without observation i
  std::vector<char> valid;  // 0 where the window was degenerate
  std::size_t excluded = 0;
  std::size_t unconverged = 0;
};

LooFits loo_fits(const LocalSmoother& smoother, double h, const LossSpec& loss);
LooFits loo_fits(const Eigen::VectorXd& U, const Eigen::MatrixXd& Y, double h, const KernelSpec& kernel,
                 const LossSpec& loss, const LocalFitOptions& options = {});

// Mean loss of the leave-one-out residuals at the index values X beta(theta).
struct CriterionValue {
  double value = 0.0;
  std::size_t excluded = 0;
};

CriterionValue evaluate_criterion(const IndexParam& theta, double h, const Dataset& data, const LossSpec& loss,
                                  const KernelSpec& kernel, const LocalFitOptions& options = {});

double criterion(const IndexParam& theta, double h, const Dataset& data, const LossSpec& loss,
                 const KernelSpec& kernel);

}  // namespace sphindex
