#include "sphindex/bootstrap.hpp"

#include <cmath>
#include <optional>

#include "sphindex/parallel.hpp"
#include "sphindex/random.hpp"

namespace sphindex {

RotatedResidualSet rotated_residuals(const FitResult& fit, const Dataset& data) {
  if (fit.fitted_sphere.rows() != data.n() || fit.fitted_sphere.cols() != data.d()) {
    throw Error(ErrorCode::DimensionMismatch, "fit does not belong to this dataset");
  }
  RotatedResidualSet out;
  out.pole = UnitVectord::basis(data.d(), 0);
  out.residuals = Eigen::MatrixXd::Zero(data.n(), data.d());
  out.valid.assign(static_cast<std::size_t>(data.n()), 0);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    try {
      const UnitVectord fitted(fit.fitted_sphere.row(i).transpose());
      const Eigen::MatrixXd R = rotation_aligning(fitted, out.pole);
      const UnitVectord rotated = project_to_sphere(Eigen::VectorXd(R * data.Y().row(i).transpose()));
      out.residuals.row(i) = riemannian_log(out.pole, rotated).vec().transpose();
      out.valid[static_cast<std::size_t>(i)] = 1;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AntipodalPoint) throw;
      out.excluded.push_back(i);
    }
  }
  return out;
}

Eigen::MatrixXd bootstrap_responses(const FitResult& fit, const Dataset& data, const RotatedResidualSet& residuals,
                                    const std::vector<Eigen::Index>& draw) {
  if (static_cast<Eigen::Index>(draw.size()) != data.n()) {
    throw Error(ErrorCode::DimensionMismatch, "one residual draw per observation is needed");
  }
  Eigen::MatrixXd Y(data.n(), data.d());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const UnitVectord fitted(fit.fitted_sphere.row(i).transpose());
    const TangentVectord v(residuals.pole, residuals.residuals.row(draw[static_cast<std::size_t>(i)]).transpose());
    try {
      Y.row(i) = riemannian_exp(fitted, parallel_transport(v, fitted)).coords().transpose();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AntipodalPoint) throw;
      Y.row(i) = data.Y().row(i);
    }
  }
  return Y;
}

Eigen::VectorXd column_sd(const Eigen::MatrixXd& draws) {
  if (draws.rows() < 2) return Eigen::VectorXd::Zero(draws.cols());
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Eigen::MatrixXd c = draws.rowwise() - mean;
  return (c.array().square().colwise().sum() / static_cast<double>(draws.rows() - 1)).sqrt().transpose();
}

BootstrapResult bootstrap_se(const FitResult& fit, const Dataset& data, const LossSpec& loss, int B,
                             std::uint64_t seed, const BootstrapConfig& config) {
  if (B < 2) throw Error(ErrorCode::ConfigError, "the bootstrap needs B >= 2");
  RotatedResidualSet res = rotated_residuals(fit, data);
  std::vector<Eigen::Index> pool;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (res.valid[static_cast<std::size_t>(i)]) pool.push_back(i);
  }
  if (pool.empty()) throw Error(ErrorCode::RefitFailure, "no usable residuals");
  if (config.recenter) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(data.d());
    for (Eigen::Index i : pool) mean += res.residuals.row(i);
    mean /= static_cast<double>(pool.size());
    for (Eigen::Index i : pool) res.residuals.row(i) -= mean;
  }

  FitConfig fc = config.fit;
  fc.initial_theta = fit.theta_hat.theta();
  fc.initial_h = fit.h_hat;
  fc.initial_lambda = fit.lambda_hat;
  fc.warm_start_only = true;
  fc.max_evaluations = config.refit_evaluations;
  fc.jobs = 1;

  std::vector<std::optional<Eigen::VectorXd>> betas(static_cast<std::size_t>(B));
  parallel_for(static_cast<std::size_t>(B), config.jobs, [&](std::size_t b) {
    Rng rng = make_rng(seed, b);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<Eigen::Index> draw(static_cast<std::size_t>(data.n()));
    for (auto& k : draw) k = pool[pick(rng)];
    try {
      const Dataset boot = data.with_responses(bootstrap_responses(fit, data, res, draw));
      FitConfig local = fc;
      local.seed = split_seed(seed, 1'000'000 + b);
      Eigen::VectorXd beta = sphindex::fit(boot, loss, local).beta_hat;
      if (beta[0] <= 0.0) beta = -beta;
      betas[b] = std::move(beta);
    } catch (const Error&) {
      betas[b].reset();
    }
  });

  BootstrapResult out;
  out.B = B;
  out.seed = seed;
  out.recentered = config.recenter;
  out.excluded_residuals = res.excluded.size();
  std::vector<Eigen::Index> ok;
  for (std::size_t b = 0; b < betas.size(); ++b) {
    if (betas[b]) ok.push_back(static_cast<Eigen::Index>(b));
  }
  out.failures = B - static_cast<int>(ok.size());
  if (out.failures > config.max_failure_rate * B) {
    throw Error(ErrorCode::FailureRateExceeded,
                std::to_string(out.failures) + " of " + std::to_string(B) + " bootstrap refits failed");
  }
  out.replicates.resize(static_cast<Eigen::Index>(ok.size()), data.p());
  for (std::size_t k = 0; k < ok.size(); ++k) {
    out.replicates.row(static_cast<Eigen::Index>(k)) = betas[static_cast<std::size_t>(ok[k])]->transpose();
  }
  out.se = column_sd(out.replicates);
  return out;
}

}  // namespace sphindex
