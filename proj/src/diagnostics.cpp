#include "sphindex/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sphindex/output.hpp"

namespace sphindex {

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

double condition_number(const Eigen::MatrixXd& sym) {
  if (sym.size() == 0) return 1.0;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace

NuisanceEstimates::NuisanceEstimates(const FitResult& fit, const Dataset& data, const LossSpec& loss,
                                     const NuisanceConfig& config)
    : loss_(loss), kernel_(fit.kernel), h_(fit.h_hat), config_(config), beta_(fit.beta_hat), X_(data.X()) {
  validate(loss);
  if (fit.beta_hat.size() != data.p()) throw Error(ErrorCode::DimensionMismatch, "fit and data differ in p");
  J_ = jacobian_beta(fit.theta_hat);
  U_ = data.X() * beta_;
  smoother_ = std::make_shared<const LocalSmoother>(U_, data.Y(), fit.kernel, fit.local);
  u_min_ = smoother_->min_index();
  u_max_ = smoother_->max_index();

  const Eigen::Index n = data.n();
  const Eigen::Index d = data.d();
  const Eigen::Index q = data.p() - 1;
  psi1_.resize(n, d);
  psi2_.resize(static_cast<std::size_t>(n));
  std::vector<Eigen::VectorXd> mu_prime_at(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const LocalFit f = smoother_->fit(U_[i], h_, loss_);
    mu_prime_at[static_cast<std::size_t>(i)] = f.b;
    const auto ev = loss_eval(loss_, Eigen::VectorXd(data.Y().row(i).transpose() - f.a));
    psi1_.row(i) = ev.gradient.transpose();
    psi2_[static_cast<std::size_t>(i)] = ev.hessian;
  }

  W0_ = Eigen::MatrixXd::Zero(q, q);
  M0_ = Eigen::MatrixXd::Zero(q, q);
  const std::vector<Eigen::Index> rows = interior_rows(config_.trim);
  for (Eigen::Index i : rows) {
    const Eigen::VectorXd& mp = mu_prime_at[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd S = J_.transpose() * cond_cov_x(U_[i]) * J_;
    W0_ += mp.dot(F_hat(U_[i]) * mp) * S;
    M0_ += mp.dot(G_hat(U_[i]) * mp) * S;
  }
  W0_ = symmetrize(W0_ / static_cast<double>(rows.size()));
  M0_ = symmetrize(M0_ / static_cast<double>(rows.size()));
  if (!W0_.allFinite() || condition_number(W0_) > config_.max_condition) {
    throw Error(ErrorCode::SingularW0, "W0 estimate is singular or ill-conditioned");
  }
  W0_inv_ = symmetrize(W0_.ldlt().solve(Eigen::MatrixXd::Identity(q, q)));
  if (M0_.allFinite() && condition_number(M0_) <= config_.max_condition) {
    M0_inv_ = symmetrize(M0_.ldlt().solve(Eigen::MatrixXd::Identity(q, q)));
  }
}

void NuisanceEstimates::check_index(double u) const {
  const double slack = 1e-12 * std::max(1.0, std::abs(u));
  if (!std::isfinite(u) || u < u_min_ - slack || u > u_max_ + slack) {
    throw Error(ErrorCode::IndexOutOfRange, "index value outside the observed range");
  }
}

std::vector<Eigen::Index> NuisanceEstimates::interior_rows(double trim) const {
  if (!(trim >= 0.0 && trim < 0.5)) throw Error(ErrorCode::ConfigError, "trim fraction must lie in [0, 0.5)");
  const Eigen::Index n = U_.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return U_[a] < U_[b]; });
  const auto cut = static_cast<std::size_t>(std::floor(trim * static_cast<double>(n)));
  std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(cut),
                                 order.end() - static_cast<std::ptrdiff_t>(cut));
  std::sort(rows.begin(), rows.end());
  return rows;
}

Eigen::VectorXd NuisanceEstimates::nw_weights(double u, double h) const {
  Eigen::VectorXd w(U_.size());
  double hh = h;
  for (int attempt = 0; attempt <= 5; ++attempt, hh *= 1.5) {
    for (Eigen::Index i = 0; i < U_.size(); ++i) w[i] = kernel_((U_[i] - u) / hh);
    const double s = w.sum();
    if (s > 0.0) return w / s;
  }
  throw Error(ErrorCode::SingularDesign, "no observations near u = " + std::to_string(u));
}

LocalFit NuisanceEstimates::link(double u) const { return smoother_->fit(u, h_, loss_); }

Eigen::VectorXd NuisanceEstimates::mu(double u) const { return link(u).a; }

Eigen::VectorXd NuisanceEstimates::mu_prime(double u) const { return smoother_->fit(u, h_, loss_).b; }

Eigen::VectorXd NuisanceEstimates::cond_mean_x(double u) const {
  return X_.transpose() * nw_weights(u, config_.h_mean_x.value_or(h_));
}

Eigen::MatrixXd NuisanceEstimates::cond_cov_x(double u) const {
  const Eigen::VectorXd m = cond_mean_x(u);
  const Eigen::VectorXd w = nw_weights(u, config_.h_cov_x.value_or(h_));
  const Eigen::MatrixXd c = X_.rowwise() - m.transpose();
  Eigen::MatrixXd cov = c.transpose() * w.asDiagonal() * c;
  cov.diagonal().array() += config_.ridge;
  return symmetrize(cov);
}

Eigen::MatrixXd NuisanceEstimates::F_hat(double u) const {
  const auto d = psi1_.cols();
  if (loss_.family == LossFamily::LS) return 2.0 * loss_.scale * Eigen::MatrixXd::Identity(d, d);
  const Eigen::VectorXd w = nw_weights(u, config_.h_F.value_or(h_));
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0) F += w[i] * psi2_[static_cast<std::size_t>(i)];
  }
  return symmetrize(F);
}

Eigen::MatrixXd NuisanceEstimates::G_hat(double u) const {
  const Eigen::VectorXd w = nw_weights(u, config_.h_G.value_or(h_));
  return symmetrize(psi1_.transpose() * w.asDiagonal() * psi1_);
}

double NuisanceEstimates::density_u(double u) const {
  const double h = config_.h_density.value_or(h_);
  double s = 0.0;
  for (Eigen::Index i = 0; i < U_.size(); ++i) s += kernel_((U_[i] - u) / h);
  return s / (static_cast<double>(U_.size()) * h);
}

Eigen::MatrixXd NuisanceEstimates::dispersion() const { return symmetrize(W0_inv_ * M0_ * W0_inv_); }

Eigen::MatrixXd NuisanceEstimates::link_dispersion(double u) const {
  check_index(u);
  const Eigen::VectorXd m = mu(u);
  const UnitVectord base = project_to_sphere(m);
  const Eigen::MatrixXd B = projection_differential(m) * tangent_basis(base);
  const Eigen::MatrixXd F = F_hat(u);
  const auto ldlt = F.ldlt();
  const Eigen::MatrixXd FiB = ldlt.solve(B);
  const double f = density_u(u);
  if (!(f > 0.0)) throw Error(ErrorCode::SingularDesign, "zero index density");
  return symmetrize(kernel_.roughness() / f * FiB.transpose() * G_hat(u) * FiB);
}

NuisanceEstimates estimate_nuisance(const FitResult& fit, const Dataset& data, const LossSpec& loss,
                                    const NuisanceConfig& config) {
  return NuisanceEstimates(fit, data, loss, config);
}

namespace {

struct InfluenceParts {
  double scalar;          // psi'(y - mu)^T mu'
  Eigen::VectorXd jx;     // J^T (x - E[X|U=u])
};

InfluenceParts influence_parts(const Eigen::VectorXd& x, const UnitVectord& y, const NuisanceEstimates& nuis) {
  if (x.size() != nuis.beta().size()) throw Error(ErrorCode::DimensionMismatch, "x has the wrong length");
  const double u = x.dot(nuis.beta());
  nuis.check_index(u);
  const LocalFit f = nuis.link(u);
  const auto ev = loss_eval(nuis.loss(), Eigen::VectorXd(y.coords() - f.a));
  return {ev.gradient.dot(f.b), nuis.jacobian().transpose() * (x - nuis.cond_mean_x(u))};
}

}  // namespace

Eigen::VectorXd influence(const Eigen::VectorXd& x, const UnitVectord& y, const NuisanceEstimates& nuis) {
  const InfluenceParts p = influence_parts(x, y, nuis);
  return p.scalar * (nuis.W0_inverse() * p.jx);
}

double standardized_influence(const Eigen::VectorXd& x, const UnitVectord& y, const NuisanceEstimates& nuis) {
  if (nuis.M0_inverse().size() == 0 && nuis.M0().size() != 0) {
    throw Error(ErrorCode::SingularM0, "M0 estimate is singular or ill-conditioned");
  }
  const InfluenceParts p = influence_parts(x, y, nuis);
  return std::abs(p.scalar) * std::sqrt(std::max(0.0, p.jx.dot(nuis.M0_inverse() * p.jx)));
}

SensitivityValue grid_sensitivity(const Dataset& data, const NuisanceEstimates& nuis, const SgesGrid& grid) {
  if (nuis.M0_inverse().size() == 0 && nuis.M0().size() != 0) {
    throw Error(ErrorCode::SingularM0, "M0 estimate is singular or ill-conditioned");
  }
  const Eigen::VectorXd U = data.X() * nuis.beta();
  std::vector<double> angles;
  if (grid.sweep && grid.sweep_angles > 0) {
    const double lo = std::log(grid.min_angle), hi = std::log(grid.max_angle);
    for (int k = 0; k < grid.sweep_angles; ++k) {
      const double t = grid.sweep_angles == 1 ? 1.0 : static_cast<double>(k) / (grid.sweep_angles - 1);
      angles.push_back(std::exp(lo + t * (hi - lo)));
    }
  }

  SensitivityValue out;
  for (Eigen::Index i : nuis.interior_rows(grid.trim)) {
    const double u = U[i];
    const LocalFit f = nuis.link(u);
    const Eigen::VectorXd jx = nuis.jacobian().transpose() * (data.X().row(i).transpose() - nuis.cond_mean_x(u));
    const Eigen::VectorXd wjx = nuis.W0_inverse() * jx;
    const double if_norm = wjx.norm();
    const double sif_norm = std::sqrt(std::max(0.0, jx.dot(nuis.M0_inverse() * jx)));
    const UnitVectord centre = project_to_sphere(f.a);

    std::vector<Eigen::VectorXd> candidates;
    if (centre.dim() == 3) {
      const UnitVectord reference = UnitVectord::basis(3, 0);
      const bool parallel = std::abs(std::abs(centre.dot(reference)) - 1.0) < 1e-10;
      const UnitVectord orth = orthogonal_contaminant(centre, parallel ? UnitVectord::basis(3, 1) : reference);
      candidates.push_back(orth.coords());
      candidates.push_back(-orth.coords());
    } else {
      candidates.push_back(tangent_basis(centre).col(0));
      candidates.push_back(-tangent_basis(centre).col(0));
    }
    candidates.push_back(-centre.coords());
    if (!angles.empty()) {
      Eigen::VectorXd dir = f.b - f.b.dot(centre.coords()) * centre.coords();
      if (dir.norm() < 1e-12) dir = tangent_basis(centre).col(0);
      dir.normalize();
      for (double sign : {1.0, -1.0}) {
        for (double a : angles) {
          candidates.push_back(std::cos(a) * centre.coords() + std::sin(a) * sign * dir);
        }
      }
    }
    for (const auto& y : candidates) {
      const double s = std::abs(loss_eval(nuis.loss(), Eigen::VectorXd(y - f.a)).gradient.dot(f.b));
      out.ges = std::max(out.ges, s * if_norm);
      out.sges = std::max(out.sges, s * sif_norm);
    }
  }
  return out;
}

std::vector<SgesRow> empirical_sges(const LossSpec& loss, const std::vector<double>& kappas, const SgesConfig& config) {
  Eigen::VectorXd beta0 = config.beta0;
  if (beta0.size() == 0) {
    beta0 = Eigen::Vector3d(1.0, -1.0, 1.0) / std::sqrt(3.0);
  }
  std::vector<SgesRow> rows(kappas.size());
  for (std::size_t k = 0; k < kappas.size(); ++k) {
    const SimulatedSample s =
        simulate_sample(config.curve, beta0, config.n, kappas[k], 0.0, split_seed(config.seed, k));
    const Dataset data(s.X, s.Y);
    FitConfig fc = config.fit;
    fc.seed = split_seed(config.seed, 1000 + k);
    const FitResult f = fit(data, loss, fc);
    const NuisanceEstimates nuis(f, data, f.loss, config.nuisance);
    const SensitivityValue v = grid_sensitivity(data, nuis, config.grid);
    rows[k] = {kappas[k], loss.family, v.ges, v.sges};
  }
  return rows;
}

std::string sges_csv(const std::vector<SgesRow>& rows) {
  std::ostringstream os;
  os << "kappa,loss,ges,sges\n";
  for (const auto& r : rows) {
    os << format_double(r.kappa) << ',' << to_string(r.loss) << ',' << format_double(r.ges) << ','
       << format_double(r.sges) << '\n';
  }
  return os.str();
}

}  // namespace sphindex
