#include "sphindex/esim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sphindex/nelder_mead.hpp"
#include "sphindex/parallel.hpp"
#include "sphindex/random.hpp"

namespace sphindex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBallRadius = 1.0 - 1e-8;

// Triangle-wave reflection of s into [lo, hi].
double reflect_interval(double s, double lo, double hi) {
  const double w = hi - lo;
  if (!(w > 0.0)) return lo;
  double t = std::fmod(s - lo, 2.0 * w);
  if (t < 0.0) t += 2.0 * w;
  return lo + (t <= w ? t : 2.0 * w - t);
}

// Radial reflection into the open ball; passing through the far wall comes
// back in on the opposite side, so the map is continuous.
Eigen::VectorXd reflect_ball(const Eigen::VectorXd& z) {
  const double r = z.norm();
  if (r < kBallRadius) return z;
  const double R = kBallRadius;
  const double t = std::fmod(r, 4.0 * R);
  double rr = 0.0;
  if (t <= R) {
    rr = t;
  } else if (t <= 3.0 * R) {
    rr = 2.0 * R - t;
  } else {
    rr = t - 4.0 * R;
  }
  return z * (rr / r);
}

double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

// The criterion as a function of free coordinates z = (theta, log multiplier).
class Problem {
 public:
  Problem(const Dataset& data, const FitConfig& config)
      : data_(data), config_(config), rate_(std::pow(static_cast<double>(data.n()), -0.2)),
        log_lo_(std::log(config.h_lower)), log_hi_(std::log(config.h_upper)) {}

  Eigen::Index theta_size() const { return data_.p() - 1; }

  double scale(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd u = data_.X() * beta_from_theta(IndexParam(theta));
    return rate_ * sample_sd(u);
  }

  std::pair<Eigen::VectorXd, double> decode(const Eigen::VectorXd& z) const {
    Eigen::VectorXd theta = reflect_ball(z.head(theta_size()));
    const double s = reflect_interval(z[theta_size()], log_lo_, log_hi_);
    return {theta, std::exp(s) * scale(theta)};
  }

  Eigen::VectorXd encode(const Eigen::VectorXd& theta, std::optional<double> h) const {
    Eigen::VectorXd z(theta_size() + 1);
    z.head(theta_size()) = reflect_ball(theta);
    double s = 0.0;
    if (h) {
      const double sc = scale(z.head(theta_size()));
      if (sc > 0.0 && *h > 0.0) s = std::clamp(std::log(*h / sc), log_lo_, log_hi_);
    }
    z[theta_size()] = s;
    return z;
  }

  double operator()(const Eigen::VectorXd& z, const LossSpec& loss) const {
    const auto [theta, h] = decode(z);
    if (!(h > 0.0) || !std::isfinite(h)) return kInf;
    try {
      const double v = evaluate_criterion(IndexParam(theta), h, data_, loss, config_.kernel, config_.local).value;
      return std::isfinite(v) ? v : kInf;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SingularDesign || e.code() == ErrorCode::NonFinite) return kInf;
      throw;
    }
  }

 private:
  const Dataset& data_;
  const FitConfig& config_;
  double rate_;
  double log_lo_;
  double log_hi_;
};

struct SearchOutcome {
  Eigen::VectorXd z;
  double value = kInf;
  int evaluations = 0;
  int restarts = 0;
  int starts = 0;
  bool converged = false;
};

// Every start gets a coarse simplex run; the best end point is then polished
// to full tolerance. A single start goes straight to the polish.
SearchOutcome search(const Problem& problem, const LossSpec& loss, const std::vector<Eigen::VectorXd>& starts,
                     double theta_step, double log_h_step, const FitConfig& config, bool fine_polish = true) {
  Eigen::VectorXd steps = Eigen::VectorXd::Constant(problem.theta_size() + 1, theta_step);
  steps[problem.theta_size()] = log_h_step;
  auto objective = [&](const Eigen::VectorXd& z) { return problem(z, loss); };

  SearchOutcome out;
  out.starts = static_cast<int>(starts.size());
  Eigen::VectorXd polish_from = starts.front();
  if (starts.size() > 1) {
    NelderMeadOptions coarse;
    coarse.max_evaluations = config.coarse_evaluations;
    coarse.f_tol = config.coarse_f_tol;
    coarse.x_tol = config.coarse_x_tol;
    coarse.restarts = 0;
    std::vector<NelderMeadResult> results(starts.size());
    parallel_for(starts.size(), config.jobs,
                 [&](std::size_t k) { results[k] = nelder_mead(objective, starts[k], steps, coarse); });
    double best = kInf;
    for (const auto& r : results) {
      out.evaluations += r.evaluations;
      if (r.value < best) {
        best = r.value;
        polish_from = r.x;
      }
    }
    if (!std::isfinite(best)) {
      throw Error(ErrorCode::NoValidStart, "the criterion is degenerate at every start");
    }
    steps *= 0.25;
  }
  NelderMeadOptions fine;
  fine.max_evaluations = config.max_evaluations;
  fine.f_tol = fine_polish ? config.f_tol : config.outer_f_tol;
  fine.x_tol = fine_polish ? config.x_tol : config.outer_x_tol;
  const NelderMeadResult r = nelder_mead(objective, polish_from, steps, fine);
  out.evaluations += r.evaluations;
  out.restarts += r.restarts;
  out.z = r.x;
  out.value = r.value;
  out.converged = r.converged;
  if (!std::isfinite(out.value)) {
    throw Error(ErrorCode::NoValidStart, "the criterion is degenerate at every start");
  }
  return out;
}

std::vector<Eigen::VectorXd> default_starts(const Problem& problem, const FitConfig& config) {
  const Eigen::Index q = problem.theta_size();
  std::vector<Eigen::VectorXd> starts;
  if (config.initial_theta) starts.push_back(problem.encode(*config.initial_theta, config.initial_h));
  if (config.coordinate_starts) {
    starts.push_back(problem.encode(Eigen::VectorXd::Zero(q), std::nullopt));
    for (Eigen::Index j = 0; j < q; ++j) {
      for (double sign : {1.0, -1.0}) {
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(q);
        theta[j] = sign / std::numbers::sqrt2;
        starts.push_back(problem.encode(theta, std::nullopt));
      }
    }
  }
  for (int k = 0; k < config.random_starts && q > 0; ++k) {
    Rng rng = make_rng(config.seed, static_cast<std::uint64_t>(k));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd dir(q);
    for (Eigen::Index j = 0; j < q; ++j) dir[j] = normal(rng);
    const double r = 0.9 * std::pow(unif(rng), 1.0 / static_cast<double>(q));
    starts.push_back(problem.encode(dir.normalized() * r, std::nullopt));
  }
  if (starts.empty()) starts.push_back(problem.encode(Eigen::VectorXd::Zero(q), std::nullopt));
  return starts;
}

void accumulate(FitDiagnostics& diag, const SearchOutcome& s) {
  diag.evaluations += s.evaluations;
  diag.restarts += s.restarts;
  diag.starts += s.starts;
  diag.trace.push_back(s.value);
  diag.converged = s.converged;
}

}  // namespace

Eigen::MatrixXd loo_residuals(const Dataset& data, const IndexParam& theta, double h, const LossSpec& loss,
                              const KernelSpec& kernel, const LocalFitOptions& options) {
  const Eigen::VectorXd U = data.X() * beta_from_theta(theta);
  const LooFits loo = loo_fits(LocalSmoother(U, data.Y(), kernel, options), h, loss);
  Eigen::MatrixXd r(static_cast<Eigen::Index>(loo.valid.size() - loo.excluded), data.d());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (loo.valid[static_cast<std::size_t>(i)]) r.row(k++) = data.Y().row(i) - loo.fits.row(i);
  }
  return r;
}

FitResult fit(const Dataset& data, const LossSpec& loss_in, const FitConfig& config) {
  validate(loss_in);
  if (!(config.h_lower > 0.0 && config.h_upper > config.h_lower)) {
    throw Error(ErrorCode::ConfigError, "bandwidth box must satisfy 0 < h_lower < h_upper");
  }
  if (config.initial_theta && config.initial_theta->size() != data.p() - 1) {
    throw Error(ErrorCode::DimensionMismatch, "initial theta must have p - 1 entries");
  }
  if (config.warm_start_only && !config.initial_theta) {
    throw Error(ErrorCode::ConfigError, "warm_start_only needs initial_theta");
  }

  const Problem problem(data, config);
  FitDiagnostics diag;
  const double wide_step = 0.2, wide_log_h = 0.5;
  const double warm_step = 0.05, warm_log_h = 0.2;

  std::vector<Eigen::VectorXd> starts;
  if (config.warm_start_only) {
    starts.push_back(problem.encode(*config.initial_theta, config.initial_h));
  } else {
    starts = default_starts(problem, config);
  }
  const double step = config.warm_start_only ? warm_step : wide_step;
  const double log_h_step = config.warm_start_only ? warm_log_h : wide_log_h;

  LossSpec loss = loss_in;
  SearchOutcome best;
  if (loss.family == LossFamily::LS) {
    best = search(problem, loss, starts, step, log_h_step, config);
    accumulate(diag, best);
  } else {
    std::vector<Eigen::VectorXd> robust_starts;
    if (config.warm_start_only) {
      robust_starts = starts;
    } else {
      const SearchOutcome ls = search(problem, LossSpec::ls(), starts, step, log_h_step, config);
      accumulate(diag, ls);
      robust_starts.push_back(ls.z);
      if (config.robust_multistart) robust_starts.insert(robust_starts.end(), starts.begin(), starts.end());
      if (loss.family == LossFamily::ESL && !config.lambda) {
        const auto [theta, h] = problem.decode(ls.z);
        loss.lambda = solve_lambda_scale(
            loo_residuals(data, IndexParam(theta), h, LossSpec::ls(), config.kernel, config.local), config.delta);
      }
    }
    if (loss.family == LossFamily::ESL && config.lambda) loss.lambda = *config.lambda;
    if (loss.family == LossFamily::ESL && !config.lambda && config.warm_start_only) {
      if (config.initial_lambda) {
        loss.lambda = *config.initial_lambda;
      } else {
        const auto [theta, h] = problem.decode(starts.front());
        loss.lambda = solve_lambda_scale(
            loo_residuals(data, IndexParam(theta), h, LossSpec::ls(), config.kernel, config.local), config.delta);
      }
    }
    const bool adaptive = loss.family == LossFamily::ESL && !config.lambda;
    if (adaptive) diag.lambda_trace.push_back(loss.lambda);
    best = search(problem, loss, robust_starts, step, log_h_step, config, !adaptive);
    accumulate(diag, best);

    if (adaptive) {
      // Intermediate rounds stop at the outer tolerance; the last round, at
      // the settled lambda, is polished to full tolerance.
      for (int round = 0; round < config.max_outer; ++round) {
        ++diag.outer_rounds;
        const auto [theta, h] = problem.decode(best.z);
        const double lambda = solve_lambda_scale(
            loo_residuals(data, IndexParam(theta), h, loss, config.kernel, config.local), config.delta);
        const double change = std::abs(lambda - loss.lambda) / loss.lambda;
        loss.lambda = lambda;
        diag.lambda_trace.push_back(lambda);
        if (change < config.lambda_rel_tol) break;
        best = search(problem, loss, {best.z}, warm_step, warm_log_h, config, false);
        accumulate(diag, best);
      }
      best = search(problem, loss, {best.z}, warm_step, warm_log_h, config);
      accumulate(diag, best);
    }
  }

  const auto [theta, h] = problem.decode(best.z);
  FitResult out;
  out.theta_hat = IndexParam(theta);
  out.beta_hat = beta_from_theta(out.theta_hat);
  out.h_hat = h;
  if (loss.family == LossFamily::ESL) out.lambda_hat = loss.lambda;
  out.loss = loss;
  out.kernel = config.kernel;
  out.local = config.local;
  out.extrapolation_guard = config.extrapolation_guard;

  const CriterionValue cv = evaluate_criterion(out.theta_hat, h, data, loss, config.kernel, config.local);
  out.criterion_value = cv.value;
  diag.excluded_rows = cv.excluded;

  out.fitted_index = data.X() * out.beta_hat;
  const LocalSmoother smoother(out.fitted_index, data.Y(), config.kernel, config.local);
  out.fitted_mu.resize(data.n(), data.d());
  out.fitted_sphere.resize(data.n(), data.d());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const LocalFit f = smoother.fit(out.fitted_index[i], h, loss);
    if (!f.converged) ++diag.unconverged_local;
    out.fitted_mu.row(i) = f.a.transpose();
    out.fitted_sphere.row(i) = project_to_sphere(f.a).coords().transpose();
  }
  out.diagnostics = std::move(diag);
  return out;
}

LocalSmoother training_smoother(const FitResult& fit, const Dataset& data) {
  return LocalSmoother(data.X() * fit.beta_hat, data.Y(), fit.kernel, fit.local);
}

LocalFit link_at(const FitResult& fit, const LocalSmoother& smoother, double u) {
  return smoother.fit(u, fit.h_hat, fit.loss);
}

bool Prediction::ok() const {
  return std::none_of(errors.begin(), errors.end(), [](const auto& e) { return e.has_value(); });
}

Prediction predict(const FitResult& fit, const Dataset& data, const Eigen::MatrixXd& X_new) {
  if (X_new.cols() != data.p()) throw Error(ErrorCode::DimensionMismatch, "new predictors have the wrong width");
  if (!X_new.allFinite()) throw Error(ErrorCode::NonFinite, "new predictors must be finite");
  const LocalSmoother smoother = training_smoother(fit, data);
  const double lo = smoother.min_index() - fit.extrapolation_guard * fit.h_hat;
  const double hi = smoother.max_index() + fit.extrapolation_guard * fit.h_hat;

  Prediction out;
  out.Y = Eigen::MatrixXd::Constant(X_new.rows(), data.d(), std::numeric_limits<double>::quiet_NaN());
  out.errors.resize(static_cast<std::size_t>(X_new.rows()));
  for (Eigen::Index i = 0; i < X_new.rows(); ++i) {
    const double u = X_new.row(i).dot(fit.beta_hat);
    auto& err = out.errors[static_cast<std::size_t>(i)];
    if (u < lo || u > hi) {
      err = ErrorCode::SingularDesign;
      continue;
    }
    try {
      const LocalFit f = link_at(fit, smoother, u);
      out.Y.row(i) = project_to_sphere(f.a).coords().transpose();
    } catch (const Error& e) {
      err = e.code();
    }
  }
  return out;
}

double index_bias(const Eigen::VectorXd& beta0, const Eigen::VectorXd& beta_hat) {
  if (beta0.size() != beta_hat.size()) throw Error(ErrorCode::DimensionMismatch, "index vectors differ in length");
  return std::acos(std::clamp(beta0.dot(beta_hat), -1.0, 1.0));
}

double mean_squared_geodesic(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Y_hat) {
  if (Y.rows() != Y_hat.rows() || Y.cols() != Y_hat.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "responses and fitted values are not aligned");
  }
  if (Y.rows() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    const double a = std::acos(std::clamp(Y.row(i).dot(Y_hat.row(i)), -1.0, 1.0));
    acc += a * a;
  }
  return acc / static_cast<double>(Y.rows());
}

Metrics metrics(const Eigen::VectorXd& beta0, const FitResult& fit, const Eigen::MatrixXd& Y,
                const Eigen::MatrixXd& Y_hat, const Eigen::MatrixXd& Y_test, const Eigen::MatrixXd& Y_test_hat) {
  return {index_bias(beta0, fit.beta_hat), mean_squared_geodesic(Y, Y_hat), mean_squared_geodesic(Y_test, Y_test_hat)};
}

}  // namespace sphindex
