#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sphindex/esim.hpp"
#include "sphindex/sampling.hpp"

using namespace sphindex;

namespace {

const Eigen::Vector3d kBeta0 = Eigen::Vector3d(1, -1, 1).normalized();

FitConfig quick_config() {
  FitConfig cfg;
  cfg.random_starts = 1;
  cfg.max_evaluations = 300;
  return cfg;
}

}  // namespace

TEST_SUITE("esim") {

TEST_CASE("accuracy metrics") {
  CHECK(index_bias(kBeta0, kBeta0) == 0.0);
  CHECK(index_bias(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0)) == doctest::Approx(std::numbers::pi / 2));
  // Rounding above one is clamped.
  CHECK(index_bias(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(1 + 1e-15, 0, 0)) == 0.0);
  Eigen::MatrixXd A(2, 3), B(2, 3);
  A << 1, 0, 0, 0, 0, 1;
  B << 0, 1, 0, 0, 0, 1;
  CHECK(mean_squared_geodesic(A, B) == doctest::Approx(std::pow(std::numbers::pi / 2, 2) / 2));
  CHECK_THROWS_AS(index_bias(kBeta0, Eigen::Vector2d(1, 0)), Error);
}

TEST_CASE("least squares fit recovers the index on concentrated data") {
  const SimulatedSample s = simulate_sample(MeanCurve::Spiral61, kBeta0, 200, 400.0, 0.0, 21);
  const Dataset data(s.X, s.Y);
  const FitResult f = fit(data, LossSpec::ls(), quick_config());
  CHECK(index_bias(kBeta0, f.beta_hat) < 0.05);
  CHECK(std::abs(f.beta_hat.norm() - 1.0) < 1e-12);
  CHECK(f.beta_hat[0] > 0.0);
  CHECK(f.h_hat > 0.0);
  CHECK(!f.lambda_hat.has_value());
  CHECK((f.fitted_index - s.X * f.beta_hat).norm() < 1e-12);
  for (Eigen::Index i = 0; i < f.fitted_sphere.rows(); ++i) {
    CHECK(std::abs(f.fitted_sphere.row(i).norm() - 1.0) < 1e-12);
  }
  // Non-increasing best value across stages.
  for (std::size_t k = 1; k < f.diagnostics.trace.size(); ++k) {
    CHECK(f.diagnostics.trace[k] <= f.diagnostics.trace[k - 1] + 1e-15);
  }
}

TEST_CASE("ESL fit reports its scale and is reproducible across thread counts") {
  const SimulatedSample s = simulate_sample(MeanCurve::Spiral61, kBeta0, 80, 50.0, 0.2, 5);
  const Dataset data(s.X, s.Y);
  FitConfig cfg = quick_config();
  cfg.max_evaluations = 200;
  const FitResult a = fit(data, LossSpec::esl(1.0), cfg);
  REQUIRE(a.lambda_hat.has_value());
  CHECK(*a.lambda_hat > 0.0);
  CHECK(a.loss.lambda == *a.lambda_hat);
  cfg.jobs = 3;
  const FitResult b = fit(data, LossSpec::esl(1.0), cfg);
  CHECK(a.beta_hat == b.beta_hat);
  CHECK(a.h_hat == b.h_hat);
  CHECK(*a.lambda_hat == *b.lambda_hat);
}

TEST_CASE("fit rejects malformed configuration") {
  const SimulatedSample s = simulate_sample(MeanCurve::Spiral61, kBeta0, 40, 50.0, 0.0, 5);
  const Dataset data(s.X, s.Y);
  FitConfig cfg = quick_config();
  cfg.h_lower = 2.0;
  cfg.h_upper = 1.0;
  CHECK_THROWS_AS(fit(data, LossSpec::ls(), cfg), Error);
  cfg = quick_config();
  cfg.initial_theta = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(fit(data, LossSpec::ls(), cfg), Error);
}

TEST_CASE("prediction interpolates and refuses to extrapolate far") {
  const SimulatedSample s = simulate_sample(MeanCurve::Spiral61, kBeta0, 150, 200.0, 0.0, 8);
  const Dataset data(s.X, s.Y);
  const FitResult f = fit(data, LossSpec::ls(), quick_config());
  Eigen::MatrixXd X_new(3, 3);
  X_new.row(0) = s.X.row(3);
  X_new.row(1) = 100.0 * f.beta_hat.transpose();
  X_new.row(2) = s.X.row(10);
  const Prediction pr = predict(f, data, X_new);
  CHECK(!pr.ok());
  CHECK(!pr.errors[0].has_value());
  CHECK(pr.errors[1].has_value());
  CHECK(std::isnan(pr.Y(1, 0)));
  CHECK(std::abs(pr.Y.row(0).norm() - 1.0) < 1e-12);
  // In-sample prediction equals the stored fitted value.
  CHECK((pr.Y.row(2) - f.fitted_sphere.row(10)).norm() < 1e-10);
  CHECK_THROWS_AS(predict(f, data, Eigen::MatrixXd::Zero(2, 4)), Error);
}

TEST_CASE("leave-one-out residuals") {
  const SimulatedSample s = simulate_sample(MeanCurve::Spiral61, kBeta0, 60, 100.0, 0.0, 9);
  const Dataset data(s.X, s.Y);
  const IndexParam theta(Eigen::Vector2d(-0.57, 0.57));
  const Eigen::MatrixXd R = loo_residuals(data, theta, 0.6, LossSpec::ls(), KernelSpec{});
  CHECK(R.rows() <= 60);
  CHECK(R.cols() == 3);
  double mean_sq = 0.0;
  for (Eigen::Index i = 0; i < R.rows(); ++i) mean_sq += R.row(i).squaredNorm();
  CHECK(mean_sq / R.rows() == doctest::Approx(criterion(theta, 0.6, data, LossSpec::ls(), KernelSpec{})));
}

}  // TEST_SUITE
