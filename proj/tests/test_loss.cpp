#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sphindex/loss.hpp"

using namespace sphindex;

TEST_SUITE("loss") {

TEST_CASE("ESL and LS values at reference residuals") {
  const auto esl = LossSpec::esl(2.0);
  const Eigen::Vector3d zero = Eigen::Vector3d::Zero();
  const auto at_zero = loss_eval(esl, zero);
  CHECK(at_zero.value == 0.0);
  CHECK(at_zero.gradient.norm() == 0.0);
  const Eigen::Vector3d r = Eigen::Vector3d(1, 0, 1);  // |r|^2 = lambda
  CHECK(loss_eval(esl, r).value == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(loss_eval(esl, r).value == doctest::Approx(0.632121).epsilon(1e-6));

  const auto ls = loss_eval(LossSpec::ls(), Eigen::Vector3d(1, 2, 3));
  CHECK(ls.value == 14.0);
  CHECK((ls.gradient - Eigen::Vector3d(2, 4, 6)).norm() == 0.0);
  CHECK((ls.hessian - 2.0 * Eigen::Matrix3d::Identity()).norm() == 0.0);
  for (auto spec : {LossSpec::ls(), LossSpec::esl(1.0), LossSpec::l1(), LossSpec::huber(0.5)}) {
    CHECK(loss_eval(spec, zero).value == 0.0);
  }
}

TEST_CASE("gradients and Hessians match finite differences") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  for (auto spec : {LossSpec::ls(), LossSpec::esl(0.7), LossSpec::l1(), LossSpec::huber(0.8)}) {
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd r(4);
      for (int k = 0; k < 4; ++k) r[k] = normal(rng);
      if (spec.family == LossFamily::Huber && std::abs(r.norm() - spec.huber_c) < 1e-3) continue;
      const auto e = loss_eval(spec, r);
      const Eigen::VectorXd g = oracle::fd_gradient(
          [&](const Eigen::VectorXd& x) { return loss_eval(spec, x).value; }, r, 1e-6);
      CHECK((e.gradient - g).cwiseAbs().maxCoeff() < 1e-6);
      const Eigen::MatrixXd H = oracle::fd_jacobian(
          [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(loss_eval(spec, x).gradient); }, r, 1e-6);
      CHECK((e.hessian - H).cwiseAbs().maxCoeff() < 1e-6);
      CHECK((e.hessian - e.hessian.transpose()).norm() < 1e-14);
      CHECK(loss_value(spec, r.squaredNorm()) == doctest::Approx(e.value).epsilon(1e-14));
    }
  }
}

TEST_CASE("L1 subgradient at the origin and invalid lambda") {
  const auto e = loss_eval(LossSpec::l1(), Eigen::Vector3d(1e-12, 0, 0));
  CHECK(e.gradient.norm() == 0.0);
  try {
    loss_eval(LossSpec::esl(0.0), Eigen::Vector3d(1, 0, 0));
    FAIL("expected InvalidLambda");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::InvalidLambda);
  }
}

TEST_CASE("IRLS weights") {
  const auto esl = LossSpec::esl(1.5);
  CHECK(irls_weight(esl, Eigen::Vector3d::Zero()) == 1.0);
  const double r = std::sqrt(1.5 * std::log(4.0));
  CHECK(irls_weight(esl, Eigen::Vector3d(r, 0, 0)) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(irls_weight(LossSpec::ls(), Eigen::Vector3d(5, 1, 2)) == 1.0);
  double previous = 2.0;
  for (double s = 0.0; s < 5.0; s += 0.25) {
    const double w = irls_weight(esl, Eigen::Vector3d(s, 0, 0));
    CHECK(w > 0.0);
    CHECK(w < previous);
    previous = w;
  }
  // The weight is proportional to |psi'(r)| / |r|.
  std::mt19937_64 rng(2);
  for (auto spec : {LossSpec::esl(0.9), LossSpec::l1(), LossSpec::huber(0.6)}) {
    const Eigen::Vector3d a = oracle::random_unit(3, rng) * 0.3, b = oracle::random_unit(3, rng) * 1.7;
    const double ratio_w = irls_weight(spec, a) / irls_weight(spec, b);
    const double ratio_g = (loss_eval(spec, a).gradient.norm() / a.norm()) / (loss_eval(spec, b).gradient.norm() / b.norm());
    CHECK(ratio_w == doctest::Approx(ratio_g).epsilon(1e-12));
  }
}

TEST_CASE("M-scale equation") {
  for (double c : {0.01, 1.0, 7.5}) {
    for (double delta : {0.1, 0.4, 0.9}) {
      std::vector<double> sq(25, c);
      CHECK(solve_lambda_scale(sq, delta) == doctest::Approx(-c / std::log1p(-delta)).epsilon(1e-9));
    }
  }
  std::vector<double> ones(10, 1.0);
  CHECK(solve_lambda_scale(ones, 1.0 - std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-9));
  std::vector<double> zeros(10, 0.0);
  try {
    solve_lambda_scale(zeros, 0.4);
    FAIL("expected AllZeroResiduals");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AllZeroResiduals);
  }
  // Mixed residuals: the root satisfies the defining equation.
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> ex(3.0);
  std::vector<double> mixed(500);
  for (auto& s : mixed) s = ex(rng);
  const double lambda = solve_lambda_scale(mixed, 0.4);
  double mean = 0.0;
  for (double s : mixed) mean += 1.0 - std::exp(-s / lambda);
  CHECK(mean / 500.0 == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("tuning calculus matches 50-digit evaluation of the defining formulas") {
  CHECK(k_delta(0.4, 3) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(k_delta(0.5, 3) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(c_delta(0.4, 3) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(are_esl(0.4, 3) == doctest::Approx(0.7056).epsilon(1e-12));
  CHECK(delta_opt(3) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  for (int d = 3; d <= 10; ++d) {
    for (int k = 1; k <= 99; ++k) {
      const double delta = k / 100.0;
      const oracle::hp hd(delta);
      CHECK(std::abs(k_delta(delta, d) - static_cast<double>(oracle::K(hd, d))) <
            1e-10 * std::max(1.0, static_cast<double>(oracle::K(hd, d))));
      CHECK(std::abs(q_delta(delta, d) - static_cast<double>(oracle::Q(hd, d))) <
            1e-10 * static_cast<double>(oracle::Q(hd, d)));
      try {
        const double r = r_delta(delta, d);
        CHECK(std::abs(r - static_cast<double>(oracle::R(hd, d))) < 1e-10 * std::abs(r));
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::PoleAtK);
      }
    }
    CHECK(std::abs(delta_opt(d) - static_cast<double>(oracle::delta0(d))) < 1e-14);
  }
  CHECK_THROWS_AS(k_delta(0.0, 3), Error);
  CHECK_THROWS_AS(k_delta(1.0, 3), Error);
}

TEST_CASE("scale limit identity: (c/(c+2))^{(d-1)/2} = 1 - delta") {
  for (int d = 3; d <= 10; ++d) {
    for (int k = 1; k <= 99; ++k) {
      const double delta = k / 100.0;
      const double c = c_delta(delta, d);
      CHECK(std::abs(std::pow(c / (c + 2.0), (d - 1) / 2.0) - (1.0 - delta)) < 1e-12);
    }
  }
}

}  // TEST_SUITE
