#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "oracles.hpp"
#include "sphindex/sampling.hpp"

using namespace sphindex;

TEST_SUITE("sampling") {

TEST_CASE("vMF samples: uniform at kappa 0, mean cosine at kappa 100, determinism") {
  const auto mu = UnitVectord::basis(3, 2);
  const auto uniform = sample_vmf(mu, {0.0, 3}, 10000, 1);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& y : uniform) sum += y.coords();
  CHECK(sum.norm() / 10000.0 < 0.05);

  const auto tight = sample_vmf(mu, {100.0, 3}, 10000, 2);
  double cos_sum = 0.0;
  for (const auto& y : tight) {
    cos_sum += y.dot(mu);
    CHECK(std::abs(y.coords().norm() - 1.0) < 1e-12);
  }
  CHECK(std::abs(cos_sum / 10000.0 - oracle::vmf3_mean_cosine(100.0)) < 0.01);

  const auto again = sample_vmf(mu, {100.0, 3}, 50, 2);
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].coords() == tight[i].coords());
}

TEST_CASE("vMF in higher dimension matches the Bessel-ratio mean cosine") {
  // d = 5: the cosine t has density proportional to (1 - t^2) e^{k t} on [-1, 1].
  const double kappa = 20.0;
  auto w = [&](double t) { return (1.0 - t * t) * std::exp(kappa * (t - 1.0)); };
  using boost::math::quadrature::gauss_kronrod;
  const double z = gauss_kronrod<double, 61>::integrate(w, -1.0, 1.0, 15, 1e-13);
  const double m = gauss_kronrod<double, 61>::integrate([&](double t) { return t * w(t); }, -1.0, 1.0, 15, 1e-13);
  const auto mu = UnitVectord::basis(5, 0);
  const auto ys = sample_vmf(mu, {kappa, 5}, 20000, 9);
  double acc = 0.0;
  for (const auto& y : ys) acc += y.dot(mu);
  CHECK(std::abs(acc / 20000.0 - m / z) < 0.005);
}

TEST_CASE("vMF concentrates monotonically in kappa") {
  const auto mu = UnitVectord::basis(3, 0);
  double previous = 10.0;
  for (double kappa : {5.0, 25.0, 50.0, 100.0, 250.0}) {
    const auto ys = sample_vmf(mu, {kappa, 3}, 10000, 21);
    double acc = 0.0;
    for (const auto& y : ys) acc += geodesic_distance(mu, y);
    const double mean = acc / 10000.0;
    CHECK(mean < previous);
    previous = mean;
  }
}

TEST_CASE("mean curves") {
  const auto s = eval_mean_curve(MeanCurve::Spiral61, 0.0);
  CHECK((s.coords() - Eigen::Vector3d(0.0, std::sqrt(3.0) / 2.0, 0.5)).norm() < 1e-15);
  const auto m1 = eval_mean_curve(MeanCurve::Mu1, 0.0);
  CHECK((m1.coords() - Eigen::Vector3d(0, 0, -1)).norm() < 1e-15);
  // mu2 at u = 0 uses v = Phi(0) = 1/2, the same point as the spiral.
  CHECK((eval_mean_curve(MeanCurve::Mu2, 0.0).coords() - s.coords()).norm() < 1e-15);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int t = 0; t < 10000; ++t) {
    const double x = u(rng);
    for (auto c : {MeanCurve::Spiral61, MeanCurve::Mu1, MeanCurve::Mu2, MeanCurve::Mu3}) {
      CHECK(std::abs(eval_mean_curve(c, x).coords().norm() - 1.0) < 1e-12);
    }
  }
  // Continuity.
  for (auto c : {MeanCurve::Spiral61, MeanCurve::Mu1, MeanCurve::Mu2, MeanCurve::Mu3}) {
    CHECK((eval_mean_curve(c, 0.3).coords() - eval_mean_curve(c, 0.3 + 1e-9).coords()).norm() < 1e-7);
  }
  CHECK(parse_mean_curve("mu3") == MeanCurve::Mu3);
  CHECK_THROWS_AS(parse_mean_curve("helix"), Error);
}

TEST_CASE("orthogonal contaminant") {
  const auto c = orthogonal_contaminant(UnitVectord::basis(3, 2), UnitVectord::basis(3, 0));
  CHECK((c.coords() - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);
  try {
    orthogonal_contaminant(UnitVectord::basis(3, 0), UnitVectord::basis(3, 0));
    FAIL("expected DegenerateCross");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateCross);
  }
  std::mt19937_64 rng(6);
  for (int t = 0; t < 200; ++t) {
    const UnitVectord mu(oracle::random_unit(3, rng));
    const auto o = orthogonal_contaminant(mu, UnitVectord::basis(3, 0));
    CHECK(std::abs(o.dot(mu)) < 1e-12);
    CHECK(std::abs(o.coords().norm() - 1.0) < 1e-12);
    // First nonzero coordinate is positive (the first is always zero here).
    CHECK(std::abs(o[0]) < 1e-12);
    CHECK((o[1] > 0.0 || (std::abs(o[1]) < 1e-12 && o[2] > 0.0)));
  }
}

TEST_CASE("contaminate replaces exactly floor(eps n) rows") {
  const std::size_t n = 200;
  const SimulatedSample clean = simulate_sample(MeanCurve::Spiral61, Eigen::Vector3d(1, -1, 1).normalized(), n, 50.0,
                                                0.0, 3);
  const Contaminated none = contaminate(clean.Y, clean.mean, {0.0, UnitVectord::basis(3, 0), 1});
  CHECK(none.replaced.empty());
  CHECK(none.responses == clean.Y);

  const Contaminated c = contaminate(clean.Y, clean.mean, {0.2, UnitVectord::basis(3, 0), 1});
  CHECK(c.replaced.size() == 40);
  CHECK(std::set<std::size_t>(c.replaced.begin(), c.replaced.end()).size() == 40);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const bool listed = std::binary_search(c.replaced.begin(), c.replaced.end(), i);
    if (listed) {
      CHECK(std::abs(c.responses.row(r).dot(clean.mean.row(r))) < 1e-10);
      ++changed;
    } else {
      CHECK(c.responses.row(r) == clean.Y.row(r));
    }
  }
  CHECK(changed == 40);
  const Contaminated again = contaminate(clean.Y, clean.mean, {0.2, UnitVectord::basis(3, 0), 1});
  CHECK(again.replaced == c.replaced);
}

TEST_CASE("predictors are standard normal and reproducible") {
  const Eigen::MatrixXd X = sample_predictors(100000, 3, 8);
  CHECK(X.rows() == 100000);
  CHECK(X.cols() == 3);
  for (int j = 0; j < 3; ++j) {
    const double mean = X.col(j).mean();
    const double var = (X.col(j).array() - mean).square().mean();
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.05);
  }
  CHECK(sample_predictors(10, 3, 8) == X.topRows(10));
}

TEST_CASE("simulate_sample wires index, curve and contamination together") {
  const Eigen::Vector3d beta0 = Eigen::Vector3d(1, -1, 1).normalized();
  const SimulatedSample s = simulate_sample(MeanCurve::Spiral61, beta0, 100, 1e9, 0.1, 12);
  CHECK((s.U - s.X * beta0).norm() < 1e-12);
  CHECK(s.contaminated.size() == 10);
  for (Eigen::Index i = 0; i < 100; ++i) {
    CHECK((s.mean.row(i).transpose() - eval_mean_curve(MeanCurve::Spiral61, s.U[i]).coords()).norm() < 1e-12);
    const bool bad = std::binary_search(s.contaminated.begin(), s.contaminated.end(), static_cast<std::size_t>(i));
    if (!bad) CHECK((s.Y.row(i) - s.mean.row(i)).norm() < 1e-3);
  }
}

}  // TEST_SUITE
