#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sphindex/local_fit.hpp"
#include "sphindex/sampling.hpp"

using namespace sphindex;

namespace {

struct Instance {
  Eigen::VectorXd U;
  Eigen::MatrixXd Y;
};

Instance random_instance(int n, int d, std::mt19937_64& rng, double noise = 0.3) {
  std::normal_distribution<double> normal;
  Instance in{Eigen::VectorXd(n), Eigen::MatrixXd(n, d)};
  for (int i = 0; i < n; ++i) {
    in.U[i] = normal(rng);
    Eigen::VectorXd m(d);
    for (int k = 0; k < d; ++k) m[k] = std::sin((k + 1) * in.U[i]) + noise * normal(rng);
    in.Y.row(i) = m.normalized().transpose();
  }
  return in;
}

// Gradient of sum_i rho(Y_i - a - b t_i) K_h(t_i) in (a, b), with t_i = U_i - u.
Eigen::VectorXd estimating_equation(const Instance& in, double u, double h, const LossSpec& loss, const LocalFit& f) {
  const int d = static_cast<int>(in.Y.cols());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * d);
  for (Eigen::Index i = 0; i < in.U.size(); ++i) {
    const double t = in.U[i] - u;
    const double k = oracle::epanechnikov(t / h) / h;
    if (k == 0.0) continue;
    const Eigen::VectorXd r = in.Y.row(i).transpose() - f.a - f.b * t;
    const Eigen::VectorXd psi = loss_eval(loss, r).gradient;
    g.head(d) += k * psi;
    g.tail(d) += k * t * psi;
  }
  return g;
}

}  // namespace

TEST_SUITE("local_fit") {

TEST_CASE("least squares local fit equals the weighted least squares closed form") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> hs(0.3, 1.5), us(-1.0, 1.0);
  for (int d : {3, 4, 10}) {
    for (int t = 0; t < 34; ++t) {
      const Instance in = random_instance(80, d, rng);
      const double u = us(rng), h = hs(rng);
      const LocalFit f = local_linear_ls(u, in.U, in.Y, h, KernelSpec{});
      const auto o = oracle::weighted_least_squares(in.U, in.Y, u, h, oracle::epanechnikov);
      CHECK((f.a - o.a).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((f.b - o.b).cwiseAbs().maxCoeff() < 1e-10);
      // The M-estimation path with LS loss agrees too.
      const LocalFit m = local_linear_m(u, in.U, in.Y, h, KernelSpec{}, LossSpec::ls());
      CHECK((m.a - o.a).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("leave-one-out fits drop exactly one observation") {
  std::mt19937_64 rng(7);
  const Instance in = random_instance(60, 3, rng);
  const LocalSmoother sm(in.U, in.Y);
  const double h = 0.8;
  const LooFits loo = loo_fits(sm, h, LossSpec::ls());
  CHECK(loo.excluded == 0);
  for (int i = 0; i < 60; i += 7) {
    const auto o = oracle::weighted_least_squares(in.U, in.Y, in.U[i], h, oracle::epanechnikov, i);
    CHECK((loo.fits.row(i).transpose() - o.a).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((sm.fit_ls(in.U[i], h, i).a - o.a).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("robust local fits solve their estimating equations") {
  std::mt19937_64 rng(9);
  const Instance in = random_instance(150, 3, rng, 0.5);
  for (auto loss : {LossSpec::esl(0.3), LossSpec::huber(0.2), LossSpec::l1()}) {
    for (double u : {-0.5, 0.0, 0.7}) {
      const LocalFit f = local_linear_m(u, in.U, in.Y, 0.9, KernelSpec{}, loss);
      CHECK(f.converged);
      const Eigen::VectorXd g = estimating_equation(in, u, 0.9, loss, f);
      // L1 is not differentiable at zero residuals; a looser bound covers the kink.
      CHECK(g.norm() < (loss.family == LossFamily::L1 ? 1e-3 : 1e-6));
    }
  }
}

TEST_CASE("limits: huge Huber threshold and huge ESL scale reduce to least squares") {
  std::mt19937_64 rng(12);
  const Instance in = random_instance(100, 4, rng);
  const LocalFit ls = local_linear_ls(0.2, in.U, in.Y, 0.7, KernelSpec{});
  const LocalFit hub = local_linear_m(0.2, in.U, in.Y, 0.7, KernelSpec{}, LossSpec::huber(1e6));
  CHECK((hub.a - ls.a).norm() < 1e-10);
  const LocalFit esl = local_linear_m(0.2, in.U, in.Y, 0.7, KernelSpec{}, LossSpec::esl(1e8));
  CHECK((esl.a - ls.a).norm() < 1e-6);
}

TEST_CASE("IRLS objective trace never increases") {
  std::mt19937_64 rng(14);
  const Instance in = random_instance(120, 3, rng, 0.8);
  LocalFitOptions opts;
  opts.record_trace = true;
  for (bool newton : {true, false}) {
    opts.newton = newton;
    const LocalSmoother sm(in.U, in.Y, KernelSpec{}, opts);
    const LocalFit f = sm.fit(0.1, 0.8, LossSpec::esl(0.2));
    REQUIRE(f.objective_trace.size() >= 2);
    for (std::size_t k = 1; k < f.objective_trace.size(); ++k) {
      CHECK(f.objective_trace[k] <= f.objective_trace[k - 1] + 1e-14);
    }
  }
}

TEST_CASE("degenerate windows widen the bandwidth, then fail") {
  Eigen::VectorXd U(6);
  U << -1.0, -0.9, -0.8, 0.8, 0.9, 1.0;
  Eigen::MatrixXd Y(6, 3);
  for (int i = 0; i < 6; ++i) Y.row(i) = eval_mean_curve(MeanCurve::Spiral61, U[i]).coords().transpose();
  const LocalFit f = local_linear_ls(0.0, U, Y, 0.5, KernelSpec{});
  CHECK(f.bandwidth > 0.5);
  // Two nearly tied neighbours far from u would give a wild extrapolated line.
  Eigen::VectorXd sparse(6);
  sparse << -5.0, 0.6750, 0.6756, 1.1, 1.3, 1.5;
  const LocalFit g = local_linear_ls(0.0, sparse, Y, 0.3, KernelSpec{});
  CHECK(g.bandwidth > 1.1);
  CHECK(g.a.norm() < 3.0);
  Eigen::VectorXd tied = Eigen::VectorXd::Zero(6);
  try {
    local_linear_ls(0.0, tied, Y, 0.5, KernelSpec{});
    FAIL("expected SingularDesign");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularDesign);
  }
}

TEST_CASE("criterion is the mean loss of leave-one-out residuals and ignores row order") {
  const SimulatedSample s = simulate_sample(MeanCurve::Spiral61, Eigen::Vector3d(1, -1, 1).normalized(), 90, 30.0,
                                            0.1, 4);
  const Dataset data(s.X, s.Y);
  const IndexParam theta(Eigen::Vector2d(-0.5, 0.4));
  const LossSpec loss = LossSpec::esl(0.2);
  const CriterionValue cv = evaluate_criterion(theta, 0.7, data, loss, KernelSpec{});
  const Eigen::VectorXd U = s.X * beta_from_theta(theta);
  const LooFits loo = loo_fits(U, s.Y, 0.7, KernelSpec{}, loss);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < 90; ++i) acc += loss_value(loss, (s.Y.row(i) - loo.fits.row(i)).squaredNorm());
  CHECK(cv.value == doctest::Approx(acc / 90.0).epsilon(1e-12));

  std::vector<Eigen::Index> perm(90);
  for (Eigen::Index i = 0; i < 90; ++i) perm[static_cast<std::size_t>(i)] = (i * 37) % 90;
  const CriterionValue shuffled = evaluate_criterion(theta, 0.7, data.subset(perm), loss, KernelSpec{});
  CHECK(shuffled.value == doctest::Approx(cv.value).epsilon(1e-10));
}

TEST_CASE("kernel constants") {
  for (auto fam : {KernelFamily::Gaussian, KernelFamily::Epanechnikov, KernelFamily::Quartic}) {
    const KernelSpec k{fam};
    auto integrate = [&](auto f) {
      return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -8.0, 8.0, 20, 1e-12);
    };
    CHECK(integrate([&](double t) { return k(t); }) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(integrate([&](double t) { return t * t * k(t); }) == doctest::Approx(k.second_moment()).epsilon(1e-8));
    CHECK(integrate([&](double t) { return k(t) * k(t); }) == doctest::Approx(k.roughness()).epsilon(1e-8));
  }
  CHECK(parse_kernel_family("quartic") == KernelFamily::Quartic);
  CHECK_THROWS_AS(parse_kernel_family("triangle"), Error);
}

}  // TEST_SUITE
