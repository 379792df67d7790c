#include <doctest.h>

#include <cmath>
#include <limits>

#include "sphindex/nelder_mead.hpp"

using namespace sphindex;

TEST_SUITE("nelder_mead") {

TEST_CASE("minimises a shifted quadratic and the Rosenbrock valley") {
  auto quad = [](const Eigen::VectorXd& x) { return (x - Eigen::Vector3d(1, -2, 0.5)).squaredNorm(); };
  const auto q = nelder_mead(quad, Eigen::Vector3d::Zero(), Eigen::Vector3d::Constant(0.5));
  CHECK(q.converged);
  CHECK((q.x - Eigen::Vector3d(1, -2, 0.5)).norm() < 1e-4);

  auto rosen = [](const Eigen::VectorXd& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  NelderMeadOptions opts;
  opts.max_evaluations = 3000;
  opts.f_tol = 1e-12;
  opts.x_tol = 1e-8;
  const auto r = nelder_mead(rosen, Eigen::Vector2d(-1.2, 1.0), Eigen::Vector2d(0.1, 0.1), opts);
  CHECK((r.x - Eigen::Vector2d(1, 1)).norm() < 1e-4);
  CHECK(r.evaluations <= opts.max_evaluations + 3);
}

TEST_CASE("infeasible points are avoided") {
  // Minimum of the unconstrained quadratic lies outside the unit disc.
  auto f = [](const Eigen::VectorXd& x) {
    if (x.norm() >= 1.0) return std::numeric_limits<double>::infinity();
    return (x - Eigen::Vector2d(2, 0)).squaredNorm();
  };
  const auto r = nelder_mead(f, Eigen::Vector2d::Zero(), Eigen::Vector2d(0.2, 0.2));
  CHECK(r.x.norm() < 1.0);
  CHECK(r.x[0] > 0.99);
  CHECK(std::isfinite(r.value));
}

TEST_CASE("evaluation budget is respected and the run is deterministic") {
  int calls = 0;
  auto f = [&](const Eigen::VectorXd& x) {
    ++calls;
    return std::cos(3 * x[0]) + x.squaredNorm();
  };
  NelderMeadOptions opts;
  opts.max_evaluations = 40;
  const auto a = nelder_mead(f, Eigen::Vector2d(0.3, 0.1), Eigen::Vector2d(0.5, 0.5), opts);
  CHECK(calls == a.evaluations);
  CHECK(a.evaluations <= 43);
  const auto b = nelder_mead(f, Eigen::Vector2d(0.3, 0.1), Eigen::Vector2d(0.5, 0.5), opts);
  CHECK(a.x == b.x);
  CHECK(a.value == b.value);
}

}  // TEST_SUITE
