#pragma once

// Test-side reference computations, written independently of the library:
// dense normal equations, finite differences, high-precision tuning calculus
// and quadrature.

#include <Eigen/Dense>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <functional>
#include <random>

namespace oracle {

using hp = boost::multiprecision::cpp_bin_float_50;

inline double epanechnikov(double t) { return std::abs(t) < 1.0 ? 0.75 * (1.0 - t * t) : 0.0; }

// argmin_{a,b} sum_i K_h(U_i - u) |Y_i - a - b (U_i - u)|^2 by the dense
// normal equations of the n x 2 design in long double.
struct Wls {
  Eigen::VectorXd a, b;
};

inline Wls weighted_least_squares(const Eigen::VectorXd& U, const Eigen::MatrixXd& Y, double u, double h,
                                  const std::function<double(double)>& kernel, int exclude = -1) {
  using LD = long double;
  using MatL = Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic>;
  const auto n = U.size();
  MatL Z(n, 2), W = MatL::Zero(n, n), Yl = Y.cast<LD>();
  for (Eigen::Index i = 0; i < n; ++i) {
    Z(i, 0) = 1;
    Z(i, 1) = U[i] - u;
    W(i, i) = i == exclude ? 0 : kernel((U[i] - u) / h) / h;
  }
  const MatL A = Z.transpose() * W * Z;
  const MatL coef = A.fullPivLu().solve(Z.transpose() * W * Yl);
  return {coef.row(0).transpose().cast<double>(), coef.row(1).transpose().cast<double>()};
}

// Central-difference gradient.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double step) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += step;
    xm[k] -= step;
    g[k] = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

// Central-difference Jacobian of a vector map, columns = input directions.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double step) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += step;
    xm[k] -= step;
    J.col(k) = (f(xp) - f(xm)) / (2.0 * step);
  }
  return J;
}

// Tuning calculus straight from the defining formulas, in 50-digit floats.
inline hp K(hp delta, int d) { return 2 / (1 - pow(1 - delta, hp(2) / (d - 1))); }
inline hp c(hp delta, int d) { return K(delta, d) - 2; }
inline hp R(hp delta, int d) {
  const hp k = K(delta, d);
  return pow(k - 2, -hp(d - 3) / 2) * pow(k, d - 1) * pow(k + 2, -hp(d + 1) / 2) * pow(hp(d - 1) / k - 1, -2);
}
inline hp Q(hp delta, int d) {
  const hp k = K(delta, d);
  return pow(k - 2, -hp(d - 1) / 4) * pow(k + 2, hp(d + 1) / 4);
}
inline hp delta0(int d) { return 1 - pow(1 - hp(1) / d, hp(d - 1) / 2); }
inline hp ARE(hp delta, int d) { return 1 / R(delta, d); }

// Uniform draw on S^{d-1}.
template <typename Rng>
Eigen::VectorXd random_unit(int d, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(d);
  do {
    for (int k = 0; k < d; ++k) v[k] = normal(rng);
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Mean of Y.mu under vMF(kappa) on S^2: coth(kappa) - 1/kappa.
inline double vmf3_mean_cosine(double kappa) { return 1.0 / std::tanh(kappa) - 1.0 / kappa; }

// E[1 - exp(-|r|^2 / lambda)] for vMF residuals r = Y - mu on S^2, by
// adaptive quadrature over the cosine t with density kappa e^{kappa t} / (2 sinh kappa)
// and |r|^2 = 2 (1 - t).
inline double vmf3_mean_esl(double kappa, double lambda) {
  auto f = [&](double t) {
    const double dens = kappa * std::exp(kappa * (t - 1.0)) / (1.0 - std::exp(-2.0 * kappa));
    return -std::expm1(-2.0 * (1.0 - t) / lambda) * dens;
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -1.0, 1.0, 15, 1e-13);
}

}  // namespace oracle
