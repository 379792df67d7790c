#pragma once

// Loss families for M-estimation of an ambient link, their IRLS weights, the
// M-scale equation for the exponential squared loss (ESL), and the closed-form
// tuning calculus relating the ESL scale constant delta to efficiency and
// robustness.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string_view>
#include <utility>

#include "sphindex/error.hpp"
#include "sphindex/sphere.hpp"

namespace sphindex {

enum class LossFamily { LS, ESL, L1, Huber };

std::string_view to_string(LossFamily family) noexcept;
LossFamily parse_loss_family(std::string_view name);

struct LossSpec {
  LossFamily family = LossFamily::LS;
  double lambda = 1.0;   // ESL scale
  double huber_c = 1.0;  // Huber threshold on |r|
  double scale = 1.0;    // positive multiplier of the whole loss

  static LossSpec ls() { return {}; }
  static LossSpec esl(double lambda) { return {LossFamily::ESL, lambda, 1.0, 1.0}; }
  static LossSpec l1() { return {LossFamily::L1, 1.0, 1.0, 1.0}; }
  static LossSpec huber(double c) { return {LossFamily::Huber, 1.0, c, 1.0}; }
};

void validate(const LossSpec& spec);

// Largest IRLS weight handed out (L1 near the origin).
inline constexpr double kMaxIrlsWeight = 1e8;
// Below this residual norm the L1 subgradient is taken to be zero.
inline constexpr double kL1Kink = 1e-10;

// Loss value as a function of the squared residual norm; every family here is
// rotationally symmetric.
inline double loss_value(const LossSpec& spec, double sq_norm) {
  switch (spec.family) {
    case LossFamily::LS: return spec.scale * sq_norm;
    case LossFamily::ESL: return spec.scale * -std::expm1(-sq_norm / spec.lambda);
    case LossFamily::L1: return spec.scale * std::sqrt(sq_norm);
    case LossFamily::Huber: {
      const double r = std::sqrt(sq_norm);
      return spec.scale * (r <= spec.huber_c ? sq_norm : 2.0 * spec.huber_c * r - spec.huber_c * spec.huber_c);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// IRLS weight w(|r|) with psi'(r) proportional to w * r.
inline double irls_weight(const LossSpec& spec, double sq_norm) {
  switch (spec.family) {
    case LossFamily::LS: return 1.0;
    case LossFamily::ESL:
      return std::max(std::exp(-sq_norm / spec.lambda), std::numeric_limits<double>::min());
    case LossFamily::L1: return 1.0 / std::max(std::sqrt(sq_norm), 1.0 / kMaxIrlsWeight);
    case LossFamily::Huber: {
      const double r = std::sqrt(sq_norm);
      return r <= spec.huber_c ? 1.0 : spec.huber_c / r;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

template <typename Derived>
double irls_weight(const LossSpec& spec, const Eigen::MatrixBase<Derived>& r) {
  validate(spec);
  return irls_weight(spec, static_cast<double>(r.squaredNorm()));
}

template <typename Scalar>
struct LossEval {
  Scalar value;
  Vec<Scalar> gradient;
  Mat<Scalar> hessian;
};

template <typename Derived>
LossEval<typename Derived::Scalar> loss_eval(const LossSpec& spec, const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  using std::sqrt;
  validate(spec);
  const Eigen::Index d = r.size();
  const Mat<Scalar> eye = Mat<Scalar>::Identity(d, d);
  const Scalar sq = r.squaredNorm();
  const Scalar k = Scalar(spec.scale);
  LossEval<Scalar> out;
  switch (spec.family) {
    case LossFamily::LS:
      out.value = k * sq;
      out.gradient = Scalar(2) * k * r;
      out.hessian = Scalar(2) * k * eye;
      break;
    case LossFamily::ESL: {
      const Scalar lam = Scalar(spec.lambda);
      const Scalar e = exp(-sq / lam);
      out.value = k * (Scalar(1) - e);
      out.gradient = (Scalar(2) * k * e / lam) * r;
      out.hessian = (Scalar(2) * k * e / lam) * (eye - (Scalar(2) / lam) * (r * r.transpose()));
      break;
    }
    case LossFamily::L1: {
      const Scalar n = sqrt(sq);
      out.value = k * n;
      if (n < Scalar(kL1Kink)) {
        out.gradient = Vec<Scalar>::Zero(d);
        out.hessian = k * Scalar(kMaxIrlsWeight) * eye;
      } else {
        out.gradient = (k / n) * r;
        out.hessian = (k / n) * (eye - (r * r.transpose()) / sq);
      }
      break;
    }
    case LossFamily::Huber: {
      const Scalar n = sqrt(sq);
      const Scalar c = Scalar(spec.huber_c);
      if (n <= c) {
        out.value = k * sq;
        out.gradient = Scalar(2) * k * r;
        out.hessian = Scalar(2) * k * eye;
      } else {
        out.value = k * (Scalar(2) * c * n - c * c);
        out.gradient = (Scalar(2) * k * c / n) * r;
        out.hessian = (Scalar(2) * k * c / n) * (eye - (r * r.transpose()) / sq);
      }
      break;
    }
  }
  return out;
}

// Root in lambda of mean_i(1 - exp(-|r_i|^2 / lambda)) = delta, by bisection in
// log(lambda) to relative tolerance 1e-10.
double solve_lambda_scale(std::span<const double> squared_norms, double delta);
// Residuals are the rows of `residuals`.
double solve_lambda_scale(const Eigen::MatrixXd& residuals, double delta);

// ---------------------------------------------------------------------------
// Tuning calculus in delta. With a = (1 - delta)^{2/(d-1)}:
//   K = 2 / (1 - a),  c = K - 2 = 2a / (1 - a).

struct DeltaCalc {
  double delta = 0.4;
  int dimension = 3;
};

namespace detail {

template <typename Scalar>
void check_delta(Scalar delta, int d) {
  if (!(delta > Scalar(0) && delta < Scalar(1))) {
    throw Error(ErrorCode::OutOfRangeDelta, "delta must lie in (0, 1)");
  }
  if (d < 3) throw Error(ErrorCode::DimensionMismatch, "response dimension must be >= 3");
}

// Returns a = (1-delta)^{2/(d-1)} and 1 - a without cancellation.
template <typename Scalar>
std::pair<Scalar, Scalar> delta_power(Scalar delta, int d) {
  using std::exp;
  using std::expm1;
  using std::log1p;
  const Scalar e = Scalar(2) / Scalar(d - 1) * log1p(-delta);
  return {exp(e), -expm1(e)};
}

}  // namespace detail

template <typename Scalar = double>
Scalar k_delta(Scalar delta, int d) {
  detail::check_delta(delta, d);
  const auto [a, one_minus_a] = detail::delta_power(delta, d);
  return Scalar(2) / one_minus_a;
}

template <typename Scalar = double>
Scalar c_delta(Scalar delta, int d) {
  detail::check_delta(delta, d);
  const auto [a, one_minus_a] = detail::delta_power(delta, d);
  return Scalar(2) * a / one_minus_a;
}

template <typename Scalar = double>
Scalar r_delta(Scalar delta, int d) {
  using std::abs;
  using std::pow;
  detail::check_delta(delta, d);
  const auto [a, one_minus_a] = detail::delta_power(delta, d);
  // (d-1)/K - 1 with K = 2/(1-a).
  const Scalar pole = Scalar(d - 1) * one_minus_a / Scalar(2) - Scalar(1);
  if (abs(pole) < Scalar(1e-12)) {
    throw Error(ErrorCode::PoleAtK, "R(delta) has a pole where K(delta) = d - 1");
  }
  // K^{d-1} (K+2)^{-(d+1)/2} (K-2)^{-(d-3)/2} = (K/(K+2))^{(d+1)/2} (K/(K-2))^{(d-3)/2}
  //   with K/(K+2) = 1/(2-a) and K/(K-2) = 1/a.
  return pow(Scalar(2) - a, -Scalar(d + 1) / Scalar(2)) * pow(a, -Scalar(d - 3) / Scalar(2)) /
         (pole * pole);
}

template <typename Scalar = double>
Scalar q_delta(Scalar delta, int d) {
  using std::pow;
  const Scalar c = c_delta(delta, d);
  return pow(c, -Scalar(d - 1) / Scalar(4)) * pow(c + Scalar(4), Scalar(d + 1) / Scalar(4));
}

template <typename Scalar = double>
Scalar delta_opt(int d) {
  using std::pow;
  if (d < 3) throw Error(ErrorCode::DimensionMismatch, "response dimension must be >= 3");
  return Scalar(1) - pow(Scalar(1) - Scalar(1) / Scalar(d), Scalar(d - 1) / Scalar(2));
}

template <typename Scalar = double>
Scalar are_esl(Scalar delta, int d) {
  return Scalar(1) / r_delta(delta, d);
}

// Weighted efficiency/robustness criterion w1 R + w2 Q.
template <typename Scalar = double>
Scalar tradeoff_criterion(Scalar delta, int d, Scalar w_efficiency = Scalar(1),
                          Scalar w_robustness = Scalar(1)) {
  return w_efficiency * r_delta(delta, d) + w_robustness * q_delta(delta, d);
}

inline double k_delta(const DeltaCalc& c) { return k_delta(c.delta, c.dimension); }
inline double c_delta(const DeltaCalc& c) { return c_delta(c.delta, c.dimension); }
inline double r_delta(const DeltaCalc& c) { return r_delta(c.delta, c.dimension); }
inline double q_delta(const DeltaCalc& c) { return q_delta(c.delta, c.dimension); }
inline double are_esl(const DeltaCalc& c) { return are_esl(c.delta, c.dimension); }

}  // namespace sphindex
