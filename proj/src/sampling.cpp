#include "sphindex/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace sphindex {

std::string_view to_string(MeanCurve curve) noexcept {
  switch (curve) {
    case MeanCurve::Spiral61: return "spiral61";
    case MeanCurve::Mu1: return "mu1";
    case MeanCurve::Mu2: return "mu2";
    case MeanCurve::Mu3: return "mu3";
  }
  return "unknown";
}

MeanCurve parse_mean_curve(std::string_view name) {
  if (name == "spiral61" || name == "spiral") return MeanCurve::Spiral61;
  if (name == "mu1") return MeanCurve::Mu1;
  if (name == "mu2") return MeanCurve::Mu2;
  if (name == "mu3") return MeanCurve::Mu3;
  throw Error(ErrorCode::ConfigError, "unknown mean curve '" + std::string(name) + "'");
}

namespace {

// Cosine of the angle to the mean direction.
double draw_vmf_cosine(double kappa, int d, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (d == 3) {
    const double u = 1.0 - unif(rng);  // (0, 1]
    if (kappa < 1e-8) return 2.0 * u - 1.0;
    const double w = 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa;
    return std::clamp(w, -1.0, 1.0);
  }
  // Wood (1994) rejection sampler.
  const double m = d - 1.0;
  const double b = m / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + m * m));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + m * std::log(1.0 - x0 * x0);
  std::gamma_distribution<double> gamma(m / 2.0, 1.0);
  for (;;) {
    const double g1 = gamma(rng);
    const double g2 = gamma(rng);
    const double z = g1 / (g1 + g2);
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = 1.0 - unif(rng);
    if (kappa * w + m * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
  }
}

}  // namespace

UnitVectord draw_vmf(const UnitVectord& mu, double kappa, Rng& rng) {
  const auto d = static_cast<int>(mu.dim());
  const double w = draw_vmf_cosine(kappa, d, rng);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(d);
  double vn = 0.0;
  do {
    for (int k = 0; k < d; ++k) v[k] = normal(rng);
    v -= v.dot(mu.coords()) * mu.coords();
    vn = v.norm();
  } while (vn < 1e-12);
  Eigen::VectorXd y = w * mu.coords() + std::sqrt(std::max(0.0, 1.0 - w * w)) * (v / vn);
  return project_to_sphere(y);
}

std::vector<UnitVectord> sample_vmf(const UnitVectord& mu, const VmfSpec& spec, std::size_t n,
                                    std::uint64_t seed) {
  if (spec.dimension != mu.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "VmfSpec dimension differs from the mean direction");
  }
  if (!(spec.kappa >= 0.0) || !std::isfinite(spec.kappa)) {
    throw Error(ErrorCode::ConfigError, "kappa must be finite and nonnegative");
  }
  Rng rng(seed);
  std::vector<UnitVectord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw_vmf(mu, spec.kappa, rng));
  return out;
}

UnitVectord eval_mean_curve(MeanCurve curve, double u) {
  constexpr double pi = std::numbers::pi;
  Eigen::Vector3d m;
  switch (curve) {
    case MeanCurve::Spiral61: {
      const double v = 1.0 / (1.0 + std::exp(-u));
      const double r = std::sqrt(1.0 - v * v);
      m << r * std::cos(pi * v), r * std::sin(pi * v), v;
      break;
    }
    case MeanCurve::Mu1: {
      const double q = 2.0 + u * u;
      m << 2.0 * u / q, -2.0 * u / q, (u * u - 2.0) / q;
      break;
    }
    case MeanCurve::Mu2: {
      const double v = 0.5 * std::erfc(-u / std::numbers::sqrt2);
      const double r = std::sqrt(1.0 - v * v);
      m << r * std::cos(pi * v), r * std::sin(pi * v), v;
      break;
    }
    case MeanCurve::Mu3: {
      m << std::sin(2.0 * pi * u), std::cos(pi * u), 2.0 * u / std::sqrt(2.0 + u * u);
      break;
    }
  }
  return project_to_sphere(m);
}

UnitVectord orthogonal_contaminant(const UnitVectord& mu, const UnitVectord& reference) {
  if (mu.dim() != 3 || reference.dim() != 3) {
    throw Error(ErrorCode::DimensionMismatch, "orthogonal contaminants are defined for d = 3");
  }
  const Eigen::Vector3d a = mu.coords();
  const Eigen::Vector3d p = reference.coords();
  Eigen::Vector3d c = a.cross(p);
  if (c.norm() < 1e-10) {
    throw Error(ErrorCode::DegenerateCross, "mean value is parallel to the reference vector");
  }
  c.normalize();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(c[k]) > 1e-12) {
      if (c[k] < 0.0) c = -c;
      break;
    }
  }
  return UnitVectord(c);
}

Contaminated contaminate(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& mean_values,
                         const ContaminationSpec& spec) {
  if (Y.rows() != mean_values.rows() || Y.cols() != mean_values.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "responses and mean values are not aligned");
  }
  if (!(spec.epsilon >= 0.0 && spec.epsilon < 1.0)) {
    throw Error(ErrorCode::ConfigError, "contamination proportion must lie in [0, 1)");
  }
  const auto n = static_cast<std::size_t>(Y.rows());
  const auto count = static_cast<std::size_t>(std::floor(spec.epsilon * static_cast<double>(n) + 1e-9));
  Contaminated out{Y, {}};
  if (count == 0) return out;

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(spec.seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());

  for (std::size_t i : idx) {
    const UnitVectord mu(mean_values.row(static_cast<Eigen::Index>(i)).transpose());
    out.responses.row(static_cast<Eigen::Index>(i)) =
        orthogonal_contaminant(mu, spec.reference).coords().transpose();
  }
  out.replaced = std::move(idx);
  return out;
}

Eigen::MatrixXd sample_predictors(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = normal(rng);
  return X;
}

SimulatedSample simulate_sample(MeanCurve curve, const Eigen::VectorXd& beta0, std::size_t n,
                                double kappa, double epsilon, std::uint64_t seed) {
  SimulatedSample s;
  s.X = sample_predictors(n, static_cast<std::size_t>(beta0.size()), split_seed(seed, 0));
  s.U = s.X * beta0;
  s.mean.resize(static_cast<Eigen::Index>(n), 3);
  s.Y.resize(static_cast<Eigen::Index>(n), 3);
  Rng rng(split_seed(seed, 1));
  for (Eigen::Index i = 0; i < s.U.size(); ++i) {
    const UnitVectord mu = eval_mean_curve(curve, s.U[i]);
    s.mean.row(i) = mu.coords().transpose();
    s.Y.row(i) = draw_vmf(mu, kappa, rng).coords().transpose();
  }
  if (epsilon > 0.0) {
    ContaminationSpec spec;
    spec.epsilon = epsilon;
    spec.seed = split_seed(seed, 2);
    auto c = contaminate(s.Y, s.mean, spec);
    s.Y = std::move(c.responses);
    s.contaminated = std::move(c.replaced);
  }
  return s;
}

}  // namespace sphindex
