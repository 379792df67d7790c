#include "sphindex/loss.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace sphindex {

std::string_view to_string(LossFamily family) noexcept {
  switch (family) {
    case LossFamily::LS: return "LS";
    case LossFamily::ESL: return "ESL";
    case LossFamily::L1: return "L1";
    case LossFamily::Huber: return "Huber";
  }
  return "unknown";
}

LossFamily parse_loss_family(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  if (s == "LS") return LossFamily::LS;
  if (s == "ESL") return LossFamily::ESL;
  if (s == "L1") return LossFamily::L1;
  if (s == "HUBER") return LossFamily::Huber;
  throw Error(ErrorCode::ConfigError, "unknown loss family '" + std::string(name) + "'");
}

void validate(const LossSpec& spec) {
  if (!(spec.scale > 0.0) || !std::isfinite(spec.scale)) {
    throw Error(ErrorCode::ConfigError, "loss scale must be positive");
  }
  if (spec.family == LossFamily::ESL && (!(spec.lambda > 0.0) || !std::isfinite(spec.lambda))) {
    throw Error(ErrorCode::InvalidLambda, "ESL requires lambda > 0");
  }
  if (spec.family == LossFamily::Huber && (!(spec.huber_c > 0.0) || !std::isfinite(spec.huber_c))) {
    throw Error(ErrorCode::ConfigError, "Huber threshold must be positive");
  }
}

double solve_lambda_scale(std::span<const double> squared_norms, double delta) {
  detail::check_delta(delta, 3);
  if (squared_norms.empty()) throw Error(ErrorCode::AllZeroResiduals, "no residuals supplied");
  double max_sq = 0.0;
  std::size_t nonzero = 0;
  for (double s : squared_norms) {
    if (!std::isfinite(s) || s < 0.0) throw Error(ErrorCode::NonFinite, "residual norms must be finite");
    max_sq = std::max(max_sq, s);
    if (s > 0.0) ++nonzero;
  }
  if (max_sq == 0.0) throw Error(ErrorCode::AllZeroResiduals, "all residuals are zero");
  const double n = static_cast<double>(squared_norms.size());
  // The left side tends to (#nonzero / n) as lambda -> 0.
  if (static_cast<double>(nonzero) / n <= delta) {
    throw Error(ErrorCode::AllZeroResiduals,
                "too few nonzero residuals for the scale equation to reach delta");
  }

  auto excess = [&](double lambda) {
    double acc = 0.0;
    for (double s : squared_norms) acc += -std::expm1(-s / lambda);
    return acc / n - delta;  // decreasing in lambda
  };

  double lo = 1e-8 * max_sq;
  double hi = 1e8 * max_sq;
  while (excess(lo) < 0.0) lo *= 1e-4;
  while (excess(hi) > 0.0) hi *= 1e4;
  while (hi / lo - 1.0 > 1e-10) {
    const double mid = std::sqrt(lo * hi);
    if (excess(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::sqrt(lo * hi);
}

double solve_lambda_scale(const Eigen::MatrixXd& residuals, double delta) {
  std::vector<double> sq(static_cast<std::size_t>(residuals.rows()));
  for (Eigen::Index i = 0; i < residuals.rows(); ++i) sq[static_cast<std::size_t>(i)] = residuals.row(i).squaredNorm();
  return solve_lambda_scale(sq, delta);
}

}  // namespace sphindex
