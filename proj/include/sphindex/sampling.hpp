#pragma once

// Synthetic spherical regression data: von Mises-Fisher responses around
// parametric mean curves, orthogonal contamination and Gaussian predictors.

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>
#include <vector>

#include "sphindex/random.hpp"
#include "sphindex/sphere.hpp"

namespace sphindex {

struct VmfSpec {
  double kappa = 0.0;  // concentration, angular function exp(t)
  int dimension = 3;
};

enum class MeanCurve { Spiral61, Mu1, Mu2, Mu3 };

std::string_view to_string(MeanCurve curve) noexcept;
MeanCurve parse_mean_curve(std::string_view name);

struct ContaminationSpec {
  double epsilon = 0.0;
  UnitVectord reference = UnitVectord::basis(3, 0);
  std::uint64_t seed = 0;
};

// One vMF draw around mu using an explicit generator. For d = 3 the cosine
// component uses the exact inverse CDF; other dimensions use Wood's rejection
// sampler.
UnitVectord draw_vmf(const UnitVectord& mu, double kappa, Rng& rng);

std::vector<UnitVectord> sample_vmf(const UnitVectord& mu, const VmfSpec& spec, std::size_t n,
                                    std::uint64_t seed);

UnitVectord eval_mean_curve(MeanCurve curve, double u);

// Normalised cross product mu x reference (d = 3), first nonzero coordinate
// made positive.
UnitVectord orthogonal_contaminant(const UnitVectord& mu, const UnitVectord& reference);

struct Contaminated {
  Eigen::MatrixXd responses;           // n x d
  std::vector<std::size_t> replaced;   // sorted row indices
};

// Replaces floor(epsilon * n) rows of Y (drawn without replacement) by the
// orthogonal contaminant of the matching mean value.
Contaminated contaminate(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& mean_values,
                         const ContaminationSpec& spec);

Eigen::MatrixXd sample_predictors(std::size_t n, std::size_t p, std::uint64_t seed);

// Complete draw from the simulation designs: X ~ N(0, I_p), U = X beta0,
// Y_i ~ vMF(curve(U_i), kappa), optionally contaminated.
struct SimulatedSample {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;
  Eigen::MatrixXd mean;  // curve(U_i) rows
  Eigen::VectorXd U;
  std::vector<std::size_t> contaminated;
};

SimulatedSample simulate_sample(MeanCurve curve, const Eigen::VectorXd& beta0, std::size_t n,
                                double kappa, double epsilon, std::uint64_t seed);

}  // namespace sphindex
