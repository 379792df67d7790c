#pragma once

// Seeded simulation studies, cross-validation and their tabular outputs.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sphindex/config.hpp"
#include "sphindex/output.hpp"

namespace sphindex {

struct ResultRow {
  int replication = 0;
  std::string curve;
  std::size_t n = 0;
  LossFamily loss = LossFamily::LS;
  double kappa = 0.0;
  double epsilon = 0.0;
  double bias = 0.0;
  double mse = 0.0;
  double mspe = 0.0;          // over the test points inside the prediction range
  std::size_t predicted = 0;  // test points predicted
  double h = 0.0;
  std::optional<double> lambda;
  double fit_seconds = 0.0;   // wall clock, millisecond resolution
  bool converged = false;
  std::string error;          // error code of a failed replication
};

// Seed of replication `rep` in design cell `cell`; shared by every loss and,
// within a concentration, by every contamination level.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t cell, int rep);

// Grid over kappa x epsilon for the first curve and sample size.
std::vector<ResultRow> run_contamination_study(const ExperimentConfig& config);
// Grid over curves x sample sizes at the first kappa and epsilon.
std::vector<ResultRow> run_shape_study(const ExperimentConfig& config);

// One replication: simulate, fit every loss, score against a fresh
// uncontaminated test set. Failures become rows with converged = false.
std::vector<ResultRow> run_replication(const ExperimentConfig& config, MeanCurve curve, std::size_t n, double kappa,
                                       double epsilon, int rep, std::uint64_t seed);

// Results without timing columns, so reruns are byte-identical.
std::string results_csv(const std::vector<ResultRow>& rows, const RunMetadata& meta);
// Wall-clock fit times keyed like the results.
std::string timings_csv(const std::vector<ResultRow>& rows, const RunMetadata& meta);
// Reads results and, optionally, timings back; MalformedResults on bad input.
std::vector<ResultRow> read_results(const std::string& results_text,
                                    const std::optional<std::string>& timings_text = std::nullopt);

struct FoldOutcome {
  int fold = 0;
  std::size_t test_size = 0;
  std::size_t predicted = 0;
  double mspe = 0.0;
  std::string error;
};

struct CvSummary {
  LossFamily loss = LossFamily::LS;
  std::vector<FoldOutcome> folds;
  double mspe = 0.0;  // mean squared geodesic error over all predicted points
  std::size_t predicted = 0;
};

// Seeded balanced fold labels in [0, k).
std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed);

std::vector<CvSummary> run_cv(const ExperimentConfig& config, const Dataset& data);
nlohmann::ordered_json cv_json(const std::vector<CvSummary>& summary, const RunMetadata& meta);

}  // namespace sphindex
