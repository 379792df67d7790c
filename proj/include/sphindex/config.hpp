#pragma once

// Experiment definitions: a flat `key = value` text file with typed parsing
// and strict rejection of unknown keys.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sphindex/esim.hpp"
#include "sphindex/loss.hpp"
#include "sphindex/sampling.hpp"

namespace sphindex {

// Raw entries of a config file. '#' starts a comment; keys may appear once.
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse(const std::string& text, const std::string& source = "<config>");
  static ConfigFile load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
  // Directory that relative paths in the file are resolved against.
  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

  // FNV-1a 64 over the sorted entries, skipping keys that cannot change
  // results (jobs, out).
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> entries_;
  std::filesystem::path base_dir_ = ".";
};

// Column mapping for tabular input; see README for the file schema.
struct DataSpec {
  std::filesystem::path path;
  std::vector<std::string> responses;
  bool sqrt_transform = true;  // responses are compositions; otherwise unit vectors
  std::vector<std::string> continuous;
  std::vector<std::string> log_columns;  // log-transformed before standardizing
  // column -> reference level; the other levels become indicators
  std::vector<std::pair<std::string, std::string>> categorical;
  // (column, level) pairs whose rows are dropped
  std::vector<std::pair<std::string, std::string>> drop_levels;
  bool standardize = true;
};

struct ExperimentConfig {
  std::string study = "contamination";  // contamination | shape | dataset | composition

  // Simulation design.
  std::vector<std::size_t> n{200};
  std::size_t p = 3;
  int d = 3;
  std::vector<double> kappa{50.0};
  std::vector<double> epsilon{0.0};
  std::vector<MeanCurve> curves{MeanCurve::Spiral61};
  Eigen::VectorXd beta0;  // unit, beta0_1 > 0; defaults to (1,-1,1,...)/sqrt(p)
  std::size_t test_size = 50;
  int replications = 50;

  // Estimation.
  std::vector<LossFamily> losses{LossFamily::LS, LossFamily::ESL};
  double delta = 0.4;
  std::optional<double> lambda;
  double huber_c = 1.0;
  FitConfig fit;

  // Real data.
  std::optional<DataSpec> data;
  std::optional<std::filesystem::path> new_data;
  std::optional<std::filesystem::path> fit_file;

  // Bootstrap.
  int bootstrap_rounds = 500;
  int refit_evaluations = 200;
  bool recenter = false;

  // Diagnostics.
  std::size_t sges_n = 800;
  bool sweep = true;
  double trim = 0.025;

  // Tuning calculus.
  std::vector<int> dims{3};
  double w_efficiency = 1.0;
  double w_robustness = 1.0;

  // Cross-validation.
  int folds = 10;

  // Plot data.
  std::string kind = "boxplot";
  std::optional<std::filesystem::path> results;
  std::optional<std::filesystem::path> timings;

  std::uint64_t seed = 1;
  int jobs = 1;
  std::filesystem::path output_dir = ".";

  LossSpec loss_spec(LossFamily family) const;
};

// Typed view of a config file. Unknown keys and malformed values raise
// ConfigError naming the key.
ExperimentConfig parse_experiment(const ConfigFile& file);

}  // namespace sphindex
