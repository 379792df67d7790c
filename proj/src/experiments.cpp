#include "sphindex/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "sphindex/ingest.hpp"
#include "sphindex/parallel.hpp"
#include "sphindex/random.hpp"
#include "sphindex/sampling.hpp"

namespace sphindex {

namespace {

constexpr std::uint64_t kTestStream = 1000;
constexpr std::uint64_t kFitStream = 2000;

FitConfig inner_fit_config(const ExperimentConfig& config, std::uint64_t seed) {
  FitConfig fc = config.fit;
  fc.delta = config.delta;
  fc.lambda = config.lambda;
  fc.seed = seed;
  fc.jobs = 1;  // parallelism lives at the replication level
  return fc;
}

// Squared geodesic error averaged over the rows that have a prediction.
std::pair<double, std::size_t> prediction_error(const Eigen::MatrixXd& Y, const Prediction& pred) {
  double acc = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    if (pred.errors[static_cast<std::size_t>(i)]) continue;
    const double a = std::acos(std::clamp(Y.row(i).dot(pred.Y.row(i)), -1.0, 1.0));
    acc += a * a;
    ++count;
  }
  return {count ? acc / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN(), count};
}

std::string error_name(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return std::string(to_string(err->code()));
  return "Exception";
}

}  // namespace

std::uint64_t replication_seed(std::uint64_t seed, std::size_t cell, int rep) {
  return split_seed(split_seed(seed, cell), static_cast<std::uint64_t>(rep));
}

std::vector<ResultRow> run_replication(const ExperimentConfig& config, MeanCurve curve, std::size_t n, double kappa,
                                       double epsilon, int rep, std::uint64_t seed) {
  std::vector<ResultRow> rows;
  auto base_row = [&](LossFamily loss) {
    ResultRow r;
    r.replication = rep;
    r.curve = std::string(to_string(curve));
    r.n = n;
    r.loss = loss;
    r.kappa = kappa;
    r.epsilon = epsilon;
    return r;
  };
  const SimulatedSample train = simulate_sample(curve, config.beta0, n, kappa, epsilon, seed);
  const SimulatedSample test =
      simulate_sample(curve, config.beta0, config.test_size, kappa, 0.0, split_seed(seed, kTestStream));
  const Dataset data(train.X, train.Y);
  for (std::size_t l = 0; l < config.losses.size(); ++l) {
    const LossFamily family = config.losses[l];
    ResultRow row = base_row(family);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const FitResult f = fit(data, config.loss_spec(family), inner_fit_config(config, split_seed(seed, kFitStream)));
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      row.fit_seconds = std::max(1.0, std::round(secs * 1000.0)) / 1000.0;
      const Prediction pred = predict(f, data, test.X);
      row.bias = index_bias(config.beta0, f.beta_hat);
      row.mse = mean_squared_geodesic(data.Y(), f.fitted_sphere);
      std::tie(row.mspe, row.predicted) = prediction_error(test.Y, pred);
      row.h = f.h_hat;
      row.lambda = f.lambda_hat;
      row.converged = f.diagnostics.converged;
    } catch (const std::exception& e) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      row.fit_seconds = std::max(1.0, std::round(secs * 1000.0)) / 1000.0;
      row.bias = row.mse = row.mspe = std::numeric_limits<double>::quiet_NaN();
      row.converged = false;
      row.error = error_name(e);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

struct Task {
  MeanCurve curve;
  std::size_t n;
  double kappa;
  double epsilon;
  int rep;
  std::uint64_t seed;
};

std::vector<ResultRow> run_tasks(const ExperimentConfig& config, const std::vector<Task>& tasks) {
  std::vector<std::vector<ResultRow>> slots(tasks.size());
  parallel_for(tasks.size(), config.jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    slots[i] = run_replication(config, t.curve, t.n, t.kappa, t.epsilon, t.rep, t.seed);
  });
  std::vector<ResultRow> out;
  for (auto& s : slots) out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

std::vector<ResultRow> run_contamination_study(const ExperimentConfig& config) {
  std::vector<Task> tasks;
  for (std::size_t k = 0; k < config.kappa.size(); ++k) {
    for (double eps : config.epsilon) {
      for (int r = 0; r < config.replications; ++r) {
        tasks.push_back({config.curves.front(), config.n.front(), config.kappa[k], eps, r,
                         replication_seed(config.seed, k, r)});
      }
    }
  }
  return run_tasks(config, tasks);
}

std::vector<ResultRow> run_shape_study(const ExperimentConfig& config) {
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < config.curves.size(); ++c) {
    for (std::size_t s = 0; s < config.n.size(); ++s) {
      const std::size_t cell = c * config.n.size() + s;
      for (int r = 0; r < config.replications; ++r) {
        tasks.push_back({config.curves[c], config.n[s], config.kappa.front(), config.epsilon.front(), r,
                         replication_seed(config.seed, cell, r)});
      }
    }
  }
  return run_tasks(config, tasks);
}

std::string results_csv(const std::vector<ResultRow>& rows, const RunMetadata& meta) {
  std::ostringstream out;
  out << csv_metadata(meta);
  out << "replication,curve,n,loss,kappa,epsilon,bias,mse,mspe,predicted,h,lambda,converged,error\n";
  for (const auto& r : rows) {
    out << r.replication << ',' << r.curve << ',' << r.n << ',' << to_string(r.loss) << ',' << format_double(r.kappa)
        << ',' << format_double(r.epsilon) << ',' << format_double(r.bias) << ',' << format_double(r.mse) << ','
        << format_double(r.mspe) << ',' << r.predicted << ',' << format_double(r.h) << ','
        << (r.lambda ? format_double(*r.lambda) : std::string()) << ',' << (r.converged ? "true" : "false") << ','
        << r.error << '\n';
  }
  return out.str();
}

std::string timings_csv(const std::vector<ResultRow>& rows, const RunMetadata& meta) {
  std::ostringstream out;
  out << csv_metadata(meta);
  out << "replication,curve,n,loss,kappa,epsilon,fit_seconds\n";
  for (const auto& r : rows) {
    out << r.replication << ',' << r.curve << ',' << r.n << ',' << to_string(r.loss) << ',' << format_double(r.kappa)
        << ',' << format_double(r.epsilon) << ',' << format_double(r.fit_seconds) << '\n';
  }
  return out.str();
}

namespace {

double parse_field(const CsvTable& t, std::size_t row, const std::string& col) {
  const std::string& v = t.rows[row][t.column(col)];
  if (v == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedResults,
                "row " + std::to_string(row + 1) + ", column '" + col + "': cannot parse '" + v + "'");
  }
}

std::string row_key(const ResultRow& r) {
  return std::to_string(r.replication) + "|" + r.curve + "|" + std::to_string(r.n) + "|" +
         std::string(to_string(r.loss)) + "|" + format_double(r.kappa) + "|" + format_double(r.epsilon);
}

CsvTable parse_results_table(const std::string& text, const char* what) {
  try {
    return parse_csv(text, what);
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedResults, e.what());
  }
}

}  // namespace

std::vector<ResultRow> read_results(const std::string& results_text, const std::optional<std::string>& timings_text) {
  const CsvTable t = parse_results_table(results_text, "results");
  std::vector<ResultRow> rows;
  try {
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      ResultRow r;
      r.replication = static_cast<int>(parse_field(t, i, "replication"));
      r.curve = t.rows[i][t.column("curve")];
      r.n = static_cast<std::size_t>(parse_field(t, i, "n"));
      try {
        r.loss = parse_loss_family(t.rows[i][t.column("loss")]);
      } catch (const Error&) {
        throw Error(ErrorCode::MalformedResults, "row " + std::to_string(i + 1) + ": unknown loss");
      }
      r.kappa = parse_field(t, i, "kappa");
      r.epsilon = parse_field(t, i, "epsilon");
      r.bias = parse_field(t, i, "bias");
      r.mse = parse_field(t, i, "mse");
      r.mspe = parse_field(t, i, "mspe");
      r.predicted = static_cast<std::size_t>(parse_field(t, i, "predicted"));
      r.h = parse_field(t, i, "h");
      if (!t.rows[i][t.column("lambda")].empty()) r.lambda = parse_field(t, i, "lambda");
      r.converged = t.rows[i][t.column("converged")] == "true";
      r.error = t.rows[i][t.column("error")];
      rows.push_back(std::move(r));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnknownColumn) throw Error(ErrorCode::MalformedResults, e.what());
    throw;
  }
  if (timings_text) {
    const CsvTable tt = parse_results_table(*timings_text, "timings");
    std::map<std::string, double> secs;
    try {
      for (std::size_t i = 0; i < tt.rows.size(); ++i) {
        ResultRow key;
        key.replication = static_cast<int>(parse_field(tt, i, "replication"));
        key.curve = tt.rows[i][tt.column("curve")];
        key.n = static_cast<std::size_t>(parse_field(tt, i, "n"));
        key.loss = parse_loss_family(tt.rows[i][tt.column("loss")]);
        key.kappa = parse_field(tt, i, "kappa");
        key.epsilon = parse_field(tt, i, "epsilon");
        secs[row_key(key)] = parse_field(tt, i, "fit_seconds");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MalformedResults) throw;
      throw Error(ErrorCode::MalformedResults, e.what());
    }
    for (auto& r : rows) {
      const auto it = secs.find(row_key(r));
      if (it == secs.end()) throw Error(ErrorCode::MalformedResults, "no timing for result row " + row_key(r));
      r.fit_seconds = it->second;
    }
  }
  return rows;
}

std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(k));
  Rng rng = make_rng(seed, 0);
  // Fisher-Yates with an explicit uniform draw; std::shuffle's use of the
  // engine is implementation-defined.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(labels[i - 1], labels[j]);
  }
  return labels;
}

std::vector<CvSummary> run_cv(const ExperimentConfig& config, const Dataset& data) {
  const auto n = static_cast<std::size_t>(data.n());
  const auto p = static_cast<std::size_t>(data.p());
  if (n < 10 * (p + 2)) {
    throw Error(ErrorCode::DataError, "cross-validation needs n >= 10 (p + 2) = " + std::to_string(10 * (p + 2)));
  }
  const int k = config.folds;
  const std::vector<int> labels = fold_assignment(n, k, split_seed(config.seed, 0));
  const std::size_t L = config.losses.size();
  std::vector<FoldOutcome> outcomes(L * static_cast<std::size_t>(k));

  parallel_for(outcomes.size(), config.jobs, [&](std::size_t task) {
    const std::size_t l = task / static_cast<std::size_t>(k);
    const int fold = static_cast<int>(task % static_cast<std::size_t>(k));
    std::vector<Eigen::Index> train_rows, test_rows;
    for (std::size_t i = 0; i < n; ++i) (labels[i] == fold ? test_rows : train_rows).push_back(static_cast<Eigen::Index>(i));
    FoldOutcome& o = outcomes[task];
    o.fold = fold;
    o.test_size = test_rows.size();
    try {
      const Dataset train = data.subset(train_rows);
      Eigen::MatrixXd X_test(static_cast<Eigen::Index>(test_rows.size()), data.p());
      Eigen::MatrixXd Y_test(static_cast<Eigen::Index>(test_rows.size()), data.d());
      for (std::size_t i = 0; i < test_rows.size(); ++i) {
        X_test.row(static_cast<Eigen::Index>(i)) = data.X().row(test_rows[i]);
        Y_test.row(static_cast<Eigen::Index>(i)) = data.Y().row(test_rows[i]);
      }
      const FitResult f = fit(train, config.loss_spec(config.losses[l]),
                              inner_fit_config(config, split_seed(config.seed, 100 + static_cast<std::uint64_t>(fold))));
      std::tie(o.mspe, o.predicted) = prediction_error(Y_test, predict(f, train, X_test));
    } catch (const std::exception& e) {
      o.mspe = std::numeric_limits<double>::quiet_NaN();
      o.error = error_name(e);
    }
  });

  std::vector<CvSummary> out;
  for (std::size_t l = 0; l < L; ++l) {
    CvSummary s;
    s.loss = config.losses[l];
    double acc = 0.0;
    int used = 0;
    for (int f = 0; f < k; ++f) {
      const FoldOutcome& o = outcomes[l * static_cast<std::size_t>(k) + static_cast<std::size_t>(f)];
      s.folds.push_back(o);
      if (o.error.empty() && o.predicted > 0) {
        acc += o.mspe;
        ++used;
        s.predicted += o.predicted;
      }
    }
    s.mspe = used ? acc / used : std::numeric_limits<double>::quiet_NaN();
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::ordered_json cv_json(const std::vector<CvSummary>& summary, const RunMetadata& meta) {
  nlohmann::ordered_json j;
  j["metadata"] = json_metadata(meta);
  auto& losses = j["losses"] = nlohmann::ordered_json::array();
  for (const auto& s : summary) {
    nlohmann::ordered_json e;
    e["loss"] = to_string(s.loss);
    e["mean_fold_mspe"] = s.mspe;
    e["predicted"] = s.predicted;
    auto& folds = e["folds"] = nlohmann::ordered_json::array();
    for (const auto& f : s.folds) {
      nlohmann::ordered_json fj;
      fj["fold"] = f.fold;
      fj["test_size"] = f.test_size;
      fj["predicted"] = f.predicted;
      fj["mspe"] = f.mspe;
      fj["error"] = f.error.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(f.error);
      folds.push_back(std::move(fj));
    }
    losses.push_back(std::move(e));
  }
  return j;
}

}  // namespace sphindex
