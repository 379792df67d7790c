// sphindex: command-line front end for simulation studies, fitting,
// prediction, robustness diagnostics, bootstrap, tuning, cross-validation and
// plot data.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "sphindex/bootstrap.hpp"
#include "sphindex/config.hpp"
#include "sphindex/diagnostics.hpp"
#include "sphindex/experiments.hpp"
#include "sphindex/ingest.hpp"
#include "sphindex/output.hpp"
#include "sphindex/plotdata.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace sphindex;

namespace {

struct Run {
  std::string command;
  ExperimentConfig config;
  RunMetadata meta;
  fs::path out;

  void write(const std::string& name, const std::string& text) const { write_text_file(out / name, text); }
  void write(const std::string& name, const json& j) const { write_text_file(out / name, j.dump(2) + "\n"); }
};

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::DataError, "cannot read " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

FitConfig fit_config(const Run& run, std::uint64_t stream) {
  FitConfig fc = run.config.fit;
  fc.delta = run.config.delta;
  fc.lambda = run.config.lambda;
  fc.seed = split_seed(run.config.seed, stream);
  fc.jobs = run.config.jobs;
  return fc;
}

// The analysis sample: the configured data file, or else one simulated draw
// from the first design point.
struct Sample {
  Dataset data;
  std::vector<std::string> names;
  std::optional<IngestedData> ingested;
};

Sample load_sample(const Run& run) {
  const auto& c = run.config;
  if (c.data) {
    IngestedData in = ingest_composition_csv(c.data->path, *c.data);
    Dataset d = in.dataset();
    return {std::move(d), in.predictor_names, std::move(in)};
  }
  const SimulatedSample s = simulate_sample(c.curves.front(), c.beta0, c.n.front(), c.kappa.front(),
                                            c.epsilon.front(), split_seed(c.seed, 0));
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < s.X.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
  return {Dataset(s.X, s.Y), names, std::nullopt};
}

json fit_json(const FitResult& f, const Dataset& data) {
  json j;
  j["loss"] = to_string(f.loss.family);
  j["theta"] = vec_json(f.theta_hat.theta());
  j["beta"] = vec_json(f.beta_hat);
  j["h"] = f.h_hat;
  j["lambda"] = f.lambda_hat ? json(*f.lambda_hat) : json();
  j["criterion"] = f.criterion_value;
  j["mse"] = mean_squared_geodesic(data.Y(), f.fitted_sphere);
  j["converged"] = f.diagnostics.converged;
  j["evaluations"] = f.diagnostics.evaluations;
  j["starts"] = f.diagnostics.starts;
  j["outer_rounds"] = f.diagnostics.outer_rounds;
  j["excluded_rows"] = f.diagnostics.excluded_rows;
  j["unconverged_local"] = f.diagnostics.unconverged_local;
  j["kernel"] = to_string(f.kernel.family);
  return j;
}

// Rebuilds a fit from a fit.json entry without re-optimizing.
FitResult fit_from_json(const json& j, const Run& run, const Dataset& data) {
  FitResult f;
  try {
    f.loss = run.config.loss_spec(parse_loss_family(j.at("loss").get<std::string>()));
    const auto theta = j.at("theta").get<std::vector<double>>();
    Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    if (t.size() != data.p() - 1) throw Error(ErrorCode::DataError, "fit_file theta does not match the data width");
    f.theta_hat = IndexParam(t);
    f.h_hat = j.at("h").get<double>();
    if (!j.at("lambda").is_null()) {
      f.lambda_hat = j.at("lambda").get<double>();
      f.loss.lambda = *f.lambda_hat;
    }
    f.kernel.family = parse_kernel_family(j.at("kernel").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DataError, std::string("malformed fit_file: ") + e.what());
  }
  f.beta_hat = beta_from_theta(f.theta_hat);
  f.local = run.config.fit.local;
  f.extrapolation_guard = run.config.fit.extrapolation_guard;
  f.fitted_index = data.X() * f.beta_hat;
  return f;
}

std::string matrix_csv(const RunMetadata& meta, const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  out << csv_metadata(meta);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << r[j];
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Run& run) {
  const auto& c = run.config;
  if (c.study == "contamination" || c.study == "shape") {
    const auto rows = c.study == "contamination" ? run_contamination_study(c) : run_shape_study(c);
    run.write("results.csv", results_csv(rows, run.meta));
    run.write("timings.csv", timings_csv(rows, run.meta));
    std::size_t failed = 0;
    for (const auto& r : rows) failed += !r.error.empty();
    std::cout << rows.size() << " result rows (" << failed << " failed fits) written to " << run.out.string() << "\n";
    return 0;
  }
  const SimulatedSample s = simulate_sample(c.curves.front(), c.beta0, c.n.front(), c.kappa.front(),
                                            c.epsilon.front(), split_seed(c.seed, 0));
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows(static_cast<std::size_t>(s.X.rows()));
  if (c.study == "dataset") {
    for (Eigen::Index j = 0; j < s.X.cols(); ++j) header.push_back("x" + std::to_string(j + 1));
    for (Eigen::Index j = 0; j < s.Y.cols(); ++j) header.push_back("y" + std::to_string(j + 1));
    for (Eigen::Index i = 0; i < s.X.rows(); ++i) {
      auto& r = rows[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < s.X.cols(); ++j) r.push_back(format_double(s.X(i, j)));
      for (Eigen::Index j = 0; j < s.Y.cols(); ++j) r.push_back(format_double(s.Y(i, j)));
    }
    run.write("dataset.csv", matrix_csv(run.meta, header, rows));
  } else {
    // Synthetic compositions: squared response coordinates as parts, the
    // second predictor stored on the exponential scale, a three-level grade
    // column without effect and a site column with a rare level.
    header = {"part1", "part2", "part3"};
    for (Eigen::Index j = 0; j < s.X.cols(); ++j) header.push_back(j == 1 ? "x2_raw" : "x" + std::to_string(j + 1));
    header.push_back("grade");
    header.push_back("site");
    for (Eigen::Index i = 0; i < s.X.rows(); ++i) {
      auto& r = rows[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < 3; ++j) r.push_back(format_double(s.Y(i, j) * s.Y(i, j)));
      for (Eigen::Index j = 0; j < s.X.cols(); ++j) r.push_back(format_double(j == 1 ? std::exp(s.X(i, j)) : s.X(i, j)));
      r.push_back(std::string(1, static_cast<char>('a' + i % 3)));
      r.push_back(i % 50 == 49 ? "rare" : "main");
    }
    run.write("composition.csv", matrix_csv(run.meta, header, rows));
  }
  std::cout << s.X.rows() << " rows written to " << run.out.string() << "\n";
  return 0;
}

int cmd_fit(const Run& run) {
  const Sample s = load_sample(run);
  json j;
  j["metadata"] = json_metadata(run.meta);
  j["n"] = s.data.n();
  j["predictors"] = s.names;
  j["fits"] = json::array();
  std::vector<std::string> header{"row", "loss", "index"};
  for (Eigen::Index k = 0; k < s.data.d(); ++k) header.push_back("fitted" + std::to_string(k + 1));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t l = 0; l < run.config.losses.size(); ++l) {
    const LossFamily family = run.config.losses[l];
    const FitResult f = fit(s.data, run.config.loss_spec(family), fit_config(run, 10 + l));
    j["fits"].push_back(fit_json(f, s.data));
    for (Eigen::Index i = 0; i < s.data.n(); ++i) {
      std::vector<std::string> r{std::to_string(i), std::string(to_string(family)), format_double(f.fitted_index[i])};
      for (Eigen::Index k = 0; k < s.data.d(); ++k) r.push_back(format_double(f.fitted_sphere(i, k)));
      rows.push_back(std::move(r));
    }
    std::cout << to_string(family) << ": beta = " << f.beta_hat.transpose() << ", h = " << f.h_hat << "\n";
  }
  run.write("fit.json", j);
  run.write("fitted.csv", matrix_csv(run.meta, header, rows));
  return 0;
}

int cmd_predict(const Run& run) {
  const auto& c = run.config;
  const Sample s = load_sample(run);
  Eigen::MatrixXd X_new;
  std::optional<Eigen::MatrixXd> Y_new;
  if (c.new_data) {
    const CsvTable t = read_csv(*c.new_data);
    if (s.ingested) {
      std::vector<std::size_t> kept;
      X_new = encode_predictors(t, *c.data, *s.ingested, &kept);
      bool has_responses = true;
      for (const auto& name : c.data->responses) {
        has_responses = has_responses && std::find(t.header.begin(), t.header.end(), name) != t.header.end();
      }
      if (has_responses) Y_new = encode_responses(t, *c.data, kept);
    } else {
      X_new.resize(static_cast<Eigen::Index>(t.rows.size()), s.data.p());
      for (Eigen::Index j = 0; j < s.data.p(); ++j) {
        const std::size_t col = t.column("x" + std::to_string(j + 1));
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
          try {
            X_new(static_cast<Eigen::Index>(i), j) = std::stod(t.rows[i][col]);
          } catch (const std::exception&) {
            throw Error(ErrorCode::DataError, "new_data row " + std::to_string(i + 1) + ": bad predictor value");
          }
        }
      }
    }
  } else {
    if (c.data) throw Error(ErrorCode::ConfigError, "predict on a data file needs new_data");
    const SimulatedSample test = simulate_sample(c.curves.front(), c.beta0, c.test_size, c.kappa.front(), 0.0,
                                                 split_seed(c.seed, 1));
    X_new = test.X;
    Y_new = test.Y;
  }

  std::optional<json> stored;
  if (c.fit_file) {
    try {
      stored = json::parse(read_text(*c.fit_file));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::DataError, std::string("malformed fit_file: ") + e.what());
    }
  }

  json j;
  j["metadata"] = json_metadata(run.meta);
  j["points"] = X_new.rows();
  j["predictions"] = json::array();
  std::vector<std::string> header{"row", "loss", "status"};
  for (Eigen::Index k = 0; k < s.data.d(); ++k) header.push_back("predicted" + std::to_string(k + 1));
  if (Y_new) header.push_back("geodesic_error");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t l = 0; l < c.losses.size(); ++l) {
    const LossFamily family = c.losses[l];
    FitResult f;
    if (stored) {
      const json* entry = nullptr;
      for (const auto& e : stored->at("fits")) {
        if (e.at("loss").get<std::string>() == to_string(family)) entry = &e;
      }
      if (!entry) throw Error(ErrorCode::DataError, "fit_file has no fit for loss " + std::string(to_string(family)));
      f = fit_from_json(*entry, run, s.data);
    } else {
      f = fit(s.data, c.loss_spec(family), fit_config(run, 10 + l));
    }
    const Prediction pred = predict(f, s.data, X_new);
    double acc = 0.0;
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < X_new.rows(); ++i) {
      const auto& err = pred.errors[static_cast<std::size_t>(i)];
      std::vector<std::string> r{std::to_string(i), std::string(to_string(family)),
                                 err ? std::string(to_string(*err)) : "ok"};
      for (Eigen::Index k = 0; k < s.data.d(); ++k) r.push_back(format_double(pred.Y(i, k)));
      if (Y_new) {
        double e = std::numeric_limits<double>::quiet_NaN();
        if (!err) {
          e = std::acos(std::clamp(Y_new->row(i).dot(pred.Y.row(i)), -1.0, 1.0));
          acc += e * e;
          ++count;
        }
        r.push_back(format_double(e));
      }
      rows.push_back(std::move(r));
    }
    json pj;
    pj["loss"] = to_string(family);
    pj["beta"] = vec_json(f.beta_hat);
    pj["h"] = f.h_hat;
    pj["predicted"] = std::count_if(pred.errors.begin(), pred.errors.end(), [](const auto& e) { return !e; });
    pj["mspe"] = Y_new && count ? json(acc / static_cast<double>(count)) : json();
    j["predictions"].push_back(pj);
  }
  run.write("predictions.csv", matrix_csv(run.meta, header, rows));
  run.write("predict.json", j);
  return 0;
}

int cmd_diagnose(const Run& run) {
  const auto& c = run.config;
  const Sample s = load_sample(run);
  NuisanceConfig nc;
  nc.trim = c.trim;
  json j;
  j["metadata"] = json_metadata(run.meta);
  j["predictors"] = s.names;
  j["fits"] = json::array();
  std::vector<SgesRow> table;
  for (std::size_t l = 0; l < c.losses.size(); ++l) {
    const LossFamily family = c.losses[l];
    const FitResult f = fit(s.data, c.loss_spec(family), fit_config(run, 10 + l));
    json fj = fit_json(f, s.data);
    try {
      const NuisanceEstimates nuis = estimate_nuisance(f, s.data, f.loss, nc);
      const Eigen::MatrixXd disp = nuis.dispersion();
      fj["W0"] = mat_json(nuis.W0());
      fj["M0"] = mat_json(nuis.M0());
      fj["dispersion"] = mat_json(disp);
      // Plug-in standard errors of theta: sqrt(diag(dispersion) / n).
      fj["theta_se"] = vec_json((disp.diagonal() / static_cast<double>(s.data.n())).cwiseSqrt());
      SgesGrid grid;
      grid.sweep = c.sweep;
      grid.trim = c.trim;
      const SensitivityValue sv = grid_sensitivity(s.data, nuis, grid);
      fj["ges"] = sv.ges;
      fj["sges"] = sv.sges;
    } catch (const Error& e) {
      fj["nuisance_error"] = std::string(to_string(e.code()));
    }
    j["fits"].push_back(fj);

    SgesConfig sc;
    sc.n = c.sges_n;
    sc.curve = c.curves.front();
    sc.beta0 = c.beta0;
    sc.fit = fit_config(run, 20 + l);
    sc.nuisance = nc;
    sc.grid.sweep = c.sweep;
    sc.grid.trim = c.trim;
    sc.seed = split_seed(c.seed, 30 + l);
    const auto rows = empirical_sges(c.loss_spec(family), c.kappa, sc);
    table.insert(table.end(), rows.begin(), rows.end());
  }
  run.write("diagnose.json", j);
  run.write("sges.csv", csv_metadata(run.meta) + sges_csv(table));
  return 0;
}

int cmd_bootstrap(const Run& run) {
  const auto& c = run.config;
  const Sample s = load_sample(run);
  json j;
  j["metadata"] = json_metadata(run.meta);
  j["predictors"] = s.names;
  j["results"] = json::array();
  std::vector<std::string> header{"loss", "replicate"};
  for (const auto& n : s.names) header.push_back("beta_" + n);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t l = 0; l < c.losses.size(); ++l) {
    const LossFamily family = c.losses[l];
    const FitResult f = fit(s.data, c.loss_spec(family), fit_config(run, 10 + l));
    BootstrapConfig bc;
    bc.fit = fit_config(run, 40 + l);
    bc.fit.jobs = 1;
    bc.refit_evaluations = c.refit_evaluations;
    bc.recenter = c.recenter;
    bc.jobs = c.jobs;
    const BootstrapResult b = bootstrap_se(f, s.data, f.loss, c.bootstrap_rounds, split_seed(c.seed, 50 + l), bc);
    json bj;
    bj["loss"] = to_string(family);
    bj["beta"] = vec_json(f.beta_hat);
    bj["se"] = vec_json(b.se);
    bj["h"] = f.h_hat;
    bj["lambda"] = f.lambda_hat ? json(*f.lambda_hat) : json();
    bj["mse"] = mean_squared_geodesic(s.data.Y(), f.fitted_sphere);
    bj["rounds"] = b.B;
    bj["failures"] = b.failures;
    bj["excluded_residuals"] = b.excluded_residuals;
    bj["recentered"] = b.recentered;
    j["results"].push_back(bj);
    for (Eigen::Index r = 0; r < b.replicates.rows(); ++r) {
      std::vector<std::string> row{std::string(to_string(family)), std::to_string(r)};
      for (Eigen::Index k = 0; k < b.replicates.cols(); ++k) row.push_back(format_double(b.replicates(r, k)));
      rows.push_back(std::move(row));
    }
  }
  run.write("bootstrap.json", j);
  run.write("bootstrap_replicates.csv", matrix_csv(run.meta, header, rows));
  return 0;
}

int cmd_tune(const Run& run) {
  const auto& c = run.config;
  json j;
  j["metadata"] = json_metadata(run.meta);
  j["delta"] = c.delta;
  j["dimensions"] = json::array();
  std::vector<std::vector<std::string>> rows;
  auto or_null = [](auto&& f) -> json {
    try {
      return f();
    } catch (const Error&) {
      return json();
    }
  };
  for (int d : c.dims) {
    // Minimiser of the weighted criterion over a fine grid, ignoring the pole.
    double best_delta = std::numeric_limits<double>::quiet_NaN(), best = std::numeric_limits<double>::infinity();
    for (int k = 1; k < 10000; ++k) {
      const double delta = k / 10000.0;
      try {
        const double v = tradeoff_criterion(delta, d, c.w_efficiency, c.w_robustness);
        if (v < best) {
          best = v;
          best_delta = delta;
        }
      } catch (const Error&) {
      }
    }
    json dj;
    dj["d"] = d;
    dj["K"] = k_delta(c.delta, d);
    dj["c"] = c_delta(c.delta, d);
    dj["R"] = or_null([&] { return r_delta(c.delta, d); });
    dj["Q"] = q_delta(c.delta, d);
    dj["ARE"] = or_null([&] { return are_esl(c.delta, d); });
    dj["delta_opt"] = delta_opt(d);
    dj["tradeoff_argmin"] = best_delta;
    j["dimensions"].push_back(dj);
    rows.push_back({std::to_string(d), format_double(c.delta), format_double(k_delta(c.delta, d)),
                    format_double(c_delta(c.delta, d)), dj["R"].is_null() ? "nan" : format_double(dj["R"].get<double>()),
                    format_double(q_delta(c.delta, d)),
                    dj["ARE"].is_null() ? "nan" : format_double(dj["ARE"].get<double>()), format_double(delta_opt(d)),
                    format_double(best_delta)});
  }
  run.write("tune.json", j);
  run.write("tune.csv", matrix_csv(run.meta, {"d", "delta", "K", "c", "R", "Q", "ARE", "delta_opt", "tradeoff_argmin"},
                                   rows));
  return 0;
}

int cmd_cv(const Run& run) {
  const Sample s = load_sample(run);
  const auto summary = run_cv(run.config, s.data);
  run.write("cv.json", cv_json(summary, run.meta));
  for (const auto& e : summary) std::cout << to_string(e.loss) << ": CV-MSPE " << e.mspe << "\n";
  return 0;
}

int cmd_plotdata(const Run& run) {
  const auto& c = run.config;
  const PlotKind kind = parse_plot_kind(c.kind);
  if (kind == PlotKind::Tradeoff) {
    run.write("plot_tradeoff.csv", tradeoff_csv(c.dims, c.w_efficiency, c.w_robustness, run.meta));
    return 0;
  }
  if (!c.results) throw Error(ErrorCode::ConfigError, "plotdata needs a results file");
  std::optional<std::string> timings;
  if (kind == PlotKind::Barplot) {
    if (!c.timings) throw Error(ErrorCode::ConfigError, "barplot needs a timings file");
    timings = read_text(*c.timings);
  }
  const auto rows = read_results(read_text(*c.results), timings);
  if (kind == PlotKind::Boxplot) {
    run.write("plot_boxplot.csv", boxplot_csv(rows, run.meta));
  } else {
    run.write("plot_barplot.csv", barplot_csv(rows, run.meta));
  }
  return 0;
}

int exit_code(ErrorCode code) {
  switch (category(code)) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Numerical: return 4;
  }
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extrinsic single-index regression for spherical responses"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<long long> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "run a simulation study or write a simulated dataset"},
      {"fit", "estimate the index and bandwidth for each configured loss"},
      {"predict", "fit (or load a fit) and predict at new predictors"},
      {"diagnose", "plug-in asymptotic matrices and empirical gross-error sensitivities"},
      {"bootstrap", "rotated-residual bootstrap standard errors of beta"},
      {"tune", "efficiency and robustness calculus for the ESL constant delta"},
      {"cv", "k-fold cross-validated prediction error"},
      {"plotdata", "plot-ready tables from results or the tuning calculus"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Run run;
    run.command = app.get_subcommands().front()->get_name();
    ConfigFile file = ConfigFile::load(config_path);
    if (seed) {
      if (*seed < 0) throw Error(ErrorCode::ConfigError, "--seed must be nonnegative");
      file.set("seed", std::to_string(*seed));
    }
    if (jobs) file.set("jobs", std::to_string(*jobs));
    if (out) file.set("out", *out);
    run.config = parse_experiment(file);
    run.meta = {run.command, file.hash(), run.config.seed};
    run.out = run.config.output_dir;
    fs::create_directories(run.out);

    if (run.command == "simulate") return cmd_simulate(run);
    if (run.command == "fit") return cmd_fit(run);
    if (run.command == "predict") return cmd_predict(run);
    if (run.command == "diagnose") return cmd_diagnose(run);
    if (run.command == "bootstrap") return cmd_bootstrap(run);
    if (run.command == "tune") return cmd_tune(run);
    if (run.command == "cv") return cmd_cv(run);
    return cmd_plotdata(run);
  } catch (const Error& e) {
    std::cerr << "sphindex: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "sphindex: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "sphindex: " << e.what() << "\n";
    return 4;
  }
}
