#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "sphindex/config.hpp"
#include "sphindex/experiments.hpp"
#include "sphindex/ingest.hpp"
#include "sphindex/output.hpp"
#include "sphindex/plotdata.hpp"

using namespace sphindex;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::ConfigError;
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

const char* kSoil =
    "part1,part2,part3,x1,x2,grade,site\n"
    "0.25,0.25,0.5,1.0,1.0,a,main\n"
    "1,2,1,2.0,10.0,b,main\n"
    "3,1,1,3.0,100.0,c,main\n"
    "1,1,3,4.0,1000.0,b,rare\n"
    "2,2,1,5.0,10.0,a,main\n"
    "1,3,2,6.0,1.0,c,main\n"
    "2,1,2,7.5,3.0,b,main\n"
    "1,2,4,8.0,30.0,a,main\n";

DataSpec soil_spec() {
  DataSpec s;
  s.responses = {"part1", "part2", "part3"};
  s.continuous = {"x1", "x2"};
  s.log_columns = {"x2"};
  s.categorical = {{"grade", "a"}};
  s.drop_levels = {{"site", "rare"}};
  return s;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("parses typed values and rejects unknown or repeated keys") {
  const ConfigFile f = ConfigFile::parse(
      "# study\nstudy = shape\nn = 100, 200\nkappa = 5,25 # trailing\ncurve = mu1, mu3\nlosses = ls, huber\n"
      "huber_c = 0.5\nseed = 9\nkernel = gaussian\n");
  const ExperimentConfig c = parse_experiment(f);
  CHECK(c.study == "shape");
  CHECK(c.n == std::vector<std::size_t>{100, 200});
  CHECK(c.kappa == std::vector<double>{5.0, 25.0});
  CHECK(c.curves == std::vector<MeanCurve>{MeanCurve::Mu1, MeanCurve::Mu3});
  CHECK(c.loss_spec(LossFamily::Huber).huber_c == 0.5);
  CHECK(c.seed == 9);
  CHECK(c.fit.seed == 9);
  CHECK(c.fit.kernel.family == KernelFamily::Gaussian);
  CHECK(std::abs(c.beta0.norm() - 1.0) < 1e-15);

  CHECK(code_of([] { parse_experiment(ConfigFile::parse("colour = red\n")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { ConfigFile::parse("n = 1\nn = 2\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_experiment(ConfigFile::parse("n = many\n")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_experiment(ConfigFile::parse("delta = 1.5\n")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_experiment(ConfigFile::parse("beta0 = -1, 1, 1\n")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { ConfigFile::parse("just words\n"); }) == ErrorCode::ConfigError);
}

TEST_CASE("hash ignores jobs and out but not result-changing keys") {
  ConfigFile a = ConfigFile::parse("n = 50\nseed = 1\n");
  ConfigFile b = a;
  b.set("jobs", "8");
  b.set("out", "/tmp/elsewhere");
  CHECK(a.hash() == b.hash());
  b.set("seed", "2");
  CHECK(a.hash() != b.hash());
  CHECK(hex_hash(0x1234) == "0000000000001234");
}

}  // TEST_SUITE

TEST_SUITE("output") {

TEST_CASE("number formatting round-trips") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(std::nan("")) == "nan");
  for (double x : {1.0 / 3.0, 2.5e-300, 6.02214076e23, -0.0}) CHECK(std::stod(format_double(x)) == x);
  const std::string head = csv_metadata({"fit", 0xabcULL, 42});
  CHECK(head.find("# command: fit\n") != std::string::npos);
  CHECK(head.find("# seed: 42\n") != std::string::npos);
  CHECK(json_metadata({"fit", 1, 2})["seed"] == 2);
}

}  // TEST_SUITE

TEST_SUITE("ingest") {

TEST_CASE("square-root composition transform") {
  const Eigen::VectorXd s = sqrt_composition(Eigen::Vector3d(0.25, 0.25, 0.5));
  CHECK((s - Eigen::Vector3d(0.5, 0.5, std::sqrt(0.5))).norm() < 1e-15);
  CHECK((sqrt_composition(Eigen::Vector3d(2, 2, 4)) - s).norm() < 1e-15);
  CHECK(code_of([] { sqrt_composition(Eigen::Vector3d(-0.1, 0.5, 0.6)); }) == ErrorCode::NegativeComposition);
  CHECK(code_of([] { sqrt_composition(Eigen::Vector3d::Zero()); }) == ErrorCode::ZeroRowSum);
}

TEST_CASE("csv parsing") {
  const CsvTable t = parse_csv("# note\na,b\n1,\"x, y\"\n");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.rows[0][1] == "x, y");
  CHECK(code_of([&] { t.column("c"); }) == ErrorCode::UnknownColumn);
  CHECK(code_of([] { parse_csv("a,b\n1,2,3\n"); }) == ErrorCode::DataError);
}

TEST_CASE("composition pipeline codes, standardizes and drops levels") {
  const CsvTable t = parse_csv(kSoil);
  const IngestedData in = ingest_composition(t, soil_spec());
  CHECK(in.X.rows() == 7);
  CHECK(in.source_rows == std::vector<std::size_t>{0, 1, 2, 4, 5, 6, 7});
  CHECK(in.predictor_names == std::vector<std::string>{"x1", "x2", "grade_b", "grade_c"});
  for (int j = 0; j < 2; ++j) {
    const double mean = in.X.col(j).mean();
    const double sd = std::sqrt((in.X.col(j).array() - mean).square().sum() / 6.0);
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(sd - 1.0) < 1e-10);
  }
  CHECK(in.X.col(2) == Eigen::Vector<double, 7>(0, 1, 0, 0, 0, 1, 0));
  CHECK(in.X.col(3) == Eigen::Vector<double, 7>(0, 0, 1, 0, 1, 0, 0));
  CHECK((in.Y.row(0).transpose() - Eigen::Vector3d(0.5, 0.5, std::sqrt(0.5))).norm() < 1e-15);
  // x2 is log-transformed: equally spaced on the log scale.
  CHECK(in.X(1, 1) - in.X(0, 1) == doctest::Approx(in.X(2, 1) - in.X(1, 1)));

  // Re-encoding the training table gives the same design.
  std::vector<std::size_t> kept;
  const Eigen::MatrixXd again = encode_predictors(t, soil_spec(), in, &kept);
  CHECK(kept == in.source_rows);
  CHECK((again - in.X).norm() < 1e-12);
  CHECK((encode_responses(t, soil_spec(), kept) - in.Y).norm() < 1e-15);

  DataSpec bad = soil_spec();
  bad.continuous.push_back("depth");
  CHECK(code_of([&] { ingest_composition(t, bad); }) == ErrorCode::UnknownColumn);
  std::string negative = kSoil;
  negative.replace(negative.find("0.25,0.25"), 4, "-0.2");
  const CsvTable neg = parse_csv(negative);
  CHECK(code_of([&] { ingest_composition(neg, soil_spec()); }) == ErrorCode::NegativeComposition);
  const CsvTable unseen = parse_csv("part1,part2,part3,x1,x2,grade,site\n1,1,1,1,1,z,main\n");
  CHECK(code_of([&] { encode_predictors(unseen, soil_spec(), in); }) == ErrorCode::DataError);
}

}  // TEST_SUITE

TEST_SUITE("experiments") {

TEST_CASE("fold labels are balanced and seeded") {
  const auto a = fold_assignment(103, 10, 5);
  CHECK(a == fold_assignment(103, 10, 5));
  CHECK(a != fold_assignment(103, 10, 6));
  std::vector<int> counts(10, 0);
  for (int f : a) ++counts[static_cast<std::size_t>(f)];
  for (int c : counts) CHECK((c == 10 || c == 11));
}

TEST_CASE("a small contamination study has one row per replication, cell and loss") {
  ExperimentConfig cfg = parse_experiment(ConfigFile::parse(
      "n = 40\nkappa = 50\nepsilon = 0, 0.2\nreplications = 2\nlosses = ls, l1\nrandom_starts = 1\n"
      "max_evaluations = 80\ntest_size = 10\nseed = 3\n"));
  const auto rows = run_contamination_study(cfg);
  CHECK(rows.size() == 2 * 2 * 2);
  std::set<std::tuple<int, double, LossFamily>> keys;
  for (const auto& r : rows) {
    keys.insert({r.replication, r.epsilon, r.loss});
    if (r.error.empty()) {
      CHECK(r.bias >= 0.0);
      CHECK(r.predicted <= 10);
    }
  }
  CHECK(keys.size() == rows.size());
  CHECK(replication_seed(3, 0, 1) != replication_seed(3, 1, 0));

  const RunMetadata meta{"simulate", 1, 3};
  const std::string csv = results_csv(rows, meta);
  const auto back = read_results(csv, timings_csv(rows, meta));
  REQUIRE(back.size() == rows.size());
  CHECK(back[3].loss == rows[3].loss);
  CHECK(format_double(back[3].bias) == format_double(rows[3].bias));
  CHECK(back[3].fit_seconds == doctest::Approx(rows[3].fit_seconds).epsilon(1e-12));
  CHECK(results_csv(back, meta) == csv);
  CHECK(code_of([] { read_results("replication,curve\n1,spiral61\n"); }) == ErrorCode::MalformedResults);
  CHECK(code_of([&] { read_results(csv, std::string("replication\n")); }) == ErrorCode::MalformedResults);
}

TEST_CASE("cross-validation needs enough rows per fold") {
  ExperimentConfig cfg = parse_experiment(ConfigFile::parse("folds = 10\n"));
  const SimulatedSample s = simulate_sample(MeanCurve::Spiral61, cfg.beta0, 30, 50.0, 0.0, 1);
  CHECK(code_of([&] { run_cv(cfg, Dataset(s.X, s.Y)); }) == ErrorCode::DataError);
}

}  // TEST_SUITE

TEST_SUITE("plotdata") {

TEST_CASE("tradeoff table") {
  const std::string csv = tradeoff_csv({3}, 1.0, 1.0, {"plotdata", 1, 1});
  const auto lines = data_lines(csv);
  REQUIRE(lines.size() == 200);
  CHECK(lines[0] == "d,delta,K,c,R,Q,ARE,L");
  double best_q = 1e300, best_delta = 0.0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> f;
    std::stringstream ss(lines[i]);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    REQUIRE(f.size() == 8);
    const double delta = std::stod(f[1]);
    if (f[1] == "0.4") CHECK(std::stod(f[6]) == doctest::Approx(0.7056).epsilon(1e-12));
    const double q = std::stod(f[5]);
    if (q < best_q) best_q = q, best_delta = delta;
  }
  CHECK(std::abs(best_delta - 1.0 / 3.0) < 0.02);
  CHECK(parse_plot_kind("barplot") == PlotKind::Barplot);
  CHECK(code_of([] { parse_plot_kind("pie"); }) == ErrorCode::ConfigError);
}

TEST_CASE("boxplot and barplot tables") {
  ResultRow r;
  r.curve = "spiral61";
  r.n = 100;
  r.bias = std::exp(-2.0);
  r.mse = 1.0;
  r.mspe = std::exp(1.0);
  r.fit_seconds = 0.5;
  std::vector<ResultRow> rows{r, r, r};
  rows[1].fit_seconds = 0.1;
  rows[2].fit_seconds = 0.9;
  const auto box = data_lines(boxplot_csv(rows, {"plotdata", 1, 1}));
  CHECK(box.size() == 4);
  CHECK(box[1].find("-2") != std::string::npos);
  const auto bar = data_lines(barplot_csv(rows, {"plotdata", 1, 1}));
  REQUIRE(bar.size() == 2);
  CHECK(bar[1].find("0.5") != std::string::npos);
}

}  // TEST_SUITE
