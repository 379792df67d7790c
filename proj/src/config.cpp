#include "sphindex/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "sphindex/error.hpp"

namespace sphindex {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::ConfigError, "key '" + key + "': " + why);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x)) bad(key, "expected a number, got '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, "expected an integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  bad(key, "expected true or false, got '" + v + "'");
}

std::pair<std::string, std::string> to_pair(const std::string& key, const std::string& v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == v.size()) {
    bad(key, "expected column:level, got '" + v + "'");
  }
  return {trim(v.substr(0, colon)), trim(v.substr(colon + 1))};
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& source) {
  ConfigFile out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::ConfigError, source + ":" + std::to_string(lineno) + ": empty key");
    if (out.entries_.count(key)) {
      throw Error(ErrorCode::ConfigError, source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    out.entries_[key] = value;
  }
  return out;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ConfigFile out = parse(buf.str(), path.string());
  out.base_dir_ = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return out;
}

std::uint64_t ConfigFile::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : entries_) {
    if (k == "jobs" || k == "out") continue;
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  return h;
}

LossSpec ExperimentConfig::loss_spec(LossFamily family) const {
  switch (family) {
    case LossFamily::LS: return LossSpec::ls();
    case LossFamily::ESL: return LossSpec::esl(lambda.value_or(1.0));
    case LossFamily::L1: return LossSpec::l1();
    case LossFamily::Huber: return LossSpec::huber(huber_c);
  }
  return LossSpec::ls();
}

ExperimentConfig parse_experiment(const ConfigFile& file) {
  ExperimentConfig c;
  const auto& base = file.base_dir();
  auto path_of = [&base](const std::string& v) {
    const std::filesystem::path p(v);
    return p.is_absolute() ? p : base / p;
  };
  DataSpec data;
  bool has_data = false;
  std::optional<Eigen::VectorXd> beta0;

  using Handler = std::function<void(const std::string&, const std::string&)>;
  auto positive_count = [](const std::string& k, const std::string& v) {
    const long long x = to_int(k, v);
    if (x < 1) bad(k, "must be at least 1");
    return x;
  };
  auto unit_interval = [](const std::string& k, const std::string& v, bool closed_left) {
    const double x = to_double(k, v);
    if (!(x < 1.0 && (closed_left ? x >= 0.0 : x > 0.0))) bad(k, "must lie in [0, 1)");
    return x;
  };

  const std::map<std::string, Handler> handlers{
      {"study",
       [&](auto& k, auto& v) {
         static const std::set<std::string> ok{"contamination", "shape", "dataset", "composition"};
         if (!ok.count(v)) bad(k, "unknown study '" + v + "'");
         c.study = v;
       }},
      {"n",
       [&](auto& k, auto& v) {
         c.n.clear();
         for (const auto& s : split(v, ',')) {
           const long long x = to_int(k, s);
           if (x < 10) bad(k, "sample sizes must be at least 10");
           c.n.push_back(static_cast<std::size_t>(x));
         }
         if (c.n.empty()) bad(k, "empty list");
       }},
      {"p", [&](auto& k, auto& v) {
         const long long x = to_int(k, v);
         if (x < 2) bad(k, "must be at least 2");
         c.p = static_cast<std::size_t>(x);
       }},
      {"d", [&](auto& k, auto& v) {
         if (to_int(k, v) != 3) bad(k, "the simulation curves live on S^2; only d = 3 is supported");
         c.d = 3;
       }},
      {"kappa",
       [&](auto& k, auto& v) {
         c.kappa.clear();
         for (const auto& s : split(v, ',')) {
           const double x = to_double(k, s);
           if (x < 0.0) bad(k, "concentrations must be nonnegative");
           c.kappa.push_back(x);
         }
         if (c.kappa.empty()) bad(k, "empty list");
       }},
      {"epsilon",
       [&](auto& k, auto& v) {
         c.epsilon.clear();
         for (const auto& s : split(v, ',')) c.epsilon.push_back(unit_interval(k, s, true));
         if (c.epsilon.empty()) bad(k, "empty list");
       }},
      {"curve",
       [&](auto& k, auto& v) {
         c.curves.clear();
         for (const auto& s : split(v, ',')) {
           try {
             c.curves.push_back(parse_mean_curve(s));
           } catch (const Error&) {
             bad(k, "unknown curve '" + s + "'");
           }
         }
         if (c.curves.empty()) bad(k, "empty list");
       }},
      {"beta0",
       [&](auto& k, auto& v) {
         const auto parts = split(v, ',');
         Eigen::VectorXd b(static_cast<Eigen::Index>(parts.size()));
         for (std::size_t j = 0; j < parts.size(); ++j) b[static_cast<Eigen::Index>(j)] = to_double(k, parts[j]);
         if (b.size() < 2 || !(b[0] > 0.0)) bad(k, "needs at least 2 entries and a positive first entry");
         beta0 = b.normalized();
       }},
      {"test_size", [&](auto& k, auto& v) { c.test_size = static_cast<std::size_t>(positive_count(k, v)); }},
      {"replications", [&](auto& k, auto& v) { c.replications = static_cast<int>(positive_count(k, v)); }},
      {"losses",
       [&](auto& k, auto& v) {
         c.losses.clear();
         for (const auto& s : split(v, ',')) {
           try {
             c.losses.push_back(parse_loss_family(s));
           } catch (const Error&) {
             bad(k, "unknown loss '" + s + "'");
           }
         }
         if (c.losses.empty()) bad(k, "empty list");
       }},
      {"delta",
       [&](auto& k, auto& v) {
         c.delta = unit_interval(k, v, false);
         c.fit.delta = c.delta;
       }},
      {"lambda",
       [&](auto& k, auto& v) {
         const double x = to_double(k, v);
         if (!(x > 0.0)) bad(k, "must be positive");
         c.lambda = x;
         c.fit.lambda = x;
       }},
      {"huber_c",
       [&](auto& k, auto& v) {
         c.huber_c = to_double(k, v);
         if (!(c.huber_c > 0.0)) bad(k, "must be positive");
       }},
      {"kernel",
       [&](auto& k, auto& v) {
         try {
           c.fit.kernel.family = parse_kernel_family(v);
         } catch (const Error&) {
           bad(k, "unknown kernel '" + v + "'");
         }
       }},
      {"h_lower", [&](auto& k, auto& v) { c.fit.h_lower = to_double(k, v); }},
      {"h_upper", [&](auto& k, auto& v) { c.fit.h_upper = to_double(k, v); }},
      {"random_starts",
       [&](auto& k, auto& v) {
         const long long x = to_int(k, v);
         if (x < 0) bad(k, "must be nonnegative");
         c.fit.random_starts = static_cast<int>(x);
       }},
      {"coordinate_starts", [&](auto& k, auto& v) { c.fit.coordinate_starts = to_bool(k, v); }},
      {"max_evaluations", [&](auto& k, auto& v) { c.fit.max_evaluations = static_cast<int>(positive_count(k, v)); }},
      {"coarse_evaluations",
       [&](auto& k, auto& v) { c.fit.coarse_evaluations = static_cast<int>(positive_count(k, v)); }},
      {"data",
       [&](auto&, auto& v) {
         data.path = path_of(v);
         has_data = true;
       }},
      {"responses", [&](auto&, auto& v) { data.responses = split(v, ','); }},
      {"response_transform",
       [&](auto& k, auto& v) {
         if (v == "sqrt") {
           data.sqrt_transform = true;
         } else if (v == "none") {
           data.sqrt_transform = false;
         } else {
           bad(k, "expected sqrt or none");
         }
       }},
      {"continuous", [&](auto&, auto& v) { data.continuous = split(v, ','); }},
      {"log", [&](auto&, auto& v) { data.log_columns = split(v, ','); }},
      {"categorical",
       [&](auto& k, auto& v) {
         for (const auto& s : split(v, ',')) data.categorical.push_back(to_pair(k, s));
       }},
      {"drop_levels",
       [&](auto& k, auto& v) {
         for (const auto& s : split(v, ',')) data.drop_levels.push_back(to_pair(k, s));
       }},
      {"standardize", [&](auto& k, auto& v) { data.standardize = to_bool(k, v); }},
      {"new_data", [&](auto&, auto& v) { c.new_data = path_of(v); }},
      {"fit_file", [&](auto&, auto& v) { c.fit_file = path_of(v); }},
      {"bootstrap_rounds",
       [&](auto& k, auto& v) {
         const long long x = to_int(k, v);
         if (x < 2) bad(k, "must be at least 2");
         c.bootstrap_rounds = static_cast<int>(x);
       }},
      {"refit_evaluations", [&](auto& k, auto& v) { c.refit_evaluations = static_cast<int>(positive_count(k, v)); }},
      {"recenter", [&](auto& k, auto& v) { c.recenter = to_bool(k, v); }},
      {"sges_n",
       [&](auto& k, auto& v) {
         const long long x = to_int(k, v);
         if (x < 20) bad(k, "must be at least 20");
         c.sges_n = static_cast<std::size_t>(x);
       }},
      {"sweep", [&](auto& k, auto& v) { c.sweep = to_bool(k, v); }},
      {"trim",
       [&](auto& k, auto& v) {
         c.trim = to_double(k, v);
         if (!(c.trim >= 0.0 && c.trim < 0.5)) bad(k, "must lie in [0, 0.5)");
       }},
      {"dims",
       [&](auto& k, auto& v) {
         c.dims.clear();
         for (const auto& s : split(v, ',')) {
           const long long x = to_int(k, s);
           if (x < 3) bad(k, "dimensions must be at least 3");
           c.dims.push_back(static_cast<int>(x));
         }
         if (c.dims.empty()) bad(k, "empty list");
       }},
      {"w_efficiency", [&](auto& k, auto& v) { c.w_efficiency = to_double(k, v); }},
      {"w_robustness", [&](auto& k, auto& v) { c.w_robustness = to_double(k, v); }},
      {"folds",
       [&](auto& k, auto& v) {
         const long long x = to_int(k, v);
         if (x < 2) bad(k, "must be at least 2");
         c.folds = static_cast<int>(x);
       }},
      {"kind",
       [&](auto& k, auto& v) {
         if (v != "boxplot" && v != "barplot" && v != "tradeoff") bad(k, "expected boxplot, barplot or tradeoff");
         c.kind = v;
       }},
      {"results", [&](auto&, auto& v) { c.results = path_of(v); }},
      {"timings", [&](auto&, auto& v) { c.timings = path_of(v); }},
      {"seed",
       [&](auto& k, auto& v) {
         const long long x = to_int(k, v);
         if (x < 0) bad(k, "must be nonnegative");
         c.seed = static_cast<std::uint64_t>(x);
       }},
      {"jobs", [&](auto& k, auto& v) { c.jobs = static_cast<int>(positive_count(k, v)); }},
      {"out", [&](auto&, auto& v) { c.output_dir = v; }},
  };

  for (const auto& [key, value] : file.entries()) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'");
    if (value.empty()) bad(key, "missing value");
    it->second(key, value);
  }

  if (!(c.fit.h_lower > 0.0 && c.fit.h_upper > c.fit.h_lower)) {
    throw Error(ErrorCode::ConfigError, "bandwidth box must satisfy 0 < h_lower < h_upper");
  }
  if (beta0) {
    if (file.has("p") && static_cast<std::size_t>(beta0->size()) != c.p) {
      throw Error(ErrorCode::ConfigError, "beta0 length does not match p");
    }
    c.p = static_cast<std::size_t>(beta0->size());
    c.beta0 = *beta0;
  } else {
    c.beta0.resize(static_cast<Eigen::Index>(c.p));
    for (Eigen::Index j = 0; j < c.beta0.size(); ++j) c.beta0[j] = j % 2 == 0 ? 1.0 : -1.0;
    c.beta0.normalize();
  }
  if (has_data) {
    if (data.responses.size() < 3) throw Error(ErrorCode::ConfigError, "data needs at least 3 response columns");
    c.data = std::move(data);
  } else if (!data.responses.empty() || !data.continuous.empty() || !data.categorical.empty()) {
    throw Error(ErrorCode::ConfigError, "column mapping given without a data file");
  }
  c.fit.seed = c.seed;
  return c;
}

}  // namespace sphindex
