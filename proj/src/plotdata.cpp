#include "sphindex/plotdata.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

namespace sphindex {

PlotKind parse_plot_kind(const std::string& name) {
  if (name == "boxplot") return PlotKind::Boxplot;
  if (name == "barplot") return PlotKind::Barplot;
  if (name == "tradeoff") return PlotKind::Tradeoff;
  throw Error(ErrorCode::ConfigError, "unknown plot kind '" + name + "'");
}

namespace {

double safe_log(double x) { return x > 0.0 ? std::log(x) : std::numeric_limits<double>::quiet_NaN(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

template <typename F>
double or_nan(F&& f) {
  try {
    return f();
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

std::string boxplot_csv(const std::vector<ResultRow>& rows, const RunMetadata& meta) {
  std::ostringstream out;
  out << csv_metadata(meta) << "replication,curve,n,loss,kappa,epsilon,log_bias,log_mse,log_mspe\n";
  for (const auto& r : rows) {
    out << r.replication << ',' << r.curve << ',' << r.n << ',' << to_string(r.loss) << ',' << format_double(r.kappa)
        << ',' << format_double(r.epsilon) << ',' << format_double(safe_log(r.bias)) << ','
        << format_double(safe_log(r.mse)) << ',' << format_double(safe_log(r.mspe)) << '\n';
  }
  return out.str();
}

std::string barplot_csv(const std::vector<ResultRow>& rows, const RunMetadata& meta) {
  std::map<std::tuple<std::string, std::size_t, std::string>, std::vector<double>> groups;
  for (const auto& r : rows) {
    if (!(r.fit_seconds > 0.0)) throw Error(ErrorCode::MalformedResults, "barplot needs positive fit times");
    groups[{r.curve, r.n, std::string(to_string(r.loss))}].push_back(r.fit_seconds);
  }
  std::ostringstream out;
  out << csv_metadata(meta) << "curve,n,loss,fits,median_fit_seconds\n";
  for (const auto& [key, secs] : groups) {
    const auto& [curve, n, loss] = key;
    out << curve << ',' << n << ',' << loss << ',' << secs.size() << ',' << format_double(median(secs)) << '\n';
  }
  return out.str();
}

std::string tradeoff_csv(const std::vector<int>& dims, double w_efficiency, double w_robustness,
                         const RunMetadata& meta) {
  std::ostringstream out;
  out << csv_metadata(meta) << "d,delta,K,c,R,Q,ARE,L\n";
  for (int d : dims) {
    for (int k = 1; k <= 199; ++k) {
      const double delta = k / 200.0;
      out << d << ',' << format_double(delta) << ',' << format_double(k_delta(delta, d)) << ','
          << format_double(c_delta(delta, d)) << ',' << format_double(or_nan([&] { return r_delta(delta, d); }))
          << ',' << format_double(q_delta(delta, d)) << ','
          << format_double(or_nan([&] { return are_esl(delta, d); })) << ','
          << format_double(or_nan([&] { return tradeoff_criterion(delta, d, w_efficiency, w_robustness); }))
          << '\n';
    }
  }
  return out.str();
}

}  // namespace sphindex
