#include "sphindex/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace sphindex {

namespace {

struct Simplex {
  std::vector<Eigen::VectorXd> x;
  std::vector<double> f;
};

bool better(double a, double b) { return a < b || (std::isnan(b) && !std::isnan(a)); }

double sanitize(double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; }

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& steps, const NelderMeadOptions& options) {
  const Eigen::Index k = x0.size();
  NelderMeadResult out;
  out.x = x0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++out.evaluations;
    return sanitize(f(x));
  };
  out.value = eval(x0);
  if (k == 0) {
    out.converged = true;
    return out;
  }

  for (int round = 0; round <= options.restarts; ++round) {
    Simplex s;
    s.x.push_back(out.x);
    s.f.push_back(out.value);
    for (Eigen::Index j = 0; j < k; ++j) {
      Eigen::VectorXd v = out.x;
      v[j] += steps[j];
      s.x.push_back(v);
      s.f.push_back(eval(v));
    }
    const double start_value = out.value;
    std::vector<std::size_t> idx(static_cast<std::size_t>(k + 1));
    bool converged = false;
    while (out.evaluations < options.max_evaluations) {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return better(s.f[a], s.f[b]); });
      const std::size_t best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];

      double diameter = 0.0;
      for (std::size_t i = 1; i < idx.size(); ++i) {
        diameter = std::max(diameter, (s.x[idx[i]] - s.x[best]).lpNorm<Eigen::Infinity>());
      }
      const double spread = s.f[worst] - s.f[best];
      if (std::isfinite(s.f[worst]) && spread <= options.f_tol * (std::abs(s.f[best]) + 1e-12) &&
          diameter <= options.x_tol) {
        converged = true;
        break;
      }
      if (diameter <= 1e-3 * options.x_tol) {
        converged = true;
        break;
      }

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(k);
      for (std::size_t i = 0; i + 1 < idx.size(); ++i) centroid += s.x[idx[i]];
      centroid /= static_cast<double>(k);

      const Eigen::VectorXd xr = centroid + (centroid - s.x[worst]);
      const double fr = eval(xr);
      if (better(fr, s.f[best])) {
        const Eigen::VectorXd xe = centroid + 2.0 * (centroid - s.x[worst]);
        const double fe = eval(xe);
        if (better(fe, fr)) {
          s.x[worst] = xe;
          s.f[worst] = fe;
        } else {
          s.x[worst] = xr;
          s.f[worst] = fr;
        }
        continue;
      }
      if (better(fr, s.f[second])) {
        s.x[worst] = xr;
        s.f[worst] = fr;
        continue;
      }
      const bool outside = better(fr, s.f[worst]);
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                         : Eigen::VectorXd(centroid + 0.5 * (s.x[worst] - centroid));
      const double fc = eval(xc);
      if (better(fc, outside ? fr : s.f[worst]) || fc == (outside ? fr : s.f[worst])) {
        s.x[worst] = xc;
        s.f[worst] = fc;
        continue;
      }
      for (std::size_t i = 1; i < idx.size(); ++i) {
        s.x[idx[i]] = s.x[best] + 0.5 * (s.x[idx[i]] - s.x[best]);
        s.f[idx[i]] = eval(s.x[idx[i]]);
      }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.f.size(); ++i) {
      if (better(s.f[i], s.f[best])) best = i;
    }
    if (better(s.f[best], out.value) || s.f[best] == out.value) {
      out.x = s.x[best];
      out.value = s.f[best];
    }
    out.converged = converged;
    if (!converged || out.evaluations >= options.max_evaluations) break;
    if (round > 0 && start_value - out.value <= options.f_tol * (std::abs(out.value) + 1e-12)) break;
    if (round < options.restarts) ++out.restarts;
  }
  return out;
}

}  // namespace sphindex
