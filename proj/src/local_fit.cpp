#include "sphindex/local_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace sphindex {

std::string_view to_string(KernelFamily family) noexcept {
  switch (family) {
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Epanechnikov: return "epanechnikov";
    case KernelFamily::Quartic: return "quartic";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "gaussian") return KernelFamily::Gaussian;
  if (name == "epanechnikov") return KernelFamily::Epanechnikov;
  if (name == "quartic") return KernelFamily::Quartic;
  throw Error(ErrorCode::ConfigError, "unknown kernel '" + std::string(name) + "'");
}

LocalSmoother::LocalSmoother(const Eigen::Ref<const Eigen::VectorXd>& U,
                             const Eigen::Ref<const Eigen::MatrixXd>& Y, KernelSpec kernel,
                             LocalFitOptions options)
    : kernel_(kernel), options_(options), d_(static_cast<int>(Y.cols())) {
  if (U.size() != Y.rows()) throw Error(ErrorCode::DimensionMismatch, "index and responses are not aligned");
  if (U.size() == 0) throw Error(ErrorCode::SingularDesign, "empty sample");
  if (!U.allFinite() || !Y.allFinite()) throw Error(ErrorCode::NonFinite, "index values and responses must be finite");
  const auto n = static_cast<std::size_t>(U.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t i, std::size_t j) {
    return U[static_cast<Eigen::Index>(i)] < U[static_cast<Eigen::Index>(j)];
  });
  rank_.resize(n);
  u_.resize(n);
  y_.resize(n * static_cast<std::size_t>(d_));
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(order_[k]);
    rank_[order_[k]] = k;
    u_[k] = U[i];
    for (int c = 0; c < d_; ++c) y_[k * static_cast<std::size_t>(d_) + static_cast<std::size_t>(c)] = Y(i, c);
  }
}

// The active part of a window: sorted positions with nonzero kernel weight,
// their scaled offsets and kernel weights.
struct LocalWindow {
  std::vector<std::size_t> pos;
  std::vector<double> t;
  std::vector<double> k;
  std::vector<double> w;   // combined weights for the current solve
  std::vector<double> sq;  // squared residual norms at the current iterate
  std::vector<double> sq_trial;
};

namespace {

thread_local LocalWindow tls_window;

}  // namespace

bool LocalSmoother::solve_window(const LocalWindow& win, const double* weights, double* a, double* b_scaled,
                                 double* s0_out) const {
  const auto d = static_cast<std::size_t>(d_);
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  double t0[16] = {}, t1[16] = {};
  std::vector<double> big0, big1;
  double* T0 = t0;
  double* T1 = t1;
  if (d > 16) {
    big0.assign(d, 0.0);
    big1.assign(d, 0.0);
    T0 = big0.data();
    T1 = big1.data();
  }
  const std::size_t m = win.pos.size();
  for (std::size_t j = 0; j < m; ++j) {
    const double w = weights[j];
    const double t = win.t[j];
    s0 += w;
    s1 += w * t;
    s2 += w * t * t;
    const double* y = &y_[win.pos[j] * d];
    const double wt = w * t;
    for (std::size_t c = 0; c < d; ++c) {
      T0[c] += w * y[c];
      T1[c] += wt * y[c];
    }
  }
  if (!(s0 > 0.0)) return false;
  const double m1 = s1 / s0;
  const double m2 = s2 / s0;
  const double det = m2 - m1 * m1;
  const double tr = 1.0 + m2;
  const double lmax = 0.5 * (tr + std::sqrt((1.0 - m2) * (1.0 - m2) + 4.0 * m1 * m1));
  if (!(det > 0.0) || lmax / (det / lmax) > options_.max_condition) return false;
  for (std::size_t c = 0; c < d; ++c) {
    const double n0 = T0[c] / s0;
    const double n1 = T1[c] / s0;
    a[c] = (m2 * n0 - m1 * n1) / det;
    b_scaled[c] = (n1 - m1 * n0) / det;
  }
  *s0_out = s0;
  return true;
}

void LocalSmoother::gather(LocalWindow& win, double u, double h, std::ptrdiff_t skip) const {
  std::size_t lo = 0, hi = u_.size();
  const double reach = h * kernel_.support();
  if (std::isfinite(reach)) {
    lo = static_cast<std::size_t>(std::lower_bound(u_.begin(), u_.end(), u - reach) - u_.begin());
    hi = static_cast<std::size_t>(std::upper_bound(u_.begin(), u_.end(), u + reach) - u_.begin());
  }
  win.pos.clear();
  win.t.clear();
  win.k.clear();
  for (std::size_t j = lo; j < hi; ++j) {
    if (static_cast<std::ptrdiff_t>(j) == skip) continue;
    const double t = (u_[j] - u) / h;
    const double k = kernel_(t);
    if (k == 0.0) continue;
    win.pos.push_back(j);
    win.t.push_back(t);
    win.k.push_back(k);
  }
}

// rho(s) with s = |r|^2: the first two derivatives in s, up to a common
// positive factor.
static std::pair<double, double> rho_derivatives(const LossSpec& loss, double s) {
  if (loss.family == LossFamily::ESL) {
    const double e = std::exp(-s / loss.lambda);
    return {e, -e / loss.lambda};
  }
  const double c2 = loss.huber_c * loss.huber_c;
  if (s <= c2) return {1.0, 0.0};
  const double r = std::sqrt(s);
  return {loss.huber_c / r, -0.5 * loss.huber_c / (s * r)};
}

bool LocalSmoother::newton_step(const LocalWindow& win, const LossSpec& loss, const Eigen::VectorXd& a,
                                const Eigen::VectorXd& bs, Eigen::VectorXd& a_new, Eigen::VectorXd& bs_new) const {
  const auto d = static_cast<Eigen::Index>(d_);
  thread_local Eigen::MatrixXd H;
  thread_local Eigen::VectorXd g;
  thread_local Eigen::VectorXd r;
  H.setZero(2 * d, 2 * d);
  g.setZero(2 * d);
  r.resize(d);
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  const std::size_t m = win.pos.size();
  for (std::size_t j = 0; j < m; ++j) {
    const double* y = &y_[win.pos[j] * static_cast<std::size_t>(d)];
    const double t = win.t[j];
    for (Eigen::Index c = 0; c < d; ++c) r[c] = y[c] - a[c] - bs[c] * t;
    const auto [d1, d2] = rho_derivatives(loss, win.sq[j]);
    const double k = win.k[j];
    g.head(d) -= (2.0 * k * d1) * r;
    g.tail(d) -= (2.0 * k * d1 * t) * r;
    c0 += 2.0 * k * d1;
    c1 += 2.0 * k * d1 * t;
    c2 += 2.0 * k * d1 * t * t;
    if (d2 != 0.0) {
      const double q = 4.0 * k * d2;
      for (Eigen::Index p = 0; p < d; ++p) {
        for (Eigen::Index s = 0; s <= p; ++s) {
          const double v = q * r[p] * r[s];
          H(p, s) += v;
          H(d + p, s) += v * t;
          H(d + p, d + s) += v * t * t;
        }
      }
    }
  }
  for (Eigen::Index p = 0; p < d; ++p) {
    for (Eigen::Index s = 0; s < p; ++s) {
      H(s, p) = H(p, s);
      H(d + s, d + p) = H(d + p, d + s);
      H(d + s, p) = H(d + p, s);
    }
  }
  H.bottomLeftCorner(d, d).diagonal().array() += c1;
  H.topRightCorner(d, d) = H.bottomLeftCorner(d, d).transpose();
  H.topLeftCorner(d, d).diagonal().array() += c0;
  H.bottomRightCorner(d, d).diagonal().array() += c2;
  if (!(c0 > 0.0) || !H.allFinite()) return false;
  const Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd delta = llt.solve(-g);
  if (!delta.allFinite()) return false;
  a_new = a + delta.head(d);
  bs_new = bs + delta.tail(d);
  return true;
}

LocalFit LocalSmoother::fit(double u, double h, const LossSpec& loss, std::ptrdiff_t exclude,
                            const LocalFit* init) const {
  validate(loss);
  if (!(h > 0.0) || !std::isfinite(h) || !std::isfinite(u)) {
    throw Error(ErrorCode::NonFinite, "local fit needs a finite location and a positive bandwidth");
  }
  if (exclude >= static_cast<std::ptrdiff_t>(size())) throw Error(ErrorCode::DimensionMismatch, "excluded row out of range");
  const std::ptrdiff_t skip = exclude >= 0 ? static_cast<std::ptrdiff_t>(rank_[static_cast<std::size_t>(exclude)]) : -1;
  const auto d = static_cast<std::size_t>(d_);
  LocalWindow& win = tls_window;

  // Distance from u to the second-closest distinct index value, the smallest
  // bandwidth whose window could hold two effective points.
  auto nearest_neighbor_bandwidth = [&]() {
    double d1 = std::numeric_limits<double>::infinity(), v1 = 0.0;
    for (std::size_t j = 0; j < u_.size(); ++j) {
      if (static_cast<std::ptrdiff_t>(j) == skip) continue;
      const double dist = std::abs(u_[j] - u);
      if (dist < d1) d1 = dist, v1 = u_[j];
    }
    double d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < u_.size(); ++j) {
      if (static_cast<std::ptrdiff_t>(j) == skip || u_[j] == v1) continue;
      d2 = std::min(d2, std::abs(u_[j] - u));
    }
    return d2;
  };

  double hh = h;
  for (int attempt = 0; attempt <= options_.max_widen; ++attempt) {
    if (attempt == 1) {
      const double nn = nearest_neighbor_bandwidth();
      if (!std::isfinite(nn)) break;
      hh = std::max(h, nn) * options_.widen_factor;
    } else if (attempt > 1) {
      hh *= options_.widen_factor;
    }
    gather(win, u, hh, skip);
    LocalFit out;
    out.a.resize(d_);
    out.b.resize(d_);
    Eigen::VectorXd bs(d_);
    double s0 = 0.0;
    if (!solve_window(win, win.k.data(), out.a.data(), bs.data(), &s0)) continue;
    out.effective_weight_sum = s0 / hh;
    out.bandwidth = hh;
    if (loss.family == LossFamily::LS) {
      out.b = bs / hh;
      return out;
    }

    if (init != nullptr && init->a.size() == d_ && init->b.size() == d_) {
      out.a = init->a;
      bs = init->b * hh;
    }

    const std::size_t m = win.pos.size();
    win.w.resize(m);
    win.sq.resize(m);
    win.sq_trial.resize(m);
    auto residuals = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b, std::vector<double>& sq_out) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double* y = &y_[win.pos[j] * d];
        const double t = win.t[j];
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double r = y[c] - a[static_cast<Eigen::Index>(c)] - b[static_cast<Eigen::Index>(c)] * t;
          sq += r * r;
        }
        sq_out[j] = sq;
        acc += loss_value(loss, sq) * win.k[j];
      }
      return acc / hh;
    };
    double objective = residuals(out.a, bs, win.sq);
    if (options_.record_trace) out.objective_trace.push_back(objective);

    const bool smooth = options_.newton && (loss.family == LossFamily::ESL || loss.family == LossFamily::Huber);
    Eigen::VectorXd a_new(d_), bs_new(d_);
    out.converged = false;
    for (int it = 1; it <= options_.max_iter; ++it) {
      bool accepted = false;
      if (smooth && newton_step(win, loss, out.a, bs, a_new, bs_new)) {
        const double trial = residuals(a_new, bs_new, win.sq_trial);
        if (trial <= objective) {
          accepted = true;
          objective = trial;
          std::swap(win.sq, win.sq_trial);
        }
      }
      double top = 0.0;
      if (!accepted) {
        for (std::size_t j = 0; j < m; ++j) {
          win.w[j] = irls_weight(loss, win.sq[j]);
          top = std::max(top, win.w[j]);
        }
        if (!(top > 0.0)) break;
        for (std::size_t j = 0; j < m; ++j) win.w[j] *= win.k[j] / top;
        if (!solve_window(win, win.w.data(), a_new.data(), bs_new.data(), &s0)) break;
        objective = residuals(a_new, bs_new, win.sq);
      }
      const double step = std::sqrt((a_new - out.a).squaredNorm() + (bs_new - bs).squaredNorm());
      const double size = std::sqrt(a_new.squaredNorm() + bs_new.squaredNorm());
      out.a = a_new;
      bs = bs_new;
      out.iterations = it;
      if (options_.record_trace) out.objective_trace.push_back(objective);
      if (step <= options_.tol * std::max(size, 1e-12)) {
        out.converged = true;
        break;
      }
    }
    double wsum = 0.0;
    for (std::size_t j = 0; j < m; ++j) wsum += irls_weight(loss, win.sq[j]) * win.k[j];
    out.effective_weight_sum = wsum / hh;
    out.b = bs / hh;
    return out;
  }
  throw Error(ErrorCode::SingularDesign,
              "degenerate local design at u = " + std::to_string(u) + " even after widening the bandwidth");
}

LocalFit local_linear_ls(double u, const Eigen::VectorXd& U, const Eigen::MatrixXd& Y, double h,
                         const KernelSpec& kernel, const LocalFitOptions& options) {
  return LocalSmoother(U, Y, kernel, options).fit_ls(u, h);
}

LocalFit local_linear_m(double u, const Eigen::VectorXd& U, const Eigen::MatrixXd& Y, double h,
                        const KernelSpec& kernel, const LossSpec& loss, const std::optional<LocalFit>& init,
                        const LocalFitOptions& options) {
  LocalSmoother s(U, Y, kernel, options);
  return s.fit(u, h, loss, -1, init ? &*init : nullptr);
}

LooFits loo_fits(const LocalSmoother& smoother, double h, const LossSpec& loss) {
  const auto n = smoother.size();
  if (n < 3) throw Error(ErrorCode::SingularDesign, "leave-one-out fits need n >= 3");
  LooFits out;
  out.fits = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), smoother.dim());
  out.valid.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const LocalFit f = smoother.fit(smoother.index(i), h, loss, static_cast<std::ptrdiff_t>(i));
      out.fits.row(static_cast<Eigen::Index>(i)) = f.a.transpose();
      out.valid[i] = 1;
      if (!f.converged) ++out.unconverged;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularDesign) throw;
      ++out.excluded;
    }
  }
  return out;
}

LooFits loo_fits(const Eigen::VectorXd& U, const Eigen::MatrixXd& Y, double h, const KernelSpec& kernel,
                 const LossSpec& loss, const LocalFitOptions& options) {
  return loo_fits(LocalSmoother(U, Y, kernel, options), h, loss);
}

CriterionValue evaluate_criterion(const IndexParam& theta, double h, const Dataset& data, const LossSpec& loss,
                                  const KernelSpec& kernel, const LocalFitOptions& options) {
  const Eigen::VectorXd U = data.X() * beta_from_theta(theta);
  const LocalSmoother smoother(U, data.Y(), kernel, options);
  const LooFits loo = loo_fits(smoother, h, loss);
  if (loo.excluded == loo.valid.size()) {
    throw Error(ErrorCode::SingularDesign, "every leave-one-out window is degenerate");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (!loo.valid[static_cast<std::size_t>(i)]) continue;
    acc += loss_value(loss, (data.Y().row(i) - loo.fits.row(i)).squaredNorm());
  }
  return {acc / static_cast<double>(loo.valid.size() - loo.excluded), loo.excluded};
}

double criterion(const IndexParam& theta, double h, const Dataset& data, const LossSpec& loss,
                 const KernelSpec& kernel) {
  return evaluate_criterion(theta, h, data, loss, kernel).value;
}

}  // namespace sphindex
