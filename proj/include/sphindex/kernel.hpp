#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string_view>

namespace sphindex {

enum class KernelFamily { Gaussian, Epanechnikov, Quartic };

std::string_view to_string(KernelFamily family) noexcept;
KernelFamily parse_kernel_family(std::string_view name);

// A symmetric probability density K on the real line; K_h(t) = K(t/h)/h.
struct KernelSpec {
  KernelFamily family = KernelFamily::Epanechnikov;

  double operator()(double t) const noexcept {
    switch (family) {
      case KernelFamily::Gaussian:
        return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
      case KernelFamily::Epanechnikov:
        return std::abs(t) < 1.0 ? 0.75 * (1.0 - t * t) : 0.0;
      case KernelFamily::Quartic: {
        if (std::abs(t) >= 1.0) return 0.0;
        const double s = 1.0 - t * t;
        return 15.0 / 16.0 * s * s;
      }
    }
    return 0.0;
  }

  double scaled(double t, double h) const noexcept { return (*this)(t / h) / h; }

  // Half-width of the support in units of h (infinite for the Gaussian).
  double support() const noexcept {
    return family == KernelFamily::Gaussian ? std::numeric_limits<double>::infinity() : 1.0;
  }

  // nu_2 = int t^2 K(t) dt
  double second_moment() const noexcept {
    switch (family) {
      case KernelFamily::Gaussian: return 1.0;
      case KernelFamily::Epanechnikov: return 1.0 / 5.0;
      case KernelFamily::Quartic: return 1.0 / 7.0;
    }
    return 0.0;
  }

  // omega_0 = int K(t)^2 dt
  double roughness() const noexcept {
    switch (family) {
      case KernelFamily::Gaussian: return 1.0 / (2.0 * std::sqrt(std::numbers::pi));
      case KernelFamily::Epanechnikov: return 3.0 / 5.0;
      case KernelFamily::Quartic: return 5.0 / 7.0;
    }
    return 0.0;
  }
};

}  // namespace sphindex
