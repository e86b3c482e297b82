#include "biasprobe/special_functions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace biasprobe {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 100000;

constexpr std::array<double, 9> kLanczos{
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7,
};

void check_domain(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::domain_error("incomplete gamma requires a > 0, got a = " + std::to_string(a));
  }
  if (!(x >= 0.0) || std::isnan(x)) {
    throw std::domain_error("incomplete gamma requires x >= 0, got x = " + std::to_string(x));
  }
}

// exp(-x) x^a / Γ(a), evaluated in log space.
double prefactor(double a, double x) { return std::exp(-x + a * std::log(x) - log_gamma(a)); }

// P(a,x) by its power series; converges quickly for x < a + 1.
double lower_series(double a, double x) {
  double denom = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < kMaxIterations; ++n) {
    denom += 1.0;
    term *= x / denom;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) return sum * prefactor(a, x);
  }
  throw std::runtime_error("incomplete gamma series did not converge");
}

// Q(a,x) by the modified Lentz continued fraction; valid for x >= a + 1.
double upper_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return prefactor(a, x) * h;
  }
  throw std::runtime_error("incomplete gamma continued fraction did not converge");
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma requires x > 0");
  if (x < 0.5) {
    // Γ(x) Γ(1-x) = π / sin(πx)
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - log_gamma(1.0 - x);
  }
  const double z = x - 1.0;
  double sum = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) sum += kLanczos[i] / (z + static_cast<double>(i));
  const double t = z + 7.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(sum);
}

double regularized_gamma_p(double a, double x) {
  check_domain(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return std::min(1.0, lower_series(a, x));
  return std::max(0.0, 1.0 - upper_fraction(a, x));
}

double regularized_gamma_q(double a, double x) {
  check_domain(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return std::max(0.0, 1.0 - lower_series(a, x));
  return std::min(1.0, upper_fraction(a, x));
}

double chi_squared_sf(double statistic, int df) {
  if (df < 1) throw std::domain_error("chi-squared requires df >= 1");
  if (statistic < 0.0) throw std::domain_error("chi-squared statistic must be >= 0");
  return regularized_gamma_q(0.5 * df, 0.5 * statistic);
}

}  // namespace biasprobe
