#pragma once

namespace biasprobe {

// ln Γ(x) for x > 0 (Lanczos, g = 7, nine coefficients; reflection below 0.5).
double log_gamma(double x);

// Lower and upper regularized incomplete gamma functions, P(a,x) + Q(a,x) = 1.
// Series expansion for x < a + 1, Lentz continued fraction otherwise.
// Throws std::domain_error unless a > 0 and x >= 0.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Upper tail of the chi-squared distribution: Q(df/2, statistic/2).
double chi_squared_sf(double statistic, int df);

}  // namespace biasprobe
