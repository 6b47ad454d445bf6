#pragma once

// Distribution kernels used by the tests: standard normal, Student t,
// chi-square with one degree of freedom, and the binomial tail.

#include <cstdint>

namespace sab {

/// Standard normal CDF. Evaluated through erfc so that both tails keep
/// full relative precision.
double normal_cdf(double z);

/// Upper tail 1 - Phi(z), accurate for large z.
double normal_sf(double z);

/// Standard normal density.
double normal_pdf(double z);

/// Inverse of normal_cdf on (0,1). Acklam's rational approximation followed
/// by one Newton step against normal_cdf. Throws RangeError outside (0,1).
double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Student t CDF with (possibly non-integer) df > 0. df = +inf gives the normal.
double student_t_cdf(double t, double df);

/// Two-sided p-value P(|T| >= |t|).
double student_t_two_sided_p(double t, double df);

/// Inverse Student t CDF on (0,1).
double student_t_quantile(double p, double df);

/// Upper tail of chi-square with one degree of freedom.
double chi_square1_sf(double x);

/// P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::uint64_t k, std::uint64_t n, double p);

} // namespace sab
