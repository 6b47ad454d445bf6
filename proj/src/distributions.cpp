#include "sab/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sab/errors.hpp"

namespace sab {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Acklam's rational approximation of the normal quantile, relative error
// about 1.15e-9 over (0,1). Coefficients as published by P. J. Acklam.
double acklam_quantile(double p)
{
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x)
{
    constexpr int max_iter = 10000;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

// I_x(a,b) given both x and y = 1 - x, so callers that know y exactly
// (t distribution near zero) do not lose it to cancellation.
double incomplete_beta_xy(double a, double b, double x, double y)
{
    if (x <= 0.0) return 0.0;
    if (y <= 0.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log(y);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

double student_t_pdf(double t, double df)
{
    const double log_norm = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                            0.5 * std::log(df * std::numbers::pi);
    return std::exp(log_norm - 0.5 * (df + 1.0) * std::log1p(t * t / df));
}

} // namespace

double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z * kInvSqrt2);
}

double normal_sf(double z)
{
    return 0.5 * std::erfc(z * kInvSqrt2);
}

double normal_pdf(double z)
{
    return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw RangeError("normal_quantile: probability must lie strictly inside (0,1)");
    }
    // Refine in the lower half only; 1 - p is exact for p >= 0.5.
    if (p > 0.5) return -normal_quantile(1.0 - p);
    double x = acklam_quantile(p);
    const double err = normal_cdf(x) - p;
    x -= err / normal_pdf(x);
    return x;
}

double incomplete_beta(double a, double b, double x)
{
    if (!(a > 0.0 && b > 0.0)) throw RangeError("incomplete_beta: shape parameters must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw RangeError("incomplete_beta: x must lie in [0,1]");
    return incomplete_beta_xy(a, b, x, 1.0 - x);
}

double student_t_cdf(double t, double df)
{
    if (!(df > 0.0)) throw RangeError("student_t_cdf: df must be positive");
    if (std::isinf(df)) return normal_cdf(t);
    if (t == 0.0) return 0.5;
    const double t2 = t * t;
    // P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    const double x = df / (df + t2);
    const double y = t2 / (df + t2);
    const double tail2 = incomplete_beta_xy(0.5 * df, 0.5, x, y);
    return t > 0.0 ? 1.0 - 0.5 * tail2 : 0.5 * tail2;
}

double student_t_two_sided_p(double t, double df)
{
    if (!(df > 0.0)) throw RangeError("student_t_two_sided_p: df must be positive");
    if (std::isinf(df)) return 2.0 * normal_sf(std::fabs(t));
    if (t == 0.0) return 1.0;
    const double t2 = t * t;
    return incomplete_beta_xy(0.5 * df, 0.5, df / (df + t2), t2 / (df + t2));
}

double student_t_quantile(double p, double df)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw RangeError("student_t_quantile: probability must lie strictly inside (0,1)");
    }
    if (!(df > 0.0)) throw RangeError("student_t_quantile: df must be positive");
    if (std::isinf(df)) return normal_quantile(p);
    if (p == 0.5) return 0.0;
    if (p > 0.5) return -student_t_quantile(1.0 - p, df);

    // Lower half: root is negative. Bracket, then safeguarded Newton.
    double hi = 0.0;
    double lo = std::min(-1.0, normal_quantile(p));
    while (student_t_cdf(lo, df) > p) {
        hi = lo;
        lo *= 2.0;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 200; ++i) {
        const double f = student_t_cdf(x, df) - p;
        if (f > 0.0) hi = x; else lo = x;
        double next = x - f / student_t_pdf(x, df);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) <= 1e-15 * std::max(1.0, std::fabs(x))) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

double chi_square1_sf(double x)
{
    if (x <= 0.0) return 1.0;
    return std::erfc(std::sqrt(0.5 * x));
}

double binomial_upper_tail(std::uint64_t k, std::uint64_t n, double p)
{
    if (!(p >= 0.0 && p <= 1.0)) throw RangeError("binomial_upper_tail: p must lie in [0,1]");
    if (k == 0) return 1.0;
    if (k > n) return 0.0;
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;
    return incomplete_beta_xy(static_cast<double>(k), static_cast<double>(n - k + 1), p, 1.0 - p);
}

} // namespace sab
